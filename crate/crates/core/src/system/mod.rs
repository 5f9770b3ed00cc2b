//! The (φ, ψ) system abstraction, its diagonal reductions and derivatives.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

pub mod maps;
pub mod table;

pub use maps::{ErasureCheck, ErasureVariable, FnMap, Identity, Polynomial, SampledCurve};
pub use table::{build_profile_table, DiagonalPoint, ScalarProfileTable};

/// A closed interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Parameter(format!("invalid interval [{lo}, {hi}]")));
        }
        Ok(Interval { lo, hi })
    }

    pub const UNIT: Interval = Interval { lo: 0.0, hi: 1.0 };

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64, slack: f64) -> bool {
        x >= self.lo - slack && x <= self.hi + slack
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }
}

/// Value, first and second derivative of a diagonal reduction together
/// with the Laplacian Σⱼ ∂²f/∂xⱼ² on the diagonal.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
    pub laplacian: f64,
}

/// A nondecreasing map of `arity` arguments.
pub trait MultiMap: Send + Sync + fmt::Debug {
    fn arity(&self) -> usize;

    fn eval(&self, args: &[f64]) -> f64;

    /// Closed-form diagonal jet, if known.
    fn diagonal_jet(&self, _x: f64) -> Option<Jet> {
        None
    }

    /// Exact mean of `eval` over all tuples whose coordinates are drawn
    /// independently from `values` with probabilities `weights`. Maps that
    /// are affine in each argument return `eval` at the weighted mean.
    fn tuple_mean(&self, _values: &[f64], _weights: &[f64]) -> Option<f64> {
        None
    }
}

/// Weighted mean replicated into every argument; used by multilinear maps.
pub(crate) fn multilinear_mean<M: MultiMap + ?Sized>(m: &M, values: &[f64], weights: &[f64]) -> f64 {
    let mut s = 0.0;
    for (v, w) in values.iter().zip(weights) {
        s += v * w;
    }
    let args = vec![s; m.arity()];
    m.eval(&args)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DerivativeMode {
    Analytic,
    /// Finite differences with step `h`; `None` means 1e-4 of the domain width.
    FiniteDifference { h: Option<f64> },
}

/// Selects φ or ψ.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Which {
    Phi,
    Psi,
}

/// The pair (φ, ψ) with domains. φ takes d values from the v domain into
/// the u domain, ψ takes d̃ values from the u domain into the v domain.
#[derive(Clone)]
pub struct SystemFunctions {
    pub phi: Arc<dyn MultiMap>,
    pub psi: Arc<dyn MultiMap>,
    pub u_domain: Interval,
    pub v_domain: Interval,
    pub derivative_mode: DerivativeMode,
    pub name: String,
    /// Smoothing parameter of a smoothed decoder curve, when one is used.
    pub smoothing: Option<f64>,
}

impl fmt::Debug for SystemFunctions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemFunctions")
            .field("name", &self.name)
            .field("d", &self.d())
            .field("d_tilde", &self.d_tilde())
            .field("u_domain", &self.u_domain)
            .field("v_domain", &self.v_domain)
            .field("derivative_mode", &self.derivative_mode)
            .finish()
    }
}

impl SystemFunctions {
    pub fn new(
        phi: Arc<dyn MultiMap>,
        psi: Arc<dyn MultiMap>,
        u_domain: Interval,
        v_domain: Interval,
    ) -> Result<Self> {
        if phi.arity() == 0 || psi.arity() == 0 {
            return Err(Error::Model("arity must be positive".into()));
        }
        let analytic = phi.diagonal_jet(v_domain.lo).is_some() && psi.diagonal_jet(u_domain.lo).is_some();
        Ok(SystemFunctions {
            phi,
            psi,
            u_domain,
            v_domain,
            derivative_mode: if analytic {
                DerivativeMode::Analytic
            } else {
                DerivativeMode::FiniteDifference { h: None }
            },
            name: "custom".into(),
            smoothing: None,
        })
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_derivative_mode(mut self, mode: DerivativeMode) -> Self {
        self.derivative_mode = mode;
        self
    }

    /// φ(v)=v, ψ(u)=u on the unit interval.
    pub fn identity() -> Self {
        Self::new(Arc::new(Identity), Arc::new(Identity), Interval::UNIT, Interval::UNIT)
            .unwrap()
            .named("identity")
    }

    /// Regular (l, r) LDPC ensemble over the BEC with erasure probability
    /// `eps`, in "known" probabilities: φ(v) = 1 − ε∏(1−vⱼ) with l−1
    /// arguments, ψ(u) = ∏uⱼ with r−1 arguments.
    pub fn bec_regular(l: usize, r: usize, eps: f64) -> Result<Self> {
        if l < 2 || r < 2 {
            return Err(Error::Parameter(format!("degrees must be at least 2, got ({l}, {r})")));
        }
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::Parameter(format!("erasure probability {eps} outside [0, 1]")));
        }
        Ok(Self::new(
            Arc::new(ErasureVariable { eps, arity: l - 1 }),
            Arc::new(ErasureCheck { arity: r - 1 }),
            Interval::UNIT,
            Interval::UNIT,
        )?
        .named(format!("bec({l},{r},{eps})")))
    }

    pub fn d(&self) -> usize {
        self.phi.arity()
    }

    pub fn d_tilde(&self) -> usize {
        self.psi.arity()
    }

    pub fn map(&self, which: Which) -> &dyn MultiMap {
        match which {
            Which::Phi => self.phi.as_ref(),
            Which::Psi => self.psi.as_ref(),
        }
    }

    /// Domain of the arguments of `which`.
    pub fn arg_domain(&self, which: Which) -> Interval {
        match which {
            Which::Phi => self.v_domain,
            Which::Psi => self.u_domain,
        }
    }

    fn fd_step(&self, which: Which) -> f64 {
        match self.derivative_mode {
            DerivativeMode::FiniteDifference { h: Some(h) } => h,
            _ => 1e-4 * self.arg_domain(which).width(),
        }
    }

    fn check_arg(&self, which: Which, x: f64) -> Result<()> {
        let dom = self.arg_domain(which);
        if !x.is_finite() || !dom.contains(x, 1e-12 * dom.width()) {
            return Err(Error::Range(format!(
                "{x} outside [{}, {}] for {which:?}",
                dom.lo, dom.hi
            )));
        }
        Ok(())
    }

    /// φ₀(x) = φ(x, …, x) or ψ₀(x) = ψ(x, …, x).
    pub fn diagonal_reduce(&self, which: Which, x: f64) -> Result<f64> {
        self.check_arg(which, x)?;
        let m = self.map(which);
        Ok(m.eval(&vec![x; m.arity()]))
    }

    /// Σⱼ ∂²/∂xⱼ² of `which` on the diagonal point (x, …, x).
    pub fn laplacian_on_diagonal(&self, which: Which, x: f64) -> Result<f64> {
        Ok(self.jet(which, x)?.laplacian)
    }

    /// Diagonal value, derivatives and Laplacian, analytic or by finite
    /// differences depending on `derivative_mode`.
    pub fn jet(&self, which: Which, x: f64) -> Result<Jet> {
        self.check_arg(which, x)?;
        let m = self.map(which);
        if self.derivative_mode == DerivativeMode::Analytic {
            if let Some(j) = m.diagonal_jet(x) {
                return Ok(j);
            }
        }
        self.fd_jet(which, x, self.fd_step(which))
    }

    /// Finite-difference jet with an explicit step.
    pub fn fd_jet(&self, which: Which, x: f64, h: f64) -> Result<Jet> {
        let m = self.map(which);
        let dom = self.arg_domain(which);
        if dom.width() < 3.0 * h {
            return Err(Error::Range(format!("stencil of step {h} does not fit the domain")));
        }
        let n = m.arity();
        let diag = |y: f64| m.eval(&vec![y; n]);
        let value = diag(x);
        let (d1, d2) = stencil(diag, x, h, dom);
        let laplacian = if n == 1 {
            d2
        } else {
            let mut buf = vec![x; n];
            let mut lap = 0.0;
            for j in 0..n {
                let along = |y: f64| {
                    buf[j] = y;
                    let r = m.eval(&buf);
                    buf[j] = x;
                    r
                };
                lap += stencil_mut(along, x, h, dom).1;
            }
            lap
        };
        Ok(Jet { value, d1, d2, laplacian })
    }

    /// Evaluates φ or ψ with an arity check.
    pub fn eval(&self, which: Which, args: &[f64]) -> Result<f64> {
        let m = self.map(which);
        if args.len() != m.arity() {
            return Err(Error::Model(format!(
                "{which:?} has arity {}, got {} arguments",
                m.arity(),
                args.len()
            )));
        }
        Ok(m.eval(args))
    }
}

fn stencil(f: impl Fn(f64) -> f64, x: f64, h: f64, dom: Interval) -> (f64, f64) {
    let mut g = f;
    stencil_mut(&mut g, x, h, dom)
}

/// First and second derivative: central differences in the interior,
/// second-order one-sided stencils within `h` of an endpoint.
fn stencil_mut(mut f: impl FnMut(f64) -> f64, x: f64, h: f64, dom: Interval) -> (f64, f64) {
    if x - h < dom.lo {
        let (f0, f1, f2, f3) = (f(x), f(x + h), f(x + 2.0 * h), f(x + 3.0 * h));
        ((-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * h), (2.0 * f0 - 5.0 * f1 + 4.0 * f2 - f3) / (h * h))
    } else if x + h > dom.hi {
        let (f0, f1, f2, f3) = (f(x), f(x - h), f(x - 2.0 * h), f(x - 3.0 * h));
        ((3.0 * f0 - 4.0 * f1 + f2) / (2.0 * h), (2.0 * f0 - 5.0 * f1 + 4.0 * f2 - f3) / (h * h))
    } else {
        let (fm, f0, fp) = (f(x - h), f(x), f(x + h));
        ((fp - fm) / (2.0 * h), (fp - 2.0 * f0 + fm) / (h * h))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_examples() {
        let s = SystemFunctions::bec_regular(3, 6, 0.45).unwrap();
        assert_eq!(s.diagonal_reduce(Which::Phi, 1.0).unwrap(), 1.0);
        assert_eq!(s.diagonal_reduce(Which::Psi, 0.5).unwrap(), 0.03125);
        let id = SystemFunctions::identity();
        assert_eq!(id.diagonal_reduce(Which::Psi, 0.3).unwrap(), 0.3);
    }

    #[test]
    fn multilinear_laplacians_vanish() {
        let s = SystemFunctions::bec_regular(3, 6, 0.45).unwrap();
        let fd = s.clone().with_derivative_mode(DerivativeMode::FiniteDifference { h: None });
        for x in [0.1, 0.5, 0.9] {
            assert_eq!(s.laplacian_on_diagonal(Which::Psi, x).unwrap(), 0.0);
            assert_eq!(s.laplacian_on_diagonal(Which::Phi, x).unwrap(), 0.0);
            assert!(fd.laplacian_on_diagonal(Which::Psi, x).unwrap().abs() < 1e-6);
            assert!(fd.laplacian_on_diagonal(Which::Phi, x).unwrap().abs() < 1e-6);
        }
    }

    #[test]
    fn cubic_laplacian_is_second_derivative() {
        let cube = Arc::new(Polynomial::new(vec![0.0, 0.0, 0.0, 1.0]));
        let s = SystemFunctions::new(Arc::new(Identity), cube, Interval::UNIT, Interval::UNIT).unwrap();
        assert!((s.laplacian_on_diagonal(Which::Psi, 0.5).unwrap() - 3.0).abs() < 1e-12);
        let fd = s.with_derivative_mode(DerivativeMode::FiniteDifference { h: None });
        let j = fd.jet(Which::Psi, 0.5).unwrap();
        assert!((j.laplacian - 3.0).abs() < 1e-6);
        assert_eq!(j.laplacian, j.d2);
    }

    #[test]
    fn out_of_domain_is_range_error() {
        let s = SystemFunctions::identity();
        assert!(matches!(s.diagonal_reduce(Which::Phi, 1.5), Err(Error::Range(_))));
        assert!(matches!(s.jet(Which::Psi, f64::NAN), Err(Error::Range(_))));
    }

    #[test]
    fn arity_mismatch_is_model_error() {
        let s = SystemFunctions::bec_regular(3, 6, 0.45).unwrap();
        assert!(matches!(s.eval(Which::Phi, &[0.5]), Err(Error::Model(_))));
    }

    #[test]
    fn one_sided_stencils_at_endpoints() {
        let q = Arc::new(Polynomial::new(vec![0.1, 0.2, 0.3]));
        let s = SystemFunctions::new(q.clone(), q, Interval::UNIT, Interval::UNIT)
            .unwrap()
            .with_derivative_mode(DerivativeMode::FiniteDifference { h: None });
        for x in [0.0, 1.0] {
            let j = s.jet(Which::Phi, x).unwrap();
            assert!((j.d1 - (0.2 + 0.6 * x)).abs() < 1e-8);
            assert!((j.d2 - 0.6).abs() < 1e-4);
        }
    }
}
