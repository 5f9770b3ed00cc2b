//! Built-in system maps.

use std::fmt;
use std::sync::Arc;

use super::{multilinear_mean, Jet, MultiMap};
use crate::error::{Error, Result};

/// f(x) = x.
#[derive(Clone, Copy, Debug)]
pub struct Identity;

impl MultiMap for Identity {
    fn arity(&self) -> usize {
        1
    }
    fn eval(&self, args: &[f64]) -> f64 {
        args[0]
    }
    fn diagonal_jet(&self, x: f64) -> Option<Jet> {
        Some(Jet { value: x, d1: 1.0, d2: 0.0, laplacian: 0.0 })
    }
    fn tuple_mean(&self, values: &[f64], weights: &[f64]) -> Option<f64> {
        Some(multilinear_mean(self, values, weights))
    }
}

/// Variable-node update over the BEC: 1 − ε∏(1 − vⱼ).
#[derive(Clone, Copy, Debug)]
pub struct ErasureVariable {
    pub eps: f64,
    pub arity: usize,
}

impl MultiMap for ErasureVariable {
    fn arity(&self) -> usize {
        self.arity
    }
    fn eval(&self, args: &[f64]) -> f64 {
        let mut p = self.eps;
        for a in args {
            p *= 1.0 - a;
        }
        1.0 - p
    }
    fn diagonal_jet(&self, x: f64) -> Option<Jet> {
        let d = self.arity as i32;
        let y = 1.0 - x;
        let dd = d as f64;
        Some(Jet {
            value: 1.0 - self.eps * y.powi(d),
            d1: self.eps * dd * y.powi(d - 1),
            d2: if d >= 2 { -self.eps * dd * (dd - 1.0) * y.powi(d - 2) } else { 0.0 },
            laplacian: 0.0,
        })
    }
    fn tuple_mean(&self, values: &[f64], weights: &[f64]) -> Option<f64> {
        Some(multilinear_mean(self, values, weights))
    }
}

/// Check-node update over the BEC: ∏uⱼ.
#[derive(Clone, Copy, Debug)]
pub struct ErasureCheck {
    pub arity: usize,
}

impl MultiMap for ErasureCheck {
    fn arity(&self) -> usize {
        self.arity
    }
    fn eval(&self, args: &[f64]) -> f64 {
        args.iter().product()
    }
    fn diagonal_jet(&self, x: f64) -> Option<Jet> {
        let d = self.arity as i32;
        let dd = d as f64;
        Some(Jet {
            value: x.powi(d),
            d1: dd * x.powi(d - 1),
            d2: if d >= 2 { dd * (dd - 1.0) * x.powi(d - 2) } else { 0.0 },
            laplacian: 0.0,
        })
    }
    fn tuple_mean(&self, values: &[f64], weights: &[f64]) -> Option<f64> {
        Some(multilinear_mean(self, values, weights))
    }
}

/// Single-variable polynomial Σ cₖ xᵏ.
#[derive(Clone, Debug)]
pub struct Polynomial {
    pub coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Polynomial { coeffs }
    }

    fn horner(c: &[f64], x: f64) -> f64 {
        c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
    }

    fn derivative(c: &[f64]) -> Vec<f64> {
        c.iter().enumerate().skip(1).map(|(k, a)| k as f64 * a).collect()
    }
}

impl MultiMap for Polynomial {
    fn arity(&self) -> usize {
        1
    }
    fn eval(&self, args: &[f64]) -> f64 {
        Self::horner(&self.coeffs, args[0])
    }
    fn diagonal_jet(&self, x: f64) -> Option<Jet> {
        let c1 = Self::derivative(&self.coeffs);
        let c2 = Self::derivative(&c1);
        let d2 = Self::horner(&c2, x);
        Some(Jet { value: Self::horner(&self.coeffs, x), d1: Self::horner(&c1, x), d2, laplacian: d2 })
    }
    fn tuple_mean(&self, values: &[f64], weights: &[f64]) -> Option<f64> {
        if self.coeffs.len() <= 2 {
            Some(multilinear_mean(self, values, weights))
        } else {
            None
        }
    }
}

type EvalFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type JetFn = dyn Fn(f64) -> Jet + Send + Sync;

/// A map given by closures. `multilinear` declares the map affine in each
/// argument, which enables exact window averaging.
#[derive(Clone)]
pub struct FnMap {
    pub arity: usize,
    pub f: Arc<EvalFn>,
    pub jet: Option<Arc<JetFn>>,
    pub multilinear: bool,
}

impl fmt::Debug for FnMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FnMap(arity={}, jet={}, multilinear={})", self.arity, self.jet.is_some(), self.multilinear)
    }
}

impl FnMap {
    pub fn new(arity: usize, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        FnMap { arity, f: Arc::new(f), jet: None, multilinear: false }
    }

    pub fn with_jet(mut self, jet: impl Fn(f64) -> Jet + Send + Sync + 'static) -> Self {
        self.jet = Some(Arc::new(jet));
        self
    }

    pub fn multilinear(mut self) -> Self {
        self.multilinear = true;
        self
    }
}

impl MultiMap for FnMap {
    fn arity(&self) -> usize {
        self.arity
    }
    fn eval(&self, args: &[f64]) -> f64 {
        (self.f)(args)
    }
    fn diagonal_jet(&self, x: f64) -> Option<Jet> {
        self.jet.as_ref().map(|j| j(x))
    }
    fn tuple_mean(&self, values: &[f64], weights: &[f64]) -> Option<f64> {
        self.multilinear.then(|| multilinear_mean(self, values, weights))
    }
}

/// A single-variable function known only through samples, interpolated by
/// a natural cubic spline. Derivatives come from finite differences.
#[derive(Clone, Debug)]
pub struct SampledCurve {
    xs: Vec<f64>,
    ys: Vec<f64>,
    m: Vec<f64>,
}

impl SampledCurve {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        let n = xs.len();
        if n < 4 || ys.len() != n {
            return Err(Error::Parameter("sampled curve needs at least 4 matching samples".into()));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Parameter("sample abscissae must be strictly increasing".into()));
        }
        // Natural spline second derivatives.
        let mut sub = vec![0.0; n];
        let mut diag = vec![1.0; n];
        let mut sup = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        for i in 1..n - 1 {
            let h0 = xs[i] - xs[i - 1];
            let h1 = xs[i + 1] - xs[i];
            sub[i] = h0 / 6.0;
            diag[i] = (h0 + h1) / 3.0;
            sup[i] = h1 / 6.0;
            rhs[i] = (ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0;
        }
        let m = crate::numeric::thomas(&sub, &diag, &sup, &rhs)?;
        Ok(SampledCurve { xs, ys, m })
    }

    pub fn x_range(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }

    /// Smallest and largest sample value.
    pub fn y_range(&self) -> (f64, f64) {
        self.ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &y| (lo.min(y), hi.max(y)))
    }

    pub fn value(&self, x: f64) -> f64 {
        let n = self.xs.len();
        let x = x.clamp(self.xs[0], self.xs[n - 1]);
        let k = match self.xs.binary_search_by(|p| p.total_cmp(&x)) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        };
        let h = self.xs[k + 1] - self.xs[k];
        let a = (self.xs[k + 1] - x) / h;
        let b = (x - self.xs[k]) / h;
        a * self.ys[k]
            + b * self.ys[k + 1]
            + ((a * a * a - a) * self.m[k] + (b * b * b - b) * self.m[k + 1]) * h * h / 6.0
    }
}

impl MultiMap for SampledCurve {
    fn arity(&self) -> usize {
        1
    }
    fn eval(&self, args: &[f64]) -> f64 {
        self.value(args[0])
    }
}
