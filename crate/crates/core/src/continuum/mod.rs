//! Continuum limit of the coupled chain: window-integral operators, the
//! second-order differential operator, the relaxation PDE and the
//! stationary boundary-value problem.

mod bvp;
mod pde;

pub use bvp::{bvp_solve, BvpOptions, BvpReport};
pub use pde::{default_init, pde_relax, PdeOptions, PdeReport};

use std::sync::OnceLock;

use rayon::prelude::*;

use crate::de::{find_fixed_points, FixedPointReport};
use crate::error::{Error, Result};
use crate::numeric::{kronecker, ls_slope, pairwise_sum, Rule, Uniform};
use crate::system::{build_profile_table, MultiMap, ScalarProfileTable, SystemFunctions, Which};

/// Quasi-random points used for window averages of maps with more than
/// three arguments and no exact tuple mean.
pub const QMC_POINTS: u64 = 10_000;

/// Maps with at most this many arguments are averaged with a tensor rule.
pub const TENSOR_MAX_ARITY: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Producer {
    Given,
    Integral,
    Differential,
    Pde,
    Bvp,
}

/// Values on a uniform grid over [−1, 1].
#[derive(Clone, Debug)]
pub struct SpatialProfile {
    pub grid: Uniform,
    pub alpha: f64,
    pub values: Vec<f64>,
    /// Pointwise residual of the stationary equation, when known.
    pub residual: Option<Vec<f64>>,
    pub producer: Producer,
}

impl SpatialProfile {
    pub fn new(grid: Uniform, alpha: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n {
            return Err(Error::Parameter(format!("{} values for a {}-point grid", values.len(), grid.n)));
        }
        Ok(SpatialProfile { grid, alpha, values, residual: None, producer: Producer::Given })
    }

    pub fn from_fn(grid: Uniform, alpha: f64, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().into_iter().map(f).collect();
        SpatialProfile { grid, alpha, values, residual: None, producer: Producer::Given }
    }

    pub fn n(&self) -> usize {
        self.grid.n
    }

    pub fn x(&self, k: usize) -> f64 {
        self.grid.node(k)
    }

    pub fn at(&self, x: f64) -> f64 {
        self.grid.interp(&self.values, x)
    }

    /// max_k |u(x_k) − u(−x_k)|.
    pub fn evenness(&self) -> f64 {
        let n = self.n();
        (0..n).map(|k| (self.values[k] - self.values[n - 1 - k]).abs()).fold(0.0, f64::max)
    }

    /// (u(x) + u(−x))/2.
    pub fn symmetrized(&self) -> Self {
        let n = self.n();
        let values = (0..n).map(|k| 0.5 * (self.values[k] + self.values[n - 1 - k])).collect();
        self.with(values, self.producer)
    }

    fn with(&self, values: Vec<f64>, producer: Producer) -> Self {
        SpatialProfile { grid: self.grid, alpha: self.alpha, values, residual: None, producer }
    }
}

/// Grid on [−1, 1] with at least max(512, ⌈32/α⌉) nodes, refined so that α
/// is a whole number of cells when such a refinement exists nearby.
pub fn continuum_grid(alpha: f64) -> Result<Uniform> {
    check_alpha(alpha)?;
    let n0 = 512usize.max((32.0 / alpha).ceil() as usize);
    let m0 = ((alpha * (n0 - 1) as f64 / 2.0).ceil() as usize).max(16);
    for m in m0..m0 * 64 {
        let cells = 2.0 * m as f64 / alpha;
        if (cells - cells.round()).abs() <= 1e-9 * cells {
            return Ok(Uniform::new(-1.0, 1.0, cells.round() as usize + 1));
        }
    }
    Ok(Uniform::new(-1.0, 1.0, n0))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Parameter(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// The system with everything the continuum operators share.
#[derive(Clone, Debug)]
pub struct Continuum {
    pub funcs: SystemFunctions,
    pub table: ScalarProfileTable,
    pub fixed_points: FixedPointReport,
}

impl Continuum {
    pub fn new(funcs: &SystemFunctions, n_table: usize) -> Result<Self> {
        let table = build_profile_table(funcs, n_table)?;
        let fixed_points = find_fixed_points(funcs, 4096, 1e-12)?;
        Ok(Continuum { funcs: funcs.clone(), table, fixed_points })
    }

    pub fn u_opt(&self) -> f64 {
        self.fixed_points.u_opt
    }

    pub fn v_opt(&self) -> f64 {
        self.fixed_points.v_opt
    }
}

fn gl8() -> &'static Rule {
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| Rule::legendre(8))
}

/// Normalized rule over the window [c − α, c + α]: GL-8 panels no wider
/// than `panel`, with panel edges at every break inside the window.
fn window_rule(c: f64, alpha: f64, breaks: &[f64], panel: f64) -> (Vec<f64>, Vec<f64>) {
    let (lo, hi) = (c - alpha, c + alpha);
    let mut edges = vec![lo];
    edges.extend(breaks.iter().copied().filter(|b| *b > lo + 1e-12 && *b < hi - 1e-12));
    edges.push(hi);
    edges.sort_by(f64::total_cmp);
    let rule = gl8();
    let (mut xs, mut ws) = (Vec::new(), Vec::new());
    for e in edges.windows(2) {
        let pieces = ((e[1] - e[0]) / panel - 1e-9).ceil().max(1.0) as usize;
        let h = (e[1] - e[0]) / pieces as f64;
        for p in 0..pieces {
            let a = e[0] + h * p as f64;
            let (x, w) = rule.mapped(a, a + h);
            xs.extend(x);
            ws.extend(w.into_iter().map(|w| w / (2.0 * alpha)));
        }
    }
    (xs, ws)
}

fn is_multilinear(map: &dyn MultiMap) -> bool {
    map.tuple_mean(&[0.5], &[1.0]).is_some()
}

/// Mean of map(s(x+ω₁), …, s(x+ω_k)) over independent ωⱼ uniform on
/// [−α, α]; the window is symmetric, so the sign of ω does not matter.
struct WindowAverager<'a> {
    map: &'a dyn MultiMap,
    alpha: f64,
    breaks: Vec<f64>,
    /// Panel width for the rule fed to exact tuple means.
    fine_panel: f64,
    multilinear: bool,
    seed: u64,
}

impl<'a> WindowAverager<'a> {
    fn new(map: &'a dyn MultiMap, alpha: f64, breaks: Vec<f64>, fine_panel: f64, seed: u64) -> Self {
        WindowAverager { map, alpha, breaks, fine_panel, multilinear: is_multilinear(map), seed }
    }

    fn average(&self, c: f64, sample: &dyn Fn(f64) -> f64) -> f64 {
        let d = self.map.arity();
        if self.multilinear {
            let (xs, ws) = window_rule(c, self.alpha, &self.breaks, self.fine_panel);
            let vals: Vec<f64> = xs.iter().map(|&s| sample(s)).collect();
            return self.map.tuple_mean(&vals, &ws).expect("multilinear map");
        }
        if d <= TENSOR_MAX_ARITY {
            let (xs, ws) = window_rule(c, self.alpha, &self.breaks, 2.0 * self.alpha);
            let vals: Vec<f64> = xs.iter().map(|&s| sample(s)).collect();
            let m = xs.len();
            let total = m.pow(d as u32);
            let mut args = vec![0.0; d];
            let mut parts = Vec::with_capacity(total);
            for idx in 0..total {
                let (mut r, mut w) = (idx, 1.0);
                for a in args.iter_mut() {
                    *a = vals[r % m];
                    w *= ws[r % m];
                    r /= m;
                }
                parts.push(w * self.map.eval(&args));
            }
            return pairwise_sum(&parts);
        }
        let mut args = vec![0.0; d];
        let mut parts = Vec::with_capacity(QMC_POINTS as usize);
        for i in 0..QMC_POINTS {
            for (j, a) in args.iter_mut().enumerate() {
                *a = sample(c - self.alpha + 2.0 * self.alpha * kronecker(i, j, self.seed));
            }
            parts.push(self.map.eval(&args));
        }
        pairwise_sum(&parts) / QMC_POINTS as f64
    }
}

/// One application of the integral systems to a grid profile: v(x) is the
/// ψ-window average of u for |x| ≤ 1 − α and v_opt beyond, then u(x) is
/// the φ-window average of v. Profiles are sampled by linear interpolation.
pub fn integral_operator(u: &SpatialProfile, sys: &Continuum) -> Result<SpatialProfile> {
    let alpha = u.alpha;
    check_alpha(alpha)?;
    let dx = u.grid.step();
    if alpha < 8.0 * dx * (1.0 - 1e-9) {
        return Err(Error::Parameter(format!("alpha = {alpha} spans fewer than 8 grid cells")));
    }
    let edge = 1.0 - alpha;
    let nodes = u.grid.nodes();
    let (udom, vdom) = (sys.funcs.u_domain, sys.funcs.v_domain);
    let psi = WindowAverager::new(sys.funcs.psi.as_ref(), alpha, nodes.clone(), dx, 1);
    let mut breaks = nodes.clone();
    breaks.extend([-edge, edge]);
    let phi = WindowAverager::new(sys.funcs.phi.as_ref(), alpha, breaks, dx, 2);

    let su = |s: f64| udom.clamp(u.at(s));
    let v: Vec<f64> = nodes
        .par_iter()
        .map(|&x| if x.abs() <= edge + 1e-12 { vdom.clamp(psi.average(x, &su)) } else { sys.v_opt() })
        .collect();
    let sv = |s: f64| if s.abs() > edge + 1e-12 { sys.v_opt() } else { vdom.clamp(u.grid.interp(&v, s)) };
    let out: Vec<f64> = nodes.par_iter().map(|&x| udom.clamp(phi.average(x, &sv))).collect();
    Ok(u.with(out, Producer::Integral))
}

/// The integral operator applied to a function, with both windows
/// integrated by GL-8 directly against `u`.
pub fn integral_operator_fn(u: &(dyn Fn(f64) -> f64 + Sync), sys: &Continuum, alpha: f64, x: f64) -> f64 {
    let edge = 1.0 - alpha;
    let psi = WindowAverager::new(sys.funcs.psi.as_ref(), alpha, Vec::new(), 0.5 * alpha, 1);
    let phi = WindowAverager::new(sys.funcs.phi.as_ref(), alpha, vec![-edge, edge], 0.5 * alpha, 2);
    let (udom, vdom) = (sys.funcs.u_domain, sys.funcs.v_domain);
    let su = |s: f64| udom.clamp(u(s));
    let sv = |s: f64| if s.abs() > edge + 1e-12 { sys.v_opt() } else { vdom.clamp(psi.average(s, &su)) };
    phi.average(x, &sv)
}

/// φ₀(ψ₀(u)) + α²(A(u)u′² + B(u)u″).
pub fn differential_operator_at(sys: &Continuum, alpha: f64, u: f64, du: f64, d2u: f64) -> Result<f64> {
    let p = sys.table.point(u)?;
    Ok(p.composite() + alpha * alpha * (p.a() * du * du + p.b() * d2u))
}

/// First and second derivatives of grid data: central differences inside,
/// one-sided second-order stencils at the two ends.
pub fn grid_derivatives(values: &[f64], dx: f64) -> (Vec<f64>, Vec<f64>) {
    let n = values.len();
    let mut d1 = vec![0.0; n];
    let mut d2 = vec![0.0; n];
    for k in 1..n - 1 {
        d1[k] = (values[k + 1] - values[k - 1]) / (2.0 * dx);
        d2[k] = (values[k + 1] - 2.0 * values[k] + values[k - 1]) / (dx * dx);
    }
    if n >= 4 {
        let u = values;
        d1[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * dx);
        d1[n - 1] = (3.0 * u[n - 1] - 4.0 * u[n - 2] + u[n - 3]) / (2.0 * dx);
        d2[0] = (2.0 * u[0] - 5.0 * u[1] + 4.0 * u[2] - u[3]) / (dx * dx);
        d2[n - 1] = (2.0 * u[n - 1] - 5.0 * u[n - 2] + 4.0 * u[n - 3] - u[n - 4]) / (dx * dx);
    }
    (d1, d2)
}

/// 𝔏̃ applied to a grid profile with finite-difference derivatives.
pub fn differential_operator(u: &SpatialProfile, sys: &Continuum) -> Result<SpatialProfile> {
    let (d1, d2) = grid_derivatives(&u.values, u.grid.step());
    let out = (0..u.n())
        .map(|k| differential_operator_at(sys, u.alpha, u.values[k], d1[k], d2[k]))
        .collect::<Result<Vec<_>>>()?;
    Ok(u.with(out, Producer::Differential))
}

#[derive(Clone, Debug)]
pub struct GapReport {
    pub alphas: Vec<f64>,
    pub bulk: Vec<f64>,
    pub total: Vec<f64>,
    /// Least-squares slope of ln(bulk) against ln(α); NaN when a bulk gap
    /// is zero.
    pub bulk_slope: f64,
}

/// Derivatives of a smooth function by fourth-order central differences.
fn fd_derivs(u: &dyn Fn(f64) -> f64, x: f64) -> (f64, f64, f64) {
    let h = 1e-3;
    let (m2, m1, c, p1, p2) = (u(x - 2.0 * h), u(x - h), u(x), u(x + h), u(x + 2.0 * h));
    let d1 = (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * h);
    let d2 = (-m2 + 16.0 * m1 - 30.0 * c + 16.0 * p1 - p2) / (12.0 * h * h);
    (c, d1, d2)
}

/// ∫|𝔏[u] − 𝔏̃[u]| over [−1, 1] and over the bulk (−(1−2α), 1−2α) for
/// each α, with 𝔏 evaluated by nested quadrature against `u` itself.
pub fn operator_gap(u: &(dyn Fn(f64) -> f64 + Sync), sys: &Continuum, alphas: &[f64]) -> Result<GapReport> {
    let mut bulk = Vec::with_capacity(alphas.len());
    let mut total = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        check_alpha(alpha)?;
        if alpha >= 0.5 {
            return Err(Error::Parameter("operator_gap needs alpha < 0.5 so the bulk is nonempty".into()));
        }
        let gap = |x: f64| -> f64 {
            let (v, d1, d2) = fd_derivs(u, x);
            let lt = differential_operator_at(sys, alpha, v, d1, d2).unwrap_or(f64::NAN);
            (integral_operator_fn(u, sys, alpha, x) - lt).abs()
        };
        let b = 1.0 - 2.0 * alpha;
        let e = 1.0 - alpha;
        let segs = [(-1.0, -e), (-e, -b), (-b, b), (b, e), (e, 1.0)];
        let mut parts = [0.0; 5];
        for (i, &(lo, hi)) in segs.iter().enumerate() {
            let panels = (((hi - lo) / (0.25 * alpha)).ceil() as usize).max(1);
            let h = (hi - lo) / panels as f64;
            let vals: Vec<f64> = (0..panels)
                .into_par_iter()
                .map(|p| gl8().integrate(lo + h * p as f64, lo + h * (p + 1) as f64, gap))
                .collect();
            parts[i] = pairwise_sum(&vals);
        }
        if parts.iter().any(|p| !p.is_finite()) {
            return Err(Error::Numeric("non-finite operator gap".into()));
        }
        bulk.push(parts[2]);
        total.push(parts.iter().sum());
    }
    let bulk_slope = if bulk.iter().all(|g| *g > 0.0) && alphas.len() >= 2 {
        let lx: Vec<f64> = alphas.iter().map(|a| a.ln()).collect();
        let ly: Vec<f64> = bulk.iter().map(|g| g.ln()).collect();
        ls_slope(&lx, &ly)
    } else {
        f64::NAN
    };
    Ok(GapReport { alphas: alphas.to_vec(), bulk, total, bulk_slope })
}

/// 𝔏̃[u] − u at interior nodes; zero at the two pinned ends.
pub fn stationary_residual(u: &SpatialProfile, sys: &Continuum) -> Result<Vec<f64>> {
    let lt = differential_operator(u, sys)?;
    let n = u.n();
    Ok((0..n)
        .map(|k| if k == 0 || k + 1 == n { 0.0 } else { lt.values[k] - u.values[k] })
        .collect())
}

/// φ₀(ψ₀(u)).
pub fn composite(sys: &Continuum, u: f64) -> Result<f64> {
    let v = sys.funcs.v_domain.clamp(sys.funcs.diagonal_reduce(Which::Psi, u)?);
    sys.funcs.diagonal_reduce(Which::Phi, v)
}
