//! Generalized potential of the uncoupled system, its stationary points and
//! the potential threshold of a parameterized family.

use crate::de::{find_fixed_points, Stability};
use crate::error::{Error, Result};
use crate::numeric::{bisect_predicate, integrate_grid, integrate_span, inward, OdeTol};
use crate::system::{build_profile_table, DiagonalPoint, ScalarProfileTable, SystemFunctions};

mod coords;

pub use coords::{coordinate_map, potential_equivalence_check, CoordinateMap, Equivalence, ScaledTerms};

/// Lower clamp applied to ψ₀′ and φ₀′ wherever they divide.
pub const DERIVATIVE_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug)]
pub struct PotentialOptions {
    /// Minimum separation of the two lowest minima, relative to max(1, max|V|).
    pub gap_tol: f64,
    pub fp_tol: f64,
    pub ode: OdeTol,
}

impl Default for PotentialOptions {
    fn default() -> Self {
        PotentialOptions { gap_tol: 1e-9, fp_tol: 1e-10, ode: OdeTol::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Extremum {
    Min,
    Max,
    Marginal,
}

#[derive(Clone, Copy, Debug)]
pub struct StationaryPoint {
    pub u: f64,
    pub kind: Extremum,
    pub value: f64,
    /// A one-sided minimum at a domain end rather than a root of V′.
    pub boundary: bool,
    /// Lies in a cell where ψ₀′ was clamped.
    pub flagged: bool,
}

/// V sampled on the table's u grid, anchored V(u_min) = 0.
#[derive(Clone, Debug)]
pub struct PotentialProfile {
    pub grid: Vec<f64>,
    pub integrand: Vec<f64>,
    pub v: Vec<f64>,
    /// E(u) = D(u;ψ) + D(ψ₀(u);φ).
    pub exponent: Vec<f64>,
    /// Running value of ∫Δψ/ψ₀′ + ∫Δφ(ψ₀)ψ₀′/φ₀′(ψ₀), the ODE state behind V.
    pub log_weight: Vec<f64>,
    pub flagged: Vec<bool>,
    pub stationary: Vec<StationaryPoint>,
    pub u_opt: f64,
    pub global_min_u: Option<f64>,
    /// The lowest minimum beats every other minimum by at least the gap tolerance.
    pub unique_global_min: bool,
    /// V(second-lowest min) − V(lowest min), infinite with a single minimum.
    pub gap: f64,
    /// max(1, max|V|), the scale the gap tolerance is relative to.
    pub scale: f64,
    pub smoothing: Option<f64>,
}

impl PotentialProfile {
    /// Saturation condition: u_opt is the unique global minimizer of V.
    pub fn u_opt_unique_min(&self) -> bool {
        self.unique_global_min
            && self.global_min_u.is_some_and(|u| (u - self.u_opt).abs() <= 1e-6 * (1.0 + self.u_opt.abs()))
    }

    pub fn minima(&self) -> impl Iterator<Item = &StationaryPoint> {
        self.stationary.iter().filter(|p| p.kind == Extremum::Min && !p.flagged)
    }
}

fn clamp_pos(x: f64) -> f64 {
    x.max(DERIVATIVE_FLOOR)
}

/// d/du of the log weight.
fn log_weight_rate(p: &DiagonalPoint) -> f64 {
    p.psi.laplacian / clamp_pos(p.psi.d1) + p.phi.laplacian * p.psi.d1 / clamp_pos(p.phi.d1)
}

fn eval_point(funcs: &SystemFunctions, u: f64) -> DiagonalPoint {
    let d = funcs.u_domain;
    funcs.point(inward(u, d.lo, d.hi)).expect("point inside the domain")
}

/// The potential integrand u − φ₀(ψ₀(u)) times ψ₀′e^E, written as
/// exp(log weight)/φ₀′(ψ₀(u)).
fn integrand(p: &DiagonalPoint, log_weight: f64) -> f64 {
    p.h() * log_weight.exp() / clamp_pos(p.phi.d1)
}

/// Which half of the exponent E to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExponentPart {
    /// D(u;ψ) = ∫Δψ/ψ₀′ du − ln ψ₀′(u).
    Psi,
    /// D(ψ₀(u);φ) = ∫Δφ/φ₀′ dv − ln φ₀′(v) at v = ψ₀(u), the integral
    /// taken from ψ₀(u_min).
    PhiAtPsi,
}

/// D(u;ψ) or D(ψ₀(u);φ), integrals anchored at u_min.
pub fn exponent_d(funcs: &SystemFunctions, part: ExponentPart, u: f64, ode: OdeTol) -> Result<f64> {
    let dom = funcs.u_domain;
    if !dom.contains(u, 1e-12) {
        return Err(Error::Range(format!("{u} outside the u domain")));
    }
    let mut y = [0.0];
    let mut rhs = |t: f64, _: &[f64], dy: &mut [f64]| {
        let p = eval_point(funcs, t);
        dy[0] = match part {
            ExponentPart::Psi => p.psi.laplacian / clamp_pos(p.psi.d1),
            ExponentPart::PhiAtPsi => p.phi.laplacian * p.psi.d1 / clamp_pos(p.phi.d1),
        };
    };
    integrate_span(dom.lo, u, &mut y, &mut rhs, ode)?;
    let p = funcs.point(u)?;
    let log = match part {
        ExponentPart::Psi => clamp_pos(p.psi.d1).ln(),
        ExponentPart::PhiAtPsi => clamp_pos(p.phi.d1).ln(),
    };
    let r = y[0] - log;
    if !r.is_finite() {
        return Err(Error::Numeric(format!("exponent not finite at u={u}")));
    }
    Ok(r)
}

/// Tabulates V on the table grid, classifies stationary points and decides
/// whether u_opt is the unique global minimizer.
pub fn potential(table: &ScalarProfileTable, opts: &PotentialOptions) -> Result<PotentialProfile> {
    let funcs = &table.funcs;
    let grid = table.u_grid.clone();
    let n = grid.len();
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
        let p = eval_point(funcs, t);
        dy[0] = log_weight_rate(&p);
        dy[1] = integrand(&p, y[0]);
    };
    let states = integrate_grid(&grid, &[0.0, 0.0], rhs, opts.ode)?;
    let log_weight: Vec<f64> = states.iter().map(|s| s[0]).collect();
    let v: Vec<f64> = states.iter().map(|s| s[1]).collect();
    let mut integrand_v = Vec::with_capacity(n);
    let mut exponent = Vec::with_capacity(n);
    let mut node_flag = Vec::with_capacity(n);
    for k in 0..n {
        let p = eval_point(funcs, grid[k]);
        integrand_v.push(integrand(&p, log_weight[k]));
        exponent.push(log_weight[k] - clamp_pos(p.psi.d1).ln() - clamp_pos(p.phi.d1).ln());
        node_flag.push(table.points[k].psi.d1 < DERIVATIVE_FLOOR);
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("potential is not finite".into()));
    }
    let flagged: Vec<bool> = (0..n)
        .map(|k| node_flag[k] || (k > 0 && node_flag[k - 1]) || (k + 1 < n && node_flag[k + 1]))
        .collect();
    let scale = v.iter().fold(1.0f64, |m, x| m.max(x.abs()));

    let report = find_fixed_points(funcs, n.max(32), opts.fp_tol)?;
    let value_at = |u: f64| -> Result<f64> {
        let k = match grid.binary_search_by(|g| g.total_cmp(&u)) {
            Ok(k) => return Ok(v[k]),
            Err(k) => k.saturating_sub(1).min(n - 2),
        };
        let mut y = [log_weight[k], v[k]];
        let mut rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
            let p = eval_point(funcs, t);
            dy[0] = log_weight_rate(&p);
            dy[1] = integrand(&p, y[0]);
        };
        integrate_span(grid[k], u, &mut y, &mut rhs, opts.ode)?;
        Ok(y[1])
    };
    let cell_flag = |u: f64| -> bool {
        let k = grid.partition_point(|g| *g < u).min(n - 1);
        flagged[k] || (k > 0 && flagged[k - 1])
    };

    let mut stationary = Vec::new();
    let dom = funcs.u_domain;
    let h_lo = funcs.point(dom.lo)?.h();
    if h_lo > opts.fp_tol {
        stationary.push(StationaryPoint { u: dom.lo, kind: Extremum::Min, value: 0.0, boundary: true, flagged: flagged[0] });
    }
    for fp in &report.points {
        let kind = match fp.stability {
            Stability::Stable => Extremum::Min,
            Stability::Unstable => Extremum::Max,
            Stability::Marginal => Extremum::Marginal,
        };
        let value = if report.degenerate { 0.0 } else { value_at(fp.u)? };
        stationary.push(StationaryPoint { u: fp.u, kind, value, boundary: false, flagged: cell_flag(fp.u) });
    }
    let h_hi = funcs.point(dom.hi)?.h();
    if h_hi < -opts.fp_tol {
        stationary.push(StationaryPoint { u: dom.hi, kind: Extremum::Min, value: v[n - 1], boundary: true, flagged: flagged[n - 1] });
    }

    let mut mins: Vec<&StationaryPoint> =
        stationary.iter().filter(|p| p.kind == Extremum::Min && !p.flagged).collect();
    mins.sort_by(|a, b| a.value.total_cmp(&b.value));
    let (global_min_u, gap) = match mins.len() {
        0 => (None, 0.0),
        1 => (Some(mins[0].u), f64::INFINITY),
        _ => (Some(mins[0].u), mins[1].value - mins[0].value),
    };
    let unique_global_min = global_min_u.is_some() && gap >= opts.gap_tol * scale;

    Ok(PotentialProfile {
        grid,
        integrand: integrand_v,
        v,
        exponent,
        log_weight,
        flagged,
        stationary,
        u_opt: report.u_opt,
        global_min_u,
        unique_global_min,
        gap,
        scale,
        smoothing: funcs.smoothing,
    })
}

/// ∫(u − φ₀(ψ₀(u)))ψ₀′(u)du on the table grid, anchored at u_min.
pub fn conventional_potential(table: &ScalarProfileTable, ode: OdeTol) -> Result<Vec<f64>> {
    let funcs = &table.funcs;
    let states = integrate_grid(
        &table.u_grid,
        &[0.0],
        |t, _, dy| {
            let p = eval_point(funcs, t);
            dy[0] = p.h() * p.psi.d1;
        },
        ode,
    )?;
    Ok(states.into_iter().map(|s| s[0]).collect())
}

/// Settings for [`potential_threshold`].
#[derive(Clone, Copy, Debug)]
pub struct ThresholdOptions {
    pub n_grid: usize,
    pub theta_tol: f64,
    pub potential: PotentialOptions,
}

impl Default for ThresholdOptions {
    fn default() -> Self {
        ThresholdOptions { n_grid: 2048, theta_tol: 1e-6, potential: PotentialOptions::default() }
    }
}

/// Whether u_opt is the unique global minimizer of V for one system.
pub fn unique_min_predicate(funcs: &SystemFunctions, opts: &ThresholdOptions) -> Result<bool> {
    let table = build_profile_table(funcs, opts.n_grid)?;
    Ok(potential(&table, &opts.potential)?.u_opt_unique_min())
}

/// Bisects θ for the switch of "u_opt is the unique global minimizer".
pub fn potential_threshold<F>(family: F, theta_lo: f64, theta_hi: f64, opts: &ThresholdOptions) -> Result<f64>
where
    F: Fn(f64) -> Result<SystemFunctions>,
{
    bisect_predicate(|t| unique_min_predicate(&family(t)?, opts), theta_lo, theta_hi, opts.theta_tol)
}
