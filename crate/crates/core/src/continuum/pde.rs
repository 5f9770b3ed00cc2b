//! Explicit time marching of ∂ũ/∂t = −ũ + 𝔏̃[ũ] with pinned ends.

use super::{grid_derivatives, Continuum, Producer, SpatialProfile};
use crate::de::{de_run_with, DeOptions};
use crate::error::{Error, Result};
use crate::numeric::{hermite, Uniform};

#[derive(Clone, Copy, Debug)]
pub struct PdeOptions {
    pub t_max: f64,
    /// Time step; `None` picks 0.2·min(1, Δx²/(4α² max B)).
    pub dt: Option<f64>,
    /// Stop when max |𝔏̃[ũ] − ũ| over interior nodes falls below this.
    pub tol: f64,
    /// Excursion outside the u domain, relative to its width, that counts
    /// as a blow-up. Smaller excursions are clamped.
    pub margin: f64,
}

impl Default for PdeOptions {
    fn default() -> Self {
        PdeOptions { t_max: 1000.0, dt: None, tol: 1e-9, margin: 1e-3 }
    }
}

#[derive(Clone, Debug)]
pub struct PdeReport {
    pub profile: SpatialProfile,
    pub steps: usize,
    pub t: f64,
    pub dt: f64,
    pub residual: f64,
    pub converged: bool,
}

/// φ₀(ψ₀), A and B on the table grid. The composite is interpolated by
/// cubic Hermite with its exact slope, A and B linearly.
struct Coefficients {
    grid: Uniform,
    comp: Vec<f64>,
    dcomp: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl Coefficients {
    fn new(sys: &Continuum) -> Self {
        let pts = &sys.table.points;
        Coefficients {
            grid: sys.table.u_uniform(),
            comp: pts.iter().map(|p| p.composite()).collect(),
            dcomp: pts.iter().map(|p| p.composite_d1()).collect(),
            a: pts.iter().map(|p| p.a()).collect(),
            b: pts.iter().map(|p| p.b()).collect(),
        }
    }

    fn eval(&self, u: f64) -> (f64, f64, f64) {
        let (k, t) = self.grid.locate(u);
        let (x0, x1) = (self.grid.node(k), self.grid.node(k + 1));
        let c = hermite(x0, x1, self.comp[k], self.comp[k + 1], self.dcomp[k], self.dcomp[k + 1], u).0;
        let a = self.a[k] + t * (self.a[k + 1] - self.a[k]);
        let b = self.b[k] + t * (self.b[k + 1] - self.b[k]);
        (c, a, b)
    }
}

/// Relaxes `init` until the stationary residual drops below `opts.tol` or
/// t reaches `opts.t_max`. Both ends are held at u_opt.
pub fn pde_relax(sys: &Continuum, init: &SpatialProfile, opts: &PdeOptions) -> Result<PdeReport> {
    let alpha = init.alpha;
    let n = init.n();
    let dx = init.grid.step();
    let coef = Coefficients::new(sys);
    let max_b = coef.b.iter().cloned().fold(0.0, f64::max);
    let dt = opts.dt.unwrap_or(0.2 * (dx * dx / (4.0 * alpha * alpha * max_b.max(1e-300))).min(1.0));
    if !(dt > 0.0) {
        return Err(Error::Parameter(format!("time step must be positive, got {dt}")));
    }
    let dom = sys.funcs.u_domain;
    let slack = opts.margin * dom.width();
    let a2 = alpha * alpha;
    let mut u = init.values.clone();
    u[0] = sys.u_opt();
    u[n - 1] = sys.u_opt();
    let mut rate = vec![0.0; n];
    let (mut t, mut steps) = (0.0, 0usize);
    let mut residual;
    let max_steps = (opts.t_max / dt).ceil() as usize;
    loop {
        residual = 0.0f64;
        for k in 1..n - 1 {
            let d1 = (u[k + 1] - u[k - 1]) / (2.0 * dx);
            let d2 = (u[k + 1] - 2.0 * u[k] + u[k - 1]) / (dx * dx);
            let (c, a, b) = coef.eval(u[k]);
            rate[k] = c + a2 * (a * d1 * d1 + b * d2) - u[k];
            residual = residual.max(rate[k].abs());
        }
        if residual < opts.tol || steps >= max_steps {
            break;
        }
        for k in 1..n - 1 {
            let next = u[k] + dt * rate[k];
            if !next.is_finite() || !dom.contains(next, slack) {
                return Err(Error::Instability(format!(
                    "profile left the domain at x = {:.4}, t = {t:.4}; reduce dt (now {dt:e})",
                    init.grid.node(k)
                )));
            }
            u[k] = dom.clamp(next);
        }
        steps += 1;
        t += dt;
    }
    let mut profile = init.clone();
    profile.values = u;
    profile.residual = Some(rate.iter().enumerate().map(|(k, r)| if k == 0 || k + 1 == n { 0.0 } else { *r }).collect());
    profile.producer = Producer::Pde;
    Ok(PdeReport { profile, steps, t, dt, residual, converged: residual < opts.tol })
}

/// The converged coupled-chain profile with L = `sections` and W = αL,
/// placed at x_l = 2l/L − 1, interpolated to `grid`, smoothed by one pass
/// of three-point averaging and pinned to u_opt at the ends.
pub fn default_init(sys: &Continuum, grid: Uniform, alpha: f64, sections: usize, de: &DeOptions) -> Result<SpatialProfile> {
    let w = (alpha * sections as f64).round() as usize;
    if w == 0 || w > sections {
        return Err(Error::Parameter(format!("alpha·L = {} does not give a valid window", alpha * sections as f64)));
    }
    let run = de_run_with(&sys.funcs, sections, w, sys.v_opt(), de)?;
    let ul = &run.state.u;
    let chain = Uniform::new(-1.0, 1.0 - 2.0 / sections as f64, sections);
    let raw: Vec<f64> = grid.nodes().into_iter().map(|x| chain.interp(ul, x)).collect();
    let n = raw.len();
    let mut values = raw.clone();
    for k in 1..n - 1 {
        values[k] = (raw[k - 1] + raw[k] + raw[k + 1]) / 3.0;
    }
    values[0] = sys.u_opt();
    values[n - 1] = sys.u_opt();
    SpatialProfile::new(grid, alpha, values)
}

/// Max |𝔏̃[ũ] − ũ| over interior nodes, with exact coefficients.
pub(super) fn residual_max(sys: &Continuum, u: &SpatialProfile) -> Result<f64> {
    let (d1, d2) = grid_derivatives(&u.values, u.grid.step());
    let mut r = 0.0f64;
    for k in 1..u.n() - 1 {
        let lt = super::differential_operator_at(sys, u.alpha, u.values[k], d1[k], d2[k])?;
        r = r.max((lt - u.values[k]).abs());
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::super::continuum_grid;
    use super::*;
    use crate::system::SystemFunctions;

    #[test]
    fn uniform_optimum_is_stationary() {
        let sys = Continuum::new(&SystemFunctions::bec_regular(3, 6, 0.4).unwrap(), 512).unwrap();
        let alpha = 0.1;
        let g = continuum_grid(alpha).unwrap();
        let init = SpatialProfile::from_fn(g, alpha, |_| sys.u_opt());
        let r = pde_relax(&sys, &init, &PdeOptions::default()).unwrap();
        assert!(r.converged);
        assert_eq!(r.steps, 0);
        assert!(r.profile.values.iter().all(|v| *v == sys.u_opt()));
    }

    #[test]
    fn huge_step_is_instability() {
        let sys = Continuum::new(&SystemFunctions::bec_regular(3, 6, 0.45).unwrap(), 512).unwrap();
        let alpha = 0.1;
        let g = continuum_grid(alpha).unwrap();
        let init = SpatialProfile::from_fn(g, alpha, |x| 0.5 + 0.4 * (7.0 * x).cos());
        let opts = PdeOptions { dt: Some(50.0), ..Default::default() };
        assert!(matches!(pde_relax(&sys, &init, &opts), Err(Error::Instability(_))));
    }
}
