//! α²y″ = Ṽ′(y) with y(±1) = f(u_opt), solved by damped Newton on the
//! three-point discretization.

use super::pde::residual_max;
use super::{Continuum, Producer, SpatialProfile};
use crate::error::{Error, Result};
use crate::numeric::thomas;
use crate::potential::{CoordinateMap, ScaledTerms};

#[derive(Clone, Copy, Debug)]
pub struct BvpOptions {
    pub max_iter: usize,
    /// Target for the scaled residual max |G_k|.
    pub tol: f64,
}

impl Default for BvpOptions {
    fn default() -> Self {
        BvpOptions { max_iter: 200, tol: 1e-10 }
    }
}

#[derive(Clone, Debug)]
pub struct BvpReport {
    /// ũ = f⁻¹(y) on the grid.
    pub profile: SpatialProfile,
    pub y: Vec<f64>,
    /// Max residual of α²y″ − Ṽ′(y) over nodes where B is above the floor.
    pub residual_y: f64,
    /// Max of the scaled residual the solver drives to zero.
    pub residual_g: f64,
    /// Max residual of 𝔏̃[ũ] − ũ for the mapped-back profile.
    pub residual_u: f64,
    pub iterations: usize,
}

/// G_k = B e^{−C}·α²(y_{k+1} − 2y_k + y_{k−1})/Δx² − h(ũ_k), the
/// mechanical residual times the positive factor B e^{−C}.
fn residual(y: &[f64], map: &CoordinateMap, k2: f64, out: &mut [f64], terms: &mut [ScaledTerms]) -> f64 {
    let n = y.len();
    let mut m = 0.0f64;
    for k in 1..n - 1 {
        let t = map.scaled_terms(y[k]);
        out[k] = t.q * k2 * (y[k + 1] - 2.0 * y[k] + y[k - 1]) - t.h;
        terms[k] = t;
        m = m.max(out[k].abs());
    }
    m
}

/// Solves the stationary problem in the mechanical coordinates. Newton
/// acts on the scaled residual G, which has the same roots as
/// α²y″ − Ṽ′(y) wherever B > 0 and stays finite where B vanishes (for
/// instance at u_opt = 1 of a regular erasure ensemble).
pub fn bvp_solve(sys: &Continuum, map: &CoordinateMap, init: &SpatialProfile, opts: &BvpOptions) -> Result<BvpReport> {
    let n = init.n();
    let dx = init.grid.step();
    let k2 = init.alpha * init.alpha / (dx * dx);
    let (ylo, yhi) = (map.y_min(), map.y_max());
    let y_opt = map.f_at(sys.u_opt());
    let dom = sys.funcs.u_domain;
    let mut y: Vec<f64> = init.values.iter().map(|&u| map.f_at(dom.clamp(u))).collect();
    y[0] = y_opt;
    y[n - 1] = y_opt;
    let blank = map.scaled_terms(y_opt);
    let mut terms = vec![blank; n];
    let mut trial_terms = terms.clone();
    let mut g = vec![0.0; n];
    let mut norm = residual(&y, map, k2, &mut g, &mut terms);
    let mut iterations = 0;
    let m = n - 2;
    let mut trial = y.clone();
    let mut gt = vec![0.0; n];
    while norm > opts.tol {
        if iterations >= opts.max_iter {
            return Err(Error::Solver { msg: "Newton iteration did not converge".into(), residual: norm });
        }
        iterations += 1;
        let mut sub = vec![0.0; m];
        let mut diag = vec![0.0; m];
        let mut sup = vec![0.0; m];
        let mut rhs = vec![0.0; m];
        for k in 1..n - 1 {
            let t = &terms[k];
            let lap = k2 * (y[k + 1] - 2.0 * y[k] + y[k - 1]);
            sub[k - 1] = t.q * k2;
            sup[k - 1] = t.q * k2;
            diag[k - 1] = t.dq_dy * lap - 2.0 * t.q * k2 - t.dh_dy;
            rhs[k - 1] = -g[k];
        }
        let delta = thomas(&sub, &diag, &sup, &rhs)?;
        let mut lambda = 1.0;
        let accepted = loop {
            for k in 1..n - 1 {
                trial[k] = (y[k] + lambda * delta[k - 1]).clamp(ylo, yhi);
            }
            let tn = residual(&trial, map, k2, &mut gt, &mut trial_terms);
            if tn < (1.0 - 1e-4 * lambda) * norm {
                break Some(tn);
            }
            lambda *= 0.5;
            if lambda < 1e-8 {
                break None;
            }
        };
        let Some(tn) = accepted else {
            return Err(Error::Solver { msg: "line search failed to reduce the residual".into(), residual: norm });
        };
        let step = delta.iter().fold(0.0f64, |a, d| a.max(d.abs())) * lambda;
        y.copy_from_slice(&trial);
        g.copy_from_slice(&gt);
        std::mem::swap(&mut terms, &mut trial_terms);
        norm = tn;
        if step <= 1e-15 * (1.0 + yhi.abs().max(ylo.abs())) {
            break;
        }
    }
    let residual_y = (1..n - 1)
        .filter(|&k| terms[k].factor.is_finite())
        .map(|k| (g[k] * terms[k].factor).abs())
        .fold(0.0, f64::max);
    let mut profile = init.clone();
    profile.values = y.iter().map(|&v| map.f_inv(v)).collect();
    profile.values[0] = sys.u_opt();
    profile.values[n - 1] = sys.u_opt();
    profile.producer = Producer::Bvp;
    let residual_u = residual_max(sys, &profile)?;
    profile.residual = Some(g);
    Ok(BvpReport { profile, y, residual_y, residual_g: norm, residual_u, iterations })
}

#[cfg(test)]
mod tests {
    use super::super::continuum_grid;
    use super::*;
    use crate::numeric::OdeTol;
    use crate::potential::coordinate_map;
    use crate::system::SystemFunctions;

    #[test]
    fn uniform_optimum_solves_immediately() {
        let sys = Continuum::new(&SystemFunctions::bec_regular(3, 6, 0.4).unwrap(), 1024).unwrap();
        let map = coordinate_map(&sys.table, OdeTol::default()).unwrap();
        let alpha = 0.05;
        let g = continuum_grid(alpha).unwrap();
        let init = SpatialProfile::from_fn(g, alpha, |_| sys.u_opt());
        let r = bvp_solve(&sys, &map, &init, &BvpOptions::default()).unwrap();
        assert_eq!(r.iterations, 0);
        assert!(r.residual_g <= 1e-10);
        assert!(r.profile.values.iter().all(|v| (v - sys.u_opt()).abs() < 1e-12));
    }
}
