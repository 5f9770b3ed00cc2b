//! Tabulated single-variate reductions and pointwise diagonal evaluation.

use super::{Jet, SystemFunctions, Which};
use crate::error::{Error, Result};
use crate::numeric::Uniform;

/// Largest decrease in a tabulated φ₀ or ψ₀ that is clamped instead of
/// rejected.
pub const MONOTONE_CLAMP: f64 = 1e-8;

/// Everything the potential and the differential operator need at one u:
/// the ψ jet at u and the φ jet at v = ψ₀(u).
#[derive(Clone, Copy, Debug)]
pub struct DiagonalPoint {
    pub u: f64,
    pub psi: Jet,
    pub phi: Jet,
}

impl DiagonalPoint {
    /// φ₀(ψ₀(u)).
    pub fn composite(&self) -> f64 {
        self.phi.value
    }

    /// u − φ₀(ψ₀(u)).
    pub fn h(&self) -> f64 {
        self.u - self.phi.value
    }

    /// Derivative of the composite φ₀∘ψ₀.
    pub fn composite_d1(&self) -> f64 {
        self.phi.d1 * self.psi.d1
    }

    /// A(u) = (φ₀′(ψ₀)/6)(Δψ + Δφ(ψ₀)ψ₀′²/φ₀′(ψ₀) + ψ₀″), multiplied out.
    pub fn a(&self) -> f64 {
        (self.phi.d1 * self.psi.laplacian
            + self.phi.laplacian * self.psi.d1 * self.psi.d1
            + self.phi.d1 * self.psi.d2)
            / 6.0
    }

    /// B(u) = φ₀′(ψ₀(u))ψ₀′(u)/3.
    pub fn b(&self) -> f64 {
        self.phi.d1 * self.psi.d1 / 3.0
    }

    /// dB/du.
    pub fn b_d1(&self) -> f64 {
        (self.phi.d2 * self.psi.d1 * self.psi.d1 + self.phi.d1 * self.psi.d2) / 3.0
    }
}

impl SystemFunctions {
    /// ψ jet at u and φ jet at ψ₀(u). Arguments are clamped into the
    /// domains first, so roundoff excursions are harmless.
    pub fn point(&self, u: f64) -> Result<DiagonalPoint> {
        let u = self.u_domain.clamp(u);
        let psi = self.jet(Which::Psi, u)?;
        let v = self.v_domain.clamp(psi.value);
        let phi = self.jet(Which::Phi, v)?;
        Ok(DiagonalPoint { u, psi, phi })
    }
}

/// φ₀, ψ₀ and derivatives on uniform grids over the v and u domains, plus
/// the φ quantities composed with ψ₀ on the u grid.
#[derive(Clone, Debug)]
pub struct ScalarProfileTable {
    pub funcs: SystemFunctions,
    pub u_grid: Vec<f64>,
    pub v_grid: Vec<f64>,
    pub psi0: Vec<f64>,
    pub dpsi0: Vec<f64>,
    pub d2psi0: Vec<f64>,
    pub lap_psi: Vec<f64>,
    pub phi0: Vec<f64>,
    pub dphi0: Vec<f64>,
    pub lap_phi: Vec<f64>,
    /// Points on the u grid (ψ at u, φ at ψ₀(u)).
    pub points: Vec<DiagonalPoint>,
    /// Number of grid values raised by the running-maximum clamp.
    pub clamped: usize,
}

impl ScalarProfileTable {
    pub fn n(&self) -> usize {
        self.u_grid.len()
    }

    pub fn u_uniform(&self) -> Uniform {
        Uniform::new(self.funcs.u_domain.lo, self.funcs.u_domain.hi, self.n())
    }

    /// Pointwise evaluation off the grid (delegates to the functions).
    pub fn point(&self, u: f64) -> Result<DiagonalPoint> {
        self.funcs.point(u)
    }
}

fn clamp_monotone(name: &str, vals: &mut [f64], tol: f64) -> Result<usize> {
    let mut count = 0;
    let mut run = f64::NEG_INFINITY;
    for (k, v) in vals.iter_mut().enumerate() {
        if *v < run {
            if run - *v > tol {
                return Err(Error::Model(format!(
                    "{name} decreases by {:e} at grid index {k}",
                    run - *v
                )));
            }
            *v = run;
            count += 1;
        }
        run = v.max(run);
    }
    Ok(count)
}

/// Tabulates the single-variate reductions on `n_grid` uniform points and
/// checks that φ₀ and ψ₀ are nondecreasing.
pub fn build_profile_table(funcs: &SystemFunctions, n_grid: usize) -> Result<ScalarProfileTable> {
    if n_grid < 16 {
        return Err(Error::Parameter(format!("n_grid must be at least 16, got {n_grid}")));
    }
    let ug = Uniform::new(funcs.u_domain.lo, funcs.u_domain.hi, n_grid).nodes();
    let vg = Uniform::new(funcs.v_domain.lo, funcs.v_domain.hi, n_grid).nodes();
    let psi: Vec<Jet> = ug.iter().map(|&u| funcs.jet(Which::Psi, u)).collect::<Result<_>>()?;
    let phi: Vec<Jet> = vg.iter().map(|&v| funcs.jet(Which::Phi, v)).collect::<Result<_>>()?;
    let points: Vec<DiagonalPoint> = ug.iter().map(|&u| funcs.point(u)).collect::<Result<_>>()?;
    let tol = MONOTONE_CLAMP;
    let mut psi0: Vec<f64> = psi.iter().map(|j| j.value).collect();
    let mut phi0: Vec<f64> = phi.iter().map(|j| j.value).collect();
    let mut clamped = clamp_monotone("psi0", &mut psi0, tol)?;
    clamped += clamp_monotone("phi0", &mut phi0, tol)?;
    for (k, &x) in psi0.iter().enumerate() {
        if !funcs.v_domain.contains(x, 1e-9 * funcs.v_domain.width()) {
            return Err(Error::Model(format!("psi0({}) = {x} leaves the v domain", ug[k])));
        }
    }
    for (k, &x) in phi0.iter().enumerate() {
        if !funcs.u_domain.contains(x, 1e-9 * funcs.u_domain.width()) {
            return Err(Error::Model(format!("phi0({}) = {x} leaves the u domain", vg[k])));
        }
    }
    Ok(ScalarProfileTable {
        funcs: funcs.clone(),
        u_grid: ug,
        v_grid: vg,
        dpsi0: psi.iter().map(|j| j.d1).collect(),
        d2psi0: psi.iter().map(|j| j.d2).collect(),
        lap_psi: psi.iter().map(|j| j.laplacian).collect(),
        dphi0: phi.iter().map(|j| j.d1).collect(),
        lap_phi: phi.iter().map(|j| j.laplacian).collect(),
        psi0,
        phi0,
        points,
        clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{DerivativeMode, FnMap, Interval};
    use std::sync::Arc;

    #[test]
    fn identity_table() {
        let t = build_profile_table(&SystemFunctions::identity(), 64).unwrap();
        for k in 0..64 {
            assert_eq!(t.psi0[k], t.u_grid[k]);
            assert_eq!(t.phi0[k], t.v_grid[k]);
            assert_eq!(t.dpsi0[k], 1.0);
            assert_eq!(t.dphi0[k], 1.0);
            assert_eq!(t.lap_phi[k], 0.0);
            assert_eq!(t.lap_psi[k], 0.0);
        }
    }

    #[test]
    fn bec_table_closed_forms() {
        let s = SystemFunctions::bec_regular(3, 6, 0.45).unwrap();
        let t = build_profile_table(&s, 128).unwrap();
        for k in 0..128 {
            let v = t.v_grid[k];
            let u = t.u_grid[k];
            assert!((t.phi0[k] - (1.0 - 0.45 * (1.0 - v).powi(2))).abs() < 1e-15);
            assert!((t.psi0[k] - u.powi(5)).abs() < 1e-15);
        }
    }

    #[test]
    fn too_small_grid_rejected() {
        assert!(build_profile_table(&SystemFunctions::identity(), 8).is_err());
    }

    #[test]
    fn decreasing_function_is_model_error() {
        let down = Arc::new(FnMap::new(1, |a| 1.0 - a[0]));
        let s = SystemFunctions::new(down, Arc::new(crate::system::Identity), Interval::UNIT, Interval::UNIT)
            .unwrap();
        assert!(matches!(build_profile_table(&s, 32), Err(Error::Model(_))));
    }

    #[test]
    fn tiny_noise_is_clamped() {
        let noisy = Arc::new(FnMap::new(1, |a| {
            let x = a[0];
            0.5 - if ((x * 1000.0) as i64) % 2 == 0 { 0.0 } else { 1e-10 }
        }));
        let s = SystemFunctions::new(noisy, Arc::new(crate::system::Identity), Interval::UNIT, Interval::UNIT)
            .unwrap()
            .with_derivative_mode(DerivativeMode::FiniteDifference { h: None });
        let t = build_profile_table(&s, 1024).unwrap();
        assert!(t.phi0.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn a_and_b_for_identity() {
        let p = SystemFunctions::identity().point(0.4).unwrap();
        assert_eq!(p.a(), 0.0);
        assert!((p.b() - 1.0 / 3.0).abs() < 1e-16);
    }
}
