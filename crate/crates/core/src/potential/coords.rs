//! The change of variables y = f(ũ) that turns the stationary equation into
//! a mechanical one, and the check that the potential survives it.

use super::{clamp_pos, eval_point, PotentialProfile};
use crate::error::{Error, Result};
use crate::numeric::{hermite, integrate_grid, OdeTol};
use crate::system::{DiagonalPoint, ScalarProfileTable, SystemFunctions};

/// A, B, C = ∫A/B, f = ∫e^C and Ṽ = ∫Ṽ′(y)dy tabulated on the u grid,
/// all anchored at u_min.
#[derive(Clone, Debug)]
pub struct CoordinateMap {
    pub funcs: SystemFunctions,
    pub grid: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    /// C′ = A/B at the nodes.
    pub dc: Vec<f64>,
    pub f: Vec<f64>,
    /// Ṽ as a function of ũ, integrated through y.
    pub v_tilde: Vec<f64>,
}

/// dC/du = A/B, expanded so that ψ₀′ and φ₀′ only appear clamped.
fn c_rate(p: &DiagonalPoint) -> f64 {
    0.5 * (p.psi.laplacian / clamp_pos(p.psi.d1)
        + p.phi.laplacian * p.psi.d1 / clamp_pos(p.phi.d1)
        + p.psi.d2 / clamp_pos(p.psi.d1))
}

fn b_clamped(p: &DiagonalPoint) -> f64 {
    clamp_pos(p.phi.d1) * clamp_pos(p.psi.d1) / 3.0
}

/// Ṽ′(y) = (ũ − φ₀(ψ₀(ũ)))e^C/B.
fn v_tilde_prime(p: &DiagonalPoint, c: f64) -> f64 {
    p.h() * c.exp() / b_clamped(p)
}

/// Tabulates the coordinate change on the table grid.
pub fn coordinate_map(table: &ScalarProfileTable, ode: OdeTol) -> Result<CoordinateMap> {
    let funcs = &table.funcs;
    let grid = table.u_grid.clone();
    let n = grid.len();
    for (k, p) in table.points.iter().enumerate() {
        if k > 0 && k + 1 < n && !(p.b() > 0.0) {
            return Err(Error::Model(format!("B(u) = {} is not positive at u = {}", p.b(), grid[k])));
        }
    }
    let states = integrate_grid(
        &grid,
        &[0.0, 0.0, 0.0],
        |t, y, dy| {
            let p = eval_point(funcs, t);
            let ec = y[0].exp();
            dy[0] = c_rate(&p);
            dy[1] = ec;
            // dṼ/dũ = Ṽ′(y)·dy/dũ.
            dy[2] = v_tilde_prime(&p, y[0]) * ec;
        },
        ode,
    )?;
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    let mut dc = Vec::with_capacity(n);
    for k in 0..n {
        let p = eval_point(funcs, grid[k]);
        a.push(p.a());
        b.push(p.b());
        dc.push(c_rate(&p));
    }
    let f: Vec<f64> = states.iter().map(|s| s[1]).collect();
    if f.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Numeric("coordinate map f is not strictly increasing".into()));
    }
    Ok(CoordinateMap {
        funcs: funcs.clone(),
        grid,
        a,
        b,
        c: states.iter().map(|s| s[0]).collect(),
        dc,
        f,
        v_tilde: states.iter().map(|s| s[2]).collect(),
    })
}

impl CoordinateMap {
    fn cell(&self, u: f64) -> usize {
        let n = self.grid.len();
        self.grid.partition_point(|g| *g <= u).saturating_sub(1).min(n - 2)
    }

    /// C(ũ) by cubic Hermite interpolation with the exact slopes A/B.
    pub fn c_at(&self, u: f64) -> f64 {
        let k = self.cell(u);
        hermite(self.grid[k], self.grid[k + 1], self.c[k], self.c[k + 1], self.dc[k], self.dc[k + 1], u).0
    }

    /// f(ũ) by cubic Hermite interpolation with slopes e^C.
    pub fn f_at(&self, u: f64) -> f64 {
        let k = self.cell(u);
        hermite(
            self.grid[k],
            self.grid[k + 1],
            self.f[k],
            self.f[k + 1],
            self.c[k].exp(),
            self.c[k + 1].exp(),
            u,
        )
        .0
    }

    pub fn y_min(&self) -> f64 {
        self.f[0]
    }

    pub fn y_max(&self) -> f64 {
        *self.f.last().unwrap()
    }

    /// f⁻¹(y): bracketing cell by binary search, then safeguarded Newton on
    /// the monotone Hermite interpolant.
    pub fn f_inv(&self, y: f64) -> f64 {
        let n = self.grid.len();
        if y <= self.f[0] {
            return self.grid[0];
        }
        if y >= self.f[n - 1] {
            return self.grid[n - 1];
        }
        let k = self.f.partition_point(|v| *v <= y).saturating_sub(1).min(n - 2);
        let (x0, x1) = (self.grid[k], self.grid[k + 1]);
        let (d0, d1) = (self.c[k].exp(), self.c[k + 1].exp());
        let (mut lo, mut hi) = (x0, x1);
        let mut x = x0 + (x1 - x0) * (y - self.f[k]) / (self.f[k + 1] - self.f[k]);
        for _ in 0..100 {
            let (v, dv) = hermite(x0, x1, self.f[k], self.f[k + 1], d0, d1, x);
            let r = v - y;
            if r > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            if r.abs() <= 1e-15 * (1.0 + y.abs()) || hi - lo <= 1e-16 * (1.0 + x.abs()) {
                break;
            }
            let step = if dv > 0.0 { x - r / dv } else { f64::NAN };
            x = if step.is_finite() && step > lo && step < hi { step } else { 0.5 * (lo + hi) };
        }
        x
    }

    /// Ṽ′(y) at y, with the removable endpoint singularities kept finite.
    pub fn v_tilde_prime_at_y(&self, y: f64) -> f64 {
        let u = self.f_inv(y);
        let p = eval_point(&self.funcs, u);
        v_tilde_prime(&p, self.c_at(p.u))
    }

    /// Ṽ″(y) = (dṼ′/dũ)e^{−C}.
    pub fn v_tilde_second_at_y(&self, y: f64) -> f64 {
        let u = self.f_inv(y);
        let p = eval_point(&self.funcs, u);
        let c = self.c_at(p.u);
        let b = b_clamped(&p);
        let h = p.h();
        let dh = 1.0 - p.composite_d1();
        let dvp = c.exp() * (dh / b + h * c_rate(&p) / b - h * p.b_d1() / (b * b));
        dvp * (-c).exp()
    }
}

/// Terms of the mechanical equation multiplied through by B e^{−C}:
/// B e^{−C}·α²y″ − h(ũ) = 0. Unlike Ṽ′ itself these stay finite where B
/// vanishes.
#[derive(Clone, Copy, Debug)]
pub struct ScaledTerms {
    pub u: f64,
    /// q = B e^{−C}.
    pub q: f64,
    pub dq_dy: f64,
    pub h: f64,
    pub dh_dy: f64,
    /// e^C/B, or infinity where B is below the derivative floor.
    pub factor: f64,
}

impl CoordinateMap {
    pub fn scaled_terms(&self, y: f64) -> ScaledTerms {
        let u = self.f_inv(y);
        let p = self.funcs.point(u).expect("point inside the domain");
        let c = self.c_at(u);
        let e = (-c).exp();
        let b = p.b();
        let q = b * e;
        // dq/du = (B′ − A)e^{−C}, du/dy = e^{−C}.
        let dq_dy = (p.b_d1() - p.a()) * e * e;
        let dh_dy = (1.0 - p.composite_d1()) * e;
        let factor = if b > super::DERIVATIVE_FLOOR { 1.0 / q } else { f64::INFINITY };
        ScaledTerms { u, q, dq_dy, h: p.h(), dh_dy, factor }
    }
}

/// Outcome of [`potential_equivalence_check`].
#[derive(Clone, Copy, Debug)]
pub struct Equivalence {
    /// max |e^{2s}Ṽ − V − c| over unflagged nodes after optimal c.
    pub absolute: f64,
    /// `absolute` divided by max(1, range of V).
    pub relative: f64,
    /// Shift added to C so that e^{2C}/B and ψ₀′e^E agree at the anchor.
    pub c_shift: f64,
    pub anchor: usize,
}

/// Compares Ṽ(f(u)) with V(u) on the shared grid.
pub fn potential_equivalence_check(profile: &PotentialProfile, map: &CoordinateMap) -> Result<Equivalence> {
    if profile.grid.len() != map.grid.len() {
        return Err(Error::Parameter("profile and coordinate map use different grids".into()));
    }
    let n = profile.grid.len();
    let usable: Vec<usize> = (0..n).filter(|&k| !profile.flagged[k]).collect();
    let Some(&anchor) = usable.iter().find(|&&k| k > 0 && k + 1 < n) else {
        return Err(Error::Numeric("no unflagged interior node".into()));
    };
    let p = eval_point(&map.funcs, profile.grid[anchor]);
    let lhs = profile.exponent[anchor] + clamp_pos(p.psi.d1).ln() + b_clamped(&p).ln();
    let c_shift = 0.5 * (lhs - 2.0 * map.c[anchor]);
    let scale = (2.0 * c_shift).exp();
    let diffs: Vec<f64> = usable.iter().map(|&k| scale * map.v_tilde[k] - profile.v[k]).collect();
    let lo = diffs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = diffs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let absolute = 0.5 * (hi - lo);
    let vmin = usable.iter().map(|&k| profile.v[k]).fold(f64::INFINITY, f64::min);
    let vmax = usable.iter().map(|&k| profile.v[k]).fold(f64::NEG_INFINITY, f64::max);
    let relative = absolute / (vmax - vmin).max(1.0);
    Ok(Equivalence { absolute, relative, c_shift, anchor })
}

#[cfg(test)]
mod tests {
    use super::super::{potential, PotentialOptions};
    use super::*;
    use crate::system::build_profile_table;

    #[test]
    fn identity_map_constants() {
        let t = build_profile_table(&SystemFunctions::identity(), 64).unwrap();
        let m = coordinate_map(&t, OdeTol::default()).unwrap();
        for k in 0..64 {
            assert_eq!(m.a[k], 0.0);
            assert!((m.b[k] - 1.0 / 3.0).abs() < 1e-16);
            assert_eq!(m.c[k], 0.0);
            assert!((m.f[k] - t.u_grid[k]).abs() < 1e-12);
        }
        let p = potential(&t, &PotentialOptions::default()).unwrap();
        assert_eq!(potential_equivalence_check(&p, &m).unwrap().absolute, 0.0);
    }

    #[test]
    fn inverse_round_trip() {
        let s = SystemFunctions::bec_regular(3, 6, 0.45).unwrap();
        let t = build_profile_table(&s, 256).unwrap();
        let m = coordinate_map(&t, OdeTol::default()).unwrap();
        for k in 1..400 {
            let u = 0.05 + 0.9 * k as f64 / 400.0;
            let back = m.f_inv(m.f_at(u));
            assert!((back - u).abs() < 1e-8, "{u} -> {back}");
        }
    }
}
