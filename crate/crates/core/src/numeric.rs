//! Small numerical kernels shared across modules: summation, Gauss rules,
//! root finding, an embedded Runge-Kutta integrator, interpolation and a
//! tridiagonal solver.

use std::num::NonZeroUsize;

use gauss_quad::{GaussHermite, GaussLegendre};

use crate::error::{Error, Result};

/// Fixed-order pairwise summation. The reduction tree depends only on the
/// slice length, so the result is reproducible bit for bit.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        let mut s = 0.0;
        for &x in xs {
            s += x;
        }
        return s;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// A Gauss rule stored as sorted nodes and matching weights.
#[derive(Clone, Debug)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    fn from_pairs(pairs: &[(f64, f64)]) -> Self {
        let mut p = pairs.to_vec();
        p.sort_by(|a, b| a.0.total_cmp(&b.0));
        Rule {
            nodes: p.iter().map(|x| x.0).collect(),
            weights: p.iter().map(|x| x.1).collect(),
        }
    }

    /// Gauss-Legendre rule on [-1, 1].
    pub fn legendre(n: usize) -> Self {
        let n = NonZeroUsize::new(n.max(1)).unwrap();
        Self::from_pairs(GaussLegendre::new(n).as_node_weight_pairs())
    }

    /// Gauss-Hermite rule for the weight exp(-x^2).
    pub fn hermite(n: usize) -> Self {
        let n = NonZeroUsize::new(n.max(1)).unwrap();
        Self::from_pairs(GaussHermite::new(n).as_node_weight_pairs())
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integral of `f` over [a, b] (Legendre rules only).
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let mut s = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s += w * f(c + h * x);
        }
        s * h
    }

    /// Composite rule with `panels` equal panels on [a, b].
    pub fn composite(&self, a: f64, b: f64, panels: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
        let panels = panels.max(1);
        let h = (b - a) / panels as f64;
        let mut parts = Vec::with_capacity(panels);
        for k in 0..panels {
            let lo = a + h * k as f64;
            parts.push(self.integrate(lo, lo + h, &mut f));
        }
        pairwise_sum(&parts)
    }

    /// Nodes and weights mapped to [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        (
            self.nodes.iter().map(|x| c + h * x).collect(),
            self.weights.iter().map(|w| w * h).collect(),
        )
    }
}

/// Bisection for a sign change of `f` on [lo, hi], stopping when the
/// bracket is narrower than `tol`.
pub fn bisect(mut f: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if !(flo.is_finite() && fhi.is_finite()) || flo.signum() == fhi.signum() {
        return Err(Error::Bracketing(format!(
            "no sign change on [{lo}, {hi}] (f = {flo:e}, {fhi:e})"
        )));
    }
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Bisection on a boolean predicate that is `pred(lo)` on the left part of
/// the bracket and `!pred(lo)` on the right. Returns the switch point.
pub fn bisect_predicate(
    mut pred: impl FnMut(f64) -> Result<bool>,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> Result<f64> {
    let plo = pred(lo)?;
    let phi = pred(hi)?;
    if plo == phi {
        return Err(Error::Bracketing(format!(
            "predicate is {plo} at both ends of [{lo}, {hi}]"
        )));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if pred(mid)? == plo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Golden-section search for the minimum of a unimodal function.
pub fn golden_min(mut f: impl FnMut(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Tolerances for [`integrate_grid`].
#[derive(Clone, Copy, Debug)]
pub struct OdeTol {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for OdeTol {
    fn default() -> Self {
        OdeTol { rtol: 1e-11, atol: 1e-13, max_steps: 200_000 }
    }
}

const DP_C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Adaptive Dormand-Prince 5(4) integration of `y' = rhs(t, y)` from `a`
/// to `b`, updating `y` in place.
pub fn integrate_span<F>(a: f64, b: f64, y: &mut [f64], rhs: &mut F, tol: OdeTol) -> Result<()>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y.len();
    let span = b - a;
    if span == 0.0 {
        return Ok(());
    }
    let mut k = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    let mut t = a;
    let mut h = span;
    let mut steps = 0;
    while (b - t) * span.signum() > 1e-15 * span.abs() {
        if (t + h - b) * span.signum() > 0.0 {
            h = b - t;
        }
        rhs(t, y, &mut k[0]);
        for s in 1..7 {
            for i in 0..n {
                let mut acc = y[i];
                for j in 0..s {
                    acc += h * DP_A[s][j] * k[j][i];
                }
                tmp[i] = acc;
            }
            let (_, rest) = k.split_at_mut(s);
            rhs(t + DP_C[s] * h, &tmp, &mut rest[0]);
        }
        // tmp now holds the fifth-order solution (stage 7 argument).
        let mut err = 0.0;
        for i in 0..n {
            let mut e = 0.0;
            for s in 0..7 {
                e += DP_E[s] * k[s][i];
            }
            e *= h;
            let sc = tol.atol + tol.rtol * y[i].abs().max(tmp[i].abs());
            err += (e / sc).powi(2);
        }
        let err = (err / n as f64).sqrt();
        if !err.is_finite() {
            h *= 0.1;
        } else if err <= 1.0 {
            t += h;
            y.copy_from_slice(&tmp);
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h *= fac;
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
        }
        steps += 1;
        if steps > tol.max_steps || h.abs() < 1e-15 * span.abs() {
            return Err(Error::Numeric(format!(
                "ODE integration stalled at t={t} (step {h:e})"
            )));
        }
    }
    Ok(())
}

/// Integrates across every cell of `grid`, returning the state at each node.
pub fn integrate_grid<F>(grid: &[f64], y0: &[f64], mut rhs: F, tol: OdeTol) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let mut out = Vec::with_capacity(grid.len());
    let mut y = y0.to_vec();
    out.push(y.clone());
    for w in grid.windows(2) {
        integrate_span(w[0], w[1], &mut y, &mut rhs, tol)?;
        out.push(y.clone());
    }
    Ok(out)
}

/// Pulls a point that sits on (or beyond) an interval end slightly inside,
/// so integrands with removable 0/0 limits at the ends stay finite.
pub fn inward(x: f64, lo: f64, hi: f64) -> f64 {
    let eps = 1e-9 * (hi - lo);
    x.clamp(lo + eps, hi - eps)
}

/// Cubic Hermite interpolant on [x0, x1] and its derivative.
pub fn hermite(x0: f64, x1: f64, y0: f64, y1: f64, d0: f64, d1: f64, x: f64) -> (f64, f64) {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    let v = h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1;
    let dh00 = 6.0 * t2 - 6.0 * t;
    let dh10 = 3.0 * t2 - 4.0 * t + 1.0;
    let dh01 = -6.0 * t2 + 6.0 * t;
    let dh11 = 3.0 * t2 - 2.0 * t;
    let dv = (dh00 * y0 + dh01 * y1) / h + dh10 * d0 + dh11 * d1;
    (v, dv)
}

/// Uniform grid on [lo, hi] with `n` nodes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Uniform {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Uniform {
    pub fn new(lo: f64, hi: f64, n: usize) -> Self {
        Uniform { lo, hi, n }
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.n - 1) as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        if k + 1 == self.n {
            self.hi
        } else {
            self.lo + self.step() * k as f64
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.node(k)).collect()
    }

    /// Cell index and local coordinate in [0, 1] of `x` (clamped).
    pub fn locate(&self, x: f64) -> (usize, f64) {
        let s = ((x - self.lo) / self.step()).clamp(0.0, (self.n - 1) as f64);
        let k = (s.floor() as usize).min(self.n - 2);
        (k, s - k as f64)
    }

    /// Piecewise-linear interpolation of nodal values.
    pub fn interp(&self, values: &[f64], x: f64) -> f64 {
        let (k, t) = self.locate(x);
        values[k] + t * (values[k + 1] - values[k])
    }
}

/// Solves a tridiagonal system. `sub[0]` and `sup[n-1]` are ignored.
pub fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut b = diag[0];
    if b == 0.0 {
        return Err(Error::Numeric("singular tridiagonal system".into()));
    }
    c[0] = sup[0] / b;
    d[0] = rhs[0] / b;
    for i in 1..n {
        b = diag[i] - sub[i] * c[i - 1];
        if b == 0.0 || !b.is_finite() {
            return Err(Error::Numeric("singular tridiagonal system".into()));
        }
        c[i] = if i + 1 < n { sup[i] / b } else { 0.0 };
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / b;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    Ok(x)
}

/// Least-squares slope of `ys` against `xs`.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    sxy / sxx
}

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Point `index` of the Kronecker (additive recurrence) sequence in
/// dimension `dim`, shifted by a seed-derived offset. Values lie in [0, 1).
pub fn kronecker(index: u64, dim: usize, seed: u64) -> f64 {
    let alpha = (PRIMES[dim % PRIMES.len()] as f64).sqrt().fract();
    let shift = ((seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 11) as f64 / (1u64 << 53) as f64
        + dim as f64 * 0.618_033_988_749_895)
        .fract();
    (shift + (index as f64 + 1.0) * alpha).fract()
}

/// Radical inverse (Halton) of `index` in the prime base for `dim`.
pub fn halton(mut index: u64, dim: usize) -> f64 {
    let b = PRIMES[dim % PRIMES.len()] as u64;
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= b as f64;
        r += f * (index % b) as f64;
        index /= b;
    }
    r
}
