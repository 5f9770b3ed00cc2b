//! MAP decoder EXIT curve of a regular (l, r) LDPC ensemble over an
//! extrinsic BEC, from the EBP curve and the Maxwell construction.

use std::sync::{Arc, OnceLock};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numeric::{bisect, golden_min, Rule};

/// Regular ensemble with variable degree `l` and check degree `r`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RegularEnsemble {
    pub l: usize,
    pub r: usize,
}

/// EBP quantities at the check-to-variable erasure parameter x.
#[derive(Clone, Copy, Debug)]
pub struct EbpPoint {
    pub x: f64,
    /// ε(x) = x/λ(1−ρ(1−x)).
    pub eps: f64,
    pub deps: f64,
    /// h(x) = (1−ρ(1−x))^l, the extrinsic erasure probability of a bit.
    pub h: f64,
    pub dh: f64,
}

fn gl16() -> &'static Rule {
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| Rule::legendre(16))
}

impl RegularEnsemble {
    /// Ensembles with l ≥ 3 and r > l; smaller variable degrees have no
    /// jump in the MAP curve.
    pub fn new(l: usize, r: usize) -> Result<Self> {
        if l < 3 || r <= l {
            return Err(Error::Model(format!("unsupported ensemble ({l}, {r}); need 3 <= l < r")));
        }
        Ok(RegularEnsemble { l, r })
    }

    pub fn rate(&self) -> f64 {
        1.0 - self.l as f64 / self.r as f64
    }

    pub fn ebp(&self, x: f64) -> EbpPoint {
        let (l, r) = (self.l as i32, self.r as i32);
        let y = 1.0 - (1.0 - x).powi(r - 1);
        let dy = (r - 1) as f64 * (1.0 - x).powi(r - 2);
        let eps = x / y.powi(l - 1);
        let deps = 1.0 / y.powi(l - 1) - (l - 1) as f64 * x * dy / y.powi(l);
        EbpPoint { x, eps, deps, h: y.powi(l), dh: l as f64 * y.powi(l - 1) * dy }
    }

    /// (ε_BP, x_BP): the minimum of ε(x) on (0, 1].
    pub fn bp_threshold(&self) -> (f64, f64) {
        let (x, e) = golden_min(|x| self.ebp(x).eps, 1e-6, 1.0, 1e-13);
        (e, x)
    }

    /// (ε_MAP, x_MAP) from the Maxwell root of
    /// x·y(x)·(1 − 1/l) = x + ((1−x)^r − 1)/r on the stable branch.
    pub fn map_threshold(&self) -> Result<(f64, f64)> {
        let (l, r) = (self.l as f64, self.r as f64);
        let (_, x_bp) = self.bp_threshold();
        let balance = |x: f64| {
            let y = 1.0 - (1.0 - x).powi(self.r as i32 - 1);
            x * y * (1.0 - 1.0 / l) - (x + ((1.0 - x).powf(r) - 1.0) / r)
        };
        let x = bisect(balance, x_bp, 1.0 - 1e-12, 1e-15)?;
        Ok((self.ebp(x).eps, x))
    }

    /// ε_MAP from the area theorem on the EBP curve: the x* with
    /// ∫_{x*}^{1} h(x)ε′(x)dx = r, then ε(x*).
    pub fn map_threshold_by_area(&self) -> Result<f64> {
        let rate = self.rate();
        let (_, x_bp) = self.bp_threshold();
        let area = |x0: f64| -> f64 {
            gl16().composite(x0, 1.0, 64, |x| {
                let p = self.ebp(x);
                p.h * p.deps
            })
        };
        let x = bisect(|x| area(x) - rate, x_bp, 1.0 - 1e-12, 1e-13)?;
        Ok(self.ebp(x).eps)
    }
}

/// The extrinsic MAP EXIT curve g(I) for an extrinsic BEC with erasure
/// probability 1 − I. It follows the stable EBP branch, g = 1 − h(x(ε)),
/// for I < I_J = 1 − ε_MAP and equals 1 above.
#[derive(Clone, Copy, Debug)]
pub struct MapDecoder {
    pub ensemble: RegularEnsemble,
    pub eps_map: f64,
    pub x_map: f64,
    pub i_jump: f64,
    /// lim g(I) as I ↑ I_J.
    pub g_minus: f64,
}

impl MapDecoder {
    pub fn new(ensemble: RegularEnsemble) -> Result<Self> {
        let (eps_map, x_map) = ensemble.map_threshold()?;
        let p = ensemble.ebp(x_map);
        Ok(MapDecoder { ensemble, eps_map, x_map, i_jump: 1.0 - eps_map, g_minus: 1.0 - p.h })
    }

    /// x on the stable branch with ε(x) = e, for e ∈ [ε_MAP, 1].
    pub fn x_of_eps(&self, e: f64) -> f64 {
        if e >= 1.0 {
            return 1.0;
        }
        if e <= self.eps_map {
            return self.x_map;
        }
        self.solve_branch(|p| (p.eps - e, p.deps))
    }

    /// x on the stable branch with 1 − h(x) = z, for z ∈ [0, g⁻].
    pub fn x_of_output(&self, z: f64) -> f64 {
        if z <= 0.0 {
            return 1.0;
        }
        if z >= self.g_minus {
            return self.x_map;
        }
        self.solve_branch(|p| (p.h - (1.0 - z), p.dh))
    }

    /// Root on [x_MAP, 1] of a residual that increases along the stable
    /// branch: Newton steps, falling back to bisection when a step leaves
    /// the bracket.
    fn solve_branch(&self, f: impl Fn(&EbpPoint) -> (f64, f64)) -> f64 {
        let (mut lo, mut hi) = (self.x_map, 1.0);
        let mut x = 0.5 * (lo + hi);
        for _ in 0..200 {
            let (r, dr) = f(&self.ensemble.ebp(x));
            if r == 0.0 {
                return x;
            }
            if r < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let step = x - r / dr;
            let next = if dr > 0.0 && step > lo && step < hi { step } else { 0.5 * (lo + hi) };
            if (next - x).abs() <= 4e-16 * x || hi - lo <= 1e-16 {
                return next;
            }
            x = next;
        }
        x
    }

    pub fn g(&self, i: f64) -> f64 {
        if i >= self.i_jump {
            return 1.0;
        }
        if i <= 0.0 {
            return 0.0;
        }
        1.0 - self.ensemble.ebp(self.x_of_eps(1.0 - i)).h
    }

    /// dg/dI = h′(x)/ε′(x) on the branch, 0 above the jump.
    pub fn g_d1(&self, i: f64) -> f64 {
        if i >= self.i_jump {
            return 0.0;
        }
        let p = self.ensemble.ebp(self.x_of_eps(1.0 - i.max(0.0)));
        p.dh / p.deps
    }

    /// The decoder curve read the other way: the input I that yields
    /// output z. The vertical part above g⁻ maps to I_J.
    pub fn inverse(&self, z: f64) -> f64 {
        if z >= self.g_minus {
            return self.i_jump;
        }
        if z <= 0.0 {
            return 0.0;
        }
        1.0 - self.ensemble.ebp(self.x_of_output(z)).eps
    }

    /// ∫ inverse(z) dz over [z0, z1] ⊂ [0, 1], exactly up to quadrature.
    pub fn inverse_integral(&self, z0: f64, z1: f64) -> f64 {
        let split = self.g_minus;
        let mut total = 0.0;
        if z1 > split {
            total += self.i_jump * (z1 - z0.max(split));
        }
        let (a, b) = (z0.max(0.0), z1.min(split));
        if b > a {
            // z = 1 − h(x), dz = −h′dx.
            let (xa, xb) = (self.x_of_output(a), self.x_of_output(b));
            total += gl16().composite(xb, xa, 16, |x| {
                let p = self.ensemble.ebp(x);
                (1.0 - p.eps) * p.dh
            });
        }
        total
    }
}

/// Convenience wrapper: g(I) for `ensemble`.
pub fn decoder_map_exit(ensemble: RegularEnsemble, i: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&i) {
        return Err(Error::Parameter(format!("mutual information {i} outside [0, 1]")));
    }
    Ok(MapDecoder::new(ensemble)?.g(i))
}

/// p(τ) = (35/32)(1−τ²)³ on [−1, 1] and its first two derivatives.
fn bump(t: f64) -> (f64, f64, f64) {
    if t.abs() >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let s = 1.0 - t * t;
    let c = 35.0 / 32.0;
    (c * s * s * s, -6.0 * c * t * s * s, c * (-6.0 * s * s + 24.0 * t * t * s))
}

/// ∫_{−1}^{τ} p.
fn bump_cdf(t: f64) -> f64 {
    let t = t.clamp(-1.0, 1.0);
    let t2 = t * t;
    35.0 / 32.0 * t * (1.0 - t2 + 0.6 * t2 * t2 - t2 * t2 * t2 / 7.0) + 0.5
}

/// Quintic Hermite interpolation on [0, 1] from values and first and
/// second derivatives, returning value, slope and curvature in t.
fn quintic(t: f64, y: [f64; 6]) -> (f64, f64, f64) {
    let (t2, t3) = (t * t, t * t * t);
    let (t4, t5) = (t3 * t, t3 * t2);
    let h = [
        1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5,
        t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5,
        0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5),
        10.0 * t3 - 15.0 * t4 + 6.0 * t5,
        -4.0 * t3 + 7.0 * t4 - 3.0 * t5,
        0.5 * (t3 - 2.0 * t4 + t5),
    ];
    let dh0 = -30.0 * t2 + 60.0 * t3 - 30.0 * t4;
    let dh = [
        dh0,
        1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4,
        0.5 * (2.0 * t - 9.0 * t2 + 12.0 * t3 - 5.0 * t4),
        -dh0,
        -12.0 * t2 + 28.0 * t3 - 15.0 * t4,
        0.5 * (3.0 * t2 - 8.0 * t3 + 5.0 * t4),
    ];
    let d2h0 = -60.0 * t + 180.0 * t2 - 120.0 * t3;
    let d2h = [
        d2h0,
        -36.0 * t + 96.0 * t2 - 60.0 * t3,
        0.5 * (2.0 - 18.0 * t + 36.0 * t2 - 20.0 * t3),
        -d2h0,
        -24.0 * t + 84.0 * t2 - 60.0 * t3,
        0.5 * (6.0 * t - 24.0 * t2 + 20.0 * t3),
    ];
    let mut out = (0.0, 0.0, 0.0);
    for k in 0..6 {
        out.0 += y[k] * h[k];
        out.1 += y[k] * dh[k];
        out.2 += y[k] * d2h[k];
    }
    out
}

/// g convolved with the mollifier n·p(n·s), plus the ramp I/n², rescaled
/// so that g_n(0) = 0 and g_n(1) = 1. Outside [0, 1], g is continued by
/// 0 and 1. [`SmoothDecoder::jet`] evaluates the convolution directly.
/// [`SmoothDecoder::value`] and [`SmoothDecoder::table_jet`] go through
/// quintic Hermite tables split where the mollifier support meets 0 or
/// I_J (the curve is only C³ there) and graded toward I_J + 1/n; they are
/// accurate to about 1e-10 in value but not smooth enough for tight ODE
/// tolerances on g″/g′.
#[derive(Clone, Debug)]
pub struct SmoothDecoder {
    pub decoder: MapDecoder,
    pub n: f64,
    offset: f64,
    scale: f64,
    segments: Arc<Vec<Segment>>,
}

#[derive(Clone, Debug)]
struct Segment {
    lo: f64,
    hi: f64,
    nodes: Vec<(f64, f64, f64)>,
}

impl Segment {
    fn jet(&self, i: f64) -> (f64, f64, f64) {
        let cells = self.nodes.len() - 1;
        let h = (self.hi - self.lo) / cells as f64;
        let x = ((i - self.lo) / h).clamp(0.0, cells as f64);
        let k = (x.floor() as usize).min(cells - 1);
        let t = x - k as f64;
        let (a, b) = (self.nodes[k], self.nodes[k + 1]);
        let (v, d1, d2) = quintic(t, [a.0, h * a.1, h * h * a.2, b.0, h * b.1, h * h * b.2]);
        (v, d1 / h, d2 / (h * h))
    }
}

impl SmoothDecoder {
    pub fn new(decoder: MapDecoder, n: f64) -> Result<Self> {
        if !(n >= 1.0) || !n.is_finite() {
            return Err(Error::Parameter(format!("smoothing parameter must be finite and >= 1, got {n}")));
        }
        let mut s = SmoothDecoder { decoder, n, offset: 0.0, scale: 1.0, segments: Arc::new(Vec::new()) };
        let g0 = s.raw(0.0).0;
        let g1 = s.raw(1.0).0;
        s.offset = g0;
        s.scale = 1.0 / (g1 - g0);
        let ij = decoder.i_jump;
        let mut breaks = vec![0.0, 1.0];
        breaks.extend([1.0 / n, ij - 1.0 / n, ij + 1.0 / n]);
        // Just below I_J + 1/n the slope falls from O(n) to the ramp 1/n²
        // over a width of order 1/n²; grade the pieces toward that edge.
        let mut w = 20.0 / (n * n);
        while w < 1.0 / n {
            breaks.push(ij + 1.0 / n - w);
            w *= 2.0;
        }
        breaks.retain(|b| *b >= 0.0 && *b <= 1.0);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        let segments = breaks
            .windows(2)
            .map(|w| {
                let cells = ((w[1] - w[0]) * 4096.0).ceil().max(1024.0) as usize;
                let nodes = (0..=cells)
                    .into_par_iter()
                    .map(|k| s.jet(w[0] + (w[1] - w[0]) * k as f64 / cells as f64))
                    .collect();
                Segment { lo: w[0], hi: w[1], nodes }
            })
            .collect();
        s.segments = Arc::new(segments);
        Ok(s)
    }

    /// Unnormalized value, slope and curvature.
    fn raw(&self, i: f64) -> (f64, f64, f64) {
        let n = self.n;
        let d = &self.decoder;
        let ij = d.i_jump;
        // Region where g = 1: t ≥ I_J.
        let tj = n * (i - ij);
        let (pj, dpj, _) = bump(tj);
        let mut v = bump_cdf(tj);
        let mut d1 = n * pj;
        let mut d2 = n * n * dpj;
        // Branch region 0 ≤ t < I_J.
        let (ta, tb) = ((i - 1.0 / n).max(0.0), (i + 1.0 / n).min(ij));
        if tb > ta {
            // t = 1 − ε(x); t = ta ↔ larger x.
            let xa = d.x_of_eps(1.0 - ta);
            let xb = d.x_of_eps(1.0 - tb);
            let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
            let (nodes, weights) = (&gl16().nodes, &gl16().weights);
            let panels = 4;
            let w = (xa - xb) / panels as f64;
            for p in 0..panels {
                let lo = xb + w * p as f64;
                for (z, wt) in nodes.iter().zip(weights) {
                    let x = lo + 0.5 * w * (z + 1.0);
                    let e = d.ensemble.ebp(x);
                    let t = 1.0 - e.eps;
                    let (k0, k1, k2) = bump(n * (i - t));
                    let base = 0.5 * w * wt * (1.0 - e.h) * e.deps;
                    s0 += base * k0;
                    s1 += base * k1;
                    s2 += base * k2;
                }
            }
            v += n * s0;
            d1 += n * n * s1;
            d2 += n * n * n * s2;
        }
        let ramp = 1.0 / (n * n);
        (v + ramp * i, d1 + ramp, d2)
    }

    /// (g_n(I), g_n′(I), g_n″(I)) from the convolution itself.
    pub fn jet(&self, i: f64) -> (f64, f64, f64) {
        let (v, d1, d2) = self.raw(i);
        ((v - self.offset) * self.scale, d1 * self.scale, d2 * self.scale)
    }

    /// (g_n(I), g_n′(I), g_n″(I)) from the table; I is clamped to [0, 1].
    pub fn table_jet(&self, i: f64) -> (f64, f64, f64) {
        let i = i.clamp(0.0, 1.0);
        let seg = self.segments.iter().find(|s| i <= s.hi).unwrap_or(&self.segments[self.segments.len() - 1]);
        seg.jet(i)
    }

    pub fn value(&self, i: f64) -> f64 {
        self.table_jet(i).0
    }
}

/// Convenience wrapper: g_n(I).
pub fn smooth_g(ensemble: RegularEnsemble, i: f64, n: f64) -> Result<f64> {
    Ok(SmoothDecoder::new(MapDecoder::new(ensemble)?, n)?.value(i))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e36() -> RegularEnsemble {
        RegularEnsemble::new(3, 6).unwrap()
    }

    #[test]
    fn thresholds_of_three_six() {
        let e = e36();
        let (bp, _) = e.bp_threshold();
        assert!((bp - 0.4294398144).abs() < 1e-8);
        let (map, _) = e.map_threshold().unwrap();
        assert!((map - 0.48815088).abs() < 1e-7);
        assert!((e.map_threshold_by_area().unwrap() - map).abs() < 1e-8);
    }

    #[test]
    fn both_routes_agree_on_other_ensembles() {
        for (l, r) in [(4, 8), (3, 4), (5, 10), (4, 6)] {
            let e = RegularEnsemble::new(l, r).unwrap();
            let a = e.map_threshold().unwrap().0;
            let b = e.map_threshold_by_area().unwrap();
            assert!((a - b).abs() < 1e-7, "({l},{r}): {a} {b}");
            assert!(a > e.bp_threshold().0);
        }
    }

    #[test]
    fn unsupported_ensembles() {
        assert!(matches!(RegularEnsemble::new(2, 4), Err(Error::Model(_))));
        assert!(matches!(RegularEnsemble::new(3, 3), Err(Error::Model(_))));
    }

    #[test]
    fn g_endpoints_jump_and_area() {
        let d = MapDecoder::new(e36()).unwrap();
        assert_eq!(d.g(0.0), 0.0);
        assert_eq!(d.g(1.0), 1.0);
        assert!((d.g(d.i_jump - 1e-9) - d.g_minus).abs() < 1e-6);
        assert!(d.g_minus < 1.0);
        // ∫g = 1 − r through the inverse: ∫ g dI = 1 − ∫ inverse dz.
        let area = 1.0 - d.inverse_integral(0.0, 1.0);
        assert!((area - 0.5).abs() < 1e-10, "{area}");
        for k in 1..50 {
            let i = k as f64 / 50.0 * d.i_jump;
            let err = (d.inverse(d.g(i)) - i).abs();
            assert!(err < 1e-8, "{i}: {err:e}");
        }
    }

    #[test]
    fn mollifier_is_normalized() {
        assert!((bump_cdf(1.0) - 1.0).abs() < 1e-15);
        assert_eq!(bump_cdf(-1.0), 0.0);
        let r = Rule::legendre(16);
        assert!((r.integrate(-1.0, 0.3, |t| bump(t).0) - bump_cdf(0.3)).abs() < 1e-14);
    }

    #[test]
    fn smooth_g_is_increasing_and_close() {
        let d = MapDecoder::new(e36()).unwrap();
        for &n in &[5.0, 50.0, 200.0] {
            let s = SmoothDecoder::new(d, n).unwrap();
            assert!(s.value(0.0).abs() < 1e-15);
            assert!((s.value(1.0) - 1.0).abs() < 1e-14);
            let mut prev = -1.0;
            for k in 0..=2000 {
                let v = s.value(k as f64 / 2000.0);
                assert!(v > prev);
                prev = v;
            }
        }
        let s = SmoothDecoder::new(d, 200.0).unwrap();
        for k in 0..=400 {
            let i = k as f64 / 400.0;
            if (i - d.i_jump).abs() > 0.05 {
                assert!((s.value(i) - d.g(i)).abs() <= 0.01, "{i}");
            }
        }
    }

    #[test]
    fn table_matches_the_convolution() {
        let d = MapDecoder::new(e36()).unwrap();
        for &n in &[1.0, 30.0, 1000.0] {
            let s = SmoothDecoder::new(d, n).unwrap();
            for k in 0..=3001 {
                let i = k as f64 / 3001.0;
                let (a, b) = (s.table_jet(i), s.jet(i));
                assert!((a.0 - b.0).abs() < 1e-10, "{n} {i}");
                assert!((a.1 - b.1).abs() < 1e-6 * (1.0 + b.1.abs()), "{n} {i}: {} {}", a.1, b.1);
                assert!((a.2 - b.2).abs() < 1e-3 * (1.0 + b.2.abs()), "{n} {i}: {} {}", a.2, b.2);
            }
        }
    }

    #[test]
    fn smooth_g_derivatives_match_differences() {
        let d = MapDecoder::new(e36()).unwrap();
        let s = SmoothDecoder::new(d, 40.0).unwrap();
        for &i in &[0.01, 0.2, d.i_jump - 0.01, d.i_jump, d.i_jump + 0.013, 0.99] {
            let h = 1e-5;
            let (_, d1, d2) = s.jet(i);
            let fd1 = (s.jet(i + h).0 - s.jet(i - h).0) / (2.0 * h);
            let fd2 = (s.jet(i + h).1 - s.jet(i - h).1) / (2.0 * h);
            assert!((d1 - fd1).abs() < 1e-6 * (1.0 + d1.abs()), "{i}: {d1} {fd1}");
            assert!((d2 - fd2).abs() < 1e-5 * (1.0 + d2.abs()), "{i}: {d2} {fd2}");
        }
    }
}
