//! Demapper mutual information over complex AWGN with erasure a priori
//! channels.

use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::constellation::Constellation;
use crate::error::{Error, Result};
use crate::numeric::{pairwise_sum, Rule};

/// How expectations over the channel output are computed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Integration {
    /// Tensor Gauss–Hermite rule with `n`×`n` nodes per transmitted point.
    GaussHermite(usize),
    MonteCarlo { samples: usize, seed: u64 },
}

impl Default for Integration {
    fn default() -> Self {
        Integration::GaussHermite(64)
    }
}

/// A labeled constellation at a fixed Es/N0.
#[derive(Clone, Debug)]
pub struct BicmModel {
    pub constellation: Constellation,
    pub snr_db: f64,
    pub integration: Integration,
}

impl BicmModel {
    pub fn new(constellation: Constellation, snr_db: f64) -> Self {
        BicmModel { constellation, snr_db, integration: Integration::default() }
    }

    pub fn with_integration(mut self, integration: Integration) -> Self {
        self.integration = integration;
        self
    }

    pub fn at_snr(&self, snr_db: f64) -> Self {
        BicmModel { snr_db, ..self.clone() }
    }

    pub fn q(&self) -> usize {
        self.constellation.q
    }

    /// N0 for unit symbol energy.
    pub fn n0(&self) -> f64 {
        10f64.powf(-self.snr_db / 10.0)
    }
}

/// log2 Σ_j m_j over label sets that agree with the sent label on the
/// bits of a mask, for every mask, at one channel output. Metrics are
/// exp(−|y − x_j|²/N0) relative to their maximum.
fn mask_logs(points: &[Complex64], sent: usize, y: Complex64, n0: f64, out: &mut [f64], metrics: &mut [f64]) {
    let mut best = f64::NEG_INFINITY;
    for (m, p) in metrics.iter_mut().zip(points) {
        *m = -(y - p).norm_sqr() / n0;
        best = best.max(*m);
    }
    for m in metrics.iter_mut() {
        *m = (*m - best).exp();
    }
    for (mask, o) in out.iter_mut().enumerate() {
        let mut s = 0.0;
        for (j, m) in metrics.iter().enumerate() {
            if (j ^ sent) & mask == 0 {
                s += m;
            }
        }
        *o = s.log2();
    }
}

/// Expected mask logs for a model, with per-mask standard errors when
/// the expectation is a sample mean.
#[derive(Clone, Debug)]
pub struct DemodTable {
    pub q: usize,
    pub snr_db: f64,
    /// E[log2 Σ_{j agrees with sent on mask} m_j], indexed by mask.
    pub mask_log: Vec<f64>,
    /// Bit q of label i corresponds to mask 1 << (Q−1−q).
    pub mi: Vec<Vec<f64>>,
    pub capacity: f64,
    /// f₀ in the power basis.
    pub f0_power: Vec<f64>,
}

impl DemodTable {
    pub fn new(model: &BicmModel) -> Result<Self> {
        let c = &model.constellation;
        let m = c.size();
        let q = c.q;
        if !model.snr_db.is_finite() {
            return Err(Error::Parameter(format!("SNR {} dB is not finite", model.snr_db)));
        }
        let n0 = model.n0();
        let mask_log = match model.integration {
            Integration::GaussHermite(n) => {
                if n == 0 {
                    return Err(Error::Parameter("quadrature order must be positive".into()));
                }
                let rule = Rule::hermite(n);
                let scale = n0.sqrt();
                let per_symbol: Vec<Vec<f64>> = (0..m)
                    .into_par_iter()
                    .map(|sent| {
                        let mut acc = vec![Vec::with_capacity(n * n); m];
                        let mut out = vec![0.0; m];
                        let mut metrics = vec![0.0; m];
                        for (t1, w1) in rule.nodes.iter().zip(&rule.weights) {
                            for (t2, w2) in rule.nodes.iter().zip(&rule.weights) {
                                let y = c.points[sent] + Complex64::new(scale * t1, scale * t2);
                                mask_logs(&c.points, sent, y, n0, &mut out, &mut metrics);
                                let w = w1 * w2 / std::f64::consts::PI;
                                for (a, o) in acc.iter_mut().zip(&out) {
                                    a.push(w * o);
                                }
                            }
                        }
                        acc.iter().map(|a| pairwise_sum(a)).collect()
                    })
                    .collect();
                (0..m).map(|mask| per_symbol.iter().map(|s| s[mask]).sum::<f64>() / m as f64).collect()
            }
            Integration::MonteCarlo { samples, seed } => {
                if samples == 0 {
                    return Err(Error::Parameter("sample count must be positive".into()));
                }
                monte_carlo_mask_log(c, n0, samples, seed).0
            }
        };
        let mut mi = vec![vec![0.0; 1 << (q - 1)]; q];
        let full = m - 1;
        for (bq, row) in mi.iter_mut().enumerate() {
            let others: Vec<usize> = (0..q).filter(|&j| j != bq).collect();
            for (s, v) in row.iter_mut().enumerate() {
                let mut mask = 0;
                for (k, &o) in others.iter().enumerate() {
                    if s >> k & 1 == 1 {
                        mask |= 1 << (q - 1 - o);
                    }
                }
                *v = 1.0 - mask_log[mask] + mask_log[mask | 1 << (q - 1 - bq)];
            }
        }
        let capacity = q as f64 - (mask_log[0] - mask_log[full]);
        let f0_power = f0_power_basis(&mi, q);
        Ok(DemodTable { q, snr_db: model.snr_db, mask_log, mi, capacity, f0_power })
    }

    /// f(I₁, …, I_{Q−1}): the average over bit positions of the extrinsic
    /// information with each other bit known with probability I_j.
    pub fn exit(&self, inputs: &[f64]) -> Result<f64> {
        if inputs.len() != self.q - 1 {
            return Err(Error::Parameter(format!("expected {} inputs, got {}", self.q - 1, inputs.len())));
        }
        if let Some(bad) = inputs.iter().find(|i| !(0.0..=1.0).contains(*i)) {
            return Err(Error::Parameter(format!("mutual information {bad} outside [0, 1]")));
        }
        Ok(self.exit_unchecked(inputs))
    }

    pub(crate) fn exit_unchecked(&self, inputs: &[f64]) -> f64 {
        let mut total = 0.0;
        for row in &self.mi {
            for (s, v) in row.iter().enumerate() {
                let mut w = 1.0;
                for (k, i) in inputs.iter().enumerate() {
                    w *= if s >> k & 1 == 1 { *i } else { 1.0 - i };
                }
                total += w * v;
            }
        }
        total / self.q as f64
    }

    /// f₀(I) = f(I, …, I) and its first two derivatives.
    pub fn f0(&self, i: f64) -> (f64, f64, f64) {
        let c = &self.f0_power;
        let (mut v, mut d1, mut d2) = (0.0, 0.0, 0.0);
        for k in (0..c.len()).rev() {
            d2 = d2 * i + 2.0 * d1;
            d1 = d1 * i + v;
            v = v * i + c[k];
        }
        (v, d1, d2)
    }

    /// ∫_a^b f₀.
    pub fn f0_integral(&self, a: f64, b: f64) -> f64 {
        let anti = |x: f64| {
            let mut s = 0.0;
            for (k, c) in self.f0_power.iter().enumerate().rev() {
                s = s * x + c / (k + 1) as f64;
            }
            s * x
        };
        anti(b) - anti(a)
    }
}

/// Coefficients a_j of f₀(I) = Σ_j a_j I^j, from the Bernstein form
/// Σ_k c_k I^k (1−I)^{d−k} with c_k = (1/Q) Σ_{|S|=k} mi.
fn f0_power_basis(mi: &[Vec<f64>], q: usize) -> Vec<f64> {
    let d = q - 1;
    let mut c = vec![0.0; d + 1];
    for row in mi {
        for (s, v) in row.iter().enumerate() {
            c[(s as u32).count_ones() as usize] += v / q as f64;
        }
    }
    let binom = |n: usize, k: usize| -> f64 { (0..k).fold(1.0, |acc, t| acc * (n - t) as f64 / (t + 1) as f64) };
    let mut a = vec![0.0; d + 1];
    for (k, ck) in c.iter().enumerate() {
        // I^k (1−I)^{d−k} = Σ_t C(d−k, t)(−1)^t I^{k+t}
        for t in 0..=d - k {
            let sign = if t % 2 == 0 { 1.0 } else { -1.0 };
            a[k + t] += ck * sign * binom(d - k, t);
        }
    }
    a
}

/// Sample means and standard errors of the mask logs from `samples`
/// uniformly drawn labels and Gaussian noise.
pub fn monte_carlo_mask_log(c: &Constellation, n0: f64, samples: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let m = c.size();
    let chunks = 64usize;
    let per = samples.div_ceil(chunks);
    let sigma = (n0 / 2.0).sqrt();
    let parts: Vec<(Vec<f64>, Vec<f64>, usize)> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk as u64);
            let count = per.min(samples.saturating_sub(chunk * per));
            let mut sum = vec![0.0; m];
            let mut sq = vec![0.0; m];
            let mut out = vec![0.0; m];
            let mut metrics = vec![0.0; m];
            for _ in 0..count {
                let sent = rng.random_range(0..m);
                let nr: f64 = rng.sample(StandardNormal);
                let ni: f64 = rng.sample(StandardNormal);
                let y = c.points[sent] + Complex64::new(sigma * nr, sigma * ni);
                mask_logs(&c.points, sent, y, n0, &mut out, &mut metrics);
                for k in 0..m {
                    sum[k] += out[k];
                    sq[k] += out[k] * out[k];
                }
            }
            (sum, sq, count)
        })
        .collect();
    let total: usize = parts.iter().map(|p| p.2).sum();
    let nf = total as f64;
    let mut mean = vec![0.0; m];
    let mut se = vec![0.0; m];
    for k in 0..m {
        let s: f64 = parts.iter().map(|p| p.0[k]).sum();
        let s2: f64 = parts.iter().map(|p| p.1[k]).sum();
        mean[k] = s / nf;
        se[k] = ((s2 / nf - mean[k] * mean[k]).max(0.0) / nf).sqrt();
    }
    (mean, se)
}

/// Coded-modulation capacity in bits per symbol.
pub fn cm_capacity(model: &BicmModel) -> Result<f64> {
    Ok(DemodTable::new(model)?.capacity)
}

/// f(I₁, …, I_{Q−1}) for `model`.
pub fn demod_exit(model: &BicmModel, inputs: &[f64]) -> Result<f64> {
    DemodTable::new(model)?.exit(inputs)
}

#[cfg(test)]
mod tests {
    use super::super::constellation::Preset;
    use super::*;

    fn gray(snr: f64) -> BicmModel {
        BicmModel::new(Preset::Gray.constellation(), snr)
    }

    #[test]
    fn capacity_limits() {
        assert!(cm_capacity(&gray(-30.0)).unwrap() < 1e-2);
        assert!((cm_capacity(&gray(40.0)).unwrap() - 4.0).abs() < 1e-9);
    }

    #[test]
    fn capacity_is_mapping_independent() {
        let a = cm_capacity(&gray(5.0)).unwrap();
        for p in Preset::ALL {
            let b = cm_capacity(&BicmModel::new(p.constellation(), 5.0)).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn genie_and_noiseless_limits() {
        let t = DemodTable::new(&gray(40.0)).unwrap();
        assert!((t.exit(&[1.0, 1.0, 1.0]).unwrap() - 1.0).abs() < 1e-9);
        assert!((t.f0(0.0).0 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn power_basis_matches_direct_evaluation() {
        let t = DemodTable::new(&gray(5.76)).unwrap();
        for k in 0..=10 {
            let i = k as f64 / 10.0;
            assert!((t.f0(i).0 - t.exit(&[i, i, i]).unwrap()).abs() < 1e-13);
            let h = 1e-5;
            let fd = (t.f0(i + h).0 - t.f0(i - h).0) / (2.0 * h);
            assert!((t.f0(i).1 - fd).abs() < 1e-8);
        }
        let r = Rule::legendre(8);
        assert!((t.f0_integral(0.1, 0.9) - r.integrate(0.1, 0.9, |x| t.f0(x).0)).abs() < 1e-14);
    }

    #[test]
    fn inputs_are_checked() {
        let t = DemodTable::new(&gray(5.0)).unwrap();
        assert!(matches!(t.exit(&[0.5, 1.2, 0.0]), Err(Error::Parameter(_))));
        assert!(matches!(t.exit(&[0.5]), Err(Error::Parameter(_))));
    }

    #[test]
    fn monte_carlo_agrees_with_quadrature() {
        let c = Preset::Gray.constellation();
        let model = BicmModel::new(c.clone(), 5.5);
        let t = DemodTable::new(&model).unwrap();
        let (mean, se) = monte_carlo_mask_log(&c, model.n0(), 200_000, 7);
        let mc = model.clone().with_integration(Integration::MonteCarlo { samples: 200_000, seed: 7 });
        let tm = DemodTable::new(&mc).unwrap();
        assert_eq!(tm.mask_log, mean);
        // Capacity is a difference of two mask logs; bound it loosely by
        // the sum of their errors.
        assert!((tm.capacity - t.capacity).abs() < 4.0 * (se[0] + se[15]));
    }
}
