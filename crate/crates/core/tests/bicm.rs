mod common;

use rand::RngExt;
use rand_distr::StandardNormal;
use scsat::bicm::*;

fn e36() -> RegularEnsemble {
    RegularEnsemble::new(3, 6).unwrap()
}

fn model(p: Preset, snr: f64) -> BicmModel {
    BicmModel::new(p.constellation(), snr)
}

/// Bit q (most significant first) of a 4-bit label.
fn label_bit(label: usize, q: usize) -> usize {
    (label >> (3 - q)) & 1
}

/// Independent Monte Carlo estimate of f(inputs): bit q sees the other
/// bits, in ascending position order, erased with probability 1 − I_k.
fn mc_exit(c: &Constellation, snr: f64, inputs: &[f64], samples: usize, seed: u64) -> (f64, f64) {
    let n0 = 10f64.powf(-snr / 10.0);
    let sigma = (n0 / 2.0).sqrt();
    let mut r = common::rng(seed);
    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..samples {
        let sent = r.random_range(0..16usize);
        let nr: f64 = r.sample(StandardNormal);
        let ni: f64 = r.sample(StandardNormal);
        let y = c.points[sent] + num_complex::Complex64::new(sigma * nr, sigma * ni);
        let metric: Vec<f64> = c.points.iter().map(|x| (-(y - x).norm_sqr() / n0).exp()).collect();
        let mut acc = 0.0;
        for q in 0..4 {
            let others: Vec<usize> = (0..4).filter(|&k| k != q).collect();
            let known: Vec<bool> = inputs.iter().map(|&i| r.random_bool(i)).collect();
            let (mut right, mut wrong) = (0.0, 0.0);
            for (j, m) in metric.iter().enumerate() {
                let agrees = others
                    .iter()
                    .zip(&known)
                    .all(|(&k, &kn)| !kn || label_bit(j, k) == label_bit(sent, k));
                if !agrees {
                    continue;
                }
                if label_bit(j, q) == label_bit(sent, q) {
                    right += m;
                } else {
                    wrong += m;
                }
            }
            acc += 1.0 + (right / (right + wrong)).log2();
        }
        let v = acc / 4.0;
        sum += v;
        sq += v * v;
    }
    let n = samples as f64;
    let mean = sum / n;
    (mean, ((sq / n - mean * mean) / (n - 1.0)).sqrt())
}

#[test]
fn exit_function_matches_independent_monte_carlo() {
    let mut r = common::rng(4);
    for (k, p) in Preset::ALL.iter().cycle().take(10).enumerate() {
        let snr = r.random_range(4.0..8.0);
        let inputs: Vec<f64> = (0..3).map(|_| r.random_range(0.0..1.0)).collect();
        let exact = demod_exit(&model(*p, snr), &inputs).unwrap();
        let (mean, se) = mc_exit(&p.constellation(), snr, &inputs, 20_000, 100 + k as u64);
        assert!((exact - mean).abs() <= 3.0 * se + 1e-9, "{p} {snr:.3} {inputs:?}: {exact} vs {mean} ± {se}");
    }
}

#[test]
fn capacity_threshold_near_five_point_one_two() {
    let m = model(Preset::Gray, 5.0);
    let snr = capacity_threshold(&m, 0.5, &SnrSearch::default()).unwrap();
    assert!((snr - 5.12).abs() <= 0.05, "{snr}");
    // Capacity does not depend on the labeling.
    for p in Preset::ALL {
        let c = cm_capacity(&model(p, snr)).unwrap();
        assert!((c - 2.0).abs() < 1e-3, "{p}: {c}");
    }
}

/// BP threshold by bisection on whether x ← ελ(1 − ρ(1 − x)) reaches 0.
fn bp_oracle(l: i32, r: i32) -> f64 {
    let dies = |eps: f64| {
        let mut x = eps;
        for _ in 0..400_000 {
            x = eps * (1.0 - (1.0 - x).powi(r - 1)).powi(l - 1);
            if x < 1e-12 {
                return true;
            }
        }
        false
    };
    let (mut lo, mut hi) = (0.3, 0.6);
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if dies(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// MAP threshold as the ε where the scalar potential
/// U(x) = ∫₀ˣ (t − ελ(1 − ρ(1 − t))) ρ′(1 − t) dt first has a nonpositive
/// minimum away from 0.
fn map_oracle(l: i32, r: i32) -> f64 {
    let min_u = |eps: f64| {
        let n = 20_000;
        let h = 1.0 / n as f64;
        let f = |t: f64| (t - eps * (1.0 - (1.0 - t).powi(r - 1)).powi(l - 1)) * (r - 1) as f64 * (1.0 - t).powi(r - 2);
        let mut u = 0.0;
        let mut best = f64::INFINITY;
        for k in 0..n {
            let (a, b) = (k as f64 * h, (k + 1) as f64 * h);
            u += h / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b));
            if b > 0.05 {
                best = best.min(u);
            }
        }
        best
    };
    let (mut lo, mut hi) = (0.3, 0.6);
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if min_u(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn decoder_thresholds_match_oracles() {
    for (l, r) in [(3, 6), (4, 8), (3, 5)] {
        let e = RegularEnsemble::new(l, r).unwrap();
        let (eps_bp, _) = e.bp_threshold();
        let (eps_map, _) = e.map_threshold().unwrap();
        let bp = bp_oracle(l as i32, r as i32);
        let map = map_oracle(l as i32, r as i32);
        assert!((eps_bp - bp).abs() < 1e-5, "({l},{r}) bp {eps_bp} vs {bp}");
        assert!((eps_map - map).abs() < 1e-4, "({l},{r}) map {eps_map} vs {map}");
    }
}

#[test]
fn exit_curves_are_monotone() {
    let d = MapDecoder::new(e36()).unwrap();
    for p in Preset::ALL {
        let t = DemodTable::new(&model(p, 5.76)).unwrap();
        let mut prev = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for k in 0..=1000 {
            let i = k as f64 / 1000.0;
            let cur = (t.f0(i).0, d.g(i));
            assert!(cur.0 >= prev.0 - 1e-15 && cur.1 >= prev.1, "{p} at {i}");
            prev = cur;
        }
    }
}

#[test]
fn rate_loss_identity_holds_at_every_quadrature_order() {
    let d = MapDecoder::new(e36()).unwrap();
    for p in Preset::ALL {
        for order in [16, 64] {
            let m = model(p, 5.76).with_integration(Integration::GaussHermite(order));
            let c = build_exit_chart(&DemodTable::new(&m).unwrap(), &d, 100).unwrap();
            let loss = rate_loss(&c, 0.5);
            assert!(loss.residual.abs() <= 5e-3, "{p} GH{order}: {loss:?}");
        }
    }
}

#[test]
fn optimized_labeling_has_two_stable_crossings() {
    let t = DemodTable::new(&model(Preset::IdOptimized, 5.76)).unwrap();
    let c = build_exit_chart(&t, &MapDecoder::new(e36()).unwrap(), 100).unwrap();
    assert_eq!(c.stable_crossings(), 2, "{:?}", c.crossings);
    assert!(c.s_b < c.s_t - c.s_m);
    let top = c.crossings.last().unwrap();
    assert_eq!(top.z, 1.0);
    assert!((top.u - t.f0(1.0).0).abs() < 1e-15);
}

#[test]
fn gray_chart_is_open_at_five_point_seven_six_db() {
    let t = DemodTable::new(&model(Preset::Gray, 5.76)).unwrap();
    let c = build_exit_chart(&t, &MapDecoder::new(e36()).unwrap(), 100).unwrap();
    assert!(c.tunnel_open());
    assert_eq!(c.stable_crossings(), 1);
}

#[test]
fn mapping_files_round_trip_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("labels.txt");
    std::fs::write(&path, Preset::SetPartition.constellation().to_text()).unwrap();
    let c = Constellation::load(&path).unwrap();
    assert_eq!(c.name, "labels");
    let a = cm_capacity(&BicmModel::new(c, 6.0)).unwrap();
    let b = cm_capacity(&model(Preset::SetPartition, 6.0)).unwrap();
    assert!((a - b).abs() < 1e-12);
    assert!(Constellation::load(&dir.path().join("missing.txt")).is_err());
}
