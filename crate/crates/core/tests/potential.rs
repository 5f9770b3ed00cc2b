mod common;

use scsat::numeric::{OdeTol, Rule};
use scsat::potential::{
    conventional_potential, coordinate_map, potential, potential_equivalence_check, potential_threshold,
    PotentialOptions, ThresholdOptions,
};
use scsat::system::{build_profile_table, DerivativeMode, SystemFunctions};

#[test]
fn scalar_systems_reduce_to_conventional_potential() {
    let mut r = common::rng(11);
    for _ in 0..20 {
        let (s, _, _) = common::random_scalar_system(&mut r);
        let t = build_profile_table(&s, 1024).unwrap();
        let p = potential(&t, &PotentialOptions::default()).unwrap();
        let e0 = p.exponent[0];
        for e in &p.exponent {
            assert!((e - e0).abs() < 1e-8, "exponent drifts: {e} vs {e0}");
        }
        let conv = conventional_potential(&t, OdeTol::default()).unwrap();
        let scale = (-e0).exp();
        for (a, b) in p.v.iter().zip(&conv) {
            assert!((a * scale - b).abs() < 1e-6);
        }
    }
}

/// V(1) − V(u_s) for the (3,6) pair from the closed-form integrand
/// (u − φ₀ψ₀)/φ₀′(ψ₀), the u-independent factor dropped.
fn bec_potential_difference(eps: f64) -> f64 {
    let mut x: f64 = 1.0;
    for _ in 0..200_000 {
        x = eps * (1.0 - (1.0 - x).powi(5)).powi(2);
    }
    let us = 1.0 - x;
    let rule = Rule::legendre(20);
    rule.composite(us, 1.0, 400, |u| {
        let v = u.powi(5);
        let phi = 1.0 - eps * (1.0 - v).powi(2);
        (u - phi) / (2.0 * eps * (1.0 - v))
    })
}

#[test]
fn bec_potential_threshold_matches_grid_scan() {
    let fam = |e: f64| SystemFunctions::bec_regular(3, 6, e);
    let opts = ThresholdOptions { theta_tol: 1e-7, ..Default::default() };
    let eps_star = potential_threshold(fam, 0.43, 0.52, &opts).unwrap();
    let mut scan = None;
    let mut e = 0.4900;
    while e < 0.5100 {
        if bec_potential_difference(e) > 0.0 {
            scan = Some(e);
            break;
        }
        e += 1e-4;
    }
    let scan = scan.expect("sign change in scan window");
    assert!((eps_star - scan).abs() <= 1e-4, "bisection {eps_star} vs scan {scan}");
}

#[test]
fn equivalence_bec_and_scalar() {
    let s = SystemFunctions::bec_regular(3, 6, 0.45).unwrap();
    let t = build_profile_table(&s, 2048).unwrap();
    let p = potential(&t, &PotentialOptions::default()).unwrap();
    let m = coordinate_map(&t, OdeTol::default()).unwrap();
    let eq = potential_equivalence_check(&p, &m).unwrap();
    assert!(eq.relative <= 1e-6, "{eq:?}");

    let mut r = common::rng(5);
    let (s, _, _) = common::random_scalar_system(&mut r);
    let t = build_profile_table(&s, 2048).unwrap();
    let p = potential(&t, &PotentialOptions::default()).unwrap();
    let m = coordinate_map(&t, OdeTol::default()).unwrap();
    assert!(potential_equivalence_check(&p, &m).unwrap().relative <= 1e-6);
}

#[test]
fn stationary_points_are_fixed_points() {
    for eps in [0.45, 0.47, 0.5] {
        let s = SystemFunctions::bec_regular(3, 6, eps).unwrap();
        let t = build_profile_table(&s, 1024).unwrap();
        let p = potential(&t, &PotentialOptions::default()).unwrap();
        for sp in p.stationary.iter().filter(|x| !x.boundary) {
            let pt = s.point(sp.u).unwrap();
            assert!(pt.h().abs() <= 1e-10);
        }
    }
}

#[test]
fn scalar_a_matches_symbolic_and_finite_difference() {
    let mut r = common::rng(3);
    let (s, phi, psi) = common::random_scalar_system(&mut r);
    let fd = s.clone().with_derivative_mode(DerivativeMode::FiniteDifference { h: None });
    for k in 1..50 {
        let u = k as f64 / 50.0;
        let ps = psi.jet(u);
        let ph = phi.jet(ps.value);
        let symbolic = ph.d1 / 6.0 * (ps.d2 + ph.d2 * ps.d1 * ps.d1 / ph.d1 + ps.d2);
        let a = s.point(u).unwrap().a();
        let a_fd = fd.point(u).unwrap().a();
        assert!((a - symbolic).abs() < 1e-12);
        assert!((a_fd - symbolic).abs() < 1e-6, "{a_fd} vs {symbolic}");
    }
}

#[test]
fn bec_coordinate_map_is_monotone() {
    let s = SystemFunctions::bec_regular(3, 6, 0.45).unwrap();
    let t = build_profile_table(&s, 2048).unwrap();
    let m = coordinate_map(&t, OdeTol::default()).unwrap();
    assert!(m.f.windows(2).all(|w| w[1] > w[0]));
    assert!(m.b[1..2047].iter().all(|&b| b > 0.0));
}
