mod common;

use proptest::prelude::*;
use scsat::de::{de_run_with, find_fixed_points, saturation_check, Boundary, DeOptions};
use scsat::system::SystemFunctions;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    // Coupled DE started at u_min never decreases in any section.
    #[test]
    fn coupled_iterates_are_monotone(seed in any::<u64>(), sections in 4usize..40, w in 1usize..6) {
        let w = w.min(sections);
        let s = common::random_monotone_system(&mut common::rng(seed));
        let fp = find_fixed_points(&s, 512, 1e-12).unwrap();
        let opts = DeOptions { max_iter: 150, trajectory_stride: 1, stall_tol: 0.0, ..DeOptions::default() };
        let run = de_run_with(&s, sections, w, fp.v_opt, &opts).unwrap();
        for pair in run.trajectory.windows(2) {
            for (l, (a, b)) in pair[0].u.iter().zip(&pair[1].u).enumerate() {
                prop_assert!(*b >= *a - 1e-14, "section {l} at iteration {}: {a} -> {b}", pair[1].iteration);
            }
        }
    }
}

fn bec(eps: f64) -> SystemFunctions {
    SystemFunctions::bec_regular(3, 6, eps).unwrap()
}

#[test]
fn coupled_chain_saturates_where_uncoupled_stalls() {
    let s = bec(0.47);
    let fp = find_fixed_points(&s, 4096, 1e-12).unwrap();
    assert!(fp.u_bp < 0.9, "uncoupled fixed point {}", fp.u_bp);

    let opts = DeOptions { max_iter: 20_000, stall_tol: 1e-12, ..DeOptions::default() };
    let coupled = de_run_with(&s, 100, 8, fp.v_opt, &opts).unwrap();
    assert!(saturation_check(&coupled.state, &fp, 1e-3), "min u {}", coupled.state.min_u());

    let single = de_run_with(&s, 100, 1, fp.v_opt, &opts).unwrap();
    assert!(!saturation_check(&single.state, &fp, 1e-3));
    assert!((single.state.min_u() - fp.u_bp).abs() < 1e-6, "{} vs {}", single.state.min_u(), fp.u_bp);
}

#[test]
fn circular_boundary_runs() {
    let s = bec(0.4);
    let opts = DeOptions { max_iter: 500, boundary: Boundary::Circular, ..DeOptions::default() };
    let run = de_run_with(&s, 20, 3, 1.0, &opts).unwrap();
    assert!(run.state.u.iter().all(|u| (0.0..=1.0).contains(u)));
}
