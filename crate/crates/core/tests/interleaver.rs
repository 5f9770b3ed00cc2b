use proptest::prelude::*;
use scsat::interleaver::ScInterleaver;

fn sizes() -> impl Strategy<Value = (usize, usize, usize, u64)> {
    (1usize..30).prop_flat_map(|l| (Just(l), 1..=l.min(8), 1usize..12, any::<u64>()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn divisible_sizes_are_exact((l, w, k, seed) in sizes()) {
        let m = w * k;
        let il = ScInterleaver::build(l, w, m, seed).unwrap();
        prop_assert!(il.is_bijection());
        let u = il.verify_uniformity();
        prop_assert!(u.exact);
        prop_assert!(u.forward.iter().flatten().all(|&c| c == k));
        prop_assert!(u.backward.iter().flatten().all(|&c| c == k));
    }

    #[test]
    fn any_size_is_a_bijection((l, w, m, seed) in sizes()) {
        let il = ScInterleaver::build(l, w, m, seed).unwrap();
        prop_assert!(il.is_bijection());
        for sec in 0..l {
            for b in 0..m {
                let (b2, l2) = il.forward(b, sec).unwrap();
                let off = (sec + l - l2) % l;
                prop_assert!(off < w);
                prop_assert_eq!(il.inverse(b2, l2).unwrap(), (b, sec));
            }
        }
        for p in il.inner.iter().chain(&il.outer) {
            let mut s = p.clone();
            s.sort_unstable();
            prop_assert_eq!(s, (0..m).collect::<Vec<_>>());
        }
    }
}

#[test]
fn uniformity_deviation_is_at_most_one() {
    for m in 1..30 {
        let u = ScInterleaver::build(9, 4, m, m as u64).unwrap().verify_uniformity();
        assert!(u.max_deviation <= 1);
        assert_eq!(u.exact, m % 4 == 0);
    }
}
