use avoidwalk_core::mc::par_reps;
use avoidwalk_core::walk_core::{derive_substream, sample_path, StepLaw, Walk};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(200) })]

    #[test]
    fn lattice_positions_stay_on_the_grid(
        a in 1u32..5, b in 1u32..5, scale in 1u32..4, x0 in -50i64..50, seed: u64,
    ) {
        // Steps −a·s and +b·s with weights b and a have mean zero and span gcd(a, b)·s.
        let spec = format!(
            "lattice: {}:{}/{}, {}:{}/{}",
            -(a as i64) * scale as i64, b, a + b, b * scale, a, a + b
        );
        let law = StepLaw::parse(&spec).unwrap();
        let w = law.as_lattice().unwrap();
        let g = num_integer::gcd(a, b) * scale;
        prop_assert_eq!(w.lambda(), g as f64);
        let start = w.site_of(x0 as f64 * g as f64).unwrap();
        let p = sample_path(w, start, 500, &mut derive_substream(seed, 0));
        for s in p.iter_with_start() {
            let real = w.real(s);
            prop_assert_eq!(real.rem_euclid(g as f64), 0.0);
        }
    }

    #[test]
    fn substream_reduction_ignores_order(seed: u64, count in 1u64..300) {
        let law = StepLaw::tent();
        let w = law.as_lattice().unwrap();
        let par: i64 = par_reps(seed, count, |_, r| sample_path(w, 0, 50, r).last()).into_iter().sum();
        let mut rev = 0i64;
        for i in (0..count).rev() {
            rev += sample_path(w, 0, 50, &mut derive_substream(seed, i)).last();
        }
        prop_assert_eq!(par, rev);
    }
}
