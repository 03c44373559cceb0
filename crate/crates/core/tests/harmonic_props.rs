use avoidwalk_core::harmonic::{estimate_v_capped, lemma1_sweep};
use avoidwalk_core::oracle::v_exact;
use avoidwalk_core::sets::{AvoidSet, Model};
use avoidwalk_core::walk_core::StepLaw;
use proptest::prelude::*;

const LAWS: [&str; 4] = ["srw", "tent", "skew", "lattice: -3:1/4, -1:1/4, 2:1/2"];
const SETS: [&str; 4] = [
    "points{0}",
    "points{-1,1}",
    "interval(-2,2,closed)",
    "interval(-3,-1,closed)+interval(1,3,closed)",
];

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(40) })]

    #[test]
    fn v_vanishes_on_b_and_is_positive_outside_the_hull(li in 0usize..4, si in 0usize..4, x in -12i64..12) {
        let law = StepLaw::parse(LAWS[li]).unwrap();
        let set = AvoidSet::parse(SETS[si]).unwrap();
        let model = Model::new(&law, &set).unwrap();
        let v = v_exact(&law, &set, x as f64, 60).unwrap().value;
        if model.contains(x as f64) {
            prop_assert_eq!(v, 0.0);
        } else if !model.in_hull(x as f64) {
            prop_assert!(v > 0.0);
        } else {
            prop_assert!(v >= 0.0);
        }
    }
}

#[test]
fn doubling_the_cap_never_lowers_the_capped_sum() {
    for (i, (law, set, x)) in [
        ("tent", "points{0}", 3.0),
        ("skew", "points{-1,1}", -4.0),
        ("gauss", "interval(-1,1,open)", 2.5),
        ("unif", "interval(-3,-1,closed)+interval(1,3,closed)", 0.0),
    ]
    .into_iter()
    .enumerate()
    {
        let law = StepLaw::parse(law).unwrap();
        let set = AvoidSet::parse(set).unwrap();
        let e = estimate_v_capped(&law, &set, x, 2000, 4000, 60 + i as u64).unwrap();
        let c = e.cap.unwrap();
        assert!(c.value2 >= e.value - 2.0 * e.stderr, "{law}: {} then {}", e.value, c.value2);
        assert!(c.censored_fraction2 <= c.censored_fraction);
    }
}

#[test]
fn scaled_survival_is_bounded_uniformly_in_n() {
    let set = AvoidSet::parse("interval(-3,3,open)").unwrap();
    for law in [StepLaw::srw(), StepLaw::tent()] {
        let s = lemma1_sweep(&law, &set, 3.0, 100.0, &[100, 1000, 10_000]).unwrap();
        assert!(s.max_ratio.iter().all(|&r| r <= 1.0), "{law}: {:?}", s.max_ratio);
        // The sweep maximum rises toward √(2/π)/σ from below, so the 10% proxy
        // against n = 10² is reported, not asserted.
        let proxy = s.max_ratio[2] <= 1.1 * s.max_ratio[0];
        println!(
            "{} {law}: sweep max {:?}, n=1e4 within 10% of n=1e2",
            if proxy { "PASS" } else { "FAIL" },
            s.max_ratio
        );
    }
}
