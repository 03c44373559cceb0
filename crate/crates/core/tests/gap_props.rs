use avoidwalk_core::conditioned::BnRule;
use avoidwalk_core::gap::{gap_statistics, sample_gap_stats};
use avoidwalk_core::stats::quantile;
use avoidwalk_core::walk_core::{derive_substream, sample_path, StepLaw};
use proptest::prelude::*;
use std::collections::HashSet;

fn selection_sorted(xs: &[i64]) -> Vec<i64> {
    let mut v = xs.to_vec();
    for i in 0..v.len() {
        let m = (i..v.len()).min_by_key(|&j| v[j]).unwrap();
        v.swap(i, m);
    }
    v
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(1000) })]

    #[test]
    fn spacings_match_a_quadratic_scan(li in 0usize..3, n in 3usize..1000, bf in 0.0f64..1.0, seed: u64) {
        let law = [StepLaw::tent(), StepLaw::skew(), StepLaw::parse("lattice: -3:1/4, -1:1/4, 2:1/2").unwrap()][li].clone();
        let w = law.as_lattice().unwrap();
        let b = 1 + ((n / 2 - 1) as f64 * bf) as usize;
        let p = sample_path(w, 0, n, &mut derive_substream(seed, 0));
        let s = gap_statistics(&p, 1.0, b).unwrap();
        let v = selection_sorted(&p.positions);
        let (mut g, mut gi, mut ge) = (0, 0, 0);
        for k in 1..n {
            let d = v[k] - v[k - 1];
            g = g.max(d);
            if (b..=n - b).contains(&k) {
                gi = gi.max(d);
            }
            if k <= b || k >= n - b {
                ge = ge.max(d);
            }
        }
        prop_assert_eq!((s.g, s.g_int, s.g_ext), (g as f64, gi as f64, ge as f64));
        prop_assert_eq!(s.g, s.g_int.max(s.g_ext));
        let visited: HashSet<i64> = p.positions.iter().copied().collect();
        let empty = (v[0]..=v[n - 1]).filter(|y| !visited.contains(y)).count() as u64;
        prop_assert_eq!(s.e, Some(empty));
        if visited.len() >= 2 {
            prop_assert!(s.g >= 1.0);
        }
    }
}

#[test]
fn largest_gap_is_tight() {
    let q: Vec<f64> = [1000usize, 10_000, 100_000]
        .iter()
        .map(|&n| {
            let s = sample_gap_stats(&StepLaw::tent(), n, BnRule::default(), 2000, n as u64).unwrap();
            quantile(&s.iter().map(|x| x.g).collect::<Vec<_>>(), 0.99)
        })
        .collect();
    assert!(q.windows(2).all(|p| p[1] <= p[0]), "{q:?}");
}
