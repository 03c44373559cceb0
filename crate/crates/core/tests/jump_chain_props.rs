use avoidwalk_core::sets::{jump_decompose, AvoidSet, LatticeSet, Model, Region, HULL, MINUS, PLUS, SET};
use avoidwalk_core::walk_core::{derive_substream, sample_path, LatticeLaw, Path, StepLaw};
use proptest::prelude::*;

fn lattice(law: &StepLaw, set: &str) -> (LatticeLaw, LatticeSet) {
    match Model::new(law, &AvoidSet::parse(set).unwrap()).unwrap() {
        Model::Lattice(w, b) => (w, b),
        _ => unreachable!(),
    }
}

fn law_by_index(i: usize) -> StepLaw {
    [StepLaw::srw(), StepLaw::tent(), StepLaw::skew(), StepLaw::parse("lattice: -3:1/4, -1:1/4, 2:1/2").unwrap()][i].clone()
}

/// Crossing times of `(−d, d)` read straight off the definition: from the
/// right side wait for the first position below `d`, from the left side for
/// the first position above `−d`, and stop inside the interval.
fn two_sided_crossings(path: &Path<i64>, d: i64) -> (Vec<u64>, Option<u64>) {
    let mut epochs = vec![0];
    let mut side = path.x0.signum();
    for (i, &s) in path.positions.iter().enumerate() {
        let k = i as u64 + 1;
        let crossed = if side > 0 { s < d } else { s > -d };
        if crossed {
            epochs.push(k);
            if s.abs() < d {
                return (epochs, Some(k));
            }
            side = s.signum();
        }
    }
    (epochs, None)
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(400) })]

    #[test]
    fn symmetric_interval_matches_two_sided_definition(
        li in 0usize..4, d in 1i64..6, off in 0i64..25, neg: bool, seed: u64,
    ) {
        let law = law_by_index(li);
        let (w, b) = lattice(&law, &format!("interval({},{},open)", -d, d));
        let x0 = if neg { -(d + off) } else { d + off };
        let path = sample_path(&w, x0, 3000, &mut derive_substream(seed, 0));
        let chain = jump_decompose(&w, &b, &path);
        let (epochs, tau) = two_sided_crossings(&path, d);
        prop_assert_eq!(chain.epochs, epochs);
        prop_assert_eq!(chain.tau, tau);
    }

    #[test]
    fn tau_is_the_first_index_in_b(
        li in 0usize..4, set in prop::sample::select(vec![
            "points{0}", "points{-1,1}", "interval(-3,-1,closed)+interval(1,3,closed)", "points{-4,0,5}",
        ]),
        x0 in -20i64..20, seed: u64,
    ) {
        let law = law_by_index(li);
        let (w, b) = lattice(&law, set);
        let path = sample_path(&w, x0, 2000, &mut derive_substream(seed, 1));
        let naive = path.iter_with_start().position(|s| b.contains(s)).map(|k| k as u64);
        prop_assert_eq!(jump_decompose(&w, &b, &path).tau, naive);
    }

    #[test]
    fn marks_alternate_legally(
        li in 0usize..4, set in prop::sample::select(vec![
            "points{-1,1}", "interval(-3,-1,closed)+interval(1,3,closed)", "points{-4,0,5}",
        ]),
        x0 in -20i64..20, seed: u64,
    ) {
        let law = law_by_index(li);
        let (w, b) = lattice(&law, set);
        let path = sample_path(&w, x0, 2000, &mut derive_substream(seed, 2));
        let chain = jump_decompose(&w, &b, &path);
        for k in 1..chain.epochs.len() {
            let (t0, t1) = (chain.epochs[k - 1] as usize, chain.epochs[k] as usize);
            let zone = b.zone(path.at(t0));
            for j in t0 + 1..t1 {
                let z = b.zone(path.at(j));
                if zone & PLUS != 0 {
                    prop_assert!(z & PLUS != 0);
                } else if zone & MINUS != 0 {
                    prop_assert!(z & MINUS != 0);
                } else {
                    prop_assert!(zone & HULL != 0 && z & HULL != 0 && z & SET == 0);
                }
            }
        }
    }
}
