use avoidwalk_core::ladder::{exit_tail_fit, sampled_ladder, LadderKind, Renewal, RenewalVariant};
use avoidwalk_core::mc::par_reps;
use avoidwalk_core::stats::mean_se;
use avoidwalk_core::walk_core::{StepLaw, Walk};
use proptest::prelude::*;
use std::sync::OnceLock;

fn renewals() -> &'static [Renewal] {
    static R: OnceLock<Vec<Renewal>> = OnceLock::new();
    R.get_or_init(|| {
        ["srw", "tent", "skew", "lattice: -3:1/4, -1:1/4, 2:1/2"]
            .iter()
            .map(|s| Renewal::new(&StepLaw::parse(s).unwrap(), 200, 512).unwrap())
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(300) })]

    #[test]
    fn renewal_functions_are_monotone(i in 0usize..4, y in 0i64..2000) {
        let u = &renewals()[i];
        let lam = u.lambda();
        let (a, b) = (y as f64 * lam, (y + 1) as f64 * lam);
        let up = |v, t| u.eval(v, t).unwrap();
        prop_assert!(up(RenewalVariant::Plus, b) >= up(RenewalVariant::Plus, a));
        prop_assert!(up(RenewalVariant::PlusPrime, b) >= up(RenewalVariant::PlusPrime, a));
        prop_assert!(up(RenewalVariant::Minus, -b) >= up(RenewalVariant::Minus, -a));
        prop_assert!(up(RenewalVariant::MinusPrime, -b) >= up(RenewalVariant::MinusPrime, -a));
        prop_assert!(up(RenewalVariant::D(2.0 * lam), b + 2.0 * lam) >= up(RenewalVariant::D(2.0 * lam), a + 2.0 * lam));
    }
}

#[test]
fn renewal_sum_matches_wald_identity() {
    let law = StepLaw::tent();
    let w = law.as_lattice().unwrap();
    let u = Renewal::new(&law, 200, 512).unwrap();
    let cap = 100_000u64;
    for y in 0..=10i64 {
        let runs = par_reps(500 + y as u64, 5000, |_, r| {
            let mut s = y;
            for _ in 0..cap {
                s += w.increment(r);
                if s < 0 {
                    return Some(s as f64);
                }
            }
            None
        });
        let under: Vec<f64> = runs.iter().flatten().map(|h| y as f64 - h).collect();
        let (m, se) = mean_se(&under);
        let exact = u.eval(RenewalVariant::Plus, y as f64).unwrap();
        assert!((m - exact).abs() < 3.0 * se, "y={y}: {m} ± {se} vs {exact}");
    }
}

#[test]
fn continuous_ladder_means_multiply_to_half_variance() {
    for (i, law) in [StepLaw::gauss(), StepLaw::unif()].into_iter().enumerate() {
        let seed = 900 + 2 * i as u64;
        let up = sampled_ladder(&law, LadderKind::WeakAscending, 100_000, 100_000, seed);
        let down = sampled_ladder(&law, LadderKind::StrictDescending, 100_000, 100_000, seed + 1);
        let (a, sa) = (up.mean_abs, up.mean_abs_stderr);
        let (b, sb) = (down.mean_abs, down.mean_abs_stderr);
        let se = ((a * sb).powi(2) + (b * sa).powi(2)).sqrt();
        let target = law.variance() / 2.0;
        assert!((a * b - target).abs() < 3.0 * se, "{law}: {} ± {se} vs {target}", a * b);
    }
}

#[test]
fn strip_exit_is_exponential() {
    let ns: Vec<usize> = (1..=10).map(|k| 50 * k).collect();
    let fit = exit_tail_fit(&StepLaw::srw(), 5.0, 0.0, &ns, 0).unwrap();
    assert!(fit.beta > 0.0);
    assert!(fit.r2 > 0.99);
}
