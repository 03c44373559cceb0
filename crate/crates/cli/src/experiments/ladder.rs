use super::Inputs;
use crate::report::{Findings, Provenance, Table};
use crate::row;
use anyhow::Result;
use avoidwalk_core::ladder::{
    contraction_diagnostics, exit_tail_fit, overshoot_at_infinity, sample_overshoot, sampled_ladder, LadderKind, LadderTable,
    Renewal,
};
use avoidwalk_core::sets::Model;
use avoidwalk_core::walk_core::{fork_seed, StepLaw};

fn pmf_table(tables: &[LadderTable]) -> Table {
    let mut t = Table::new("ladder_pmf", &["kind", "value", "probability"]);
    for lt in tables {
        if let Some((vs, ps)) = lt.pmf() {
            for (v, p) in vs.iter().zip(ps) {
                t.push(row![lt.kind.label(), v, p]);
            }
        }
    }
    t
}

pub fn ladder(inp: &Inputs, f: &mut Findings) -> Result<()> {
    let cfg = inp.cfg;
    let sigma2 = inp.law.variance();
    match &inp.law {
        StepLaw::Lattice(w) => {
            let lam = w.lambda();
            let window = 40 * w.max_step().max(5);
            let y_max = 20usize;
            let r = Renewal::new(&inp.law, window, y_max.max(2))?;
            for lt in &r.tables {
                f.value(format!("E|{}|", lt.kind.label()), lt.mean_abs, Provenance::Oracle);
            }
            let eps = r
                .tables
                .iter()
                .map(|lt| match &lt.dist {
                    avoidwalk_core::ladder::LadderDist::Exact { epsilon, .. } => *epsilon,
                    _ => 0.0,
                })
                .fold(0.0, f64::max);
            f.check("ladder_strip_converged", eps < 1e-9, format!("doubling change {eps:e}"));
            f.tables.push(pmf_table(&r.tables));

            let mut rt = Table::new("renewal", &["y", "U_plus", "U_minus", "U_plus_prime", "U_minus_prime"]);
            for y in 0..=y_max as i64 {
                rt.push(row![
                    y as f64 * lam,
                    r.plus_site(y) * lam,
                    r.minus_site(-y) * lam,
                    r.plus_prime_site(y) * lam,
                    r.minus_prime_site(-y) * lam
                ]);
            }
            f.tables.push(rt);

            let prod = r.weak_strict_product();
            f.value("E_weak_ascending_times_E_abs_descending", prod, Provenance::Oracle);
            f.value("sigma2_over_2", sigma2 / 2.0, Provenance::Oracle);
            let rel = (prod - sigma2 / 2.0).abs() / (sigma2 / 2.0);
            f.check("ladder_product_identity", rel < 1e-6, format!("relative difference {rel:e}"));

            let asc = &r.tables[0];
            let law = overshoot_at_infinity(asc, f64::INFINITY)?;
            let mut ot = Table::new("overshoot", &["value", "limit_probability"]);
            for (v, p) in law.points.iter().zip(&law.weights) {
                ot.push(row![v, p]);
            }
            f.tables.push(ot);
            if let Some(m) = law.size_biased_mass {
                f.value("size_biased_mass", m, Provenance::Oracle);
            }
            f.check("overshoot_law_normalised", (law.total_mass - 1.0).abs() < 1e-9, format!("mass {}", law.total_mass));

            let level = 500.0 * lam;
            let reps = cfg.reps_or(10_000);
            let s = sample_overshoot(&inp.law, level, reps, cfg.cap_or(10_000), cfg.seed);
            let tv = law.tv_to_sample(&s.values);
            f.value("overshoot_tv", tv, Provenance::Mc);
            f.value("overshoot_redrawn", s.redrawn as f64, Provenance::McCapped);
            f.check("overshoot_matches_limit", tv < 0.02, format!("TV {tv:.4} at level {level}, {reps} reps"));
        }
        StepLaw::Continuous(_) => {
            let reps = cfg.reps_or(100_000);
            let cap = cfg.cap_or(100_000);
            let tables: Vec<LadderTable> = LadderKind::ALL
                .iter()
                .enumerate()
                .map(|(i, &k)| sampled_ladder(&inp.law, k, reps, cap, fork_seed(cfg.seed, i as u64)))
                .collect();
            for lt in &tables {
                f.estimate(format!("E|{}|", lt.kind.label()), lt.mean_abs, lt.mean_abs_stderr, Provenance::McCapped);
            }
            let mut t = Table::new("ladder_mean", &["kind", "mean_abs", "stderr"]);
            for lt in &tables {
                t.push(row![lt.kind.label(), lt.mean_abs, lt.mean_abs_stderr]);
            }
            f.tables.push(t);
            // Ascending times descending; weak and strict agree without atoms.
            let (a, d) = (&tables[0], &tables[1]);
            let prod = a.mean_abs * d.mean_abs;
            let se = prod * ((a.mean_abs_stderr / a.mean_abs).powi(2) + (d.mean_abs_stderr / d.mean_abs).powi(2)).sqrt();
            f.estimate("E_ascending_times_E_abs_descending", prod, se, Provenance::McCapped);
            let z = (prod - sigma2 / 2.0).abs() / se;
            f.check("ladder_product_identity", z < 3.0, format!("z = {z:.3} against σ²/2 = {}", sigma2 / 2.0));
        }
    }
    Ok(())
}

pub fn contraction(inp: &Inputs, f: &mut Findings) -> Result<()> {
    let cfg = inp.cfg;
    let model = Model::new(&inp.law, &inp.set)?;
    let unit = match &inp.law {
        StepLaw::Lattice(w) => w.lambda(),
        StepLaw::Continuous(c) => c.variance().sqrt(),
    };
    let (l, r) = model.edges();
    let mut grid = Vec::new();
    for o in [3.0, 5.0, 10.0, 20.0, 50.0, 100.0] {
        grid.push(l - o * unit);
        grid.push(r + o * unit);
    }
    grid.sort_by(f64::total_cmp);
    let rep = contraction_diagnostics(&model, &inp.set.spec_string(), &grid, cfg.reps_or(2000), cfg.cap_or(100_000), cfg.seed)?;
    let mut t = Table::new(
        "contraction",
        &["x", "reps", "censored_first", "survive_first", "jump_over", "jump_over_se", "mean_abs_first", "mean_abs_first_se", "survive_third"],
    );
    for p in &rep.points {
        t.push(row![
            p.x,
            p.reps,
            p.censored_first,
            p.survive_first.0,
            p.jump_over.0,
            p.jump_over.1,
            p.mean_abs_first.0,
            p.mean_abs_first.1,
            p.survive_third.0
        ]);
    }
    f.tables.push(t);
    f.estimate("gamma_hat", rep.gamma.0, rep.gamma.1, Provenance::McCapped);
    f.estimate("gamma3_hat", rep.gamma3.0, rep.gamma3.1, Provenance::McCapped);
    f.value("alpha_hat", rep.lyapunov.slope, Provenance::McCapped);
    f.value("K_hat", rep.lyapunov.intercept, Provenance::McCapped);
    f.check("lyapunov_slope_below_one", rep.lyapunov.slope < 1.0, format!("α̂ = {:.4}", rep.lyapunov.slope));

    if !model.contains(cfg.x) {
        let at = contraction_diagnostics(&model, &inp.set.spec_string(), &[cfg.x], cfg.reps_or(2000), cfg.cap_or(100_000), fork_seed(cfg.seed, 1 << 20))?;
        let p = &at.points[0];
        f.estimate("survive_first_at_x", p.survive_first.0, p.survive_first.1, Provenance::McCapped);
        f.estimate("survive_third_at_x", p.survive_third.0, p.survive_third.1, Provenance::McCapped);
        f.value("censored_third_at_x", p.censored_third as f64, Provenance::McCapped);
    }

    let d = l.abs().max(r.abs()).max(5.0 * unit);
    let ns: Vec<usize> = (1..=10).map(|k| 50 * k).collect();
    let fit = exit_tail_fit(&inp.law, d, 0.0, &ns, 400)?;
    let mut et = Table::new("strip_exit", &["n", "survival"]);
    for (n, s) in fit.ns.iter().zip(&fit.survival) {
        et.push(row![n, s]);
    }
    f.tables.push(et);
    f.value("exit_rate_beta", fit.beta, Provenance::Oracle);
    f.check("strip_exit_geometric", fit.beta > 0.0 && fit.r2 > 0.99, format!("β = {:.5}, R² = {:.6}, d = {d}", fit.beta, fit.r2));
    Ok(())
}
