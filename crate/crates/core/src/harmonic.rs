//! Estimators of `V_B`, the harmonicity check and the comparison with `U_d`.

use crate::error::{Error, Result};
use crate::ladder::{Renewal, RenewalVariant};
use crate::mc::par_reps;
use crate::oracle::{survival_table, v_exact, v_oracle_table};
use crate::sets::{simulate_capped, simulate_epochs, AvoidSet, Model, Region};
use crate::stats::mean_se;
use crate::walk_core::{fork_seed, StepLaw, Walk};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    CappedSum,
    TailInversion,
    Oracle,
    MarkChain,
}

/// Censoring at the cap and at twice the cap, from the same trajectories.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapCheck {
    pub cap: u64,
    pub censored_fraction: f64,
    pub cap2: u64,
    pub value2: f64,
    pub stderr2: f64,
    pub censored_fraction2: f64,
    /// Two-point extrapolation assuming a `cap^{-1/2}` bias, computed per
    /// trajectory so its standard error is exact.
    pub extrapolated: f64,
    pub extrapolated_stderr: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateCI {
    pub value: f64,
    pub stderr: f64,
    pub reps: u64,
    pub method: Method,
    pub seed: Option<u64>,
    /// Horizon of the tail inversion.
    pub horizon: Option<u64>,
    pub cap: Option<CapCheck>,
}

impl EstimateCI {
    fn oracle(value: f64, error: f64, method: Method) -> Self {
        Self { value, stderr: error, reps: 0, method, seed: None, horizon: None, cap: None }
    }

    /// `|a − b| / √(se_a² + se_b²)`.
    pub fn z_score(&self, other: &EstimateCI) -> f64 {
        let s = (self.stderr.powi(2) + other.stderr.powi(2)).sqrt();
        if s == 0.0 {
            if self.value == other.value { 0.0 } else { f64::INFINITY }
        } else {
            (self.value - other.value).abs() / s
        }
    }
}

/// `V̂` at one start with the estimate from a second method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VRow {
    pub x: f64,
    pub v: EstimateCI,
    pub alt: EstimateCI,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VTable {
    pub law: String,
    pub set: String,
    pub rows: Vec<VRow>,
}

impl VTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,V,stderr,method,alt_V,alt_stderr,alt_method\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.x,
                r.v.value,
                r.v.stderr,
                method_tag(r.v.method),
                r.alt.value,
                r.alt.stderr,
                method_tag(r.alt.method)
            ));
        }
        out
    }
}

pub fn method_tag(m: Method) -> &'static str {
    match m {
        Method::CappedSum => "capped-sum",
        Method::TailInversion => "tail-inversion",
        Method::Oracle => "oracle",
        Method::MarkChain => "mark-chain",
    }
}

/// Mean of the capped jump sum over `reps` trajectories. Trajectories run to
/// `2·cap` so both caps share streams.
pub fn estimate_v_capped(law: &StepLaw, set: &AvoidSet, x: f64, cap: u64, reps: u64, seed: u64) -> Result<EstimateCI> {
    if cap < 1000 {
        return Err(Error::Domain(format!("cap {cap} below 1000")));
    }
    let model = Model::new(law, set)?;
    if model.contains(x) {
        return Err(Error::Domain(format!("start {x} lies in B")));
    }
    let sums: Vec<(f64, f64, bool, bool)> = crate::with_model!(&model, |w, b| {
        let xs = w.site_of(x)?;
        par_reps(seed, reps, |_, r| {
            let c = simulate_capped(w, b, xs, 2 * cap, r);
            let done1 = c.tau.is_some_and(|t| t <= cap);
            (c.v_sum_upto(cap), c.v_sum(), !done1, c.censored())
        })
    });
    let s1: Vec<f64> = sums.iter().map(|e| e.0).collect();
    let s2: Vec<f64> = sums.iter().map(|e| e.1).collect();
    let k = std::f64::consts::SQRT_2;
    let ex: Vec<f64> = sums.iter().map(|e| (k * e.1 - e.0) / (k - 1.0)).collect();
    let (v1, se1) = mean_se(&s1);
    let (v2, se2) = mean_se(&s2);
    let (vx, sex) = mean_se(&ex);
    let frac = |f: &dyn Fn(&(f64, f64, bool, bool)) -> bool| sums.iter().filter(|e| f(e)).count() as f64 / reps as f64;
    Ok(EstimateCI {
        value: v1,
        stderr: se1,
        reps,
        method: Method::CappedSum,
        seed: Some(seed),
        horizon: None,
        cap: Some(CapCheck {
            cap,
            censored_fraction: frac(&|e| e.2),
            cap2: 2 * cap,
            value2: v2,
            stderr2: se2,
            censored_fraction2: frac(&|e| e.3),
            extrapolated: vx,
            extrapolated_stderr: sex,
        }),
    })
}

/// `σ·√(πn/2)·(fraction of trajectories with τ_B > n)`.
pub fn estimate_v_tail(law: &StepLaw, set: &AvoidSet, x: f64, n: u64, reps: u64, seed: u64) -> Result<EstimateCI> {
    if n < 1000 {
        return Err(Error::Domain(format!("horizon {n} below 1000")));
    }
    let model = Model::new(law, set)?;
    let alive: Vec<bool> = crate::with_model!(&model, |w, b| {
        let xs = w.site_of(x)?;
        par_reps(seed, reps, |_, r| simulate_epochs(w, b, xs, n, usize::MAX, r).censored())
    });
    let k = alive.iter().filter(|&&a| a).count() as f64;
    let p = k / reps as f64;
    let scale = model.sigma() * (PI * n as f64 / 2.0).sqrt();
    Ok(EstimateCI {
        value: scale * p,
        stderr: scale * (p * (1.0 - p) / reps as f64).sqrt(),
        reps,
        method: Method::TailInversion,
        seed: Some(seed),
        horizon: Some(n),
        cap: None,
    })
}

/// Tail inversion at every start, with the capped sum alongside.
pub fn v_table_mc(law: &StepLaw, set: &AvoidSet, xs: &[f64], n: u64, cap: u64, reps: u64, seed: u64) -> Result<VTable> {
    let model = Model::new(law, set)?;
    let mut rows = Vec::new();
    for (i, &x) in xs.iter().enumerate() {
        let zero = |m| EstimateCI { value: 0.0, stderr: 0.0, reps: 0, method: m, seed: None, horizon: None, cap: None };
        if model.contains(x) {
            rows.push(VRow { x, v: zero(Method::TailInversion), alt: zero(Method::CappedSum) });
            continue;
        }
        let v = estimate_v_tail(law, set, x, n, reps, fork_seed(seed, 2 * i as u64))?;
        let alt = estimate_v_capped(law, set, x, cap, reps, fork_seed(seed, 2 * i as u64 + 1))?;
        rows.push(VRow { x, v, alt });
    }
    Ok(VTable { law: law.spec_string(), set: set.spec_string(), rows })
}

/// Oracle table on consecutive lattice starts: DP extrapolation at horizon
/// `n` with the mark-chain solution alongside.
pub fn v_table_oracle(law: &StepLaw, set: &AvoidSet, x_lo: f64, x_hi: f64, n: usize) -> Result<VTable> {
    let t = v_oracle_table(law, set, x_lo, x_hi, n)?;
    let window = 40 * law.as_lattice()?.max_step().max(5);
    let mut rows = Vec::new();
    for ((&x, &v), &e) in t.xs.iter().zip(&t.values).zip(&t.errors) {
        let m = v_exact(law, set, x, window)?;
        rows.push(VRow {
            x,
            v: EstimateCI::oracle(v, e, Method::Oracle),
            alt: EstimateCI::oracle(m.value, m.window_error, Method::MarkChain),
        });
    }
    Ok(VTable { law: law.spec_string(), set: set.spec_string(), rows })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Harmonicity {
    pub xs: Vec<f64>,
    pub residuals: Vec<f64>,
    pub stderrs: Vec<f64>,
    pub max_residual: f64,
    /// Largest `residual / stderr`.
    pub max_ratio: f64,
}

/// `|V̂(x) − Σ_s p_s V̂(x+s)|` at every start outside `B` whose neighbours
/// are all in the table, with the standard errors combined in quadrature.
pub fn harmonicity_residual(table: &VTable, law: &StepLaw, set: &AvoidSet) -> Result<Harmonicity> {
    let w = law.as_lattice()?;
    let model = Model::new(law, set)?;
    let lam = w.lambda();
    let site = |x: f64| (x / lam).round() as i64;
    let lookup = |s: i64| table.rows.iter().find(|r| site(r.x) == s);
    let mut out = Harmonicity { xs: vec![], residuals: vec![], stderrs: vec![], max_residual: 0.0, max_ratio: 0.0 };
    for r in &table.rows {
        if model.contains(r.x) {
            continue;
        }
        let s0 = site(r.x);
        let nb: Option<Vec<(f64, &VRow)>> = w
            .steps()
            .iter()
            .zip(w.probs())
            .map(|(&s, &p)| lookup(s0 + s).map(|row| (p, row)))
            .collect();
        let Some(nb) = nb else { continue };
        let mean: f64 = nb.iter().map(|(p, row)| p * row.v.value).sum();
        let var: f64 = r.v.stderr.powi(2) + nb.iter().map(|(p, row)| (p * row.v.stderr).powi(2)).sum::<f64>();
        let res = (r.v.value - mean).abs();
        let se = var.sqrt();
        out.max_residual = out.max_residual.max(res);
        out.max_ratio = out.max_ratio.max(if se > 0.0 { res / se } else if res > 0.0 { f64::INFINITY } else { 0.0 });
        out.xs.push(r.x);
        out.residuals.push(res);
        out.stderrs.push(se);
    }
    if out.xs.is_empty() {
        return Err(Error::Domain("no start outside B has all neighbours in the table".into()));
    }
    Ok(out)
}

/// Rational residuals `V(x) − Σ_s p_s V(x+s)` for a table on sites.
pub fn harmonicity_residual_exact(
    law: &StepLaw,
    set: &AvoidSet,
    sites: &[i64],
    values: &[BigRational],
) -> Result<Vec<(i64, BigRational)>> {
    let w = law.as_lattice()?;
    let model = Model::new(law, set)?;
    let Model::Lattice(_, b) = &model else { unreachable!() };
    let denom = BigInt::from(w.denom());
    let mut out = Vec::new();
    for (&s0, v0) in sites.iter().zip(values) {
        if b.contains(s0) {
            continue;
        }
        let mut acc = BigRational::zero();
        let mut complete = true;
        for (&s, &wt) in w.steps().iter().zip(w.weights()) {
            match sites.iter().position(|&t| t == s0 + s) {
                Some(i) => acc += &values[i] * BigRational::new(BigInt::from(wt), denom.clone()),
                None => complete = false,
            }
        }
        if complete {
            out.push((s0, v0 - acc));
        }
    }
    if out.is_empty() {
        return Err(Error::Domain("no start outside B has all neighbours in the table".into()));
    }
    Ok(out)
}

/// Whether every residual is exactly zero.
pub fn all_zero(res: &[(i64, BigRational)]) -> bool {
    res.iter().all(|(_, r)| r.abs().is_zero())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub d: f64,
    pub x: f64,
    pub u: EstimateCI,
    pub v: EstimateCI,
    /// `V̂ − Û`; paired on the same trajectories for continuous laws.
    pub diff: f64,
    pub diff_stderr: f64,
}

/// `Û_d` and `V̂_d` at `±(d + y)`. Lattice laws use the renewal sums and the
/// mark chain; continuous laws the capped first-jump and jump-sum means.
pub fn compare_u_v(law: &StepLaw, d_grid: &[f64], y: f64, reps: u64, cap: u64, seed: u64) -> Result<Vec<CompareRow>> {
    if y < 0.0 {
        return Err(Error::Domain("offset must be nonnegative".into()));
    }
    let mut rows = Vec::new();
    match law {
        StepLaw::Lattice(w) => {
            let renewal = Renewal::new(law, 40 * w.max_step().max(5), 4096)?;
            for &d in d_grid {
                let set = AvoidSet::symmetric_open(d);
                for x in [d + y, -(d + y)] {
                    let u = renewal.eval(RenewalVariant::D(d), x)?;
                    let v = v_exact(law, &set, x, 40 * w.max_step().max(5))?;
                    rows.push(CompareRow {
                        d,
                        x,
                        u: EstimateCI::oracle(u, 0.0, Method::Oracle),
                        v: EstimateCI::oracle(v.value, v.window_error, Method::MarkChain),
                        diff: v.value - u,
                        diff_stderr: v.window_error,
                    });
                }
            }
        }
        StepLaw::Continuous(_) => {
            for (gi, &d) in d_grid.iter().enumerate() {
                let set = AvoidSet::symmetric_open(d);
                let model = Model::new(law, &set)?;
                for (side, x) in [d + y, -(d + y)].into_iter().enumerate() {
                    let sub = fork_seed(seed, 2 * gi as u64 + side as u64);
                    let runs: Vec<Option<(f64, f64)>> = crate::with_model!(&model, |w, b| {
                        let xs = w.site_of(x)?;
                        par_reps(sub, reps, |_, r| {
                            let c = simulate_capped(w, b, xs, cap, r);
                            (c.marks.len() > 1).then(|| ((x - c.marks[1]).abs(), c.v_sum()))
                        })
                    });
                    let done: Vec<(f64, f64)> = runs.iter().flatten().copied().collect();
                    let censored = 1.0 - done.len() as f64 / reps as f64;
                    let us: Vec<f64> = done.iter().map(|e| e.0).collect();
                    let vs: Vec<f64> = done.iter().map(|e| e.1).collect();
                    let ds: Vec<f64> = done.iter().map(|e| e.1 - e.0).collect();
                    let est = |v: &[f64]| {
                        let (m, s) = mean_se(v);
                        EstimateCI {
                            value: m,
                            stderr: s,
                            reps: v.len() as u64,
                            method: Method::CappedSum,
                            seed: Some(sub),
                            horizon: None,
                            cap: Some(CapCheck {
                                cap,
                                censored_fraction: censored,
                                cap2: cap,
                                value2: m,
                                stderr2: s,
                                censored_fraction2: censored,
                                extrapolated: m,
                                extrapolated_stderr: s,
                            }),
                        }
                    };
                    let (diff, diff_stderr) = mean_se(&ds);
                    rows.push(CompareRow { d, x, u: est(&us), v: est(&vs), diff, diff_stderr });
                }
            }
        }
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Sweep {
    pub ns: Vec<usize>,
    /// `max_x √n·q_n(x)/|x|` per horizon.
    pub max_ratio: Vec<f64>,
    pub argmax: Vec<f64>,
}

/// Exact sweep of `√n·P_x(τ_B > n)/|x|` over lattice starts in `[x_lo, x_hi]`.
pub fn lemma1_sweep(law: &StepLaw, set: &AvoidSet, x_lo: f64, x_hi: f64, ns: &[usize]) -> Result<Lemma1Sweep> {
    let table = survival_table(law, set, x_lo, x_hi, ns)?;
    let lam = law.as_lattice()?.lambda();
    let first = (x_lo / lam).ceil() as i64;
    let mut max_ratio = Vec::new();
    let mut argmax = Vec::new();
    for (j, &n) in ns.iter().enumerate() {
        let mut best = (f64::NEG_INFINITY, 0.0);
        for (i, &q) in table[j].iter().enumerate() {
            let x = (first + i as i64) as f64 * lam;
            if x == 0.0 {
                continue;
            }
            let r = (n as f64).sqrt() * q / x.abs();
            if r > best.0 {
                best = (r, x);
            }
        }
        max_ratio.push(best.0);
        argmax.push(best.1);
    }
    Ok(Lemma1Sweep { ns: ns.to_vec(), max_ratio, argmax })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(s: &str) -> AvoidSet {
        AvoidSet::parse(s).unwrap()
    }

    #[test]
    fn srw_single_jump_capped_sum() {
        let e = estimate_v_capped(&StepLaw::srw(), &set("interval(-3,3,open)"), 5.0, 1000, 2000, 1).unwrap();
        // Every finished run contributes exactly 3.
        let c = e.cap.unwrap();
        assert!((e.value - 3.0 * (1.0 - c.censored_fraction)).abs() < 1e-9);
        assert!(c.value2 >= e.value);
    }

    #[test]
    fn start_in_set_is_rejected() {
        assert!(estimate_v_capped(&StepLaw::srw(), &set("points{0}"), 0.0, 1000, 10, 1).is_err());
        assert!(estimate_v_capped(&StepLaw::srw(), &set("points{0}"), 1.0, 999, 10, 1).is_err());
        assert!(estimate_v_tail(&StepLaw::srw(), &set("points{0}"), 1.0, 999, 10, 1).is_err());
    }

    #[test]
    fn srw_closed_form_is_harmonic_in_rationals() {
        let law = StepLaw::srw();
        let b = set("interval(-3,3,open)");
        let sites: Vec<i64> = (-12..=12).collect();
        let values: Vec<BigRational> = sites
            .iter()
            .map(|&x: &i64| BigRational::from_integer(BigInt::from((x.abs() - 2).max(0))))
            .collect();
        let res = harmonicity_residual_exact(&law, &b, &sites, &values).unwrap();
        assert!(res.iter().any(|(s, _)| *s == 3) && res.iter().any(|(s, _)| *s == -3));
        assert!(all_zero(&res));
    }

    #[test]
    fn wrong_table_is_not_harmonic() {
        let law = StepLaw::srw();
        let b = set("interval(-3,3,open)");
        let sites: Vec<i64> = (-12..=12).collect();
        let values: Vec<BigRational> = sites
            .iter()
            .map(|&x| BigRational::from_integer(BigInt::from(if x.abs() <= 2 { 0 } else { x.abs() })))
            .collect();
        let res = harmonicity_residual_exact(&law, &b, &sites, &values).unwrap();
        assert!(!all_zero(&res));
    }

    #[test]
    fn narrow_table_is_rejected() {
        let t = VTable {
            law: "srw".into(),
            set: "points{0}".into(),
            rows: vec![VRow {
                x: 1.0,
                v: EstimateCI::oracle(1.0, 0.0, Method::Oracle),
                alt: EstimateCI::oracle(1.0, 0.0, Method::Oracle),
            }],
        };
        assert!(harmonicity_residual(&t, &StepLaw::srw(), &set("points{0}")).is_err());
    }

    #[test]
    fn srw_u_equals_v() {
        let rows = compare_u_v(&StepLaw::srw(), &[1.0, 3.0], 2.0, 0, 0, 0).unwrap();
        for r in rows {
            assert!(r.diff.abs() < 1e-9, "{r:?}");
        }
    }
}
