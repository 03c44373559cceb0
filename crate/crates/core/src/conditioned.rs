//! Walks conditioned to avoid `B` up to time `n`, and the h-transformed
//! chains that appear in the limit.

use crate::error::{Error, Result};
use crate::ladder::Renewal;
use crate::mc::{par_range, par_reps};
use crate::oracle::half_line_survival;
use crate::sets::{simulate_capped, simulate_observed, AvoidSet, JumpChain, Model};
use crate::stats::{ks_one_sample, mean_se, normal_cdf, proportion};
use crate::walk_core::{LatticeLaw, Path, RngStream, StepLaw, Walk};
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{self, Read, Write};

/// One trajectory that survived `n` steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcceptedPath {
    pub index: u64,
    pub chain: JumpChain,
    /// `S_{⌊n/4⌋}`, `S_{⌊n/2⌋}`, `S_n`, real units.
    pub quarter: f64,
    pub half: f64,
    pub end: f64,
    /// `S_0, ..., S_n` when requested.
    pub positions: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionedSample {
    pub law: String,
    pub set: String,
    pub x: f64,
    pub n: u64,
    pub sigma: f64,
    /// Lattice span, absent for continuous laws.
    pub lambda: Option<f64>,
    pub attempts: u64,
    pub accepted: Vec<AcceptedPath>,
    /// Set when `max_attempts` ran out before the target.
    pub partial: bool,
    pub seed: u64,
}

impl ConditionedSample {
    /// Acceptance fraction and its binomial standard error.
    pub fn acceptance(&self) -> (f64, f64) {
        proportion(self.accepted.len() as u64, self.attempts)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerSpec {
    pub n: u64,
    pub target: u64,
    pub max_attempts: u64,
    pub store_paths: bool,
    pub seed: u64,
}

/// Rejection sampling of `{τ_B > n}`. Attempt `i` always uses substream `i`
/// and accepted paths are kept in attempt order, so the sample does not
/// depend on the number of workers. Expected attempts per acceptance are
/// `1/q_n(x)`, of order `√n`.
pub fn sample_conditioned(law: &StepLaw, set: &AvoidSet, x: f64, spec: SamplerSpec) -> Result<ConditionedSample> {
    if spec.n < 100 {
        return Err(Error::Domain(format!("horizon {} below 100", spec.n)));
    }
    let model = Model::new(law, set)?;
    let (q, h, n) = (spec.n / 4, spec.n / 2, spec.n);
    let mut accepted = Vec::new();
    let mut next = 0u64;
    let mut batch = 1024u64;
    let mut attempts = 0u64;
    while (accepted.len() as u64) < spec.target && next < spec.max_attempts {
        let end = (next + batch).min(spec.max_attempts);
        let found: Vec<Option<AcceptedPath>> = crate::with_model!(&model, |w, b| {
            let xs = w.site_of(x)?;
            par_range(spec.seed, next, end, |i, r| attempt(w, b, xs, i, n, q, h, spec.store_paths, r))
        });
        for (i, f) in (next..end).zip(found) {
            attempts = i + 1;
            if let Some(a) = f {
                accepted.push(a);
                if accepted.len() as u64 == spec.target {
                    break;
                }
            }
        }
        next = end;
        let rate = (accepted.len().max(1) as f64) / next as f64;
        let want = (spec.target - accepted.len() as u64) as f64 / rate;
        batch = (1.2 * want).clamp(1024.0, 1e7) as u64;
    }
    if accepted.is_empty() {
        return Err(Error::NoAcceptance { attempts, rate_bound: 3.0 / attempts.max(1) as f64 });
    }
    Ok(ConditionedSample {
        law: law.spec_string(),
        set: set.spec_string(),
        x,
        n,
        sigma: model.sigma(),
        lambda: law.lambda(),
        attempts,
        partial: (accepted.len() as u64) < spec.target,
        accepted,
        seed: spec.seed,
    })
}

#[allow(clippy::too_many_arguments)]
fn attempt<W: Walk, B: crate::sets::Region<W::Site>>(
    w: &W,
    b: &B,
    xs: W::Site,
    index: u64,
    n: u64,
    q: u64,
    h: u64,
    store: bool,
    rng: &mut RngStream,
) -> Option<AcceptedPath> {
    let (mut sq, mut sh, mut last) = (xs, xs, xs);
    let mut positions = store.then(|| {
        let mut v = Vec::with_capacity(n as usize + 1);
        v.push(w.real(xs));
        v
    });
    let chain = simulate_observed(w, b, xs, n, usize::MAX, rng, |k, s| {
        if k == q {
            sq = s;
        }
        if k == h {
            sh = s;
        }
        last = s;
        if let Some(p) = positions.as_mut() {
            p.push(w.real(s));
        }
    });
    // Censored at the horizon means τ_B > n.
    chain.censored().then(|| AcceptedPath {
        index,
        end: w.real(last),
        quarter: w.real(sq),
        half: w.real(sh),
        chain,
        positions,
    })
}

/// Density of the Brownian meander at time `t ∈ (0, 1]`.
pub fn meander_density(t: f64, y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    let g = y / t.powf(1.5) * (-y * y / (2.0 * t)).exp();
    if t >= 1.0 {
        g
    } else {
        g * (2.0 * normal_cdf(y / (1.0 - t).sqrt()) - 1.0)
    }
}

/// `P(W₊(t) ≤ u)` by composite Simpson integration; closed form at `t = 1`.
pub fn meander_cdf(t: f64, u: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0 - (-u * u / 2.0).exp();
    }
    let m = 400;
    let hstep = u / m as f64;
    let mut s = meander_density(t, 0.0) + meander_density(t, u);
    for i in 1..m {
        let y = i as f64 * hstep;
        s += meander_density(t, y) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    (s * hstep / 3.0).min(1.0)
}

/// Reference for the jump-count cells: `E_x term_i / V_B(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NuReference {
    pub cells: Vec<(f64, f64)>,
    pub v: f64,
    pub reps: u64,
    pub cap: u64,
    pub censored_fraction: f64,
    /// The same cells at twice the cap.
    pub cells_2cap: Vec<(f64, f64)>,
}

/// Capped Monte Carlo of `E_x|H'_i − H'_{i−1}|·1{κ' ≥ i, H'_{i−1} ∉ Conv(B)} / V`
/// for `i = 1..=cells`.
pub fn nu_reference(law: &StepLaw, set: &AvoidSet, x: f64, v: f64, cells: usize, reps: u64, cap: u64, seed: u64) -> Result<NuReference> {
    let model = Model::new(law, set)?;
    let terms: Vec<(Vec<f64>, Vec<f64>, bool)> = crate::with_model!(&model, |w, b| {
        let xs = w.site_of(x)?;
        par_reps(seed, reps, |_, r| {
            let c = simulate_capped(w, b, xs, 2 * cap, r);
            let upto = |t: u64| (1..=cells).map(|i| if c.epochs.get(i).is_some_and(|&e| e <= t) { c.term(i) } else { 0.0 }).collect::<Vec<_>>();
            (upto(cap), upto(2 * cap), c.tau.is_none_or(|t| t > cap))
        })
    });
    let col = |i: usize, wide: bool| -> (f64, f64) {
        let v_i: Vec<f64> = terms.iter().map(|t| (if wide { t.1[i] } else { t.0[i] }) / v).collect();
        mean_se(&v_i)
    };
    Ok(NuReference {
        cells: (0..cells).map(|i| col(i, false)).collect(),
        cells_2cap: (0..cells).map(|i| col(i, true)).collect(),
        v,
        reps,
        cap,
        censored_fraction: terms.iter().filter(|t| t.2).count() as f64 / reps as f64,
    })
}

/// Rule for the early-last-jump window `b_n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum BnRule {
    /// `⌊n^p⌋`.
    Power { p: f64 },
    Fixed { b: u64 },
}

impl Default for BnRule {
    fn default() -> Self {
        BnRule::Power { p: 1.0 / 3.0 }
    }
}

impl BnRule {
    pub fn at(&self, n: u64) -> u64 {
        match *self {
            BnRule::Power { p } => ((n as f64).powf(p) + 1e-9).floor() as u64,
            BnRule::Fixed { b } => b,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NuCell {
    pub i: usize,
    pub empirical: (f64, f64),
    pub reference: (f64, f64),
    pub z: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem3Report {
    pub accepted: u64,
    pub acceptance: (f64, f64),
    pub positive: u64,
    pub negative: u64,
    /// Endpoints exactly at 0, left out of `ρ̂`.
    pub zero: u64,
    pub rho_hat: (f64, f64),
    /// `½ + (x − E_x S_τ)/(2 V_B(x))`.
    pub rho_formula: f64,
    pub rho_z: f64,
    pub nu_cells: Vec<NuCell>,
    pub b_n: u64,
    pub early_last_jump: (f64, f64),
    /// KS distance of `|S_{⌊tn⌋}|/(σ√n)` to the meander marginal at
    /// `t = ¼, ½, 1`.
    pub ks_quarter: f64,
    pub ks_half: f64,
    pub ks_end: f64,
}

pub fn theorem3_checks(
    sample: &ConditionedSample,
    v: f64,
    mean_hit: f64,
    reference: Option<&NuReference>,
    b_rule: BnRule,
) -> Result<Theorem3Report> {
    let acc = &sample.accepted;
    if acc.is_empty() {
        return Err(Error::Domain("empty conditioned sample".into()));
    }
    let m = acc.len() as u64;
    let positive = acc.iter().filter(|a| a.end > 0.0).count() as u64;
    let negative = acc.iter().filter(|a| a.end < 0.0).count() as u64;
    let zero = m - positive - negative;
    let rho_hat = proportion(positive, positive + negative);
    let rho_formula = 0.5 + (sample.x - mean_hit) / (2.0 * v);
    let rho_z = z_of(rho_hat.0 - rho_formula, rho_hat.1);
    let mut nu_cells = Vec::new();
    if let Some(r) = reference {
        for (i, &(rv, rs)) in r.cells.iter().enumerate() {
            let k = acc.iter().filter(|a| a.chain.nu(sample.n) == i).count() as u64;
            let e = proportion(k, m);
            nu_cells.push(NuCell {
                i: i + 1,
                empirical: e,
                reference: (rv, rs),
                z: z_of(e.0 - rv, (e.1.powi(2) + rs.powi(2)).sqrt()),
            });
        }
    }
    let b_n = b_rule.at(sample.n);
    let early = acc.iter().filter(|a| a.chain.last_epoch_by(sample.n) <= b_n).count() as u64;
    let scale = sample.sigma * (sample.n as f64).sqrt();
    let col = |f: &dyn Fn(&AcceptedPath) -> f64| acc.iter().map(|a| f(a).abs() / scale).collect::<Vec<f64>>();
    let tq = (sample.n / 4) as f64 / sample.n as f64;
    let th = (sample.n / 2) as f64 / sample.n as f64;
    Ok(Theorem3Report {
        accepted: m,
        acceptance: sample.acceptance(),
        positive,
        negative,
        zero,
        rho_hat,
        rho_formula,
        rho_z,
        nu_cells,
        b_n,
        early_last_jump: proportion(early, m),
        ks_quarter: ks_one_sample(&col(&|a| a.quarter), |u| meander_cdf(tq, u)),
        ks_half: ks_one_sample(&col(&|a| a.half), |u| meander_cdf(th, u)),
        ks_end: ks_one_sample(&col(&|a| a.end), |u| meander_cdf(1.0, u)),
    })
}

fn z_of(diff: f64, se: f64) -> f64 {
    if se > 0.0 {
        diff.abs() / se
    } else if diff.abs() < 1e-9 {
        0.0
    } else {
        f64::INFINITY
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    /// `S^≥`, harmonic function `U₊`, domain `[0, ∞)`.
    NonNegative,
    /// `S^<`, harmonic function `U'₋`, domain `(−∞, 0)`; may start at 0.
    Negative,
}

/// Doob h-transform of a lattice walk on a half-line, in site units.
#[derive(Clone, Debug)]
pub struct HChain<'a> {
    law: &'a LatticeLaw,
    renewal: &'a Renewal,
    pub side: Side,
    pub state: i64,
    pub max_defect: f64,
}

/// Tolerance on the row sums of the h-kernel.
pub const KERNEL_TOL: f64 = 1e-9;

impl<'a> HChain<'a> {
    pub fn new(law: &'a LatticeLaw, renewal: &'a Renewal, side: Side, state: i64) -> Result<Self> {
        let ok = match side {
            Side::NonNegative => state >= 0,
            Side::Negative => state <= 0,
        };
        if !ok {
            return Err(Error::Domain(format!("state {state} outside the {side:?} half-line")));
        }
        Ok(Self { law, renewal, side, state, max_defect: 0.0 })
    }

    fn h(&self, y: i64) -> f64 {
        match self.side {
            Side::NonNegative if y >= 0 => self.renewal.plus_site(y),
            Side::Negative if y < 0 => self.renewal.minus_prime_site(y),
            _ => 0.0,
        }
    }

    /// `(y, p(x → y))` over the support, after checking the row sum.
    pub fn row(&mut self) -> Result<Vec<(i64, f64)>> {
        let hx = match self.side {
            Side::Negative if self.state == 0 => self.renewal.minus_prime_site(0),
            _ => self.h(self.state),
        };
        let row: Vec<(i64, f64)> = self
            .law
            .steps()
            .iter()
            .zip(self.law.probs())
            .map(|(&s, &p)| (self.state + s, p * self.h(self.state + s) / hx))
            .collect();
        let sum: f64 = row.iter().map(|e| e.1).sum();
        let defect = (sum - 1.0).abs();
        self.max_defect = self.max_defect.max(defect);
        if defect > KERNEL_TOL {
            return Err(Error::Normalization { state: self.state, sum });
        }
        Ok(row)
    }

    pub fn step<R: RngCore + ?Sized>(&mut self, rng: &mut R) -> Result<i64> {
        let row = self.row()?;
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut next = row.last().unwrap().0;
        for &(y, p) in &row {
            acc += p;
            if u < acc {
                next = y;
                break;
            }
        }
        self.state = next;
        Ok(next)
    }
}

/// Exact law of `(S_1, ..., S_k)` for the h-chain from `x0`, site units.
pub fn h_chain_law(law: &LatticeLaw, renewal: &Renewal, side: Side, x0: i64, k: usize) -> Result<BTreeMap<Vec<i64>, f64>> {
    let mut out = BTreeMap::new();
    out.insert(Vec::new(), 1.0);
    for _ in 0..k {
        let mut next = BTreeMap::new();
        for (path, p) in out {
            let at = path.last().copied().unwrap_or(x0);
            let mut c = HChain::new(law, renewal, side, at)?;
            for (y, q) in c.row()? {
                if q > 0.0 {
                    let mut np = path.clone();
                    np.push(y);
                    *next.entry(np).or_insert(0.0) += p * q;
                }
            }
        }
        out = next;
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoobRow {
    pub n: u64,
    pub accepted: u64,
    pub attempts: u64,
    /// TV between the rejection sample and the h-chain law.
    pub tv: f64,
    /// TV between the exact finite-`n` conditioned law and the h-chain law.
    pub tv_exact: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoobReport {
    pub law: String,
    pub k: usize,
    pub rows: Vec<DoobRow>,
    /// Largest row-sum defect of the h-kernel over every visited state.
    pub max_kernel_defect: f64,
}

/// Compares `(S_1..S_k)` under `P_0(· | S_j ≥ 0, j ≤ n)` with the `S^≥`
/// chain from 0, for each `n`.
pub fn doob_limit_check(law: &StepLaw, k: usize, ns: &[u64], accepted: u64, seed: u64) -> Result<DoobReport> {
    if k > 5 {
        return Err(Error::Domain(format!("k = {k} exceeds 5")));
    }
    let w = law.as_lattice()?;
    let renewal = Renewal::new(law, 40 * w.max_step().max(5), 4096)?;
    let exact = h_chain_law(w, &renewal, Side::NonNegative, 0, k)?;
    let mut max_defect: f64 = 0.0;
    for path in exact.keys() {
        for &s in path.iter().take(k.saturating_sub(1)) {
            let mut c = HChain::new(w, &renewal, Side::NonNegative, s)?;
            c.row()?;
            max_defect = max_defect.max(c.max_defect);
        }
    }
    let mut c0 = HChain::new(w, &renewal, Side::NonNegative, 0)?;
    c0.row()?;
    max_defect = max_defect.max(c0.max_defect);
    let mut rows = Vec::new();
    for (j, &n) in ns.iter().enumerate() {
        let sub = crate::walk_core::fork_seed(seed, j as u64);
        let (counts, attempts) = half_line_rejection(w, k, n, accepted, sub);
        let total: u64 = counts.values().sum();
        let tv = tv_counts(&exact, &counts, total);
        let tv_exact = if n as usize <= crate::oracle::DP_LIMIT && n as usize >= k {
            Some(exact_conditioned_tv(w, &exact, k, n as usize)?)
        } else {
            None
        };
        rows.push(DoobRow { n, accepted: total, attempts, tv, tv_exact });
    }
    Ok(DoobReport { law: law.spec_string(), k, rows, max_kernel_defect: max_defect })
}

fn tv_counts(exact: &BTreeMap<Vec<i64>, f64>, counts: &BTreeMap<Vec<i64>, u64>, total: u64) -> f64 {
    let mut tv = 0.0;
    for (p, &q) in exact {
        let e = counts.get(p).copied().unwrap_or(0) as f64 / total.max(1) as f64;
        tv += (q - e).abs();
    }
    for (p, &c) in counts {
        if !exact.contains_key(p) {
            tv += c as f64 / total.max(1) as f64;
        }
    }
    tv / 2.0
}

/// Rejection sampling of `(S_1..S_k)` given `S_j ≥ 0` for `j ≤ n`, in
/// batches of attempts with fixed substreams.
fn half_line_rejection(w: &LatticeLaw, k: usize, n: u64, target: u64, seed: u64) -> (BTreeMap<Vec<i64>, u64>, u64) {
    let mut counts = BTreeMap::new();
    let mut got = 0;
    let mut next = 0u64;
    let mut batch = 4096u64;
    while got < target {
        let found = par_range(seed, next, next + batch, |_, r| {
            let mut s = 0i64;
            let mut head = Vec::with_capacity(k);
            for j in 0..n {
                s += w.increment(r);
                if s < 0 {
                    return None;
                }
                if (j as usize) < k {
                    head.push(s);
                }
            }
            Some(head)
        });
        let start = next;
        next += batch;
        for (i, f) in (start..next).zip(found) {
            if let Some(h) = f {
                *counts.entry(h).or_insert(0) += 1;
                got += 1;
                if got == target {
                    next = i + 1;
                    break;
                }
            }
        }
        let rate = got.max(1) as f64 / next as f64;
        batch = ((target - got) as f64 / rate * 1.2).clamp(4096.0, 1e7) as u64;
    }
    (counts, next)
}

/// `½ Σ |P_0(path | S_j ≥ 0, j ≤ n) − P^≥(path)|` over paths of length `k`,
/// with the conditional law from the exact half-line survival.
fn exact_conditioned_tv(w: &LatticeLaw, exact: &BTreeMap<Vec<i64>, f64>, k: usize, n: usize) -> Result<f64> {
    let top = k as i64 * w.max_up();
    let tab = half_line_survival(w, 0, top, &[n - k, n])?;
    let qn0 = tab[1][0];
    let mut law: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
    let mut paths: Vec<(Vec<i64>, f64)> = vec![(Vec::new(), 1.0)];
    for _ in 0..k {
        let mut next = Vec::new();
        for (p, pr) in paths {
            let at = p.last().copied().unwrap_or(0);
            for (&s, &q) in w.steps().iter().zip(w.probs()) {
                if at + s >= 0 {
                    let mut np = p.clone();
                    np.push(at + s);
                    next.push((np, pr * q));
                }
            }
        }
        paths = next;
    }
    for (p, pr) in paths {
        let end = *p.last().unwrap_or(&0);
        law.insert(p, pr * tab[0][end as usize] / qn0);
    }
    let mut tv = 0.0;
    for (p, &q) in &law {
        tv += (q - exact.get(p).copied().unwrap_or(0.0)).abs();
    }
    for (p, &q) in exact {
        if !law.contains_key(p) {
            tv += q;
        }
    }
    Ok(tv / 2.0)
}

/// Writes lattice paths as: `u64` path count, then per path a `u64` length
/// followed by that many `i64` positions in units of `λ`, all little-endian.
pub fn write_trace<W: Write>(out: &mut W, paths: &[Path<i64>]) -> io::Result<()> {
    out.write_all(&(paths.len() as u64).to_le_bytes())?;
    for p in paths {
        out.write_all(&(p.len() as u64 + 1).to_le_bytes())?;
        for s in p.iter_with_start() {
            out.write_all(&s.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_trace<R: Read>(input: &mut R) -> io::Result<Vec<Path<i64>>> {
    let mut word = [0u8; 8];
    let mut next = |r: &mut R| -> io::Result<u64> {
        r.read_exact(&mut word)?;
        Ok(u64::from_le_bytes(word))
    };
    let count = next(input)?;
    let mut paths = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let len = next(input)?;
        let mut v = Vec::with_capacity(len as usize);
        for _ in 0..len {
            v.push(next(input)? as i64);
        }
        let x0 = v.remove(0);
        paths.push(Path::new(x0, v));
    }
    Ok(paths)
}

/// Stored positions of an accepted sample as lattice paths.
pub fn sample_paths(sample: &ConditionedSample) -> Result<Vec<Path<i64>>> {
    let lam = sample
        .lambda
        .ok_or_else(|| Error::Unsupported("traces hold lattice positions only".into()))?;
    sample
        .accepted
        .iter()
        .map(|a| {
            let p = a.positions.as_ref().ok_or_else(|| Error::Domain("paths were not stored".into()))?;
            let sites: Vec<i64> = p.iter().map(|v| (v / lam).round() as i64).collect();
            Ok(Path::new(sites[0], sites[1..].to_vec()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walk_core::derive_substream;

    fn set(s: &str) -> AvoidSet {
        AvoidSet::parse(s).unwrap()
    }

    fn spec(n: u64, target: u64, seed: u64) -> SamplerSpec {
        SamplerSpec { n, target, max_attempts: 1 << 24, store_paths: false, seed }
    }

    #[test]
    fn accepted_paths_avoid_b() {
        let mut sp = spec(200, 50, 1);
        sp.store_paths = true;
        let s = sample_conditioned(&StepLaw::tent(), &set("points{0}"), 1.0, sp).unwrap();
        assert_eq!(s.accepted.len(), 50);
        for a in &s.accepted {
            let p = a.positions.as_ref().unwrap();
            assert_eq!(p.len(), 201);
            assert!(p.iter().all(|&v| v != 0.0));
            assert_eq!(*p.last().unwrap(), a.end);
            assert_eq!(p[50], a.quarter);
            assert_eq!(p[100], a.half);
        }
    }

    #[test]
    fn sample_is_reproducible_and_ordered() {
        let a = sample_conditioned(&StepLaw::skew(), &set("points{-1,1}"), 0.0, spec(300, 40, 9)).unwrap();
        let b = sample_conditioned(&StepLaw::skew(), &set("points{-1,1}"), 0.0, spec(300, 40, 9)).unwrap();
        assert_eq!(a, b);
        assert!(a.accepted.windows(2).all(|w| w[0].index < w[1].index));
        assert_eq!(a.attempts, a.accepted.last().unwrap().index + 1);
    }

    #[test]
    fn hopeless_start_fails_with_rate_bound() {
        // Both SKEW steps from 0 land in {-3, 2}.
        let mut sp = spec(100, 10, 1);
        sp.max_attempts = 5000;
        let err = sample_conditioned(&StepLaw::skew(), &set("points{-3,2}"), 0.0, sp).unwrap_err();
        match err {
            Error::NoAcceptance { attempts, rate_bound } => {
                assert_eq!(attempts, 5000);
                assert!(rate_bound > 0.0 && rate_bound < 1e-3);
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn partial_sample_is_flagged() {
        let mut sp = spec(1000, 1000, 2);
        sp.max_attempts = 2000;
        let s = sample_conditioned(&StepLaw::srw(), &set("points{0}"), 1.0, sp).unwrap();
        assert!(s.partial && s.attempts == 2000);
    }

    #[test]
    fn srw_sign_is_forced() {
        let s = sample_conditioned(&StepLaw::srw(), &set("points{0}"), 1.0, spec(400, 200, 3)).unwrap();
        let r = theorem3_checks(&s, 1.0, 0.0, None, BnRule::default()).unwrap();
        assert_eq!(r.rho_hat.0, 1.0);
        assert_eq!(r.negative, 0);
        // Unit steps cannot jump over {0}: no epoch after time 0.
        assert_eq!(r.early_last_jump.0, 1.0);
    }

    #[test]
    fn meander_cdf_is_a_distribution() {
        for t in [0.25, 0.5, 0.9] {
            assert!(meander_cdf(t, 8.0) > 1.0 - 1e-6, "{t}");
            assert!(meander_cdf(t, 0.5) < meander_cdf(t, 1.0));
        }
        assert!((meander_cdf(1.0, 1.0) - (1.0 - (-0.5f64).exp())).abs() < 1e-15);
        // Simpson near t = 1 agrees with the closed form.
        assert!((meander_cdf(0.999999, 1.3) - meander_cdf(1.0, 1.3)).abs() < 1e-3);
    }

    /// Discretised meander: Gaussian walk of 1000 steps from one step size
    /// above 0, kept when it stays positive.
    fn discrete_meander(reps: usize, t: f64) -> Vec<f64> {
        let m = 1000usize;
        let law = crate::walk_core::ContinuousLaw::Gauss { sigma: 1.0 };
        let k = (t * m as f64) as usize;
        let mut out = Vec::new();
        let mut i = 0;
        while out.len() < reps {
            let mut r = derive_substream(77, i);
            i += 1;
            let mut s = 1.0;
            let mut at = 0.0;
            let mut ok = true;
            for j in 1..=m {
                s += law.increment(&mut r);
                if s <= 0.0 {
                    ok = false;
                    break;
                }
                if j == k {
                    at = s;
                }
            }
            if ok {
                out.push(at / (m as f64).sqrt());
            }
        }
        out
    }

    #[test]
    fn meander_marginals_match_a_discretised_meander() {
        for t in [0.5, 1.0] {
            let xs = discrete_meander(3000, t);
            let d = ks_one_sample(&xs, |u| meander_cdf(t, u));
            assert!(d < 0.035, "t = {t}: {d}");
        }
    }

    #[test]
    fn srw_h_chain_kernel() {
        let law = StepLaw::srw();
        let w = law.as_lattice().unwrap();
        let u = Renewal::new(&law, 40, 256).unwrap();
        for x in 0..50 {
            let mut c = HChain::new(w, &u, Side::NonNegative, x).unwrap();
            let row = c.row().unwrap();
            let up = row.iter().find(|e| e.0 == x + 1).unwrap().1;
            assert!((up - (x as f64 + 2.0) / (2.0 * (x as f64 + 1.0))).abs() < 1e-12);
        }
        let mut c = HChain::new(w, &u, Side::NonNegative, 0).unwrap();
        let mut r = derive_substream(1, 0);
        assert_eq!(c.step(&mut r).unwrap(), 1);
        assert!(HChain::new(w, &u, Side::NonNegative, -1).is_err());
        assert!(HChain::new(w, &u, Side::Negative, 1).is_err());
        let mut c = HChain::new(w, &u, Side::Negative, 0).unwrap();
        assert_eq!(c.step(&mut r).unwrap(), -1);
    }

    #[test]
    fn negative_side_kernel_is_stochastic() {
        for law in [StepLaw::tent(), StepLaw::skew()] {
            let w = law.as_lattice().unwrap();
            let u = Renewal::new(&law, 60, 512).unwrap();
            for x in -40..=0 {
                HChain::new(w, &u, Side::Negative, x).unwrap().row().unwrap();
            }
            for x in 0..40 {
                HChain::new(w, &u, Side::NonNegative, x).unwrap().row().unwrap();
            }
        }
    }

    #[test]
    fn h_chain_law_sums_to_one() {
        let law = StepLaw::tent();
        let w = law.as_lattice().unwrap();
        let u = Renewal::new(&law, 40, 256).unwrap();
        let l = h_chain_law(w, &u, Side::NonNegative, 0, 3).unwrap();
        assert!((l.values().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(l.keys().all(|p| p.iter().all(|&s| s >= 0)));
        assert_eq!(h_chain_law(w, &u, Side::NonNegative, 0, 0).unwrap().len(), 1);
    }

    #[test]
    fn srw_first_step_doob_check() {
        let r = doob_limit_check(&StepLaw::srw(), 1, &[1000], 500, 4).unwrap();
        assert!(r.rows[0].tv < 1e-12);
        assert!(r.rows[0].tv_exact.unwrap() < 1e-12);
        let r = doob_limit_check(&StepLaw::tent(), 0, &[200], 100, 4).unwrap();
        assert_eq!(r.rows[0].tv, 0.0);
    }

    #[test]
    fn trace_round_trip() {
        let paths = vec![Path::new(1i64, vec![2, 3, -4]), Path::new(-7, vec![])];
        let mut buf = Vec::new();
        write_trace(&mut buf, &paths).unwrap();
        assert_eq!(buf.len(), 8 + (8 + 32) + (8 + 8));
        assert_eq!(&buf[..8], &2u64.to_le_bytes());
        assert_eq!(read_trace(&mut buf.as_slice()).unwrap(), paths);
    }
}
