//! Largest gaps and empty sites in the range of a walk, the points-of-increase
//! functional, and samplers for the limit laws built from the h-chains.

use crate::conditioned::{BnRule, HChain, Side};
use crate::error::{Error, Result};
use crate::ladder::Renewal;
use crate::mc::par_reps;
use crate::stats::{ks_two_sample, KsResult};
use crate::walk_core::{sample_path, LatticeLaw, Path, Site, StepLaw, Walk};
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

/// Spacing statistics of `S_1, ..., S_n`; `S_0` is excluded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapStats {
    pub n: usize,
    pub b_n: usize,
    /// Largest spacing of the order statistics, `k = 1..n−1`.
    pub g: f64,
    /// Spacings with index `k ∈ [b_n, n − b_n]`.
    pub g_int: f64,
    /// Spacings with index `k ∈ [1, b_n] ∪ [n − b_n, n − 1]`.
    pub g_ext: f64,
    /// Number of empty lattice sites within the range; lattice paths only.
    pub e: Option<u64>,
    pub min: f64,
    pub max: f64,
    /// First time the minimum is attained.
    pub argmin_first: usize,
    /// Last time the maximum is attained.
    pub argmax_last: usize,
}

fn check_pre(n: usize, b_n: usize) -> Result<()> {
    if n < 3 {
        return Err(Error::Domain(format!("gap statistics need n ≥ 3, got {n}")));
    }
    if b_n < 1 || 2 * b_n > n {
        return Err(Error::Domain(format!("b_n = {b_n} outside [1, n/2] for n = {n}")));
    }
    Ok(())
}

fn extremes<S: Site>(xs: &[S]) -> (S, S, usize, usize) {
    let (mut lo, mut hi) = (xs[0], xs[0]);
    let (mut mu, mut eta) = (1, 1);
    for (i, &s) in xs.iter().enumerate() {
        if s < lo {
            lo = s;
            mu = i + 1;
        }
        if s >= hi {
            hi = s;
            eta = i + 1;
        }
    }
    (lo, hi, mu, eta)
}

struct Windows {
    n: usize,
    b: usize,
    g: f64,
    int: f64,
    ext: f64,
}

impl Windows {
    fn new(n: usize, b: usize) -> Self {
        Self { n, b, g: 0.0, int: 0.0, ext: 0.0 }
    }

    fn push(&mut self, k: usize, gap: f64) {
        self.g = self.g.max(gap);
        if k >= self.b && k <= self.n - self.b {
            self.int = self.int.max(gap);
        }
        if k <= self.b || k >= self.n - self.b {
            self.ext = self.ext.max(gap);
        }
    }
}

/// Gap statistics of a lattice path with span `lambda`. Runs in `O(n + range)`
/// using site counts.
pub fn gap_statistics(path: &Path<i64>, lambda: f64, b_n: usize) -> Result<GapStats> {
    let xs = &path.positions;
    let n = xs.len();
    check_pre(n, b_n)?;
    let (lo, hi, mu, eta) = extremes(xs);
    let mut counts = vec![0u32; (hi - lo) as usize + 1];
    for &s in xs {
        counts[(s - lo) as usize] += 1;
    }
    let mut win = Windows::new(n, b_n);
    let mut rank = 0usize;
    let mut prev: Option<usize> = None;
    let mut distinct = 0u64;
    for (v, &c) in counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        distinct += 1;
        if let Some(p) = prev {
            win.push(rank, (v - p) as f64 * lambda);
        }
        rank += c as usize;
        prev = Some(v);
    }
    Ok(GapStats {
        n,
        b_n,
        g: win.g,
        g_int: win.int,
        g_ext: win.ext,
        e: Some((hi - lo) as u64 + 1 - distinct),
        min: lo as f64 * lambda,
        max: hi as f64 * lambda,
        argmin_first: mu,
        argmax_last: eta,
    })
}

/// Gap statistics of a real-valued path, by sorting.
pub fn gap_statistics_real(path: &Path<f64>, b_n: usize) -> Result<GapStats> {
    let xs = &path.positions;
    let n = xs.len();
    check_pre(n, b_n)?;
    let (lo, hi, mu, eta) = extremes(xs);
    let mut sorted = xs.clone();
    sorted.sort_by(f64::total_cmp);
    let mut win = Windows::new(n, b_n);
    for k in 1..n {
        win.push(k, sorted[k] - sorted[k - 1]);
    }
    Ok(GapStats {
        n,
        b_n,
        g: win.g,
        g_int: win.int,
        g_ext: win.ext,
        e: None,
        min: lo,
        max: hi,
        argmin_first: mu,
        argmax_last: eta,
    })
}

fn ranks<S: Site>(xs: &[S]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap_or(Ordering::Equal));
    let mut r = vec![0; xs.len()];
    let mut cur = 0;
    for (i, &j) in idx.iter().enumerate() {
        if i > 0 && xs[idx[i - 1]] < xs[j] {
            cur += 1;
        }
        r[j] = cur;
    }
    r
}

struct Fenwick(Vec<u32>);

impl Fenwick {
    fn add(&mut self, i: usize) {
        let mut i = i + 1;
        while i < self.0.len() {
            self.0[i] += 1;
            i += i & i.wrapping_neg();
        }
    }

    /// Number of inserted ranks `< i`.
    fn below(&self, i: usize) -> u32 {
        let (mut i, mut s) = (i, 0);
        while i > 0 {
            s += self.0[i];
            i -= i & i.wrapping_neg();
        }
        s
    }
}

/// `min_k [#{j ≤ k: S_j > S_k} + #{j ≥ k: S_j < S_k}]` over the interior times
/// `k = 1..n−1` (all times when `n = 1`), with `S_0` included among the `j`.
pub fn increase_functional<S: Site>(path: &Path<S>) -> Result<u64> {
    let xs: Vec<S> = path.iter_with_start().collect();
    let n = path.len();
    if n < 1 {
        return Err(Error::Domain("increase functional needs n ≥ 1".into()));
    }
    let r = ranks(&xs);
    let m = r.iter().max().unwrap() + 1;
    let mut left = vec![0u32; xs.len()];
    let mut tree = Fenwick(vec![0; m + 1]);
    for (k, &rk) in r.iter().enumerate() {
        left[k] = k as u32 - tree.below(rk + 1);
        tree.add(rk);
    }
    let mut tree = Fenwick(vec![0; m + 1]);
    let mut best = u64::MAX;
    let interior = |k: usize| n == 1 || (1..n).contains(&k);
    for k in (0..xs.len()).rev() {
        if interior(k) {
            best = best.min((left[k] + tree.below(r[k])) as u64);
        }
        tree.add(r[k]);
    }
    Ok(best)
}

/// Gap statistics of `reps` independent walks of length `n` from 0.
pub fn sample_gap_stats(law: &StepLaw, n: usize, b_rule: BnRule, reps: u64, seed: u64) -> Result<Vec<GapStats>> {
    let b = b_rule.at(n as u64) as usize;
    check_pre(n, b)?;
    let out = match law {
        StepLaw::Lattice(w) => par_reps(seed, reps, |_, r| gap_statistics(&sample_path(w, 0, n, r), w.lambda(), b)),
        StepLaw::Continuous(w) => par_reps(seed, reps, |_, r| gap_statistics_real(&sample_path(w, 0.0, n, r), b)),
    };
    out.into_iter().collect()
}

/// Values of [`increase_functional`] for `reps` walks of length `n`.
pub fn sample_increase(law: &StepLaw, n: usize, reps: u64, seed: u64) -> Result<Vec<u64>> {
    let out = match law {
        StepLaw::Lattice(w) => par_reps(seed, reps, |_, r| increase_functional(&sample_path(w, 0, n, r))),
        StepLaw::Continuous(w) => par_reps(seed, reps, |_, r| increase_functional(&sample_path(w, 0.0, n, r))),
    };
    out.into_iter().collect()
}

/// Cumulative kernel rows of an h-chain, precomputed and checked over a band
/// of states; states outside the band fall back to [`HChain::row`].
struct KernelTable<'a> {
    law: &'a LatticeLaw,
    renewal: &'a Renewal,
    side: Side,
    /// `|state|` bound of the table.
    reach: i64,
    rows: Vec<Vec<(i64, f64)>>,
    max_defect: f64,
}

impl<'a> KernelTable<'a> {
    fn new(law: &'a LatticeLaw, renewal: &'a Renewal, side: Side, reach: i64) -> Result<Self> {
        let mut max_defect: f64 = 0.0;
        let mut rows = Vec::with_capacity(reach as usize + 1);
        for a in 0..=reach {
            let state = if side == Side::NonNegative { a } else { -a };
            let mut c = HChain::new(law, renewal, side, state)?;
            rows.push(Self::cumulative(c.row()?));
            max_defect = max_defect.max(c.max_defect);
        }
        Ok(Self { law, renewal, side, reach, rows, max_defect })
    }

    fn cumulative(row: Vec<(i64, f64)>) -> Vec<(i64, f64)> {
        let mut acc = 0.0;
        row.into_iter()
            .filter(|e| e.1 > 0.0)
            .map(|(y, p)| {
                acc += p;
                (y, acc)
            })
            .collect()
    }

    fn step<R: RngCore + ?Sized>(&self, state: i64, rng: &mut R) -> Result<i64> {
        let u: f64 = rng.random();
        let pick = |row: &[(i64, f64)]| row.iter().find(|e| u < e.1).unwrap_or(row.last().unwrap()).0;
        if state.abs() <= self.reach {
            return Ok(pick(&self.rows[state.unsigned_abs() as usize]));
        }
        let mut c = HChain::new(self.law, self.renewal, self.side, state)?;
        Ok(pick(&Self::cumulative(c.row()?)))
    }

    /// `|S_1|, ..., |S_len|` from 0.
    fn run<R: RngCore + ?Sized>(&self, len: usize, rng: &mut R) -> Result<Vec<i64>> {
        let mut s = 0;
        let mut out = Vec::with_capacity(len);
        for _ in 0..len {
            s = self.step(s, rng)?;
            out.push(s.abs());
        }
        Ok(out)
    }
}

/// Per-rep draws of the limit gap `G` and empty-site count `E`, in real units.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LimitGapSample {
    pub law: String,
    pub horizon: u64,
    pub seed: u64,
    pub g: Vec<f64>,
    pub e: Vec<u64>,
    /// Frontier used for each rep at the horizon, real units.
    pub frontier: Vec<f64>,
    /// Fraction of reps whose `(G, E)` changed when the chains ran to `2N`.
    pub changed_fraction: f64,
    pub stabilized: bool,
    /// Reps whose smaller chain maximum stayed below the transience threshold.
    pub flagged: Vec<u64>,
    pub max_kernel_defect: f64,
}

/// Largest gap and empty-site count of the union of two site sets, restricted
/// to `[0, frontier]`.
fn union_gap(up: &[i64], down: &[i64]) -> (i64, u64, i64) {
    let top = |v: &[i64]| v.iter().copied().max().unwrap_or(0);
    let frontier = top(up).min(top(down)) / 2;
    let mut seen = vec![false; frontier as usize + 1];
    seen[0] = true;
    for &s in up.iter().chain(down) {
        if s <= frontier {
            seen[s as usize] = true;
        }
    }
    let (mut g, mut e, mut last) = (0, 0, 0);
    for (v, &hit) in seen.iter().enumerate() {
        if hit {
            g = g.max(v as i64 - last);
            e += (v as i64 - last - 1).max(0) as u64;
            last = v as i64;
        }
    }
    (g, e, frontier)
}

/// Draws `(G, E)` from the union `{S^≥_k} ∪ {−S^<_k}` of two independent
/// h-chains started at 0, run for `horizon` steps, and repeats at `2·horizon`
/// on the same streams to measure stabilization.
pub fn sample_limit_gap(law: &StepLaw, horizon: u64, reps: u64, seed: u64) -> Result<LimitGapSample> {
    if horizon < 10_000 {
        return Err(Error::Domain(format!("limit horizon {horizon} below 10⁴")));
    }
    let w = law.as_lattice()?;
    let lam = w.lambda();
    let renewal = Renewal::new(law, 40 * w.max_step().max(5), 4096)?;
    let reach = 4096;
    let up = KernelTable::new(w, &renewal, Side::NonNegative, reach)?;
    let down = KernelTable::new(w, &renewal, Side::Negative, reach)?;
    let n = horizon as usize;
    let threshold = (w.sigma_site() * (horizon as f64).sqrt() / 4.0) as i64;
    let draws = par_reps(seed, reps, |_, r| -> Result<_> {
        let a = up.run(2 * n, r)?;
        let b = down.run(2 * n, r)?;
        let first = union_gap(&a[..n], &b[..n]);
        let second = union_gap(&a, &b);
        let low = a[..n].iter().max().unwrap().min(b[..n].iter().max().unwrap());
        Ok((first, second, *low < threshold))
    });
    let mut out = LimitGapSample {
        law: law.spec_string(),
        horizon,
        seed,
        g: Vec::with_capacity(reps as usize),
        e: Vec::with_capacity(reps as usize),
        frontier: Vec::with_capacity(reps as usize),
        changed_fraction: 0.0,
        stabilized: false,
        flagged: Vec::new(),
        max_kernel_defect: up.max_defect.max(down.max_defect),
    };
    let mut changed = 0u64;
    for (i, d) in draws.into_iter().enumerate() {
        let ((g, e, f), (g2, e2, _), low) = d?;
        out.g.push(g as f64 * lam);
        out.e.push(e);
        out.frontier.push(f as f64 * lam);
        if (g, e) != (g2, e2) {
            changed += 1;
        }
        if low {
            out.flagged.push(i as u64);
        }
    }
    out.changed_fraction = changed as f64 / reps.max(1) as f64;
    out.stabilized = out.changed_fraction < 0.01;
    Ok(out)
}

/// Two-sample KS distance and its asymptotic p-value.
pub fn distribution_distance(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Domain("distribution distance needs nonempty samples".into()));
    }
    Ok(ks_two_sample(a, b))
}

/// `max(G⁻, G⁺)` from consecutive disjoint pairs of limit draws.
pub fn max_of_pairs(g: &[f64]) -> Vec<f64> {
    g.chunks_exact(2).map(|p| p[0].max(p[1])).collect()
}

/// `E⁻ + E⁺` from consecutive disjoint pairs of limit draws.
pub fn sum_of_pairs(e: &[u64]) -> Vec<f64> {
    e.chunks_exact(2).map(|p| (p[0] + p[1]) as f64).collect()
}
