//! Ladder heights, renewal functions and the contraction diagnostics of the
//! jump chain.

use crate::error::{Error, Result};
use crate::mc::par_reps;
use crate::oracle::banded::first_entry;
use crate::oracle::strip_survival;
use crate::sets::{simulate_epochs, Model};
use crate::stats::{linear_fit, mean_se, proportion, LinearFit};
use crate::walk_core::{ContinuousLaw, LatticeLaw, RngStream, Site, StepLaw, Walk};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LadderKind {
    /// `H₊`: first entry into `(0, ∞)`.
    StrictAscending,
    /// `H₋`: first entry into `(−∞, 0)`.
    StrictDescending,
    /// `H'₊`: first `k ≥ 1` with `S_k ≥ 0`.
    WeakAscending,
    /// `H'₋`: first `k ≥ 1` with `S_k ≤ 0`.
    WeakDescending,
}

impl LadderKind {
    pub const ALL: [LadderKind; 4] = [
        LadderKind::StrictAscending,
        LadderKind::StrictDescending,
        LadderKind::WeakAscending,
        LadderKind::WeakDescending,
    ];

    fn ascending(self) -> bool {
        matches!(self, LadderKind::StrictAscending | LadderKind::WeakAscending)
    }

    fn strict(self) -> bool {
        matches!(self, LadderKind::StrictAscending | LadderKind::StrictDescending)
    }

    fn reached(self, s: f64) -> bool {
        match self {
            LadderKind::StrictAscending => s > 0.0,
            LadderKind::StrictDescending => s < 0.0,
            LadderKind::WeakAscending => s >= 0.0,
            LadderKind::WeakDescending => s <= 0.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            LadderKind::StrictAscending => "H+",
            LadderKind::StrictDescending => "H-",
            LadderKind::WeakAscending => "H'+",
            LadderKind::WeakDescending => "H'-",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum LadderDist {
    /// Lattice pmf in real units, with the doubling discrepancy `ε_L`.
    Exact {
        values: Vec<f64>,
        probs: Vec<f64>,
        epsilon: f64,
        window: i64,
        lambda: f64,
    },
    /// Heights of the runs that finished within `cap` steps.
    Sampled {
        heights: Vec<f64>,
        reps: u64,
        cap: u64,
        censored_fraction: f64,
        censored_fraction_2cap: f64,
        mean_abs_2cap: f64,
        mean_abs_2cap_stderr: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderTable {
    pub law: String,
    pub kind: LadderKind,
    pub dist: LadderDist,
    /// `E|H|`.
    pub mean_abs: f64,
    /// Zero for exact tables.
    pub mean_abs_stderr: f64,
}

impl LadderTable {
    /// `value,probability,cumulative` rows; sampled tables list the
    /// empirical distribution.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("value,probability,cumulative\n");
        let rows: Vec<(f64, f64)> = match &self.dist {
            LadderDist::Exact { values, probs, .. } => values.iter().copied().zip(probs.iter().copied()).collect(),
            LadderDist::Sampled { heights, .. } => {
                let mut h = heights.clone();
                h.sort_by(f64::total_cmp);
                let w = 1.0 / h.len() as f64;
                let mut rows: Vec<(f64, f64)> = Vec::new();
                for v in h {
                    match rows.last_mut() {
                        Some((u, p)) if *u == v => *p += w,
                        _ => rows.push((v, w)),
                    }
                }
                rows
            }
        };
        let mut cum = 0.0;
        for (v, p) in rows {
            cum += p;
            out.push_str(&format!("{v},{p},{cum}\n"));
        }
        out
    }

    /// Pmf on the lattice, `None` for sampled tables.
    pub fn pmf(&self) -> Option<(&[f64], &[f64])> {
        match &self.dist {
            LadderDist::Exact { values, probs, .. } => Some((values, probs)),
            LadderDist::Sampled { .. } => None,
        }
    }

    /// `P(|H| ≥ t)`, exact or empirical.
    pub fn tail_abs(&self, t: f64) -> f64 {
        match &self.dist {
            LadderDist::Exact { values, probs, .. } => values
                .iter()
                .zip(probs)
                .filter(|(v, _)| v.abs() >= t)
                .map(|(_, p)| p)
                .sum(),
            LadderDist::Sampled { heights, .. } => {
                heights.iter().filter(|h| h.abs() >= t).count() as f64 / heights.len() as f64
            }
        }
    }
}

/// Strict descending pmf from 0 on the strip `[0, top]`, indexed by the
/// overshoot magnitude `1..=down`.
fn strict_descending_sites(law: &LatticeLaw, top: i64) -> Vec<f64> {
    let down = law.max_down();
    let rows = first_entry(law, 0, top, &|t| (t < 0).then(|| (-t - 1) as usize), down as usize);
    rows[..down as usize].to_vec()
}

/// Pmf of a ladder height in site units, keyed by the signed site.
fn ladder_sites(law: &LatticeLaw, kind: LadderKind, top: i64) -> Vec<(i64, f64)> {
    let w = if kind.ascending() { law.mirrored() } else { law.clone() };
    let sign = if kind.ascending() { -1 } else { 1 };
    let mut pmf: Vec<(i64, f64)> = Vec::new();
    if kind.strict() {
        let d = strict_descending_sites(&w, top);
        for (m, &p) in d.iter().enumerate() {
            pmf.push((-(m as i64 + 1), p));
        }
    } else {
        // One step from 0, then a strict descent started one site lower.
        let down = w.max_down() as usize;
        let rows = first_entry(&w, 0, top, &|t| (t < 0).then(|| (-t - 1) as usize), down);
        let mut acc = vec![0.0; down + 1];
        for (&s, &p) in w.steps().iter().zip(w.probs()) {
            if s <= 0 {
                acc[(-s) as usize] += p;
            } else {
                let row = &rows[(s - 1) as usize * down..s as usize * down];
                for (m, &q) in row.iter().enumerate() {
                    // Strict descent below 0 from s − 1 ends at −(m+1); shift by 1.
                    acc[m] += p * q;
                }
            }
        }
        for (m, &p) in acc.iter().enumerate() {
            pmf.push((-(m as i64), p));
        }
    }
    pmf.retain(|&(_, p)| p > 0.0);
    pmf.iter_mut().for_each(|e| e.0 *= sign);
    pmf.sort_by_key(|e| e.0);
    pmf
}

/// Exact ladder pmf by a linear solve on `[0, L]`, `L` in site units, with
/// `ε_L` the L¹ change when the strip is doubled.
pub fn exact_ladder_pmf(law: &StepLaw, kind: LadderKind, window: i64) -> Result<LadderTable> {
    let w = law.as_lattice()?;
    if window < 10 * w.max_step() {
        return Err(Error::Domain(format!(
            "ladder strip {window} shorter than 10 x max step {}",
            w.max_step()
        )));
    }
    let a = ladder_sites(w, kind, window);
    let b = ladder_sites(w, kind, 2 * window);
    let mut epsilon = 0.0;
    for &(s, p) in &a {
        let q = b.iter().find(|e| e.0 == s).map_or(0.0, |e| e.1);
        epsilon += (p - q).abs();
    }
    for &(s, q) in &b {
        if !a.iter().any(|e| e.0 == s) {
            epsilon += q;
        }
    }
    let lam = w.lambda();
    let values: Vec<f64> = a.iter().map(|e| e.0 as f64 * lam).collect();
    let probs: Vec<f64> = a.iter().map(|e| e.1).collect();
    let mean_abs = values.iter().zip(&probs).map(|(v, p)| v.abs() * p).sum();
    Ok(LadderTable {
        law: law.spec_string(),
        kind,
        dist: LadderDist::Exact { values, probs, epsilon, window, lambda: lam },
        mean_abs,
        mean_abs_stderr: 0.0,
    })
}

fn ladder_run<W: Walk>(w: &W, kind: LadderKind, limit: u64, rng: &mut RngStream) -> Option<(f64, u64)> {
    let mut s = W::Site::ZERO;
    for k in 1..=limit {
        s = s + w.increment(rng);
        let v = w.real(s);
        if kind.reached(v) {
            return Some((v, k));
        }
    }
    None
}

/// Ladder heights by simulation from 0. Every run is followed up to `2·cap`
/// steps so the censoring at `cap` and at `2·cap` come from the same streams.
pub fn sampled_ladder(law: &StepLaw, kind: LadderKind, reps: u64, cap: u64, seed: u64) -> LadderTable {
    let runs = match law {
        StepLaw::Lattice(w) => par_reps(seed, reps, |_, r| ladder_run(w, kind, 2 * cap, r)),
        StepLaw::Continuous(w) => par_reps(seed, reps, |_, r| ladder_run(w, kind, 2 * cap, r)),
    };
    let at = |c: u64| -> Vec<f64> {
        runs.iter()
            .filter_map(|r| r.filter(|&(_, k)| k <= c).map(|(h, _)| h))
            .collect()
    };
    let heights = at(cap);
    let wide = at(2 * cap);
    let abs = |v: &[f64]| v.iter().map(|h| h.abs()).collect::<Vec<_>>();
    let (mean_abs, mean_abs_stderr) = mean_se(&abs(&heights));
    let (mean_abs_2cap, mean_abs_2cap_stderr) = mean_se(&abs(&wide));
    LadderTable {
        law: law.spec_string(),
        kind,
        dist: LadderDist::Sampled {
            censored_fraction: 1.0 - heights.len() as f64 / reps as f64,
            censored_fraction_2cap: 1.0 - wide.len() as f64 / reps as f64,
            heights,
            reps,
            cap,
            mean_abs_2cap,
            mean_abs_2cap_stderr,
        },
        mean_abs,
        mean_abs_stderr,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum RenewalVariant {
    /// `U₊(y) = y − E_y H₋`, `y ≥ 0`.
    Plus,
    /// `U₋(y) = E_y H₊ − y`, `y ≤ 0`.
    Minus,
    /// Closed half-line version of `U₊`, `y ≥ 0`.
    PlusPrime,
    /// Closed half-line version of `U₋`, `y ≤ 0`.
    MinusPrime,
    /// `U_d(x) = U_{sgn x}(x − sgn(x)·d)`, `|x| ≥ d`.
    D(f64),
}

/// Renewal functions of a lattice law, tabulated on `0..=y_max` sites and
/// continued with slope one beyond.
#[derive(Clone, Debug)]
pub struct Renewal {
    lambda: f64,
    y_max: usize,
    e_desc: f64,
    e_asc: f64,
    e_weak_desc: f64,
    e_weak_asc: f64,
    /// `Σ_k P(D_k ≤ y)` for descending ladder sums `D_k` (magnitudes).
    cum_desc: Vec<f64>,
    cum_asc: Vec<f64>,
    /// Distance of the last renewal density from `1/E|H|`, relative.
    pub tail_defect: f64,
    pub tables: [LadderTable; 4],
}

fn renewal_cum(pmf: &[(i64, f64)], y_max: usize) -> Vec<f64> {
    let mut u = vec![0.0; y_max + 1];
    u[0] = 1.0;
    for y in 1..=y_max {
        u[y] = pmf
            .iter()
            .filter(|e| (e.0.unsigned_abs() as usize) <= y)
            .map(|&(s, p)| p * u[y - s.unsigned_abs() as usize])
            .sum();
    }
    let mut c = 0.0;
    u.iter()
        .map(|v| {
            c += v;
            c
        })
        .collect()
}

impl Renewal {
    pub fn new(law: &StepLaw, window: i64, y_max: usize) -> Result<Self> {
        let w = law.as_lattice()?;
        let tables = LadderKind::ALL.map(|k| exact_ladder_pmf(law, k, window));
        let [a, d, wa, wd] = tables;
        let tables = [a?, d?, wa?, wd?];
        let sites = |k: LadderKind| ladder_sites(w, k, window);
        let asc = sites(LadderKind::StrictAscending);
        let desc = sites(LadderKind::StrictDescending);
        let lam = w.lambda();
        let site_mean = |p: &[(i64, f64)]| p.iter().map(|&(s, q)| s.unsigned_abs() as f64 * q).sum::<f64>();
        let (e_asc, e_desc) = (site_mean(&asc), site_mean(&desc));
        let cum_desc = renewal_cum(&desc, y_max);
        let cum_asc = renewal_cum(&asc, y_max);
        let slope = |c: &[f64]| c[y_max] - c[y_max - 1];
        let tail_defect = (slope(&cum_desc) * e_desc - 1.0)
            .abs()
            .max((slope(&cum_asc) * e_asc - 1.0).abs());
        Ok(Self {
            lambda: lam,
            y_max,
            e_desc,
            e_asc,
            e_weak_desc: tables[3].mean_abs / lam,
            e_weak_asc: tables[2].mean_abs / lam,
            cum_desc,
            cum_asc,
            tail_defect,
            tables,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    fn cum(c: &[f64], e: f64, y_max: usize, y: usize) -> f64 {
        if y <= y_max {
            c[y]
        } else {
            c[y_max] + (y - y_max) as f64 / e
        }
    }

    /// `U₊` at a site `y ≥ 0`, site units.
    pub fn plus_site(&self, y: i64) -> f64 {
        self.e_desc * Self::cum(&self.cum_desc, self.e_desc, self.y_max, y as usize)
    }

    /// `U₋` at a site `y ≤ 0`, site units.
    pub fn minus_site(&self, y: i64) -> f64 {
        self.e_asc * Self::cum(&self.cum_asc, self.e_asc, self.y_max, (-y) as usize)
    }

    pub fn plus_prime_site(&self, y: i64) -> f64 {
        if y == 0 {
            self.e_weak_desc
        } else {
            self.plus_site(y - 1)
        }
    }

    pub fn minus_prime_site(&self, y: i64) -> f64 {
        if y == 0 {
            self.e_weak_asc
        } else {
            self.minus_site(y + 1)
        }
    }

    /// Evaluates a variant at a real argument, returning a real value.
    /// Arguments off the lattice round toward the origin, which keeps the
    /// renewal sums right-continuous.
    pub fn eval(&self, variant: RenewalVariant, y: f64) -> Result<f64> {
        let lam = self.lambda;
        let site = |v: f64| (v / lam + if v >= 0.0 { 1e-9 } else { -1e-9 }).trunc() as i64;
        let bad = |what: &str| Err(Error::Domain(format!("{what} undefined at {y}")));
        let v = match variant {
            RenewalVariant::Plus if y >= 0.0 => self.plus_site(site(y)),
            RenewalVariant::PlusPrime if y >= 0.0 => self.plus_prime_site(site(y)),
            RenewalVariant::Minus if y <= 0.0 => self.minus_site(site(y)),
            RenewalVariant::MinusPrime if y <= 0.0 => self.minus_prime_site(site(y)),
            RenewalVariant::D(d) if y.abs() >= d => {
                return self.eval(
                    if y > 0.0 { RenewalVariant::Plus } else { RenewalVariant::Minus },
                    y - y.signum() * d,
                )
            }
            RenewalVariant::D(_) => return bad("U_d"),
            RenewalVariant::Plus | RenewalVariant::PlusPrime => return bad("U+"),
            RenewalVariant::Minus | RenewalVariant::MinusPrime => return bad("U-"),
        };
        Ok(v * lam)
    }

    /// `E H'₊ · E|H₋|` in real units.
    pub fn weak_strict_product(&self) -> f64 {
        self.e_weak_asc * self.e_desc * self.lambda * self.lambda
    }
}

/// Law of the overshoot over an infinitely remote level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OvershootLaw {
    /// Lattice: atoms `j·λ` and their masses. Continuous: density grid.
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub lattice: bool,
    /// Mass of the overshoot below the window.
    pub total_mass: f64,
    /// Lattice only: the size-biased sum `Σ k·P(H₊ = k)/E H₊` over the same
    /// atoms.
    pub size_biased_mass: Option<f64>,
}

impl OvershootLaw {
    /// Total variation to an empirical sample of lattice overshoots.
    pub fn tv_to_sample(&self, sample: &[f64]) -> f64 {
        let n = sample.len() as f64;
        let mut tv = 0.0;
        let mut matched = 0usize;
        for (&v, &p) in self.points.iter().zip(&self.weights) {
            let c = sample.iter().filter(|&&s| (s - v).abs() < 1e-9).count();
            matched += c;
            tv += (p - c as f64 / n).abs();
        }
        tv += (sample.len() - matched) as f64 / n;
        tv / 2.0
    }
}

/// `P(O = j) = P(H₊ ≥ j)/E H₊` on lattice atoms inside `[0, window)`, or the
/// density `P(H₊ ≥ t)/E H₊` on a grid of `[0, window]`. `window = ∞` gives
/// the full law (lattice only).
pub fn overshoot_at_infinity(ascending: &LadderTable, window: f64) -> Result<OvershootLaw> {
    if ascending.kind != LadderKind::StrictAscending {
        return Err(Error::Domain("overshoot needs the strict ascending ladder law".into()));
    }
    let e = ascending.mean_abs;
    match &ascending.dist {
        LadderDist::Exact { values, probs, lambda, .. } => {
            let lam = *lambda;
            let top = values.iter().copied().fold(0.0, f64::max);
            let mut points = Vec::new();
            let mut weights = Vec::new();
            let mut size_biased = 0.0;
            let mut j = 1;
            loop {
                let v = j as f64 * lam;
                if v >= window - 1e-9 * lam || v > top + 1e-9 {
                    break;
                }
                let tail: f64 = values.iter().zip(probs).filter(|(h, _)| **h >= v - 1e-9).map(|(_, p)| p).sum();
                let atom: f64 = values.iter().zip(probs).filter(|(h, _)| (**h - v).abs() < 1e-9).map(|(_, p)| p).sum();
                points.push(v);
                weights.push(tail * lam / e);
                size_biased += v * atom / e;
                j += 1;
            }
            Ok(OvershootLaw {
                total_mass: weights.iter().sum(),
                points,
                weights,
                lattice: true,
                size_biased_mass: Some(size_biased),
            })
        }
        LadderDist::Sampled { heights, .. } => {
            if !window.is_finite() {
                return Err(Error::Domain("continuous overshoot needs a finite window".into()));
            }
            let m = 400;
            let h = window / m as f64;
            let n = heights.len() as f64;
            let mut sorted = heights.clone();
            sorted.sort_by(f64::total_cmp);
            let tail = |t: f64| (sorted.len() - sorted.partition_point(|&v| v < t)) as f64 / n;
            let points: Vec<f64> = (0..=m).map(|i| i as f64 * h).collect();
            let weights: Vec<f64> = points.iter().map(|&t| tail(t) / e).collect();
            // E[min(H₊, window)] / E H₊.
            let total_mass = heights.iter().map(|v| v.min(window)).sum::<f64>() / n / e;
            Ok(OvershootLaw { points, weights, lattice: false, total_mass, size_biased_mass: None })
        }
    }
}

/// Overshoots over a fixed level, built by summing strict ascending ladder
/// heights from 0 until the level is passed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OvershootSample {
    pub level: f64,
    pub cap: u64,
    pub values: Vec<f64>,
    /// Ladder excursions longer than `cap`, discarded and drawn again.
    pub redrawn: u64,
}

pub fn sample_overshoot(law: &StepLaw, level: f64, reps: u64, cap: u64, seed: u64) -> OvershootSample {
    fn one<W: Walk>(w: &W, level: f64, cap: u64, r: &mut RngStream) -> (f64, u64) {
        let (mut pos, mut redrawn) = (0.0, 0);
        while pos <= level {
            match ladder_run(w, LadderKind::StrictAscending, cap, r) {
                Some((h, _)) => pos += h,
                None => redrawn += 1,
            }
        }
        (pos - level, redrawn)
    }
    let runs = match law {
        StepLaw::Lattice(w) => par_reps(seed, reps, |_, r| one(w, level, cap, r)),
        StepLaw::Continuous(w) => par_reps(seed, reps, |_, r| one(w, level, cap, r)),
    };
    OvershootSample {
        level,
        cap,
        redrawn: runs.iter().map(|e| e.1).sum(),
        values: runs.into_iter().map(|e| e.0).collect(),
    }
}

/// Estimates at one start of the contraction grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionPoint {
    pub x: f64,
    pub reps: u64,
    /// Runs that did not reach `T'_1` (resp. resolve epoch 3) within the cap.
    pub censored_first: u64,
    pub censored_third: u64,
    /// `P_x(τ_B > T'_1)`.
    pub survive_first: (f64, f64),
    /// `P_x(H'_1` lands beyond `B)`; `P_x(|H₁| ≥ d)` for `B = (−d, d)`.
    pub jump_over: (f64, f64),
    /// `E_x|H'_1|`.
    pub mean_abs_first: (f64, f64),
    /// `P_x(τ_B > T'_3)`.
    pub survive_third: (f64, f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExitFit {
    pub ns: Vec<usize>,
    pub survival: Vec<f64>,
    pub beta: f64,
    pub r2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub law: String,
    pub set: String,
    pub cap: u64,
    pub points: Vec<ContractionPoint>,
    /// Largest jump-over estimate and its standard error.
    pub gamma: (f64, f64),
    /// Largest three-epoch survival estimate and its standard error.
    pub gamma3: (f64, f64),
    /// Fit of `E_x|H'_1|` against `|x|`: slope `α̂`, intercept `K̂`.
    pub lyapunov: LinearFit,
    pub exit: Option<ExitFit>,
}

/// Monte Carlo estimates of the one- and three-jump contraction constants
/// and the Lyapunov fit, one substream family per grid point.
pub fn contraction_diagnostics(model: &Model, set_spec: &str, x_grid: &[f64], reps: u64, cap: u64, seed: u64) -> Result<ContractionReport> {
    let mut points = Vec::new();
    for (gi, &x) in x_grid.iter().enumerate() {
        let sub = crate::walk_core::fork_seed(seed, gi as u64);
        let chains = crate::with_model!(model, |w, b| {
            let xs = w.site_of(x)?;
            par_reps(sub, reps, |_, r| simulate_epochs(w, b, xs, cap, 3, r))
        });
        let reached1: Vec<_> = chains.iter().filter(|c| c.epochs.len() > 1 || c.tau.is_some()).collect();
        let resolved3 = chains
            .iter()
            .filter(|c| c.epochs.len() > 3 || c.tau.is_some())
            .collect::<Vec<_>>();
        let survive1 = reached1.iter().filter(|c| c.survives_epoch(1)).count() as u64;
        let over = reached1.iter().filter(|c| c.survives_epoch(1) && c.outside_hull[1]).count() as u64;
        let abs_h1: Vec<f64> = reached1
            .iter()
            .map(|c| if c.marks.len() > 1 { c.marks[1].abs() } else { c.hit.unwrap().abs() })
            .collect();
        let survive3 = resolved3.iter().filter(|c| c.survives_epoch(3)).count() as u64;
        points.push(ContractionPoint {
            x,
            reps,
            censored_first: reps - reached1.len() as u64,
            censored_third: reps - resolved3.len() as u64,
            survive_first: proportion(survive1, reached1.len() as u64),
            jump_over: proportion(over, reached1.len() as u64),
            mean_abs_first: mean_se(&abs_h1),
            survive_third: proportion(survive3, resolved3.len() as u64),
        });
    }
    let argmax = |f: &dyn Fn(&ContractionPoint) -> (f64, f64)| {
        points
            .iter()
            .map(f)
            .filter(|v| v.0.is_finite())
            .fold((f64::NEG_INFINITY, 0.0), |a, b| if b.0 > a.0 { b } else { a })
    };
    let gamma = argmax(&|p| p.jump_over);
    let gamma3 = argmax(&|p| p.survive_third);
    let (xs, ys): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|p| p.mean_abs_first.0.is_finite())
        .map(|p| (p.x.abs(), p.mean_abs_first.0))
        .unzip();
    let lyapunov = linear_fit(&xs, &ys);
    Ok(ContractionReport {
        law: model_law_name(model),
        set: set_spec.to_string(),
        cap,
        points,
        gamma,
        gamma3,
        lyapunov,
        exit: None,
    })
}

fn model_law_name(model: &Model) -> String {
    match model {
        Model::Lattice(w, _) => w.spec_string(),
        Model::Real(w, _) => w.spec_string(),
    }
}

/// Log-linear fit of `P_x(S_k ∈ [−d, d], k ≤ n)` over `ns`. Lattice laws use
/// the exact recursion; continuous laws a midpoint-rule discretisation of the
/// killed kernel on `cells` cells.
pub fn exit_tail_fit(law: &StepLaw, d: f64, x: f64, ns: &[usize], cells: usize) -> Result<ExitFit> {
    let survival = match law {
        StepLaw::Lattice(_) => strip_survival(law, -d, d, x, ns)?,
        StepLaw::Continuous(c) => kernel_strip_survival(c, d, x, ns, cells),
    };
    if survival.iter().any(|&p| p <= 0.0) {
        return Err(Error::Domain("strip survival underflowed".into()));
    }
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let ys: Vec<f64> = survival.iter().map(|p| p.ln()).collect();
    let fit = linear_fit(&xs, &ys);
    Ok(ExitFit { ns: ns.to_vec(), survival, beta: -fit.slope, r2: fit.r2 })
}

fn density(law: &ContinuousLaw, z: f64) -> f64 {
    match *law {
        ContinuousLaw::Gauss { sigma } => {
            (-(z * z) / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
        }
        ContinuousLaw::Unif { a } => {
            if z.abs() <= a {
                0.5 / a
            } else {
                0.0
            }
        }
    }
}

fn kernel_strip_survival(law: &ContinuousLaw, d: f64, x: f64, ns: &[usize], cells: usize) -> Vec<f64> {
    let h = 2.0 * d / cells as f64;
    let mid: Vec<f64> = (0..cells).map(|i| -d + (i as f64 + 0.5) * h).collect();
    // Cell-averaged kernel: P(y + ξ ∈ cell j) by a 4-point rule in the target cell.
    let kernel = |y: f64, j: usize| {
        let lo = -d + j as f64 * h;
        (0..4).map(|t| density(law, lo + (t as f64 + 0.5) * h / 4.0 - y)).sum::<f64>() * h / 4.0
    };
    let k: Vec<Vec<f64>> = mid.iter().map(|&y| (0..cells).map(|j| kernel(y, j)).collect()).collect();
    let top = ns.iter().copied().max().unwrap_or(0);
    // q_k on the cell midpoints; the start gets its own row.
    let mut q = vec![1.0; cells];
    let x_row: Vec<f64> = (0..cells).map(|j| kernel(x, j)).collect();
    let mut out = Vec::new();
    for n in 1..=top {
        let at_x: f64 = x_row.iter().zip(&q).map(|(a, b)| a * b).sum();
        if ns.contains(&n) {
            out.push(at_x);
        }
        q = k.iter().map(|row| row.iter().zip(&q).map(|(a, b)| a * b).sum()).collect();
    }
    if ns.contains(&0) {
        out.insert(0, 1.0);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pmf(t: &LadderTable) -> Vec<(f64, f64)> {
        let (v, p) = t.pmf().unwrap();
        v.iter().copied().zip(p.iter().copied()).collect()
    }

    #[test]
    fn srw_ladders_are_unit() {
        let law = StepLaw::srw();
        let up = exact_ladder_pmf(&law, LadderKind::StrictAscending, 20).unwrap();
        let down = exact_ladder_pmf(&law, LadderKind::StrictDescending, 20).unwrap();
        assert_eq!(pmf(&up).len(), 1);
        assert!((pmf(&up)[0].0 - 1.0).abs() < 1e-12 && (pmf(&up)[0].1 - 1.0).abs() < 1e-9);
        assert!((pmf(&down)[0].0 + 1.0).abs() < 1e-12 && (pmf(&down)[0].1 - 1.0).abs() < 1e-9);
        // Weak: 0 w.p. 1/2 (step down then return), 1 w.p. 1/2.
        let weak = exact_ladder_pmf(&law, LadderKind::WeakAscending, 20).unwrap();
        let w = pmf(&weak);
        assert!((w[0].0 - 0.0).abs() < 1e-12 && (w[0].1 - 0.5).abs() < 1e-9);
        assert!((w[1].0 - 1.0).abs() < 1e-12 && (w[1].1 - 0.5).abs() < 1e-9);
    }

    #[test]
    fn too_short_strip_is_rejected() {
        assert!(exact_ladder_pmf(&StepLaw::tent(), LadderKind::StrictAscending, 19).is_err());
        assert!(exact_ladder_pmf(&StepLaw::gauss(), LadderKind::StrictAscending, 100).is_err());
    }

    #[test]
    fn tent_ladder_is_normalised_and_stable() {
        let t = exact_ladder_pmf(&StepLaw::tent(), LadderKind::StrictAscending, 200).unwrap();
        let LadderDist::Exact { epsilon, .. } = t.dist else { panic!() };
        assert!(epsilon < 1e-6);
        let p = pmf(&t);
        assert_eq!(p.iter().map(|e| e.0).collect::<Vec<_>>(), vec![1.0, 2.0]);
        assert!((p.iter().map(|e| e.1).sum::<f64>() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn srw_renewal_is_linear() {
        let u = Renewal::new(&StepLaw::srw(), 40, 64).unwrap();
        for y in 0..100 {
            let v = u.eval(RenewalVariant::Plus, y as f64).unwrap();
            assert!((v - (y as f64 + 1.0)).abs() < 1e-9, "{y} {v}");
        }
        assert!((u.eval(RenewalVariant::D(3.0), -7.0).unwrap() - 5.0).abs() < 1e-9);
        assert!(u.eval(RenewalVariant::D(3.0), 2.0).is_err());
        assert!(u.eval(RenewalVariant::Plus, -1.0).is_err());
    }

    #[test]
    fn renewal_at_zero_is_ladder_mean() {
        let law = StepLaw::skew();
        let u = Renewal::new(&law, 60, 128).unwrap();
        let desc = exact_ladder_pmf(&law, LadderKind::StrictDescending, 60).unwrap();
        let asc = exact_ladder_pmf(&law, LadderKind::StrictAscending, 60).unwrap();
        assert!((u.eval(RenewalVariant::Plus, 0.0).unwrap() - desc.mean_abs).abs() < 1e-12);
        assert!((u.eval(RenewalVariant::Minus, 0.0).unwrap() - asc.mean_abs).abs() < 1e-12);
    }

    #[test]
    fn srw_weak_strict_product_is_half_variance() {
        let u = Renewal::new(&StepLaw::srw(), 40, 16).unwrap();
        assert!((u.weak_strict_product() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn srw_overshoot_is_a_point_mass() {
        let t = exact_ladder_pmf(&StepLaw::srw(), LadderKind::StrictAscending, 20).unwrap();
        let o = overshoot_at_infinity(&t, 2.0).unwrap();
        assert_eq!(o.points, vec![1.0]);
        assert!((o.total_mass - 1.0).abs() < 1e-9);
    }

    #[test]
    fn tent_overshoot_sample_matches_stationary_law() {
        let law = StepLaw::tent();
        let t = exact_ladder_pmf(&law, LadderKind::StrictAscending, 200).unwrap();
        let o = overshoot_at_infinity(&t, f64::INFINITY).unwrap();
        let s = sample_overshoot(&law, 100.0, 4000, 10_000, 3);
        assert!(s.values.iter().all(|&v| v == 1.0 || v == 2.0));
        assert!(o.tv_to_sample(&s.values) < 0.03);
    }

    #[test]
    fn overshoot_needs_ascending_table() {
        let t = exact_ladder_pmf(&StepLaw::srw(), LadderKind::StrictDescending, 20).unwrap();
        assert!(overshoot_at_infinity(&t, 2.0).is_err());
    }

    #[test]
    fn sampled_ladder_reports_both_caps() {
        let t = sampled_ladder(&StepLaw::srw(), LadderKind::StrictAscending, 2000, 100, 3);
        let LadderDist::Sampled { censored_fraction, censored_fraction_2cap, .. } = t.dist else { panic!() };
        assert!(censored_fraction >= censored_fraction_2cap);
        assert!(censored_fraction > 0.0 && censored_fraction < 0.2);
        assert!((t.mean_abs - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kernel_exit_matches_lattice_scale() {
        // Survival decays and the fit is log-linear.
        let f = exit_tail_fit(&StepLaw::unif(), 3.0, 0.0, &[20, 40, 60, 80], 300).unwrap();
        assert!(f.beta > 0.0 && f.r2 > 0.999);
    }
}
