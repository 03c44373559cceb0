//! Exact computations for bounded-support lattice walks.

pub(crate) mod banded;
mod dp;

pub(crate) use banded::first_entry;
pub use dp::Kill;
pub(crate) use dp::{backward, forward, forward_exact};

use crate::error::{Error, Result};
use crate::sets::{AvoidSet, LatticeSet, Model, Region};
use crate::walk_core::{LatticeLaw, StepLaw, Walk};
use num_rational::BigRational;
use serde::Serialize;
use std::f64::consts::PI;

/// Largest horizon accepted by the survival recursions.
pub const DP_LIMIT: usize = 1 << 14;

/// Largest horizon accepted by the rational recursion.
pub const EXACT_LIMIT: usize = 512;

pub(crate) fn lattice_model(law: &StepLaw, set: &AvoidSet) -> Result<(LatticeLaw, LatticeSet)> {
    match Model::new(law, set)? {
        Model::Lattice(w, b) => Ok((w, b)),
        Model::Real(..) => Err(Error::Unsupported(format!(
            "exact recursions need a lattice law, got {}",
            law.name()
        ))),
    }
}

fn check_horizon(n: usize, limit: usize) -> Result<()> {
    if n > limit {
        Err(Error::Unsupported(format!("horizon {n} exceeds the limit {limit}")))
    } else {
        Ok(())
    }
}

/// Survival probabilities and hit law from one start.
#[derive(Clone, Debug, Serialize)]
pub struct DpResult {
    pub law: String,
    pub set: String,
    pub x0: f64,
    pub n: usize,
    /// `q_k = P_x(τ_B > k)` for `k = 0..=n`.
    pub q: Vec<f64>,
    /// `P_x(S_{τ_B} = z, τ_B ≤ n)` in real coordinates.
    pub hit_pmf: Vec<(f64, f64)>,
    /// `q_n`, mass not yet absorbed.
    pub censor_mass: f64,
    /// Estimate of `E_x S_{τ_B}`: absorbed part plus the censored mass placed
    /// at the midpoint of `Conv(B)`.
    pub mean_hit: f64,
    /// Range of `E_x S_{τ_B}` over all placements of the censored mass in `Conv(B)`.
    pub mean_hit_bounds: (f64, f64),
    /// Widest occupied window, real coordinates.
    pub window: (f64, f64),
    /// Largest mass-conservation defect over all steps.
    pub mass_error: f64,
}

impl DpResult {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,q_k\n");
        for (k, q) in self.q.iter().enumerate() {
            s.push_str(&format!("{k},{q:e}\n"));
        }
        s
    }
}

/// `P_x(τ_B > k)` for `k ≤ n` by pushing the killed law forward. Costs
/// `O(n² · |support| · max_step)` time and `O(n · max_step)` memory.
pub fn dp_survival(law: &StepLaw, set: &AvoidSet, x: f64, n: usize) -> Result<DpResult> {
    check_horizon(n, DP_LIMIT)?;
    let (w, b) = lattice_model(law, set)?;
    let xs = w.site_of(x)?;
    let f = forward(&w, &Kill::Set(b.clone()), xs, n, true);
    let lam = w.lambda();
    let hit_pmf: Vec<(f64, f64)> = f.hits.iter().map(|(&z, &p)| (z as f64 * lam, p)).collect();
    let absorbed: f64 = hit_pmf.iter().map(|(z, p)| z * p).sum();
    let qn = f.q[n];
    let (l, r) = (b.lo() as f64 * lam, b.hi() as f64 * lam);
    Ok(DpResult {
        law: law.spec_string(),
        set: set.spec_string(),
        x0: x,
        n,
        censor_mass: qn,
        mean_hit: absorbed + qn * 0.5 * (l + r),
        mean_hit_bounds: (absorbed + qn * l, absorbed + qn * r),
        window: (f.window.0 as f64 * lam, f.window.1 as f64 * lam),
        mass_error: f.mass_error,
        hit_pmf,
        q: f.q,
    })
}

/// Rational survival probabilities, for golden values.
#[derive(Clone, Debug)]
pub struct ExactDp {
    pub q: Vec<BigRational>,
    pub hit_pmf: Vec<(f64, BigRational)>,
}

impl ExactDp {
    /// `q_k` rendered as `"p/q"`.
    pub fn q_strings(&self) -> Vec<String> {
        self.q.iter().map(|r| format!("{}/{}", r.numer(), r.denom())).collect()
    }
}

pub fn dp_survival_exact(law: &StepLaw, set: &AvoidSet, x: f64, n: usize) -> Result<ExactDp> {
    check_horizon(n, EXACT_LIMIT)?;
    let (w, b) = lattice_model(law, set)?;
    let f = forward_exact(&w, &Kill::Set(b), w.site_of(x)?, n, true);
    let lam = w.lambda();
    Ok(ExactDp {
        q: f.q,
        hit_pmf: f.hits.into_iter().map(|(z, p)| (z as f64 * lam, p)).collect(),
    })
}

/// Law of `S_{τ_B}` from a linear solve on a finite window.
#[derive(Clone, Debug, Serialize)]
pub struct HitStats {
    pub pmf: Vec<(f64, f64)>,
    pub mean: f64,
    pub window: i64,
    /// Total variation between the solutions on windows `L` and `2L`.
    pub tv_doubling: f64,
}

fn hit_solve(w: &LatticeLaw, b: &LatticeSet, x: i64, window: i64) -> Vec<f64> {
    let lo = b.lo().min(x) - window;
    let hi = b.hi().max(x) + window;
    let sites = b.sites().to_vec();
    let absorb = |t: i64| -> Option<usize> { sites.binary_search(&t).ok() };
    let phi = first_entry(w, lo, hi, &absorb, sites.len());
    let row = (x - lo) as usize * sites.len();
    phi[row..row + sites.len()].to_vec()
}

/// Law of `S_{τ_B}` from `x`, solved on `[l − L, r + L]` (site units) with
/// the far field copied from the window edge, and checked against `2L`.
pub fn dp_hit_stats(law: &StepLaw, set: &AvoidSet, x: f64, window: i64) -> Result<HitStats> {
    let (w, b) = lattice_model(law, set)?;
    let xs = w.site_of(x)?;
    if window < 10 * w.max_step() {
        return Err(Error::Domain(format!("window {window} below 10·max_step")));
    }
    let p1 = hit_solve(&w, &b, xs, window);
    let p2 = hit_solve(&w, &b, xs, 2 * window);
    let tv = 0.5 * p1.iter().zip(&p2).map(|(a, c)| (a - c).abs()).sum::<f64>();
    let lam = w.lambda();
    let pmf: Vec<(f64, f64)> = b
        .sites()
        .iter()
        .zip(&p2)
        .map(|(&z, &p)| (z as f64 * lam, p))
        .collect();
    let mean = pmf.iter().map(|(z, p)| z * p).sum();
    Ok(HitStats { pmf, mean, window, tv_doubling: tv })
}

/// Table of `σ·√(πn/2)·q_n(x)` along a grid of horizons.
#[derive(Clone, Debug, Serialize)]
pub struct VExtrapolation {
    pub rows: Vec<(usize, f64)>,
    /// Value at the largest horizon.
    pub value: f64,
    /// `|f_last − f_previous|`.
    pub error: f64,
    /// Successive differences shrink in absolute value.
    pub trend_ok: bool,
}

fn tail_constant(q: f64, sigma: f64, n: usize) -> f64 {
    sigma * (PI * n as f64 / 2.0).sqrt() * q
}

pub(crate) fn extrapolation_from(values: Vec<(usize, f64)>) -> VExtrapolation {
    let diffs: Vec<f64> = values.windows(2).map(|p| (p[1].1 - p[0].1).abs()).collect();
    let trend_ok = diffs.windows(2).all(|d| d[1] <= d[0] * (1.0 + 1e-9) + 1e-15);
    let value = values.last().map(|v| v.1).unwrap_or(f64::NAN);
    let error = diffs.last().copied().unwrap_or(f64::NAN);
    VExtrapolation { rows: values, value, error, trend_ok }
}

pub fn extrapolate_v(law: &StepLaw, set: &AvoidSet, x: f64, n_grid: &[usize]) -> Result<VExtrapolation> {
    if n_grid.len() < 3 || n_grid.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::Domain("n_grid must be increasing with at least 3 points".into()));
    }
    let n = *n_grid.last().unwrap();
    let dp = dp_survival(law, set, x, n)?;
    let sigma = law.sigma();
    let rows = n_grid.iter().map(|&k| (k, tail_constant(dp.q[k], sigma, k))).collect();
    Ok(extrapolation_from(rows))
}

/// `V̂(x)` on a range of starts from one backward recursion, with error bars
/// `|f_N − f_{N/2}|`.
#[derive(Clone, Debug, Serialize)]
pub struct VOracleTable {
    pub xs: Vec<f64>,
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
    pub n: usize,
}

pub fn v_oracle_table(law: &StepLaw, set: &AvoidSet, x_lo: f64, x_hi: f64, n: usize) -> Result<VOracleTable> {
    check_horizon(n, DP_LIMIT)?;
    let (w, b) = lattice_model(law, set)?;
    let (lo, hi) = (w.site_of(x_lo)?, w.site_of(x_hi)?);
    let tab = backward(&w, &Kill::Set(b), lo, hi, &[n / 2, n]);
    let sigma = law.sigma();
    let f_half: Vec<f64> = tab[0].iter().map(|&q| tail_constant(q, sigma, n / 2)).collect();
    let values: Vec<f64> = tab[1].iter().map(|&q| tail_constant(q, sigma, n)).collect();
    let errors = values.iter().zip(&f_half).map(|(a, c)| (a - c).abs()).collect();
    Ok(VOracleTable {
        xs: (lo..=hi).map(|s| s as f64 * w.lambda()).collect(),
        values,
        errors,
        n,
    })
}

/// Law of `S_n` given `τ_B > n`, real coordinates.
pub fn endpoint_law(law: &StepLaw, set: &AvoidSet, x: f64, n: usize) -> Result<Vec<(f64, f64)>> {
    check_horizon(n, DP_LIMIT)?;
    let (w, b) = lattice_model(law, set)?;
    let f = forward(&w, &Kill::Set(b), w.site_of(x)?, n, true);
    let q = f.q[n];
    let lam = w.lambda();
    Ok(f.last.iter().map(|&(y, m)| (y as f64 * lam, m / q)).collect())
}

/// `P_y(τ_B > k)` for all `y` in a range and `k` on an increasing grid,
/// indexed `[k][y − y_lo]`.
pub fn survival_table(law: &StepLaw, set: &AvoidSet, x_lo: f64, x_hi: f64, grid: &[usize]) -> Result<Vec<Vec<f64>>> {
    check_horizon(grid.iter().copied().max().unwrap_or(0), DP_LIMIT)?;
    let (w, b) = lattice_model(law, set)?;
    Ok(backward(&w, &Kill::Set(b), w.site_of(x_lo)?, w.site_of(x_hi)?, grid))
}

/// `P_y(S_j ≥ 0, j ≤ k)` for sites `y ∈ [y_lo, y_hi]` and `k` in an
/// increasing `grid`, indexed `[k][y − y_lo]`.
pub fn half_line_survival(law: &LatticeLaw, y_lo: i64, y_hi: i64, grid: &[usize]) -> Result<Vec<Vec<f64>>> {
    check_horizon(grid.iter().copied().max().unwrap_or(0), DP_LIMIT)?;
    Ok(backward(law, &Kill::Below(0), y_lo, y_hi, grid))
}

/// Kesten–Spitzer ratio sequence and the comparison of `σ²ĝ` with `V̂`.
#[derive(Clone, Debug, Serialize)]
pub struct RatioCheck {
    /// `(n, P_x(τ̃_B > n) / P_0(τ̃_{0} > n))`.
    pub rows: Vec<(usize, f64)>,
    pub g_hat: f64,
    /// `σ²ĝ` in real units.
    pub sigma2_g: f64,
    /// `V̂` at the largest horizon, absent for `x ∈ B`.
    pub v_hat: Option<f64>,
    pub rel_diff: Option<f64>,
}

pub fn ratio_limit_check(law: &StepLaw, set: &AvoidSet, x: f64, n_grid: &[usize]) -> Result<RatioCheck> {
    let n = n_grid.iter().copied().max().unwrap_or(0);
    check_horizon(n, DP_LIMIT)?;
    let (w, b) = lattice_model(law, set)?;
    let xs = w.site_of(x)?;
    let num = forward(&w, &Kill::Set(b.clone()), xs, n, false);
    let zero = LatticeSet::from_sites(vec![0])?;
    let den = forward(&w, &Kill::Set(zero), 0, n, false);
    let rows: Vec<(usize, f64)> = n_grid.iter().map(|&k| (k, num.q[k] / den.q[k])).collect();
    let g_hat = rows.last().map(|r| r.1).unwrap_or(f64::NAN);
    // In site units V = σ_site²·g, and V scales by λ into real units.
    let lam = w.lambda();
    let sigma2_g = w.sigma_site().powi(2) * g_hat * lam;
    let v_hat = (!b.contains(xs)).then(|| tail_constant(num.q[n], law.sigma(), n));
    let rel_diff = v_hat.map(|v| (sigma2_g - v).abs() / v);
    Ok(RatioCheck { rows, g_hat, sigma2_g, v_hat, rel_diff })
}

/// `P_x(S_k ∈ [a, b] for all k ≤ n)` for `n` in `grid`, with `a`, `b`, `x` real.
pub fn strip_survival(law: &StepLaw, a: f64, b: f64, x: f64, grid: &[usize]) -> Result<Vec<f64>> {
    let n = grid.iter().copied().max().unwrap_or(0);
    check_horizon(n, DP_LIMIT)?;
    let w = law.as_lattice()?;
    let lam = w.lambda();
    let (sa, sb) = ((a / lam - 1e-9).ceil() as i64, (b / lam + 1e-9).floor() as i64);
    let f = forward(w, &Kill::Outside(sa, sb), w.site_of(x)?, n, true);
    Ok(grid.iter().map(|&k| f.q[k]).collect())
}

/// Law of the next mark `H'_{i+1}` given `H'_i = m`, for every possible mark.
/// Rows list `(z, p)` including absorptions in `B`. One-sided excursions are
/// solved on `window` extra sites.
struct MarkKernel {
    lo: i64,
    rows: Vec<Vec<(i64, f64)>>,
}

impl MarkKernel {
    fn new(w: &LatticeLaw, b: &LatticeSet, xs: i64, window: i64) -> Self {
        let (l, r) = (b.lo(), b.hi());
        let (up, down) = (w.max_up(), w.max_down());
        // All marks after the first lie in [l − down, r + up].
        let lo = (l - down).min(xs);
        let hi = (r + up).max(xs);
        let plus = first_entry(
            w,
            r + 1,
            hi.max(r + 1) + window,
            &|t| (t <= r).then(|| (t - (r + 1 - down)) as usize),
            down as usize,
        );
        let minus_lo = lo.min(l - 1) - window;
        let minus = first_entry(w, minus_lo, l - 1, &|t| (t >= l).then(|| (t - l) as usize), up as usize);
        let cols = (r - l + up + down + 1) as usize;
        let hull = first_entry(
            w,
            l,
            r,
            &|t| (t < l || t > r || b.contains(t)).then(|| (t - (l - down)) as usize),
            cols,
        );
        let mut rows = Vec::with_capacity((hi - lo + 1) as usize);
        for m in lo..=hi {
            let mut row = Vec::new();
            if b.contains(m) {
                rows.push(row);
                continue;
            }
            if m > r {
                let i = (m - (r + 1)) as usize * down as usize;
                for c in 0..down as usize {
                    row.push((r + 1 - down + c as i64, plus[i + c]));
                }
            } else if m < l {
                let i = (m - minus_lo) as usize * up as usize;
                for c in 0..up as usize {
                    row.push((l + c as i64, minus[i + c]));
                }
            } else {
                let i = (m - l) as usize * cols;
                for c in 0..cols {
                    let z = l - down + c as i64;
                    // Moves inside the hull are not epochs; only exits and hits remain.
                    if z < l || z > r || b.contains(z) {
                        row.push((z, hull[i + c]));
                    }
                }
            }
            row.retain(|e| e.1 != 0.0);
            rows.push(row);
        }
        Self { lo, rows }
    }

    fn size(&self) -> usize {
        self.rows.len()
    }
}

/// `P_x(τ_B > T'_j)` for `j = 0..=k`, from the exact law of the next jump
/// epoch given the current mark. Windows of `window` sites stand in for the
/// unbounded excursions beyond the edges of `B`.
pub fn epoch_survival(law: &StepLaw, set: &AvoidSet, x: f64, k: usize, window: i64) -> Result<Vec<f64>> {
    let (w, b) = lattice_model(law, set)?;
    let xs = w.site_of(x)?;
    if b.contains(xs) {
        return Ok(vec![0.0; k + 1]);
    }
    let kernel = MarkKernel::new(&w, &b, xs, window);
    let mut dist = vec![0.0; kernel.size()];
    dist[(xs - kernel.lo) as usize] = 1.0;
    let mut out = vec![1.0];
    for _ in 0..k {
        let mut nd = vec![0.0; kernel.size()];
        for (m, &p) in dist.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for &(z, t) in &kernel.rows[m] {
                if !b.contains(z) {
                    nd[(z - kernel.lo) as usize] += p * t;
                }
            }
        }
        out.push(nd.iter().sum());
        dist = nd;
    }
    Ok(out)
}

/// `V_B(x)` from the mark chain, with the change under a doubled window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VExact {
    pub value: f64,
    pub window_error: f64,
}

/// Solves `V(m) = Σ_z K(m, z)·(|z − m|·1{m ∉ Conv(B)} + V(z))` over the
/// marks, with `V = 0` on `B`.
pub fn v_exact(law: &StepLaw, set: &AvoidSet, x: f64, window: i64) -> Result<VExact> {
    let (w, b) = lattice_model(law, set)?;
    let xs = w.site_of(x)?;
    if b.contains(xs) {
        return Ok(VExact { value: 0.0, window_error: 0.0 });
    }
    let solve = |win: i64| -> Result<f64> {
        let k = MarkKernel::new(&w, &b, xs, win);
        let n = k.size();
        let mut a = vec![vec![0.0; n + 1]; n];
        for (i, row) in k.rows.iter().enumerate() {
            let m = k.lo + i as i64;
            a[i][i] += 1.0;
            if b.contains(m) {
                continue;
            }
            let outside = !b.in_hull(m);
            for &(z, p) in row {
                if outside {
                    a[i][n] += p * (z - m).abs() as f64;
                }
                if !b.contains(z) {
                    a[i][(z - k.lo) as usize] -= p;
                }
            }
        }
        let v = dense_solve(a).ok_or_else(|| Error::Domain("mark chain is not transient".into()))?;
        Ok(v[(xs - k.lo) as usize] * w.lambda())
    };
    let value = solve(window)?;
    let wide = solve(2 * window)?;
    Ok(VExact { value: wide, window_error: (wide - value).abs() })
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
fn dense_solve(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let n = a.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-14 {
            return None;
        }
        a.swap(c, p);
        for i in c + 1..n {
            let f = a[i][c] / a[c][c];
            if f != 0.0 {
                for j in c..=n {
                    a[i][j] -= f * a[c][j];
                }
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
        x[i] = (a[i][n] - s) / a[i][i];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(s: &str) -> AvoidSet {
        AvoidSet::parse(s).unwrap()
    }

    #[test]
    fn srw_two_steps_exact() {
        let e = dp_survival_exact(&StepLaw::srw(), &set("points{0}"), 1.0, 2).unwrap();
        assert_eq!(e.q_strings(), vec!["1/1", "1/2", "1/2"]);
    }

    #[test]
    fn start_in_set_never_survives() {
        let d = dp_survival(&StepLaw::tent(), &set("points{0}"), 0.0, 10).unwrap();
        assert!(d.q.iter().all(|&q| q == 0.0));
        assert_eq!(d.hit_pmf, vec![(0.0, 1.0)]);
    }

    #[test]
    fn continuous_law_unsupported() {
        let e = dp_survival(&StepLaw::gauss(), &set("interval(-1,1,open)"), 2.0, 10).unwrap_err();
        assert!(matches!(e, Error::Unsupported(_)));
    }

    #[test]
    fn singleton_hit_law() {
        let d = dp_survival(&StepLaw::tent(), &set("points{0}"), 1.0, 300).unwrap();
        assert_eq!(d.hit_pmf.len(), 1);
        assert_eq!(d.mean_hit, 0.0);
        let h = dp_hit_stats(&StepLaw::srw(), &set("points{0}"), 1.0, 50).unwrap();
        assert!((h.pmf[0].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hit_law_forward_vs_solve() {
        let law = StepLaw::skew();
        let b = set("points{-1,1}");
        let h = dp_hit_stats(&law, &b, 0.0, 400).unwrap();
        let d = dp_survival(&law, &b, 0.0, DP_LIMIT).unwrap();
        assert!(h.tv_doubling < 1e-3);
        assert!(d.mean_hit_bounds.0 <= h.mean + 1e-6 && h.mean <= d.mean_hit_bounds.1 + 1e-6);
        assert!(h.pmf.iter().all(|&(_, p)| p > 0.05));
    }

    #[test]
    fn skew_epochs() {
        let p = epoch_survival(&StepLaw::skew(), &set("points{-1,1}"), 0.0, 3, 400).unwrap();
        assert!((p[1] - 1.0).abs() < 1e-12);
        assert!(p[3] < 0.99);
    }

    #[test]
    fn mark_chain_v_closed_forms() {
        let v = v_exact(&StepLaw::srw(), &set("interval(-3,3,open)"), 5.0, 50).unwrap();
        assert!((v.value - 3.0).abs() < 1e-12);
        let v = v_exact(&StepLaw::srw(), &set("interval(-3,3,open)"), -4.0, 50).unwrap();
        assert!((v.value - 2.0).abs() < 1e-12);
        let v = v_exact(&StepLaw::srw(), &set("points{0}"), 1.0, 50).unwrap();
        assert!((v.value - 1.0).abs() < 1e-12);
        assert_eq!(v_exact(&StepLaw::srw(), &set("points{0}"), 0.0, 50).unwrap().value, 0.0);
    }

    #[test]
    fn mark_chain_v_matches_extrapolation() {
        let law = StepLaw::tent();
        let v = v_exact(&law, &set("points{0}"), 1.0, 200).unwrap();
        assert!(v.window_error < 1e-10);
        let e = extrapolate_v(&law, &set("points{0}"), 1.0, &[2048, 4096, 8192]).unwrap();
        assert!((v.value - e.value).abs() < 3.0 * e.error, "{} {} {}", v.value, e.value, e.error);
    }
}
