use super::set::{Model, Region, HULL, MINUS, PLUS, SET};
use crate::error::Result;
use crate::walk_core::{Path, Site, Walk};
use rand::RngCore;
use serde::{Deserialize, Serialize};

/// Epochs `T'_k` and marks `H'_k` of a trajectory, in real units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpChain {
    pub x0: f64,
    /// `T'_0 = 0, T'_1, ...` up to `min(τ_B, horizon)`.
    pub epochs: Vec<u64>,
    /// `H'_k`, aligned with `epochs`.
    pub marks: Vec<f64>,
    /// Whether `H'_k` lies outside `Conv(B)`.
    pub outside_hull: Vec<bool>,
    /// `τ_B`, or `None` if the trajectory was censored.
    pub tau: Option<u64>,
    /// `S_{τ_B}` when uncensored.
    pub hit: Option<f64>,
    /// Number of steps observed.
    pub horizon: u64,
}

#[inline]
pub(crate) fn is_epoch(prev: u8, next: u8) -> bool {
    (prev & HULL != 0 && next & (PLUS | MINUS) != 0)
        || (prev & PLUS != 0 && next & PLUS == 0)
        || (prev & MINUS != 0 && next & MINUS == 0)
}

impl JumpChain {
    fn start(x0: f64, zone: u8) -> Self {
        Self {
            x0,
            epochs: vec![0],
            marks: vec![x0],
            outside_hull: vec![zone & HULL == 0],
            tau: None,
            hit: None,
            horizon: 0,
        }
    }

    pub fn censored(&self) -> bool {
        self.tau.is_none()
    }

    /// `κ' = max{k: T'_k ≤ τ_B}`; undefined when censored.
    pub fn kappa(&self) -> Option<usize> {
        self.tau.map(|_| self.epochs.len() - 1)
    }

    /// `ν_n = max{k: T'_k ≤ n}`, for `n ≤ horizon`.
    pub fn nu(&self, n: u64) -> usize {
        self.epochs.partition_point(|&t| t <= n) - 1
    }

    /// `T'_{ν_n}`.
    pub fn last_epoch_by(&self, n: u64) -> u64 {
        self.epochs[self.nu(n)]
    }

    /// `|H'_i − H'_{i−1}|·1{H'_{i−1} ∉ Conv(B)}`, zero past the last recorded epoch.
    pub fn term(&self, i: usize) -> f64 {
        if i == 0 || i >= self.marks.len() {
            return 0.0;
        }
        if self.outside_hull[i - 1] {
            (self.marks[i] - self.marks[i - 1]).abs()
        } else {
            0.0
        }
    }

    /// Partial sum of [`Self::term`] over epochs `T'_i ≤ t`.
    pub fn v_sum_upto(&self, t: u64) -> f64 {
        let last = self.epochs.partition_point(|&e| e <= t);
        (1..last).map(|i| self.term(i)).sum()
    }

    /// Sum over all recorded epochs.
    pub fn v_sum(&self) -> f64 {
        (1..self.marks.len()).map(|i| self.term(i)).sum()
    }

    /// Whether the walk was still outside `B` at `T'_k` (false if `T'_k` was
    /// never reached or `H'_k ∈ B`).
    pub fn survives_epoch(&self, k: usize) -> bool {
        k < self.epochs.len() && (self.tau.is_none() || self.tau.unwrap() > self.epochs[k])
    }
}

/// Streams the walk from `x` for at most `cap` steps, stopping at `τ_B` or
/// once `max_epochs` epochs after `T'_0` have been recorded.
/// `observe(k, S_k)` sees every simulated position.
#[inline]
pub fn simulate_observed<W, B, R, F>(
    walk: &W,
    set: &B,
    x: W::Site,
    cap: u64,
    max_epochs: usize,
    rng: &mut R,
    mut observe: F,
) -> JumpChain
where
    W: Walk,
    B: Region<W::Site>,
    R: RngCore + ?Sized,
    F: FnMut(u64, W::Site),
{
    let mut zone = set.zone(x);
    let mut chain = JumpChain::start(walk.real(x), zone);
    if zone & SET != 0 {
        chain.tau = Some(0);
        chain.hit = Some(walk.real(x));
        return chain;
    }
    let mut s = x;
    for k in 1..cap + 1 {
        s = s + walk.increment(rng);
        observe(k, s);
        let next = set.zone(s);
        // Zones rarely change; the second test covers an open edge `r`,
        // which is both in the hull and in `B₊`.
        if next != zone || next & HULL != 0 && next & (PLUS | MINUS) != 0 {
            if is_epoch(zone, next) {
                chain.epochs.push(k);
                chain.marks.push(walk.real(s));
                chain.outside_hull.push(next & HULL == 0);
            }
            if next & SET != 0 {
                chain.tau = Some(k);
                chain.hit = Some(walk.real(s));
                chain.horizon = k;
                return chain;
            }
            if chain.epochs.len() > max_epochs {
                chain.horizon = k;
                return chain;
            }
            zone = next;
        }
    }
    chain.horizon = cap;
    chain
}

/// Simulates until `τ_B` or `cap` steps, keeping only the jump chain.
pub fn simulate_capped<W, B, R>(walk: &W, set: &B, x: W::Site, cap: u64, rng: &mut R) -> JumpChain
where
    W: Walk,
    B: Region<W::Site>,
    R: RngCore + ?Sized,
{
    simulate_observed(walk, set, x, cap, usize::MAX, rng, |_, _| {})
}

/// Like [`simulate_capped`] but stops after `max_epochs` epochs.
pub fn simulate_epochs<W, B, R>(walk: &W, set: &B, x: W::Site, cap: u64, max_epochs: usize, rng: &mut R) -> JumpChain
where
    W: Walk,
    B: Region<W::Site>,
    R: RngCore + ?Sized,
{
    simulate_observed(walk, set, x, cap, max_epochs, rng, |_, _| {})
}

/// [`simulate_capped`] for a model and a real start.
pub fn simulate_capped_hit<R: RngCore + ?Sized>(
    model: &Model,
    x: f64,
    cap: u64,
    rng: &mut R,
) -> Result<JumpChain> {
    crate::with_model!(model, |w, b| Ok(simulate_capped(w, b, w.site_of(x)?, cap, rng)))
}

/// Jump chain of a stored path.
pub fn jump_decompose<W: Walk, B: Region<W::Site>>(walk: &W, set: &B, path: &Path<W::Site>) -> JumpChain {
    let mut zone = set.zone(path.x0);
    let mut chain = JumpChain::start(walk.real(path.x0), zone);
    if zone & SET != 0 {
        chain.tau = Some(0);
        chain.hit = Some(walk.real(path.x0));
        return chain;
    }
    for (i, &s) in path.positions.iter().enumerate() {
        let k = i as u64 + 1;
        let next = set.zone(s);
        if is_epoch(zone, next) {
            chain.epochs.push(k);
            chain.marks.push(walk.real(s));
            chain.outside_hull.push(next & HULL == 0);
        }
        if next & SET != 0 {
            chain.tau = Some(k);
            chain.hit = Some(walk.real(s));
            chain.horizon = k;
            return chain;
        }
        zone = next;
    }
    chain.horizon = path.len() as u64;
    chain
}

/// `τ̃_B = min{k ≥ 1: S_k ∈ B}` on a stored path.
pub fn first_return<S: Site, B: Region<S>>(set: &B, path: &Path<S>) -> Option<u64> {
    path.positions
        .iter()
        .position(|&s| set.contains(s))
        .map(|i| i as u64 + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sets::AvoidSet;
    use crate::walk_core::{derive_substream, StepLaw};

    fn lattice(law: StepLaw, set: &str) -> (crate::walk_core::LatticeLaw, crate::sets::LatticeSet) {
        match Model::new(&law, &AvoidSet::parse(set).unwrap()).unwrap() {
            Model::Lattice(w, b) => (w, b),
            _ => unreachable!(),
        }
    }

    #[test]
    fn single_crossing() {
        let (w, b) = lattice(StepLaw::srw(), "interval(-3,3,open)");
        let c = jump_decompose(&w, &b, &Path::new(5, vec![4, 3, 2]));
        assert_eq!(c.tau, Some(3));
        assert_eq!(c.hit, Some(2.0));
        assert_eq!(c.kappa(), Some(1));
        assert_eq!(c.marks, vec![5.0, 2.0]);
        assert_eq!(c.v_sum(), 3.0);
    }

    #[test]
    fn skew_hand_trace() {
        let (w, b) = lattice(StepLaw::skew(), "points{-1,1}");
        let c = jump_decompose(&w, &b, &Path::new(0, vec![2, -1]));
        assert_eq!(c.epochs, vec![0, 1, 2]);
        assert_eq!(c.marks, vec![0.0, 2.0, -1.0]);
        assert_eq!(c.tau, Some(2));
        assert_eq!(c.kappa(), Some(2));
        // The first increment starts inside the hull and does not count.
        assert_eq!(c.term(1), 0.0);
        assert_eq!(c.term(2), 3.0);
    }

    #[test]
    fn censored_path() {
        let (w, b) = lattice(StepLaw::srw(), "points{0}");
        let c = jump_decompose(&w, &b, &Path::new(3, vec![4, 5, 4]));
        assert!(c.censored());
        assert_eq!(c.kappa(), None);
        assert_eq!(c.nu(3), 0);
        assert_eq!(c.horizon, 3);
    }

    #[test]
    fn start_inside_set() {
        let (w, b) = lattice(StepLaw::tent(), "points{0}");
        let c = simulate_capped(&w, &b, 0, 100, &mut derive_substream(1, 1));
        assert_eq!(c.tau, Some(0));
        assert_eq!(c.epochs, vec![0]);
    }

    #[test]
    fn skew_first_epoch_never_in_set() {
        let (w, b) = lattice(StepLaw::skew(), "points{-1,1}");
        for i in 0..2000 {
            let c = simulate_capped(&w, &b, 0, 10_000, &mut derive_substream(4, i));
            assert!(c.survives_epoch(1) || c.epochs.len() < 2 && c.tau.is_none());
        }
    }
}
