//! Forward and backward survival recursions on the lattice.

use crate::sets::{LatticeSet, Region};
use crate::walk_core::LatticeLaw;
use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Zero};
use std::collections::BTreeMap;

/// Sites at which the walk is killed.
#[derive(Clone, Debug)]
pub enum Kill {
    /// A bounded set.
    Set(LatticeSet),
    /// Everything outside `[a, b]`.
    Outside(i64, i64),
    /// Everything below `a`.
    Below(i64),
}

/// Masses below this are flushed to zero to keep the recursion out of
/// subnormal arithmetic; the flushed total is tracked.
const TINY: f64 = 1e-300;

impl Kill {
    #[inline]
    pub fn killed(&self, y: i64) -> bool {
        match self {
            Kill::Set(s) => s.contains(y),
            Kill::Outside(a, b) => y < *a || y > *b,
            Kill::Below(a) => y < *a,
        }
    }

    /// Sites whose survival over `k` more steps is neither 0 (killed) nor
    /// certainly 1 (killing set out of reach).
    fn relevant(&self, k: u64, up: i64, down: i64) -> (i64, i64) {
        let k = k as i64;
        match self {
            Kill::Set(s) => (s.lo() - k * up, s.hi() + k * down),
            Kill::Outside(a, b) => (*a, *b),
            Kill::Below(a) => (*a, *a + k * down - 1),
        }
    }

    fn for_each_killed_in(&self, lo: i64, hi: i64, mut f: impl FnMut(i64)) {
        match self {
            Kill::Set(s) => s.sites().iter().filter(|&&y| y >= lo && y <= hi).for_each(|&y| f(y)),
            Kill::Outside(a, b) => {
                (lo..(*a).min(hi + 1)).for_each(&mut f);
                ((*b + 1).max(lo)..=hi).for_each(f);
            }
            Kill::Below(a) => (lo..(*a).min(hi + 1)).for_each(f),
        }
    }
}

pub(crate) struct Forward {
    /// `q_k = P_x(no kill at times ≤ k)`, `k = 0..=n`.
    pub q: Vec<f64>,
    /// Kill positions with their masses.
    pub hits: BTreeMap<i64, f64>,
    /// Largest `|1 − q_k − hit mass − flushed mass|` seen.
    pub mass_error: f64,
    /// Widest occupied window.
    pub window: (i64, i64),
    /// Surviving mass at time `n`, as `(site, mass)`.
    pub last: Vec<(i64, f64)>,
}

/// Pushes the law of the killed walk forward `n` steps from `x`. With
/// `kill_at_start = false` a start inside the killing set survives time 0,
/// which gives `τ̃` instead of `τ`.
pub(crate) fn forward(law: &LatticeLaw, kill: &Kill, x: i64, n: usize, kill_at_start: bool) -> Forward {
    let up = law.max_up();
    let down = law.max_down();
    let base = x - n as i64 * down;
    let size = (n as i64 * (up + down) + 1) as usize;
    let mut cur = vec![0.0f64; size];
    let mut nxt = vec![0.0f64; size];
    let mut hits = BTreeMap::new();
    let mut q = Vec::with_capacity(n + 1);
    let steps: Vec<(i64, f64)> = law.steps().iter().copied().zip(law.probs().iter().copied()).collect();
    let mut lo = x;
    let mut hi = x;
    let mut window = (x, x);
    cur[(x - base) as usize] = 1.0;
    if kill_at_start && kill.killed(x) {
        hits.insert(x, 1.0);
        q.push(0.0);
        q.resize(n + 1, 0.0);
        return Forward { q, hits, mass_error: 0.0, window, last: Vec::new() };
    }
    q.push(1.0);
    let mut hit_mass = 0.0;
    let mut flushed = 0.0;
    let mut mass_error: f64 = 0.0;
    let mut alive = true;
    for _ in 1..=n {
        if !alive {
            q.push(0.0);
            continue;
        }
        let nlo = lo - down;
        let nhi = hi + up;
        nxt[(nlo - base) as usize..=(nhi - base) as usize].fill(0.0);
        for y in lo..=hi {
            let m = cur[(y - base) as usize];
            if m == 0.0 {
                continue;
            }
            for &(s, p) in &steps {
                nxt[(y + s - base) as usize] += m * p;
            }
        }
        kill.for_each_killed_in(nlo, nhi, |y| {
            let i = (y - base) as usize;
            let m = nxt[i];
            if m != 0.0 {
                *hits.entry(y).or_insert(0.0) += m;
                hit_mass += m;
                nxt[i] = 0.0;
            }
        });
        lo = nlo;
        hi = nhi;
        while lo <= hi && nxt[(lo - base) as usize] < TINY {
            flushed += nxt[(lo - base) as usize];
            nxt[(lo - base) as usize] = 0.0;
            lo += 1;
        }
        while hi >= lo && nxt[(hi - base) as usize] < TINY {
            flushed += nxt[(hi - base) as usize];
            nxt[(hi - base) as usize] = 0.0;
            hi -= 1;
        }
        let surv: f64 = if lo <= hi {
            nxt[(lo - base) as usize..=(hi - base) as usize].iter().sum()
        } else {
            alive = false;
            0.0
        };
        window = (window.0.min(lo), window.1.max(hi));
        mass_error = mass_error.max((1.0 - surv - hit_mass - flushed).abs());
        q.push(surv);
        std::mem::swap(&mut cur, &mut nxt);
    }
    let last = if alive {
        (lo..=hi)
            .map(|y| (y, cur[(y - base) as usize]))
            .filter(|&(_, m)| m != 0.0)
            .collect()
    } else {
        Vec::new()
    };
    Forward { q, hits, mass_error, window, last }
}

/// Exact forward recursion: path weights are integers over `denom^k`.
pub(crate) struct ForwardExact {
    pub q: Vec<BigRational>,
    pub hits: BTreeMap<i64, BigRational>,
}

pub(crate) fn forward_exact(
    law: &LatticeLaw,
    kill: &Kill,
    x: i64,
    n: usize,
    kill_at_start: bool,
) -> ForwardExact {
    let up = law.max_up();
    let down = law.max_down();
    let base = x - n as i64 * down;
    let size = (n as i64 * (up + down) + 1) as usize;
    let d = BigUint::from(law.denom());
    let steps: Vec<(i64, BigUint)> = law
        .steps()
        .iter()
        .zip(law.weights())
        .map(|(&s, &w)| (s, BigUint::from(w)))
        .collect();
    let mut cur = vec![BigUint::zero(); size];
    let mut q = vec![BigRational::one()];
    let mut hits: BTreeMap<i64, BigRational> = BTreeMap::new();
    if kill_at_start && kill.killed(x) {
        hits.insert(x, BigRational::one());
        return ForwardExact { q: vec![BigRational::zero(); n + 1], hits };
    }
    cur[(x - base) as usize] = BigUint::one();
    let mut scale = BigUint::one();
    let (mut lo, mut hi) = (x, x);
    for _ in 1..=n {
        let (nlo, nhi) = (lo - down, hi + up);
        let mut nxt = vec![BigUint::zero(); (nhi - nlo + 1) as usize];
        for y in lo..=hi {
            let m = &cur[(y - base) as usize];
            if m.is_zero() {
                continue;
            }
            for (s, w) in &steps {
                nxt[(y + s - nlo) as usize] += m * w;
            }
        }
        scale *= &d;
        kill.for_each_killed_in(nlo, nhi, |y| {
            let m = std::mem::take(&mut nxt[(y - nlo) as usize]);
            if !m.is_zero() {
                let r = BigRational::new(m.into(), scale.clone().into());
                *hits.entry(y).or_insert_with(BigRational::zero) += r;
            }
        });
        let total: BigUint = nxt.iter().sum();
        q.push(BigRational::new(total.into(), scale.clone().into()));
        cur.iter_mut().for_each(|c| *c = BigUint::zero());
        for (i, v) in nxt.into_iter().enumerate() {
            cur[(nlo - base) as usize + i] = v;
        }
        lo = nlo;
        hi = nhi;
    }
    ForwardExact { q, hits }
}

/// `q_k(y)` for all `y ∈ [x_lo, x_hi]` and each `k` in `grid` (ascending).
pub(crate) fn backward(law: &LatticeLaw, kill: &Kill, x_lo: i64, x_hi: i64, grid: &[usize]) -> Vec<Vec<f64>> {
    let up = law.max_up();
    let down = law.max_down();
    let n = grid.last().copied().unwrap_or(0);
    let steps: Vec<(i64, f64)> = law.steps().iter().copied().zip(law.probs().iter().copied()).collect();
    // Window of sites needed for q_k when the final horizon is n.
    let window = |k: usize| -> (i64, i64) {
        let rem = (n - k) as i64;
        let (rlo, rhi) = kill.relevant(k as u64, up, down);
        ((x_lo - rem * down).max(rlo), (x_hi + rem * up).min(rhi))
    };
    let value = |tab: &[f64], (wlo, whi): (i64, i64), y: i64| -> f64 {
        if kill.killed(y) {
            0.0
        } else if y < wlo || y > whi {
            1.0
        } else {
            tab[(y - wlo) as usize]
        }
    };
    let mut out = Vec::with_capacity(grid.len());
    let mut gi = 0;
    let mut w_prev = window(0);
    let mut prev: Vec<f64> = (w_prev.0..=w_prev.1.max(w_prev.0 - 1))
        .map(|y| if kill.killed(y) { 0.0 } else { 1.0 })
        .collect();
    let emit = |tab: &[f64], w: (i64, i64)| -> Vec<f64> { (x_lo..=x_hi).map(|y| value(tab, w, y)).collect() };
    while gi < grid.len() && grid[gi] == 0 {
        out.push(emit(&prev, w_prev));
        gi += 1;
    }
    for k in 1..=n {
        let w = window(k);
        // Outside the relevant range a site is either killed or out of reach.
        let cur: Vec<f64> = (w.0..=w.1.max(w.0 - 1))
            .map(|y| {
                if kill.killed(y) {
                    0.0
                } else if y - down >= w_prev.0 && y + up <= w_prev.1 {
                    let o = y - w_prev.0;
                    steps.iter().map(|&(s, p)| p * prev[(o + s) as usize]).sum()
                } else {
                    steps.iter().map(|&(s, p)| p * value(&prev, w_prev, y + s)).sum()
                }
            })
            .collect();
        prev = cur;
        w_prev = w;
        while gi < grid.len() && grid[gi] == k {
            out.push(emit(&prev, w_prev));
            gi += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walk_core::StepLaw;

    fn law(s: &str) -> LatticeLaw {
        StepLaw::parse(s).unwrap().as_lattice().unwrap().clone()
    }

    #[test]
    fn backward_matches_forward() {
        let l = law("tent");
        let kill = Kill::Set(LatticeSet::from_sites(vec![-1, 0, 2]).unwrap());
        let grid = [0, 1, 7, 40];
        let tab = backward(&l, &kill, -9, 9, &grid);
        for x in -9..=9 {
            let f = forward(&l, &kill, x, 40, true);
            for (g, row) in grid.iter().zip(&tab) {
                assert!((f.q[*g] - row[(x + 9) as usize]).abs() < 1e-13, "x={x} k={g}");
            }
        }
    }

    #[test]
    fn exact_agrees_with_float() {
        let l = law("skew");
        let kill = Kill::Set(LatticeSet::from_sites(vec![-1, 1]).unwrap());
        let e = forward_exact(&l, &kill, 4, 60, true);
        let f = forward(&l, &kill, 4, 60, true);
        for k in 0..=60 {
            let v = num_traits::ToPrimitive::to_f64(&e.q[k]).unwrap();
            assert!((v - f.q[k]).abs() < 1e-14);
        }
        let total: BigRational = e.hits.values().cloned().sum::<BigRational>() + e.q[60].clone();
        assert_eq!(total, BigRational::one());
    }

    #[test]
    fn half_line_and_strip_kills() {
        let l = law("srw");
        // SRW from 0 killed below 0: P(S_1 ≥ 0, S_2 ≥ 0) = 1/2.
        let tab = backward(&l, &Kill::Below(0), 0, 0, &[2]);
        assert!((tab[0][0] - 0.5).abs() < 1e-15);
        let f = forward(&l, &Kill::Outside(-1, 1), 0, 2, true);
        assert!((f.q[2] - 0.5).abs() < 1e-15);
    }
}
