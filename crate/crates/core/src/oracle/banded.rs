//! Banded linear solves for first-entry problems of bounded-step lattice walks.

use crate::walk_core::LatticeLaw;

/// Square banded matrix, row-major band storage.
pub(crate) struct Banded {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    a: Vec<f64>,
}

impl Banded {
    pub(crate) fn new(n: usize, kl: usize, ku: usize) -> Self {
        let width = kl + ku + 1;
        Self { n, kl, ku, width, a: vec![0.0; n * width] }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku);
        i * self.width + (j + self.kl - i)
    }

    pub(crate) fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.a[k] += v;
    }

    /// Solves in place for `ncols` right-hand sides stored row-major.
    /// No pivoting: callers only build diagonally dominant systems.
    pub(crate) fn solve(mut self, rhs: &mut [f64], ncols: usize) {
        let n = self.n;
        for k in 0..n {
            let pivot = self.a[self.idx(k, k)];
            let last = (k + self.kl).min(n - 1);
            let right = (k + self.ku).min(n - 1);
            for i in k + 1..=last {
                let f = self.a[self.idx(i, k)] / pivot;
                if f == 0.0 {
                    continue;
                }
                for j in k..=right {
                    let v = self.a[self.idx(k, j)];
                    let t = self.idx(i, j);
                    self.a[t] -= f * v;
                }
                let (top, bottom) = rhs.split_at_mut(i * ncols);
                let src = &top[k * ncols..(k + 1) * ncols];
                for (d, s) in bottom[..ncols].iter_mut().zip(src) {
                    *d -= f * s;
                }
            }
        }
        for k in (0..n).rev() {
            let right = (k + self.ku).min(n - 1);
            for j in k + 1..=right {
                let c = self.a[self.idx(k, j)];
                if c == 0.0 {
                    continue;
                }
                let (top, bottom) = rhs.split_at_mut(j * ncols);
                let xj = &bottom[..ncols];
                for (d, s) in top[k * ncols..(k + 1) * ncols].iter_mut().zip(xj) {
                    *d -= c * s;
                }
            }
            let pivot = self.a[self.idx(k, k)];
            for d in &mut rhs[k * ncols..(k + 1) * ncols] {
                *d /= pivot;
            }
        }
    }
}

/// First-entry law from every `y ∈ [lo, hi]`: row `y − lo` holds
/// `P_y(first absorbed at column c)`. Positions leaving the window without
/// being absorbed are clamped to its nearest edge, which copies the far-field
/// behaviour of the edge state.
pub(crate) fn first_entry(
    law: &LatticeLaw,
    lo: i64,
    hi: i64,
    absorb: &dyn Fn(i64) -> Option<usize>,
    ncols: usize,
) -> Vec<f64> {
    let n = (hi - lo + 1) as usize;
    let kl = law.max_down() as usize;
    let ku = law.max_up() as usize;
    let mut m = Banded::new(n, kl, ku);
    let mut rhs = vec![0.0; n * ncols];
    for y in lo..=hi {
        let i = (y - lo) as usize;
        m.add(i, i, 1.0);
        if let Some(c) = absorb(y) {
            rhs[i * ncols + c] = 1.0;
            continue;
        }
        for (&s, &p) in law.steps().iter().zip(law.probs()) {
            let t = y + s;
            match absorb(t) {
                Some(c) => rhs[i * ncols + c] += p,
                None => {
                    let j = (t.clamp(lo, hi) - lo) as usize;
                    m.add(i, j, -p);
                }
            }
        }
    }
    m.solve(&mut rhs, ncols);
    rhs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walk_core::StepLaw;

    #[test]
    fn dense_check() {
        // [[4,1,0],[1,4,1],[0,1,4]] x = [1,2,3]
        let mut m = Banded::new(3, 1, 1);
        for i in 0..3 {
            m.add(i, i, 4.0);
        }
        for i in 0..2 {
            m.add(i, i + 1, 1.0);
            m.add(i + 1, i, 1.0);
        }
        let mut b = vec![1.0, 2.0, 3.0];
        m.solve(&mut b, 1);
        let x = [5.0 / 28.0, 2.0 / 7.0, 19.0 / 28.0];
        for (u, v) in b.iter().zip(x) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn gambler_ruin() {
        // SRW on [0, 10] absorbed at 0 (col 0) and 10 (col 1).
        let srw = StepLaw::srw();
        let l = srw.as_lattice().unwrap();
        let absorb = |t: i64| match t {
            0 => Some(0),
            10 => Some(1),
            _ => None,
        };
        let phi = first_entry(l, 0, 10, &absorb, 2);
        for y in 0..=10usize {
            assert!((phi[y * 2 + 1] - y as f64 / 10.0).abs() < 1e-12);
        }
    }
}
