use super::{Site, Walk};
use rand::RngCore;

/// A finite trajectory: the start `x0` followed by `S_1, ..., S_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Path<S> {
    pub x0: S,
    pub positions: Vec<S>,
}

impl<S: Site> Path<S> {
    pub fn new(x0: S, positions: Vec<S>) -> Self {
        Self { x0, positions }
    }

    /// Number of steps.
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// `S_k`, with `S_0 = x0`.
    pub fn at(&self, k: usize) -> S {
        if k == 0 {
            self.x0
        } else {
            self.positions[k - 1]
        }
    }

    /// `S_0, S_1, ..., S_n`.
    pub fn iter_with_start(&self) -> impl Iterator<Item = S> + '_ {
        std::iter::once(self.x0).chain(self.positions.iter().copied())
    }

    pub fn last(&self) -> S {
        self.positions.last().copied().unwrap_or(self.x0)
    }
}

pub fn sample_path<W: Walk, R: RngCore + ?Sized>(
    walk: &W,
    x0: W::Site,
    n: usize,
    rng: &mut R,
) -> Path<W::Site> {
    let mut positions = Vec::with_capacity(n);
    let mut s = x0;
    for _ in 0..n {
        s = s + walk.increment(rng);
        positions.push(s);
    }
    Path { x0, positions }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walk_core::{derive_substream, StepLaw};

    #[test]
    fn empty_walk() {
        let srw = StepLaw::srw();
        let l = srw.as_lattice().unwrap();
        let p = sample_path(l, 0, 0, &mut derive_substream(1, 0));
        assert!(p.is_empty());
        assert_eq!(p.last(), 0);
    }

    #[test]
    fn same_stream_same_path() {
        let srw = StepLaw::srw();
        let l = srw.as_lattice().unwrap();
        let a = sample_path(l, 0, 1_000_000, &mut derive_substream(5, 2));
        let b = sample_path(l, 0, 1_000_000, &mut derive_substream(5, 2));
        assert_eq!(a, b);
    }

    #[test]
    fn increments_stay_in_support() {
        let skew = StepLaw::skew();
        let l = skew.as_lattice().unwrap();
        let p = sample_path(l, 4, 10_000, &mut derive_substream(8, 1));
        let s: Vec<i64> = p.iter_with_start().collect();
        assert!(s.windows(2).all(|w| l.steps().contains(&(w[1] - w[0]))));
    }
}
