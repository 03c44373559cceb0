//! Step laws, paths and random substreams.

mod law;
mod path;
mod rng;

pub use law::{ContinuousLaw, LatticeLaw, StepLaw};
pub use path::{sample_path, Path};
pub use rng::{derive_substream, fork_seed, RngStream, RNG_NAME};

use crate::error::Result;
use rand::RngCore;
use std::fmt::Debug;
use std::ops::{Add, Sub};

/// A point of the state space: `i64` counts multiples of the span for lattice
/// laws, `f64` is a real position for continuous laws.
pub trait Site:
    Copy + PartialOrd + Debug + Send + Sync + 'static + Add<Output = Self> + Sub<Output = Self>
{
    const ZERO: Self;
    fn to_f64(self) -> f64;
}

impl Site for i64 {
    const ZERO: Self = 0;
    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Site for f64 {
    const ZERO: Self = 0.0;
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
}

/// A step law in the coordinates of its own state space.
pub trait Walk: Clone + Debug + Send + Sync {
    type Site: Site;

    fn increment<R: RngCore + ?Sized>(&self, rng: &mut R) -> Self::Site;

    /// Real length of one site unit (λ for lattice laws, 1 otherwise).
    fn scale(&self) -> f64;

    /// Standard deviation of one step in site units.
    fn sigma_site(&self) -> f64;

    /// Converts a real position into a site, rejecting points off the lattice.
    fn site_of(&self, x: f64) -> Result<Self::Site>;

    fn real(&self, s: Self::Site) -> f64 {
        s.to_f64() * self.scale()
    }
}
