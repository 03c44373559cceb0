pub mod error;
pub mod walk_core;

pub use error::{Error, Result};
pub mod sets;
pub mod oracle;
pub mod ladder;
pub mod mc;
pub mod stats;
pub mod harmonic;
pub mod conditioned;
pub mod gap;
