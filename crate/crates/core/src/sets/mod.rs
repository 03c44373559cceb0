//! Avoid-set geometry and the jump chain of a trajectory relative to the set.

mod jump;
mod set;

pub use jump::{
    first_return, jump_decompose, simulate_capped, simulate_capped_hit, simulate_epochs, simulate_observed,
    JumpChain,
};
pub use set::{AvoidSet, Component, LatticeSet, Model, RealSet, Region, HULL, MINUS, PLUS, SET};
