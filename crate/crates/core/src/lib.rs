//! Pushdown colored Petri net engine for synthesizing API call sequences
//! that respect ownership and borrowing.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the command
//! line driver and the external compile check live in `pcpn-cli`.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod build;
pub mod emit;
pub mod multiset;
pub mod net;
pub mod reach;
pub mod sigenv;
pub mod srs;
pub mod synth;
pub mod types;
pub mod unify;

pub use build::{build_net, BuildOptions, BuildReport};
pub use multiset::Multiset;
pub use net::{Capability, Configuration, Net, PlaceId, PlaceIx, StackFrame, Token, Transition};
pub use reach::{canon, saturate, Bounds, ReachGraph};
pub use sigenv::{CallableItem, Obligation, SigEnv};
pub use synth::{synthesize, GoalSpec, Witness};
pub use types::{GroundType, Lifetime, Qual, RegionLabel, Ty, ValueId};
