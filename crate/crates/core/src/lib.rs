//! Erasure-channel view of coded distributed computing.
//!
//! Binary linear codes spread `k` tasks over `n` workers; a straggling worker
//! is an erasure. This crate builds the codes, measures how often a set of
//! stragglers defeats the decoder, and turns that into expected job
//! completion times, analytically and by simulation.

pub mod code;
pub mod erasure;
pub mod error;
pub mod exec_time;
pub mod gf2;
pub mod nested;
pub mod quad;
pub mod report;
pub mod rng;
pub mod sim;

pub use code::{BitChannelProfile, CodeFamily};
pub use erasure::{Decoder, ErasureFailureProfile, ProfileSource};
pub use error::{Error, Result};
pub use exec_time::{ExecTimeReport, Method, StragglerModel};
pub use gf2::{EchelonBasis, Gf2Matrix};
pub use nested::{NestedFamily, NestedProfiles};
pub use sim::{SimCode, SimRun};
pub use report::{DesignEpsilon, Format, RunConfig, Scheme};
