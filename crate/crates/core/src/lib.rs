//! Learning event-triggered control: a policy decides at every sampling
//! instant both the control input and whether to transmit it.

pub mod baselines;
pub mod ddpg;
pub mod envs;
pub mod gate;
pub mod error;
pub mod harness;
pub mod nn;
pub mod rng;
pub mod runtime;

pub use error::{Error, Result};
