//! Dense networks with explicit forward/backward passes, Adam, target-network
//! tracking and finite-difference gradient checking.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod matrix;
pub mod mlp;

pub use adam::{soft_update, AdamState};
pub use gradcheck::gradient_check;
pub use matrix::Matrix;
pub use mlp::{sigmoid, Activation, Dense, ForwardCache, Gradients, Mlp, MlpSpec, OutputActivation};
