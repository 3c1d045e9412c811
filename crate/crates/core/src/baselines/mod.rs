//! Model-based comparison: linearization, discrete LQR and fixed-threshold
//! triggering laws.

pub mod lqr;
pub mod sweep;
pub mod triggers;

pub use lqr::{dare_residual, design_for, linearize, linearize_map, lqr_gain, solve_dare, spectral_radius, LinearModel, LqrDesign};
pub use sweep::{delta_sweep, evaluate_threshold, max_stable_saving, write_sweep_csv, SweepPoint};
pub use triggers::{log_space, trigger_input_relative, trigger_norm, trigger_state_relative, TriggerLaw, TriggeredLqr};
