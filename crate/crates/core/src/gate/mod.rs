//! Separated approach: a stochastic communication gate trained by policy
//! gradient on top of a controller that stays fixed.

pub mod policy;
pub mod train;

pub use policy::{clamp_prob, gate_prob, log_prob, policy_gradient, reinforce_update, reward_to_go, sample_gate, GatePolicy, GateStep, PgBatch, P_MIN};
pub use train::{check_controller, gate_episode, train_gate, FrozenController, GateBatchStats, GateConfig, GateLog, GateMode};
