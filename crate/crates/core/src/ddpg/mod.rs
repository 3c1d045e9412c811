//! Joint learning of communication and control with a parameterized-action
//! DDPG agent: the actor emits two decision scores and a bounded input.

pub mod agent;
pub mod noise;
pub mod replay;
pub mod train;

pub use agent::{
    actor_objective_gradient, actor_out, actor_spec, critic_loss_gradient, critic_spec, critic_target, decide, ActorOutput, DdpgAgent,
    DdpgConfig, GreedyActor, DECISION_SCORES,
};
pub use noise::OuNoise;
pub use replay::{Batch, ReplayBuffer, Transition};
pub use train::{
    greedy_score, save_checkpoint_set, train, train_with_checkpoints, EpisodeStats, GreedyScore, Selection, TrainSpec, TrainingLog, CHECKPOINT_FILES,
    SELECTED_ACTOR_FILE,
};
