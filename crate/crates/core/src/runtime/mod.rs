//! Event-triggered execution: zero-order hold, closed-loop episodes and
//! communication accounting.

use crate::envs::{Environment, PlantKind, Task};

pub mod actuator;
pub mod episode;

pub use actuator::Actuator;
pub use episode::{
    agent_state, moving_avg_comm, quadratic_cost, run_episode, run_episode_from, AgentView, Decision, Episode, EpisodeLog, EtcPolicy,
    StepOutcome, StepRecord,
};

/// Pendulum episodes count as stable while `|θ|` stays within this bound.
pub const STABLE_ANGLE: f64 = 0.2;

/// Steps at the end of a swing-up episode that must stay upright.
pub const SWINGUP_SETTLE_STEPS: usize = 100;

/// Episode counts as stable when the angle stays within bounds (pendulum
/// balance), ends upright (swing-up) or the plant never leaves its safe
/// region (cart-pole).
pub fn episode_stable(env: &Environment, log: &EpisodeLog) -> bool {
    let angle = env.plant.angle_index();
    match (env.plant.kind, env.task) {
        (PlantKind::CartPole, _) => !log.terminated,
        (PlantKind::Pendulum, Task::Balance) => log.stays_within(angle, STABLE_ANGLE),
        (PlantKind::Pendulum, Task::Swingup) => {
            log.len() >= SWINGUP_SETTLE_STEPS && log.steps[log.len() - SWINGUP_SETTLE_STEPS..].iter().all(|s| s.x[angle].abs() <= STABLE_ANGLE)
        }
    }
}

/// Always transmits the input computed by `controller`.
pub struct AlwaysCommunicate<F>(pub F);

impl<F> EtcPolicy for AlwaysCommunicate<F>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    fn decide(&mut self, view: &AgentView<'_>) -> crate::Result<Decision> {
        let u = (self.0)(view.y);
        Ok(Decision {
            gamma: true,
            raw: u.clone(),
            u,
        })
    }
}
