//! Noisy discrete-time plants and the communication-aware reward.

pub mod plant;
pub mod reward;

use serde::{Deserialize, Serialize};

pub use plant::{angle_wrap, terminated, Observation, PlantKind, PlantParams, PlantState, Task};
pub use reward::{reward, RewardWeights};

use crate::error::Result;

/// A plant together with its task and reward.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub plant: PlantParams,
    pub task: Task,
    pub weights: RewardWeights,
}

impl Environment {
    pub fn new(plant: PlantParams, task: Task, weights: RewardWeights) -> Result<Self> {
        plant.validate()?;
        weights.validate(plant.state_dim(), plant.input_dim())?;
        Ok(Self { plant, task, weights })
    }

    /// Default pendulum with default weights.
    pub fn pendulum(task: Task) -> Self {
        Self {
            plant: PlantParams::pendulum(),
            task,
            weights: RewardWeights::default_for(PlantKind::Pendulum),
        }
    }

    pub fn cart_pole(task: Task) -> Self {
        Self {
            plant: PlantParams::cart_pole(),
            task,
            weights: RewardWeights::default_for(PlantKind::CartPole),
        }
    }

    pub fn state_dim(&self) -> usize {
        self.plant.state_dim()
    }

    pub fn input_dim(&self) -> usize {
        self.plant.input_dim()
    }

    /// Width of [`Environment::features`].
    pub fn feature_dim(&self) -> usize {
        match self.task {
            Task::Balance => self.state_dim(),
            Task::Swingup => self.state_dim() + 1,
        }
    }

    /// Observation as presented to learning agents. Swing-up replaces the
    /// angle by `(cos θ, sin θ)` so the wrap at ±π is invisible.
    pub fn features(&self, y: &[f64]) -> Vec<f64> {
        match self.task {
            Task::Balance => y.to_vec(),
            Task::Swingup => {
                let a = self.plant.angle_index();
                let mut f = Vec::with_capacity(y.len() + 1);
                f.extend_from_slice(&y[..a]);
                f.push(y[a].cos());
                f.push(y[a].sin());
                f.extend_from_slice(&y[a + 1..]);
                f
            }
        }
    }

    pub fn terminated(&self, state: &PlantState) -> bool {
        terminated(&self.plant, state)
    }

    pub fn reward(&self, x: &[f64], u_applied: &[f64], gamma: bool, terminated: bool) -> f64 {
        reward(x, u_applied, gamma, &self.weights, terminated)
    }

    /// Pole angle of a state.
    pub fn angle(&self, x: &[f64]) -> f64 {
        x[self.plant.angle_index()]
    }
}
