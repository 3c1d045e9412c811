use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::lqr::apply_gain;
use crate::error::Result;
use crate::runtime::{AgentView, Decision, EtcPolicy};

fn norm(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|x| x * x).sum::<f64>().sqrt()
}

/// `‖x‖₂ > δ`.
pub fn trigger_norm(x: &[f64], delta: f64) -> bool {
    norm(x.iter().copied()) > delta
}

/// `‖Kx̂ − Kx‖ > δ‖Kx‖`.
pub fn trigger_input_relative(k: &DMatrix<f64>, x_hat: &[f64], x: &[f64], delta: f64) -> bool {
    let held = apply_gain(k, x_hat);
    let fresh = apply_gain(k, x);
    norm(held.iter().zip(&fresh).map(|(a, b)| a - b)) > delta * norm(fresh.iter().copied())
}

/// `‖x̂ − x‖ > δ‖x‖`.
pub fn trigger_state_relative(x_hat: &[f64], x: &[f64], delta: f64) -> bool {
    norm(x_hat.iter().zip(x).map(|(a, b)| a - b)) > delta * norm(x.iter().copied())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriggerLaw {
    Norm,
    InputRelative,
    StateRelative,
}

impl TriggerLaw {
    pub const ALL: [TriggerLaw; 3] = [TriggerLaw::Norm, TriggerLaw::InputRelative, TriggerLaw::StateRelative];

    pub fn name(self) -> &'static str {
        match self {
            TriggerLaw::Norm => "norm",
            TriggerLaw::InputRelative => "input_relative",
            TriggerLaw::StateRelative => "state_relative",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|l| l.name() == s)
    }

    pub fn fires(self, k: &DMatrix<f64>, x_hat: &[f64], x: &[f64], delta: f64) -> bool {
        match self {
            TriggerLaw::Norm => trigger_norm(x, delta),
            TriggerLaw::InputRelative => trigger_input_relative(k, x_hat, x, delta),
            TriggerLaw::StateRelative => trigger_state_relative(x_hat, x, delta),
        }
    }

    /// Default threshold grid: 20 log-spaced points. The relative laws stop
    /// short of δ = 1, beyond which they no longer fire on a growing error.
    pub fn default_grid(self) -> Vec<f64> {
        match self {
            TriggerLaw::Norm => log_space(1e-4, 0.5, 20),
            TriggerLaw::InputRelative | TriggerLaw::StateRelative => log_space(0.05, 0.99, 20),
        }
    }
}

pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo && n >= 1);
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64)
            }
        })
        .collect()
}

/// LQR feedback `u = K y` transmitted whenever the trigger law fires,
/// evaluated on the measurement and the actuator's `x̂`.
#[derive(Clone, Debug)]
pub struct TriggeredLqr {
    pub gain: DMatrix<f64>,
    pub law: TriggerLaw,
    pub delta: f64,
}

impl EtcPolicy for TriggeredLqr {
    fn decide(&mut self, view: &AgentView<'_>) -> Result<Decision> {
        let u = apply_gain(&self.gain, view.y);
        let gamma = self.law.fires(&self.gain, view.x_hat, view.y, self.delta);
        Ok(Decision { gamma, raw: u.clone(), u })
    }
}
