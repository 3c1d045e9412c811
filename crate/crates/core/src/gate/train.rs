use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::policy::{reinforce_update, sample_gate, GatePolicy, GateStep};
use crate::baselines::lqr::apply_gain;
use crate::ddpg::actor_out;
use crate::envs::{Environment, PlantKind, Task};
use crate::error::{Error, Result};
use crate::nn::{AdamState, Mlp};
use crate::rng::{self, Stream};
use crate::runtime::{agent_state, quadratic_cost, AgentView, Decision, Episode, EpisodeLog, STABLE_ANGLE};

/// Controller whose input the gate decides to transmit. Never modified by
/// gate training.
#[derive(Clone, Debug, PartialEq)]
pub enum FrozenController {
    /// `u = K y`.
    Lqr { gain: DMatrix<f64> },
    /// Control head of an actor trained with communication at every step.
    DdpgActor { actor: Mlp },
}

impl FrozenController {
    pub fn control(&self, view: &AgentView<'_>) -> Result<Vec<f64>> {
        match self {
            FrozenController::Lqr { gain } => Ok(apply_gain(gain, view.y)),
            FrozenController::DdpgActor { actor } => Ok(actor_out(actor, &agent_state(view.features, view.u_prev))?.u),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateMode {
    /// `γ ~ Bernoulli(p)`.
    Sample,
    /// `γ = 1` iff `p > 0.5`.
    #[default]
    Threshold,
    /// Gate bypassed, `γ ≡ 1`.
    Always,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GateConfig {
    pub hidden: Vec<usize>,
    pub input_scale: f64,
    pub batch_episodes: usize,
    pub updates: usize,
    pub lr: f64,
    pub zeta: f64,
    /// Divide advantages by their batch standard deviation.
    pub normalize_advantages: bool,
}

impl Default for GateConfig {
    fn default() -> Self {
        Self {
            hidden: vec![32, 32],
            input_scale: 1e3,
            batch_episodes: 10,
            updates: 1000,
            lr: 1e-3,
            zeta: 0.99,
            normalize_advantages: true,
        }
    }
}

impl GateConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, field: &str, reason: &str| if ok { Ok(()) } else { Err(Error::invalid(format!("gate.{field}"), reason)) };
        check(!self.hidden.is_empty() && self.hidden.iter().all(|&h| h > 0), "hidden", "needs at least one positive width")?;
        check(self.input_scale > 0.0 && self.input_scale.is_finite(), "input_scale", "must be positive")?;
        check(self.batch_episodes > 0, "batch_episodes", "must be positive")?;
        check(self.lr > 0.0 && self.lr.is_finite(), "lr", "must be positive")?;
        check(self.zeta > 0.0 && self.zeta <= 1.0, "zeta", "must lie in (0, 1]")?;
        Ok(())
    }
}

/// Rolls out one episode where the controller computes an input at every
/// step and the gate decides whether it reaches the actuator.
pub fn gate_episode(
    env: &Environment,
    controller: &FrozenController,
    gate: &GatePolicy,
    mode: GateMode,
    horizon: usize,
    env_rng: &mut Stream,
    gate_rng: &mut Stream,
) -> Result<(EpisodeLog, Vec<GateStep>)> {
    if horizon == 0 {
        return Err(Error::invalid("horizon", "episodes need at least one step"));
    }
    let mut episode = Episode::start(env, horizon, env_rng);
    let mut steps = Vec::with_capacity(horizon);
    while !episode.is_finished() {
        let view = episode.view();
        let u = controller.control(&view)?;
        let input = gate.input(view.y, &u, view.u_prev);
        let (gamma, log_prob) = match mode {
            GateMode::Always => (true, 0.0),
            GateMode::Sample => sample_gate(gate.prob_of_input(&input)?, gate_rng),
            GateMode::Threshold => {
                let p = gate.prob_of_input(&input)?;
                (p > 0.5, super::policy::log_prob(p, p > 0.5))
            }
        };
        let decided = view.step > 0 && mode != GateMode::Always;
        let outcome = episode.advance(Decision { gamma, raw: u.clone(), u }, env_rng)?;
        steps.push(GateStep {
            input,
            gamma: outcome.gamma,
            log_prob,
            reward: outcome.reward,
            decided,
        });
    }
    Ok((episode.finish(), steps))
}

/// Closed loop with `γ ≡ 1` must not blow up before a gate is trained on it.
pub fn check_controller(env: &Environment, controller: &FrozenController, horizon: usize, seed: u64) -> Result<EpisodeLog> {
    let dummy = GatePolicy::from_net(Mlp::zeros(GatePolicy::spec(env.state_dim(), env.input_dim(), &[1]))?, 1.0)?;
    let (log, _) = gate_episode(
        env,
        controller,
        &dummy,
        GateMode::Always,
        horizon,
        &mut rng::stream(seed, "gate-precheck", 0),
        &mut rng::stream(seed, "gate-precheck", 1),
    )?;
    let finite = log.steps.iter().all(|s| s.x.iter().all(|v| v.is_finite() && v.abs() < 1e6));
    if !finite {
        return Err(Error::UnstableController("closed loop diverges with communication at every step".into()));
    }
    if env.task == Task::Balance {
        let ok = match env.plant.kind {
            PlantKind::Pendulum => log.stays_within(env.plant.angle_index(), STABLE_ANGLE),
            PlantKind::CartPole => !log.terminated,
        };
        if !ok {
            return Err(Error::UnstableController("controller does not balance the plant with communication at every step".into()));
        }
    }
    Ok(log)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GateBatchStats {
    pub update: usize,
    pub mean_return: f64,
    pub comm_rate: f64,
    pub cost: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GateLog {
    pub batches: Vec<GateBatchStats>,
    pub verified_episodes: usize,
}

impl GateLog {
    pub const HEADER: [&'static str; 4] = ["update", "mean_return", "comm_rate", "cost"];

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::HEADER)?;
        for b in &self.batches {
            w.write_record([b.update.to_string(), b.mean_return.to_string(), b.comm_rate.to_string(), b.cost.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<gate log>", e))?;
        Ok(())
    }

    pub fn to_csv_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(buf)
    }
}

/// Trains a communication gate over a frozen controller with REINFORCE.
/// `lambda` replaces the environment's communication penalty.
pub fn train_gate(env: &Environment, controller: &FrozenController, lambda: f64, cfg: &GateConfig, horizon: usize, seed: u64) -> Result<(GatePolicy, GateLog)> {
    cfg.validate()?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid("lambda", "must be non-negative"));
    }
    let mut env = env.clone();
    env.weights.lambda = lambda;
    check_controller(&env, controller, horizon, seed)?;

    let mut gate = GatePolicy::new(env.state_dim(), env.input_dim(), &cfg.hidden, cfg.input_scale, &mut rng::stream(seed, "gate-init", 0))?;
    let mut opt = AdamState::new(&gate.net, cfg.lr);
    let mut log = GateLog::default();
    for update in 0..cfg.updates {
        let first = (update * cfg.batch_episodes) as u64;
        let rollouts: Vec<(EpisodeLog, Vec<GateStep>)> = (first..first + cfg.batch_episodes as u64)
            .into_par_iter()
            .map(|i| {
                gate_episode(
                    &env,
                    controller,
                    &gate,
                    GateMode::Sample,
                    horizon,
                    &mut rng::stream(seed, "gate-episode", i),
                    &mut rng::stream(seed, "gate-sample", i),
                )
            })
            .collect::<Result<_>>()?;
        let n = rollouts.len() as f64;
        let (mut comm, mut cost) = (0.0, 0.0);
        for (ep, steps) in &rollouts {
            ep.check_invariants().map_err(|reason| Error::EpisodeFault { step: ep.len(), reason })?;
            if let Some(s) = steps.iter().find(|s| !s.log_prob.is_finite()) {
                return Err(Error::NonFinite(format!("gate log-probability {}", s.log_prob)));
            }
            comm += ep.comm_rate() / n;
            cost += quadratic_cost(ep, &env.weights.q, &env.weights.r) / n;
        }
        log.verified_episodes += rollouts.len();
        let episodes: Vec<Vec<GateStep>> = rollouts.into_iter().map(|(_, s)| s).collect();
        let mean_return = reinforce_update(&mut gate, &mut opt, &episodes, cfg.zeta, cfg.normalize_advantages)?;
        log.batches.push(GateBatchStats {
            update,
            mean_return,
            comm_rate: comm,
            cost,
        });
    }
    Ok((gate, log))
}
