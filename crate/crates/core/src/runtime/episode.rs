use std::io::Write;
use std::path::Path;

use super::actuator::Actuator;
use crate::envs::{Environment, Observation, PlantState};
use crate::error::{Error, Result};
use crate::rng::Stream;

/// What a policy sees at step `k`.
#[derive(Clone, Copy, Debug)]
pub struct AgentView<'a> {
    pub step: usize,
    /// Noisy measurement `y_k`.
    pub y: &'a [f64],
    /// `y_k` embedded for learning agents (see [`Environment::features`]).
    pub features: &'a [f64],
    /// Input currently held by the actuator.
    pub u_prev: &'a [f64],
    /// Measurement at the last communication.
    pub x_hat: &'a [f64],
}

/// A policy's output for one step.
#[derive(Clone, Debug, PartialEq)]
pub struct Decision {
    pub gamma: bool,
    /// Proposed input; only used when transmitted.
    pub u: Vec<f64>,
    /// Raw action as produced by the agent, kept for logging and replay.
    pub raw: Vec<f64>,
}

pub trait EtcPolicy {
    fn decide(&mut self, view: &AgentView<'_>) -> Result<Decision>;
}

impl<F> EtcPolicy for F
where
    F: FnMut(&AgentView<'_>) -> Result<Decision>,
{
    fn decide(&mut self, view: &AgentView<'_>) -> Result<Decision> {
        self(view)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    /// True state before the input was applied.
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub raw_action: Vec<f64>,
    /// Input held by the actuator before this step.
    pub u_held: Vec<f64>,
    pub u_applied: Vec<f64>,
    pub gamma: bool,
    pub reward: f64,
    /// Actuator's `x̂` after this step.
    pub x_hat: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct EpisodeLog {
    pub steps: Vec<StepRecord>,
    /// State after the last step.
    pub final_state: Vec<f64>,
    pub terminated: bool,
    pub comm_count: usize,
}

impl EpisodeLog {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn gammas(&self) -> Vec<bool> {
        self.steps.iter().map(|s| s.gamma).collect()
    }

    /// `Σγ / T`.
    pub fn comm_rate(&self) -> f64 {
        if self.steps.is_empty() {
            0.0
        } else {
            self.comm_count as f64 / self.steps.len() as f64
        }
    }

    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    pub fn discounted_return(&self, zeta: f64) -> f64 {
        self.steps.iter().rev().fold(0.0, |acc, s| s.reward + zeta * acc)
    }

    /// Largest `|θ|` over every visited state including the final one.
    pub fn max_abs_angle(&self, angle_index: usize) -> f64 {
        self.steps
            .iter()
            .map(|s| s.x[angle_index].abs())
            .chain(self.final_state.get(angle_index).map(|v| v.abs()))
            .fold(0.0, f64::max)
    }

    pub fn stays_within(&self, angle_index: usize, bound: f64) -> bool {
        self.max_abs_angle(angle_index) <= bound
    }

    /// Checks the bookkeeping every runtime log must satisfy: hold on
    /// `γ = 0`, `x̂` moving only on `γ = 1`, and the communication count.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let count = self.steps.iter().filter(|s| s.gamma).count();
        if count != self.comm_count {
            return Err(format!("comm count {} but {count} steps with gamma=1", self.comm_count));
        }
        let mut prev_hat: Option<&[f64]> = None;
        for (k, s) in self.steps.iter().enumerate() {
            if k == 0 && !s.gamma {
                return Err("first step did not communicate".into());
            }
            if s.gamma && s.x_hat != s.y {
                return Err(format!("step {k}: communication did not refresh x_hat"));
            }
            if !s.gamma {
                if s.u_applied != s.u_held {
                    return Err(format!("step {k}: no communication but applied {:?} != held {:?}", s.u_applied, s.u_held));
                }
                if let Some(h) = prev_hat {
                    if h != s.x_hat.as_slice() {
                        return Err(format!("step {k}: x_hat changed without communication"));
                    }
                }
            }
            if k > 0 && self.steps[k - 1].u_applied != s.u_held {
                return Err(format!("step {k}: held input differs from previous applied input"));
            }
            prev_hat = Some(&s.x_hat);
        }
        Ok(())
    }

    /// CSV with columns `step, x…, y…, u_applied…, gamma, reward`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let n = self.steps.first().map_or(0, |s| s.x.len());
        let l = self.steps.first().map_or(1, |s| s.u_applied.len());
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["step".to_string()];
        header.extend((0..n).map(|i| format!("x{i}")));
        header.extend((0..n).map(|i| format!("y{i}")));
        if l == 1 {
            header.push("u_applied".into());
        } else {
            header.extend((0..l).map(|i| format!("u_applied{i}")));
        }
        header.push("gamma".into());
        header.push("reward".into());
        w.write_record(&header)?;
        for (k, s) in self.steps.iter().enumerate() {
            let mut row = vec![k.to_string()];
            row.extend(s.x.iter().map(f64::to_string));
            row.extend(s.y.iter().map(f64::to_string));
            row.extend(s.u_applied.iter().map(f64::to_string));
            row.push(u8::from(s.gamma).to_string());
            row.push(s.reward.to_string());
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<episode csv>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        crate::harness::export::write_atomic(path, &buf)
    }
}

/// Result of one [`Episode::advance`].
#[derive(Clone, Debug)]
pub struct StepOutcome {
    /// Effective decision (step 0 always communicates).
    pub gamma: bool,
    pub u_applied: Vec<f64>,
    pub reward: f64,
    /// Agent state after the step: features of `y_{k+1}` and `u_applied`.
    pub next_agent_state: Vec<f64>,
    /// The plant left its safe region.
    pub terminated: bool,
    /// No more steps: terminated or horizon reached.
    pub finished: bool,
}

/// One closed-loop rollout with the actuator in the loop, advanced one
/// decision at a time.
pub struct Episode<'e> {
    env: &'e Environment,
    state: PlantState,
    obs: Observation,
    features: Vec<f64>,
    actuator: Actuator,
    horizon: usize,
    log: EpisodeLog,
    finished: bool,
}

impl<'e> Episode<'e> {
    pub fn start(env: &'e Environment, horizon: usize, rng: &mut Stream) -> Self {
        let state = env.plant.reset(env.task, rng);
        Self::start_from(env, state, horizon, rng)
    }

    /// Starts from a given plant state instead of a reset draw.
    pub fn start_from(env: &'e Environment, state: PlantState, horizon: usize, rng: &mut Stream) -> Self {
        let obs = env.plant.observe(&state, rng);
        let features = env.features(&obs.y);
        Self {
            env,
            state,
            obs,
            features,
            actuator: Actuator::new(env.input_dim(), env.state_dim()),
            horizon,
            log: EpisodeLog::default(),
            finished: horizon == 0,
        }
    }

    pub fn step_index(&self) -> usize {
        self.log.steps.len()
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    pub fn state(&self) -> &PlantState {
        &self.state
    }

    pub fn actuator(&self) -> &Actuator {
        &self.actuator
    }

    pub fn view(&self) -> AgentView<'_> {
        AgentView {
            step: self.step_index(),
            y: &self.obs.y,
            features: &self.features,
            u_prev: self.actuator.u_prev(),
            x_hat: self.actuator.x_hat(),
        }
    }

    /// Agent state: observation features followed by the held input.
    pub fn agent_state(&self) -> Vec<f64> {
        agent_state(&self.features, self.actuator.u_prev())
    }

    pub fn advance(&mut self, decision: Decision, rng: &mut Stream) -> Result<StepOutcome> {
        let k = self.step_index();
        if self.finished {
            return Err(Error::EpisodeFault {
                step: k,
                reason: "episode already finished".into(),
            });
        }
        let l = self.env.input_dim();
        if decision.u.len() != l {
            return Err(Error::EpisodeFault {
                step: k,
                reason: format!("policy proposed {} inputs, plant takes {l}", decision.u.len()),
            });
        }
        if decision.u.iter().chain(&decision.raw).any(|v| !v.is_finite()) {
            return Err(Error::EpisodeFault {
                step: k,
                reason: format!("non-finite action u={:?} raw={:?}", decision.u, decision.raw),
            });
        }
        let gamma = decision.gamma || k == 0;
        let u_cmd: Vec<f64> = decision.u.iter().map(|&u| self.env.plant.clamp_input(u)).collect();
        let u_held = self.actuator.u_prev().to_vec();
        let u_applied = self.actuator.apply(gamma, &u_cmd, &self.obs.y);

        let (next, obs) = self.env.plant.step(&self.state, &u_applied, rng).map_err(|e| match e {
            Error::EpisodeFault { reason, .. } => Error::EpisodeFault { step: k, reason },
            other => other,
        })?;
        let terminated = self.env.terminated(&next);
        let reward = self.env.reward(&self.state.x, &u_applied, gamma, terminated);

        self.log.steps.push(StepRecord {
            x: std::mem::take(&mut self.state.x),
            y: std::mem::take(&mut self.obs.y),
            raw_action: decision.raw,
            u_held,
            u_applied: u_applied.clone(),
            gamma,
            reward,
            x_hat: self.actuator.x_hat().to_vec(),
        });
        if gamma {
            self.log.comm_count += 1;
        }
        self.state = next;
        self.obs = obs;
        self.features = self.env.features(&self.obs.y);
        self.finished = terminated || self.step_index() >= self.horizon;
        if self.finished {
            self.log.final_state = self.state.x.clone();
            self.log.terminated = terminated;
        }
        Ok(StepOutcome {
            gamma,
            next_agent_state: agent_state(&self.features, &u_applied),
            u_applied,
            reward,
            terminated,
            finished: self.finished,
        })
    }

    pub fn finish(mut self) -> EpisodeLog {
        if self.log.final_state.is_empty() {
            self.log.final_state = self.state.x.clone();
        }
        self.log
    }
}

pub fn agent_state(features: &[f64], u_prev: &[f64]) -> Vec<f64> {
    let mut s = Vec::with_capacity(features.len() + u_prev.len());
    s.extend_from_slice(features);
    s.extend_from_slice(u_prev);
    s
}

/// Rolls out `policy` for at most `horizon` steps.
pub fn run_episode<P: EtcPolicy + ?Sized>(env: &Environment, policy: &mut P, horizon: usize, rng: &mut Stream) -> Result<EpisodeLog> {
    if horizon == 0 {
        return Err(Error::invalid("horizon", "episodes need at least one step"));
    }
    let episode = Episode::start(env, horizon, rng);
    drive(episode, policy, rng)
}

/// [`run_episode`] from a given initial plant state.
pub fn run_episode_from<P: EtcPolicy + ?Sized>(env: &Environment, initial: PlantState, policy: &mut P, horizon: usize, rng: &mut Stream) -> Result<EpisodeLog> {
    if horizon == 0 {
        return Err(Error::invalid("horizon", "episodes need at least one step"));
    }
    let episode = Episode::start_from(env, initial, horizon, rng);
    drive(episode, policy, rng)
}

fn drive<P: EtcPolicy + ?Sized>(mut episode: Episode<'_>, policy: &mut P, rng: &mut Stream) -> Result<EpisodeLog> {
    while !episode.is_finished() {
        let decision = policy.decide(&episode.view())?;
        episode.advance(decision, rng)?;
    }
    Ok(episode.finish())
}

/// Mean of `γ` over the trailing `window` steps (fewer at the start).
pub fn moving_avg_comm(gammas: &[bool], window: usize) -> Vec<f64> {
    assert!(window >= 1, "window must be at least one step");
    let mut out = Vec::with_capacity(gammas.len());
    let mut sum = 0usize;
    for k in 0..gammas.len() {
        sum += usize::from(gammas[k]);
        if k >= window {
            sum -= usize::from(gammas[k - window]);
        }
        out.push(sum as f64 / (k + 1).min(window) as f64);
    }
    out
}

/// `Σ_k x_kᵀQx_k + u_kᵀRu_k` over the applied inputs.
pub fn quadratic_cost(log: &EpisodeLog, q: &[Vec<f64>], r: &[Vec<f64>]) -> f64 {
    use crate::envs::reward::quadratic_form;
    log.steps.iter().map(|s| quadratic_form(q, &s.x) + quadratic_form(r, &s.u_applied)).sum()
}
