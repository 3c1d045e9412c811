use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::agent::{DdpgAgent, DdpgConfig, GreedyActor, DECISION_SCORES};
use super::replay::Transition;
use crate::envs::Environment;
use crate::error::{Error, Result};
use crate::harness::export::write_atomic;
use crate::nn::{checkpoint, Mlp};
use crate::rng::{self, word_pos};
use crate::runtime::{episode_stable, quadratic_cost, run_episode, Decision, Episode, EpisodeLog};

/// Per-episode training statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeStats {
    pub episode: usize,
    /// Global step count at the end of the episode.
    pub total_steps: usize,
    pub steps: usize,
    pub total_reward: f64,
    pub comm_rate: f64,
    pub cost: f64,
    pub max_abs_angle: f64,
    pub terminated: bool,
    pub epsilon: f64,
}

impl EpisodeStats {
    pub fn from_log(episode: usize, total_steps: usize, epsilon: f64, env: &Environment, log: &EpisodeLog) -> Self {
        Self {
            episode,
            total_steps,
            steps: log.len(),
            total_reward: log.total_reward(),
            comm_rate: log.comm_rate(),
            cost: quadratic_cost(log, &env.weights.q, &env.weights.r),
            max_abs_angle: log.max_abs_angle(env.plant.angle_index()),
            terminated: log.terminated,
            epsilon,
        }
    }
}

/// Best greedy actor seen by periodic evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    /// Training episodes completed when the actor was evaluated.
    pub episode: usize,
    pub score: GreedyScore,
    pub actor: Mlp,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GreedyScore {
    pub stable_fraction: f64,
    pub mean_return: f64,
    pub mean_comm: f64,
}

impl GreedyScore {
    /// Stability first, then return.
    pub fn better_than(&self, other: &GreedyScore) -> bool {
        self.stable_fraction > other.stable_fraction || (self.stable_fraction == other.stable_fraction && self.mean_return > other.mean_return)
    }
}

/// Greedy rollouts of `actor` on dedicated selection streams.
pub fn greedy_score(env: &Environment, actor: &Mlp, episodes: usize, horizon: usize, seed: u64) -> Result<GreedyScore> {
    let (mut stable, mut ret, mut comm) = (0usize, 0.0, 0.0);
    for i in 0..episodes {
        let mut policy = GreedyActor { actor };
        let log = run_episode(env, &mut policy, horizon, &mut rng::stream(seed, "ddpg-select", i as u64))?;
        stable += usize::from(episode_stable(env, &log));
        ret += log.total_reward();
        comm += log.comm_rate();
    }
    let n = episodes.max(1) as f64;
    Ok(GreedyScore {
        stable_fraction: stable as f64 / n,
        mean_return: ret / n,
        mean_comm: comm / n,
    })
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingLog {
    pub episodes: Vec<EpisodeStats>,
    pub steps: usize,
    pub updates: usize,
    /// Episodes whose actuation and transition invariants were verified.
    pub verified_episodes: usize,
    pub selected: Option<Selection>,
}

impl TrainingLog {
    pub const HEADER: [&'static str; 9] = ["episode", "total_steps", "steps", "total_reward", "comm_rate", "cost", "max_abs_angle", "terminated", "epsilon"];

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::HEADER)?;
        for e in &self.episodes {
            w.write_record([
                e.episode.to_string(),
                e.total_steps.to_string(),
                e.steps.to_string(),
                e.total_reward.to_string(),
                e.comm_rate.to_string(),
                e.cost.to_string(),
                e.max_abs_angle.to_string(),
                u8::from(e.terminated).to_string(),
                e.epsilon.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<training log>", e))?;
        Ok(())
    }

    pub fn to_csv_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(buf)
    }

    /// Actor to deploy: the selected snapshot if any, else the final one.
    pub fn deployed_actor<'a>(&'a self, agent: &'a DdpgAgent) -> &'a Mlp {
        self.selected.as_ref().map_or(agent.actor(), |s| &s.actor)
    }

    /// Mean communication rate over the last `n` episodes.
    pub fn recent_comm_rate(&self, n: usize) -> f64 {
        let tail = &self.episodes[self.episodes.len().saturating_sub(n)..];
        tail.iter().map(|e| e.comm_rate).sum::<f64>() / tail.len().max(1) as f64
    }
}

/// Budget and seed for one training run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainSpec {
    /// Environment steps.
    pub steps: usize,
    pub horizon: usize,
    pub seed: u64,
}

pub fn config_hash(cfg: &DdpgConfig, spec: &TrainSpec, env: &Environment) -> String {
    let mut h = Sha256::new();
    h.update(toml::to_string(cfg).unwrap_or_default());
    h.update(format!("{spec:?}{env:?}"));
    h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// File names of a checkpoint set.
pub const CHECKPOINT_FILES: [&str; 4] = ["actor.ckpt", "critic.ckpt", "target_actor.ckpt", "target_critic.ckpt"];

/// Written next to the checkpoint set when selection is enabled.
pub const SELECTED_ACTOR_FILE: &str = "best_actor.ckpt";

pub fn save_checkpoint_set(dir: &Path, nets: [&Mlp; 4], manifest: &str) -> Result<()> {
    for (name, net) in CHECKPOINT_FILES.iter().zip(nets) {
        checkpoint::save(net, &dir.join(name))?;
    }
    write_atomic(&dir.join("manifest.txt"), manifest.as_bytes())
}

/// Runs the joint communication and control learning loop.
pub fn train(env: &Environment, cfg: &DdpgConfig, spec: TrainSpec) -> Result<(DdpgAgent, TrainingLog)> {
    train_with_checkpoints(env, cfg, spec, None)
}

/// As [`train`], writing checkpoints into `dir`. If the parameters become
/// non-finite, the last finite networks are written and training aborts.
pub fn train_with_checkpoints(env: &Environment, cfg: &DdpgConfig, spec: TrainSpec, dir: Option<&Path>) -> Result<(DdpgAgent, TrainingLog)> {
    cfg.validate()?;
    if spec.horizon == 0 {
        return Err(Error::invalid("horizon", "episodes need at least one step"));
    }
    let hash = config_hash(cfg, &spec, env);
    let train_horizon = if cfg.train_horizon > 0 { cfg.train_horizon } else { spec.horizon };
    let mut agent = DdpgAgent::new(env, cfg, &mut rng::stream(spec.seed, "ddpg-init", 0))?;
    let mut explore = rng::stream(spec.seed, "ddpg-explore", 0);
    let mut replay = rng::stream(spec.seed, "ddpg-replay", 0);
    let feature_dim = env.feature_dim();
    let mut log = TrainingLog::default();
    let mut last_finite = (agent.actor().clone(), agent.critic().clone(), agent.target_actor().clone(), agent.target_critic().clone());

    let manifest = |log: &TrainingLog, explore: &rng::Stream, replay: &rng::Stream, status: &str| {
        format!(
            "config_hash={hash}\nseed={}\nstep={}\nepisode={}\nupdates={}\nexplore_word_pos={}\nreplay_word_pos={}\nselected_episode={}\nstatus={status}\n",
            spec.seed,
            log.steps,
            log.episodes.len(),
            log.updates,
            word_pos(explore),
            word_pos(replay),
            log.selected.as_ref().map_or("none".to_string(), |s| s.episode.to_string())
        )
    };

    let mut episode_index = 0;
    while log.steps < spec.steps {
        let mut env_rng = rng::stream(spec.seed, "ddpg-episode", episode_index);
        let mut episode = Episode::start(env, train_horizon, &mut env_rng);
        agent.noise.reset();
        let mut epsilon = cfg.epsilon(log.steps, spec.steps);
        while !episode.is_finished() && log.steps < spec.steps {
            let s = episode.agent_state();
            epsilon = cfg.epsilon(log.steps, spec.steps);
            let (gamma, u, mut raw) = agent.explore_action(&s, epsilon, &mut explore)?;
            let outcome = episode.advance(Decision { gamma, u, raw: raw.clone() }, &mut env_rng)?;
            if outcome.gamma != gamma {
                raw[0] = 1.0;
                raw[1] = 0.0;
            }
            if outcome.next_agent_state[feature_dim..] != outcome.u_applied[..] {
                return Err(Error::EpisodeFault {
                    step: episode.step_index(),
                    reason: "next state does not carry the applied input".into(),
                });
            }
            debug_assert_eq!(raw.len(), DECISION_SCORES + env.input_dim());
            agent.buffer.push(Transition {
                s,
                a: raw,
                r: outcome.reward * cfg.reward_scale,
                s_next: outcome.next_agent_state,
                done: outcome.terminated,
            });
            log.steps += 1;
            if log.steps >= cfg.warmup {
                let learned = agent.learn(&mut replay);
                if matches!(learned, Err(Error::NonFinite(_))) || (learned.is_ok() && !agent.is_finite()) {
                    if let Some(dir) = dir {
                        let (a, c, ta, tc) = &last_finite;
                        save_checkpoint_set(dir, [a, c, ta, tc], &manifest(&log, &explore, &replay, "diverged"))?;
                    }
                    return Err(Error::Diverged { step: log.steps });
                }
                learned?;
                log.updates += 1;
            }
        }
        let episode_log = episode.finish();
        episode_log.check_invariants().map_err(|reason| Error::EpisodeFault {
            step: episode_log.len(),
            reason,
        })?;
        log.verified_episodes += 1;
        log.episodes.push(EpisodeStats::from_log(episode_index as usize, log.steps, epsilon, env, &episode_log));
        episode_index += 1;
        last_finite = (agent.actor().clone(), agent.critic().clone(), agent.target_actor().clone(), agent.target_critic().clone());
        if cfg.select_every > 0 && log.steps >= cfg.warmup && log.episodes.len() % cfg.select_every == 0 {
            let score = greedy_score(env, agent.actor(), cfg.select_episodes, spec.horizon, spec.seed)?;
            if log.selected.as_ref().is_none_or(|best| score.better_than(&best.score)) {
                log.selected = Some(Selection {
                    episode: log.episodes.len(),
                    score,
                    actor: agent.actor().clone(),
                });
            }
        }
        if let Some(dir) = dir {
            if cfg.checkpoint_every > 0 && log.episodes.len() % cfg.checkpoint_every == 0 {
                save_checkpoint_set(dir, [agent.actor(), agent.critic(), agent.target_actor(), agent.target_critic()], &manifest(&log, &explore, &replay, "running"))?;
            }
        }
    }
    if let Some(dir) = dir {
        if let Some(sel) = &log.selected {
            checkpoint::save(&sel.actor, &dir.join(SELECTED_ACTOR_FILE))?;
        }
        save_checkpoint_set(dir, [agent.actor(), agent.critic(), agent.target_actor(), agent.target_critic()], &manifest(&log, &explore, &replay, "complete"))?;
    }
    Ok((agent, log))
}
