use rand::Rng;
use serde::{Deserialize, Serialize};

use super::noise::OuNoise;
use super::replay::{Batch, ReplayBuffer};
use crate::envs::Environment;
use crate::error::{Error, Result};
use crate::nn::{soft_update, Activation, AdamState, Gradients, Matrix, Mlp, MlpSpec, OutputActivation};
use crate::runtime::{agent_state, AgentView, Decision, EtcPolicy};

/// Number of decision scores `(d1, d2)` preceding the control part of an action.
pub const DECISION_SCORES: usize = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DdpgConfig {
    pub hidden: Vec<usize>,
    pub zeta: f64,
    pub kappa: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub eps_start: f64,
    pub eps_end: f64,
    /// Share of the step budget over which ε is annealed linearly.
    pub eps_anneal_fraction: f64,
    pub ou_theta: f64,
    /// OU diffusion as a multiple of `u_max`.
    pub ou_sigma_scale: f64,
    /// Environment steps before the first update.
    pub warmup: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    /// Multiplier applied to rewards before they enter the replay buffer.
    pub reward_scale: f64,
    /// Length of training episodes; 0 uses the run horizon.
    pub train_horizon: usize,
    /// Episodes between greedy evaluations used to keep the best actor; 0 disables selection.
    pub select_every: usize,
    /// Greedy episodes per selection evaluation.
    pub select_episodes: usize,
    /// Episodes between periodic checkpoints; 0 disables them.
    pub checkpoint_every: usize,
}

impl Default for DdpgConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            zeta: 0.99,
            kappa: 0.005,
            batch_size: 64,
            buffer_capacity: 100_000,
            eps_start: 1.0,
            eps_end: 0.05,
            eps_anneal_fraction: 0.2,
            ou_theta: 0.15,
            ou_sigma_scale: 0.2,
            warmup: 1000,
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            reward_scale: 0.01,
            train_horizon: 100,
            select_every: 5,
            select_episodes: 5,
            checkpoint_every: 0,
        }
    }
}

impl DdpgConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, field: &str, reason: &str| if ok { Ok(()) } else { Err(Error::invalid(format!("ddpg.{field}"), reason)) };
        check(!self.hidden.is_empty() && self.hidden.iter().all(|&h| h > 0), "hidden", "needs at least one positive width")?;
        check(self.zeta > 0.0 && self.zeta <= 1.0, "zeta", "must lie in (0, 1]")?;
        check(self.kappa > 0.0 && self.kappa <= 1.0, "kappa", "must lie in (0, 1]")?;
        check(self.batch_size > 0, "batch_size", "must be positive")?;
        check(self.buffer_capacity > 0, "buffer_capacity", "must be positive")?;
        check((0.0..=1.0).contains(&self.eps_start), "eps_start", "must lie in [0, 1]")?;
        check((0.0..=1.0).contains(&self.eps_end), "eps_end", "must lie in [0, 1]")?;
        check((0.0..=1.0).contains(&self.eps_anneal_fraction), "eps_anneal_fraction", "must lie in [0, 1]")?;
        check(self.ou_theta >= 0.0 && self.ou_theta <= 1.0, "ou_theta", "must lie in [0, 1]")?;
        check(self.ou_sigma_scale >= 0.0 && self.ou_sigma_scale.is_finite(), "ou_sigma_scale", "must be non-negative")?;
        check(self.actor_lr > 0.0 && self.actor_lr.is_finite(), "actor_lr", "must be positive")?;
        check(self.critic_lr > 0.0 && self.critic_lr.is_finite(), "critic_lr", "must be positive")?;
        check(self.reward_scale > 0.0 && self.reward_scale.is_finite(), "reward_scale", "must be positive")?;
        check(self.select_every == 0 || self.select_episodes > 0, "select_episodes", "must be positive when selection is enabled")?;
        Ok(())
    }

    /// Exploration rate before environment step `step` of a `total`-step run.
    pub fn epsilon(&self, step: usize, total: usize) -> f64 {
        let span = self.eps_anneal_fraction * total as f64;
        if span <= 0.0 || step as f64 >= span {
            return self.eps_end;
        }
        self.eps_start + (self.eps_end - self.eps_start) * step as f64 / span
    }
}

/// Actor output split into its decision scores and control.
#[derive(Clone, Debug, PartialEq)]
pub struct ActorOutput {
    pub d1: f64,
    pub d2: f64,
    pub u: Vec<f64>,
}

impl ActorOutput {
    pub fn from_raw(raw: &[f64]) -> Self {
        Self {
            d1: raw[0],
            d2: raw[1],
            u: raw[DECISION_SCORES..].to_vec(),
        }
    }

    pub fn raw(&self) -> Vec<f64> {
        let mut v = vec![self.d1, self.d2];
        v.extend_from_slice(&self.u);
        v
    }
}

/// `γ = 1` iff `d1 > d2`; ties do not communicate.
pub fn decide(d1: f64, d2: f64) -> bool {
    d1 > d2
}

/// Actor head: linear decision scores, `u_max`-scaled tanh control.
pub fn actor_spec(state_dim: usize, input_dim: usize, hidden: &[usize], u_max: f64) -> MlpSpec {
    let mut sizes = vec![state_dim];
    sizes.extend_from_slice(hidden);
    sizes.push(DECISION_SCORES + input_dim);
    let mut output = vec![OutputActivation::Linear; DECISION_SCORES];
    output.extend(std::iter::repeat_n(OutputActivation::Tanh, input_dim));
    let mut output_scale = vec![1.0; DECISION_SCORES];
    output_scale.extend(std::iter::repeat_n(u_max, input_dim));
    MlpSpec {
        sizes,
        hidden: Activation::Relu,
        output,
        output_scale,
    }
}

pub fn critic_spec(state_dim: usize, action_dim: usize, hidden: &[usize]) -> MlpSpec {
    let mut sizes = vec![state_dim + action_dim];
    sizes.extend_from_slice(hidden);
    sizes.push(1);
    MlpSpec::uniform(sizes, Activation::Relu, OutputActivation::Linear)
}

pub fn actor_out(actor: &Mlp, s: &[f64]) -> Result<ActorOutput> {
    Ok(ActorOutput::from_raw(&actor.predict_one(s)?))
}

/// `y_i = r_i + ζ (1 − done_i) Q'(s'_i, μ'(s'_i))`.
pub fn critic_target(batch: &Batch, target_actor: &Mlp, target_critic: &Mlp, zeta: f64) -> Result<Vec<f64>> {
    let a_next = target_actor.predict(&batch.s_next)?;
    let q_next = target_critic.predict(&batch.s_next.hstack(&a_next)?)?;
    Ok(batch
        .r
        .iter()
        .zip(&batch.done)
        .zip(q_next.data())
        .map(|((&r, &done), &q)| if done { r } else { r + zeta * q })
        .collect())
}

/// Mean squared error of `critic(s, a)` against `y` and its parameter gradient.
pub fn critic_loss_gradient(critic: &Mlp, s: &Matrix, a: &Matrix, y: &[f64]) -> Result<(f64, Gradients)> {
    let (q, cache) = critic.forward(&s.hstack(a)?)?;
    if q.rows() != y.len() {
        return Err(Error::shape("critic_loss_gradient", q.rows(), y.len()));
    }
    let n = y.len() as f64;
    let diff: Vec<f64> = q.data().iter().zip(y).map(|(q, y)| q - y).collect();
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / n;
    let grad = Matrix::from_vec(y.len(), 1, diff.iter().map(|d| 2.0 * d / n).collect())?;
    let (grads, _) = critic.backward(&cache, &grad)?;
    Ok((loss, grads))
}

/// Mean of `Q(s, μ(s))` over the rows of `states` and its gradient with
/// respect to the actor parameters (ascent direction).
pub fn actor_objective_gradient(actor: &Mlp, critic: &Mlp, states: &Matrix) -> Result<(f64, Gradients)> {
    let (a, actor_cache) = actor.forward(states)?;
    let (q, critic_cache) = critic.forward(&states.hstack(&a)?)?;
    let n = states.rows() as f64;
    let objective = q.data().iter().sum::<f64>() / n;
    let (_, input_grad) = critic.backward(&critic_cache, &Matrix::from_vec(states.rows(), 1, vec![1.0 / n; states.rows()])?)?;
    let dq_da = input_grad.columns(states.cols(), a.cols());
    let (grads, _) = actor.backward(&actor_cache, &dq_da)?;
    Ok((objective, grads))
}

/// Actor, critic, their targets, optimizers, replay memory and exploration noise.
#[derive(Clone, Debug)]
pub struct DdpgAgent {
    cfg: DdpgConfig,
    u_max: f64,
    actor: Mlp,
    critic: Mlp,
    target_actor: Mlp,
    target_critic: Mlp,
    actor_opt: AdamState,
    critic_opt: AdamState,
    pub buffer: ReplayBuffer,
    pub noise: OuNoise,
}

impl DdpgAgent {
    pub fn new<R: Rng + ?Sized>(env: &Environment, cfg: &DdpgConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let state_dim = env.feature_dim() + env.input_dim();
        let u_max = env.plant.u_max;
        let actor = Mlp::new(actor_spec(state_dim, env.input_dim(), &cfg.hidden, u_max), rng)?;
        let critic = Mlp::new(critic_spec(state_dim, DECISION_SCORES + env.input_dim(), &cfg.hidden), rng)?;
        Self::from_networks(cfg, actor, critic, u_max)
    }

    /// Targets start as exact copies of the online networks.
    pub fn from_networks(cfg: &DdpgConfig, actor: Mlp, critic: Mlp, u_max: f64) -> Result<Self> {
        cfg.validate()?;
        let action_dim = actor.output_width();
        if action_dim <= DECISION_SCORES {
            return Err(Error::Architecture(format!("actor emits {action_dim} values, needs decision scores and a control")));
        }
        if critic.input_width() != actor.input_width() + action_dim || critic.output_width() != 1 {
            return Err(Error::Architecture(format!(
                "critic {:?} does not score state {} plus action {action_dim}",
                critic.spec().sizes,
                actor.input_width()
            )));
        }
        let input_dim = action_dim - DECISION_SCORES;
        Ok(Self {
            actor_opt: AdamState::new(&actor, cfg.actor_lr),
            critic_opt: AdamState::new(&critic, cfg.critic_lr),
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor,
            critic,
            buffer: ReplayBuffer::new(cfg.buffer_capacity)?,
            noise: OuNoise::new(input_dim, cfg.ou_theta, cfg.ou_sigma_scale * u_max),
            u_max,
            cfg: cfg.clone(),
        })
    }

    pub fn config(&self) -> &DdpgConfig {
        &self.cfg
    }

    pub fn u_max(&self) -> f64 {
        self.u_max
    }

    pub fn actor(&self) -> &Mlp {
        &self.actor
    }

    pub fn critic(&self) -> &Mlp {
        &self.critic
    }

    pub fn target_actor(&self) -> &Mlp {
        &self.target_actor
    }

    pub fn target_critic(&self) -> &Mlp {
        &self.target_critic
    }

    pub fn state_dim(&self) -> usize {
        self.actor.input_width()
    }

    pub fn is_finite(&self) -> bool {
        self.actor.is_finite() && self.critic.is_finite() && self.target_actor.is_finite() && self.target_critic.is_finite()
    }

    pub fn actor_out(&self, s: &[f64]) -> Result<ActorOutput> {
        actor_out(&self.actor, s)
    }

    /// ε-greedy over the decision, OU noise on the control. Returns
    /// `(γ, u, raw action)`; on the forced branch the stored scores are `(γ, 1 − γ)`.
    pub fn explore_action<R: Rng + ?Sized>(&mut self, s: &[f64], epsilon: f64, rng: &mut R) -> Result<(bool, Vec<f64>, Vec<f64>)> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::invalid("epsilon", format!("{epsilon} outside [0, 1]")));
        }
        let out = self.actor_out(s)?;
        let forced = rng.random::<f64>() < epsilon;
        let coin = rng.random_bool(0.5);
        let noise = self.noise.sample(rng);
        let u: Vec<f64> = out.u.iter().zip(noise).map(|(u, n)| (u + n).clamp(-self.u_max, self.u_max)).collect();
        let (gamma, d1, d2) = if forced {
            (coin, f64::from(u8::from(coin)), f64::from(u8::from(!coin)))
        } else {
            (decide(out.d1, out.d2), out.d1, out.d2)
        };
        let raw = ActorOutput { d1, d2, u: u.clone() }.raw();
        Ok((gamma, u, raw))
    }

    pub fn critic_target(&self, batch: &Batch) -> Result<Vec<f64>> {
        critic_target(batch, &self.target_actor, &self.target_critic, self.cfg.zeta)
    }

    /// One Adam step on the critic's squared TD error; returns the loss before the step.
    pub fn critic_update(&mut self, batch: &Batch) -> Result<f64> {
        let y = self.critic_target(batch)?;
        let (loss, grads) = critic_loss_gradient(&self.critic, &batch.s, &batch.a, &y)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("critic loss {loss}")));
        }
        self.critic_opt.step(&mut self.critic, &grads)?;
        Ok(loss)
    }

    /// One Adam ascent step on `mean Q(s, μ(s))`; returns the objective before the step.
    pub fn actor_update(&mut self, batch: &Batch) -> Result<f64> {
        let (objective, mut grads) = actor_objective_gradient(&self.actor, &self.critic, &batch.s)?;
        grads.scale(-1.0);
        self.actor_opt.step(&mut self.actor, &grads)?;
        Ok(objective)
    }

    pub fn update_targets(&mut self) -> Result<()> {
        soft_update(&mut self.target_actor, &self.actor, self.cfg.kappa)?;
        soft_update(&mut self.target_critic, &self.critic, self.cfg.kappa)
    }

    /// Samples a mini-batch and performs critic, actor and target updates.
    pub fn learn<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<(f64, f64)> {
        let batch = self.buffer.sample(self.cfg.batch_size, rng)?;
        let loss = self.critic_update(&batch)?;
        let objective = self.actor_update(&batch)?;
        self.update_targets()?;
        Ok((loss, objective))
    }

    pub fn greedy_policy(&self) -> GreedyActor<'_> {
        GreedyActor { actor: &self.actor }
    }
}

/// Deterministic execution of a trained actor: no exploration, no noise.
#[derive(Clone, Copy, Debug)]
pub struct GreedyActor<'a> {
    pub actor: &'a Mlp,
}

impl EtcPolicy for GreedyActor<'_> {
    fn decide(&mut self, view: &AgentView<'_>) -> Result<Decision> {
        let out = actor_out(self.actor, &agent_state(view.features, view.u_prev))?;
        Ok(Decision {
            gamma: decide(out.d1, out.d2),
            raw: out.raw(),
            u: out.u,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::Task;
    use crate::rng;

    fn zero_agent(cfg: &DdpgConfig) -> DdpgAgent {
        let actor = Mlp::zeros(actor_spec(3, 1, &[8], 2.0)).unwrap();
        let critic = Mlp::zeros(critic_spec(3, 3, &[8])).unwrap();
        DdpgAgent::from_networks(cfg, actor, critic, 2.0).unwrap()
    }

    fn batch(rows: &[(Vec<f64>, Vec<f64>, f64, bool)]) -> Batch {
        let ts: Vec<_> = rows
            .iter()
            .map(|(s, a, r, done)| super::super::Transition {
                s: s.clone(),
                a: a.clone(),
                r: *r,
                s_next: s.iter().map(|v| v + 0.1).collect(),
                done: *done,
            })
            .collect();
        Batch::from_transitions(&ts.iter().collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn decide_examples() {
        assert!(decide(0.7, 0.3));
        assert!(!decide(0.3, 0.7));
        assert!(!decide(0.5, 0.5));
    }

    #[test]
    fn zero_actor_outputs_zero() {
        let agent = zero_agent(&DdpgConfig::default());
        assert_eq!(agent.actor_out(&[0.3, -1.0, 0.5]).unwrap(), ActorOutput { d1: 0.0, d2: 0.0, u: vec![0.0] });
    }

    #[test]
    fn control_head_is_bounded() {
        let env = Environment::pendulum(Task::Balance);
        let mut r = rng::stream(5, "init", 0);
        let mut agent = DdpgAgent::new(&env, &DdpgConfig::default(), &mut r).unwrap();
        for layer in agent.actor.layers_mut() {
            layer.weights.scale(50.0);
        }
        for i in 0..100 {
            let s = [i as f64 - 50.0, 3.0, -1.0];
            assert!(agent.actor_out(&s).unwrap().u[0].abs() <= 2.0);
        }
    }

    #[test]
    fn greedy_when_exploration_off() {
        let env = Environment::pendulum(Task::Balance);
        let mut r = rng::stream(6, "init", 0);
        let cfg = DdpgConfig {
            ou_sigma_scale: 0.0,
            ..DdpgConfig::default()
        };
        let mut agent = DdpgAgent::new(&env, &cfg, &mut r).unwrap();
        let s = [0.1, -0.2, 0.3];
        let out = agent.actor_out(&s).unwrap();
        let (gamma, u, raw) = agent.explore_action(&s, 0.0, &mut r).unwrap();
        assert_eq!(gamma, decide(out.d1, out.d2));
        assert_eq!(u, out.u);
        assert_eq!(raw, out.raw());
    }

    #[test]
    fn forced_branch_encodes_decision() {
        let mut agent = zero_agent(&DdpgConfig::default());
        let mut r = rng::stream(7, "explore", 0);
        for _ in 0..50 {
            let (gamma, _, raw) = agent.explore_action(&[0.0; 3], 1.0, &mut r).unwrap();
            assert_eq!(decide(raw[0], raw[1]), gamma);
            assert_eq!(raw[0] + raw[1], 1.0);
        }
    }

    #[test]
    fn targets_reduce_to_reward() {
        let b = batch(&[(vec![0.1, 0.2, 0.3], vec![1.0, 0.0, 0.5], 2.0, false), (vec![0.0, 0.2, 0.1], vec![0.0, 1.0, -0.5], -1.0, true)]);
        let agent = zero_agent(&DdpgConfig::default());
        assert_eq!(agent.critic_target(&b).unwrap(), vec![2.0, -1.0]);

        let env = Environment::pendulum(Task::Balance);
        let mut r = rng::stream(8, "init", 0);
        let trained = DdpgAgent::new(&env, &DdpgConfig::default(), &mut r).unwrap();
        let y = critic_target(&b, trained.target_actor(), trained.target_critic(), 0.0).unwrap();
        assert_eq!(y, vec![2.0, -1.0]);
        let y = critic_target(&b, trained.target_actor(), trained.target_critic(), 0.99).unwrap();
        assert_eq!(y[1], -1.0);
        assert_ne!(y[0], 2.0);
    }

    #[test]
    fn zero_nets_loss_is_mean_square_reward() {
        let b = batch(&[(vec![0.1, 0.2, 0.3], vec![1.0, 0.0, 0.5], 2.0, false), (vec![0.0, 0.2, 0.1], vec![0.0, 1.0, -0.5], -1.0, true)]);
        let mut agent = zero_agent(&DdpgConfig::default());
        assert_eq!(agent.critic_update(&b).unwrap(), 2.5);
    }

    #[test]
    fn exact_critic_is_not_moved() {
        let b = batch(&[(vec![0.1, 0.2, 0.3], vec![1.0, 0.0, 0.5], 0.0, true)]);
        let mut agent = zero_agent(&DdpgConfig::default());
        let before = agent.critic().clone();
        assert_eq!(agent.critic_update(&b).unwrap(), 0.0);
        assert_eq!(agent.critic(), &before);
    }

    #[test]
    fn overfitting_one_transition() {
        let env = Environment::pendulum(Task::Balance);
        let mut r = rng::stream(9, "init", 0);
        let cfg = DdpgConfig {
            zeta: 0.5,
            ..DdpgConfig::default()
        };
        let mut agent = DdpgAgent::new(&env, &cfg, &mut r).unwrap();
        let b = batch(&[(vec![0.1, 0.2, 0.3], vec![1.0, 0.0, 0.5], 1.5, true)]);
        let losses: Vec<f64> = (0..3000).map(|_| agent.critic_update(&b).unwrap()).collect();
        assert!(losses[2999] < 1e-6 * losses[0], "{} -> {}", losses[0], losses[2999]);
        let tail = &losses[2000..];
        assert!(tail.windows(200).all(|w| w[199] <= w[0]));
    }

    #[test]
    fn constant_critic_leaves_actor() {
        let env = Environment::pendulum(Task::Balance);
        let mut r = rng::stream(10, "init", 0);
        let actor = Mlp::new(actor_spec(3, 1, &[8], 2.0), &mut r).unwrap();
        let mut critic = Mlp::zeros(critic_spec(3, 3, &[8])).unwrap();
        critic.layers_mut()[1].bias = Matrix::row_vector(&[4.0]);
        let cfg = DdpgConfig::default();
        let mut agent = DdpgAgent::from_networks(&cfg, actor, critic, env.plant.u_max).unwrap();
        let before = agent.actor().clone();
        let b = batch(&[(vec![0.1, 0.2, 0.3], vec![1.0, 0.0, 0.5], 0.0, true)]);
        assert_eq!(agent.actor_update(&b).unwrap(), 4.0);
        assert_eq!(agent.actor(), &before);
    }

    #[test]
    fn actor_follows_critic_slope() {
        // Unbounded control head and Q(s, a) = u.
        let mut r = rng::stream(11, "init", 0);
        let spec = MlpSpec::uniform(vec![3, 3], Activation::Relu, OutputActivation::Linear);
        let actor = Mlp::new(spec, &mut r).unwrap();
        let mut critic = Mlp::zeros(MlpSpec::uniform(vec![6, 1], Activation::Relu, OutputActivation::Linear)).unwrap();
        critic.layers_mut()[0].weights[(5, 0)] = 1.0;
        let cfg = DdpgConfig {
            actor_lr: 1e-2,
            ..DdpgConfig::default()
        };
        let mut agent = DdpgAgent::from_networks(&cfg, actor, critic, 2.0).unwrap();
        let s = [0.4, 0.1, -0.3];
        let u0 = agent.actor_out(&s).unwrap().u[0];
        let b = batch(&[(s.to_vec(), vec![0.0; 3], 0.0, true)]);
        for _ in 0..10 {
            agent.actor_update(&b).unwrap();
        }
        assert!(agent.actor_out(&s).unwrap().u[0] > u0);
    }

    #[test]
    fn epsilon_schedule() {
        let cfg = DdpgConfig::default();
        assert_eq!(cfg.epsilon(0, 1000), 1.0);
        assert!((cfg.epsilon(100, 1000) - 0.525).abs() < 1e-12);
        assert_eq!(cfg.epsilon(200, 1000), 0.05);
        assert_eq!(cfg.epsilon(999, 1000), 0.05);
    }
}
