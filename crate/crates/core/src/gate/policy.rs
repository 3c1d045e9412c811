use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{Activation, AdamState, Gradients, Matrix, Mlp, MlpSpec, OutputActivation};

/// Gate probabilities are kept inside `[P_MIN, 1 − P_MIN]`.
pub const P_MIN: f64 = 1e-6;

pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(P_MIN, 1.0 - P_MIN)
}

/// Stochastic communication gate `p = P(γ = 1 | x, u_now, u_prev)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GatePolicy {
    pub net: Mlp,
    /// Multiplies every network input.
    pub input_scale: f64,
}

impl GatePolicy {
    pub fn spec(state_dim: usize, input_dim: usize, hidden: &[usize]) -> MlpSpec {
        let mut sizes = vec![state_dim + 2 * input_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        MlpSpec::uniform(sizes, Activation::Relu, OutputActivation::Sigmoid)
    }

    pub fn new<R: Rng + ?Sized>(state_dim: usize, input_dim: usize, hidden: &[usize], input_scale: f64, rng: &mut R) -> Result<Self> {
        Self::from_net(Mlp::new(Self::spec(state_dim, input_dim, hidden), rng)?, input_scale)
    }

    pub fn from_net(net: Mlp, input_scale: f64) -> Result<Self> {
        if net.output_width() != 1 || net.spec().output[0] != OutputActivation::Sigmoid {
            return Err(Error::Architecture("gate needs a single sigmoid output".into()));
        }
        if !(input_scale > 0.0 && input_scale.is_finite()) {
            return Err(Error::invalid("gate.input_scale", "must be positive"));
        }
        Ok(Self { net, input_scale })
    }

    /// Scaled network input for `(x, u_now, u_prev)`.
    pub fn input(&self, x: &[f64], u_now: &[f64], u_prev: &[f64]) -> Vec<f64> {
        x.iter().chain(u_now).chain(u_prev).map(|v| v * self.input_scale).collect()
    }

    pub fn prob(&self, x: &[f64], u_now: &[f64], u_prev: &[f64]) -> Result<f64> {
        self.prob_of_input(&self.input(x, u_now, u_prev))
    }

    pub fn prob_of_input(&self, input: &[f64]) -> Result<f64> {
        Ok(clamp_prob(self.net.predict_one(input)?[0]))
    }
}

pub fn gate_prob(policy: &GatePolicy, x: &[f64], u_now: &[f64], u_prev: &[f64]) -> Result<f64> {
    policy.prob(x, u_now, u_prev)
}

/// `γ ~ Bernoulli(p)` together with `log π(γ)`.
pub fn sample_gate<R: Rng + ?Sized>(p: f64, rng: &mut R) -> (bool, f64) {
    let p = clamp_prob(p);
    let gamma = rng.random::<f64>() < p;
    (gamma, log_prob(p, gamma))
}

pub fn log_prob(p: f64, gamma: bool) -> f64 {
    let p = clamp_prob(p);
    if gamma {
        p.ln()
    } else {
        (1.0 - p).ln()
    }
}

/// One gate decision inside an episode.
#[derive(Clone, Debug, PartialEq)]
pub struct GateStep {
    /// Scaled network input.
    pub input: Vec<f64>,
    pub gamma: bool,
    pub log_prob: f64,
    pub reward: f64,
    /// False when the decision was imposed rather than taken by the gate.
    pub decided: bool,
}

/// `G_k = Σ_{j ≥ k} ζ^{j−k} r_j`.
pub fn reward_to_go(rewards: &[f64], zeta: f64) -> Vec<f64> {
    let mut g = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for k in (0..rewards.len()).rev() {
        acc = rewards[k] + zeta * acc;
        g[k] = acc;
    }
    g
}

/// Decisions of a batch of episodes, flattened.
#[derive(Clone, Debug, PartialEq)]
pub struct PgBatch {
    pub inputs: Matrix,
    pub gammas: Vec<bool>,
    pub returns: Vec<f64>,
}

impl PgBatch {
    pub fn from_episodes(episodes: &[Vec<GateStep>], zeta: f64) -> Result<Self> {
        let width = episodes
            .iter()
            .flatten()
            .map(|s| s.input.len())
            .next()
            .ok_or(Error::EmptyBatch("policy-gradient batch"))?;
        let (mut data, mut gammas, mut returns) = (Vec::new(), Vec::new(), Vec::new());
        for ep in episodes {
            let rewards: Vec<f64> = ep.iter().map(|s| s.reward).collect();
            for (step, g) in ep.iter().zip(reward_to_go(&rewards, zeta)) {
                if !step.decided {
                    continue;
                }
                if step.input.len() != width {
                    return Err(Error::shape("PgBatch", width, step.input.len()));
                }
                data.extend_from_slice(&step.input);
                gammas.push(step.gamma);
                returns.push(g);
            }
        }
        if gammas.is_empty() {
            return Err(Error::EmptyBatch("no gate decisions in batch"));
        }
        Ok(Self {
            inputs: Matrix::from_vec(gammas.len(), width, data)?,
            gammas,
            returns,
        })
    }

    pub fn len(&self) -> usize {
        self.gammas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gammas.is_empty()
    }

    /// `G − mean(G)`, optionally divided by the standard deviation.
    pub fn advantages(&self, normalize: bool) -> Vec<f64> {
        let n = self.returns.len() as f64;
        let b = self.returns.iter().sum::<f64>() / n;
        let mut adv: Vec<f64> = self.returns.iter().map(|g| g - b).collect();
        if normalize {
            let sd = (adv.iter().map(|a| a * a).sum::<f64>() / n).sqrt();
            if sd > 0.0 {
                adv.iter_mut().for_each(|a| *a /= sd);
            }
        }
        adv
    }
}

/// Surrogate `(1/N) Σ A_k log π(γ_k | s_k)` and its gradient (ascent
/// direction). Clamped probabilities contribute no gradient.
pub fn policy_gradient(net: &Mlp, batch: &PgBatch, advantages: &[f64]) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch("policy-gradient batch"));
    }
    if advantages.len() != batch.len() {
        return Err(Error::shape("policy_gradient", batch.len(), advantages.len()));
    }
    let (p, cache) = net.forward(&batch.inputs)?;
    let n = batch.len() as f64;
    let mut surrogate = 0.0;
    let mut grad = Vec::with_capacity(batch.len());
    for ((&raw, &gamma), &a) in p.data().iter().zip(&batch.gammas).zip(advantages) {
        surrogate += a * log_prob(raw, gamma) / n;
        let inside = (P_MIN..=1.0 - P_MIN).contains(&raw);
        grad.push(match (inside, gamma) {
            (false, _) => 0.0,
            (true, true) => a / (n * raw),
            (true, false) => -a / (n * (1.0 - raw)),
        });
    }
    let (grads, _) = net.backward(&cache, &Matrix::from_vec(batch.len(), 1, grad)?)?;
    Ok((surrogate, grads))
}

/// One ascent step on the reward-to-go weighted score with a batch-mean
/// baseline. Returns the mean undiscounted episode return.
pub fn reinforce_update(policy: &mut GatePolicy, opt: &mut AdamState, episodes: &[Vec<GateStep>], zeta: f64, normalize: bool) -> Result<f64> {
    if episodes.is_empty() {
        return Err(Error::EmptyBatch("no episodes"));
    }
    let batch = PgBatch::from_episodes(episodes, zeta)?;
    let (_, mut grads) = policy_gradient(&policy.net, &batch, &batch.advantages(normalize))?;
    grads.scale(-1.0);
    opt.step(&mut policy.net, &grads)?;
    Ok(episodes.iter().map(|e| e.iter().map(|s| s.reward).sum::<f64>()).sum::<f64>() / episodes.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::sigmoid;
    use crate::rng;

    fn gate(seed: u64) -> GatePolicy {
        GatePolicy::new(2, 1, &[8], 1.0, &mut rng::stream(seed, "gate", 0)).unwrap()
    }

    #[test]
    fn zero_net_is_fair_coin() {
        let g = GatePolicy::from_net(Mlp::zeros(GatePolicy::spec(2, 1, &[4])).unwrap(), 1.0).unwrap();
        assert_eq!(g.prob(&[0.3, 0.1], &[1.0], &[0.0]).unwrap(), 0.5);
    }

    #[test]
    fn saturated_logit_is_clamped() {
        let mut net = Mlp::zeros(GatePolicy::spec(2, 1, &[4])).unwrap();
        net.layers_mut()[1].bias = Matrix::row_vector(&[100.0]);
        let g = GatePolicy::from_net(net, 1.0).unwrap();
        assert_eq!(g.prob(&[0.0, 0.0], &[0.0], &[0.0]).unwrap(), 1.0 - P_MIN);
        assert!(log_prob(1.0, false).is_finite());
    }

    #[test]
    fn prob_is_sigmoid_of_logit() {
        let g = gate(1);
        let input = g.input(&[0.2, -0.1], &[0.5], &[0.4]);
        let mut linear = g.net.spec().clone();
        linear.output = vec![OutputActivation::Linear];
        let mut logit_net = Mlp::zeros(linear).unwrap();
        for (dst, src) in logit_net.layers_mut().iter_mut().zip(g.net.layers()) {
            *dst = src.clone();
        }
        let logit = logit_net.predict_one(&input).unwrap()[0];
        assert!((g.prob_of_input(&input).unwrap() - sigmoid(logit)).abs() < 1e-15);
    }

    #[test]
    fn reward_to_go_example() {
        assert_eq!(reward_to_go(&[1.0, 2.0, 4.0], 0.5), vec![3.0, 4.0, 4.0]);
    }

    fn step(input: Vec<f64>, gamma: bool, reward: f64) -> GateStep {
        GateStep {
            input,
            gamma,
            log_prob: 0.0,
            reward,
            decided: true,
        }
    }

    #[test]
    fn zero_advantage_no_update() {
        let mut g = gate(2);
        let before = g.clone();
        let mut opt = AdamState::new(&g.net, 1e-3);
        let eps = vec![vec![step(vec![0.1, 0.2, 0.3, 0.4], true, 1.0)], vec![step(vec![0.0, -0.2, 0.1, 0.4], false, 1.0)]];
        reinforce_update(&mut g, &mut opt, &eps, 0.9, false).unwrap();
        assert_eq!(g, before);
    }

    #[test]
    fn positive_advantage_raises_probability() {
        let mut g = gate(3);
        let mut opt = AdamState::new(&g.net, 1e-2);
        let x = vec![0.1, 0.2, 0.3, 0.4];
        let p0 = g.prob_of_input(&x).unwrap();
        let eps = vec![vec![step(x.clone(), true, 1.0)], vec![step(vec![-0.5, 0.0, 0.1, 0.0], false, -1.0)]];
        reinforce_update(&mut g, &mut opt, &eps, 0.9, false).unwrap();
        assert!(g.prob_of_input(&x).unwrap() > p0);
    }

    #[test]
    fn empty_batch_rejected() {
        let mut g = gate(4);
        let mut opt = AdamState::new(&g.net, 1e-3);
        assert!(matches!(reinforce_update(&mut g, &mut opt, &[], 0.9, false), Err(Error::EmptyBatch(_))));
    }

    #[test]
    fn sampling_extremes() {
        let mut r = rng::stream(5, "sample", 0);
        let ones = (0..10_000).filter(|_| sample_gate(1.0 - P_MIN, &mut r).0).count();
        assert!(ones > 9990);
        let ones = (0..10_000).filter(|_| sample_gate(0.0, &mut r).0).count();
        assert!(ones < 10);
        let (mut ra, mut rb) = (rng::stream(9, "s", 0), rng::stream(9, "s", 0));
        let a: Vec<bool> = (0..50).map(|_| sample_gate(0.3, &mut ra).0).collect();
        let b: Vec<bool> = (0..50).map(|_| sample_gate(0.3, &mut rb).0).collect();
        assert_eq!(a, b);
        assert!(a.iter().any(|&g| g) && a.iter().any(|&g| !g));
    }
}
