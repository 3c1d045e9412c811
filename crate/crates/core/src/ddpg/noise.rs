use rand::Rng;
use rand_distr::StandardNormal;

/// Discrete Ornstein–Uhlenbeck process with zero mean:
/// `x ← x − θ x + σ ξ`, `ξ ~ N(0, I)`.
#[derive(Clone, Debug, PartialEq)]
pub struct OuNoise {
    pub theta: f64,
    pub sigma: f64,
    state: Vec<f64>,
}

impl OuNoise {
    pub fn new(dim: usize, theta: f64, sigma: f64) -> Self {
        Self {
            theta,
            sigma,
            state: vec![0.0; dim],
        }
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn set_state(&mut self, state: &[f64]) {
        self.state.copy_from_slice(state);
    }

    pub fn reset(&mut self) {
        self.state.fill(0.0);
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> &[f64] {
        for x in &mut self.state {
            let xi: f64 = rng.sample(StandardNormal);
            *x += -self.theta * *x + self.sigma * xi;
        }
        &self.state
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn noiseless_decay_is_geometric() {
        let mut n = OuNoise::new(1, 0.15, 0.0);
        n.set_state(&[2.0]);
        let mut r = rng::stream(0, "ou", 0);
        for k in 1..=50 {
            let expect = 2.0 * 0.85f64.powi(k);
            assert!((n.sample(&mut r)[0] - expect).abs() < 1e-14 * expect);
        }
    }

    #[test]
    fn stationary_spread() {
        let (theta, sigma) = (0.15, 0.4);
        let mut n = OuNoise::new(1, theta, sigma);
        let mut r = rng::stream(3, "ou", 0);
        let draws: Vec<f64> = (0..200_000).map(|_| n.sample(&mut r)[0]).skip(1000).collect();
        let var = draws.iter().map(|x| x * x).sum::<f64>() / draws.len() as f64;
        let expect = sigma * sigma / (1.0 - (1.0 - theta) * (1.0 - theta));
        assert!((var / expect - 1.0).abs() < 0.1, "{var} vs {expect}");
    }
}
