use super::matrix::Matrix;
use super::mlp::{Gradients, Mlp};
use crate::error::{Error, Result};

/// Adam moments for one network. Minimizes; negate gradients to ascend.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    first: Vec<Matrix>,
    second: Vec<Matrix>,
}

impl AdamState {
    pub fn new(net: &Mlp, lr: f64) -> Self {
        Self::with_betas(net, lr, 0.9, 0.999, 1e-8)
    }

    pub fn with_betas(net: &Mlp, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        let zeros: Vec<Matrix> = net.params().map(|p| Matrix::zeros(p.rows(), p.cols())).collect();
        Self {
            lr,
            beta1,
            beta2,
            eps,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update to `net` from `grads`.
    pub fn step(&mut self, net: &mut Mlp, grads: &Gradients) -> Result<()> {
        if grads.layers.len() * 2 != self.first.len() {
            return Err(Error::shape("AdamState::step", format!("{} parameter blocks", self.first.len()), grads.layers.len() * 2));
        }
        for (i, (g, m)) in grads.iter().zip(&self.first).enumerate() {
            if g.shape() != m.shape() {
                return Err(Error::shape("AdamState::step", format!("{:?} for block {i}", m.shape()), format!("{:?}", g.shape())));
            }
            if let Some(pos) = g.data().iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "gradient block {i} (layer {}, {}), entry {pos}: {}",
                    i / 2,
                    if i % 2 == 0 { "weights" } else { "bias" },
                    g.data()[pos]
                )));
            }
        }

        self.step += 1;
        let t = self.step as i32;
        let correction1 = 1.0 - self.beta1.powi(t);
        let correction2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        for (((p, g), m), v) in net.params_mut().zip(grads.iter()).zip(&mut self.first).zip(&mut self.second) {
            for (((p, &g), m), v) in p.data_mut().iter_mut().zip(g.data()).zip(m.data_mut()).zip(v.data_mut()) {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m / correction1;
                let v_hat = *v / correction2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Moves every target parameter toward the online one:
/// `target ← κ·online + (1−κ)·target`.
pub fn soft_update(target: &mut Mlp, online: &Mlp, kappa: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&kappa) {
        return Err(Error::invalid("kappa", format!("{kappa} is outside [0, 1]")));
    }
    if !target.same_architecture(online) {
        return Err(Error::Architecture("soft update between different networks".into()));
    }
    for (t, o) in target.params_mut().zip(online.params()) {
        for (t, &o) in t.data_mut().iter_mut().zip(o.data()) {
            *t = if kappa == 1.0 { o } else { kappa * o + (1.0 - kappa) * *t };
        }
    }
    Ok(())
}
