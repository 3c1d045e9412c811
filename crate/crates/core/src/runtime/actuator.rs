/// Zero-order-hold actuator at the far end of the network link.
#[derive(Clone, Debug, PartialEq)]
pub struct Actuator {
    u_prev: Vec<f64>,
    x_hat: Vec<f64>,
}

impl Actuator {
    /// Fresh actuator: held input zero, no state communicated yet (zeros).
    pub fn new(input_dim: usize, state_dim: usize) -> Self {
        Self {
            u_prev: vec![0.0; input_dim],
            x_hat: vec![0.0; state_dim],
        }
    }

    /// Last applied input.
    pub fn u_prev(&self) -> &[f64] {
        &self.u_prev
    }

    /// State at the last communication.
    pub fn x_hat(&self) -> &[f64] {
        &self.x_hat
    }

    /// On `gamma` the new input is latched together with the current state;
    /// otherwise the held input is re-applied.
    pub fn apply(&mut self, gamma: bool, u_new: &[f64], x_now: &[f64]) -> Vec<f64> {
        if gamma {
            self.u_prev.copy_from_slice(u_new);
            self.x_hat.copy_from_slice(x_now);
        }
        self.u_prev.clone()
    }
}
