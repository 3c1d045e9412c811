use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantKind {
    /// Rod on a motor, `x = (θ, θ̇)`, `θ = 0` upright.
    Pendulum,
    /// Pole on a force-driven cart, `x = (p, ṗ, θ, θ̇)`.
    CartPole,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Balance,
    Swingup,
}

/// Physical constants, input bound and noise variances of a plant.
///
/// For the pendulum `mass`/`length` describe a uniform rod of full length
/// `length`; for the cart-pole they describe the pole, with `length` the
/// distance from pivot to the pole's centre of mass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantParams {
    pub kind: PlantKind,
    /// Seconds per discrete step.
    pub dt: f64,
    pub mass: f64,
    pub length: f64,
    pub gravity: f64,
    /// Cart mass; ignored by the pendulum.
    pub cart_mass: f64,
    /// Symmetric bound on the input (N·m or N).
    pub u_max: f64,
    /// Diagonal of the process noise covariance.
    pub process_var: Vec<f64>,
    /// Diagonal of the measurement noise covariance.
    pub meas_var: Vec<f64>,
    /// Diagonal of the initial state covariance.
    pub init_var: Vec<f64>,
}

pub const DEFAULT_NOISE_STD: f64 = 1e-4;

impl PlantParams {
    pub fn pendulum() -> Self {
        let var = DEFAULT_NOISE_STD * DEFAULT_NOISE_STD;
        Self {
            kind: PlantKind::Pendulum,
            dt: 0.05,
            mass: 1.0,
            length: 1.0,
            gravity: 9.81,
            cart_mass: 0.0,
            u_max: 2.0,
            process_var: vec![var; 2],
            meas_var: vec![var; 2],
            init_var: vec![var; 2],
        }
    }

    pub fn cart_pole() -> Self {
        let var = DEFAULT_NOISE_STD * DEFAULT_NOISE_STD;
        Self {
            kind: PlantKind::CartPole,
            dt: 0.025,
            mass: 0.1,
            length: 0.5,
            gravity: 9.81,
            cart_mass: 1.0,
            u_max: 10.0,
            process_var: vec![var; 4],
            meas_var: vec![var; 4],
            init_var: vec![var; 4],
        }
    }

    pub fn default_for(kind: PlantKind) -> Self {
        match kind {
            PlantKind::Pendulum => Self::pendulum(),
            PlantKind::CartPole => Self::cart_pole(),
        }
    }

    /// Copy with every covariance set to zero.
    pub fn noise_free(&self) -> Self {
        let n = self.state_dim();
        Self {
            process_var: vec![0.0; n],
            meas_var: vec![0.0; n],
            init_var: vec![0.0; n],
            ..self.clone()
        }
    }

    pub fn state_dim(&self) -> usize {
        match self.kind {
            PlantKind::Pendulum => 2,
            PlantKind::CartPole => 4,
        }
    }

    pub fn input_dim(&self) -> usize {
        1
    }

    /// Position of the pole angle inside the state vector.
    pub fn angle_index(&self) -> usize {
        match self.kind {
            PlantKind::Pendulum => 0,
            PlantKind::CartPole => 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("plant.{name}"), format!("must be positive, got {v}")))
            }
        };
        positive("dt", self.dt)?;
        positive("u_max", self.u_max)?;
        positive("mass", self.mass)?;
        positive("length", self.length)?;
        if !self.gravity.is_finite() {
            return Err(Error::invalid("plant.gravity", "must be finite"));
        }
        if self.kind == PlantKind::CartPole {
            positive("cart_mass", self.cart_mass)?;
        }
        let n = self.state_dim();
        for (name, var) in [("process_var", &self.process_var), ("meas_var", &self.meas_var), ("init_var", &self.init_var)] {
            if var.len() != n {
                return Err(Error::invalid(format!("plant.{name}"), format!("needs {n} entries, got {}", var.len())));
            }
            if var.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::invalid(format!("plant.{name}"), "variances must be finite and non-negative"));
            }
        }
        Ok(())
    }

    pub fn clamp_input(&self, u: f64) -> f64 {
        u.clamp(-self.u_max, self.u_max)
    }

    /// One noise-free integration step without angle wrapping. The input is
    /// clamped to `±u_max` first.
    pub fn dynamics(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let force = self.clamp_input(u[0]);
        let dt = self.dt;
        match self.kind {
            PlantKind::Pendulum => {
                let (theta, omega) = (x[0], x[1]);
                let accel = 3.0 * self.gravity / (2.0 * self.length) * theta.sin()
                    + 3.0 * force / (self.mass * self.length * self.length);
                let omega = omega + dt * accel;
                vec![theta + dt * omega, omega]
            }
            PlantKind::CartPole => {
                let (pos, vel, theta, omega) = (x[0], x[1], x[2], x[3]);
                let total = self.cart_mass + self.mass;
                let pole_moment = self.mass * self.length;
                let (sin, cos) = theta.sin_cos();
                let temp = (force + pole_moment * omega * omega * sin) / total;
                let theta_acc =
                    (self.gravity * sin - cos * temp) / (self.length * (4.0 / 3.0 - self.mass * cos * cos / total));
                let acc = temp - pole_moment * theta_acc * cos / total;
                let vel = vel + dt * acc;
                let omega = omega + dt * theta_acc;
                vec![pos + dt * vel, vel, theta + dt * omega, omega]
            }
        }
    }

    /// Initial state: around upright for balance, around hanging for swing-up.
    pub fn reset<R: Rng + ?Sized>(&self, task: Task, rng: &mut R) -> PlantState {
        let mut x = gaussian(&self.init_var, rng);
        if task == Task::Swingup {
            let a = self.angle_index();
            x[a] = angle_wrap(PI + x[a]);
        }
        PlantState { x }
    }

    /// `x' = f(x, u) + v`, `y' = x' + w`, angle wrapped to `(−π, π]`.
    pub fn step<R: Rng + ?Sized>(&self, state: &PlantState, u: &[f64], rng: &mut R) -> Result<(PlantState, Observation)> {
        let mut next = self.dynamics(&state.x, u);
        for (v, n) in next.iter_mut().zip(gaussian(&self.process_var, rng)) {
            *v += n;
        }
        let a = self.angle_index();
        next[a] = angle_wrap(next[a]);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::EpisodeFault {
                step: 0,
                reason: format!("non-finite plant state {next:?}"),
            });
        }
        let next = PlantState { x: next };
        let obs = self.observe(&next, rng);
        Ok((next, obs))
    }

    /// `y = x + w`.
    pub fn observe<R: Rng + ?Sized>(&self, state: &PlantState, rng: &mut R) -> Observation {
        let y = state.x.iter().zip(gaussian(&self.meas_var, rng)).map(|(x, w)| x + w).collect();
        Observation { y }
    }

    /// Total mechanical energy of the pendulum, zero when hanging at rest.
    pub fn pendulum_energy(&self, x: &[f64]) -> f64 {
        let inertia = self.mass * self.length * self.length / 3.0;
        0.5 * inertia * x[1] * x[1] + self.mass * self.gravity * self.length / 2.0 * (1.0 + x[0].cos())
    }
}

fn gaussian<R: Rng + ?Sized>(var: &[f64], rng: &mut R) -> Vec<f64> {
    var.iter()
        .map(|v| {
            let z: f64 = rng.sample(StandardNormal);
            v.sqrt() * z
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlantState {
    pub x: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub y: Vec<f64>,
}

/// Maps an angle into `(−π, π]`.
pub fn angle_wrap(theta: f64) -> f64 {
    let r = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if r <= -PI {
        PI
    } else {
        r
    }
}

/// Cart-pole episodes end once the pole or cart leaves its safe band;
/// pendulum episodes never end early.
pub fn terminated(params: &PlantParams, state: &PlantState) -> bool {
    match params.kind {
        PlantKind::Pendulum => false,
        PlantKind::CartPole => state.x[2].abs() > CART_POLE_ANGLE_LIMIT || state.x[0].abs() > CART_POLE_POSITION_LIMIT,
    }
}

pub const CART_POLE_ANGLE_LIMIT: f64 = 0.21;
pub const CART_POLE_POSITION_LIMIT: f64 = 2.4;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn wrap_examples() {
        assert_eq!(angle_wrap(0.0), 0.0);
        assert!((angle_wrap(PI + 0.1) - (-PI + 0.1)).abs() < 1e-12);
        assert_eq!(angle_wrap(-3.0 * PI), PI);
        assert_eq!(angle_wrap(PI), PI);
        assert_eq!(angle_wrap(-PI), PI);
    }

    #[test]
    fn zero_covariance_resets() {
        let p = PlantParams::pendulum().noise_free();
        let mut r = rng::stream(0, "reset", 0);
        assert_eq!(p.reset(Task::Balance, &mut r).x, vec![0.0, 0.0]);
        assert_eq!(p.reset(Task::Swingup, &mut r).x, vec![PI, 0.0]);
    }

    #[test]
    fn equilibria_are_fixed_points() {
        let p = PlantParams::pendulum().noise_free();
        let mut r = rng::stream(0, "step", 0);
        let (up, _) = p.step(&PlantState { x: vec![0.0, 0.0] }, &[0.0], &mut r).unwrap();
        assert_eq!(up.x, vec![0.0, 0.0]);
        let (down, _) = p.step(&PlantState { x: vec![PI, 0.0] }, &[0.0], &mut r).unwrap();
        assert!((down.x[0].abs() - PI).abs() < 1e-12);
        assert!(down.x[1].abs() < 1e-12);
    }

    #[test]
    fn one_step_matches_reference_integrator() {
        // Independent transcription: θ̈ = 3g/(2l) sinθ + 3u/(ml²), ω first then θ.
        let (g, l, m, dt) = (9.81_f64, 1.0_f64, 1.0_f64, 0.05_f64);
        let theta0 = 0.1_f64;
        let omega1 = 0.0 + dt * (1.5 * g / l * theta0.sin() + 3.0 * 0.0 / (m * l * l));
        let theta1 = theta0 + dt * omega1;

        let p = PlantParams::pendulum().noise_free();
        let mut r = rng::stream(0, "step", 0);
        let (next, obs) = p.step(&PlantState { x: vec![0.1, 0.0] }, &[0.0], &mut r).unwrap();
        assert!((next.x[0] - theta1).abs() < 1e-14 && (next.x[1] - omega1).abs() < 1e-14, "{:?}", next.x);
        assert_eq!(obs.y, next.x);
    }

    #[test]
    fn input_is_clamped() {
        let p = PlantParams::pendulum().noise_free();
        let x = [0.05, -0.3];
        assert_eq!(p.dynamics(&x, &[10.0 * p.u_max]), p.dynamics(&x, &[p.u_max]));
        assert_eq!(p.dynamics(&x, &[-10.0 * p.u_max]), p.dynamics(&x, &[-p.u_max]));
    }

    #[test]
    fn cart_pole_termination() {
        let p = PlantParams::cart_pole();
        let s = |pos: f64, th: f64| PlantState { x: vec![pos, 0.0, th, 0.0] };
        assert!(!terminated(&p, &s(0.0, 0.0)));
        assert!(terminated(&p, &s(0.0, 0.3)));
        assert!(terminated(&p, &s(2.5, 0.0)));
        let pend = PlantParams::pendulum();
        assert!(!terminated(&pend, &PlantState { x: vec![PI, 0.0] }));
    }

    #[test]
    fn validation_rejects_bad_params() {
        let mut p = PlantParams::pendulum();
        p.dt = -0.05;
        assert!(p.validate().is_err());
        let mut p = PlantParams::pendulum();
        p.meas_var = vec![1.0];
        assert!(p.validate().is_err());
        let mut p = PlantParams::pendulum();
        p.init_var[0] = -1.0;
        assert!(p.validate().is_err());
        assert!(PlantParams::cart_pole().validate().is_ok());
    }

    #[test]
    fn cart_pole_upright_is_equilibrium() {
        let p = PlantParams::cart_pole().noise_free();
        let mut r = rng::stream(0, "cp", 0);
        let (next, _) = p.step(&PlantState { x: vec![0.0; 4] }, &[0.0], &mut r).unwrap();
        assert_eq!(next.x, vec![0.0; 4]);
        // a push to the right accelerates the cart right and tips the pole left
        let (next, _) = p.step(&PlantState { x: vec![0.0; 4] }, &[5.0], &mut r).unwrap();
        assert!(next.x[1] > 0.0 && next.x[3] < 0.0);
    }
}
