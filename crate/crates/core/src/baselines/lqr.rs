use nalgebra::DMatrix;

use crate::envs::{Environment, PlantParams};
use crate::error::{Error, Result};

/// `x' ≈ A x + B u` around an operating point.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

/// Discrete LQR design, `u = K x`.
#[derive(Clone, Debug, PartialEq)]
pub struct LqrDesign {
    pub k: DMatrix<f64>,
    pub p: DMatrix<f64>,
    /// Spectral radius of `A + B K`.
    pub spectral_radius: f64,
}

impl LqrDesign {
    pub fn control(&self, x: &[f64]) -> Vec<f64> {
        apply_gain(&self.k, x)
    }
}

pub fn apply_gain(k: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (0..k.nrows()).map(|i| (0..k.ncols()).map(|j| k[(i, j)] * x[j]).sum()).collect()
}

/// Central-difference Jacobians of the noise-free step map at `(x*, u*)`.
pub fn linearize(plant: &PlantParams, x_star: &[f64], u_star: &[f64], eps: f64) -> Result<LinearModel> {
    let (n, l) = (plant.state_dim(), plant.input_dim());
    if x_star.len() != n || u_star.len() != l {
        return Err(Error::shape("linearize", format!("{n} states and {l} inputs"), format!("{} and {}", x_star.len(), u_star.len())));
    }
    linearize_map(|x, u| plant.dynamics(x, u), x_star, u_star, eps)
}

/// Central-difference Jacobians of an arbitrary deterministic step map.
pub fn linearize_map<F>(step: F, x_star: &[f64], u_star: &[f64], eps: f64) -> Result<LinearModel>
where
    F: Fn(&[f64], &[f64]) -> Vec<f64>,
{
    if !(eps > 0.0) {
        return Err(Error::invalid("eps", "must be positive"));
    }
    let n = x_star.len();
    let l = u_star.len();
    let probe = |x: &[f64], u: &[f64]| -> Result<Vec<f64>> {
        let out = step(x, u);
        if out.len() != n {
            return Err(Error::shape("linearize", format!("{n} next-state entries"), out.len()));
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("linearization probe at x={x:?}, u={u:?}")));
        }
        Ok(out)
    };
    let mut a = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, l);
    for j in 0..n {
        let mut plus = x_star.to_vec();
        let mut minus = x_star.to_vec();
        plus[j] += eps;
        minus[j] -= eps;
        let (fp, fm) = (probe(&plus, u_star)?, probe(&minus, u_star)?);
        for i in 0..n {
            a[(i, j)] = (fp[i] - fm[i]) / (2.0 * eps);
        }
    }
    for j in 0..l {
        let mut plus = u_star.to_vec();
        let mut minus = u_star.to_vec();
        plus[j] += eps;
        minus[j] -= eps;
        let (fp, fm) = (probe(x_star, &plus)?, probe(x_star, &minus)?);
        for i in 0..n {
            b[(i, j)] = (fp[i] - fm[i]) / (2.0 * eps);
        }
    }
    Ok(LinearModel { a, b })
}

fn riccati_map(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>, p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let bt_p = b.transpose() * p;
    let s = r + &bt_p * b;
    let s_inv = s.try_inverse().ok_or(Error::Singular("R + BᵀPB"))?;
    let inner = p - p * b * s_inv * bt_p;
    let next = q + a.transpose() * inner * a;
    Ok((&next + next.transpose()) * 0.5)
}

/// Solves the discrete algebraic Riccati equation by fixed-point iteration
/// from `P = Q`, stopping once `max |ΔP| < tol`.
pub fn solve_dare(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || q.shape() != (n, n) || r.shape() != (b.ncols(), b.ncols()) {
        return Err(Error::shape("solve_dare", "A n×n, B n×l, Q n×n, R l×l", format!("A {:?}, B {:?}, Q {:?}, R {:?}", a.shape(), b.shape(), q.shape(), r.shape())));
    }
    let mut p = q.clone();
    let mut change = f64::INFINITY;
    for _ in 0..max_iter {
        let next = riccati_map(a, b, q, r, &p)?;
        change = (&next - &p).amax();
        p = next;
        if !change.is_finite() {
            break;
        }
        if change < tol {
            return Ok(p);
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        last_change: change,
    })
}

/// `max |P − (Q + AᵀPA − AᵀPB(R+BᵀPB)⁻¹BᵀPA)|`.
pub fn dare_residual(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>, p: &DMatrix<f64>) -> Result<f64> {
    Ok((p - riccati_map(a, b, q, r, p)?).amax())
}

pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|c| c.norm()).fold(0.0, f64::max)
}

pub const DARE_TOL: f64 = 1e-12;
pub const DARE_MAX_ITER: usize = 1_000_000;

/// LQR gain `K = −(R + BᵀPB)⁻¹BᵀPA`, so that `u = K x`.
pub fn lqr_gain(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<LqrDesign> {
    let p = solve_dare(a, b, q, r, DARE_TOL, DARE_MAX_ITER)?;
    let bt_p = b.transpose() * &p;
    let s = r + &bt_p * b;
    let s_inv = s.try_inverse().ok_or(Error::Singular("R + BᵀPB"))?;
    let k = -(s_inv * bt_p * a);
    let spectral_radius = spectral_radius(&(a + b * &k));
    Ok(LqrDesign { k, p, spectral_radius })
}

/// LQR for an environment's reward weights, designed on the linearization
/// around the upright equilibrium.
pub fn design_for(env: &Environment) -> Result<LqrDesign> {
    let n = env.state_dim();
    let l = env.input_dim();
    let model = linearize(&env.plant, &vec![0.0; n], &vec![0.0; l], 1e-6)?;
    lqr_gain(&model.a, &model.b, &env.weights.q_matrix(), &env.weights.r_matrix())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn scalar_dare_golden_ratio() {
        let one = dmatrix![1.0];
        let p = solve_dare(&one, &one, &one, &one, 1e-14, 10_000).unwrap();
        assert!((p[(0, 0)] - (1.0 + 5f64.sqrt()) / 2.0).abs() < 1e-10);
        let design = lqr_gain(&one, &one, &one, &one).unwrap();
        let expected_k = -1.0 / ((1.0 + 5f64.sqrt()) / 2.0);
        assert!((design.k[(0, 0)] - expected_k).abs() < 1e-10);
        assert!((design.spectral_radius - (1.0 + expected_k)).abs() < 1e-10);
    }

    #[test]
    fn uncontrolled_stable_scalar_is_lyapunov_sum() {
        let a = 0.8;
        let p = solve_dare(&dmatrix![a], &dmatrix![0.0], &dmatrix![2.0], &dmatrix![1.0], 1e-14, 10_000).unwrap();
        assert!((p[(0, 0)] - 2.0 / (1.0 - a * a)).abs() < 1e-10);
        let design = lqr_gain(&dmatrix![a], &dmatrix![0.0], &dmatrix![2.0], &dmatrix![1.0]).unwrap();
        assert_eq!(design.k[(0, 0)].abs(), 0.0);
    }

    #[test]
    fn zero_state_cost_gives_zero_solution() {
        let a = dmatrix![1.2, 0.1; 0.0, 0.9];
        let b = dmatrix![0.0; 1.0];
        let p = solve_dare(&a, &b, &DMatrix::zeros(2, 2), &dmatrix![1.0], 1e-12, 100).unwrap();
        assert_eq!(p.amax(), 0.0);
    }

    #[test]
    fn unstabilizable_pair_does_not_converge() {
        let err = solve_dare(&dmatrix![2.0], &dmatrix![0.0], &dmatrix![1.0], &dmatrix![1.0], 1e-12, 500).unwrap_err();
        assert!(matches!(err, Error::NoConvergence { .. }));
    }

    #[test]
    fn linear_plant_recovered_exactly() {
        let m = linearize_map(|x, u| vec![0.9 * x[0] + 0.1 * u[0]], &[0.0], &[0.0], 1e-3).unwrap();
        assert!((m.a[(0, 0)] - 0.9).abs() < 1e-12);
        assert!((m.b[(0, 0)] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn richardson_step_halving() {
        let plant = PlantParams::pendulum();
        let x = [0.3, -0.5];
        let coarse = linearize(&plant, &x, &[0.2], 1e-3).unwrap();
        let fine = linearize(&plant, &x, &[0.2], 5e-4).unwrap();
        // central differences: error ∝ eps², so halving eps changes A by ~(3/4)·C·eps²
        assert!((&coarse.a - &fine.a).amax() < 1e-6);
        assert!((&coarse.b - &fine.b).amax() < 1e-9);
    }

    #[test]
    fn pendulum_jacobian_matches_analytic() {
        let plant = PlantParams::pendulum();
        let m = linearize(&plant, &[0.0, 0.0], &[0.0], 1e-5).unwrap();
        let (dt, c) = (plant.dt, 1.5 * plant.gravity / plant.length);
        let bu = 3.0 / (plant.mass * plant.length * plant.length);
        let exact_a = dmatrix![1.0 + dt * dt * c, dt; dt * c, 1.0];
        let exact_b = dmatrix![dt * dt * bu; dt * bu];
        assert!((&m.a - exact_a).amax() < 1e-6);
        assert!((&m.b - exact_b).amax() < 1e-6);
    }

    #[test]
    fn pendulum_lqr_is_stabilizing() {
        let env = Environment::pendulum(crate::envs::Task::Balance);
        let design = design_for(&env).unwrap();
        assert!(design.spectral_radius < 1.0);
        let model = linearize(&env.plant, &[0.0, 0.0], &[0.0], 1e-6).unwrap();
        let res = dare_residual(&model.a, &model.b, &env.weights.q_matrix(), &env.weights.r_matrix(), &design.p).unwrap();
        assert!(res < 1e-10);
    }
}
