use etcrl::baselines::{dare_residual, design_for, linearize, lqr_gain, solve_dare, spectral_radius, trigger_input_relative, trigger_norm, trigger_state_relative, TriggerLaw};
use etcrl::envs::{Environment, Task};
use etcrl::rng;
use nalgebra::{dmatrix, DMatrix};
use rand::Rng;

const DRAWS: usize = 10_000;

struct Draw {
    k: DMatrix<f64>,
    x: Vec<f64>,
    x_hat: Vec<f64>,
    delta: f64,
}

fn draws(label: &str) -> impl Iterator<Item = Draw> {
    let mut r = rng::stream(0, label, 0);
    (0..DRAWS).map(move |_| {
        let n = r.random_range(1..=4);
        let mut v = |scale: f64| (0..n).map(|_| scale * r.random_range(-1.0..1.0)).collect::<Vec<f64>>();
        let x = v(1.0);
        let x_hat = v(1.0);
        let k = DMatrix::from_vec(1, n, v(10.0));
        Draw { k, x, x_hat, delta: r.random_range(0.0..2.0) }
    })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

#[test]
fn no_trigger_at_zero_error() {
    for d in draws("zero-error") {
        assert!(!trigger_state_relative(&d.x, &d.x, d.delta));
        assert!(!trigger_input_relative(&d.k, &d.x, &d.x, d.delta));
    }
}

#[test]
fn norm_law_with_zero_threshold_fires_exactly_off_the_origin() {
    for d in draws("norm-zero") {
        assert!(trigger_norm(&d.x, 0.0));
        assert!(!trigger_norm(&vec![0.0; d.x.len()], 0.0));
    }
}

#[test]
fn relative_laws_are_invariant_to_joint_scaling() {
    let mut r = rng::stream(1, "scaling", 0);
    for d in draws("scaling") {
        // powers of two scale every norm exactly
        let c = 2f64.powi(r.random_range(-20..20));
        let (xs, hs): (Vec<f64>, Vec<f64>) = (d.x.iter().map(|v| c * v).collect(), d.x_hat.iter().map(|v| c * v).collect());
        assert_eq!(trigger_state_relative(&d.x_hat, &d.x, d.delta), trigger_state_relative(&hs, &xs, d.delta));
        assert_eq!(trigger_input_relative(&d.k, &d.x_hat, &d.x, d.delta), trigger_input_relative(&d.k, &hs, &xs, d.delta));

        // arbitrary factors, away from the rounding band around the boundary
        let c: f64 = r.random_range(1e-3..1e3);
        let (xs, hs): (Vec<f64>, Vec<f64>) = (d.x.iter().map(|v| c * v).collect(), d.x_hat.iter().map(|v| c * v).collect());
        let err: Vec<f64> = d.x_hat.iter().zip(&d.x).map(|(a, b)| a - b).collect();
        let margin = (norm(&err) - d.delta * norm(&d.x)).abs() / norm(&d.x).max(1e-300);
        if margin > 1e-9 {
            assert_eq!(trigger_state_relative(&d.x_hat, &d.x, d.delta), trigger_state_relative(&hs, &xs, d.delta));
        }
    }
}

#[test]
fn boundary_is_strict() {
    let mut exact = 0;
    for d in draws("boundary") {
        let n = norm(&d.x);
        if n == 0.0 {
            continue;
        }
        assert!(!trigger_norm(&d.x, n));
        assert!(trigger_norm(&d.x, n * (1.0 - 1e-12)));

        let e = norm(&d.x_hat.iter().zip(&d.x).map(|(a, b)| a - b).collect::<Vec<_>>());
        let delta = e / n;
        if delta * n == e {
            exact += 1;
            assert!(!trigger_state_relative(&d.x_hat, &d.x, delta));
        }
        assert!(trigger_state_relative(&d.x_hat, &d.x, delta * (1.0 - 1e-9)));
        assert!(!trigger_state_relative(&d.x_hat, &d.x, delta * (1.0 + 1e-9)));
    }
    assert!(exact > DRAWS / 2, "only {exact} draws landed exactly on the boundary");
}

#[test]
fn law_dispatch_matches_free_functions() {
    for d in draws("dispatch") {
        assert_eq!(TriggerLaw::Norm.fires(&d.k, &d.x_hat, &d.x, d.delta), trigger_norm(&d.x, d.delta));
        assert_eq!(TriggerLaw::InputRelative.fires(&d.k, &d.x_hat, &d.x, d.delta), trigger_input_relative(&d.k, &d.x_hat, &d.x, d.delta));
        assert_eq!(TriggerLaw::StateRelative.fires(&d.k, &d.x_hat, &d.x, d.delta), trigger_state_relative(&d.x_hat, &d.x, d.delta));
    }
}

#[test]
fn scalar_riccati_equation_has_golden_ratio_solution() {
    let one = dmatrix![1.0];
    let p = solve_dare(&one, &one, &one, &one, 1e-14, 10_000).unwrap();
    assert!((p[(0, 0)] - (1.0 + 5f64.sqrt()) / 2.0).abs() < 1e-8);
}

#[test]
fn pendulum_linearization_matches_analytic_jacobian() {
    let env = Environment::pendulum(Task::Balance);
    let model = linearize(&env.plant, &[0.0, 0.0], &[0.0], 1e-6).unwrap();
    let (dt, c, d) = (0.05, 1.5 * 9.81, 3.0);
    let a = dmatrix![1.0 + dt * dt * c, dt; dt * c, 1.0];
    let b = dmatrix![dt * dt * d; dt * d];
    assert!((&model.a - a).amax() < 1e-6);
    assert!((&model.b - b).amax() < 1e-6);
}

#[test]
fn pendulum_lqr_is_stabilizing() {
    let env = Environment::pendulum(Task::Balance);
    let design = design_for(&env).unwrap();
    let model = linearize(&env.plant, &[0.0, 0.0], &[0.0], 1e-6).unwrap();
    let residual = dare_residual(&model.a, &model.b, &env.weights.q_matrix(), &env.weights.r_matrix(), &design.p).unwrap();
    assert!(residual < 1e-7);
    assert!(design.spectral_radius < 1.0);
    assert!(spectral_radius(&(&model.a + &model.b * &design.k)) < 1.0);
    assert!((&design.p - design.p.transpose()).amax() < 1e-9);
    assert!(design.p.symmetric_eigenvalues().iter().all(|&v| v >= 0.0));
}

#[test]
fn cart_pole_lqr_is_stabilizing() {
    let env = Environment::cart_pole(Task::Balance);
    let design = design_for(&env).unwrap();
    assert!(design.spectral_radius < 1.0);
}

#[test]
fn uncontrollable_pair_is_reported() {
    let a = dmatrix![2.0];
    let b = dmatrix![0.0];
    assert!(lqr_gain(&a, &b, &dmatrix![1.0], &dmatrix![1.0]).is_err());
}
