//! Linearizes the pendulum at the upright equilibrium, solves the discrete
//! Riccati equation and runs the resulting controller with full communication.

use etcrl::baselines::{dare_residual, design_for, linearize};
use etcrl::envs::{Environment, Task};
use etcrl::rng;
use etcrl::runtime::{quadratic_cost, run_episode, AlwaysCommunicate};

fn main() -> etcrl::Result<()> {
    let env = Environment::pendulum(Task::Balance);
    let model = linearize(&env.plant, &[0.0, 0.0], &[0.0], 1e-6)?;
    println!("A = {:.6}B = {:.6}", model.a, model.b);
    let design = design_for(&env)?;
    let residual = dare_residual(&model.a, &model.b, &env.weights.q_matrix(), &env.weights.r_matrix(), &design.p)?;
    println!("K = {:.4}", design.k);
    println!("Riccati residual {residual:.2e}, closed-loop spectral radius {:.4}", design.spectral_radius);

    let mut policy = AlwaysCommunicate(|y: &[f64]| design.control(y));
    let mut total = 0.0;
    for i in 0..20 {
        let log = run_episode(&env, &mut policy, 500, &mut rng::stream(0, "eval-episode", i))?;
        total += quadratic_cost(&log, &env.weights.q, &env.weights.r) / 20.0;
    }
    println!("mean quadratic cost over 20 episodes with communication at every step: {total:.4e}");
    Ok(())
}
