//! Learns when to transmit the inputs of a fixed LQR controller on pendulum
//! balance and compares the result with communicating at every step.
//!
//! `cargo run --release --example comm_gate -- [lambda] [updates] [seed]`

use etcrl::baselines::design_for;
use etcrl::envs::{Environment, Task};
use etcrl::gate::{gate_episode, train_gate, FrozenController, GateConfig, GateMode};
use etcrl::rng;
use etcrl::runtime::{quadratic_cost, STABLE_ANGLE};

fn main() -> etcrl::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let lambda = args.first().and_then(|s| s.parse().ok()).unwrap_or(1e-6);
    let updates = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(1000);
    let seed = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0);

    let env = Environment::pendulum(Task::Balance);
    let controller = FrozenController::Lqr { gain: design_for(&env)?.k };
    let cfg = GateConfig { updates, ..GateConfig::default() };
    let started = std::time::Instant::now();
    let (gate, log) = train_gate(&env, &controller, lambda, &cfg, 500, seed)?;
    println!("trained {} updates in {:.1}s", log.batches.len(), started.elapsed().as_secs_f64());
    for b in log.batches.iter().step_by((log.batches.len() / 10).max(1)) {
        println!("  update {:4} comm {:.3} cost {:.3e}", b.update, b.comm_rate, b.cost);
    }

    let n = 100;
    let summary = |mode: GateMode| -> etcrl::Result<(f64, f64, usize)> {
        let (mut comm, mut cost, mut stable) = (0.0, 0.0, 0);
        for i in 0..n {
            let (ep, _) = gate_episode(&env, &controller, &gate, mode, 500, &mut rng::stream(seed, "eval-episode", i), &mut rng::stream(seed, "eval-gate", i))?;
            comm += ep.comm_rate() / n as f64;
            cost += quadratic_cost(&ep, &env.weights.q, &env.weights.r) / n as f64;
            stable += usize::from(ep.stays_within(0, STABLE_ANGLE));
        }
        Ok((comm, cost, stable))
    };
    let (_, base_cost, _) = summary(GateMode::Always)?;
    let (comm, cost, stable) = summary(GateMode::Threshold)?;
    println!("always-communicate cost {base_cost:.4e}");
    println!("gate (p > 0.5): comm {comm:.3}, cost {cost:.4e} ({:.2}x), stable {stable}/{n}", cost / base_cost);
    Ok(())
}
