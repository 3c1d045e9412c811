//! Trains the joint communication/control agent on pendulum balance and
//! evaluates the greedy policy.
//!
//! `cargo run --release --example joint_ddpg -- [steps] [lambda] [seed]`

use etcrl::ddpg::{train, DdpgConfig, GreedyActor, TrainSpec};
use etcrl::envs::{Environment, Task};
use etcrl::rng;
use etcrl::runtime::{quadratic_cost, run_episode, STABLE_ANGLE};

fn main() -> etcrl::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let steps = args.first().and_then(|s| s.parse().ok()).unwrap_or(100_000);
    let lambda = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(4.641588833612779);
    let seed = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0);

    let mut env = Environment::pendulum(Task::Balance);
    env.weights.lambda = lambda;
    let cfg = DdpgConfig::default();
    let started = std::time::Instant::now();
    let (agent, log) = train(&env, &cfg, TrainSpec { steps, horizon: 500, seed })?;
    println!("trained {} steps, {} episodes in {:.1}s", log.steps, log.episodes.len(), started.elapsed().as_secs_f64());
    for e in log.episodes.iter().step_by((log.episodes.len() / 10).max(1)) {
        println!("  ep {:4} return {:10.3} comm {:.3} max|θ| {:.3}", e.episode, e.total_reward, e.comm_rate, e.max_abs_angle);
    }

    let (mut stable, mut comm, mut cost, mut held) = (0, 0.0, 0.0, 0.0);
    let n = 100;
    let actor = log.deployed_actor(&agent);
    for i in 0..n {
        let mut r = rng::stream(seed, "eval-episode", i);
        let ep = run_episode(&env, &mut GreedyActor { actor }, 500, &mut r)?;
        stable += usize::from(ep.stays_within(0, STABLE_ANGLE));
        held += ep.steps.iter().take_while(|s| s.x[0].abs() <= STABLE_ANGLE).count() as f64 / n as f64;
        comm += ep.comm_rate() / n as f64;
        cost += quadratic_cost(&ep, &env.weights.q, &env.weights.r) / n as f64;
    }
    if let Some(sel) = &log.selected {
        println!("deploying the actor selected after episode {}", sel.episode);
    }
    println!("eval: stable {stable}/{n}, mean comm {comm:.3}, mean cost {cost:.4e}, mean steps upright {held:.1}");
    Ok(())
}
