//! Joint agent on pendulum swing-up from the hanging position. Success means
//! the pole stays within 0.2 rad of upright over the last 100 steps.
//!
//! `cargo run --release --example swingup -- [steps] [lambda] [seed]`

use etcrl::ddpg::{train, DdpgConfig, GreedyActor, TrainSpec};
use etcrl::envs::{Environment, Task};
use etcrl::rng;
use etcrl::runtime::{episode_stable, run_episode};

fn main() -> etcrl::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let steps = args.first().and_then(|s| s.parse().ok()).unwrap_or(100_000);
    let lambda = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0.1);
    let seed = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0);

    let mut env = Environment::pendulum(Task::Swingup);
    env.weights.lambda = lambda;
    // long enough for a swing and a short hold; full-length episodes are mostly spinning
    let cfg = DdpgConfig { train_horizon: 200, ..DdpgConfig::default() };
    let (agent, log) = train(&env, &cfg, TrainSpec { steps, horizon: 500, seed })?;
    let actor = log.deployed_actor(&agent);

    let n = 100;
    let (mut success, mut comm) = (0, 0.0);
    for i in 0..n {
        let ep = run_episode(&env, &mut GreedyActor { actor }, 500, &mut rng::stream(seed, "eval-episode", i))?;
        success += usize::from(episode_stable(&env, &ep));
        comm += ep.comm_rate() / n as f64;
    }
    println!("{} training episodes; success {success}/{n}, mean comm {comm:.3}", log.episodes.len());
    Ok(())
}
