//! One event-triggered episode: a policy that transmits every fifth step,
//! the actuator holding the last input in between. Writes the step log as CSV.

use etcrl::baselines::design_for;
use etcrl::envs::{Environment, Task};
use etcrl::rng;
use etcrl::runtime::{run_episode, AgentView, Decision};

fn main() -> etcrl::Result<()> {
    let env = Environment::pendulum(Task::Balance);
    let design = design_for(&env)?;
    let mut every_fifth = |view: &AgentView<'_>| -> etcrl::Result<Decision> {
        let u = design.control(view.y);
        Ok(Decision { gamma: view.step % 5 == 0, raw: u.clone(), u })
    };
    let log = run_episode(&env, &mut every_fifth, 100, &mut rng::stream(0, "zoh-example", 0))?;
    log.check_invariants().map_err(|reason| etcrl::Error::EpisodeFault { step: log.len(), reason })?;
    println!("{} steps, communication rate {:.2}, max |θ| {:.2e}", log.len(), log.comm_rate(), log.max_abs_angle(0));
    for s in log.steps.iter().take(7) {
        println!("  γ={} held {:+.3e} applied {:+.3e}", u8::from(s.gamma), s.u_held[0], s.u_applied[0]);
    }
    let path = std::env::temp_dir().join("etcrl-zoh-episode.csv");
    log.save_csv(&path)?;
    println!("log written to {}", path.display());
    Ok(())
}
