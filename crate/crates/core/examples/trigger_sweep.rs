//! Threshold sweeps of the three model-based triggering laws on the
//! pendulum with LQR feedback.

use etcrl::baselines::{delta_sweep, design_for, max_stable_saving, TriggerLaw};
use etcrl::envs::{Environment, Task};

fn main() -> etcrl::Result<()> {
    let env = Environment::pendulum(Task::Balance);
    let design = design_for(&env)?;
    for law in TriggerLaw::ALL {
        let points = delta_sweep(&env, &design, law, &law.default_grid(), 0, 20, 500)?;
        println!("{}", law.name());
        for p in &points {
            println!("  δ {:9.4e}  comm {:.3}  cost {:.3e}  stable {:.2}", p.delta, p.mean_comm, p.mean_cost, p.stable_fraction);
        }
        if let Some((delta, saving)) = max_stable_saving(&points, 0.9) {
            println!("  largest saving with ≥ 90% stable episodes: {:.1}% at δ = {delta:.4}", 100.0 * saving);
        }
    }
    Ok(())
}
