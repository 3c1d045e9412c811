//! Drives the experiment harness: a short λ sweep of the separated gate on
//! LQR, written as a summary CSV sorted by communication rate.
//!
//! `cargo run --release --example lambda_sweep -- [out_dir]`

use etcrl::harness::{parse_config_str, run_sweep, SweepAxis};

fn main() -> etcrl::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| std::env::temp_dir().join("etcrl-lambda-sweep").display().to_string());
    let text = r#"
task = "pendulum_balance"
approach = "separated"
seeds = [0, 1]
eval_episodes = 20

[gate]
updates = 200

[sweep]
grid = [1e-7, 1e-6, 1e-5, 1e-4]
"#;
    let cfg = parse_config_str(text, &[format!("out=\"{out}\"")])?;
    let rows = run_sweep(&cfg, SweepAxis::Lambda)?;
    println!("{:>10} {:>8} {:>12} {:>8}  status", "lambda", "comm", "cost", "stable");
    for r in &rows {
        println!(
            "{:>10.1e} {:>8.3} {:>12.4e} {:>8.2}  {}",
            r.grid_value.unwrap_or(f64::NAN),
            r.mean_comm,
            r.mean_cost,
            r.stable_fraction,
            r.status
        );
    }
    println!("summary written to {out}/sweep.csv");
    Ok(())
}
