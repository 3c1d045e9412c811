use std::path::Path;

use etcrl::ddpg::{DdpgAgent, CHECKPOINT_FILES};
use etcrl::harness::{parse_config_str, run_baseline, run_eval, run_sweep, run_training, seed_dir, summary_bytes, RunConfig, SweepAxis, EFFECTIVE_CONFIG};
use etcrl::nn::checkpoint;
use etcrl::rng;

fn config(text: &str, out: &Path, overrides: &[&str]) -> RunConfig {
    let mut all: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    all.push(format!("out=\"{}\"", out.display()));
    parse_config_str(text, &all).unwrap()
}

const JOINT: &str = "task = \"pendulum_balance\"\napproach = \"joint\"\n";
const SEPARATED: &str = "task = \"pendulum_balance\"\napproach = \"separated\"\n";

fn without_wall_time(rows: &[etcrl::harness::ResultRow]) -> Vec<etcrl::harness::ResultRow> {
    rows.iter().cloned().map(|mut r| {
        r.wall_time = 0.0;
        r
    }).collect()
}

fn file_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = walk(dir).into_iter().map(|p| (p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap())).collect();
    files.sort();
    files
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            out.extend(walk(&path));
        } else {
            out.push(path);
        }
    }
    out
}

#[test]
fn effective_config_is_canonical_and_reparseable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(JOINT, dir.path(), &["reward.lambda=2.5", "ddpg.hidden=[32, 16]", "seeds=[3]"]);
    assert_eq!(cfg.reward.lambda, 2.5);
    assert_eq!(cfg.ddpg.hidden, vec![32, 16]);
    cfg.write_effective(dir.path()).unwrap();
    let text = std::fs::read_to_string(dir.path().join(EFFECTIVE_CONFIG)).unwrap();
    let again = parse_config_str(&text, &[]).unwrap();
    assert_eq!(again, cfg);
    assert_eq!(again.to_toml().unwrap(), text);
}

#[test]
fn invalid_configs_are_rejected_before_running() {
    let dir = tempfile::tempdir().unwrap();
    for bad in [
        vec!["reward.lambda=-1"],
        vec!["ddpg.zeta=1.5"],
        vec!["seeds=[]"],
        vec!["horizon=0"],
        vec!["ddpg.nonexistent=1"],
        vec!["plant.dt=0"],
        vec!["approach=\"baseline:bogus\""],
    ] {
        let mut all: Vec<String> = bad.iter().map(|s| s.to_string()).collect();
        all.push(format!("out=\"{}\"", dir.path().display()));
        assert!(parse_config_str(JOINT, &all).is_err(), "{bad:?} accepted");
    }
    assert!(parse_config_str("approach = \"joint\"", &[]).is_err());
}

#[test]
fn every_seed_gets_a_checkpoint_set() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(JOINT, dir.path(), &["train_steps=40", "ddpg.warmup=10", "ddpg.batch_size=8", "ddpg.hidden=[8]", "jobs=2"]);
    let results = run_training(&cfg).unwrap();
    assert_eq!(results.len(), 5);
    for (seed, r) in results {
        r.unwrap();
        for f in CHECKPOINT_FILES {
            assert!(seed_dir(dir.path(), seed).join(f).exists(), "seed {seed} lacks {f}");
        }
    }
    assert!(dir.path().join(EFFECTIVE_CONFIG).exists());
}

#[test]
fn zero_training_steps_checkpoint_the_initialization() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(JOINT, dir.path(), &["train_steps=0", "seeds=[4]"]);
    run_training(&cfg).unwrap().remove(0).1.unwrap();
    let env = cfg.environment().unwrap();
    let fresh = DdpgAgent::new(&env, &cfg.ddpg, &mut rng::stream(4, "ddpg-init", 0)).unwrap();
    let d = seed_dir(dir.path(), 4);
    assert_eq!(&checkpoint::load(&d.join(CHECKPOINT_FILES[0])).unwrap(), fresh.actor());
    assert_eq!(&checkpoint::load(&d.join(CHECKPOINT_FILES[1])).unwrap(), fresh.critic());
}

#[test]
fn evaluation_is_deterministic_and_leaves_checkpoints_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(SEPARATED, dir.path(), &["gate.updates=2", "gate.batch_episodes=2", "seeds=[0, 1]", "eval_episodes=4", "horizon=100", "reward.lambda=1e-5"]);
    for (_, r) in run_training(&cfg).unwrap() {
        r.unwrap();
    }
    let before = file_bytes(dir.path());
    let a = run_eval(&cfg, dir.path()).unwrap();
    let b = run_eval(&cfg, dir.path()).unwrap();
    assert_eq!(file_bytes(dir.path()), before);
    assert_eq!(without_wall_time(&a), without_wall_time(&b));
    assert_eq!(a.len(), 2 * (4 + 1));

    // the aggregate row is the plain mean of its episode rows
    for seed in [0, 1] {
        let episodes: Vec<_> = a.iter().filter(|r| r.seed == Some(seed) && r.episode.is_some()).collect();
        let agg = a.iter().find(|r| r.seed == Some(seed) && r.episode.is_none()).unwrap();
        let comm = episodes.iter().map(|r| r.mean_comm).sum::<f64>() / episodes.len() as f64;
        let cost = episodes.iter().map(|r| r.mean_cost).sum::<f64>() / episodes.len() as f64;
        assert!((agg.mean_comm - comm).abs() < 1e-15);
        assert!((agg.mean_cost - cost).abs() <= 1e-12 * cost);
    }
}

#[test]
fn training_is_reproducible_byte_for_byte() {
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(JOINT, dir.path(), &["train_steps=300", "ddpg.warmup=50", "ddpg.hidden=[16]", "ddpg.select_every=1", "ddpg.select_episodes=1", "seeds=[9]"]);
        run_training(&cfg).unwrap().remove(0).1.unwrap();
        (file_bytes(dir.path()), dir)
    };
    let (a, _keep_a) = run();
    let (b, _keep_b) = run();
    assert_eq!(a.iter().map(|f| &f.0).collect::<Vec<_>>(), b.iter().map(|f| &f.0).collect::<Vec<_>>());
    for ((name, x), (_, y)) in a.iter().zip(&b) {
        if name != EFFECTIVE_CONFIG {
            assert!(x == y, "{name} differs");
        }
    }
}

#[test]
fn always_communicating_gate_has_unit_rate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(SEPARATED, dir.path(), &["gate.updates=1", "gate.batch_episodes=1", "seeds=[0]", "eval_episodes=3", "horizon=50", "eval.gate_mode=\"always\""]);
    run_training(&cfg).unwrap().remove(0).1.unwrap();
    let rows = run_eval(&cfg, dir.path()).unwrap();
    assert!(rows.iter().all(|r| r.mean_comm == 1.0));
}

#[test]
fn noise_free_evaluation_repeats_the_same_episode() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("task = \"pendulum_balance\"\napproach = \"baseline:norm\"\n", dir.path(), &["seeds=[0]", "eval_episodes=5", "eval.noise_free=true"]);
    let env = cfg.environment().unwrap();
    let logs = etcrl::harness::eval_episodes(&cfg, &env, dir.path(), 0).unwrap();
    assert!(logs.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn one_point_sweep_yields_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("task = \"pendulum_balance\"\napproach = \"baseline:state_relative\"\n", dir.path(), &["seeds=[0]", "eval_episodes=3", "sweep.grid=[0.5]"]);
    let rows = run_sweep(&cfg, SweepAxis::Delta).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].grid_value, Some(0.5));
    let text = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn failed_lambda_points_are_flagged_not_dropped() {
    let dir = tempfile::tempdir().unwrap();
    // an actor checkpoint that does not exist makes every separated point fail
    let cfg = config(SEPARATED, dir.path(), &["seeds=[0]", "sweep.grid=[0.1, 1.0]", "separated.controller=\"ddpg_actor\"", "separated.actor_checkpoint=\"/nonexistent/actor.ckpt\""]);
    let rows = run_sweep(&cfg, SweepAxis::Lambda).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.status.starts_with("error")));
    let bytes = summary_bytes(&rows).unwrap();
    assert!(bytes.is_ascii());
}

#[test]
fn baseline_command_writes_one_file_per_law() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(JOINT, dir.path(), &["seeds=[0]", "eval_episodes=2", "horizon=50", "sweep.grid=[0.01, 0.1]"]);
    let out = run_baseline(&cfg).unwrap();
    assert_eq!(out.len(), 3);
    for (law, points) in out {
        assert_eq!(points.len(), 2);
        assert!(dir.path().join(format!("baseline_{}.csv", law.name())).exists());
    }
}
