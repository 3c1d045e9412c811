use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use super::config::{Approach, ControllerKind, RunConfig, SweepAxis};
use super::export::{export_summary, write_atomic, ResultRow};
use crate::baselines::{delta_sweep, design_for, log_space, write_sweep_csv, SweepPoint, TriggerLaw, TriggeredLqr};
use crate::ddpg::{self, GreedyActor, TrainSpec, CHECKPOINT_FILES, DECISION_SCORES, SELECTED_ACTOR_FILE};
use crate::envs::Environment;
use crate::error::{Error, Result};
use crate::gate::{gate_episode, train_gate, FrozenController, GatePolicy};
use crate::nn::{checkpoint, Mlp};
use crate::rng;
use crate::runtime::{episode_stable, quadratic_cost, run_episode, EpisodeLog};

pub const GATE_FILE: &str = "gate.ckpt";
pub const TRAINING_LOG: &str = "training_log.csv";

/// The λ grid: 25 log-spaced points from 0.01 to 100.
pub fn lambda_grid() -> Vec<f64> {
    log_space(0.01, 100.0, 25)
}

pub fn seed_dir(root: &Path, seed: u64) -> PathBuf {
    root.join(format!("seed_{seed}"))
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainSummary {
    pub seed: u64,
    pub dir: PathBuf,
    /// Environment steps (joint) or policy updates (separated).
    pub iterations: usize,
    pub episodes: usize,
}

pub fn frozen_controller(cfg: &RunConfig, env: &Environment) -> Result<FrozenController> {
    match cfg.separated.controller {
        ControllerKind::Lqr => Ok(FrozenController::Lqr { gain: design_for(env)?.k }),
        ControllerKind::DdpgActor => {
            let actor = checkpoint::load(Path::new(&cfg.separated.actor_checkpoint))?;
            check_actor(&actor, env)?;
            Ok(FrozenController::DdpgActor { actor })
        }
    }
}

fn check_actor(actor: &Mlp, env: &Environment) -> Result<()> {
    let (inputs, outputs) = (env.feature_dim() + env.input_dim(), DECISION_SCORES + env.input_dim());
    if actor.input_width() != inputs || actor.output_width() != outputs {
        return Err(Error::Checkpoint(format!(
            "actor maps {} -> {}, task needs {inputs} -> {outputs}",
            actor.input_width(),
            actor.output_width()
        )));
    }
    Ok(())
}

fn train_seed(cfg: &RunConfig, env: &Environment, seed: u64) -> Result<TrainSummary> {
    let dir = seed_dir(&cfg.out, seed);
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    match cfg.approach {
        Approach::Joint => {
            let spec = TrainSpec {
                steps: cfg.train_steps,
                horizon: cfg.horizon,
                seed,
            };
            let (_, log) = ddpg::train_with_checkpoints(env, &cfg.ddpg, spec, Some(&dir))?;
            write_atomic(&dir.join(TRAINING_LOG), &log.to_csv_bytes()?)?;
            Ok(TrainSummary {
                seed,
                dir,
                iterations: log.steps,
                episodes: log.episodes.len(),
            })
        }
        Approach::Separated => {
            let controller = frozen_controller(cfg, env)?;
            let (gate, log) = train_gate(env, &controller, cfg.reward.lambda, &cfg.gate, cfg.horizon, seed)?;
            checkpoint::save(&gate.net, &dir.join(GATE_FILE))?;
            write_atomic(&dir.join(TRAINING_LOG), &log.to_csv_bytes()?)?;
            Ok(TrainSummary {
                seed,
                dir,
                iterations: log.batches.len(),
                episodes: log.verified_episodes,
            })
        }
        Approach::Baseline(_) => Err(Error::Config("baseline approaches have no training stage".into())),
    }
}

/// Trains every seed independently; a failing seed does not affect the others.
pub fn run_training(cfg: &RunConfig) -> Result<Vec<(u64, Result<TrainSummary>)>> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    cfg.write_effective(&cfg.out)?;
    let env = Environment::new(cfg.plant.clone(), cfg.task.task(), cfg.reward.clone())?;
    let results = pool(cfg.jobs)?.install(|| cfg.seeds.par_iter().map(|&seed| (seed, train_seed(cfg, &env, seed))).collect());
    Ok(results)
}

/// Policy under evaluation, as loaded from a checkpoint directory.
enum Evaluated {
    Actor(Mlp),
    Gate(FrozenController, GatePolicy),
    Trigger(TriggeredLqr),
}

fn load_evaluated(cfg: &RunConfig, env: &Environment, root: &Path, seed: u64) -> Result<Evaluated> {
    match cfg.approach {
        Approach::Joint => {
            let dir = seed_dir(root, seed);
            let selected = dir.join(SELECTED_ACTOR_FILE);
            let path = if selected.exists() { selected } else { dir.join(CHECKPOINT_FILES[0]) };
            let actor = checkpoint::load(&path)?;
            check_actor(&actor, env)?;
            Ok(Evaluated::Actor(actor))
        }
        Approach::Separated => {
            let net = checkpoint::load(&seed_dir(root, seed).join(GATE_FILE))?;
            if net.input_width() != env.state_dim() + 2 * env.input_dim() {
                return Err(Error::Checkpoint(format!("gate takes {} inputs, task provides {}", net.input_width(), env.state_dim() + 2 * env.input_dim())));
            }
            Ok(Evaluated::Gate(frozen_controller(cfg, env)?, GatePolicy::from_net(net, cfg.gate.input_scale)?))
        }
        Approach::Baseline(law) => Ok(Evaluated::Trigger(TriggeredLqr {
            gain: design_for(env)?.k,
            law,
            delta: cfg.baseline.delta,
        })),
    }
}

/// Evaluation episodes of one seed; invariants are checked on every log.
pub fn eval_episodes(cfg: &RunConfig, env: &Environment, root: &Path, seed: u64) -> Result<Vec<EpisodeLog>> {
    let mut evaluated = load_evaluated(cfg, env, root, seed)?;
    let mut logs = Vec::with_capacity(cfg.eval_episodes);
    for i in 0..cfg.eval_episodes as u64 {
        let mut env_rng = rng::stream(seed, "eval-episode", i);
        let log = match &mut evaluated {
            Evaluated::Actor(actor) => run_episode(env, &mut GreedyActor { actor }, cfg.horizon, &mut env_rng)?,
            Evaluated::Gate(controller, gate) => {
                gate_episode(env, controller, gate, cfg.eval.gate_mode, cfg.horizon, &mut env_rng, &mut rng::stream(seed, "eval-gate", i))?.0
            }
            Evaluated::Trigger(policy) => run_episode(env, policy, cfg.horizon, &mut env_rng)?,
        };
        log.check_invariants().map_err(|reason| Error::EpisodeFault { step: log.len(), reason })?;
        logs.push(log);
    }
    Ok(logs)
}

fn aggregate(id: &str, seed: Option<u64>, grid_value: Option<f64>, rows: &[ResultRow], wall_time: f64) -> ResultRow {
    let n = rows.len().max(1) as f64;
    ResultRow {
        config_id: id.to_string(),
        seed,
        episode: None,
        grid_value,
        mean_cost: rows.iter().map(|r| r.mean_cost).sum::<f64>() / n,
        mean_comm: rows.iter().map(|r| r.mean_comm).sum::<f64>() / n,
        stable: !rows.is_empty() && rows.iter().all(|r| r.stable),
        stable_fraction: rows.iter().map(|r| r.stable_fraction).sum::<f64>() / n,
        status: "ok".into(),
        wall_time,
    }
}

fn failed_row(id: &str, seed: Option<u64>, grid_value: Option<f64>, err: &Error) -> ResultRow {
    ResultRow {
        config_id: id.to_string(),
        seed,
        episode: None,
        grid_value,
        mean_cost: f64::NAN,
        mean_comm: f64::NAN,
        stable: false,
        stable_fraction: 0.0,
        status: format!("error: {err}"),
        wall_time: 0.0,
    }
}

/// Per-episode rows followed by one aggregate row per seed. Checkpoints are
/// only read. Seeds that fail yield a flagged aggregate row.
pub fn run_eval(cfg: &RunConfig, checkpoint_root: &Path) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let env = cfg.environment()?;
    let id = cfg.id()?;
    let per_seed: Vec<Vec<ResultRow>> = pool(cfg.jobs)?.install(|| {
        cfg.seeds
            .par_iter()
            .map(|&seed| {
                let start = Instant::now();
                match eval_episodes(cfg, &env, checkpoint_root, seed) {
                    Ok(logs) => {
                        let mut rows: Vec<ResultRow> = logs
                            .iter()
                            .enumerate()
                            .map(|(i, log)| {
                                let stable = episode_stable(&env, log);
                                ResultRow {
                                    config_id: id.clone(),
                                    seed: Some(seed),
                                    episode: Some(i),
                                    grid_value: None,
                                    mean_cost: quadratic_cost(log, &env.weights.q, &env.weights.r),
                                    mean_comm: log.comm_rate(),
                                    stable,
                                    stable_fraction: f64::from(u8::from(stable)),
                                    status: "ok".into(),
                                    wall_time: 0.0,
                                }
                            })
                            .collect();
                        let agg = aggregate(&id, Some(seed), None, &rows, start.elapsed().as_secs_f64());
                        rows.push(agg);
                        rows
                    }
                    Err(e) => vec![failed_row(&id, Some(seed), None, &e)],
                }
            })
            .collect()
    });
    Ok(per_seed.into_iter().flatten().collect())
}

pub fn all_ok(rows: &[ResultRow]) -> bool {
    rows.iter().all(|r| r.status == "ok")
}

/// Sorts by communication rate; failed rows go last.
pub fn sort_by_comm(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| a.mean_comm.total_cmp(&b.mean_comm));
}

/// λ axis: trains and evaluates every grid point. δ axis: evaluates the
/// configured trigger law. Returns one row per grid point, sorted by
/// communication rate, and writes `sweep.csv` into the output directory.
pub fn run_sweep(cfg: &RunConfig, axis: SweepAxis) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    cfg.write_effective(&cfg.out)?;
    let id = cfg.id()?;
    let mut rows = match axis {
        SweepAxis::Lambda => {
            let grid = if cfg.sweep.grid.is_empty() { lambda_grid() } else { cfg.sweep.grid.clone() };
            let mut rows = Vec::with_capacity(grid.len());
            for (i, &lambda) in grid.iter().enumerate() {
                let mut point = cfg.clone();
                point.reward.lambda = lambda;
                point.out = cfg.out.join(format!("lambda_{i:02}"));
                rows.push(lambda_point(&point, &id, lambda));
            }
            rows
        }
        SweepAxis::Delta => {
            let Approach::Baseline(law) = cfg.approach else {
                return Err(Error::Config("the delta axis applies to baseline approaches only".into()));
            };
            let grid = if cfg.sweep.grid.is_empty() { law.default_grid() } else { cfg.sweep.grid.clone() };
            let points = baseline_points(cfg, law, &grid)?;
            points
                .iter()
                .map(|p| ResultRow {
                    config_id: id.clone(),
                    seed: Some(cfg.seeds[0]),
                    episode: None,
                    grid_value: Some(p.delta),
                    mean_cost: p.mean_cost,
                    mean_comm: p.mean_comm,
                    stable: p.stable,
                    stable_fraction: p.stable_fraction,
                    status: "ok".into(),
                    wall_time: 0.0,
                })
                .collect()
        }
    };
    sort_by_comm(&mut rows);
    export_summary(&rows, &cfg.out.join("sweep.csv"))?;
    Ok(rows)
}

fn lambda_point(point: &RunConfig, id: &str, lambda: f64) -> ResultRow {
    let start = Instant::now();
    let outcome = run_training(point).and_then(|trained| {
        if let Some((_, Err(e))) = trained.into_iter().find(|(_, r)| r.is_err()) {
            return Err(e);
        }
        run_eval(point, &point.out)
    });
    match outcome {
        Ok(rows) => {
            let per_seed: Vec<ResultRow> = rows.into_iter().filter(|r| r.episode.is_none()).collect();
            if let Some(bad) = per_seed.iter().find(|r| r.status != "ok") {
                let mut row = bad.clone();
                row.grid_value = Some(lambda);
                row.seed = None;
                return row;
            }
            aggregate(id, None, Some(lambda), &per_seed, start.elapsed().as_secs_f64())
        }
        Err(e) => failed_row(id, None, Some(lambda), &e),
    }
}

/// Threshold sweep of one trigger law over `eval_episodes` episodes seeded
/// from the first seed.
pub fn baseline_points(cfg: &RunConfig, law: TriggerLaw, grid: &[f64]) -> Result<Vec<SweepPoint>> {
    let env = cfg.environment()?;
    let design = design_for(&env)?;
    pool(cfg.jobs)?.install(|| delta_sweep(&env, &design, law, grid, cfg.seeds[0], cfg.eval_episodes, cfg.horizon))
}

/// Runs the default δ sweep of the configured law, or of every law when the
/// approach is not a baseline, writing `baseline_<law>.csv` files.
pub fn run_baseline(cfg: &RunConfig) -> Result<Vec<(TriggerLaw, Vec<SweepPoint>)>> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    cfg.write_effective(&cfg.out)?;
    let laws: Vec<TriggerLaw> = match cfg.approach {
        Approach::Baseline(law) => vec![law],
        _ => TriggerLaw::ALL.to_vec(),
    };
    let mut out = Vec::new();
    for law in laws {
        let grid = if cfg.sweep.grid.is_empty() { law.default_grid() } else { cfg.sweep.grid.clone() };
        let points = baseline_points(cfg, law, &grid)?;
        let mut bytes = Vec::new();
        write_sweep_csv(&points, &mut bytes)?;
        write_atomic(&cfg.out.join(format!("baseline_{}.csv", law.name())), &bytes)?;
        out.push((law, points));
    }
    Ok(out)
}
