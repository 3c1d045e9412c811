use rayon::prelude::*;

use super::lqr::LqrDesign;
use super::triggers::{TriggerLaw, TriggeredLqr};
use crate::envs::Environment;
use crate::error::{Error, Result};
use crate::rng;
use crate::runtime::{quadratic_cost, run_episode, EpisodeLog, STABLE_ANGLE};

/// Aggregate over seeds for one threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub delta: f64,
    pub mean_cost: f64,
    pub mean_comm: f64,
    /// Every episode kept `|θ| ≤ 0.2` throughout.
    pub stable: bool,
    /// Fraction of episodes that did.
    pub stable_fraction: f64,
}

/// Stream of evaluation episode `index`; shared by every threshold so that
/// the points of a sweep see identical noise.
pub fn episode_stream(seed: u64, index: u64) -> rng::Stream {
    rng::stream(seed, "eval-episode", index)
}

pub fn evaluate_threshold(env: &Environment, design: &LqrDesign, law: TriggerLaw, delta: f64, seed: u64, episodes: usize, horizon: usize) -> Result<(SweepPoint, Vec<EpisodeLog>)> {
    if episodes == 0 {
        return Err(Error::invalid("episodes", "need at least one episode"));
    }
    let mut logs = Vec::with_capacity(episodes);
    for i in 0..episodes {
        let mut policy = TriggeredLqr {
            gain: design.k.clone(),
            law,
            delta,
        };
        logs.push(run_episode(env, &mut policy, horizon, &mut episode_stream(seed, i as u64))?);
    }
    let n = logs.len() as f64;
    let angle = env.plant.angle_index();
    let stable_count = logs.iter().filter(|l| l.stays_within(angle, STABLE_ANGLE)).count();
    let point = SweepPoint {
        delta,
        mean_cost: logs.iter().map(|l| quadratic_cost(l, &env.weights.q, &env.weights.r)).sum::<f64>() / n,
        mean_comm: logs.iter().map(EpisodeLog::comm_rate).sum::<f64>() / n,
        stable: stable_count == logs.len(),
        stable_fraction: stable_count as f64 / n,
    };
    Ok((point, logs))
}

/// Sweeps the threshold of one trigger law, averaging over `episodes` seeded episodes.
/// Points are returned in the order of `deltas`.
pub fn delta_sweep(env: &Environment, design: &LqrDesign, law: TriggerLaw, deltas: &[f64], seed: u64, episodes: usize, horizon: usize) -> Result<Vec<SweepPoint>> {
    if deltas.is_empty() {
        return Err(Error::invalid("deltas", "empty threshold grid"));
    }
    deltas
        .par_iter()
        .map(|&delta| evaluate_threshold(env, design, law, delta, seed, episodes, horizon).map(|(p, _)| p))
        .collect()
}

/// Largest `1 − comm` among points with at least `min_stable` of their
/// episodes stable.
pub fn max_stable_saving(points: &[SweepPoint], min_stable: f64) -> Option<(f64, f64)> {
    points
        .iter()
        .filter(|p| p.stable_fraction >= min_stable)
        .map(|p| (p.delta, 1.0 - p.mean_comm))
        .fold(None, |best: Option<(f64, f64)>, cur| match best {
            Some(b) if b.1 >= cur.1 => Some(b),
            _ => Some(cur),
        })
}

pub fn write_sweep_csv<W: std::io::Write>(points: &[SweepPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["delta", "mean_cost", "mean_comm", "stable"])?;
    for p in points {
        w.write_record([p.delta.to_string(), p.mean_cost.to_string(), p.mean_comm.to_string(), u8::from(p.stable).to_string()])?;
    }
    w.flush().map_err(|e| Error::io("<sweep csv>", e))?;
    Ok(())
}
