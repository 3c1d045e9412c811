//! Configuration, experiment orchestration and result export.

pub mod config;
pub mod export;
pub mod run;

pub use config::{apply_override, parse_config, parse_config_str, Approach, RunConfig, SweepAxis, TaskId, EFFECTIVE_CONFIG};
pub use export::{export_summary, summary_bytes, write_atomic, ResultRow, RESULT_HEADER};
pub use run::{all_ok, baseline_points, eval_episodes, lambda_grid, run_baseline, run_eval, run_sweep, run_training, seed_dir, TrainSummary};
pub use crate::runtime::episode_stable;
