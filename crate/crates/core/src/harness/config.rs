use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::export::write_atomic;
use crate::baselines::TriggerLaw;
use crate::ddpg::DdpgConfig;
use crate::envs::{Environment, PlantKind, PlantParams, RewardWeights, Task};
use crate::error::{Error, Result};
use crate::gate::{GateConfig, GateMode};

/// Name of the canonical configuration echo written into every output directory.
pub const EFFECTIVE_CONFIG: &str = "effective_config";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskId {
    PendulumBalance,
    PendulumSwingup,
    CartpoleBalance,
}

impl TaskId {
    pub fn plant_kind(self) -> PlantKind {
        match self {
            TaskId::PendulumBalance | TaskId::PendulumSwingup => PlantKind::Pendulum,
            TaskId::CartpoleBalance => PlantKind::CartPole,
        }
    }

    pub fn task(self) -> Task {
        match self {
            TaskId::PendulumSwingup => Task::Swingup,
            TaskId::PendulumBalance | TaskId::CartpoleBalance => Task::Balance,
        }
    }
}

/// `joint`, `separated` or `baseline:<law>`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Approach {
    Joint,
    Separated,
    Baseline(TriggerLaw),
}

impl fmt::Display for Approach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Approach::Joint => f.write_str("joint"),
            Approach::Separated => f.write_str("separated"),
            Approach::Baseline(law) => write!(f, "baseline:{}", law.name()),
        }
    }
}

impl FromStr for Approach {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "joint" => Ok(Approach::Joint),
            "separated" => Ok(Approach::Separated),
            _ => s
                .strip_prefix("baseline:")
                .and_then(TriggerLaw::parse)
                .map(Approach::Baseline)
                .ok_or_else(|| format!("unknown approach `{s}`; expected joint, separated or baseline:<norm|input_relative|state_relative>")),
        }
    }
}

impl TryFrom<String> for Approach {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, String> {
        s.parse()
    }
}

impl From<Approach> for String {
    fn from(a: Approach) -> String {
        a.to_string()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    #[default]
    Lqr,
    DdpgActor,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeparatedConfig {
    pub controller: ControllerKind,
    /// Actor checkpoint used when `controller = "ddpg_actor"`.
    pub actor_checkpoint: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub delta: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self { delta: 0.1 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    #[default]
    Lambda,
    Delta,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    /// Empty selects the default grid of the axis.
    pub grid: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub gate_mode: GateMode,
    pub noise_free: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: TaskId,
    pub approach: Approach,
    /// Steps per evaluation episode.
    pub horizon: usize,
    /// Environment steps of joint training.
    pub train_steps: usize,
    pub eval_episodes: usize,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    /// Upper bound on concurrently running seeds.
    pub jobs: usize,
    pub plant: PlantParams,
    pub reward: RewardWeights,
    pub ddpg: DdpgConfig,
    pub gate: GateConfig,
    pub separated: SeparatedConfig,
    pub baseline: BaselineConfig,
    pub sweep: SweepConfig,
    pub eval: EvalConfig,
}

impl RunConfig {
    pub fn defaults_for(task: TaskId) -> Self {
        let kind = task.plant_kind();
        Self {
            task,
            approach: Approach::Joint,
            horizon: 500,
            train_steps: 100_000,
            eval_episodes: 100,
            seeds: vec![0, 1, 2, 3, 4],
            out: PathBuf::from("runs"),
            jobs: 1,
            plant: PlantParams::default_for(kind),
            reward: RewardWeights::default_for(kind),
            ddpg: DdpgConfig::default(),
            gate: GateConfig::default(),
            separated: SeparatedConfig::default(),
            baseline: BaselineConfig::default(),
            sweep: SweepConfig::default(),
            eval: EvalConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.plant.kind != self.task.plant_kind() {
            return Err(Error::invalid("plant.kind", format!("{:?} does not match task {:?}", self.plant.kind, self.task)));
        }
        self.plant.validate()?;
        self.reward.validate(self.plant.state_dim(), self.plant.input_dim())?;
        self.ddpg.validate()?;
        self.gate.validate()?;
        if self.horizon == 0 {
            return Err(Error::invalid("horizon", "must be positive"));
        }
        if self.eval_episodes == 0 {
            return Err(Error::invalid("eval_episodes", "must be positive"));
        }
        if self.seeds.is_empty() {
            return Err(Error::invalid("seeds", "needs at least one seed"));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(Error::invalid("seeds", "must be distinct"));
        }
        if self.jobs == 0 {
            return Err(Error::invalid("jobs", "must be positive"));
        }
        if !(self.baseline.delta >= 0.0 && self.baseline.delta.is_finite()) {
            return Err(Error::invalid("baseline.delta", "must be non-negative"));
        }
        if self.sweep.grid.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("sweep.grid", "values must be finite and non-negative"));
        }
        if self.separated.controller == ControllerKind::DdpgActor && self.separated.actor_checkpoint.is_empty() {
            return Err(Error::invalid("separated.actor_checkpoint", "required for the ddpg_actor controller"));
        }
        Ok(())
    }

    pub fn environment(&self) -> Result<Environment> {
        let mut plant = self.plant.clone();
        if self.eval.noise_free {
            plant = plant.noise_free();
        }
        Environment::new(plant, self.task.task(), self.reward.clone())
    }

    /// Canonical, re-parseable text form.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn write_effective(&self, dir: &Path) -> Result<()> {
        write_atomic(&dir.join(EFFECTIVE_CONFIG), self.to_toml()?.as_bytes())
    }

    /// Short identifier of the configuration.
    pub fn id(&self) -> Result<String> {
        use sha2::{Digest, Sha256};
        let digest = Sha256::digest(self.to_toml()?.as_bytes());
        Ok(digest.iter().take(6).map(|b| format!("{b:02x}")).collect())
    }
}

fn deep_merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => deep_merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Applies one `dotted.key=value` assignment. Values are read as TOML and
/// fall back to plain strings.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
    let (key, raw) = (key.trim(), raw.trim());
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("override key `{key}` is malformed")));
    }
    let mut cursor = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cursor.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cursor = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override `{key}`: `{part}` is not a table")))?;
    }
    cursor.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Parses configuration text, applies overrides, fills defaults for the
/// named task and validates the result.
pub fn parse_config_str(text: &str, overrides: &[String]) -> Result<RunConfig> {
    let mut user: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    for o in overrides {
        apply_override(&mut user, o)?;
    }
    let task_value = user.get("task").cloned().ok_or_else(|| Error::Config("missing field `task`".into()))?;
    let task: TaskId = task_value.try_into().map_err(|e: toml::de::Error| Error::Config(format!("field `task`: {e}")))?;
    let mut merged = toml::Table::try_from(RunConfig::defaults_for(task)).map_err(|e| Error::Config(e.to_string()))?;
    deep_merge(&mut merged, user);
    // Round-trip through text so that errors quote the offending line.
    let doc = toml::to_string(&merged).map_err(|e| Error::Config(e.to_string()))?;
    let cfg: RunConfig = toml::from_str(&doc).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path, overrides: &[String]) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text, overrides)
}
