//! Experiment configuration files, run manifests and report records.
//!
//! Every random stream in a run derives from the root `seed` with
//! [`derive_seed`](crate::seed::derive_seed) and a role tag:
//!
//! | role                 | stream                                    |
//! |----------------------|-------------------------------------------|
//! | `delays`             | neuron placement or band shuffle          |
//! | `init/w_in` etc.     | weight initialization                     |
//! | `train/order`, `train/epoch` + index | sample order and sample seeds |
//! | `test` + index       | evaluation episodes                       |

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::seed::derive_seed;
use crate::tasks::{load_psmnist, CueStream, CueTaskConfig, PsMnist, PsMnistConfig};
use crate::topology::{assign_delays_by_fraction, assign_delays_by_radius, place_neurons, DelaySchedule};
use crate::training::{TaskStream, TrainConfig};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    #[default]
    Cue,
    Psmnist,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsMnistSpec {
    pub data_dir: PathBuf,
    #[serde(flatten)]
    pub config: PsMnistConfig,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskSpec {
    pub kind: TaskKind,
    pub cue: CueTaskConfig,
    pub psmnist: PsMnistSpec,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayMode {
    /// Fixed share of neurons per delay band, randomly placed.
    #[default]
    Fraction,
    /// Bands by distance from the lattice centroid.
    Radius,
    /// Every neuron gets `delays_ms[0]`.
    Uniform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DelaySpec {
    pub mode: DelayMode,
    pub delays_ms: Vec<f64>,
    pub fractions: Vec<f64>,
    pub radius_fracs: Vec<f64>,
}

impl Default for DelaySpec {
    fn default() -> Self {
        Self {
            mode: DelayMode::Fraction,
            delays_ms: vec![0.0, 80.0, 100.0],
            fractions: vec![0.176, 0.424, 0.4],
            radius_fracs: vec![0.2, 0.3],
        }
    }
}

impl DelaySpec {
    pub fn build(&self, n: usize, dt_ms: f64, seed: u64) -> Result<DelaySchedule> {
        let s = derive_seed(seed, "delays");
        match self.mode {
            DelayMode::Fraction => assign_delays_by_fraction(n, &self.fractions, &self.delays_ms, dt_ms, s),
            DelayMode::Radius => assign_delays_by_radius(&place_neurons(n, s)?, &self.radius_fracs, &self.delays_ms, dt_ms),
            DelayMode::Uniform => {
                let d = *self.delays_ms.first().ok_or_else(|| Error::invalid("delays.delays_ms is empty"))?;
                DelaySchedule::uniform(n, d, dt_ms)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSpec {
    pub n_hidden: usize,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        Self { n_hidden: 125 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub name: String,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub task: TaskSpec,
    pub network: NetworkSpec,
    pub delays: DelaySpec,
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            name: "delaynet".into(),
            seed: 0,
            output_dir: PathBuf::from("runs/delaynet"),
            task: TaskSpec::default(),
            network: NetworkSpec::default(),
            delays: DelaySpec::default(),
            train: TrainConfig::default(),
        }
    }
}

/// A loaded task, either generated or read from disk.
pub enum Task {
    Cue(CueStream),
    PsMnist(PsMnist),
}

impl Task {
    pub fn stream(&self) -> &dyn TaskStream {
        match self {
            Task::Cue(s) => s,
            Task::PsMnist(s) => s,
        }
    }

    pub fn dt_ms(&self) -> f64 {
        match self {
            Task::Cue(s) => s.train.dt_ms,
            Task::PsMnist(_) => 1.0,
        }
    }
}

impl ExperimentConfig {
    /// Parses TOML text; syntax and type errors carry line and column.
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::format(origin, e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::invalid(format!(
                "version: config format {} is not supported (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        if self.network.n_hidden == 0 {
            return Err(Error::invalid("network.n_hidden must be positive"));
        }
        self.train.validate().map_err(|e| Error::invalid(format!("train: {e}")))?;
        if self.task.kind == TaskKind::Cue {
            self.task.cue.validate().map_err(|e| Error::invalid(format!("task.cue: {e}")))?;
        }
        let d = &self.delays;
        if d.delays_ms.is_empty() || d.delays_ms.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
            return Err(Error::invalid("delays.delays_ms must be non-empty and non-negative"));
        }
        Ok(())
    }

    /// First 16 hex digits of SHA-256 over the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn load_task(&self) -> Result<Task> {
        Ok(match self.task.kind {
            TaskKind::Cue => Task::Cue(CueStream::new(self.task.cue.clone())?),
            TaskKind::Psmnist => Task::PsMnist(load_psmnist(&self.task.psmnist.data_dir, &self.task.psmnist.config)?),
        })
    }

    pub fn build_delays(&self, dt_ms: f64) -> Result<DelaySchedule> {
        self.delays.build(self.network.n_hidden, dt_ms, self.seed)
    }
}

/// Written next to every set of outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub name: String,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub files: Vec<String>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl RunManifest {
    pub fn save(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, serde_json::to_string_pretty(self).expect("manifest serializes"))
            .map_err(|e| Error::io(&path, e))
    }
}

/// Final summary of a training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub status: String,
    pub epochs_completed: usize,
    pub test_accuracy: f64,
    pub tau_rec_ms: f64,
    pub tau_out_ms: f64,
    pub u_th: f64,
    pub spectral_radius: Option<f64>,
    pub config_hash: String,
    pub seed: u64,
}
