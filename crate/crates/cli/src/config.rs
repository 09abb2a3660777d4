use std::path::{Path, PathBuf};

use c2f_core::bench::{Level, Suite};
use c2f_core::geometry::WorkspaceBounds;
use c2f_core::trajectory::DEFAULT_M;
use c2f_predictor::{ModelConfig, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Everything a run reads from its TOML file. Every field has a default,
/// so a file only needs the keys it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub general: General,
    pub data: DataConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub eval: EvalSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct General {
    /// Master seed. Overrides `model.init_seed` and `train.seed`, and
    /// offsets demonstration and evaluation seeds.
    pub seed: u64,
    pub out: PathBuf,
    /// Worker threads; 0 uses every core.
    pub jobs: usize,
}

impl Default for General {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("out"),
            jobs: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// "standard", "mini" or a path to a suite TOML file.
    pub suite: String,
    pub bounds: WorkspaceBounds,
    pub camera_resolution: usize,
    /// Side of the whole-workspace canonical views.
    pub resolution: usize,
    pub demos_per_variation: usize,
    pub m: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            suite: "standard".into(),
            bounds: WorkspaceBounds::default(),
            camera_resolution: 64,
            resolution: 64,
            demos_per_variation: 2,
            m: DEFAULT_M,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub episodes: usize,
    pub seeds: usize,
    /// Levels to run; empty means all four.
    pub levels: Vec<Level>,
    pub max_steps_factor: usize,
    /// Keypoint noise of the noisy oracle planner (m per axis).
    pub noise_sigma: f64,
    pub memory: bool,
    pub subtask_scoping: bool,
    /// Spacing of the candidate grid added to the crop when decoding the
    /// trained predictor's heatmaps.
    pub grid_step: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            episodes: 20,
            seeds: 5,
            levels: Vec::new(),
            max_steps_factor: 2,
            noise_sigma: 0.02,
            memory: true,
            subtask_scoping: true,
            grid_step: 0.01,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    /// Push the master seed into the sections that carry their own.
    pub fn apply_seed(&mut self, seed: u64) {
        self.general.seed = seed;
        self.model.init_seed = seed;
        self.train.seed = seed;
    }

    pub fn suite(&self) -> Result<Suite, CliError> {
        match self.data.suite.as_str() {
            "standard" => Ok(Suite::standard()),
            "mini" => Ok(Suite::mini()),
            path => Suite::load(Path::new(path)).map_err(|e| CliError::Data(e.to_string())),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.model.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        self.train.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        if self.data.resolution == 0 || self.data.camera_resolution == 0 {
            return Err(CliError::Usage("resolutions must be positive".into()));
        }
        if self.eval.grid_step <= 0.0 || self.eval.noise_sigma < 0.0 {
            return Err(CliError::Usage("eval.grid_step must be positive and eval.noise_sigma non-negative".into()));
        }
        Ok(())
    }
}

fn flatten(prefix: &str, value: &toml::Value, out: &mut Vec<(String, String)>) {
    match value {
        toml::Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        v => out.push((prefix.to_owned(), v.to_string())),
    }
}

/// `section.key = default` for every config field.
pub fn describe_defaults() -> String {
    let value = toml::Value::try_from(Config::default()).expect("default config serializes");
    let mut rows = Vec::new();
    flatten("", &value, &mut rows);
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut out = String::from("Config keys (TOML, with defaults):\n");
    for (k, v) in rows {
        out.push_str(&format!("  {k:<width$}  {v}\n"));
    }
    out
}
