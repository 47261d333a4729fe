//! TOML run configuration. Values resolve in three layers: layout defaults,
//! then the config file, then command-line flags.

use std::path::{Path, PathBuf};

use hipt_core::eval::{BcConfig, DEFAULT_EVAL_EPISODES};
use hipt_core::hipt::{default_num_priors, layout_learning_rate, HiptConfig};
use hipt_core::population::PopulationConfig;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config file {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("config file {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("config: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    /// Episodes per (partner, tier, seat).
    pub episodes: usize,
    pub horizon: u32,
    pub seed: u64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self { episodes: DEFAULT_EVAL_EPISODES, horizon: 400, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrossplaySettings {
    pub episodes: usize,
    pub seat_balancing: bool,
    /// Relative slack for grouping agents into play styles.
    pub tolerance: f64,
    pub heatmap_cell_px: usize,
}

impl Default for CrossplaySettings {
    fn default() -> Self {
        Self { episodes: 5, seat_balancing: true, tolerance: 0.2, heatmap_cell_px: 16 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeSettings {
    pub port: u16,
    pub data_dir: PathBuf,
    /// Directory holding the browser bundle; `index.html` is served at `/`.
    pub static_dir: Option<PathBuf>,
    pub tick_ms: u64,
    pub horizon: u32,
    pub rounds: usize,
    pub human_seat: usize,
    /// Agent references, see [`crate::agents::AgentRef`]. Each round pairs two of them.
    pub agents: Vec<String>,
    /// Warm-up games with the scripted cook before the first round.
    pub tutorial_games: usize,
    pub between_episodes_ms: u64,
    /// How long a disconnected session stays resumable.
    pub park_timeout_s: u64,
}

impl Default for ServeSettings {
    fn default() -> Self {
        Self {
            port: 8080,
            data_dir: PathBuf::from("hipt-data"),
            static_dir: None,
            tick_ms: 150,
            horizon: 400,
            rounds: 5,
            human_seat: 0,
            agents: vec!["scripted".into(), "random".into()],
            tutorial_games: 0,
            between_episodes_ms: 3000,
            park_timeout_s: 120,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub layout: String,
    pub seed: u64,
    /// Parent directory for timestamped run directories.
    pub runs_dir: PathBuf,
    pub population: PopulationConfig,
    pub hipt: HiptConfig,
    pub eval: EvalSettings,
    pub crossplay: CrossplaySettings,
    pub bc: BcConfig,
    pub serve: ServeSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::for_layout("cramped_room")
    }
}

impl RunConfig {
    /// Defaults with the layout's learning rate, decay and prior count.
    pub fn for_layout(layout: &str) -> Self {
        let (learning_rate, lr_decay) = layout_learning_rate(layout);
        Self {
            layout: layout.to_string(),
            seed: 0,
            runs_dir: PathBuf::from("runs"),
            population: PopulationConfig { learning_rate, lr_decay, ..PopulationConfig::default() },
            hipt: HiptConfig::for_layout(layout, HiptConfig::default().total_env_steps),
            eval: EvalSettings::default(),
            crossplay: CrossplaySettings::default(),
            bc: BcConfig::default(),
            serve: ServeSettings::default(),
        }
    }

    /// Layout defaults overlaid with `text`. `layout_override` wins over the
    /// file's own `layout` when choosing which defaults to start from.
    pub fn from_toml(text: &str, layout_override: Option<&str>) -> Result<Self, String> {
        let file: toml::Table = toml::from_str(text).map_err(|e| e.to_string())?;
        let layout = layout_override
            .map(String::from)
            .or_else(|| file.get("layout").and_then(|v| v.as_str()).map(String::from))
            .unwrap_or_else(|| "cramped_room".into());
        let mut base = toml::Table::try_from(Self::for_layout(&layout)).map_err(|e| e.to_string())?;
        merge(&mut base, file);
        let mut config: RunConfig = base.try_into().map_err(|e: toml::de::Error| e.to_string())?;
        config.layout = layout;
        Ok(config)
    }

    pub fn load(path: &Path, layout_override: Option<&str>) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        Self::from_toml(&text, layout_override)
            .map_err(|message| ConfigError::Parse { path: path.to_path_buf(), message })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("run config serializes")
    }

    /// Change the layout, re-deriving the per-layout defaults that were not
    /// set explicitly elsewhere.
    pub fn set_layout(&mut self, layout: &str) {
        let (lr, decay) = layout_learning_rate(layout);
        self.layout = layout.to_string();
        self.population.learning_rate = lr;
        self.population.lr_decay = decay;
        self.hipt.learning_rate = lr;
        self.hipt.lr_decay = decay;
        self.hipt.num_priors = default_num_priors(layout);
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if hipt_core::env::bundled_layout(&self.layout).is_none() {
            return Err(ConfigError::Invalid(format!("unknown layout {:?}", self.layout)));
        }
        self.hipt.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.population.ppo.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.serve.tick_ms == 0 || self.serve.human_seat > 1 {
            return Err(ConfigError::Invalid("serve needs tick_ms > 0 and human_seat 0 or 1".into()));
        }
        Ok(())
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}
