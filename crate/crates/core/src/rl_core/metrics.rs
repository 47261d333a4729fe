use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::buffer::Level;
use super::ppo::LevelDiagnostics;

/// One line of the training metrics log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub update_idx: u64,
    pub level: Level,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    #[serde(default)]
    pub regularizer: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub mean_return: f64,
    #[serde(default)]
    pub env_steps: u64,
    /// Trainer-specific tag, e.g. the population slot being updated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<String>,
}

impl MetricsRecord {
    pub fn new(update_idx: u64, level: Level, d: &LevelDiagnostics, mean_return: f64, env_steps: u64) -> Self {
        Self {
            update_idx,
            level,
            policy_loss: d.policy_loss,
            value_loss: d.value_loss,
            entropy: d.entropy,
            regularizer: d.regularizer,
            clip_fraction: d.clip_fraction,
            approx_kl: d.approx_kl,
            mean_return,
            env_steps,
            tag: None,
        }
    }

    pub fn with_tag(mut self, tag: impl Into<String>) -> Self {
        self.tag = Some(tag.into());
        self
    }
}

/// Append-only JSONL sink, flushed after every record.
pub struct MetricsLog {
    out: BufWriter<File>,
}

impl MetricsLog {
    pub fn append_to(path: &Path) -> std::io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self { out: BufWriter::new(file) })
    }

    pub fn write(&mut self, record: &MetricsRecord) -> std::io::Result<()> {
        serde_json::to_writer(&mut self.out, record)?;
        self.out.write_all(b"\n")?;
        self.out.flush()
    }
}

pub fn read_metrics(path: &Path) -> std::io::Result<Vec<MetricsRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(std::io::Error::other)?);
    }
    Ok(out)
}
