use std::fmt;
use std::path::{Path, PathBuf};

use bciqoe_eeg::SynthConfig;
use bciqoe_env::EnvConfig;
use bciqoe_learners::LearnerConfig;
use bciqoe_wireless::{NetworkConfig, NetworkParams};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DataSource {
    #[default]
    Synthetic,
    /// A directory of `S###R##.edf` motor-imagery recordings.
    EdfDir,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub source: DataSource,
    pub path: Option<PathBuf>,
    /// Subject numbers for `edf-dir`, one per user.
    pub subjects: Vec<u32>,
    /// Samples per window.
    #[serde(rename = "W")]
    pub width: usize,
    pub overlap: f64,
    pub train_ratio: f64,
    pub synth: SynthConfig,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            source: DataSource::Synthetic,
            path: None,
            subjects: Vec::new(),
            width: 16,
            overlap: 0.5,
            train_ratio: 0.8,
            synth: SynthConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub name: String,
    pub seeds: Vec<u64>,
    /// Total training steps; episodes are `T / O`.
    #[serde(rename = "T")]
    pub total_steps: usize,
    /// Concurrent runs in a sweep; 0 means one per core.
    pub workers: usize,
    /// Cap on test-set evaluation steps.
    pub eval_steps: usize,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            name: "run".into(),
            seeds: vec![0],
            total_steps: 300_000,
            workers: 0,
            eval_steps: 10_000,
        }
    }
}

/// Everything a run needs, read from a TOML file with one table per section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub network: NetworkConfig,
    pub env: EnvConfig,
    pub learner: LearnerConfig,
    pub data: DataConfig,
}

/// One invalid setting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Reads `path` and applies `key=value` overrides such as
    /// `learner.actor_lr=1e-4` before deserializing.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| HarnessError::Io(p.to_path_buf(), e))?,
            None => String::new(),
        };
        let mut table: toml::Table = toml::from_str(&text)?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: Self = table.try_into()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn network_params(&self) -> Result<NetworkParams> {
        Ok(self.network.to_params()?)
    }

    pub fn episodes(&self) -> usize {
        self.experiment.total_steps / self.learner.horizon.max(1)
    }

    pub fn users(&self) -> usize {
        self.env.users
    }

    /// Every problem found, not just the first.
    pub fn check(&self) -> Vec<FieldError> {
        let mut errs = Vec::new();
        let mut push = |field: &str, message: String| {
            errs.push(FieldError {
                field: field.into(),
                message,
            })
        };
        if let Err(e) = self.network.to_params() {
            push("network", e.to_string());
        }
        if let Err(e) = self.env.validate() {
            push("env", e.to_string());
        }
        if let Err(e) = self.learner.validate() {
            push("learner", e.to_string());
        }
        if self.experiment.seeds.is_empty() {
            push("experiment.seeds", "need at least one seed".into());
        }
        let o = self.learner.horizon;
        if o > 0 && self.experiment.total_steps % o != 0 {
            push(
                "experiment.T",
                format!("{} is not a multiple of O = {o}", self.experiment.total_steps),
            );
        }
        if self.experiment.eval_steps == 0 {
            push("experiment.eval_steps", "must be positive".into());
        }
        let d = &self.data;
        if d.width < 2 {
            push("data.W", format!("{} < 2", d.width));
        }
        if !(0.0..1.0).contains(&d.overlap) {
            push("data.overlap", format!("{} outside [0, 1)", d.overlap));
        }
        if !(d.train_ratio > 0.0 && d.train_ratio < 1.0) {
            push("data.train_ratio", format!("{} outside (0, 1)", d.train_ratio));
        }
        match d.source {
            DataSource::Synthetic => {
                if d.synth.channels == 0 {
                    push("data.synth.J", "need at least one channel".into());
                }
                if d.synth.band_hz.len() < 2 {
                    push("data.synth.band_hz", "need at least two classes".into());
                }
                if d.synth.epoch_samples < d.width {
                    push("data.synth.epoch_samples", format!("shorter than W = {}", d.width));
                }
            }
            DataSource::EdfDir => {
                if d.path.is_none() {
                    push("data.path", "required for edf-dir".into());
                }
                if d.subjects.len() != self.env.users {
                    push(
                        "data.subjects",
                        format!("{} subjects for K = {}", d.subjects.len(), self.env.users),
                    );
                }
            }
        }
        errs
    }

    pub fn validate(&self) -> Result<()> {
        let errs = self.check();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(HarnessError::Invalid(errs))
        }
    }
}

/// Sets a dotted key in a TOML table. The value is parsed as TOML and
/// falls back to a plain string.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| HarnessError::Override(format!("`{assignment}` is not key=value")))?;
    let value = parse_value(raw.trim());
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(HarnessError::Override(format!("bad key `{key}`")));
    }
    let mut node = table;
    for p in &parts[..parts.len() - 1] {
        let entry = node
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| HarnessError::Override(format!("`{p}` in `{key}` is not a section")))?;
    }
    node.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&doc) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}
