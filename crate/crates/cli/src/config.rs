//! Config-file layer and run manifests.
//!
//! Resolution order for every setting is flag, then config file, then the
//! built-in default. The resolved values are written back out in the run
//! manifest, which is itself accepted as a config file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use lmfuse::{BeamConfig, FusionConfig};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub order: Option<usize>,
    pub k: Option<f64>,
    pub append_eot: Option<bool>,
    pub beam_size: Option<usize>,
    pub lambda_gpt: Option<f64>,
    pub max_tokens: Option<usize>,
    pub eot_gate: Option<bool>,
    pub hallucination_penalty: Option<bool>,
    pub truncation_penalty: Option<bool>,
    pub fraction: Option<f64>,
}

impl FileConfig {
    /// Reads a config file. A run manifest works too: its `config` object is
    /// used.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut value: Value =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        if let Some(inner) = value.get_mut("config").filter(|_| value_is_manifest(&text)) {
            value = inner.take();
        }
        serde_json::from_value(value).with_context(|| format!("parsing config {}", path.display()))
    }
}

fn value_is_manifest(text: &str) -> bool {
    serde_json::from_str::<RunManifest>(text).is_ok()
}

pub const DEFAULT_ORDER: usize = 3;
pub const DEFAULT_K: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmConfig {
    pub order: usize,
    pub k: f64,
    pub append_eot: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeConfig {
    pub beam_size: usize,
    pub lambda_gpt: f64,
    pub max_tokens: usize,
    pub eot_gate: bool,
    pub hallucination_penalty: bool,
    pub truncation_penalty: bool,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        let b = BeamConfig::default();
        Self {
            beam_size: b.beam_size,
            lambda_gpt: b.fusion.lambda_gpt,
            max_tokens: b.max_tokens,
            eot_gate: b.fusion.eot_gate_enabled,
            hallucination_penalty: b.hallucination_penalty_enabled,
            truncation_penalty: b.truncation_penalty_enabled,
        }
    }
}

impl DecodeConfig {
    pub fn beam(&self) -> BeamConfig {
        BeamConfig {
            beam_size: self.beam_size,
            max_tokens: self.max_tokens,
            fusion: FusionConfig {
                lambda_gpt: self.lambda_gpt,
                eot_gate_enabled: self.eot_gate,
            },
            hallucination_penalty_enabled: self.hallucination_penalty,
            truncation_penalty_enabled: self.truncation_penalty,
        }
    }
}

/// Sidecar written next to every command's outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: Value,
    pub inputs: BTreeMap<String, Value>,
    pub outputs: BTreeMap<String, Value>,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub summary: Value,
    pub duration_secs: f64,
}

impl RunManifest {
    pub fn new(command: &str, config: impl Serialize) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: serde_json::to_value(config).expect("config serializes"),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            summary: Value::Null,
            duration_secs: 0.0,
        }
    }

    pub fn input(mut self, name: &str, path: impl Serialize) -> Self {
        self.inputs
            .insert(name.into(), serde_json::to_value(path).expect("path serializes"));
        self
    }

    pub fn output(mut self, name: &str, path: impl Serialize) -> Self {
        self.outputs
            .insert(name.into(), serde_json::to_value(path).expect("path serializes"));
        self
    }

    pub fn write(mut self, path: &Path, elapsed: Duration) -> Result<()> {
        self.duration_secs = elapsed.as_secs_f64();
        let json = serde_json::to_string_pretty(&self)? + "\n";
        fs::write(path, json).with_context(|| format!("writing {}", path.display()))
    }
}

/// `out.jsonl` gets `out.jsonl.run.json`.
pub fn sidecar(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".run.json");
    out.with_file_name(name)
}
