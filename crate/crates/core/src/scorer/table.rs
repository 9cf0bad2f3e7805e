use std::borrow::Cow;
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{check_token, Scorer};
use crate::error::{Error, Result};
use crate::logprob::LogProbVector;
use crate::vocab::TokenId;

/// One row of a scenario table: the acoustic posterior after `prefix`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEntry {
    pub prefix: Vec<TokenId>,
    pub probs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ScenarioFile {
    id: String,
    vocab_ref: String,
    entries: Vec<ScenarioEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    position_probs: Vec<Vec<f64>>,
    default_probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
struct Row {
    probs: Vec<f64>,
    logp: LogProbVector,
}

impl Row {
    fn new(probs: Vec<f64>, size: usize, what: &str) -> Result<Self> {
        if probs.len() != size {
            return Err(Error::InvalidScenario(format!(
                "{what}: expected {size} probabilities, got {}",
                probs.len()
            )));
        }
        let logp = LogProbVector::from_probs(&probs).map_err(|e| Error::InvalidScenario(format!("{what}: {e}")))?;
        Ok(Self { probs, logp })
    }
}

/// Table-driven stand-in for one audio clip.
///
/// Lookup order for a prefix: an exact `entries` row, then the
/// `position_probs` row for the prefix length, then `default_probs`.
/// Position rows model evidence that depends only on how far decoding has
/// progressed through the clip, not on what was decoded.
#[derive(Debug, Clone, PartialEq)]
pub struct AcousticScenario {
    id: String,
    vocab_ref: String,
    entries: BTreeMap<Vec<TokenId>, Row>,
    positions: Vec<Row>,
    default: Row,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TableState {
    prefix: Vec<TokenId>,
}

impl TableState {
    pub fn prefix(&self) -> &[TokenId] {
        &self.prefix
    }
}

impl AcousticScenario {
    pub fn new(
        id: impl Into<String>,
        vocab_ref: impl Into<String>,
        entries: Vec<ScenarioEntry>,
        default_probs: Vec<f64>,
    ) -> Result<Self> {
        Self::with_positions(id, vocab_ref, entries, Vec::new(), default_probs)
    }

    pub fn with_positions(
        id: impl Into<String>,
        vocab_ref: impl Into<String>,
        entries: Vec<ScenarioEntry>,
        position_probs: Vec<Vec<f64>>,
        default_probs: Vec<f64>,
    ) -> Result<Self> {
        let size = default_probs.len();
        let default = Row::new(default_probs, size, "default_probs")?;
        let mut table = BTreeMap::new();
        for entry in entries {
            if let Some(&bad) = entry.prefix.iter().find(|&&t| t as usize >= size) {
                return Err(Error::InvalidScenario(format!("prefix token {bad} out of range")));
            }
            let row = Row::new(entry.probs, size, &format!("entry {:?}", entry.prefix))?;
            if table.insert(entry.prefix.clone(), row).is_some() {
                return Err(Error::InvalidScenario(format!("duplicate prefix {:?}", entry.prefix)));
            }
        }
        if !table.contains_key(&Vec::new()) {
            return Err(Error::InvalidScenario("missing entry for the empty prefix".into()));
        }
        let positions = position_probs
            .into_iter()
            .enumerate()
            .map(|(i, p)| Row::new(p, size, &format!("position {i}")))
            .collect::<Result<_>>()?;
        Ok(Self {
            id: id.into(),
            vocab_ref: vocab_ref.into(),
            entries: table,
            positions,
            default,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn vocab_ref(&self) -> &str {
        &self.vocab_ref
    }

    fn row(&self, prefix: &[TokenId]) -> &Row {
        self.entries
            .get(prefix)
            .or_else(|| self.positions.get(prefix.len()))
            .unwrap_or(&self.default)
    }

    pub fn lookup(&self, prefix: &[TokenId]) -> &LogProbVector {
        &self.row(prefix).logp
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let file: ScenarioFile = serde_json::from_str(json)?;
        Self::from_file(file)
    }

    fn from_file(file: ScenarioFile) -> Result<Self> {
        Self::with_positions(
            file.id,
            file.vocab_ref,
            file.entries,
            file.position_probs,
            file.default_probs,
        )
    }

    pub fn to_json(&self) -> String {
        let file = ScenarioFile {
            id: self.id.clone(),
            vocab_ref: self.vocab_ref.clone(),
            entries: self
                .entries
                .iter()
                .map(|(prefix, row)| ScenarioEntry {
                    prefix: prefix.clone(),
                    probs: row.probs.clone(),
                })
                .collect(),
            position_probs: self.positions.iter().map(|r| r.probs.clone()).collect(),
            default_probs: self.default.probs.clone(),
        };
        serde_json::to_string(&file).expect("scenario serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: ScenarioFile = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        Self::from_file(file).map_err(|e| Error::Sample {
            sample_id: path.display().to_string(),
            source: Box::new(e),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }
}

impl Scorer for AcousticScenario {
    type State = TableState;

    fn vocab_size(&self) -> usize {
        self.default.probs.len()
    }

    fn initial_state(&self) -> TableState {
        TableState::default()
    }

    fn score<'a>(&'a self, state: &TableState) -> Cow<'a, LogProbVector> {
        Cow::Borrowed(self.lookup(&state.prefix))
    }

    fn advance(&self, state: &TableState, token: TokenId) -> Result<TableState> {
        check_token(token, self.vocab_size())?;
        let mut prefix = Vec::with_capacity(state.prefix.len() + 1);
        prefix.extend_from_slice(&state.prefix);
        prefix.push(token);
        Ok(TableState { prefix })
    }
}
