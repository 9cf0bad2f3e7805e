use std::path::PathBuf;

use thiserror::Error;

use crate::vocab::TokenId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown token {0:?}")]
    UnknownToken(String),

    #[error("invalid token id {id} (vocabulary size {size})")]
    InvalidTokenId { id: TokenId, size: usize },

    #[error("invalid vocabulary: {0}")]
    InvalidVocabulary(String),

    #[error("log-probability vector is not normalized: exp-sum {sum}")]
    NotNormalized { sum: f64 },

    #[error("invalid log-probability vector: {0}")]
    InvalidLogProbs(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("scorer vocabulary mismatch: vocabulary has {vocab} tokens, {scorer} scorer has {actual}")]
    VocabMismatch {
        scorer: &'static str,
        vocab: usize,
        actual: usize,
    },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid language model: {0}")]
    InvalidModel(String),

    #[error("decoding produced no finished hypothesis")]
    NoHypothesis,

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("fraction must lie in (0, 1], got {0}")]
    FractionOutOfRange(f64),

    #[error("reference text has no words")]
    EmptyReference,

    #[error("sample ids do not match: {}", preview_ids(.0))]
    IdMismatch(Vec<String>),

    #[error("duplicate sample id {0:?}")]
    DuplicateSampleId(String),

    #[error("sample {sample_id}: {source}")]
    Sample {
        sample_id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error(transparent)]
    Serde(#[from] serde_json::Error),
}

fn preview_ids(ids: &[String]) -> String {
    const SHOWN: usize = 5;
    let mut out = ids
        .iter()
        .take(SHOWN)
        .map(String::as_str)
        .collect::<Vec<_>>()
        .join(", ");
    if ids.len() > SHOWN {
        out.push_str(&format!(" and {} more", ids.len() - SHOWN));
    }
    out
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by malformed or unreadable input files.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::Io { .. } | Error::Json { .. } | Error::Serde(_) => true,
            Error::Sample { source, .. } => source.is_input_error(),
            Error::UnknownToken(_)
            | Error::InvalidTokenId { .. }
            | Error::InvalidVocabulary(_)
            | Error::NotNormalized { .. }
            | Error::InvalidLogProbs(_)
            | Error::InvalidScenario(_)
            | Error::InvalidModel(_)
            | Error::EmptyCorpus
            | Error::EmptyReference
            | Error::IdMismatch(_)
            | Error::DuplicateSampleId(_)
            | Error::VocabMismatch { .. }
            | Error::LengthMismatch { .. } => true,
            Error::EmptyInput(_) | Error::InvalidConfig(_) | Error::FractionOutOfRange(_) | Error::NoHypothesis => {
                false
            }
        }
    }
}
