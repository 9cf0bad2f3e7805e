//! LM-fused beam search with EOT gating and hallucination penalties, plus
//! ALP-ranked pseudo-label selection.
//!
//! The acoustic model and the language model are both [`scorer::Scorer`]s.
//! [`beam::beam_search`] fuses them step by step, and [`selection`] turns a
//! batch of decodes into a ranked pseudo-label manifest.

pub mod beam;
pub mod error;
pub mod fusion;
pub mod logprob;
pub mod manifest;
pub mod metrics;
pub mod penalty;
pub mod scorer;
pub mod selection;
pub mod suite;
pub mod vocab;

pub use beam::{beam_search, BeamConfig, Candidate, DecodeResult, Hypothesis};
pub use error::{Error, Result};
pub use fusion::{fuse_step, FusionConfig};
pub use logprob::LogProbVector;
pub use penalty::{apply_cycle_penalty, apply_truncation_penalty, detect_max_cycle, CycleReport};
pub use scorer::{train_ngram, AcousticScenario, NGramLm, Scorer, UniformScorer};
pub use selection::{batch_decode, select_top_fraction, SampleRecord, SelectionReport};
pub use vocab::{TokenId, TokenMode, Vocabulary};
