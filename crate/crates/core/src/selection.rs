//! Pseudo-label generation and ALP-ranked subset selection.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beam::{beam_search, BeamConfig, DecodeResult};
use crate::error::{Error, Result};
use crate::penalty::CycleReport;
use crate::scorer::{AcousticScenario, Scorer};
use crate::vocab::Vocabulary;

/// One decoded utterance, as written to a JSONL manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub sample_id: String,
    pub scenario_ref: String,
    pub text: String,
    /// Penalized ALP of the chosen transcript; `null` in JSON for failed samples.
    #[serde(with = "finite_or_null")]
    pub alp: f64,
    pub n_tokens: usize,
    pub truncated: bool,
    pub cycle: CycleReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SampleRecord {
    pub fn from_decode(sample_id: impl Into<String>, scenario_ref: impl Into<String>, result: &DecodeResult) -> Self {
        let best = result.best_candidate();
        Self {
            sample_id: sample_id.into(),
            scenario_ref: scenario_ref.into(),
            text: result.text.clone(),
            alp: result.alp,
            n_tokens: best.n_tokens(),
            truncated: best.hypothesis.truncated,
            cycle: best.cycle,
            error: None,
        }
    }

    pub fn failed(sample_id: impl Into<String>, scenario_ref: impl Into<String>, error: &Error) -> Self {
        Self {
            sample_id: sample_id.into(),
            scenario_ref: scenario_ref.into(),
            text: String::new(),
            alp: f64::NEG_INFINITY,
            n_tokens: 0,
            truncated: false,
            cycle: CycleReport::default(),
            error: Some(error.to_string()),
        }
    }

    pub fn is_failed(&self) -> bool {
        self.error.is_some()
    }
}

mod finite_or_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub fraction: f64,
    pub total: usize,
    pub selected_count: usize,
    pub alp_threshold: f64,
    pub selected_ids: Vec<String>,
}

/// An unlabeled utterance queued for decoding.
#[derive(Debug, Clone)]
pub struct DecodeInput {
    pub sample_id: String,
    pub scenario_ref: String,
    pub scenario: AcousticScenario,
}

impl From<AcousticScenario> for DecodeInput {
    fn from(scenario: AcousticScenario) -> Self {
        Self {
            sample_id: scenario.id().to_string(),
            scenario_ref: scenario.id().to_string(),
            scenario,
        }
    }
}

/// Decodes every input independently (in parallel) and returns one record
/// per input in input order. A sample whose decode fails is returned as a
/// flagged record instead of aborting the batch.
pub fn batch_decode<L>(
    inputs: &[DecodeInput],
    lm: &L,
    vocab: &Vocabulary,
    config: &BeamConfig,
) -> Result<Vec<SampleRecord>>
where
    L: Scorer + ?Sized,
{
    if inputs.is_empty() {
        return Err(Error::EmptyInput("no scenarios to decode"));
    }
    config.validate()?;
    let mut seen = HashSet::new();
    for input in inputs {
        if !seen.insert(input.sample_id.as_str()) {
            return Err(Error::DuplicateSampleId(input.sample_id.clone()));
        }
    }
    Ok(inputs
        .par_iter()
        .map(|input| match beam_search(&input.scenario, lm, vocab, config) {
            Ok(result) => SampleRecord::from_decode(&input.sample_id, &input.scenario_ref, &result),
            Err(e) => SampleRecord::failed(
                &input.sample_id,
                &input.scenario_ref,
                &Error::Sample {
                    sample_id: input.sample_id.clone(),
                    source: Box::new(e),
                },
            ),
        })
        .collect())
}

/// Number of records kept for `fraction` of `total`: `ceil(fraction * total)`.
pub fn selection_size(fraction: f64, total: usize) -> usize {
    // absorb representation error such as 0.6 * 5 = 3.0000000000000004
    let raw = fraction * total as f64;
    ((raw - 1e-9).ceil().max(0.0) as usize).min(total)
}

/// Ranks successful records by ALP (descending, ties by sample id) and
/// keeps the top `ceil(fraction * n)`.
pub fn select_top_fraction(records: &[SampleRecord], fraction: f64) -> Result<SelectionReport> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::FractionOutOfRange(fraction));
    }
    let mut ranked: Vec<&SampleRecord> = records.iter().filter(|r| !r.is_failed()).collect();
    if ranked.is_empty() {
        return Err(Error::EmptyInput("no decoded records to select from"));
    }
    ranked.sort_by(|a, b| b.alp.total_cmp(&a.alp).then_with(|| a.sample_id.cmp(&b.sample_id)));
    let count = selection_size(fraction, ranked.len()).max(1);
    let selected = &ranked[..count];
    Ok(SelectionReport {
        fraction,
        total: ranked.len(),
        selected_count: count,
        alp_threshold: selected[count - 1].alp,
        selected_ids: selected.iter().map(|r| r.sample_id.clone()).collect(),
    })
}

/// Records named in `report`, in manifest order.
pub fn filter_selected(records: &[SampleRecord], report: &SelectionReport) -> Vec<SampleRecord> {
    let keep: HashSet<&str> = report.selected_ids.iter().map(String::as_str).collect();
    records
        .iter()
        .filter(|r| keep.contains(r.sample_id.as_str()))
        .cloned()
        .collect()
}
