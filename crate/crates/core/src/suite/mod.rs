//! Scenario suites: a vocabulary, an LM training corpus, reference
//! transcripts and one acoustic scenario per utterance, plus the decode
//! configurations to compare on them.
//!
//! [`run_suite`] trains the LM, decodes every utterance under every
//! configuration, scores WER against the references and sweeps the ALP
//! selection fraction.

mod generate;

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use generate::{
    eot_continuation, hallucination, hallucination_with, heterogeneous, noisy_channel, HallucinationParams,
    NoisyChannelParams,
};

use crate::beam::BeamConfig;
use crate::error::{Error, Result};
use crate::fusion::FusionConfig;
use crate::manifest::{parse_corpus, read_jsonl, write_jsonl, TextEntry};
use crate::metrics::{corpus_wer, wer, WerBreakdown};
use crate::scorer::{train_ngram, AcousticScenario};
use crate::selection::{batch_decode, filter_selected, select_top_fraction, DecodeInput, SampleRecord};
use crate::vocab::Vocabulary;

pub const SUITE_FILE: &str = "suite.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmSettings {
    pub order: usize,
    pub k: f64,
    pub append_eot: bool,
}

/// One named decode configuration to run over the whole suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeVariant {
    pub name: String,
    pub lambda_gpt: f64,
    pub eot_gate: bool,
    pub hallucination_penalty: bool,
    pub truncation_penalty: bool,
}

impl DecodeVariant {
    pub fn new(name: &str, lambda_gpt: f64, eot_gate: bool, hallucination_penalty: bool) -> Self {
        Self {
            name: name.to_string(),
            lambda_gpt,
            eot_gate,
            hallucination_penalty,
            truncation_penalty: hallucination_penalty,
        }
    }

    pub fn beam_config(&self, beam_size: usize, max_tokens: usize) -> BeamConfig {
        BeamConfig {
            beam_size,
            max_tokens,
            fusion: FusionConfig {
                lambda_gpt: self.lambda_gpt,
                eot_gate_enabled: self.eot_gate,
            },
            hallucination_penalty_enabled: self.hallucination_penalty,
            truncation_penalty_enabled: self.truncation_penalty,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRef {
    pub sample_id: String,
    pub path: String,
}

/// Contents of `suite.json`. Paths are relative to the suite directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub name: String,
    pub seed: u64,
    pub vocab: String,
    pub corpus: String,
    pub references: String,
    pub scenarios: Vec<ScenarioRef>,
    pub lm: LmSettings,
    pub beam_size: usize,
    pub max_tokens: usize,
    pub configs: Vec<DecodeVariant>,
    pub fractions: Vec<f64>,
}

impl SuiteConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(format!("suite {}: {m}", self.name)));
        if self.scenarios.is_empty() {
            return bad("no scenarios".into());
        }
        if self.configs.is_empty() {
            return bad("no decode configurations".into());
        }
        if let Some(f) = self.fractions.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
            return bad(format!("fraction {f} outside (0, 1]"));
        }
        for v in &self.configs {
            v.beam_config(self.beam_size, self.max_tokens).validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Suite {
    pub config: SuiteConfig,
    pub vocab: Vocabulary,
    /// LM training text, one sentence per entry.
    pub corpus: Vec<String>,
    pub references: Vec<TextEntry>,
    pub inputs: Vec<DecodeInput>,
}

impl Suite {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let scen_dir = dir.join("scenarios");
        fs::create_dir_all(&scen_dir).map_err(|e| Error::io(&scen_dir, e))?;
        self.vocab.save(dir.join(&self.config.vocab))?;
        let corpus_path = dir.join(&self.config.corpus);
        let mut corpus = self.corpus.join("\n");
        corpus.push('\n');
        fs::write(&corpus_path, corpus).map_err(|e| Error::io(&corpus_path, e))?;
        write_jsonl(dir.join(&self.config.references), &self.references)?;
        for (input, r) in self.inputs.iter().zip(&self.config.scenarios) {
            input.scenario.save(dir.join(&r.path))?;
        }
        let cfg_path = dir.join(SUITE_FILE);
        let json = serde_json::to_string_pretty(&self.config)? + "\n";
        fs::write(&cfg_path, json).map_err(|e| Error::io(&cfg_path, e))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let cfg_path = dir.join(SUITE_FILE);
        if !cfg_path.is_file() {
            return Err(Error::InvalidConfig(format!("{} not found", cfg_path.display())));
        }
        let text = fs::read_to_string(&cfg_path).map_err(|e| Error::io(&cfg_path, e))?;
        let config: SuiteConfig = serde_json::from_str(&text).map_err(|e| Error::json(&cfg_path, e))?;
        config.validate()?;
        let vocab = Vocabulary::load(dir.join(&config.vocab))?;
        let corpus_path = dir.join(&config.corpus);
        let corpus = fs::read_to_string(&corpus_path)
            .map_err(|e| Error::io(&corpus_path, e))?
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(str::to_string)
            .collect();
        let references = read_jsonl(dir.join(&config.references))?;
        let inputs = config
            .scenarios
            .iter()
            .map(|r| {
                Ok(DecodeInput {
                    sample_id: r.sample_id.clone(),
                    scenario_ref: r.path.clone(),
                    scenario: AcousticScenario::load(dir.join(&r.path))?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            config,
            vocab,
            corpus,
            references,
            inputs,
        })
    }
}

/// Per-configuration summary row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigRow {
    pub config: String,
    pub lambda_gpt: f64,
    pub eot_gate: bool,
    pub hallucination_penalty: bool,
    pub truncation_penalty: bool,
    pub corpus_wer: f64,
    pub mean_wer: f64,
    pub mean_alp: f64,
    pub truncated: usize,
    pub cyclic: usize,
    pub failed: usize,
}

/// WER of the top-`fraction` ALP subset under one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub config: String,
    pub fraction: f64,
    pub selected: usize,
    pub alp_threshold: f64,
    pub corpus_wer: f64,
    pub mean_wer: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleOutcome {
    pub sample_id: String,
    pub reference: String,
    pub text: String,
    pub alp: f64,
    pub wer: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfigRun {
    pub row: ConfigRow,
    pub records: Vec<SampleRecord>,
    pub wers: Vec<WerBreakdown>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub lm_train_perplexity: f64,
    pub rows: Vec<ConfigRow>,
    pub sweep: Vec<SweepRow>,
    #[serde(skip)]
    pub runs: Vec<ConfigRun>,
}

impl SuiteReport {
    pub fn row(&self, config: &str) -> Option<&ConfigRow> {
        self.rows.iter().find(|r| r.config == config)
    }

    pub fn run(&self, config: &str) -> Option<&ConfigRun> {
        self.runs.iter().find(|r| r.row.config == config)
    }

    pub fn sweep_for<'a>(&'a self, config: &'a str) -> impl Iterator<Item = &'a SweepRow> + 'a {
        self.sweep.iter().filter(move |r| r.config == config)
    }

    pub fn outcomes(&self, config: &str, references: &[TextEntry]) -> Vec<SampleOutcome> {
        let Some(run) = self.run(config) else {
            return Vec::new();
        };
        run.records
            .iter()
            .zip(&run.wers)
            .zip(references)
            .map(|((r, w), reference)| SampleOutcome {
                sample_id: r.sample_id.clone(),
                reference: reference.text.clone(),
                text: r.text.clone(),
                alp: r.alp,
                wer: w.wer,
            })
            .collect()
    }

    /// Comparison table: one line per configuration, then one per sweep point.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let header = [
            "kind",
            "config",
            "lambda_gpt",
            "eot_gate",
            "hallucination_penalty",
            "truncation_penalty",
            "fraction",
            "selected",
            "corpus_wer",
            "mean_wer",
            "alp",
        ];
        let mut rows = vec![header.map(String::from).to_vec()];
        for r in &self.rows {
            rows.push(vec![
                "config".into(),
                r.config.clone(),
                r.lambda_gpt.to_string(),
                r.eot_gate.to_string(),
                r.hallucination_penalty.to_string(),
                r.truncation_penalty.to_string(),
                "1".into(),
                self.run(&r.config).map_or(0, |x| x.records.len()).to_string(),
                format!("{:.6}", r.corpus_wer),
                format!("{:.6}", r.mean_wer),
                format!("{:.6}", r.mean_alp),
            ]);
        }
        for s in &self.sweep {
            rows.push(vec![
                "sweep".into(),
                s.config.clone(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                s.fraction.to_string(),
                s.selected.to_string(),
                format!("{:.6}", s.corpus_wer),
                format!("{:.6}", s.mean_wer),
                format!("{:.6}", s.alp_threshold),
            ]);
        }
        for row in rows {
            w.write_record(&row).expect("writing to memory");
        }
        String::from_utf8(w.into_inner().expect("writing to memory")).expect("csv output is utf-8")
    }
}

/// Scores records against references matched by sample id.
pub fn score_records(records: &[SampleRecord], references: &[TextEntry]) -> Result<Vec<WerBreakdown>> {
    let by_id: HashMap<&str, &str> = references
        .iter()
        .map(|r| (r.sample_id.as_str(), r.text.as_str()))
        .collect();
    let missing: Vec<String> = records
        .iter()
        .filter(|r| !by_id.contains_key(r.sample_id.as_str()))
        .map(|r| r.sample_id.clone())
        .collect();
    if !missing.is_empty() || records.len() != references.len() {
        let mut ids = missing;
        let rec_ids: std::collections::HashSet<&str> = records.iter().map(|r| r.sample_id.as_str()).collect();
        ids.extend(
            references
                .iter()
                .filter(|r| !rec_ids.contains(r.sample_id.as_str()))
                .map(|r| r.sample_id.clone()),
        );
        return Err(Error::IdMismatch(ids));
    }
    records
        .iter()
        .map(|r| wer(by_id[r.sample_id.as_str()], &r.text))
        .collect()
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (s, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

pub fn run_suite(suite: &Suite) -> Result<SuiteReport> {
    let cfg = &suite.config;
    cfg.validate()?;
    let corpus = parse_corpus(&suite.corpus.join("\n"), &suite.vocab)?;
    let lm = train_ngram(&corpus, &suite.vocab, cfg.lm.order, cfg.lm.k, cfg.lm.append_eot)?;
    let lm_train_perplexity = lm.perplexity(&corpus)?;

    let mut rows = Vec::new();
    let mut sweep = Vec::new();
    let mut runs = Vec::new();
    for variant in &cfg.configs {
        let beam = variant.beam_config(cfg.beam_size, cfg.max_tokens);
        let records = batch_decode(&suite.inputs, &lm, &suite.vocab, &beam)?;
        let wers = score_records(&records, &suite.references)?;
        let ok: Vec<usize> = (0..records.len()).filter(|&i| !records[i].is_failed()).collect();
        let row = ConfigRow {
            config: variant.name.clone(),
            lambda_gpt: variant.lambda_gpt,
            eot_gate: variant.eot_gate,
            hallucination_penalty: variant.hallucination_penalty,
            truncation_penalty: variant.truncation_penalty,
            corpus_wer: corpus_wer(&wers),
            mean_wer: mean(wers.iter().map(|w| w.wer)),
            mean_alp: mean(ok.iter().map(|&i| records[i].alp)),
            truncated: records.iter().filter(|r| r.truncated).count(),
            cyclic: records.iter().filter(|r| r.cycle.is_cyclic()).count(),
            failed: records.len() - ok.len(),
        };
        let wer_by_id: HashMap<&str, &WerBreakdown> = records.iter().map(|r| r.sample_id.as_str()).zip(&wers).collect();
        for &fraction in &cfg.fractions {
            let report = select_top_fraction(&records, fraction)?;
            let chosen: Vec<&WerBreakdown> = filter_selected(&records, &report)
                .iter()
                .map(|r| wer_by_id[r.sample_id.as_str()])
                .collect();
            sweep.push(SweepRow {
                config: variant.name.clone(),
                fraction,
                selected: report.selected_count,
                alp_threshold: report.alp_threshold,
                corpus_wer: corpus_wer(chosen.iter().copied()),
                mean_wer: mean(chosen.iter().map(|w| w.wer)),
            });
        }
        rows.push(row.clone());
        runs.push(ConfigRun { row, records, wers });
    }
    Ok(SuiteReport {
        suite: cfg.name.clone(),
        lm_train_perplexity,
        rows,
        sweep,
        runs,
    })
}
