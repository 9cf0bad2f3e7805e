mod config;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use lmfuse::manifest::{read_corpus, read_jsonl, read_manifest, write_jsonl, write_manifest, TextEntry};
use lmfuse::metrics::{corpus_wer, wer, WerBreakdown};
use lmfuse::selection::{batch_decode, filter_selected, select_top_fraction, DecodeInput};
use lmfuse::suite::{self, run_suite, Suite};
use lmfuse::{train_ngram, AcousticScenario, Error, NGramLm, SampleRecord, Scorer, Vocabulary};

use config::{sidecar, DecodeConfig, FileConfig, LmConfig, RunManifest, DEFAULT_K, DEFAULT_ORDER};

#[derive(Parser)]
#[command(name = "lmfuse", version)]
#[command(about = "LM-fused beam search decoding and ALP-based pseudo-label selection")]
struct Cli {
    /// JSON config file; a `.run.json` manifest from an earlier run also works
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed for suite generation (default 0)
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

impl Switch {
    fn on(self) -> bool {
        self == Switch::On
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteName {
    NoisyChannel,
    EotContinuation,
    Hallucination,
    Heterogeneous,
}

#[derive(clap::Args)]
struct DecodeFlags {
    #[arg(long)]
    beam_size: Option<usize>,
    /// LM weight in the fused score
    #[arg(long)]
    lambda_gpt: Option<f64>,
    #[arg(long)]
    max_tokens: Option<usize>,
    #[arg(long, value_enum)]
    eot_gate: Option<Switch>,
    #[arg(long, value_enum)]
    hallucination_penalty: Option<Switch>,
    #[arg(long, value_enum)]
    truncation_penalty: Option<Switch>,
}

#[derive(Subcommand)]
enum Command {
    /// Train an add-k n-gram LM on a text corpus (one sentence per line)
    TrainLm {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long)]
        order: Option<usize>,
        /// Add-k smoothing constant
        #[arg(long)]
        k: Option<f64>,
        /// Train the LM to predict end-of-text after each sentence
        #[arg(long, value_enum)]
        eot: Option<Switch>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decode acoustic scenario files into a JSONL pseudo-label manifest
    Decode {
        #[arg(long)]
        lm: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        #[command(flatten)]
        flags: DecodeFlags,
        #[arg(long)]
        out: PathBuf,
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
    },
    /// Score a hypothesis manifest against a reference manifest
    EvalWer {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long = "hyp")]
        hypothesis: PathBuf,
        /// Per-sample breakdowns, one JSON object per line
        #[arg(long)]
        out: PathBuf,
    },
    /// Keep the top fraction of a manifest by ALP
    Select {
        #[arg(long)]
        manifest: PathBuf,
        /// Share of decoded samples to keep, in (0, 1]
        #[arg(long)]
        fraction: Option<f64>,
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Perplexity of an LM on a corpus
    Ppl {
        #[arg(long)]
        lm: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        /// Also write the result as JSON
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write one of the built-in scenario suites to a directory
    GenSuite {
        #[arg(long, value_enum)]
        name: SuiteName,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train, decode every configuration, score and sweep a suite directory
    RunSuite {
        #[arg(long)]
        suite: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Bad flag values and other mistakes in how the tool was invoked.
#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

const EXIT_USAGE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_INTERNAL: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return EXIT_USAGE;
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::InvalidConfig(_) | Error::FractionOutOfRange(_) => EXIT_USAGE,
                Error::EmptyInput(_) => EXIT_INPUT,
                e if e.is_input_error() => EXIT_INPUT,
                _ => EXIT_INTERNAL,
            };
        }
        if cause.is::<std::io::Error>() || cause.is::<serde_json::Error>() || cause.is::<csv::Error>() {
            return EXIT_INPUT;
        }
    }
    EXIT_INTERNAL
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}

/// The error and its causes, skipping causes already quoted by their parent.
fn describe(err: &anyhow::Error) -> String {
    let mut msg = err.to_string();
    for cause in err.chain().skip(1) {
        let text = cause.to_string();
        if !msg.contains(&text) {
            msg.push_str(": ");
            msg.push_str(&text);
        }
    }
    msg
}

fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let seed = cli.seed.or(file.seed).unwrap_or(0);
    let started = Instant::now();
    match cli.command {
        Command::TrainLm {
            corpus,
            vocab,
            order,
            k,
            eot,
            out,
        } => {
            let cfg = LmConfig {
                order: order.or(file.order).unwrap_or(DEFAULT_ORDER),
                k: k.or(file.k).unwrap_or(DEFAULT_K),
                append_eot: eot.map(Switch::on).or(file.append_eot).unwrap_or(true),
            };
            if cfg.order == 0 {
                return Err(usage("--order must be at least 1"));
            }
            if !(cfg.k > 0.0 && cfg.k.is_finite()) {
                return Err(usage(format!("--k must be positive, got {}", cfg.k)));
            }
            let vocab_data = Vocabulary::load(&vocab)?;
            let sentences = read_corpus(&corpus, &vocab_data)?;
            let lm = train_ngram(&sentences, &vocab_data, cfg.order, cfg.k, cfg.append_eot)?;
            lm.save(&out)?;
            let ppl = lm.perplexity(&sentences)?;
            println!("trained order-{} LM on {} sentences", cfg.order, sentences.len());
            println!("training perplexity: {ppl:.4}");
            let mut m = RunManifest::new("train-lm", cfg)
                .input("corpus", &corpus)
                .input("vocab", &vocab)
                .output("lm", &out);
            m.summary = json!({ "sentences": sentences.len(), "train_perplexity": ppl });
            m.write(&sidecar(&out), started.elapsed())
        }
        Command::Decode {
            lm,
            vocab,
            flags,
            out,
            scenarios,
        } => {
            let d = DecodeConfig::default();
            let cfg = DecodeConfig {
                beam_size: flags.beam_size.or(file.beam_size).unwrap_or(d.beam_size),
                lambda_gpt: flags.lambda_gpt.or(file.lambda_gpt).unwrap_or(d.lambda_gpt),
                max_tokens: flags.max_tokens.or(file.max_tokens).unwrap_or(d.max_tokens),
                eot_gate: flags.eot_gate.map(Switch::on).or(file.eot_gate).unwrap_or(d.eot_gate),
                hallucination_penalty: flags
                    .hallucination_penalty
                    .map(Switch::on)
                    .or(file.hallucination_penalty)
                    .unwrap_or(d.hallucination_penalty),
                truncation_penalty: flags
                    .truncation_penalty
                    .map(Switch::on)
                    .or(file.truncation_penalty)
                    .unwrap_or(d.truncation_penalty),
            };
            let beam = cfg.beam();
            beam.validate().map_err(|e| usage(e.to_string()))?;
            let vocab_data = Vocabulary::load(&vocab)?;
            let lm_data = NGramLm::load(&lm)?;
            if lm_data.vocab_size() != vocab_data.len() {
                return Err(Error::VocabMismatch {
                    scorer: "language",
                    vocab: vocab_data.len(),
                    actual: lm_data.vocab_size(),
                }
                .into());
            }
            let records = decode_files(&scenarios, &lm_data, &vocab_data, &beam)?;
            write_manifest(&out, &records)?;

            let ok: Vec<&SampleRecord> = records.iter().filter(|r| !r.is_failed()).collect();
            let mean_alp = ok.iter().map(|r| r.alp).sum::<f64>() / ok.len() as f64;
            let truncated = ok.iter().filter(|r| r.truncated).count();
            let cyclic = ok.iter().filter(|r| r.cycle.is_cyclic()).count();
            let failed = records.len() - ok.len();
            println!(
                "decoded {} samples ({failed} failed): mean ALP {mean_alp:.4}, truncated {truncated}, cycle-flagged {cyclic}",
                records.len()
            );
            let mut m = RunManifest::new("decode", cfg)
                .input("lm", &lm)
                .input("vocab", &vocab)
                .input("scenarios", &scenarios)
                .output("manifest", &out);
            m.summary = json!({
                "samples": records.len(),
                "failed": failed,
                "mean_alp": mean_alp,
                "truncated": truncated,
                "cycle_flagged": cyclic,
            });
            m.write(&sidecar(&out), started.elapsed())
        }
        Command::EvalWer {
            reference,
            hypothesis,
            out,
        } => {
            let refs: Vec<TextEntry> = read_jsonl(&reference)?;
            let hyps: Vec<TextEntry> = read_jsonl(&hypothesis)?;
            let rows = score_parallel(&refs, &hyps)?;
            write_jsonl(&out, &rows)?;
            let total = corpus_wer(rows.iter().map(|r| &r.wer));
            let errors: usize = rows.iter().map(|r| r.wer.errors()).sum();
            let words: usize = rows.iter().map(|r| r.wer.ref_words).sum();
            println!(
                "corpus WER: {total:.4} ({errors} errors / {words} reference words, {} samples)",
                rows.len()
            );
            let mut m = RunManifest::new("eval-wer", json!({}))
                .input("reference", &reference)
                .input("hypothesis", &hypothesis)
                .output("per_sample", &out);
            m.summary = json!({ "corpus_wer": total, "errors": errors, "ref_words": words, "samples": rows.len() });
            m.write(&sidecar(&out), started.elapsed())
        }
        Command::Select {
            manifest,
            fraction,
            report,
            out,
        } => {
            let fraction = fraction
                .or(file.fraction)
                .ok_or_else(|| usage("--fraction is required"))?;
            if !(fraction > 0.0 && fraction <= 1.0) {
                return Err(usage(format!("--fraction must lie in (0, 1], got {fraction}")));
            }
            let records = read_manifest(&manifest)?;
            let sel = select_top_fraction(&records, fraction)?;
            let kept = filter_selected(&records, &sel);
            let json = serde_json::to_string_pretty(&sel)? + "\n";
            fs::write(&report, json).with_context(|| format!("writing {}", report.display()))?;
            write_manifest(&out, &kept)?;
            println!(
                "selected {} of {} samples (ALP >= {:.4})",
                sel.selected_count, sel.total, sel.alp_threshold
            );
            RunManifest::new("select", json!({ "fraction": fraction }))
                .input("manifest", &manifest)
                .output("report", &report)
                .output("manifest", &out)
                .write(&sidecar(&out), started.elapsed())
        }
        Command::Ppl { lm, corpus, vocab, out } => {
            let vocab_data = Vocabulary::load(&vocab)?;
            let lm_data = NGramLm::load(&lm)?;
            let sentences = read_corpus(&corpus, &vocab_data)?;
            let ppl = lm_data.perplexity(&sentences)?;
            println!("{ppl:.4}");
            if let Some(out) = out {
                let json = serde_json::to_string_pretty(&json!({ "perplexity": ppl, "sentences": sentences.len() }))?;
                fs::write(&out, json + "\n").with_context(|| format!("writing {}", out.display()))?;
                RunManifest::new("ppl", json!({}))
                    .input("lm", &lm)
                    .input("corpus", &corpus)
                    .input("vocab", &vocab)
                    .output("result", &out)
                    .write(&sidecar(&out), started.elapsed())?;
            }
            Ok(())
        }
        Command::GenSuite { name, out } => {
            let s = match name {
                SuiteName::NoisyChannel => suite::noisy_channel(seed),
                SuiteName::EotContinuation => suite::eot_continuation(seed),
                SuiteName::Hallucination => suite::hallucination(seed),
                SuiteName::Heterogeneous => suite::heterogeneous(seed),
            }?;
            s.write(&out)?;
            println!(
                "wrote suite {} ({} utterances) to {}",
                s.config.name,
                s.len(),
                out.display()
            );
            let mut m = RunManifest::new("gen-suite", json!({ "seed": seed })).output("suite", &out);
            m.summary = json!({ "name": s.config.name, "utterances": s.len() });
            m.write(&out.join("gen-suite.run.json"), started.elapsed())
        }
        Command::RunSuite { suite, out } => {
            let s = Suite::load(&suite)?;
            let report = run_suite(&s)?;
            write_suite_outputs(&s, &report, &out)?;
            println!(
                "suite {}: LM training perplexity {:.4}",
                report.suite, report.lm_train_perplexity
            );
            for r in &report.rows {
                println!(
                    "  {:<20} corpus WER {:>7.2}%  mean ALP {:>8.4}  truncated {:>3}  cycle-flagged {:>3}",
                    r.config,
                    100.0 * r.corpus_wer,
                    r.mean_alp,
                    r.truncated,
                    r.cyclic
                );
            }
            let mut m = RunManifest::new("run-suite", &s.config)
                .input("suite", &suite)
                .output("dir", &out);
            m.summary = json!({ "rows": report.rows });
            m.write(&out.join("run-suite.run.json"), started.elapsed())
        }
    }
}

/// Loads and decodes each scenario file. A file that fails to load becomes
/// a flagged record named after the file.
fn decode_files(
    paths: &[PathBuf],
    lm: &NGramLm,
    vocab: &Vocabulary,
    beam: &lmfuse::BeamConfig,
) -> Result<Vec<SampleRecord>> {
    let mut slots: Vec<std::result::Result<usize, SampleRecord>> = Vec::with_capacity(paths.len());
    let mut inputs = Vec::new();
    for path in paths {
        let scenario_ref = path.display().to_string();
        match AcousticScenario::load(path) {
            Ok(scenario) => {
                slots.push(Ok(inputs.len()));
                inputs.push(DecodeInput {
                    sample_id: scenario.id().to_string(),
                    scenario_ref,
                    scenario,
                });
            }
            Err(e) => {
                let id = path
                    .file_stem()
                    .map_or(scenario_ref.clone(), |s| s.to_string_lossy().into_owned());
                eprintln!("warning: {e}");
                slots.push(Err(SampleRecord::failed(id, scenario_ref, &e)));
            }
        }
    }
    if inputs.is_empty() {
        bail!(Error::EmptyInput("no scenario file could be loaded"));
    }
    let mut decoded = batch_decode(&inputs, lm, vocab, beam)?;
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(slots.len());
    for slot in slots {
        let record = match slot {
            Ok(i) => std::mem::replace(&mut decoded[i], SampleRecord::failed("", "", &Error::NoHypothesis)),
            Err(r) => r,
        };
        if !seen.insert(record.sample_id.clone()) {
            return Err(Error::DuplicateSampleId(record.sample_id).into());
        }
        out.push(record);
    }
    Ok(out)
}

#[derive(Serialize)]
struct WerLine {
    sample_id: String,
    #[serde(flatten)]
    wer: WerBreakdown,
}

/// Per-sample WER in reference order; both manifests must hold the same ids.
fn score_parallel(refs: &[TextEntry], hyps: &[TextEntry]) -> Result<Vec<WerLine>> {
    let by_id: HashMap<&str, &str> = hyps.iter().map(|h| (h.sample_id.as_str(), h.text.as_str())).collect();
    let ref_ids: BTreeSet<&str> = refs.iter().map(|r| r.sample_id.as_str()).collect();
    let mut offenders: Vec<String> = refs
        .iter()
        .filter(|r| !by_id.contains_key(r.sample_id.as_str()))
        .map(|r| r.sample_id.clone())
        .collect();
    offenders.extend(
        hyps.iter()
            .filter(|h| !ref_ids.contains(h.sample_id.as_str()))
            .map(|h| h.sample_id.clone()),
    );
    if !offenders.is_empty() || by_id.len() != hyps.len() || ref_ids.len() != refs.len() {
        return Err(Error::IdMismatch(offenders).into());
    }
    refs.iter()
        .map(|r| {
            let w = wer(&r.text, by_id[r.sample_id.as_str()]).with_context(|| format!("sample {}", r.sample_id))?;
            Ok(WerLine {
                sample_id: r.sample_id.clone(),
                wer: w,
            })
        })
        .collect()
}

fn write_suite_outputs(s: &Suite, report: &suite::SuiteReport, out: &Path) -> Result<()> {
    let manifests = out.join("manifests");
    fs::create_dir_all(&manifests).with_context(|| format!("creating {}", manifests.display()))?;
    fs::write(out.join("comparison.csv"), report.to_csv())?;
    fs::write(
        out.join("comparison.json"),
        serde_json::to_string_pretty(report)? + "\n",
    )?;

    let mut samples = csv::Writer::from_path(out.join("samples.csv"))?;
    samples.write_record([
        "config",
        "sample_id",
        "reference",
        "text",
        "alp",
        "wer",
        "n_tokens",
        "truncated",
        "L",
        "C",
    ])?;
    for run in &report.runs {
        let name = &run.row.config;
        write_manifest(manifests.join(format!("{name}.jsonl")), &run.records)?;
        for ((rec, w), reference) in run.records.iter().zip(&run.wers).zip(&s.references) {
            samples.write_record([
                name.as_str(),
                &rec.sample_id,
                &reference.text,
                &rec.text,
                &format!("{:.6}", rec.alp),
                &format!("{:.6}", w.wer),
                &rec.n_tokens.to_string(),
                &rec.truncated.to_string(),
                &rec.cycle.period.to_string(),
                &rec.cycle.repeats.to_string(),
            ])?;
        }
    }
    samples.flush()?;
    Ok(())
}
