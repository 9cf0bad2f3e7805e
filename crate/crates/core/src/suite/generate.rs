//! Seeded generators for the shipped suites.
//!
//! Utterances are sentences drawn from a random bigram source over a small
//! word vocabulary. Each utterance becomes a scenario whose acoustic rows
//! are keyed by decoding position: position `i` carries evidence for the
//! `i`-th reference word and the position after the last word carries
//! evidence for EOT. A step is either clean (a strong peak on the right
//! token) or, with the utterance's noise rate, noisy (a weak peak buried in
//! random mass), which is where an LM can help.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use super::{DecodeVariant, LmSettings, ScenarioRef, Suite, SuiteConfig};
use crate::error::Result;
use crate::manifest::TextEntry;
use crate::scorer::{AcousticScenario, ScenarioEntry};
use crate::selection::DecodeInput;
use crate::vocab::{TokenId, TokenMode, Vocabulary};

const FRACTIONS: [f64; 5] = [0.2, 0.4, 0.6, 0.8, 1.0];

#[derive(Debug, Clone, PartialEq)]
pub struct NoisyChannelParams {
    pub name: String,
    pub utterances: usize,
    pub words: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Per-utterance probability that a step is noisy, drawn uniformly
    /// from this range.
    pub noise: (f64, f64),
    /// Target mass on a clean step.
    pub clean_peak: f64,
    /// Target mass on a noisy step, before the random mass is added.
    pub noisy_peak: f64,
    /// Dirichlet concentration of the random mass on a noisy step.
    pub noise_concentration: f64,
    /// EOT mass on steps that are not the last.
    pub eot_floor: f64,
    /// EOT mass at the position after the last reference word.
    pub end_eot: f64,
    /// Mass given to the next source word at the end position, as if the
    /// clip cut into it. Zero disables the onset.
    pub end_onset: f64,
    /// EOT mass for positions past the end.
    pub tail_eot: f64,
    /// Dirichlet concentration of the source bigram rows.
    pub source_concentration: f64,
    pub lm_sentences: usize,
    /// Reference = prefix of a longer source sentence, which the LM corpus
    /// contains in full.
    pub cut_from: Option<(usize, usize)>,
    pub lm: LmSettings,
    pub beam_size: usize,
    pub max_tokens: usize,
    pub configs: Vec<DecodeVariant>,
}

impl NoisyChannelParams {
    fn base(name: &str) -> Self {
        Self {
            name: name.to_string(),
            utterances: 100,
            words: 12,
            min_len: 3,
            max_len: 8,
            noise: (0.4, 0.4),
            clean_peak: 0.7,
            noisy_peak: 0.1,
            noise_concentration: 1.0,
            eot_floor: 1e-3,
            end_eot: 0.8,
            end_onset: 0.0,
            tail_eot: 0.9,
            source_concentration: 0.15,
            lm_sentences: 3000,
            cut_from: None,
            lm: LmSettings {
                order: 2,
                k: 0.05,
                append_eot: true,
            },
            beam_size: 5,
            max_tokens: 32,
            configs: Vec::new(),
        }
    }
}

/// Bigram source: row 0 is the BOS context, row `i + 1` follows word `i`.
struct Source {
    rows: Vec<Vec<f64>>,
}

fn dirichlet(rng: &mut ChaCha8Rng, n: usize, alpha: f64) -> Vec<f64> {
    let gamma = Gamma::new(alpha, 1.0).expect("positive concentration");
    let mut v: Vec<f64> = (0..n).map(|_| gamma.sample(rng).max(1e-300)).collect();
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

fn draw(rng: &mut ChaCha8Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

impl Source {
    fn new(rng: &mut ChaCha8Rng, words: usize, alpha: f64) -> Self {
        Self {
            rows: (0..=words).map(|_| dirichlet(rng, words, alpha)).collect(),
        }
    }

    fn sentence(&self, rng: &mut ChaCha8Rng, len: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(len);
        let mut ctx = 0;
        for _ in 0..len {
            let w = draw(rng, &self.rows[ctx]);
            out.push(w);
            ctx = w + 1;
        }
        out
    }
}

fn word_vocab(words: usize) -> Vocabulary {
    Vocabulary::with_specials((0..words).map(|i| format!("w{i:02}")), TokenMode::Word).expect("valid vocabulary")
}

fn word_id(w: usize) -> TokenId {
    w as TokenId + 2
}

fn text_of(vocab: &Vocabulary, words: &[usize]) -> String {
    let ids: Vec<TokenId> = words.iter().map(|&w| word_id(w)).collect();
    vocab.decode_text(&ids).expect("generated ids are valid")
}

/// `mass` spread over content words by a Dirichlet draw, then `peaks` added.
fn acoustic_row(
    rng: &mut ChaCha8Rng,
    vocab: &Vocabulary,
    spread: f64,
    concentration: f64,
    peaks: &[(TokenId, f64)],
) -> Vec<f64> {
    let n = vocab.len();
    let content: Vec<TokenId> = vocab.content_ids().collect();
    let noise = dirichlet(rng, content.len(), concentration);
    let mut row = vec![0.0; n];
    for (&id, q) in content.iter().zip(noise) {
        row[id as usize] = spread * q;
    }
    for &(id, q) in peaks {
        row[id as usize] += q;
    }
    let s: f64 = row.iter().sum();
    row.iter_mut().for_each(|x| *x /= s);
    row
}

fn tail_row(vocab: &Vocabulary, tail_eot: f64) -> Vec<f64> {
    let content = vocab.content_ids().count() as f64;
    let mut row = vec![0.0; vocab.len()];
    for id in vocab.content_ids() {
        row[id as usize] = (1.0 - tail_eot) / content;
    }
    row[vocab.eot_id() as usize] = tail_eot;
    row
}

fn build(p: &NoisyChannelParams, seed: u64) -> Result<Suite> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab = word_vocab(p.words);
    let eot = vocab.eot_id();
    let source = Source::new(&mut rng, p.words, p.source_concentration);

    let sentence_len = |rng: &mut ChaCha8Rng| match p.cut_from {
        Some((lo, hi)) => rng.gen_range(lo..=hi),
        None => rng.gen_range(p.min_len..=p.max_len),
    };
    let corpus: Vec<String> = (0..p.lm_sentences)
        .map(|_| {
            let len = sentence_len(&mut rng);
            text_of(&vocab, &source.sentence(&mut rng, len))
        })
        .collect();

    let mut references = Vec::with_capacity(p.utterances);
    let mut inputs = Vec::with_capacity(p.utterances);
    let mut refs = Vec::with_capacity(p.utterances);
    for u in 0..p.utterances {
        let sample_id = format!("{}-{u:03}", p.name);
        let full_len = sentence_len(&mut rng);
        let full = source.sentence(&mut rng, full_len);
        let len = match p.cut_from {
            Some(_) => rng.gen_range(p.min_len..=p.max_len.min(full_len - 1)),
            None => full_len,
        };
        let words = &full[..len];
        let noise_rate = if p.noise.0 < p.noise.1 {
            rng.gen_range(p.noise.0..p.noise.1)
        } else {
            p.noise.0
        };

        let mut positions = Vec::with_capacity(len + 1);
        for &w in words {
            let id = word_id(w);
            let row = if rng.gen_bool(noise_rate) {
                acoustic_row(
                    &mut rng,
                    &vocab,
                    1.0 - p.noisy_peak - p.eot_floor,
                    p.noise_concentration,
                    &[(id, p.noisy_peak), (eot, p.eot_floor)],
                )
            } else {
                acoustic_row(
                    &mut rng,
                    &vocab,
                    1.0 - p.clean_peak - p.eot_floor,
                    1.0,
                    &[(id, p.clean_peak), (eot, p.eot_floor)],
                )
            };
            positions.push(row);
        }
        let mut end_peaks = vec![(eot, p.end_eot)];
        if p.end_onset > 0.0 {
            if let Some(&next) = full.get(len) {
                end_peaks.push((word_id(next), p.end_onset));
            }
        }
        let spread = 1.0 - end_peaks.iter().map(|x| x.1).sum::<f64>();
        positions.push(acoustic_row(&mut rng, &vocab, spread, 1.0, &end_peaks));

        let scenario = AcousticScenario::with_positions(
            sample_id.clone(),
            "vocab.json",
            vec![ScenarioEntry {
                prefix: Vec::new(),
                probs: positions[0].clone(),
            }],
            positions,
            tail_row(&vocab, p.tail_eot),
        )?;
        let path = format!("scenarios/{sample_id}.json");
        references.push(TextEntry {
            sample_id: sample_id.clone(),
            text: text_of(&vocab, words),
        });
        refs.push(ScenarioRef {
            sample_id: sample_id.clone(),
            path: path.clone(),
        });
        inputs.push(DecodeInput {
            sample_id,
            scenario_ref: path,
            scenario,
        });
    }

    Ok(Suite {
        config: SuiteConfig {
            name: p.name.clone(),
            seed,
            vocab: "vocab.json".into(),
            corpus: "corpus.txt".into(),
            references: "references.jsonl".into(),
            scenarios: refs,
            lm: p.lm.clone(),
            beam_size: p.beam_size,
            max_tokens: p.max_tokens,
            configs: p.configs.clone(),
            fractions: FRACTIONS.to_vec(),
        },
        vocab,
        corpus,
        references,
        inputs,
    })
}

/// 100 utterances at a fixed 0.4 noise rate; compares λ ∈ {0, 0.3} with the
/// hallucination penalty on and off.
pub fn noisy_channel(seed: u64) -> Result<Suite> {
    let mut p = NoisyChannelParams::base("noisy-channel");
    p.configs = vec![
        DecodeVariant::new("lm0-hp-off", 0.0, true, false),
        DecodeVariant::new("lm0-hp-on", 0.0, true, true),
        DecodeVariant::new("lm0.3-hp-off", 0.3, true, false),
        DecodeVariant::new("lm0.3-hp-on", 0.3, true, true),
    ];
    build(&p, seed)
}

/// References end mid-sentence: the LM has only seen the full sentences
/// and expects them to continue, and each clip carries a little onset of
/// the next word. Compares the EOT gate on and off at λ = 0.3.
pub fn eot_continuation(seed: u64) -> Result<Suite> {
    let mut p = NoisyChannelParams::base("eot-continuation");
    p.noise = (0.2, 0.2);
    p.min_len = 3;
    p.max_len = 7;
    p.cut_from = Some((12, 16));
    p.end_eot = 0.45;
    p.end_onset = 0.35;
    p.tail_eot = 0.5;
    p.configs = vec![
        DecodeVariant::new("lm0", 0.0, true, true),
        DecodeVariant::new("lm0.3-gate-on", 0.3, true, true),
        DecodeVariant::new("lm0.3-gate-off", 0.3, false, true),
    ];
    build(&p, seed)
}

/// 500 utterances whose noise rates span 0 to 0.8, for the ALP-fraction
/// sweep.
pub fn heterogeneous(seed: u64) -> Result<Suite> {
    let mut p = NoisyChannelParams::base("heterogeneous");
    p.utterances = 500;
    p.noise = (0.0, 0.8);
    p.configs = vec![DecodeVariant::new("lm0.3-hp-on", 0.3, true, true)];
    build(&p, seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HallucinationParams {
    /// Utterances whose audio invites repeating the phrase.
    pub looping: usize,
    /// Ordinary noisy-channel utterances mixed in.
    pub ordinary: usize,
    pub phrase_len: (usize, usize),
    /// Acoustic EOT mass after the first copy of the phrase.
    pub stop: f64,
    /// Acoustic mass on restarting the phrase at the same point.
    pub restart: f64,
}

impl Default for HallucinationParams {
    fn default() -> Self {
        Self {
            looping: 20,
            ordinary: 30,
            phrase_len: (3, 5),
            stop: 0.52,
            restart: 0.48,
        }
    }
}

/// Utterances that can be decoded as a phrase or as the phrase said twice.
/// The doubled reading has the higher raw ALP; only the cyclic-repetition
/// penalty rejects it. Ordinary noisy utterances fill out the ranking.
pub fn hallucination(seed: u64) -> Result<Suite> {
    hallucination_with(&HallucinationParams::default(), seed)
}

pub fn hallucination_with(h: &HallucinationParams, seed: u64) -> Result<Suite> {
    let mut base = NoisyChannelParams::base("hallucination");
    base.utterances = h.ordinary;
    base.configs = vec![
        DecodeVariant::new("lm0.3-hp-off", 0.3, true, false),
        DecodeVariant::new("lm0.3-hp-on", 0.3, true, true),
    ];
    let mut suite = build(&base, seed)?;
    let vocab = suite.vocab.clone();
    let eot = vocab.eot_id();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_100b);
    let all_words: Vec<usize> = (0..base.words).collect();

    for u in 0..h.looping {
        let sample_id = format!("hallucination-loop-{u:03}");
        let len = rng.gen_range(h.phrase_len.0..=h.phrase_len.1);
        let phrase: Vec<TokenId> = all_words.choose_multiple(&mut rng, len).map(|&w| word_id(w)).collect();

        let onehot = |id: TokenId| {
            let mut row = vec![0.0; vocab.len()];
            row[id as usize] = 1.0;
            row
        };
        let mut entries = Vec::new();
        let mut prefix = Vec::new();
        for copy in 0..2 {
            for (i, &id) in phrase.iter().enumerate() {
                if copy == 1 && i == 0 {
                    // the restart row already offered this token
                    prefix.push(id);
                    continue;
                }
                entries.push(ScenarioEntry {
                    prefix: prefix.clone(),
                    probs: onehot(id),
                });
                prefix.push(id);
            }
            let mut row = vec![0.0; vocab.len()];
            if copy == 0 {
                row[eot as usize] = h.stop;
                row[phrase[0] as usize] = h.restart;
            } else {
                row[eot as usize] = 1.0;
            }
            entries.push(ScenarioEntry {
                prefix: prefix.clone(),
                probs: row,
            });
        }
        let scenario = AcousticScenario::new(sample_id.clone(), "vocab.json", entries, tail_row(&vocab, 0.9))?;
        let text = vocab.decode_text(&phrase)?;
        // the LM has seen the phrase both once and doubled
        suite.corpus.push(text.clone());
        suite.corpus.push(format!("{text} {text}"));
        let path = format!("scenarios/{sample_id}.json");
        suite.references.push(TextEntry {
            sample_id: sample_id.clone(),
            text,
        });
        suite.config.scenarios.push(ScenarioRef {
            sample_id: sample_id.clone(),
            path: path.clone(),
        });
        suite.inputs.push(DecodeInput {
            sample_id,
            scenario_ref: path,
            scenario,
        });
    }
    Ok(suite)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let a = noisy_channel(3).unwrap();
        let b = noisy_channel(3).unwrap();
        assert_eq!(a.corpus, b.corpus);
        assert_eq!(a.references, b.references);
        for (x, y) in a.inputs.iter().zip(&b.inputs) {
            assert_eq!(x.scenario.to_json(), y.scenario.to_json());
        }
        let c = noisy_channel(4).unwrap();
        assert_ne!(a.references, c.references);
    }

    #[test]
    fn suites_are_well_formed() {
        for suite in [
            noisy_channel(0).unwrap(),
            eot_continuation(0).unwrap(),
            hallucination(0).unwrap(),
        ] {
            suite.config.validate().unwrap();
            assert_eq!(suite.inputs.len(), suite.references.len());
            assert_eq!(suite.inputs.len(), suite.config.scenarios.len());
            for (input, r) in suite.inputs.iter().zip(&suite.references) {
                assert_eq!(input.sample_id, r.sample_id);
                assert!(suite.vocab.encode(&r.text).is_ok());
            }
        }
        assert_eq!(noisy_channel(0).unwrap().len(), 100);
        assert_eq!(hallucination(0).unwrap().len(), 50);
    }
}
