//! Autoregressive beam search over an acoustic scorer fused with a
//! language scorer.
//!
//! Pruning inside the search compares raw summed log probabilities (SLP).
//! Once the search stops, every finished candidate is penalized
//! (truncation and/or cyclic repetition, as configured) and the winner is
//! the candidate with the highest penalized SLP divided by its token
//! count (ALP).

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{eot_gate_fires, fuse_step, FusionConfig};
use crate::logprob::LogProbVector;
use crate::penalty::{apply_cycle_penalty, apply_truncation_penalty, detect_max_cycle, CycleReport};
use crate::scorer::Scorer;
use crate::vocab::{TokenId, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamConfig {
    pub beam_size: usize,
    pub max_tokens: usize,
    pub fusion: FusionConfig,
    /// Cyclic-repetition penalty.
    pub hallucination_penalty_enabled: bool,
    /// Penalty for decodes cut off at `max_tokens`.
    pub truncation_penalty_enabled: bool,
}

impl Default for BeamConfig {
    fn default() -> Self {
        Self {
            beam_size: 5,
            max_tokens: 64,
            fusion: FusionConfig::default(),
            hallucination_penalty_enabled: true,
            truncation_penalty_enabled: true,
        }
    }
}

impl BeamConfig {
    pub fn validate(&self) -> Result<()> {
        if self.beam_size == 0 {
            return Err(Error::InvalidConfig("beam_size must be at least 1".into()));
        }
        if self.max_tokens == 0 {
            return Err(Error::InvalidConfig("max_tokens must be at least 1".into()));
        }
        self.fusion.validate()
    }
}

/// A beam candidate. `tokens` excludes BOS and ends with EOT when the
/// hypothesis finished normally.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub tokens: Vec<TokenId>,
    pub slp: f64,
    pub finished: bool,
    pub truncated: bool,
}

impl Hypothesis {
    /// Tokens with a trailing EOT removed.
    pub fn content_tokens(&self, eot_id: TokenId) -> &[TokenId] {
        match self.tokens.split_last() {
            Some((&last, rest)) if last == eot_id => rest,
            _ => &self.tokens,
        }
    }
}

/// A finished hypothesis with its final-ranking scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    #[serde(flatten)]
    pub hypothesis: Hypothesis,
    pub raw_slp: f64,
    pub penalized_slp: f64,
    pub alp: f64,
    #[serde(flatten)]
    pub cycle: CycleReport,
}

impl Candidate {
    pub fn n_tokens(&self) -> usize {
        self.hypothesis.tokens.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeResult {
    pub text: String,
    pub alp: f64,
    pub best: Hypothesis,
    pub best_index: usize,
    pub candidates: Vec<Candidate>,
}

impl DecodeResult {
    pub fn best_candidate(&self) -> &Candidate {
        &self.candidates[self.best_index]
    }
}

/// What the search saw when expanding one live hypothesis.
#[derive(Debug)]
pub struct StepTrace<'a> {
    pub prefix: &'a [TokenId],
    pub acoustic: &'a LogProbVector,
    pub lm: &'a LogProbVector,
    pub fused: &'a LogProbVector,
    pub gated: bool,
}

struct Live<A, L> {
    tokens: Vec<TokenId>,
    slp: f64,
    acoustic: A,
    lm: L,
}

/// Higher score first, then shorter, then lexicographically smaller.
fn rank(a_score: f64, a_tokens: &[TokenId], b_score: f64, b_tokens: &[TokenId]) -> Ordering {
    b_score
        .total_cmp(&a_score)
        .then(a_tokens.len().cmp(&b_tokens.len()))
        .then_with(|| a_tokens.cmp(b_tokens))
}

pub fn beam_search<A, L>(acoustic: &A, lm: &L, vocab: &Vocabulary, config: &BeamConfig) -> Result<DecodeResult>
where
    A: Scorer + ?Sized,
    L: Scorer + ?Sized,
{
    beam_search_traced(acoustic, lm, vocab, config, &mut |_| {})
}

/// [`beam_search`] that reports every expansion step to `observer`.
pub fn beam_search_traced<A, L>(
    acoustic: &A,
    lm: &L,
    vocab: &Vocabulary,
    config: &BeamConfig,
    observer: &mut dyn FnMut(&StepTrace<'_>),
) -> Result<DecodeResult>
where
    A: Scorer + ?Sized,
    L: Scorer + ?Sized,
{
    config.validate()?;
    if vocab.is_empty() {
        return Err(Error::InvalidVocabulary("empty vocabulary".into()));
    }
    for (name, size) in [("acoustic", acoustic.vocab_size()), ("language", lm.vocab_size())] {
        if size != vocab.len() {
            return Err(Error::VocabMismatch {
                scorer: name,
                vocab: vocab.len(),
                actual: size,
            });
        }
    }
    let eot = vocab.eot_id();
    let bos = vocab.bos_id();
    let beam = config.beam_size;

    let mut live = vec![Live {
        tokens: Vec::new(),
        slp: 0.0,
        acoustic: acoustic.initial_state(),
        lm: lm.initial_state(),
    }];
    let mut finished: Vec<Hypothesis> = Vec::new();

    for _step in 0..config.max_tokens {
        // (score, parent, token)
        let mut expansions: Vec<(f64, usize, TokenId)> = Vec::with_capacity(live.len() * vocab.len());
        for (parent, hyp) in live.iter().enumerate() {
            let a = acoustic.score(&hyp.acoustic);
            let l = lm.score(&hyp.lm);
            let fused = fuse_step(&a, &l, &config.fusion, eot)?;
            observer(&StepTrace {
                prefix: &hyp.tokens,
                acoustic: &a,
                lm: &l,
                fused: &fused,
                gated: config.fusion.eot_gate_enabled && eot_gate_fires(&a, eot),
            });
            for (y, &s) in fused.values().iter().enumerate() {
                let y = y as TokenId;
                if y == bos || s == f64::NEG_INFINITY {
                    continue;
                }
                expansions.push((hyp.slp + s, parent, y));
            }
        }
        // every live hypothesis has the same length, so the length key is moot here
        expansions.sort_by(|a, b| {
            b.0.total_cmp(&a.0)
                .then_with(|| live[a.1].tokens.cmp(&live[b.1].tokens))
                .then(a.2.cmp(&b.2))
        });

        let mut next = Vec::with_capacity(beam);
        let mut newly_finished = Vec::new();
        for (score, parent, token) in expansions {
            let p = &live[parent];
            let mut tokens = Vec::with_capacity(p.tokens.len() + 1);
            tokens.extend_from_slice(&p.tokens);
            tokens.push(token);
            if token == eot {
                newly_finished.push(Hypothesis {
                    tokens,
                    slp: score,
                    finished: true,
                    truncated: false,
                });
            } else {
                next.push(Live {
                    tokens,
                    slp: score,
                    acoustic: acoustic.advance(&p.acoustic, token)?,
                    lm: lm.advance(&p.lm, token)?,
                });
                if next.len() == beam {
                    break;
                }
            }
        }
        for hyp in newly_finished {
            if finished.len() >= beam {
                break;
            }
            finished.push(hyp);
        }
        live = next;
        if finished.len() >= beam || live.is_empty() {
            break;
        }
    }

    // Live hypotheses left over have hit the token limit.
    for hyp in live {
        if finished.len() >= beam || hyp.tokens.len() < config.max_tokens {
            break;
        }
        finished.push(Hypothesis {
            tokens: hyp.tokens,
            slp: hyp.slp,
            finished: true,
            truncated: true,
        });
    }

    if finished.is_empty() {
        return Err(Error::NoHypothesis);
    }
    let candidates: Vec<Candidate> = finished.into_iter().map(|h| score_candidate(h, eot, config)).collect();
    let best_index = select_best(&candidates);
    let best = candidates[best_index].hypothesis.clone();
    Ok(DecodeResult {
        text: vocab.decode_text(&best.tokens)?,
        alp: candidates[best_index].alp,
        best,
        best_index,
        candidates,
    })
}

/// Applies the enabled penalties to a finished hypothesis.
pub fn score_candidate(hypothesis: Hypothesis, eot_id: TokenId, config: &BeamConfig) -> Candidate {
    let n = hypothesis.tokens.len();
    let cycle = detect_max_cycle(hypothesis.content_tokens(eot_id));
    let raw = hypothesis.slp;
    let mut penalized = raw;
    if config.truncation_penalty_enabled {
        penalized = apply_truncation_penalty(penalized, n, hypothesis.truncated);
    }
    if config.hallucination_penalty_enabled {
        penalized = apply_cycle_penalty(penalized, &cycle);
    }
    Candidate {
        hypothesis,
        raw_slp: raw,
        penalized_slp: penalized,
        alp: penalized / n as f64,
        cycle,
    }
}

/// Index of the candidate with the highest ALP; ties go to the higher
/// penalized SLP, then the shorter, then the lexicographically smaller
/// sequence.
pub fn select_best(candidates: &[Candidate]) -> usize {
    let mut best = 0;
    for (i, c) in candidates.iter().enumerate().skip(1) {
        let b = &candidates[best];
        let ord = c.alp.total_cmp(&b.alp).reverse().then_with(|| {
            rank(
                c.penalized_slp,
                &c.hypothesis.tokens,
                b.penalized_slp,
                &b.hypothesis.tokens,
            )
        });
        if ord == Ordering::Less {
            best = i;
        }
    }
    best
}
