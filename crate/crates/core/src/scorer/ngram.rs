use std::borrow::Cow;
use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{check_token, Scorer};
use crate::error::{Error, Result};
use crate::logprob::LogProbVector;
use crate::vocab::{TokenId, Vocabulary};

/// Add-k smoothed n-gram language model.
///
/// `P(y | ctx) = (count(ctx y) + k) / (count(ctx *) + k |V|)`, where `ctx` is
/// the last `order - 1` tokens of the BOS-padded history.
#[derive(Debug, Clone, PartialEq)]
pub struct NGramLm {
    order: usize,
    k: f64,
    vocab_size: usize,
    bos_id: TokenId,
    eot_id: TokenId,
    append_eot: bool,
    counts: BTreeMap<Vec<TokenId>, BTreeMap<TokenId, u64>>,
    totals: HashMap<Vec<TokenId>, u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NGramState {
    context: Vec<TokenId>,
}

impl NGramState {
    pub fn context(&self) -> &[TokenId] {
        &self.context
    }
}

#[derive(Serialize, Deserialize)]
struct CountRow {
    context: Vec<TokenId>,
    next: Vec<(TokenId, u64)>,
}

#[derive(Serialize, Deserialize)]
struct LmFile {
    order: usize,
    k: f64,
    vocab_size: usize,
    bos: TokenId,
    eot: TokenId,
    append_eot: bool,
    counts: Vec<CountRow>,
}

/// Counts n-grams over `corpus`. With `append_eot`, every sequence is
/// terminated by EOT so the model learns where sentences end.
pub fn train_ngram(
    corpus: &[Vec<TokenId>],
    vocab: &Vocabulary,
    order: usize,
    k: f64,
    append_eot: bool,
) -> Result<NGramLm> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    validate(order, k)?;
    let bos = vocab.bos_id();
    let eot = vocab.eot_id();
    let mut counts: BTreeMap<Vec<TokenId>, BTreeMap<TokenId, u64>> = BTreeMap::new();
    for seq in corpus {
        for &t in seq {
            vocab.check_id(t)?;
        }
        let mut history = vec![bos; order - 1];
        let tail = append_eot.then_some(eot);
        for &t in seq.iter().chain(tail.iter()) {
            let ctx = history[history.len() + 1 - order..].to_vec();
            *counts.entry(ctx).or_default().entry(t).or_default() += 1;
            history.push(t);
        }
    }
    Ok(NGramLm::from_parts(order, k, vocab.len(), bos, eot, append_eot, counts))
}

fn validate(order: usize, k: f64) -> Result<()> {
    if order == 0 {
        return Err(Error::InvalidConfig("n-gram order must be at least 1".into()));
    }
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "smoothing constant must be positive, got {k}"
        )));
    }
    Ok(())
}

impl NGramLm {
    fn from_parts(
        order: usize,
        k: f64,
        vocab_size: usize,
        bos_id: TokenId,
        eot_id: TokenId,
        append_eot: bool,
        counts: BTreeMap<Vec<TokenId>, BTreeMap<TokenId, u64>>,
    ) -> Self {
        let totals = counts
            .iter()
            .map(|(ctx, next)| (ctx.clone(), next.values().sum()))
            .collect();
        Self {
            order,
            k,
            vocab_size,
            bos_id,
            eot_id,
            append_eot,
            counts,
            totals,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn eot_id(&self) -> TokenId {
        self.eot_id
    }

    /// Whether training sequences were terminated with EOT.
    pub fn append_eot(&self) -> bool {
        self.append_eot
    }

    pub fn count(&self, context: &[TokenId], next: TokenId) -> u64 {
        self.counts
            .get(context)
            .and_then(|m| m.get(&next))
            .copied()
            .unwrap_or(0)
    }

    pub fn context_total(&self, context: &[TokenId]) -> u64 {
        self.totals.get(context).copied().unwrap_or(0)
    }

    /// Conditional probability of `next` after `context` (already truncated
    /// to `order - 1` tokens).
    pub fn prob(&self, context: &[TokenId], next: TokenId) -> f64 {
        let denom = self.context_total(context) as f64 + self.k * self.vocab_size as f64;
        (self.count(context, next) as f64 + self.k) / denom
    }

    pub fn distribution(&self, context: &[TokenId]) -> LogProbVector {
        let denom = self.context_total(context) as f64 + self.k * self.vocab_size as f64;
        let next = self.counts.get(context);
        let values = (0..self.vocab_size as TokenId)
            .map(|y| {
                let c = next.and_then(|m| m.get(&y)).copied().unwrap_or(0) as f64;
                ((c + self.k) / denom).ln()
            })
            .collect();
        LogProbVector::from_vec_unchecked(values)
    }

    pub fn to_json(&self) -> String {
        let file = LmFile {
            order: self.order,
            k: self.k,
            vocab_size: self.vocab_size,
            bos: self.bos_id,
            eot: self.eot_id,
            append_eot: self.append_eot,
            counts: self
                .counts
                .iter()
                .map(|(ctx, next)| CountRow {
                    context: ctx.clone(),
                    next: next.iter().map(|(&t, &c)| (t, c)).collect(),
                })
                .collect(),
        };
        serde_json::to_string(&file).expect("lm serializes")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        Self::from_file(serde_json::from_str(json)?)
    }

    fn from_file(file: LmFile) -> Result<Self> {
        validate(file.order, file.k).map_err(|e| Error::InvalidModel(e.to_string()))?;
        for id in [file.bos, file.eot] {
            check_token(id, file.vocab_size)?;
        }
        let mut counts = BTreeMap::new();
        for row in file.counts {
            if row.context.len() != file.order - 1 {
                return Err(Error::InvalidModel(format!(
                    "context {:?} does not match order {}",
                    row.context, file.order
                )));
            }
            for &t in row.context.iter().chain(row.next.iter().map(|(t, _)| t)) {
                check_token(t, file.vocab_size)?;
            }
            counts.insert(row.context, row.next.into_iter().collect());
        }
        Ok(Self::from_parts(
            file.order,
            file.k,
            file.vocab_size,
            file.bos,
            file.eot,
            file.append_eot,
            counts,
        ))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: LmFile = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        Self::from_file(file)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }
}

impl Scorer for NGramLm {
    type State = NGramState;

    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn initial_state(&self) -> NGramState {
        NGramState {
            context: vec![self.bos_id; self.order - 1],
        }
    }

    fn score<'a>(&'a self, state: &NGramState) -> Cow<'a, LogProbVector> {
        Cow::Owned(self.distribution(&state.context))
    }

    fn advance(&self, state: &NGramState, token: TokenId) -> Result<NGramState> {
        check_token(token, self.vocab_size)?;
        if self.order == 1 {
            return Ok(state.clone());
        }
        let mut context = Vec::with_capacity(self.order - 1);
        context.extend_from_slice(&state.context[1..]);
        context.push(token);
        Ok(NGramState { context })
    }
}
