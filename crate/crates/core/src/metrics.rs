//! Word error rate, perplexity and rank correlation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scorer::{NGramLm, Scorer};
use crate::vocab::TokenId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WerBreakdown {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub ref_words: usize,
    pub wer: f64,
}

impl WerBreakdown {
    pub fn errors(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }
}

/// Word-level edit distance between whitespace-split `reference` and
/// `hypothesis`, decomposed into substitutions, deletions and insertions.
///
/// When several alignments share the minimum cost, the backtrace prefers
/// substitution, then insertion, then deletion.
pub fn wer(reference: &str, hypothesis: &str) -> Result<WerBreakdown> {
    let r: Vec<&str> = reference.split_whitespace().collect();
    let h: Vec<&str> = hypothesis.split_whitespace().collect();
    if r.is_empty() {
        return Err(Error::EmptyReference);
    }
    let (n, m) = (r.len(), h.len());
    let w = m + 1;
    let mut d = vec![0usize; (n + 1) * w];
    for i in 0..=n {
        d[i * w] = i;
    }
    for (j, cell) in d[..w].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub = d[(i - 1) * w + j - 1] + usize::from(r[i - 1] != h[j - 1]);
            let ins = d[i * w + j - 1] + 1;
            let del = d[(i - 1) * w + j] + 1;
            d[i * w + j] = sub.min(ins).min(del);
        }
    }

    let (mut s, mut del, mut ins) = (0, 0, 0);
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = d[i * w + j];
        if i > 0 && j > 0 {
            let mismatch = usize::from(r[i - 1] != h[j - 1]);
            if d[(i - 1) * w + j - 1] + mismatch == here {
                s += mismatch;
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if j > 0 && d[i * w + j - 1] + 1 == here {
            ins += 1;
            j -= 1;
        } else {
            del += 1;
            i -= 1;
        }
    }
    Ok(WerBreakdown {
        substitutions: s,
        deletions: del,
        insertions: ins,
        ref_words: n,
        wer: (s + del + ins) as f64 / n as f64,
    })
}

/// Corpus-level WER: total errors over total reference words.
pub fn corpus_wer<'a>(items: impl IntoIterator<Item = &'a WerBreakdown>) -> f64 {
    let (errors, words) = items
        .into_iter()
        .fold((0usize, 0usize), |(e, w), b| (e + b.errors(), w + b.ref_words));
    if words == 0 {
        0.0
    } else {
        errors as f64 / words as f64
    }
}

/// `exp(-mean log P)` over every token of every sequence. With
/// `include_eot`, each sequence also scores its EOT and the EOT counts as
/// a token.
///
/// Returns `f64::INFINITY` if any token is impossible.
pub fn perplexity<S: Scorer + ?Sized>(
    lm: &S,
    corpus: &[Vec<TokenId>],
    eot_id: TokenId,
    include_eot: bool,
) -> Result<f64> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for seq in corpus {
        if seq.is_empty() {
            return Err(Error::EmptyInput("perplexity sequence"));
        }
        let mut state = lm.initial_state();
        let tail = include_eot.then_some(eot_id);
        for &t in seq.iter().chain(tail.iter()) {
            let lp = lm.score(&state).get(t).ok_or(Error::InvalidTokenId {
                id: t,
                size: lm.vocab_size(),
            })?;
            if lp == f64::NEG_INFINITY {
                return Ok(f64::INFINITY);
            }
            total += lp;
            count += 1;
            state = lm.advance(&state, t)?;
        }
    }
    Ok((-total / count as f64).exp())
}

impl NGramLm {
    /// Perplexity that scores EOT exactly when the model was trained with it.
    pub fn perplexity(&self, corpus: &[Vec<TokenId>]) -> Result<f64> {
        perplexity(self, corpus, self.eot_id(), self.append_eot())
    }
}

/// Fractional ranks (1-based); tied values share their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation (Pearson correlation of average ranks).
/// Returns `None` for fewer than two points or a constant input.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}
