//! Hallucination controls: maximal-cycle detection and the two SLP
//! penalties (truncation and cyclic repetition).
//!
//! Both penalties subtract `ln 2` per affected token, i.e. they halve the
//! probability of every token they cover.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::vocab::TokenId;

/// Longest consecutively repeated token block in a sequence.
///
/// `period` is the block length (L) and `repeats` the number of copies
/// beyond the first (C). Both are zero when nothing repeats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CycleReport {
    #[serde(rename = "L")]
    pub period: usize,
    #[serde(rename = "C")]
    pub repeats: usize,
    pub start: usize,
}

impl CycleReport {
    pub fn is_cyclic(&self) -> bool {
        self.period > 0
    }

    /// Number of tokens inside the repeated run.
    pub fn span(&self) -> usize {
        self.period * (self.repeats + 1)
    }
}

/// Finds the repeated block with the largest period; ties go to more
/// repetitions, then to the earliest start.
///
/// Non-primitive periods count: `XXXX` reports period 2 with one repeat.
pub fn detect_max_cycle(tokens: &[TokenId]) -> CycleReport {
    let n = tokens.len();
    // run[s] = length of the match between tokens[s..] and tokens[s + p..]
    let mut run = vec![0usize; n + 1];
    for period in (1..=n / 2).rev() {
        let limit = n - period;
        run[limit] = 0;
        for s in (0..limit).rev() {
            run[s] = if tokens[s] == tokens[s + period] {
                run[s + 1] + 1
            } else {
                0
            };
        }
        let mut best: Option<CycleReport> = None;
        for (s, &matched) in run[..limit].iter().enumerate() {
            let copies = 1 + matched / period;
            if copies >= 2 && best.is_none_or(|b| copies - 1 > b.repeats) {
                best = Some(CycleReport {
                    period,
                    repeats: copies - 1,
                    start: s,
                });
            }
        }
        if let Some(report) = best {
            return report;
        }
    }
    CycleReport::default()
}

/// `slp - L * C * ln 2`.
pub fn apply_cycle_penalty(slp: f64, report: &CycleReport) -> f64 {
    if report.period == 0 || report.repeats == 0 {
        return slp;
    }
    slp - (report.period * report.repeats) as f64 * LN_2
}

/// `slp - N * ln 2` for a decode cut off at the token limit.
pub fn apply_truncation_penalty(slp: f64, n_tokens: usize, truncated: bool) -> f64 {
    if !truncated || n_tokens == 0 {
        return slp;
    }
    slp - n_tokens as f64 * LN_2
}
