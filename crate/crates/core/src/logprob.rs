use std::ops::Index;

use crate::error::{Error, Result};
use crate::vocab::TokenId;

/// Tolerance on the exp-sum of a normalized vector.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// Per-token natural-log probabilities (or scores) over a vocabulary.
///
/// Entries are `<= 0`; impossible tokens hold `f64::NEG_INFINITY`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogProbVector(Vec<f64>);

impl LogProbVector {
    /// Wraps raw log values, rejecting NaN and positive entries.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| v.is_nan() || **v > 0.0) {
            return Err(Error::InvalidLogProbs(format!("entry {bad} is not a log probability")));
        }
        Ok(Self(values))
    }

    /// Wraps raw log values and requires them to form a distribution.
    pub fn normalized(values: Vec<f64>) -> Result<Self> {
        let v = Self::new(values)?;
        v.check_normalized()?;
        Ok(v)
    }

    /// Takes the log of each probability; zero maps to negative infinity.
    pub fn from_probs(probs: &[f64]) -> Result<Self> {
        if let Some(bad) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidLogProbs(format!("probability {bad} outside [0, 1]")));
        }
        Self::normalized(probs.iter().map(|p| p.ln()).collect())
    }

    pub fn uniform(size: usize) -> Self {
        Self(vec![-(size as f64).ln(); size])
    }

    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn exp_sum(&self) -> f64 {
        self.0.iter().map(|v| v.exp()).sum()
    }

    pub fn check_normalized(&self) -> Result<()> {
        let sum = self.exp_sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::NotNormalized { sum });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, id: TokenId) -> Option<f64> {
        self.0.get(id as usize).copied()
    }

    /// Index of the largest entry; ties resolve to the lowest id. Returns
    /// `None` if every entry is impossible.
    pub fn argmax(&self) -> Option<TokenId> {
        let mut best: Option<(usize, f64)> = None;
        for (i, &v) in self.0.iter().enumerate() {
            if v == f64::NEG_INFINITY {
                continue;
            }
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
        best.map(|(i, _)| i as TokenId)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl Index<TokenId> for LogProbVector {
    type Output = f64;

    fn index(&self, id: TokenId) -> &f64 {
        &self.0[id as usize]
    }
}
