use std::borrow::Cow;

use super::{check_token, Scorer};
use crate::error::Result;
use crate::logprob::LogProbVector;
use crate::vocab::TokenId;

/// Scorer that assigns `-ln |V|` to every token regardless of context.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformScorer {
    dist: LogProbVector,
}

impl UniformScorer {
    pub fn new(vocab_size: usize) -> Self {
        Self {
            dist: LogProbVector::uniform(vocab_size),
        }
    }
}

impl Scorer for UniformScorer {
    type State = ();

    fn vocab_size(&self) -> usize {
        self.dist.len()
    }

    fn initial_state(&self) {}

    fn score<'a>(&'a self, _state: &()) -> Cow<'a, LogProbVector> {
        Cow::Borrowed(&self.dist)
    }

    fn advance(&self, _state: &(), token: TokenId) -> Result<()> {
        check_token(token, self.vocab_size())
    }
}
