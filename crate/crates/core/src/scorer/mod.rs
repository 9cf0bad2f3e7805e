//! Incremental scorer contract shared by the acoustic model stand-in and
//! the language model.
//!
//! A scorer hands out an initial state for the BOS-only context. Querying a
//! state with [`Scorer::score`] never changes it; [`Scorer::advance`]
//! returns a new state for the extended prefix and leaves the old one
//! untouched, so a state can be cloned and the copies evolve independently.
//! Advancing a state token by token must answer exactly like a fresh state
//! fed the whole prefix.

mod ngram;
mod table;
mod uniform;

use std::borrow::Cow;

pub use ngram::{train_ngram, NGramLm, NGramState};
pub use table::{AcousticScenario, ScenarioEntry, TableState};
pub use uniform::UniformScorer;

use crate::error::Result;
use crate::logprob::LogProbVector;
use crate::vocab::TokenId;

pub trait Scorer: Sync {
    type State: Clone + Send;

    fn vocab_size(&self) -> usize;

    /// State for the empty prefix (BOS context).
    fn initial_state(&self) -> Self::State;

    /// Next-token log distribution for the state's prefix.
    fn score<'a>(&'a self, state: &Self::State) -> Cow<'a, LogProbVector>;

    fn advance(&self, state: &Self::State, token: TokenId) -> Result<Self::State>;

    /// Feeds a whole prefix to a fresh state.
    fn state_for(&self, prefix: &[TokenId]) -> Result<Self::State> {
        prefix
            .iter()
            .try_fold(self.initial_state(), |s, &t| self.advance(&s, t))
    }
}

impl<S: Scorer + ?Sized> Scorer for &S {
    type State = S::State;

    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }

    fn initial_state(&self) -> Self::State {
        (**self).initial_state()
    }

    fn score<'a>(&'a self, state: &Self::State) -> Cow<'a, LogProbVector> {
        (**self).score(state)
    }

    fn advance(&self, state: &Self::State, token: TokenId) -> Result<Self::State> {
        (**self).advance(state, token)
    }
}

pub(crate) fn check_token(token: TokenId, size: usize) -> Result<()> {
    if (token as usize) < size {
        Ok(())
    } else {
        Err(crate::error::Error::InvalidTokenId { id: token, size })
    }
}
