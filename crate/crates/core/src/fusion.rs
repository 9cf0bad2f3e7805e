//! Shallow fusion of acoustic and language-model log probabilities with
//! the EOT gate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logprob::LogProbVector;
use crate::vocab::TokenId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    /// Language-model weight; 0 disables fusion.
    pub lambda_gpt: f64,
    /// Drop the LM for any step whose acoustic argmax is EOT.
    pub eot_gate_enabled: bool,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            lambda_gpt: 0.3,
            eot_gate_enabled: true,
        }
    }
}

impl FusionConfig {
    pub fn new(lambda_gpt: f64, eot_gate_enabled: bool) -> Result<Self> {
        let cfg = Self {
            lambda_gpt,
            eot_gate_enabled,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_gpt >= 0.0 && self.lambda_gpt.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "lambda_gpt must be a finite value >= 0, got {}",
                self.lambda_gpt
            )));
        }
        Ok(())
    }
}

/// True when EOT attains the maximum of `acoustic`, ties included.
pub fn eot_gate_fires(acoustic: &LogProbVector, eot_id: TokenId) -> bool {
    match acoustic.get(eot_id) {
        Some(eot) if eot != f64::NEG_INFINITY => acoustic.values().iter().all(|&v| v <= eot),
        _ => false,
    }
}

/// Combines one step's acoustic and LM vectors:
/// `(acoustic[y] + λ lm[y]) / (1 + λ)` for every token `y`.
///
/// When the gate is enabled and the acoustic model's most probable token is
/// EOT, λ is zero for the whole step and the acoustic vector is returned
/// unchanged. The result is a score vector and is not renormalized.
pub fn fuse_step(
    acoustic: &LogProbVector,
    lm: &LogProbVector,
    config: &FusionConfig,
    eot_id: TokenId,
) -> Result<LogProbVector> {
    if acoustic.len() != lm.len() {
        return Err(Error::LengthMismatch {
            expected: acoustic.len(),
            actual: lm.len(),
        });
    }
    let lambda = config.lambda_gpt;
    if lambda == 0.0 || (config.eot_gate_enabled && eot_gate_fires(acoustic, eot_id)) {
        return Ok(acoustic.clone());
    }
    let scale = 1.0 + lambda;
    let fused = acoustic
        .values()
        .iter()
        .zip(lm.values())
        .map(|(&a, &l)| (a + lambda * l) / scale)
        .collect();
    Ok(LogProbVector::from_vec_unchecked(fused))
}
