//! Task-specific confidence scoring from raw model evidence.
//!
//! Seq2Class confidence is the maximum softmax probability of the class
//! logits; Seq2Seq confidence is normalized perplexity, 1/(1+PPL), where PPL
//! is the exponentiated mean negative log-likelihood of the emitted tokens.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{Evidence, TaskType, TierEvidence};

/// A validated confidence score in (0, 1].
///
/// Seq2Seq-derived scores are additionally bounded above by 0.5 because
/// perplexity is at least 1.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConfidenceScore(f64);

impl ConfidenceScore {
    pub fn new(value: f64) -> Result<Self, ConfidenceError> {
        if !value.is_finite() || value <= 0.0 || value > 1.0 {
            return Err(ConfidenceError::OutOfRange(value));
        }
        Ok(ConfidenceScore(value))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfidenceError {
    #[error("logits vector is empty")]
    EmptyLogits,
    #[error("logit at index {0} is not finite")]
    NonFiniteLogit(usize),
    #[error("token log-probability sequence is empty")]
    EmptySequence,
    #[error("token log-probability at index {0} is positive")]
    PositiveLogProb(usize),
    #[error("token log-probability at index {0} is not finite")]
    NonFiniteLogProb(usize),
    #[error("evidence variant does not match task type")]
    EvidenceTypeMismatch,
    #[error("confidence {0} outside (0, 1]")]
    OutOfRange(f64),
}

/// Softmax with max-subtraction. Stable for arbitrarily large logits.
fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Maximum softmax probability of the class logits.
///
/// Result lies in [1/C, 1] for C classes.
pub fn seq2class_confidence(logits: &[f64]) -> Result<ConfidenceScore, ConfidenceError> {
    if logits.is_empty() {
        return Err(ConfidenceError::EmptyLogits);
    }
    if let Some(idx) = logits.iter().position(|z| !z.is_finite()) {
        return Err(ConfidenceError::NonFiniteLogit(idx));
    }
    let probs = softmax(logits);
    let max_prob = probs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    ConfidenceScore::new(max_prob)
}

/// Perplexity of a token sequence: exp of the mean negative log-likelihood.
///
/// Always >= 1 for valid log-probabilities.
pub fn seq2seq_perplexity(token_logprobs: &[f64]) -> Result<f64, ConfidenceError> {
    if token_logprobs.is_empty() {
        return Err(ConfidenceError::EmptySequence);
    }
    for (idx, &lp) in token_logprobs.iter().enumerate() {
        if !lp.is_finite() {
            return Err(ConfidenceError::NonFiniteLogProb(idx));
        }
        if lp > 0.0 {
            return Err(ConfidenceError::PositiveLogProb(idx));
        }
    }
    let mean: f64 = token_logprobs.iter().sum::<f64>() / token_logprobs.len() as f64;
    Ok((-mean).exp())
}

/// Perplexity normalized into a confidence score: 1/(1+PPL), in (0, 0.5].
pub fn seq2seq_confidence(token_logprobs: &[f64]) -> Result<ConfidenceScore, ConfidenceError> {
    let ppl = seq2seq_perplexity(token_logprobs)?;
    ConfidenceScore::new(1.0 / (1.0 + ppl))
}

/// Score a tier's evidence for the given task type.
///
/// Precomputed confidence passes through unchanged for either task type;
/// logits require Seq2Class and token log-probabilities require Seq2Seq.
pub fn score(
    evidence: &TierEvidence,
    task_type: TaskType,
) -> Result<ConfidenceScore, ConfidenceError> {
    match (&evidence.evidence, task_type) {
        (Evidence::Confidence(c), _) => ConfidenceScore::new(*c),
        (Evidence::Logits(logits), TaskType::Seq2Class) => seq2class_confidence(logits),
        (Evidence::TokenLogProbs(lps), TaskType::Seq2Seq) => seq2seq_confidence(lps),
        _ => Err(ConfidenceError::EvidenceTypeMismatch),
    }
}
