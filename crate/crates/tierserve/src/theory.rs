//! Closed-form predictors for the recursive policy under idealized
//! assumptions: i.i.d. continuous confidence scores, a warm history window,
//! length-independent confidence, and tier-invariant output lengths. Under
//! those assumptions each non-top tier offloads with probability beta.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TheoryError {
    #[error("beta {0} outside (0, 1)")]
    BetaOutOfRange(f64),
    #[error("tier count {0} below 2")]
    TooFewTiers(usize),
    #[error("mean payload {0} must be positive")]
    NonPositivePayload(f64),
    #[error("costs must be strictly increasing and positive")]
    NonMonotoneCosts,
}

/// Inputs shared by the communication and computation predictors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryInputs {
    pub beta: f64,
    /// Mean of input-plus-output size E[|x| + |y|], bytes.
    pub mean_payload: f64,
    /// Per-tier inference costs, strictly increasing, length n.
    pub costs: Vec<f64>,
}

impl TheoryInputs {
    pub fn new(beta: f64, mean_payload: f64, costs: Vec<f64>) -> Result<Self, TheoryError> {
        check_beta(beta)?;
        if costs.len() < 2 {
            return Err(TheoryError::TooFewTiers(costs.len()));
        }
        if mean_payload <= 0.0 {
            return Err(TheoryError::NonPositivePayload(mean_payload));
        }
        check_costs(&costs)?;
        Ok(TheoryInputs {
            beta,
            mean_payload,
            costs,
        })
    }

    pub fn n(&self) -> usize {
        self.costs.len()
    }
}

fn check_beta(beta: f64) -> Result<(), TheoryError> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(TheoryError::BetaOutOfRange(beta));
    }
    Ok(())
}

fn check_costs(costs: &[f64]) -> Result<(), TheoryError> {
    let mut prev = 0.0;
    for &c in costs {
        if !c.is_finite() || c <= prev {
            return Err(TheoryError::NonMonotoneCosts);
        }
        prev = c;
    }
    Ok(())
}

/// Probability of a task completing at each tier:
/// [1-b, b(1-b), ..., b^(n-2)(1-b), b^(n-1)]. Sums to 1.
pub fn completion_probs(beta: f64, n: usize) -> Result<Vec<f64>, TheoryError> {
    check_beta(beta)?;
    if n < 2 {
        return Err(TheoryError::TooFewTiers(n));
    }
    let mut probs = Vec::with_capacity(n);
    for i in 1..n {
        probs.push(beta.powi(i as i32 - 1) * (1.0 - beta));
    }
    probs.push(beta.powi(n as i32 - 1));
    Ok(probs)
}

/// Expected total communication burden per task, bytes:
/// 2 * payload * [sum_{i=2}^{n-1} (i-1) b^(i-1) (1-b) + (n-1) b^(n-1)].
pub fn expected_comm(inputs: &TheoryInputs) -> f64 {
    let n = inputs.n();
    let beta = inputs.beta;
    let mut hops = 0.0;
    for i in 2..n {
        hops += (i - 1) as f64 * beta.powi(i as i32 - 1) * (1.0 - beta);
    }
    hops += (n - 1) as f64 * beta.powi(n as i32 - 1);
    2.0 * inputs.mean_payload * hops
}

/// Expected communication of cloud-direct serving: 2 * E[|x| + |y|].
pub fn cloudserve_comm(mean_payload: f64) -> f64 {
    2.0 * mean_payload
}

/// Three-tier burden ratio against cloud-direct serving: beta * (1 + beta).
pub fn comm_ratio(beta: f64) -> Result<f64, TheoryError> {
    check_beta(beta)?;
    Ok(beta * (1.0 + beta))
}

/// Largest beta for which three-tier recursive serving beats cloud-direct
/// on communication: (sqrt(5) - 1) / 2.
pub fn comm_beta_bound() -> f64 {
    (5.0f64.sqrt() - 1.0) / 2.0
}

/// Expected computation cost per task:
/// (1-b) C_1 + sum_{i=2}^{n-1} b^(i-1)(1-b) sum_{j<=i} C_j + b^(n-1) sum_j C_j.
///
/// For n = 3 this reduces to C_1 + b C_2 + b^2 C_3.
pub fn expected_comp(inputs: &TheoryInputs) -> f64 {
    let n = inputs.n();
    let beta = inputs.beta;
    let mut prefix = inputs.costs[0];
    let mut total = (1.0 - beta) * prefix;
    for i in 2..n {
        prefix += inputs.costs[i - 1];
        total += beta.powi(i as i32 - 1) * (1.0 - beta) * prefix;
    }
    prefix += inputs.costs[n - 1];
    total += beta.powi(n as i32 - 1) * prefix;
    total
}

/// Largest beta for which three-tier recursive serving beats cloud-direct on
/// computation, for costs (device, edge, cloud):
/// (-C_e + sqrt(C_e^2 + 4 C_c (C_c - C_d))) / (2 C_c).
pub fn comp_beta_bound(costs: [f64; 3]) -> Result<f64, TheoryError> {
    check_costs(&costs)?;
    let [device, edge, cloud] = costs;
    Ok((-edge + (edge * edge + 4.0 * cloud * (cloud - device)).sqrt()) / (2.0 * cloud))
}
