//! Shared domain types: tasks, per-tier evidence, and the tier topology.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netsim::AvailabilityModel;

/// The two task categories served by the tier hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TaskType {
    #[serde(rename = "seq2class")]
    Seq2Class,
    #[serde(rename = "seq2seq")]
    Seq2Seq,
}

impl std::fmt::Display for TaskType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TaskType::Seq2Class => write!(f, "seq2class"),
            TaskType::Seq2Seq => write!(f, "seq2seq"),
        }
    }
}

/// Model evidence recorded for one tier of a task.
///
/// Exactly one variant is present per tier: either a precomputed confidence
/// score, raw class logits (Seq2Class), or natural-log token probabilities of
/// the emitted sequence (Seq2Seq).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Evidence {
    #[serde(rename = "confidence")]
    Confidence(f64),
    #[serde(rename = "logits")]
    Logits(Vec<f64>),
    #[serde(rename = "token_logprobs")]
    TokenLogProbs(Vec<f64>),
}

/// One tier's prediction record for a task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierEvidence {
    /// Tier index, 1-based (1 = end device, n = cloud).
    pub tier: u32,
    pub evidence: Evidence,
    /// Serialized size of this tier's prediction, in bytes.
    pub output_len: u64,
    /// Quality of this tier's prediction in [0, 1] (1/0 correctness for
    /// Seq2Class, a match score for Seq2Seq).
    pub quality: f64,
}

/// One inference request, with the evidence every tier would produce for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub task_id: String,
    pub task_type: TaskType,
    /// Input size in bytes; the same input is forwarded to every tier.
    pub input_len: u64,
    /// Evidence for tiers 1..n, ascending, one entry per tier.
    pub tier_evidence: Vec<TierEvidence>,
}

impl Task {
    /// Number of tiers this task carries evidence for.
    pub fn tier_count(&self) -> usize {
        self.tier_evidence.len()
    }

    /// Evidence for a 1-based tier index.
    pub fn evidence_for(&self, tier: u32) -> Option<&TierEvidence> {
        self.tier_evidence.get(tier as usize - 1)
    }

    /// Check the structural invariants: tiers 1..n ascending with no gaps,
    /// non-empty evidence vectors, quality in [0, 1], confidence in (0, 1].
    pub fn validate(&self) -> Result<(), TaskError> {
        if self.tier_evidence.is_empty() {
            return Err(TaskError::NoTierEvidence {
                task_id: self.task_id.clone(),
            });
        }
        for (idx, te) in self.tier_evidence.iter().enumerate() {
            if te.tier as usize != idx + 1 {
                return Err(TaskError::BadTierIndex {
                    task_id: self.task_id.clone(),
                    expected: idx as u32 + 1,
                    found: te.tier,
                });
            }
            match &te.evidence {
                Evidence::Confidence(c) => {
                    if !c.is_finite() || *c <= 0.0 || *c > 1.0 {
                        return Err(TaskError::BadConfidence {
                            task_id: self.task_id.clone(),
                            tier: te.tier,
                            value: *c,
                        });
                    }
                }
                Evidence::Logits(v) => {
                    if v.is_empty() {
                        return Err(TaskError::EmptyEvidence {
                            task_id: self.task_id.clone(),
                            tier: te.tier,
                        });
                    }
                }
                Evidence::TokenLogProbs(v) => {
                    if v.is_empty() {
                        return Err(TaskError::EmptyEvidence {
                            task_id: self.task_id.clone(),
                            tier: te.tier,
                        });
                    }
                }
            }
            if !te.quality.is_finite() || te.quality < 0.0 || te.quality > 1.0 {
                return Err(TaskError::BadQuality {
                    task_id: self.task_id.clone(),
                    tier: te.tier,
                    value: te.quality,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TaskError {
    #[error("task {task_id}: no tier evidence")]
    NoTierEvidence { task_id: String },
    #[error("task {task_id}: expected tier {expected}, found {found}")]
    BadTierIndex {
        task_id: String,
        expected: u32,
        found: u32,
    },
    #[error("task {task_id}: tier {tier} has empty evidence vector")]
    EmptyEvidence { task_id: String, tier: u32 },
    #[error("task {task_id}: tier {tier} confidence {value} outside (0, 1]")]
    BadConfidence {
        task_id: String,
        tier: u32,
        value: f64,
    },
    #[error("task {task_id}: tier {tier} quality {value} outside [0, 1]")]
    BadQuality {
        task_id: String,
        tier: u32,
        value: f64,
    },
}

/// Configuration of one model host in the hierarchy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierNodeConfig {
    /// Tier index, 1-based.
    pub tier: u32,
    /// Abstract inference cost per task on this tier.
    pub compute_cost: f64,
    #[serde(default)]
    pub availability: AvailabilityModel,
}

/// The device-to-cloud hierarchy, ordered by increasing tier index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierTopology {
    pub tiers: Vec<TierNodeConfig>,
}

impl TierTopology {
    /// Convenience constructor for an always-available topology from costs.
    pub fn from_costs(costs: &[f64]) -> Self {
        TierTopology {
            tiers: costs
                .iter()
                .enumerate()
                .map(|(i, &c)| TierNodeConfig {
                    tier: i as u32 + 1,
                    compute_cost: c,
                    availability: AvailabilityModel::AlwaysUp,
                })
                .collect(),
        }
    }

    /// Tier count n.
    pub fn n(&self) -> usize {
        self.tiers.len()
    }

    pub fn compute_cost(&self, tier: u32) -> f64 {
        self.tiers[tier as usize - 1].compute_cost
    }

    pub fn availability(&self, tier: u32) -> &AvailabilityModel {
        &self.tiers[tier as usize - 1].availability
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TopologyError {
    #[error("topology needs at least 2 tiers, got {0}")]
    TooFewTiers(usize),
    #[error("duplicate tier index {0}")]
    DuplicateTier(u32),
    #[error("tier indices must be 1..n ascending; expected {expected}, found {found}")]
    NonContiguousTiers { expected: u32, found: u32 },
    #[error("compute costs must be strictly increasing: cost[{tier}] = {cost} does not exceed the tier below")]
    NonMonotoneCosts { tier: u32, cost: f64 },
}

/// Validate the topology invariants: n >= 2, tier indices 1..n ascending,
/// strictly increasing compute costs.
pub fn validate_topology(topology: TierTopology) -> Result<TierTopology, TopologyError> {
    if topology.tiers.len() < 2 {
        return Err(TopologyError::TooFewTiers(topology.tiers.len()));
    }
    let mut prev_cost = f64::NEG_INFINITY;
    for (idx, node) in topology.tiers.iter().enumerate() {
        let expected = idx as u32 + 1;
        if node.tier != expected {
            if topology.tiers.iter().filter(|t| t.tier == node.tier).count() > 1 {
                return Err(TopologyError::DuplicateTier(node.tier));
            }
            return Err(TopologyError::NonContiguousTiers {
                expected,
                found: node.tier,
            });
        }
        if node.compute_cost <= prev_cost {
            return Err(TopologyError::NonMonotoneCosts {
                tier: node.tier,
                cost: node.compute_cost,
            });
        }
        prev_cost = node.compute_cost;
    }
    Ok(topology)
}
