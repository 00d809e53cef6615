//! Routing policies: recursive confidence-driven offloading, the
//! unavailability-tolerant variant, and the five comparison baselines.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::confidence::{score, ConfidenceError};
use crate::history::{QueueSet, Threshold, ThresholdConfig};
use crate::types::{Task, TierTopology};

/// A serving method under comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    /// All tasks complete on the end device.
    EndServe,
    /// Every task is sent straight to the edge (tier 2).
    EdgeServe,
    /// Every task is sent straight to the cloud (tier n) over a direct
    /// logical link; intermediate tiers carry no traffic.
    CloudServe,
    /// Quality-independent partial offloading: each non-top tier forwards
    /// with fixed probability alpha; pass-through tiers run no inference.
    ColServe { alpha: f64 },
    /// Cascade with fixed per-tier confidence thresholds, one per non-top
    /// tier.
    CasServe { thresholds: Vec<f64> },
    /// Recursive offloading against the dynamic quantile threshold.
    RecServe {
        #[serde(flatten)]
        cfg: ThresholdConfig,
        #[serde(default)]
        unavailability_tolerant: bool,
    },
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::EndServe => "EndServe",
            Method::EdgeServe => "EdgeServe",
            Method::CloudServe => "CloudServe",
            Method::ColServe { .. } => "ColServe",
            Method::CasServe { .. } => "CasServe",
            Method::RecServe { .. } => "RecServe",
        }
    }

    /// Hyperparameter summary for report rows.
    pub fn param_string(&self) -> String {
        match self {
            Method::EndServe | Method::EdgeServe | Method::CloudServe => String::new(),
            Method::ColServe { alpha } => format!("alpha={alpha}"),
            Method::CasServe { thresholds } => {
                let parts: Vec<String> = thresholds.iter().map(|t| t.to_string()).collect();
                format!("t={}", parts.join("/"))
            }
            Method::RecServe { cfg, .. } => format!("beta={}", cfg.beta),
        }
    }

    pub fn validate(&self, n: usize) -> Result<(), String> {
        match self {
            Method::EndServe | Method::EdgeServe | Method::CloudServe => Ok(()),
            Method::ColServe { alpha } => {
                if !(*alpha > 0.0 && *alpha < 1.0) {
                    return Err(format!("ColServe alpha {alpha} outside (0, 1)"));
                }
                Ok(())
            }
            Method::CasServe { thresholds } => {
                if thresholds.len() != n - 1 {
                    return Err(format!(
                        "CasServe needs {} thresholds for {} tiers, got {}",
                        n - 1,
                        n,
                        thresholds.len()
                    ));
                }
                for t in thresholds {
                    if !(*t > 0.0 && *t < 1.0) {
                        return Err(format!("CasServe threshold {t} outside (0, 1)"));
                    }
                }
                Ok(())
            }
            Method::RecServe { cfg, .. } => cfg.validate(),
        }
    }
}

/// How one task travelled through the hierarchy and what it cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingOutcome {
    /// Tier whose prediction was returned, 1-based.
    pub final_tier: u32,
    pub forward_hops: Vec<(u32, u32)>,
    /// Reverse of the forward path.
    pub return_hops: Vec<(u32, u32)>,
    /// Confidence of every tier that scored its evidence for a decision.
    pub per_tier_confidence: BTreeMap<u32, f64>,
    /// Quality of the final tier's prediction.
    pub quality: f64,
    /// Sum of compute costs over tiers that ran inference.
    pub compute_cost: f64,
    /// Output size of the final tier's prediction, bytes.
    pub output_len: u64,
}

#[derive(Debug, Error, PartialEq)]
pub enum PolicyError {
    #[error("task {task_id}: missing evidence for tier {tier}")]
    MissingTierEvidence { task_id: String, tier: u32 },
    #[error("task {task_id}: {source}")]
    Confidence {
        task_id: String,
        source: ConfidenceError,
    },
}

fn finalize(
    task: &Task,
    topology: &TierTopology,
    final_tier: u32,
    forward_hops: Vec<(u32, u32)>,
    per_tier_confidence: BTreeMap<u32, f64>,
    inference_tiers: &[u32],
) -> Result<RoutingOutcome, PolicyError> {
    let te = task
        .evidence_for(final_tier)
        .ok_or_else(|| PolicyError::MissingTierEvidence {
            task_id: task.task_id.clone(),
            tier: final_tier,
        })?;
    let compute_cost = inference_tiers
        .iter()
        .map(|&t| topology.compute_cost(t))
        .sum();
    let return_hops = forward_hops.iter().rev().map(|&(a, b)| (b, a)).collect();
    Ok(RoutingOutcome {
        final_tier,
        forward_hops,
        return_hops,
        per_tier_confidence,
        quality: te.quality,
        compute_cost,
        output_len: te.output_len,
    })
}

/// Route one task with the recursive dynamic-threshold policy.
///
/// Starting at tier 1, each tier scores its evidence, inserts the score into
/// its (tier, task type) queue, and computes the quantile threshold. The task
/// finalizes at the current tier when the score meets the threshold, the tier
/// is the top, the queue is still cold, or — with `tolerant` — the next tier
/// is down per `availability`; otherwise it offloads one tier up. With
/// `tolerant` false the availability flags are ignored entirely.
///
/// `availability[i]` states whether tier i+1 (1-based) is up for this task.
pub fn route_recserve(
    task: &Task,
    topology: &TierTopology,
    queues: &mut QueueSet,
    cfg: &ThresholdConfig,
    tolerant: bool,
    availability: &[bool],
) -> Result<RoutingOutcome, PolicyError> {
    let n = topology.n() as u32;
    let mut forward_hops = Vec::new();
    let mut confidences = BTreeMap::new();
    let mut visited = Vec::new();

    let mut tier = 1u32;
    loop {
        let te = task
            .evidence_for(tier)
            .ok_or_else(|| PolicyError::MissingTierEvidence {
                task_id: task.task_id.clone(),
                tier,
            })?;
        let c = score(te, task.task_type)
            .map_err(|source| PolicyError::Confidence {
                task_id: task.task_id.clone(),
                source,
            })?
            .get();
        confidences.insert(tier, c);
        visited.push(tier);

        let queue = queues.get_or_create(tier, task.task_type, cfg.k);
        let threshold = if cfg.insert_before_threshold {
            queue.push(c);
            queue.threshold(cfg)
        } else {
            let t = queue.threshold(cfg);
            queue.push(c);
            t
        };

        let confident = match threshold {
            Threshold::ColdStart => true,
            Threshold::Value(t) => c >= t,
        };
        let next_tier_down = tolerant
            && tier < n
            && !availability
                .get(tier as usize)
                .copied()
                .unwrap_or(true);

        if confident || tier == n || next_tier_down {
            return finalize(task, topology, tier, forward_hops, confidences, &visited);
        }
        forward_hops.push((tier, tier + 1));
        tier += 1;
    }
}

/// Route one task with one of the five fixed baselines.
///
/// `rng_draws` supplies one uniform in [0, 1) per potential offload decision
/// (`rng_draws[i]` for tier i+1); only ColServe consumes them.
pub fn route_baseline(
    task: &Task,
    topology: &TierTopology,
    method: &Method,
    rng_draws: &[f64],
) -> Result<RoutingOutcome, PolicyError> {
    let n = topology.n() as u32;
    let no_conf = BTreeMap::new();
    match method {
        Method::EndServe => finalize(task, topology, 1, vec![], no_conf, &[1]),
        Method::EdgeServe => finalize(task, topology, 2, vec![(1, 2)], no_conf, &[2]),
        Method::CloudServe => finalize(task, topology, n, vec![(1, n)], no_conf, &[n]),
        Method::ColServe { alpha } => {
            let mut forward_hops = Vec::new();
            let mut tier = 1u32;
            while tier < n {
                let draw = rng_draws.get(tier as usize - 1).copied().unwrap_or(1.0);
                if draw < *alpha {
                    forward_hops.push((tier, tier + 1));
                    tier += 1;
                } else {
                    break;
                }
            }
            finalize(task, topology, tier, forward_hops, no_conf, &[tier])
        }
        Method::CasServe { thresholds } => {
            let mut forward_hops = Vec::new();
            let mut confidences = BTreeMap::new();
            let mut visited = Vec::new();
            let mut tier = 1u32;
            loop {
                let te = task.evidence_for(tier).ok_or_else(|| {
                    PolicyError::MissingTierEvidence {
                        task_id: task.task_id.clone(),
                        tier,
                    }
                })?;
                let c = score(te, task.task_type)
                    .map_err(|source| PolicyError::Confidence {
                        task_id: task.task_id.clone(),
                        source,
                    })?
                    .get();
                confidences.insert(tier, c);
                visited.push(tier);
                if tier == n || c >= thresholds[tier as usize - 1] {
                    return finalize(task, topology, tier, forward_hops, confidences, &visited);
                }
                forward_hops.push((tier, tier + 1));
                tier += 1;
            }
        }
        Method::RecServe { .. } => {
            unreachable!("RecServe is routed by route_recserve, which owns the queue state")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Evidence, TaskType, TierEvidence};

    fn task_with_confidences(confs: &[f64]) -> Task {
        Task {
            task_id: "t".into(),
            task_type: TaskType::Seq2Class,
            input_len: 100,
            tier_evidence: confs
                .iter()
                .enumerate()
                .map(|(i, &c)| TierEvidence {
                    tier: i as u32 + 1,
                    evidence: Evidence::Confidence(c),
                    output_len: 10 * (i as u64 + 1),
                    quality: c,
                })
                .collect(),
        }
    }

    fn topo() -> TierTopology {
        TierTopology::from_costs(&[1.0, 5.0, 20.0])
    }

    /// Queue set pre-filled so the thresholds are known constants.
    fn warmed_queues(cfg: &ThresholdConfig, values: &[f64]) -> QueueSet {
        let mut queues = QueueSet::new();
        for tier in 1..=3 {
            let q = queues.get_or_create(tier, TaskType::Seq2Class, cfg.k);
            for &v in values {
                q.push(v);
            }
        }
        queues
    }

    #[test]
    fn recserve_confident_at_device() {
        let cfg = ThresholdConfig::new(0.5).with_k(100);
        // threshold near 0.5 regardless of one inserted score
        let mut queues = warmed_queues(&cfg, &[0.4, 0.45, 0.5, 0.55, 0.6]);
        let task = task_with_confidences(&[0.9, 0.9, 0.9]);
        let out = route_recserve(&task, &topo(), &mut queues, &cfg, false, &[true; 3]).unwrap();
        assert_eq!(out.final_tier, 1);
        assert!(out.forward_hops.is_empty());
        assert!(out.return_hops.is_empty());
        assert_eq!(out.compute_cost, 1.0);
        assert_eq!(out.output_len, 10);
    }

    #[test]
    fn recserve_escalates_to_cloud() {
        let cfg = ThresholdConfig::new(0.5).with_k(100);
        let mut queues = warmed_queues(&cfg, &[0.4, 0.45, 0.5, 0.55, 0.6]);
        let task = task_with_confidences(&[0.1, 0.2, 0.3]);
        let out = route_recserve(&task, &topo(), &mut queues, &cfg, false, &[true; 3]).unwrap();
        assert_eq!(out.final_tier, 3);
        assert_eq!(out.forward_hops, vec![(1, 2), (2, 3)]);
        assert_eq!(out.return_hops, vec![(3, 2), (2, 1)]);
        assert_eq!(out.compute_cost, 1.0 + 5.0 + 20.0);
        assert_eq!(out.output_len, 30);
        assert_eq!(out.per_tier_confidence.len(), 3);
    }

    #[test]
    fn recserve_tolerant_stops_at_unavailable_next_tier() {
        let cfg = ThresholdConfig::new(0.5).with_k(100);
        let mut queues = warmed_queues(&cfg, &[0.4, 0.45, 0.5, 0.55, 0.6]);
        let task = task_with_confidences(&[0.1, 0.2, 0.3]);
        // tier 2 down
        let availability = [true, false, true];
        let out = route_recserve(&task, &topo(), &mut queues, &cfg, true, &availability).unwrap();
        assert_eq!(out.final_tier, 1);
        assert!(out.forward_hops.is_empty());
    }

    #[test]
    fn recserve_not_tolerant_ignores_availability() {
        let cfg = ThresholdConfig::new(0.5).with_k(100);
        let mut queues = warmed_queues(&cfg, &[0.4, 0.45, 0.5, 0.55, 0.6]);
        let task = task_with_confidences(&[0.1, 0.2, 0.9]);
        let availability = [true, false, false];
        let out = route_recserve(&task, &topo(), &mut queues, &cfg, false, &availability).unwrap();
        assert_eq!(out.final_tier, 3);
    }

    #[test]
    fn recserve_cold_start_finalizes_locally() {
        let cfg = ThresholdConfig::new(0.9).with_k(100);
        let mut queues = QueueSet::new();
        let task = task_with_confidences(&[0.001, 0.001, 0.001]);
        let out = route_recserve(&task, &topo(), &mut queues, &cfg, false, &[true; 3]).unwrap();
        assert_eq!(out.final_tier, 1);
        // the cold-start task still left its score in the device queue
        assert_eq!(queues.get(1, TaskType::Seq2Class).unwrap().len(), 1);
    }

    #[test]
    fn recserve_pushes_at_top_tier_too() {
        let cfg = ThresholdConfig::new(0.5).with_k(100);
        let mut queues = warmed_queues(&cfg, &[0.4, 0.45, 0.5, 0.55, 0.6]);
        let task = task_with_confidences(&[0.1, 0.2, 0.3]);
        route_recserve(&task, &topo(), &mut queues, &cfg, false, &[true; 3]).unwrap();
        assert_eq!(queues.get(3, TaskType::Seq2Class).unwrap().len(), 6);
    }

    #[test]
    fn endserve_stays_local() {
        let task = task_with_confidences(&[0.2, 0.9, 0.9]);
        let out = route_baseline(&task, &topo(), &Method::EndServe, &[]).unwrap();
        assert_eq!(out.final_tier, 1);
        assert!(out.forward_hops.is_empty());
        assert_eq!(out.compute_cost, 1.0);
    }

    #[test]
    fn edgeserve_single_hop_edge_compute_only() {
        let task = task_with_confidences(&[0.2, 0.9, 0.9]);
        let out = route_baseline(&task, &topo(), &Method::EdgeServe, &[]).unwrap();
        assert_eq!(out.final_tier, 2);
        assert_eq!(out.forward_hops, vec![(1, 2)]);
        assert_eq!(out.return_hops, vec![(2, 1)]);
        assert_eq!(out.compute_cost, 5.0);
    }

    #[test]
    fn cloudserve_direct_hop_skips_edge() {
        let task = task_with_confidences(&[0.2, 0.9, 0.9]);
        let out = route_baseline(&task, &topo(), &Method::CloudServe, &[]).unwrap();
        assert_eq!(out.final_tier, 3);
        assert_eq!(out.forward_hops, vec![(1, 3)]);
        assert_eq!(out.return_hops, vec![(3, 1)]);
        assert_eq!(out.compute_cost, 20.0);
    }

    #[test]
    fn colserve_no_offload_when_draw_exceeds_alpha() {
        let task = task_with_confidences(&[0.2, 0.9, 0.9]);
        let method = Method::ColServe { alpha: 0.2 };
        let out = route_baseline(&task, &topo(), &method, &[0.5, 0.5]).unwrap();
        assert_eq!(out.final_tier, 1);
        assert_eq!(out.compute_cost, 1.0);
    }

    #[test]
    fn colserve_two_offloads_when_both_draws_low() {
        let task = task_with_confidences(&[0.2, 0.9, 0.9]);
        let method = Method::ColServe { alpha: 0.2 };
        let out = route_baseline(&task, &topo(), &method, &[0.1, 0.15]).unwrap();
        assert_eq!(out.final_tier, 3);
        assert_eq!(out.forward_hops, vec![(1, 2), (2, 3)]);
        // pass-through tiers run no inference
        assert_eq!(out.compute_cost, 20.0);
        assert!(out.per_tier_confidence.is_empty());
    }

    #[test]
    fn casserve_fixed_threshold_keeps_confident_task() {
        let task = task_with_confidences(&[0.9, 0.9, 0.9]);
        let method = Method::CasServe {
            thresholds: vec![0.85, 0.6],
        };
        let out = route_baseline(&task, &topo(), &method, &[]).unwrap();
        assert_eq!(out.final_tier, 1);
    }

    #[test]
    fn casserve_escalates_below_threshold() {
        let task = task_with_confidences(&[0.5, 0.65, 0.9]);
        let method = Method::CasServe {
            thresholds: vec![0.85, 0.6],
        };
        let out = route_baseline(&task, &topo(), &method, &[]).unwrap();
        assert_eq!(out.final_tier, 2);
        assert_eq!(out.forward_hops, vec![(1, 2)]);
        assert_eq!(out.compute_cost, 1.0 + 5.0);
    }

    #[test]
    fn casserve_near_zero_thresholds_keep_everything_local() {
        let task = task_with_confidences(&[0.3, 0.3, 0.3]);
        let method = Method::CasServe {
            thresholds: vec![1e-15, 1e-15],
        };
        let out = route_baseline(&task, &topo(), &method, &[]).unwrap();
        assert_eq!(out.final_tier, 1);
    }

    #[test]
    fn casserve_near_one_thresholds_push_everything_to_cloud() {
        let task = task_with_confidences(&[0.3, 0.3, 0.3]);
        let method = Method::CasServe {
            thresholds: vec![1.0 - 1e-12, 1.0 - 1e-12],
        };
        let out = route_baseline(&task, &topo(), &method, &[]).unwrap();
        assert_eq!(out.final_tier, 3);
    }

    #[test]
    fn missing_evidence_is_an_error() {
        let mut task = task_with_confidences(&[0.1, 0.1]);
        task.tier_evidence.truncate(1);
        let cfg = ThresholdConfig::new(0.5).with_k(10);
        let mut queues = warmed_queues(&cfg, &[0.4, 0.5, 0.6]);
        let err = route_recserve(&task, &topo(), &mut queues, &cfg, false, &[true; 3]).unwrap_err();
        assert!(matches!(err, PolicyError::MissingTierEvidence { tier: 2, .. }));
    }

    #[test]
    fn method_validation() {
        assert!(Method::ColServe { alpha: 0.2 }.validate(3).is_ok());
        assert!(Method::ColServe { alpha: 0.0 }.validate(3).is_err());
        assert!(Method::CasServe {
            thresholds: vec![0.85, 0.6]
        }
        .validate(3)
        .is_ok());
        assert!(Method::CasServe {
            thresholds: vec![0.85]
        }
        .validate(3)
        .is_err());
        assert!(Method::CasServe {
            thresholds: vec![0.85, 1.0]
        }
        .validate(3)
        .is_err());
    }
}
