//! Tier availability models and per-node communication-burden accounting.
//!
//! Every transmitted payload is counted at BOTH endpoints, so a ledger's
//! total is twice the link traffic. This is the only convention under which
//! per-node columns and totals are mutually consistent for hop-by-hop routes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::policy::RoutingOutcome;
use crate::types::Task;

/// Whether a tier is reachable for offloading at a given point in the stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AvailabilityModel {
    #[default]
    AlwaysUp,
    Bernoulli {
        p_up: f64,
    },
    /// Down for task indices inside any of the (start, end) intervals,
    /// bounds inclusive.
    Schedule {
        down_intervals: Vec<(u64, u64)>,
    },
}

impl AvailabilityModel {
    pub fn validate(&self) -> Result<(), String> {
        match self {
            AvailabilityModel::AlwaysUp => Ok(()),
            AvailabilityModel::Bernoulli { p_up } => {
                if !(0.0..=1.0).contains(p_up) {
                    return Err(format!("p_up {p_up} outside [0, 1]"));
                }
                Ok(())
            }
            AvailabilityModel::Schedule { down_intervals } => {
                let mut sorted = down_intervals.clone();
                sorted.sort_unstable();
                for w in sorted.windows(2) {
                    if w[0].1 >= w[1].0 {
                        return Err(format!(
                            "down intervals {:?} and {:?} overlap",
                            w[0], w[1]
                        ));
                    }
                }
                for (start, end) in down_intervals {
                    if start > end {
                        return Err(format!("down interval ({start}, {end}) has start > end"));
                    }
                }
                Ok(())
            }
        }
    }
}

/// Sample whether a tier is up for the task at `task_index`.
///
/// `rng_draw` is a uniform in [0, 1); only the Bernoulli model consumes it.
pub fn sample_availability(
    model: &AvailabilityModel,
    _tier: u32,
    task_index: u64,
    rng_draw: f64,
) -> bool {
    match model {
        AvailabilityModel::AlwaysUp => true,
        AvailabilityModel::Bernoulli { p_up } => rng_draw < *p_up,
        AvailabilityModel::Schedule { down_intervals } => !down_intervals
            .iter()
            .any(|&(start, end)| task_index >= start && task_index <= end),
    }
}

/// Per-node communication byte counts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommLedger {
    per_tier_bytes: BTreeMap<u32, u64>,
    total_bytes: u64,
}

impl CommLedger {
    pub fn new() -> Self {
        CommLedger::default()
    }

    pub fn record(&mut self, tier: u32, bytes: u64) {
        *self.per_tier_bytes.entry(tier).or_insert(0) += bytes;
        self.total_bytes += bytes;
    }

    pub fn tier_bytes(&self, tier: u32) -> u64 {
        self.per_tier_bytes.get(&tier).copied().unwrap_or(0)
    }

    pub fn total_bytes(&self) -> u64 {
        self.total_bytes
    }

    pub fn merge(&mut self, other: &CommLedger) {
        for (&tier, &bytes) in &other.per_tier_bytes {
            *self.per_tier_bytes.entry(tier).or_insert(0) += bytes;
        }
        self.total_bytes += other.total_bytes;
    }

    /// Byte counts for tiers 1..=n as a dense vector.
    pub fn per_tier_vec(&self, n: usize) -> Vec<u64> {
        (1..=n as u32).map(|t| self.tier_bytes(t)).collect()
    }
}

/// Communication delta of a single routed task.
///
/// Each forward hop (a, b) charges the input length to both a and b; each
/// return hop charges the returned output length to both endpoints. With
/// `strict_assumption5` the returned output length is forced to tier 1's,
/// making output-length distributions identical across completion tiers.
pub fn account(outcome: &RoutingOutcome, task: &Task, strict_assumption5: bool) -> CommLedger {
    let mut ledger = CommLedger::new();
    let return_len = if strict_assumption5 {
        task.tier_evidence
            .first()
            .map(|te| te.output_len)
            .unwrap_or(outcome.output_len)
    } else {
        outcome.output_len
    };
    for &(a, b) in &outcome.forward_hops {
        ledger.record(a, task.input_len);
        ledger.record(b, task.input_len);
    }
    for &(a, b) in &outcome.return_hops {
        ledger.record(a, return_len);
        ledger.record(b, return_len);
    }
    ledger
}
