//! Sliding-window confidence history and the dynamic quantile threshold.
//!
//! Each (tier, task type) pair owns a bounded FIFO of recent confidence
//! scores. The offloading threshold is the linearly interpolated beta-quantile
//! of that window. The queue keeps a sorted mirror of its contents so a push
//! costs one binary-searched removal and insertion, and the threshold itself
//! is O(1); `quantile_interpolated` is the straight-from-the-formula
//! evaluation the mirror is tested against.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::types::TaskType;

/// Parameters of the dynamic threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    /// Quantile level in (0, 1). Larger values offload more tasks.
    pub beta: f64,
    /// Queue capacity.
    #[serde(default = "default_k")]
    pub k: usize,
    /// Below this many samples the threshold reports `ColdStart`.
    #[serde(default = "default_min_samples")]
    pub min_samples: usize,
    /// Insert the current task's score before computing the threshold
    /// (the default), or compute against the pre-insertion window.
    #[serde(default = "default_insert_before")]
    pub insert_before_threshold: bool,
}

fn default_k() -> usize {
    10_000
}

fn default_min_samples() -> usize {
    2
}

fn default_insert_before() -> bool {
    true
}

impl ThresholdConfig {
    pub fn new(beta: f64) -> Self {
        ThresholdConfig {
            beta,
            k: default_k(),
            min_samples: default_min_samples(),
            insert_before_threshold: default_insert_before(),
        }
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn with_min_samples(mut self, min_samples: usize) -> Self {
        self.min_samples = min_samples;
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(format!("beta {} outside (0, 1)", self.beta));
        }
        if self.k < 1 {
            return Err("k must be >= 1".into());
        }
        if self.min_samples < 2 {
            return Err("min_samples must be >= 2".into());
        }
        if self.min_samples > self.k {
            return Err(format!(
                "min_samples {} exceeds capacity k {}",
                self.min_samples, self.k
            ));
        }
        Ok(())
    }
}

/// Threshold outcome: a value, or not enough history yet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    ColdStart,
    Value(f64),
}

impl Threshold {
    pub fn value(self) -> Option<f64> {
        match self {
            Threshold::ColdStart => None,
            Threshold::Value(v) => Some(v),
        }
    }
}

/// Linear-interpolation quantile over an ascending-sorted slice.
///
/// With m entries, r = beta * (m - 1); the result interpolates between the
/// floor(r)-th and ceil(r)-th order statistics (0-based), the upper index
/// clamped to m - 1.
pub fn quantile_interpolated(sorted: &[f64], beta: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let m = sorted.len();
    let r = beta * (m - 1) as f64;
    let lo = r.floor() as usize;
    let hi = (r.ceil() as usize).min(m - 1);
    let frac = r - r.floor();
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Bounded FIFO of confidence scores with a sorted mirror.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceQueue {
    entries: VecDeque<f64>,
    sorted: Vec<f64>,
    capacity: usize,
}

/// JSON-serializable queue state for checkpoint/debug.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueSnapshot {
    /// Entries in insertion order, oldest first.
    pub entries: Vec<f64>,
    pub k: usize,
}

impl ConfidenceQueue {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "queue capacity must be >= 1");
        ConfidenceQueue {
            entries: VecDeque::with_capacity(capacity),
            sorted: Vec::with_capacity(capacity),
            capacity,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in insertion order, oldest first.
    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().copied()
    }

    /// Append a score; evicts the oldest entry when full.
    pub fn push(&mut self, value: f64) {
        debug_assert!(value.is_finite());
        if self.entries.len() == self.capacity {
            let oldest = self.entries.pop_front().expect("capacity >= 1");
            let pos = self
                .sorted
                .binary_search_by(|p| p.total_cmp(&oldest))
                .expect("sorted mirror out of sync");
            self.sorted.remove(pos);
        }
        self.entries.push_back(value);
        let pos = match self.sorted.binary_search_by(|p| p.total_cmp(&value)) {
            Ok(p) | Err(p) => p,
        };
        self.sorted.insert(pos, value);
    }

    /// The interpolated beta-quantile of the current window, or `ColdStart`
    /// when fewer than `cfg.min_samples` entries are present.
    pub fn threshold(&self, cfg: &ThresholdConfig) -> Threshold {
        if self.entries.len() < cfg.min_samples {
            return Threshold::ColdStart;
        }
        Threshold::Value(quantile_interpolated(&self.sorted, cfg.beta))
    }

    pub fn snapshot(&self) -> QueueSnapshot {
        QueueSnapshot {
            entries: self.entries.iter().copied().collect(),
            k: self.capacity,
        }
    }

    pub fn from_snapshot(snapshot: &QueueSnapshot) -> Self {
        let mut q = ConfidenceQueue::new(snapshot.k);
        for &v in &snapshot.entries {
            q.push(v);
        }
        q
    }
}

/// Confidence queues keyed by (tier, task type).
#[derive(Debug, Clone, Default)]
pub struct QueueSet {
    queues: BTreeMap<(u32, TaskType), ConfidenceQueue>,
}

impl QueueSet {
    pub fn new() -> Self {
        QueueSet::default()
    }

    pub fn get_or_create(&mut self, tier: u32, task_type: TaskType, k: usize) -> &mut ConfidenceQueue {
        self.queues
            .entry((tier, task_type))
            .or_insert_with(|| ConfidenceQueue::new(k))
    }

    pub fn get(&self, tier: u32, task_type: TaskType) -> Option<&ConfidenceQueue> {
        self.queues.get(&(tier, task_type))
    }

    pub fn snapshots(&self) -> BTreeMap<(u32, TaskType), QueueSnapshot> {
        self.queues
            .iter()
            .map(|(k, q)| (*k, q.snapshot()))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn queue_of(capacity: usize, values: &[f64]) -> ConfidenceQueue {
        let mut q = ConfidenceQueue::new(capacity);
        for &v in values {
            q.push(v);
        }
        q
    }

    fn cfg(beta: f64) -> ThresholdConfig {
        ThresholdConfig::new(beta)
    }

    #[test]
    fn push_below_capacity() {
        let q = queue_of(2, &[0.3]);
        assert_eq!(q.iter().collect::<Vec<_>>(), vec![0.3]);
    }

    #[test]
    fn push_evicts_oldest_when_full() {
        let mut q = queue_of(2, &[0.3, 0.5]);
        q.push(0.9);
        assert_eq!(q.iter().collect::<Vec<_>>(), vec![0.5, 0.9]);
    }

    #[test]
    fn push_sequential_evictions_at_capacity_one() {
        let mut q = queue_of(1, &[0.3]);
        q.push(0.4);
        q.push(0.6);
        assert_eq!(q.iter().collect::<Vec<_>>(), vec![0.6]);
    }

    #[test]
    fn threshold_median_of_five() {
        let q = queue_of(10, &[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(q.threshold(&cfg(0.5)), Threshold::Value(3.0));
    }

    #[test]
    fn threshold_integer_rank() {
        let q = queue_of(10, &[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(q.threshold(&cfg(0.25)), Threshold::Value(2.0));
    }

    #[test]
    fn threshold_midpoint_interpolation() {
        let q = queue_of(10, &[0.2, 0.4]);
        let t = q.threshold(&cfg(0.5)).value().unwrap();
        assert!((t - 0.3).abs() < 1e-12);
    }

    #[test]
    fn threshold_cold_start_below_min_samples() {
        let q = queue_of(10, &[0.7]);
        assert_eq!(q.threshold(&cfg(0.9)), Threshold::ColdStart);
    }

    #[test]
    fn threshold_uses_current_length_when_partial() {
        // 3 of 10000 slots filled: quantile over m = 3.
        let q = queue_of(10_000, &[0.1, 0.5, 0.9]);
        assert_eq!(q.threshold(&cfg(0.5)), Threshold::Value(0.5));
    }

    #[test]
    fn exact_rank_consistency_power_of_two_lengths() {
        // With m - 1 a power of two, beta = j/(m-1) multiplies back exactly,
        // so the threshold hits the order statistic with no interpolation.
        for m in [3usize, 5, 9] {
            let values: Vec<f64> = (1..=m).map(|v| v as f64).collect();
            // insertion order scrambled
            let mut shuffled = values.clone();
            shuffled.reverse();
            let q = queue_of(m, &shuffled);
            for j in 1..=(m - 2) {
                let beta = j as f64 / (m - 1) as f64;
                let t = q.threshold(&cfg(beta)).value().unwrap();
                assert_eq!(t, (j + 1) as f64, "m={m} j={j}");
            }
        }
    }

    #[test]
    fn snapshot_roundtrip() {
        let q = queue_of(3, &[0.2, 0.9, 0.4, 0.6]);
        let snap = q.snapshot();
        let json = serde_json::to_string(&snap).unwrap();
        let back: QueueSnapshot = serde_json::from_str(&json).unwrap();
        let restored = ConfidenceQueue::from_snapshot(&back);
        assert_eq!(restored, q);
    }

    #[test]
    fn queue_set_keys_by_tier_and_task_type() {
        let mut set = QueueSet::new();
        set.get_or_create(1, TaskType::Seq2Class, 4).push(0.5);
        set.get_or_create(1, TaskType::Seq2Seq, 4).push(0.2);
        assert_eq!(set.get(1, TaskType::Seq2Class).unwrap().len(), 1);
        assert_eq!(
            set.get(1, TaskType::Seq2Seq).unwrap().iter().next(),
            Some(0.2)
        );
        assert!(set.get(2, TaskType::Seq2Class).is_none());
    }

    proptest! {
        #[test]
        fn length_never_exceeds_capacity(
            capacity in 1usize..20,
            values in prop::collection::vec(0.0f64..1.0, 0..100),
        ) {
            let mut q = ConfidenceQueue::new(capacity);
            for v in values {
                q.push(v);
                prop_assert!(q.len() <= capacity);
            }
        }

        #[test]
        fn window_keeps_most_recent(
            capacity in 1usize..10,
            values in prop::collection::vec(0.0f64..1.0, 1..50),
        ) {
            let mut q = ConfidenceQueue::new(capacity);
            for &v in &values {
                q.push(v);
            }
            let start = values.len().saturating_sub(capacity);
            prop_assert_eq!(q.iter().collect::<Vec<_>>(), values[start..].to_vec());
        }

        #[test]
        fn threshold_monotone_in_beta(
            values in prop::collection::vec(0.0f64..1.0, 2..30),
        ) {
            let q = queue_of(values.len(), &values);
            let mut prev = f64::NEG_INFINITY;
            for i in 1..10 {
                let beta = i as f64 / 10.0;
                let t = q.threshold(&cfg(beta)).value().unwrap();
                prop_assert!(t >= prev - 1e-12);
                prev = t;
            }
        }

        #[test]
        fn threshold_between_min_and_max(
            values in prop::collection::vec(0.0f64..1.0, 2..30),
            beta in 0.01f64..0.99,
        ) {
            let q = queue_of(values.len(), &values);
            let t = q.threshold(&cfg(beta)).value().unwrap();
            let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(t >= min && t <= max);
        }

        #[test]
        fn sorted_mirror_matches_fresh_sort(
            capacity in 1usize..12,
            values in prop::collection::vec(0.0f64..1.0, 0..60),
            beta in 0.01f64..0.99,
        ) {
            let mut q = ConfidenceQueue::new(capacity);
            for v in values {
                q.push(v);
                if q.len() >= 2 {
                    let mut fresh: Vec<f64> = q.iter().collect();
                    fresh.sort_by(f64::total_cmp);
                    let expected = quantile_interpolated(&fresh, beta);
                    let got = q.threshold(&cfg(beta)).value().unwrap();
                    prop_assert!((got - expected).abs() < 1e-15);
                }
            }
        }
    }
}
