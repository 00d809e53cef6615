//! Experiment runner: stream a workload through each configured method,
//! account the communication, and aggregate per-method reports.
//!
//! Every (method, replica) job owns disjoint queue and RNG state. Per-stream
//! seeds derive from the experiment seed, the replica index, and a stream
//! tag, so any method in any replica sees the same workload and the same
//! availability realization, and results are independent of thread count.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::Serialize;
use thiserror::Error;

use crate::calibrate::{calibrate, CalibrateError, CalibrationTrace};
use crate::config::{ExperimentConfig, WorkloadSource};
use crate::netsim::{account, sample_availability, CommLedger};
use crate::policy::{route_baseline, route_recserve, Method, PolicyError, RoutingOutcome};
use crate::history::QueueSet;
use crate::types::{Task, TierTopology};
use crate::workload::{generate_seeded, load_trace, WorkloadError};

const STREAM_WORKLOAD: u64 = 1;
const STREAM_AVAILABILITY: u64 = 2;
const STREAM_POLICY: u64 = 3;

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable sub-stream seed from a base seed and a tag path.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    let mut s = splitmix64(base);
    for &t in tags {
        s = splitmix64(s ^ t);
    }
    s
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Trace(#[from] WorkloadError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Calibrate(#[from] CalibrateError),
}

/// Routes one task stream for one method, owning its queues and RNG streams.
pub struct StreamRouter<'a> {
    topology: &'a TierTopology,
    method: Method,
    queues: QueueSet,
    avail_rng: ChaCha12Rng,
    policy_rng: ChaCha12Rng,
    task_index: u64,
}

impl<'a> StreamRouter<'a> {
    pub fn new(topology: &'a TierTopology, method: Method, avail_seed: u64, policy_seed: u64) -> Self {
        StreamRouter {
            topology,
            method,
            queues: QueueSet::new(),
            avail_rng: ChaCha12Rng::seed_from_u64(avail_seed),
            policy_rng: ChaCha12Rng::seed_from_u64(policy_seed),
            task_index: 0,
        }
    }

    pub fn queues(&self) -> &QueueSet {
        &self.queues
    }

    /// Route the next task in the stream.
    ///
    /// Availability is sampled here, once per (task, tier), and passed into
    /// the policy; the draw count per task is fixed so identical seeds give
    /// identical realizations to every method.
    pub fn route_next(&mut self, task: &Task) -> Result<RoutingOutcome, PolicyError> {
        let n = self.topology.n();
        let mut availability = Vec::with_capacity(n);
        for tier in 1..=n as u32 {
            let draw: f64 = self.avail_rng.random();
            availability.push(sample_availability(
                self.topology.availability(tier),
                tier,
                self.task_index,
                draw,
            ));
        }
        let outcome = match &self.method {
            Method::RecServe {
                cfg,
                unavailability_tolerant,
            } => route_recserve(
                task,
                self.topology,
                &mut self.queues,
                cfg,
                *unavailability_tolerant,
                &availability,
            )?,
            Method::ColServe { .. } => {
                let draws: Vec<f64> = (0..n - 1).map(|_| self.policy_rng.random()).collect();
                route_baseline(task, self.topology, &self.method, &draws)?
            }
            baseline => route_baseline(task, self.topology, baseline, &[])?,
        };
        self.task_index += 1;
        Ok(outcome)
    }
}

/// Accumulated measurements of one (method, replica) stream.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicaStats {
    pub ledger: CommLedger,
    pub completion_counts: Vec<u64>,
    pub sum_quality: f64,
    pub sum_compute: f64,
    pub task_count: u64,
}

impl ReplicaStats {
    fn new(n: usize) -> Self {
        ReplicaStats {
            ledger: CommLedger::new(),
            completion_counts: vec![0; n],
            sum_quality: 0.0,
            sum_compute: 0.0,
            task_count: 0,
        }
    }
}

/// Stream `tasks` through `method`; the first `warmup` tasks update queue
/// state but are excluded from the measurements.
pub fn run_replica(
    tasks: &[Task],
    topology: &TierTopology,
    method: &Method,
    warmup: u64,
    strict_assumption5: bool,
    avail_seed: u64,
    policy_seed: u64,
) -> Result<ReplicaStats, PolicyError> {
    let mut router = StreamRouter::new(topology, method.clone(), avail_seed, policy_seed);
    let mut stats = ReplicaStats::new(topology.n());
    for (idx, task) in tasks.iter().enumerate() {
        let outcome = router.route_next(task)?;
        if (idx as u64) < warmup {
            continue;
        }
        stats
            .ledger
            .merge(&account(&outcome, task, strict_assumption5));
        stats.completion_counts[outcome.final_tier as usize - 1] += 1;
        stats.sum_quality += outcome.quality;
        stats.sum_compute += outcome.compute_cost;
        stats.task_count += 1;
    }
    Ok(stats)
}

/// Aggregated per-method results.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodReport {
    pub label: String,
    pub param: String,
    /// Measured tasks summed over replicas.
    pub task_count: u64,
    pub mean_quality: f64,
    pub mean_compute_cost: f64,
    /// Fraction of measured tasks completing at each tier; sums to 1.
    pub completion_fractions: Vec<f64>,
    /// Mean bytes per replica at each tier (exact totals when replicas = 1).
    pub comm_per_tier: Vec<f64>,
    pub comm_total: f64,
    /// Exact integer ledgers, one per replica.
    pub replica_ledgers: Vec<CommLedger>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub replicas: u32,
    pub warmup_tasks: u64,
    pub strict_assumption5: bool,
    pub tier_count: usize,
    pub methods: Vec<MethodReport>,
    /// Echo of the parsed configuration for reproducibility.
    pub config: ExperimentConfig,
}

fn aggregate(method: &Method, n: usize, replicas: &[ReplicaStats]) -> MethodReport {
    let task_count: u64 = replicas.iter().map(|r| r.task_count).sum();
    let sum_quality: f64 = replicas.iter().map(|r| r.sum_quality).sum();
    let sum_compute: f64 = replicas.iter().map(|r| r.sum_compute).sum();
    let mut completion_fractions = vec![0.0; n];
    for stats in replicas {
        for (i, &c) in stats.completion_counts.iter().enumerate() {
            completion_fractions[i] += c as f64;
        }
    }
    for frac in &mut completion_fractions {
        *frac /= task_count as f64;
    }
    let r = replicas.len() as f64;
    let comm_per_tier: Vec<f64> = (1..=n as u32)
        .map(|tier| replicas.iter().map(|s| s.ledger.tier_bytes(tier) as f64).sum::<f64>() / r)
        .collect();
    let comm_total =
        replicas.iter().map(|s| s.ledger.total_bytes() as f64).sum::<f64>() / r;
    MethodReport {
        label: method.label().to_string(),
        param: method.param_string(),
        task_count,
        mean_quality: sum_quality / task_count as f64,
        mean_compute_cost: sum_compute / task_count as f64,
        completion_fractions,
        comm_per_tier,
        comm_total,
        replica_ledgers: replicas.iter().map(|s| s.ledger.clone()).collect(),
    }
}

/// Materialize the per-replica task streams.
fn build_workloads(config: &ExperimentConfig) -> Result<Vec<Arc<Vec<Task>>>, RunError> {
    match &config.workload {
        WorkloadSource::Synthetic(spec) => (0..config.replicas)
            .map(|r| {
                let seed = derive_seed(config.seed, &[STREAM_WORKLOAD, r as u64]);
                Ok(Arc::new(generate_seeded(spec, seed)?))
            })
            .collect(),
        WorkloadSource::Trace { path } => {
            let tasks = load_trace(path)?;
            if let Some(task) = tasks.first() {
                if task.tier_count() != config.topology.n() {
                    return Err(RunError::Config(format!(
                        "trace has {} tiers but topology has {}",
                        task.tier_count(),
                        config.topology.n()
                    )));
                }
            }
            if config.warmup_tasks >= tasks.len() as u64 {
                return Err(RunError::Config(format!(
                    "warmup_tasks {} must be below trace size {}",
                    config.warmup_tasks,
                    tasks.len()
                )));
            }
            let shared = Arc::new(tasks);
            Ok(vec![shared; config.replicas as usize])
        }
    }
}

fn in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match threads {
        None => f(),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .expect("thread pool")
            .install(f),
    }
}

/// Run every configured method over the workload and aggregate the report.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentReport, RunError> {
    config.validate().map_err(RunError::Config)?;
    let workloads = build_workloads(config)?;
    let n = config.topology.n();

    let jobs: Vec<(usize, u64)> = (0..config.methods.len())
        .flat_map(|m| (0..config.replicas as u64).map(move |r| (m, r)))
        .collect();

    let results: Vec<Result<ReplicaStats, PolicyError>> = in_pool(config.threads, || {
        use rayon::prelude::*;
        jobs.par_iter()
            .map(|&(method_idx, replica)| {
                run_replica(
                    &workloads[replica as usize],
                    &config.topology,
                    &config.methods[method_idx],
                    config.warmup_tasks,
                    config.strict_assumption5,
                    derive_seed(config.seed, &[STREAM_AVAILABILITY, replica]),
                    derive_seed(config.seed, &[STREAM_POLICY, replica, method_idx as u64]),
                )
            })
            .collect()
    });

    let mut per_method: Vec<Vec<ReplicaStats>> =
        (0..config.methods.len()).map(|_| Vec::new()).collect();
    for ((method_idx, _), result) in jobs.into_iter().zip(results) {
        per_method[method_idx].push(result?);
    }

    let methods = config
        .methods
        .iter()
        .zip(&per_method)
        .map(|(method, stats)| aggregate(method, n, stats))
        .collect();

    Ok(ExperimentReport {
        seed: config.seed,
        replicas: config.replicas,
        warmup_tasks: config.warmup_tasks,
        strict_assumption5: config.strict_assumption5,
        tier_count: n,
        methods,
        config: config.clone(),
    })
}

/// Run the methods and flatten into plot-ready trade-off rows.
pub fn compare(config: &ExperimentConfig) -> Result<ExperimentReport, RunError> {
    if config.methods.len() < 2 {
        return Err(RunError::Config(format!(
            "compare needs at least 2 methods, got {}",
            config.methods.len()
        )));
    }
    run(config)
}

/// Run the calibration controller described by the config's `[calibrate]`
/// section over the replica-0 workload.
pub fn run_calibration(config: &ExperimentConfig) -> Result<CalibrationTrace, RunError> {
    config.validate().map_err(RunError::Config)?;
    let section = config
        .calibrate
        .as_ref()
        .ok_or_else(|| RunError::Config("missing [calibrate] section".into()))?;
    let tasks = match &config.workload {
        WorkloadSource::Synthetic(spec) => {
            generate_seeded(spec, derive_seed(config.seed, &[STREAM_WORKLOAD, 0]))?
        }
        WorkloadSource::Trace { path } => load_trace(path)?,
    };
    let mean_payload = match &config.workload {
        WorkloadSource::Synthetic(spec) => spec.mean_payload(),
        WorkloadSource::Trace { .. } => empirical_mean_payload(&tasks),
    };
    let (cal_cfg, template) = section.resolve(mean_payload).map_err(RunError::Config)?;
    let warmup = section.warmup_tasks.unwrap_or(config.warmup_tasks) as usize;
    Ok(calibrate(
        &tasks,
        &config.topology,
        &cal_cfg,
        &template,
        warmup,
        mean_payload,
    )?)
}

/// Mean input-plus-tier-1-output size of a task stream, bytes.
pub fn empirical_mean_payload(tasks: &[Task]) -> f64 {
    if tasks.is_empty() {
        return 0.0;
    }
    let total: f64 = tasks
        .iter()
        .map(|t| t.input_len as f64 + t.tier_evidence.first().map_or(0.0, |te| te.output_len as f64))
        .sum();
    total / tasks.len() as f64
}
