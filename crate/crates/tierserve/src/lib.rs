//! Simulator and decision library for confidence-driven inference-task
//! offloading across a device / edge / cloud tier hierarchy.
//!
//! Each tier hosts a progressively more capable model. A task starts on the
//! device; whenever the local confidence score falls below a dynamic
//! threshold — the beta-quantile of a sliding window of recent scores — the
//! task escalates one tier. The library provides that recursive policy, the
//! fixed baselines it is compared against, exact per-node communication
//! accounting, closed-form predictors for burden and compute cost, a budget
//! calibration controller, and synthetic/trace workload provisioning. Model
//! inference itself is abstracted behind trace-supplied or generated
//! confidence and quality data.

pub mod calibrate;
pub mod confidence;
pub mod config;
pub mod experiment;
pub mod history;
pub mod netsim;
pub mod policy;
pub mod report;
pub mod theory;
pub mod types;
pub mod workload;

pub use confidence::{seq2class_confidence, seq2seq_confidence, seq2seq_perplexity, ConfidenceScore};
pub use config::{ExperimentConfig, ReportFormat, WorkloadSource};
pub use experiment::{compare, run, run_calibration, ExperimentReport, MethodReport, StreamRouter};
pub use history::{ConfidenceQueue, QueueSet, Threshold, ThresholdConfig};
pub use netsim::{account, sample_availability, AvailabilityModel, CommLedger};
pub use policy::{route_baseline, route_recserve, Method, RoutingOutcome};
pub use types::{validate_topology, Evidence, Task, TaskType, TierEvidence, TierNodeConfig, TierTopology};
pub use workload::{generate, load_trace, save_trace, validate_trace, SyntheticSpec};
