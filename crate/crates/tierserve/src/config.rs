//! Experiment configuration: a single TOML file with `[topology]`,
//! `[workload]`, `[[methods]]`, and optional `[calibrate]` / `[report]`
//! sections. The parsed config is echoed into every report.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::calibrate::CalibrationConfig;
use crate::history::ThresholdConfig;
use crate::policy::Method;
use crate::types::{validate_topology, TierTopology};
use crate::workload::SyntheticSpec;

/// Where the task stream comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum WorkloadSource {
    Synthetic(SyntheticSpec),
    Trace { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(format!("unknown format {other:?}, expected csv or json")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ReportSection {
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub format: ReportFormat,
}

/// `[calibrate]` section: target budget (directly, or via the beta whose
/// theoretical burden it should match) plus controller parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrateSection {
    #[serde(default)]
    pub budget: Option<f64>,
    #[serde(default)]
    pub target_beta: Option<f64>,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_max_rounds")]
    pub max_rounds: usize,
    #[serde(default = "default_beta_lo")]
    pub beta_lo: f64,
    #[serde(default = "default_beta_hi")]
    pub beta_hi: f64,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_min_samples")]
    pub min_samples: usize,
    /// Warmup before the first round; defaults to the experiment's warmup.
    #[serde(default)]
    pub warmup_tasks: Option<u64>,
}

fn default_eta() -> f64 {
    0.5
}
fn default_window() -> usize {
    5_000
}
fn default_epsilon() -> f64 {
    0.05
}
fn default_max_rounds() -> usize {
    15
}
fn default_beta_lo() -> f64 {
    0.01
}
fn default_beta_hi() -> f64 {
    0.6
}
fn default_k() -> usize {
    10_000
}
fn default_min_samples() -> usize {
    2
}

impl CalibrateSection {
    /// Resolve into controller and threshold configs given the stream's mean
    /// payload.
    pub fn resolve(
        &self,
        mean_payload: f64,
    ) -> Result<(CalibrationConfig, ThresholdConfig), String> {
        let budget = match (self.budget, self.target_beta) {
            (Some(b), None) => b,
            (None, Some(beta)) => {
                crate::calibrate::budget_for_beta(beta, mean_payload).map_err(|e| e.to_string())?
            }
            (Some(_), Some(_)) => {
                return Err("set either budget or target_beta, not both".into())
            }
            (None, None) => return Err("calibrate needs budget or target_beta".into()),
        };
        let cal = CalibrationConfig {
            budget,
            eta: self.eta,
            window: self.window,
            epsilon: self.epsilon,
            max_rounds: self.max_rounds,
            beta_lo: self.beta_lo,
            beta_hi: self.beta_hi,
        };
        let template = ThresholdConfig::new(0.5)
            .with_k(self.k)
            .with_min_samples(self.min_samples);
        Ok((cal, template))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_replicas")]
    pub replicas: u32,
    #[serde(default)]
    pub warmup_tasks: u64,
    /// Force every tier's output length to tier 1's in the accounting,
    /// making the output-length distribution tier-invariant.
    #[serde(default)]
    pub strict_assumption5: bool,
    /// Worker threads for (method, replica) jobs; absent = one per core.
    #[serde(default)]
    pub threads: Option<usize>,
    pub topology: TierTopology,
    pub workload: WorkloadSource,
    pub methods: Vec<Method>,
    #[serde(default)]
    pub calibrate: Option<CalibrateSection>,
    #[serde(default)]
    pub report: ReportSection,
}

fn default_replicas() -> u32 {
    1
}

impl ExperimentConfig {
    /// Structural validation; trace-backed workloads are additionally
    /// checked against the topology when loaded.
    pub fn validate(&self) -> Result<(), String> {
        validate_topology(self.topology.clone()).map_err(|e| e.to_string())?;
        let n = self.topology.n();
        for node in &self.topology.tiers {
            node.availability
                .validate()
                .map_err(|e| format!("tier {} availability: {e}", node.tier))?;
        }
        if self.methods.is_empty() {
            return Err("methods list is empty".into());
        }
        for method in &self.methods {
            method.validate(n)?;
        }
        if self.replicas < 1 {
            return Err("replicas must be >= 1".into());
        }
        if let WorkloadSource::Synthetic(spec) = &self.workload {
            spec.validate().map_err(|e| e.to_string())?;
            if spec.n_tiers() != n {
                return Err(format!(
                    "workload has {} tiers but topology has {n}",
                    spec.n_tiers()
                ));
            }
            if self.warmup_tasks >= spec.n_tasks {
                return Err(format!(
                    "warmup_tasks {} must be below n_tasks {}",
                    self.warmup_tasks, spec.n_tasks
                ));
            }
        }
        Ok(())
    }
}

/// Parse and validate a TOML experiment config file.
pub fn load_config<P: AsRef<Path>>(path: P) -> Result<ExperimentConfig, String> {
    let text = std::fs::read_to_string(&path)
        .map_err(|e| format!("{}: {e}", path.as_ref().display()))?;
    parse_config(&text)
}

/// Parse and validate a TOML experiment config from a string.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, String> {
    let config: ExperimentConfig = toml::from_str(text).map_err(|e| e.to_string())?;
    config.validate()?;
    Ok(config)
}
