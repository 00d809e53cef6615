//! Online proportional-control calibration of the offloading quantile so the
//! measured communication burden tracks a byte budget.
//!
//! Each round routes a window of tasks with the current beta, compares the
//! measured mean per-task burden against the budget (the feedback ratio
//! gamma), and rescales beta multiplicatively: beta <- beta / gamma^eta.
//! History queues persist across rounds.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::history::{QueueSet, ThresholdConfig};
use crate::netsim::account;
use crate::policy::{route_recserve, PolicyError};
use crate::theory;
use crate::types::{Task, TierTopology};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    /// Target mean communication burden per task, bytes.
    pub budget: f64,
    /// Adjustment rate of the multiplicative update.
    pub eta: f64,
    /// Tasks routed per measurement round.
    pub window: usize,
    /// Convergence tolerance on |gamma - 1|.
    pub epsilon: f64,
    pub max_rounds: usize,
    #[serde(default = "default_beta_lo")]
    pub beta_lo: f64,
    #[serde(default = "default_beta_hi")]
    pub beta_hi: f64,
}

fn default_beta_lo() -> f64 {
    0.01
}

fn default_beta_hi() -> f64 {
    0.6
}

impl CalibrationConfig {
    pub fn validate(&self) -> Result<(), CalibrateError> {
        let fail = |msg: String| Err(CalibrateError::InvalidConfig(msg));
        if !self.budget.is_finite() || self.budget <= 0.0 {
            return fail(format!("budget {} must be positive", self.budget));
        }
        if !self.eta.is_finite() || self.eta < 0.0 {
            return fail(format!("eta {} must be non-negative", self.eta));
        }
        if self.window < 1 {
            return fail("window must be >= 1".into());
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return fail(format!("epsilon {} outside (0, 1)", self.epsilon));
        }
        if self.max_rounds < 1 {
            return fail("max_rounds must be >= 1".into());
        }
        if !(0.0 < self.beta_lo && self.beta_lo < self.beta_hi && self.beta_hi < 1.0) {
            return fail(format!(
                "beta clamp ({}, {}) must satisfy 0 < lo < hi < 1",
                self.beta_lo, self.beta_hi
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum CalibrateError {
    #[error("invalid calibration config: {0}")]
    InvalidConfig(String),
    #[error("budget {budget} needs beta {beta:.4}, above the clamp ceiling {hi}")]
    UnachievableBudget { budget: f64, beta: f64, hi: f64 },
    #[error("workload exhausted in round {round}: needed {needed} tasks, got {got}")]
    InsufficientWorkload { round: usize, needed: usize, got: usize },
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// One calibration round's record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRound {
    pub round: usize,
    pub beta: f64,
    /// Measured mean per-task total burden over the window, bytes.
    pub measured_burden: f64,
    /// measured_burden / budget.
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTrace {
    pub rounds: Vec<CalibrationRound>,
    pub converged: bool,
    pub final_beta: f64,
}

/// Solve the three-tier burden model 2 * payload * beta * (1 + beta) = budget
/// for its positive root, clamped below at `beta_lo`.
///
/// Budgets that would need a beta above `beta_hi` are unachievable under the
/// clamp and rejected.
pub fn initial_beta(
    budget: f64,
    mean_payload: f64,
    beta_lo: f64,
    beta_hi: f64,
) -> Result<f64, CalibrateError> {
    if !budget.is_finite() || budget <= 0.0 || !mean_payload.is_finite() || mean_payload <= 0.0 {
        return Err(CalibrateError::InvalidConfig(format!(
            "budget {budget} and mean payload {mean_payload} must be positive"
        )));
    }
    // positive root of beta^2 + beta - budget / (2 * payload) = 0
    let c = budget / (2.0 * mean_payload);
    let root = (-1.0 + (1.0 + 4.0 * c).sqrt()) / 2.0;
    if root > beta_hi {
        return Err(CalibrateError::UnachievableBudget {
            budget,
            beta: root,
            hi: beta_hi,
        });
    }
    Ok(root.max(beta_lo))
}

/// The proportional update beta <- clamp(beta / gamma^eta).
pub fn next_beta(beta: f64, gamma: f64, eta: f64, beta_lo: f64, beta_hi: f64) -> f64 {
    (beta / gamma.powf(eta)).clamp(beta_lo, beta_hi)
}

/// Run the calibration loop over a task stream.
///
/// `threshold_template` supplies the queue capacity, cold-start guard, and
/// update-order flag; its beta is replaced by the controller's beta each
/// round. The first `warmup_tasks` tasks fill the queues at the initial beta
/// without being measured. Rounds stop at the first |gamma - 1| <= epsilon
/// or after `max_rounds`; `final_beta` is the converged beta, or the next
/// candidate when the round budget ran out first.
pub fn calibrate(
    tasks: &[Task],
    topology: &TierTopology,
    cfg: &CalibrationConfig,
    threshold_template: &ThresholdConfig,
    warmup_tasks: usize,
    mean_payload: f64,
) -> Result<CalibrationTrace, CalibrateError> {
    cfg.validate()?;
    let mut beta = initial_beta(cfg.budget, mean_payload, cfg.beta_lo, cfg.beta_hi)?;
    let mut queues = QueueSet::new();
    let mut stream = tasks.iter();

    let route = |task: &Task,
                 queues: &mut QueueSet,
                 beta: f64|
     -> Result<crate::policy::RoutingOutcome, PolicyError> {
        let cfg = ThresholdConfig {
            beta,
            ..threshold_template.clone()
        };
        route_recserve(task, topology, queues, &cfg, false, &[])
    };

    for done in 0..warmup_tasks {
        match stream.next() {
            Some(task) => {
                route(task, &mut queues, beta)?;
            }
            None => {
                return Err(CalibrateError::InsufficientWorkload {
                    round: 0,
                    needed: warmup_tasks,
                    got: done,
                })
            }
        }
    }

    let mut rounds = Vec::new();
    let mut converged = false;
    for round in 1..=cfg.max_rounds {
        let mut total_bytes = 0u64;
        for i in 0..cfg.window {
            let task = stream.next().ok_or(CalibrateError::InsufficientWorkload {
                round,
                needed: cfg.window,
                got: i,
            })?;
            let outcome = route(task, &mut queues, beta)?;
            total_bytes += account(&outcome, task, false).total_bytes();
        }
        let measured = total_bytes as f64 / cfg.window as f64;
        let gamma = measured / cfg.budget;
        rounds.push(CalibrationRound {
            round,
            beta,
            measured_burden: measured,
            gamma,
        });
        if (gamma - 1.0).abs() <= cfg.epsilon {
            converged = true;
            break;
        }
        beta = next_beta(beta, gamma, cfg.eta, cfg.beta_lo, cfg.beta_hi);
    }

    Ok(CalibrationTrace {
        final_beta: if converged {
            rounds.last().map(|r| r.beta).unwrap_or(beta)
        } else {
            beta
        },
        rounds,
        converged,
    })
}

/// Budget corresponding to a target beta under the three-tier burden model.
pub fn budget_for_beta(beta: f64, mean_payload: f64) -> Result<f64, theory::TheoryError> {
    Ok(theory::cloudserve_comm(mean_payload) * theory::comm_ratio(beta)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::{
        generate, BetaParams, LenDist, OutputLenDist, QualityModel, SyntheticSpec,
    };
    use crate::types::TaskType;

    #[test]
    fn initial_beta_inverts_the_burden_model() {
        let beta = initial_beta(0.78, 1.0, 0.01, 0.6).unwrap();
        assert!((beta - 0.3).abs() < 1e-12);
    }

    #[test]
    fn initial_beta_clamps_tiny_budgets_to_floor() {
        let beta = initial_beta(1e-9, 1.0, 0.01, 0.6).unwrap();
        assert_eq!(beta, 0.01);
    }

    #[test]
    fn initial_beta_rejects_budget_above_clamp_ceiling() {
        // budget = 2 * payload needs beta at the golden-ratio bound 0.618...
        let err = initial_beta(2.0, 1.0, 0.01, 0.6).unwrap_err();
        assert!(matches!(err, CalibrateError::UnachievableBudget { .. }));
        // permitted when the ceiling admits it
        let beta = initial_beta(2.0, 1.0, 0.01, 0.7).unwrap();
        assert!((beta - theory::comm_beta_bound()).abs() < 1e-12);
    }

    #[test]
    fn update_rule_halves_beta_at_gamma_two_eta_one() {
        let b = next_beta(0.4, 2.0, 1.0, 0.01, 0.99);
        assert!((b - 0.2).abs() < 1e-15);
    }

    #[test]
    fn update_rule_is_identity_at_eta_zero() {
        assert_eq!(next_beta(0.37, 3.0, 0.0, 0.01, 0.6), 0.37);
    }

    #[test]
    fn update_rule_direction_and_clamp() {
        // gamma > 1 shrinks beta, gamma < 1 grows it
        assert!(next_beta(0.3, 1.5, 0.5, 0.01, 0.6) < 0.3);
        assert!(next_beta(0.3, 0.5, 0.5, 0.01, 0.6) > 0.3);
        // clamped at both ends
        assert_eq!(next_beta(0.3, 1e9, 1.0, 0.01, 0.6), 0.01);
        assert_eq!(next_beta(0.3, 1e-9, 1.0, 0.01, 0.6), 0.6);
    }

    #[test]
    fn update_rule_scale_consistency() {
        // doubling measured burden and budget leaves gamma, hence beta, fixed
        let gamma_a = 120.0 / 100.0;
        let gamma_b = 240.0 / 200.0;
        assert_eq!(
            next_beta(0.3, gamma_a, 0.5, 0.01, 0.6),
            next_beta(0.3, gamma_b, 0.5, 0.01, 0.6)
        );
    }

    fn idealized_spec(n_tasks: u64, corr: f64) -> SyntheticSpec {
        SyntheticSpec {
            n_tasks,
            task_type: TaskType::Seq2Class,
            input_len_dist: LenDist::Constant { value: 100 },
            output_len_dist: OutputLenDist::Shared(LenDist::Constant { value: 20 }),
            confidence_dist: vec![
                BetaParams { a: 2.0, b: 2.0 },
                BetaParams { a: 3.0, b: 2.0 },
                BetaParams { a: 4.0, b: 2.0 },
            ],
            length_confidence_corr: corr,
            quality_model: vec![QualityModel { q0: 0.5, q1: 0.4 }; 3],
            seed: 12,
        }
    }

    #[test]
    fn self_consistent_budget_converges_immediately() {
        let spec = idealized_spec(15_000, 0.0);
        let tasks = generate(&spec).unwrap();
        let topology = TierTopology::from_costs(&[1.0, 5.0, 20.0]);
        let payload = spec.mean_payload();
        let cfg = CalibrationConfig {
            budget: budget_for_beta(0.3, payload).unwrap(),
            eta: 0.5,
            window: 5_000,
            epsilon: 0.05,
            max_rounds: 10,
            beta_lo: 0.01,
            beta_hi: 0.6,
        };
        let template = ThresholdConfig::new(0.3).with_k(2_000);
        let trace = calibrate(&tasks, &topology, &cfg, &template, 4_000, payload).unwrap();
        assert!(trace.converged);
        assert_eq!(trace.rounds[0].round, 1);
        assert!((trace.rounds[0].beta - 0.3).abs() < 1e-12);
        assert!((trace.rounds[0].gamma - 1.0).abs() <= 0.05);
        for r in &trace.rounds {
            assert!(r.beta >= cfg.beta_lo && r.beta <= cfg.beta_hi);
            assert!((r.gamma - r.measured_burden / cfg.budget).abs() < 1e-12);
        }
    }

    #[test]
    fn insufficient_workload_is_reported() {
        let spec = idealized_spec(100, 0.0);
        let tasks = generate(&spec).unwrap();
        let topology = TierTopology::from_costs(&[1.0, 5.0, 20.0]);
        let cfg = CalibrationConfig {
            budget: 50.0,
            eta: 0.5,
            window: 500,
            epsilon: 0.05,
            max_rounds: 3,
            beta_lo: 0.01,
            beta_hi: 0.6,
        };
        let template = ThresholdConfig::new(0.3).with_k(100);
        let err = calibrate(&tasks, &topology, &cfg, &template, 0, 120.0).unwrap_err();
        assert!(matches!(err, CalibrateError::InsufficientWorkload { round: 1, .. }));
    }
}
