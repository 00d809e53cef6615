//! Python bindings: confidence scoring, the sliding-window quantile
//! threshold, the closed-form predictors, and the experiment runner.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use tierserve::calibrate;
use tierserve::config::parse_config;
use tierserve::theory;
use tierserve::workload;
use tierserve::{ConfidenceQueue, ThresholdConfig};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyfunction]
fn seq2class_confidence(logits: Vec<f64>) -> PyResult<f64> {
    Ok(tierserve::seq2class_confidence(&logits)
        .map_err(value_err)?
        .get())
}

#[pyfunction]
fn seq2seq_perplexity(token_logprobs: Vec<f64>) -> PyResult<f64> {
    tierserve::seq2seq_perplexity(&token_logprobs).map_err(value_err)
}

#[pyfunction]
fn seq2seq_confidence(token_logprobs: Vec<f64>) -> PyResult<f64> {
    Ok(tierserve::seq2seq_confidence(&token_logprobs)
        .map_err(value_err)?
        .get())
}

#[pyfunction]
fn completion_probs(beta: f64, n: usize) -> PyResult<Vec<f64>> {
    theory::completion_probs(beta, n).map_err(value_err)
}

#[pyfunction]
fn expected_comm(beta: f64, mean_payload: f64, costs: Vec<f64>) -> PyResult<f64> {
    let inputs = theory::TheoryInputs::new(beta, mean_payload, costs).map_err(value_err)?;
    Ok(theory::expected_comm(&inputs))
}

#[pyfunction]
fn expected_comp(beta: f64, costs: Vec<f64>) -> PyResult<f64> {
    let inputs = theory::TheoryInputs::new(beta, 1.0, costs).map_err(value_err)?;
    Ok(theory::expected_comp(&inputs))
}

#[pyfunction]
fn comm_ratio(beta: f64) -> PyResult<f64> {
    theory::comm_ratio(beta).map_err(value_err)
}

#[pyfunction]
fn comm_beta_bound() -> f64 {
    theory::comm_beta_bound()
}

#[pyfunction]
fn comp_beta_bound(costs: [f64; 3]) -> PyResult<f64> {
    theory::comp_beta_bound(costs).map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (budget, mean_payload, beta_lo=0.01, beta_hi=0.6))]
fn initial_beta(budget: f64, mean_payload: f64, beta_lo: f64, beta_hi: f64) -> PyResult<f64> {
    calibrate::initial_beta(budget, mean_payload, beta_lo, beta_hi).map_err(value_err)
}

/// Bounded FIFO of confidence scores with the interpolated beta-quantile.
#[pyclass(name = "ConfidenceQueue")]
struct PyConfidenceQueue {
    inner: ConfidenceQueue,
}

#[pymethods]
impl PyConfidenceQueue {
    #[new]
    fn new(k: usize) -> PyResult<Self> {
        if k < 1 {
            return Err(PyValueError::new_err("capacity must be >= 1"));
        }
        Ok(PyConfidenceQueue {
            inner: ConfidenceQueue::new(k),
        })
    }

    fn push(&mut self, value: f64) -> PyResult<()> {
        if !value.is_finite() {
            return Err(PyValueError::new_err("value must be finite"));
        }
        self.inner.push(value);
        Ok(())
    }

    /// Interpolated beta-quantile, or None while fewer than `min_samples`
    /// entries are present.
    #[pyo3(signature = (beta, min_samples=2))]
    fn threshold(&self, beta: f64, min_samples: usize) -> PyResult<Option<f64>> {
        let cfg = ThresholdConfig::new(beta)
            .with_k(self.inner.capacity())
            .with_min_samples(min_samples);
        cfg.validate().map_err(value_err)?;
        Ok(self.inner.threshold(&cfg).value())
    }

    fn values(&self) -> Vec<f64> {
        self.inner.iter().collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Run the experiment described by a TOML config string; returns the report
/// as a JSON string.
#[pyfunction]
fn run_experiment(config_toml: &str) -> PyResult<String> {
    let config = parse_config(config_toml).map_err(value_err)?;
    let report = tierserve::run(&config).map_err(value_err)?;
    serde_json::to_string(&report).map_err(value_err)
}

/// Run the experiment and return the method/quality/burden trade-off CSV.
#[pyfunction]
fn compare_table(config_toml: &str) -> PyResult<String> {
    let config = parse_config(config_toml).map_err(value_err)?;
    let report = tierserve::compare(&config).map_err(value_err)?;
    Ok(tierserve::report::render_compare_csv(&report))
}

/// Run the budget-calibration controller of the config's [calibrate]
/// section; returns the round trace as a JSON string.
#[pyfunction]
fn calibrate_experiment(config_toml: &str) -> PyResult<String> {
    let config = parse_config(config_toml).map_err(value_err)?;
    let trace = tierserve::run_calibration(&config).map_err(value_err)?;
    serde_json::to_string(&trace).map_err(value_err)
}

/// Generate a synthetic stream (spec as a JSON object) into a JSONL trace
/// file; returns the number of tasks written.
#[pyfunction]
#[pyo3(signature = (spec_json, path, seed=None))]
fn generate_trace(spec_json: &str, path: &str, seed: Option<u64>) -> PyResult<u64> {
    let spec: workload::SyntheticSpec = serde_json::from_str(spec_json).map_err(value_err)?;
    let tasks = match seed {
        Some(s) => workload::generate_seeded(&spec, s),
        None => workload::generate(&spec),
    }
    .map_err(value_err)?;
    workload::save_trace(&tasks, path).map_err(|e| PyIOError::new_err(e.to_string()))?;
    Ok(tasks.len() as u64)
}

/// Validate a JSONL trace file; returns diagnostics as a JSON string.
#[pyfunction]
#[pyo3(signature = (path, max_violations=20))]
fn validate_trace(path: &str, max_violations: usize) -> PyResult<String> {
    let diag = workload::validate_trace(path, max_violations);
    serde_json::to_string(&diag).map_err(value_err)
}

#[pymodule]
fn tierserve_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(seq2class_confidence, m)?)?;
    m.add_function(wrap_pyfunction!(seq2seq_perplexity, m)?)?;
    m.add_function(wrap_pyfunction!(seq2seq_confidence, m)?)?;
    m.add_function(wrap_pyfunction!(completion_probs, m)?)?;
    m.add_function(wrap_pyfunction!(expected_comm, m)?)?;
    m.add_function(wrap_pyfunction!(expected_comp, m)?)?;
    m.add_function(wrap_pyfunction!(comm_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(comm_beta_bound, m)?)?;
    m.add_function(wrap_pyfunction!(comp_beta_bound, m)?)?;
    m.add_function(wrap_pyfunction!(initial_beta, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(compare_table, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(generate_trace, m)?)?;
    m.add_function(wrap_pyfunction!(validate_trace, m)?)?;
    m.add_class::<PyConfidenceQueue>()?;
    Ok(())
}
