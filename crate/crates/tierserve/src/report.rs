//! Report rendering. Column order and names are a stable contract:
//!
//! `run` (3 tiers):
//! `method,param,task_count,mean_quality,mean_compute_cost,comm_device,comm_edge,comm_cloud,comm_total,completion_tier_1,completion_tier_2,completion_tier_3,seed`
//!
//! For other tier counts the communication columns are `comm_tier_1..n`.
//!
//! `compare`: `method,param,quality,comm_total`
//!
//! `calibrate`: `round,beta,burden,gamma`

use crate::calibrate::CalibrationTrace;
use crate::experiment::ExperimentReport;

/// Format a float, dropping the fraction when it is integral.
fn num(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 9.0e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// One row per method, totals and fractions side by side.
pub fn render_run_csv(report: &ExperimentReport) -> String {
    let n = report.tier_count;
    let mut out = String::new();
    out.push_str("method,param,task_count,mean_quality,mean_compute_cost,");
    if n == 3 {
        out.push_str("comm_device,comm_edge,comm_cloud,comm_total,");
    } else {
        for tier in 1..=n {
            out.push_str(&format!("comm_tier_{tier},"));
        }
        out.push_str("comm_total,");
    }
    for tier in 1..=n {
        out.push_str(&format!("completion_tier_{tier},"));
    }
    out.push_str("seed\n");

    for m in &report.methods {
        out.push_str(&format!(
            "{},{},{},{},{},",
            m.label,
            m.param,
            m.task_count,
            num(m.mean_quality),
            num(m.mean_compute_cost)
        ));
        for bytes in &m.comm_per_tier {
            out.push_str(&num(*bytes));
            out.push(',');
        }
        out.push_str(&num(m.comm_total));
        out.push(',');
        for frac in &m.completion_fractions {
            out.push_str(&num(*frac));
            out.push(',');
        }
        out.push_str(&format!("{}\n", report.seed));
    }
    out
}

/// Long-format trade-off table for plotting quality against burden.
pub fn render_compare_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("method,param,quality,comm_total\n");
    for m in &report.methods {
        out.push_str(&format!(
            "{},{},{},{}\n",
            m.label,
            m.param,
            num(m.mean_quality),
            num(m.comm_total)
        ));
    }
    out
}

/// Per-round controller trace.
pub fn render_calibration_csv(trace: &CalibrationTrace) -> String {
    let mut out = String::from("round,beta,burden,gamma\n");
    for r in &trace.rounds {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.round,
            num(r.beta),
            num(r.measured_burden),
            num(r.gamma)
        ));
    }
    out
}

/// Per-beta theory table; the ratio column compares against cloud-direct
/// serving, and the computation bound is defined for three tiers.
pub fn render_theory_csv(betas: &[f64], costs: &[f64], mean_payload: f64) -> Result<String, crate::theory::TheoryError> {
    use crate::theory;

    let n = costs.len();
    let mut out = String::from("beta,");
    for tier in 1..=n {
        out.push_str(&format!("completion_tier_{tier},"));
    }
    out.push_str("comm_ratio,expected_comm,expected_comp,comm_beta_bound,comp_beta_bound\n");

    let comm_bound = theory::comm_beta_bound();
    let comp_bound = if n == 3 {
        Some(theory::comp_beta_bound([costs[0], costs[1], costs[2]])?)
    } else {
        None
    };
    for &beta in betas {
        let probs = theory::completion_probs(beta, n)?;
        let inputs = theory::TheoryInputs::new(beta, mean_payload, costs.to_vec())?;
        let comm = theory::expected_comm(&inputs);
        let ratio = comm / theory::cloudserve_comm(mean_payload);
        let comp = theory::expected_comp(&inputs);
        out.push_str(&num(beta));
        out.push(',');
        for p in probs {
            out.push_str(&num(p));
            out.push(',');
        }
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            num(ratio),
            num(comm),
            num(comp),
            num(comm_bound),
            comp_bound.map(num).unwrap_or_default()
        ));
    }
    Ok(out)
}
