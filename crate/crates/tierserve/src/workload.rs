//! Task-stream provisioning: synthetic generators and JSONL trace files.
//!
//! Synthetic streams draw per-tier confidence from Beta distributions and
//! couple confidence with input length through a Gaussian copula when a
//! nonzero rank correlation is requested, preserving the Beta marginals.
//! Trace files carry one task per line in the schema documented on
//! [`load_trace`].

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta_reg, ln_beta};
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::confidence::score;
use crate::types::{Evidence, Task, TaskType, TierEvidence};

/// A length distribution over non-negative byte counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LenDist {
    Constant { value: u64 },
    Uniform { lo: u64, hi: u64 },
    #[serde(rename = "lognormal")]
    LogNormal { mu: f64, sigma: f64 },
}

impl LenDist {
    pub fn validate(&self) -> Result<(), String> {
        match self {
            LenDist::Constant { .. } => Ok(()),
            LenDist::Uniform { lo, hi } => {
                if lo > hi {
                    return Err(format!("uniform lo {lo} exceeds hi {hi}"));
                }
                Ok(())
            }
            LenDist::LogNormal { sigma, mu } => {
                if !(*sigma > 0.0) || !mu.is_finite() {
                    return Err(format!("lognormal needs finite mu and sigma > 0, got mu={mu} sigma={sigma}"));
                }
                Ok(())
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            LenDist::Constant { value } => *value as f64,
            LenDist::Uniform { lo, hi } => (*lo as f64 + *hi as f64) / 2.0,
            LenDist::LogNormal { mu, sigma } => (mu + sigma * sigma / 2.0).exp(),
        }
    }

    /// Map a standard normal draw to a length. The same latent normal feeds
    /// the copula, so the quantile transform must be monotone in `z`.
    fn from_normal(&self, z: f64) -> u64 {
        match self {
            LenDist::Constant { value } => *value,
            LenDist::Uniform { lo, hi } => {
                let u = normal_cdf(z);
                (*lo as f64 + u * (*hi - *lo) as f64).round() as u64
            }
            LenDist::LogNormal { mu, sigma } => (mu + sigma * z).exp().round() as u64,
        }
    }

    fn sample(&self, rng: &mut ChaCha12Rng) -> u64 {
        match self {
            LenDist::Constant { value } => *value,
            LenDist::Uniform { lo, hi } => {
                let u: f64 = rng.random();
                (*lo as f64 + u * (*hi - *lo) as f64).round() as u64
            }
            LenDist::LogNormal { mu, sigma } => {
                let z: f64 = rng.sample(StandardNormal);
                (mu + sigma * z).exp().round() as u64
            }
        }
    }
}

/// Output-length distributions: one shared family or one per tier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OutputLenDist {
    Shared(LenDist),
    PerTier(Vec<LenDist>),
}

impl OutputLenDist {
    fn dist_for(&self, tier_idx: usize) -> &LenDist {
        match self {
            OutputLenDist::Shared(d) => d,
            OutputLenDist::PerTier(v) => &v[tier_idx],
        }
    }

    pub fn validate(&self, n_tiers: usize) -> Result<(), String> {
        match self {
            OutputLenDist::Shared(d) => d.validate(),
            OutputLenDist::PerTier(v) => {
                if v.len() != n_tiers {
                    return Err(format!(
                        "per-tier output_len_dist has {} entries for {} tiers",
                        v.len(),
                        n_tiers
                    ));
                }
                v.iter().try_for_each(|d| d.validate())
            }
        }
    }
}

/// Beta(a, b) confidence distribution parameters for one tier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaParams {
    pub a: f64,
    pub b: f64,
}

/// Linear confidence-to-quality link: quality = clamp(q0 + q1 * c, 0, 1).
/// Seq2Class realizes it as a Bernoulli success probability; Seq2Seq uses
/// the clamped value directly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityModel {
    pub q0: f64,
    pub q1: f64,
}

impl QualityModel {
    fn quality_prob(&self, confidence: f64) -> f64 {
        (self.q0 + self.q1 * confidence).clamp(0.0, 1.0)
    }
}

/// Full description of a synthetic task stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_tasks: u64,
    pub task_type: TaskType,
    pub input_len_dist: LenDist,
    pub output_len_dist: OutputLenDist,
    /// Per-tier Beta confidence parameters; the length fixes the tier count.
    pub confidence_dist: Vec<BetaParams>,
    /// Rank correlation between input length and every tier's confidence,
    /// in [-1, 1]. Zero keeps them independent.
    #[serde(default)]
    pub length_confidence_corr: f64,
    /// Per-tier quality link, same length as `confidence_dist`.
    pub quality_model: Vec<QualityModel>,
    #[serde(default)]
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn n_tiers(&self) -> usize {
        self.confidence_dist.len()
    }

    pub fn validate(&self) -> Result<(), WorkloadError> {
        let fail = |msg: String| Err(WorkloadError::InvalidSpec(msg));
        if self.n_tasks < 1 {
            return fail("n_tasks must be >= 1".into());
        }
        if self.confidence_dist.len() < 2 {
            return fail("confidence_dist needs at least 2 tiers".into());
        }
        for (i, p) in self.confidence_dist.iter().enumerate() {
            if !(p.a > 0.0 && p.b > 0.0) {
                return fail(format!("tier {} beta params must be positive", i + 1));
            }
        }
        if self.quality_model.len() != self.confidence_dist.len() {
            return fail(format!(
                "quality_model has {} entries for {} tiers",
                self.quality_model.len(),
                self.confidence_dist.len()
            ));
        }
        if !(-1.0..=1.0).contains(&self.length_confidence_corr) {
            return fail(format!(
                "length_confidence_corr {} outside [-1, 1]",
                self.length_confidence_corr
            ));
        }
        if let Err(e) = self.input_len_dist.validate() {
            return fail(format!("input_len_dist: {e}"));
        }
        if let Err(e) = self.output_len_dist.validate(self.n_tiers()) {
            return fail(format!("output_len_dist: {e}"));
        }
        Ok(())
    }

    /// E[|x| + |y|] with |y| taken from tier 1's output distribution,
    /// matching the strict accounting mode used for theory comparisons.
    pub fn mean_payload(&self) -> f64 {
        self.input_len_dist.mean() + self.output_len_dist.dist_for(0).mean()
    }
}

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("invalid workload spec: {0}")]
    InvalidSpec(String),
    #[error("trace i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: malformed JSON: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: schema violation: {detail}")]
    Schema { line: u64, detail: String },
    #[error("line {line}: task has {found} tiers, expected {expected}")]
    InconsistentTierCount { line: u64, expected: usize, found: usize },
}

/// Standard normal CDF.
fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Inverse CDF of Beta(a, b) by Newton iteration with a bisection bracket.
///
/// Accurate to ~1e-13 in probability; the result is clamped into (0, 1).
pub(crate) fn beta_quantile(a: f64, b: f64, u: f64) -> f64 {
    debug_assert!(a > 0.0 && b > 0.0);
    if u <= 0.0 {
        return f64::MIN_POSITIVE;
    }
    if u >= 1.0 {
        return 1.0 - f64::EPSILON;
    }
    let ln_b = ln_beta(a, b);
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    let mut x = a / (a + b);
    for _ in 0..120 {
        let f = beta_reg(a, b, x) - u;
        if f.abs() < 1e-14 {
            break;
        }
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let ln_pdf = (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() - ln_b;
        let step = f / ln_pdf.exp();
        let candidate = x - step;
        x = if step.is_finite() && candidate > lo && candidate < hi {
            candidate
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo < 1e-15 {
            break;
        }
    }
    x.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON)
}

/// Generate the stream described by `spec` with an explicit seed.
///
/// Per task the generator consumes, in order: one latent normal for the
/// input length, one normal per tier for confidence, the output-length
/// draws per tier, and one uniform per tier for Seq2Class quality. The
/// stream is a pure function of (spec, seed).
pub fn generate_seeded(spec: &SyntheticSpec, seed: u64) -> Result<Vec<Task>, WorkloadError> {
    spec.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let n_tiers = spec.n_tiers();
    // Gaussian copula parameter for the requested Spearman rank correlation.
    let rho = 2.0 * (std::f64::consts::PI * spec.length_confidence_corr / 6.0).sin();
    let resid = (1.0 - rho * rho).max(0.0).sqrt();

    let mut tasks = Vec::with_capacity(spec.n_tasks as usize);
    for idx in 0..spec.n_tasks {
        let z_len: f64 = rng.sample(StandardNormal);
        let input_len = spec.input_len_dist.from_normal(z_len);

        let mut confidences = Vec::with_capacity(n_tiers);
        for params in &spec.confidence_dist {
            let eps: f64 = rng.sample(StandardNormal);
            let z = rho * z_len + resid * eps;
            confidences.push(beta_quantile(params.a, params.b, normal_cdf(z)));
        }

        let mut output_lens = Vec::with_capacity(n_tiers);
        for tier_idx in 0..n_tiers {
            output_lens.push(spec.output_len_dist.dist_for(tier_idx).sample(&mut rng));
        }

        let mut tier_evidence = Vec::with_capacity(n_tiers);
        for tier_idx in 0..n_tiers {
            let c = confidences[tier_idx];
            let p = spec.quality_model[tier_idx].quality_prob(c);
            let quality = match spec.task_type {
                TaskType::Seq2Class => {
                    let u: f64 = rng.random();
                    if u < p {
                        1.0
                    } else {
                        0.0
                    }
                }
                TaskType::Seq2Seq => p,
            };
            tier_evidence.push(TierEvidence {
                tier: tier_idx as u32 + 1,
                evidence: Evidence::Confidence(c),
                output_len: output_lens[tier_idx],
                quality,
            });
        }

        tasks.push(Task {
            task_id: format!("t{idx:08}"),
            task_type: spec.task_type,
            input_len,
            tier_evidence,
        });
    }
    Ok(tasks)
}

/// Generate the stream described by `spec` using its own seed.
pub fn generate(spec: &SyntheticSpec) -> Result<Vec<Task>, WorkloadError> {
    generate_seeded(spec, spec.seed)
}

/// One line of the JSONL trace format.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskRecord {
    task_id: String,
    task_type: TaskType,
    input_len_bytes: u64,
    tiers: Vec<TierRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TierRecord {
    tier: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    confidence: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    logits: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    token_logprobs: Option<Vec<f64>>,
    output_len_bytes: u64,
    quality: f64,
}

impl From<&Task> for TaskRecord {
    fn from(task: &Task) -> Self {
        TaskRecord {
            task_id: task.task_id.clone(),
            task_type: task.task_type,
            input_len_bytes: task.input_len,
            tiers: task
                .tier_evidence
                .iter()
                .map(|te| {
                    let (confidence, logits, token_logprobs) = match &te.evidence {
                        Evidence::Confidence(c) => (Some(*c), None, None),
                        Evidence::Logits(v) => (None, Some(v.clone()), None),
                        Evidence::TokenLogProbs(v) => (None, None, Some(v.clone())),
                    };
                    TierRecord {
                        tier: te.tier,
                        confidence,
                        logits,
                        token_logprobs,
                        output_len_bytes: te.output_len,
                        quality: te.quality,
                    }
                })
                .collect(),
        }
    }
}

impl TaskRecord {
    fn into_task(self, line: u64) -> Result<Task, WorkloadError> {
        let mut tier_evidence = Vec::with_capacity(self.tiers.len());
        for t in self.tiers {
            let evidence = match (t.confidence, t.logits, t.token_logprobs) {
                (Some(c), None, None) => Evidence::Confidence(c),
                (None, Some(v), None) => Evidence::Logits(v),
                (None, None, Some(v)) => Evidence::TokenLogProbs(v),
                _ => {
                    return Err(WorkloadError::Schema {
                        line,
                        detail: format!(
                            "tier {}: exactly one of confidence/logits/token_logprobs required",
                            t.tier
                        ),
                    })
                }
            };
            tier_evidence.push(TierEvidence {
                tier: t.tier,
                evidence,
                output_len: t.output_len_bytes,
                quality: t.quality,
            });
        }
        let task = Task {
            task_id: self.task_id,
            task_type: self.task_type,
            input_len: self.input_len_bytes,
            tier_evidence,
        };
        task.validate().map_err(|e| WorkloadError::Schema {
            line,
            detail: e.to_string(),
        })?;
        Ok(task)
    }
}

/// Serialize tasks as JSONL, one record per line.
pub fn write_trace<W: Write>(tasks: &[Task], mut writer: W) -> Result<(), WorkloadError> {
    for task in tasks {
        let record = TaskRecord::from(task);
        let json = serde_json::to_string(&record)
            .map_err(|e| WorkloadError::Io(std::io::Error::other(e)))?;
        writer.write_all(json.as_bytes())?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Write tasks to a JSONL trace file.
pub fn save_trace<P: AsRef<Path>>(tasks: &[Task], path: P) -> Result<(), WorkloadError> {
    let file = File::create(path)?;
    write_trace(tasks, std::io::BufWriter::new(file))
}

fn parse_line(line_no: u64, line: &str) -> Result<Task, WorkloadError> {
    let record: TaskRecord = serde_json::from_str(line).map_err(|e| {
        if e.classify() == serde_json::error::Category::Syntax {
            WorkloadError::Parse {
                line: line_no,
                message: e.to_string(),
            }
        } else {
            WorkloadError::Schema {
                line: line_no,
                detail: e.to_string(),
            }
        }
    })?;
    record.into_task(line_no)
}

/// Load a JSONL trace file, failing on the first malformed record.
///
/// Schema, one object per line:
/// ```json
/// {"task_id": "...", "task_type": "seq2class"|"seq2seq", "input_len_bytes": 0,
///  "tiers": [{"tier": 1, "confidence": 0.5, "output_len_bytes": 0, "quality": 1.0}]}
/// ```
/// Each tier entry carries exactly one of `confidence`, `logits`, or
/// `token_logprobs`; unknown fields are rejected; every record must have the
/// same tier count.
pub fn load_trace<P: AsRef<Path>>(path: P) -> Result<Vec<Task>, WorkloadError> {
    let file = File::open(path)?;
    let reader = BufReader::new(file);
    let mut tasks = Vec::new();
    let mut expected_tiers: Option<usize> = None;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx as u64 + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let task = parse_line(line_no, &line)?;
        match expected_tiers {
            None => expected_tiers = Some(task.tier_count()),
            Some(expected) if expected != task.tier_count() => {
                return Err(WorkloadError::InconsistentTierCount {
                    line: line_no,
                    expected,
                    found: task.tier_count(),
                });
            }
            _ => {}
        }
        tasks.push(task);
    }
    Ok(tasks)
}

/// One recorded problem found while validating a trace.
#[derive(Debug, Clone, Serialize)]
pub struct TraceViolation {
    pub line: u64,
    pub message: String,
}

/// Summary produced by [`validate_trace`]; violations are diagnostics, not
/// errors.
#[derive(Debug, Clone, Serialize, Default)]
pub struct TraceDiagnostics {
    pub io_error: Option<String>,
    pub task_count: u64,
    pub tier_count: Option<usize>,
    pub violation_count: u64,
    /// First `max_violations` problems, with line numbers.
    pub violations: Vec<TraceViolation>,
    pub confidence_min: Option<f64>,
    pub confidence_max: Option<f64>,
}

impl std::fmt::Display for TraceDiagnostics {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if let Some(err) = &self.io_error {
            return writeln!(f, "io error: {err}");
        }
        writeln!(
            f,
            "{} tasks, {} tiers, {} violations",
            self.task_count,
            self.tier_count.map_or("?".into(), |t| t.to_string()),
            self.violation_count
        )?;
        if let (Some(lo), Some(hi)) = (self.confidence_min, self.confidence_max) {
            writeln!(f, "confidence range: [{lo:.6}, {hi:.6}]")?;
        }
        for v in &self.violations {
            writeln!(f, "line {}: {}", v.line, v.message)?;
        }
        Ok(())
    }
}

/// Stream a trace file and report every problem instead of failing fast.
pub fn validate_trace<P: AsRef<Path>>(path: P, max_violations: usize) -> TraceDiagnostics {
    let mut diag = TraceDiagnostics::default();
    let file = match File::open(&path) {
        Ok(f) => f,
        Err(e) => {
            diag.io_error = Some(format!("{}: {e}", path.as_ref().display()));
            return diag;
        }
    };
    let reader = BufReader::new(file);
    let record_violation = |diag: &mut TraceDiagnostics, line: u64, message: String| {
        diag.violation_count += 1;
        if diag.violations.len() < max_violations {
            diag.violations.push(TraceViolation { line, message });
        }
    };
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx as u64 + 1;
        let line = match line {
            Ok(l) => l,
            Err(e) => {
                record_violation(&mut diag, line_no, format!("read error: {e}"));
                break;
            }
        };
        if line.trim().is_empty() {
            continue;
        }
        match parse_line(line_no, &line) {
            Ok(task) => {
                match diag.tier_count {
                    None => diag.tier_count = Some(task.tier_count()),
                    Some(expected) if expected != task.tier_count() => {
                        record_violation(
                            &mut diag,
                            line_no,
                            format!(
                                "task has {} tiers, expected {expected}",
                                task.tier_count()
                            ),
                        );
                        continue;
                    }
                    _ => {}
                }
                diag.task_count += 1;
                for te in &task.tier_evidence {
                    if let Ok(c) = score(te, task.task_type) {
                        let c = c.get();
                        diag.confidence_min =
                            Some(diag.confidence_min.map_or(c, |m| m.min(c)));
                        diag.confidence_max =
                            Some(diag.confidence_max.map_or(c, |m| m.max(c)));
                    }
                }
            }
            Err(e) => record_violation(&mut diag, line_no, e.to_string()),
        }
    }
    diag
}
