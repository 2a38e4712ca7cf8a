//! Multi-trial benchmark harness.
//!
//! Each trial draws a fresh `n x r` standard-normal candidate matrix and
//! runs every configured method on that same matrix. Per-trial curves,
//! evaluation counts and wall times are collected into [`TrialRecord`]s and
//! reduced by [`aggregate`].
//!
//! Every random quantity is keyed by `(master_seed, trial)` through
//! [`StreamKey`], so the results do not depend on how trials are scheduled
//! across threads.

use std::io::Write;
use std::time::Instant;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::candidate::CandidateMatrix;
use crate::error::{Error, Result};
use crate::objective::ObjectiveKind;
use crate::selection::{Selector, StepStats};
use crate::sketch::StreamKey;

const MATRIX_STREAM: u64 = 0x4d41_5452; // "MATR"
const SELECTOR_STREAM: u64 = 0x5345_4c45; // "SELE"

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n: usize,
    pub r: usize,
    pub p_max: usize,
    pub trials: usize,
    pub master_seed: u64,
    pub methods: Vec<Selector>,
    pub objective: ObjectiveKind,
    /// Measurement noise variance. Neither objective depends on it; it is
    /// carried for the record only.
    #[serde(default = "default_noise")]
    pub noise_variance: f64,
}

fn default_noise() -> f64 {
    1.0
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.r == 0 {
            return Err(Error::InvalidParameter(format!("matrix shape {}x{} must be non-empty", self.n, self.r)));
        }
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be at least 1".into()));
        }
        if self.p_max == 0 || self.p_max > self.n {
            return Err(Error::InvalidParameter(format!(
                "p_max={} must be between 1 and n={}",
                self.p_max, self.n
            )));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidParameter("at least one method is required".into()));
        }
        for m in &self.methods {
            m.validate(self.n, self.p_max)
                .map_err(|e| Error::InvalidParameter(format!("{}: {e}", m.label())))?;
        }
        Ok(())
    }

    pub fn matrix_key(&self, trial: usize) -> StreamKey {
        StreamKey::new(self.master_seed).derive(MATRIX_STREAM).derive(trial as u64)
    }

    /// Seed handed to every randomized selector in `trial`. All methods of a
    /// trial share it.
    pub fn selector_seed(&self, trial: usize) -> u64 {
        StreamKey::new(self.master_seed).derive(SELECTOR_STREAM).derive(trial as u64).value()
    }
}

/// Uniform on `(0, 1]` from the top 53 bits.
fn open_unit(bits: u64) -> f64 {
    ((bits >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform on `[0, 1)`.
fn half_open_unit(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// `n x r` matrix of i.i.d. standard normal entries.
///
/// Entries are filled row-major in pairs by the Box-Muller transform
/// `sqrt(-2 ln u1) * (cos, sin)(2 pi u2)`, where `u1` and `u2` come from
/// consecutive 64-bit outputs of the ChaCha8 stream for `key`.
pub fn generate_candidates(n: usize, r: usize, key: StreamKey) -> Result<CandidateMatrix> {
    if n == 0 || r == 0 {
        return Err(Error::Shape(format!("need at least one row and column, got {n}x{r}")));
    }
    let total = n * r;
    let mut rng = key.rng();
    let mut data = Vec::with_capacity(total + 1);
    while data.len() < total {
        let u1 = open_unit(rng.next_u64());
        let u2 = half_open_unit(rng.next_u64());
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        data.push(radius * angle.cos());
        data.push(radius * angle.sin());
    }
    data.truncate(total);
    CandidateMatrix::from_row_major(n, r, data)
}

/// Result of one method on one trial matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub method: String,
    pub objective_curve: Vec<f64>,
    pub wall_time: f64,
    pub eval_count: u64,
    pub steps: Vec<StepStats>,
    pub final_subset: Vec<usize>,
    /// Set when the method failed on this trial; the curve is then empty.
    pub error: Option<String>,
}

impl TrialRecord {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

fn run_trial(cfg: &ExperimentConfig, trial: usize, u: &CandidateMatrix) -> Vec<TrialRecord> {
    let seed = cfg.selector_seed(trial);
    cfg.methods
        .iter()
        .map(|m| {
            let started = Instant::now();
            match m.run(u, cfg.p_max, cfg.objective, seed) {
                Ok(rep) => TrialRecord {
                    trial,
                    method: m.label(),
                    objective_curve: rep.objective_curve,
                    wall_time: rep.wall_time,
                    eval_count: rep.eval_count,
                    steps: rep.steps,
                    final_subset: rep.final_subset,
                    error: None,
                },
                Err(e) => TrialRecord {
                    trial,
                    method: m.label(),
                    objective_curve: Vec::new(),
                    wall_time: started.elapsed().as_secs_f64(),
                    eval_count: 0,
                    steps: Vec::new(),
                    final_subset: Vec::new(),
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

/// Runs every trial on a freshly generated matrix.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    run_experiment_with(cfg, |t| generate_candidates(cfg.n, cfg.r, cfg.matrix_key(t)), |_| {})
}

/// Runs every trial on the matrix returned by `matrix_for`. `on_trial` is
/// called once per finished trial, possibly from a worker thread.
///
/// Trials run in parallel on the current rayon pool; methods within a trial
/// run one after another so their timings are not contended by each other.
pub fn run_experiment_with<M, L>(cfg: &ExperimentConfig, matrix_for: M, on_trial: L) -> Result<Vec<TrialRecord>>
where
    M: Fn(usize) -> Result<CandidateMatrix> + Sync,
    L: Fn(&[TrialRecord]) + Sync,
{
    cfg.validate()?;
    let per_trial: Vec<Vec<TrialRecord>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let u = matrix_for(t)?;
            if u.rows() != cfg.n || u.cols() != cfg.r {
                return Err(Error::Shape(format!(
                    "trial {t}: matrix is {}x{}, configuration expects {}x{}",
                    u.rows(),
                    u.cols(),
                    cfg.n,
                    cfg.r
                )));
            }
            let records = run_trial(cfg, t, &u);
            on_trial(&records);
            Ok(records)
        })
        .collect::<Result<_>>()?;
    Ok(per_trial.into_iter().flatten().collect())
}

/// Statistics of one method at one sensor count across trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub k: usize,
    pub trials: usize,
    pub mean: f64,
    /// Sample standard deviation; zero for a single trial.
    pub std: f64,
    pub min: f64,
    pub max: f64,
    /// `exp(mean(ln f))`, or zero if any trial scored zero.
    pub geometric_mean: f64,
    pub mean_wall_time: f64,
    pub mean_eval_count: f64,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Per (method, k) statistics over the successful records. Rows follow the
/// order in which methods first appear in `records`, then ascending `k`.
pub fn aggregate(records: &[TrialRecord]) -> Result<Vec<SummaryRow>> {
    let ok: Vec<&TrialRecord> = records.iter().filter(|r| r.is_ok()).collect();
    if ok.is_empty() {
        return Err(Error::InvalidParameter("no successful trial records to aggregate".into()));
    }
    let mut methods: Vec<&str> = Vec::new();
    for r in &ok {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }
    let mut rows = Vec::new();
    for method in methods {
        let recs: Vec<&&TrialRecord> = ok.iter().filter(|r| r.method == method).collect();
        let len = recs.iter().map(|r| r.objective_curve.len()).min().unwrap_or(0);
        for idx in 0..len {
            let values: Vec<f64> = recs.iter().map(|r| r.objective_curve[idx]).collect();
            let m = mean(&values);
            let std = if values.len() > 1 {
                (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
            } else {
                0.0
            };
            let geometric_mean = if values.iter().all(|&v| v > 0.0) {
                mean(&values.iter().map(|v| v.ln()).collect::<Vec<_>>()).exp()
            } else {
                0.0
            };
            let times: Vec<f64> = recs.iter().map(|r| r.steps.get(idx).map_or(r.wall_time, |s| s.elapsed)).collect();
            let evals: Vec<f64> = recs
                .iter()
                .map(|r| r.steps.get(idx).map_or(r.eval_count, |s| s.eval_count) as f64)
                .collect();
            rows.push(SummaryRow {
                method: method.to_string(),
                k: idx + 1,
                trials: values.len(),
                mean: m,
                std,
                min: values.iter().cloned().fold(f64::INFINITY, f64::min),
                max: values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                geometric_mean,
                mean_wall_time: mean(&times),
                mean_eval_count: mean(&evals),
            });
        }
    }
    Ok(rows)
}

/// Writes one row per method x trial x k:
/// `method,trial,k,objective,evalCount,wallTime`.
///
/// Counts and times are cumulative up to step `k`. With `timing == false`
/// the wall-time column is written as `0`, which makes the file a pure
/// function of the configuration.
pub fn write_results_csv<W: Write>(records: &[TrialRecord], out: W, timing: bool) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["method", "trial", "k", "objective", "evalCount", "wallTime"])?;
    for rec in records.iter().filter(|r| r.is_ok()) {
        for (idx, value) in rec.objective_curve.iter().enumerate() {
            let step = rec.steps.get(idx);
            let evals = step.map_or(rec.eval_count, |s| s.eval_count);
            let time = if timing { step.map_or(rec.wall_time, |s| s.elapsed) } else { 0.0 };
            w.write_record([
                rec.method.clone(),
                rec.trial.to_string(),
                (idx + 1).to_string(),
                format!("{value:e}"),
                evals.to_string(),
                format!("{time:e}"),
            ])?;
        }
    }
    w.flush()
}

#[derive(Debug, Clone, Serialize)]
pub struct FailureEntry {
    pub trial: usize,
    pub method: String,
    pub error: String,
}

/// JSON summary: the aggregate table, an echo of the configuration and
/// seed, and any failed trials.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub config: ExperimentConfig,
    pub master_seed: u64,
    pub rows: Vec<SummaryRow>,
    pub failures: Vec<FailureEntry>,
}

pub fn summarize(cfg: &ExperimentConfig, records: &[TrialRecord], timing: bool) -> Result<Summary> {
    let mut rows = aggregate(records)?;
    if !timing {
        for row in &mut rows {
            row.mean_wall_time = 0.0;
        }
    }
    let failures = records
        .iter()
        .filter_map(|r| {
            r.error.as_ref().map(|e| FailureEntry { trial: r.trial, method: r.method.clone(), error: e.clone() })
        })
        .collect();
    Ok(Summary { config: cfg.clone(), master_seed: cfg.master_seed, rows, failures })
}
