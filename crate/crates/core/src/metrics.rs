//! Validation metrics and cost accounting.

use std::io::Write;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kernel-evaluation and wall-clock counters for one run.
///
/// All counters only ever increase. Increments are atomic, so totals are exact
/// even when Gram assembly runs on several threads.
#[derive(Debug, Default)]
pub struct CostCounters {
    kernel_evals: AtomicU64,
    gram_build_nanos: AtomicU64,
    factorize_nanos: AtomicU64,
    predict_nanos: AtomicU64,
}

#[derive(Clone, Copy, Debug)]
pub enum Phase {
    GramBuild,
    Factorize,
    Predict,
}

impl CostCounters {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_kernel_evals(&self, n: u64) {
        self.kernel_evals.fetch_add(n, Ordering::Relaxed);
    }

    pub fn kernel_evals(&self) -> u64 {
        self.kernel_evals.load(Ordering::Relaxed)
    }

    pub fn add_time(&self, phase: Phase, elapsed: Duration) {
        let nanos = u64::try_from(elapsed.as_nanos()).unwrap_or(u64::MAX);
        let slot = match phase {
            Phase::GramBuild => &self.gram_build_nanos,
            Phase::Factorize => &self.factorize_nanos,
            Phase::Predict => &self.predict_nanos,
        };
        slot.fetch_add(nanos, Ordering::Relaxed);
    }

    /// Runs `f` and charges its wall-clock time to `phase`.
    pub fn timed<T>(&self, phase: Phase, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.add_time(phase, start.elapsed());
        out
    }

    pub fn snapshot(&self) -> CostSnapshot {
        let secs = |a: &AtomicU64| a.load(Ordering::Relaxed) as f64 * 1e-9;
        CostSnapshot {
            kernel_evals: self.kernel_evals(),
            gram_build_seconds: secs(&self.gram_build_nanos),
            factorize_seconds: secs(&self.factorize_nanos),
            predict_seconds: secs(&self.predict_nanos),
        }
    }
}

/// Plain copy of [`CostCounters`] for reporting.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostSnapshot {
    pub kernel_evals: u64,
    pub gram_build_seconds: f64,
    pub factorize_seconds: f64,
    pub predict_seconds: f64,
}

/// Number of kernel evaluations needed to build a dense Gram matrix over
/// `t` points, i.e. `t^2`.
pub fn count_standard_cost(t: u64) -> Result<u64> {
    if t == 0 {
        return Err(Error::Empty("standard cost needs at least one point"));
    }
    t.checked_mul(t)
        .ok_or_else(|| Error::Overflow(format!("{t}^2 does not fit in 64 bits")))
}

fn check_shapes(predictions: &[Vec<f64>], truths: &[Vec<f64>]) -> Result<usize> {
    if predictions.is_empty() {
        return Err(Error::Empty("no rollouts"));
    }
    if predictions.len() != truths.len() {
        return Err(Error::DimensionMismatch {
            expected: truths.len(),
            got: predictions.len(),
        });
    }
    let len = truths[0].len();
    for (p, t) in predictions.iter().zip(truths) {
        if t.len() != len {
            return Err(Error::DimensionMismatch { expected: len, got: t.len() });
        }
        if p.len() != len {
            return Err(Error::DimensionMismatch { expected: len, got: p.len() });
        }
    }
    Ok(len)
}

/// Root-mean-square error per time step for output component `dim`.
///
/// Trajectories are flattened step-major: entry `k * output_dim + dim` holds
/// component `dim` at step `k`. Entry `k` of the result is
/// `sqrt(mean_r (pred_r[k] - truth_r[k])^2)`.
pub fn rms_per_step(
    predictions: &[Vec<f64>],
    truths: &[Vec<f64>],
    dim: usize,
    output_dim: usize,
) -> Result<Vec<f64>> {
    let len = check_shapes(predictions, truths)?;
    if output_dim == 0 || len % output_dim != 0 {
        return Err(Error::InvalidConfig(format!(
            "trajectory length {len} is not a multiple of output dimension {output_dim}"
        )));
    }
    if dim >= output_dim {
        return Err(Error::DimensionMismatch { expected: output_dim, got: dim + 1 });
    }
    let steps = len / output_dim;
    let n = predictions.len() as f64;
    Ok((0..steps)
        .map(|k| {
            let idx = k * output_dim + dim;
            let mse = predictions
                .iter()
                .zip(truths)
                .map(|(p, t)| {
                    let e = p[idx] - t[idx];
                    e * e
                })
                .sum::<f64>()
                / n;
            mse.sqrt()
        })
        .collect())
}

/// Per-step RMS for every output dimension plus an overall figure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RmsReport {
    /// `per_step[d][k]`: RMS of output component `d` at step `k`.
    pub per_step: Vec<Vec<f64>>,
    /// Square root of the mean over all (step, dim) entries of the mean-square error.
    pub overall: f64,
    pub n_rollouts: usize,
}

impl RmsReport {
    pub fn from_rollouts(
        predictions: &[Vec<f64>],
        truths: &[Vec<f64>],
        output_dim: usize,
    ) -> Result<Self> {
        let per_step = (0..output_dim)
            .map(|d| rms_per_step(predictions, truths, d, output_dim))
            .collect::<Result<Vec<_>>>()?;
        let entries = per_step.iter().map(Vec::len).sum::<usize>();
        let mean_sq = per_step.iter().flatten().map(|r| r * r).sum::<f64>() / entries as f64;
        Ok(Self {
            per_step,
            overall: mean_sq.sqrt(),
            n_rollouts: predictions.len(),
        })
    }

    /// RMS over all steps of a single output component.
    pub fn dim_overall(&self, dim: usize) -> f64 {
        let row = &self.per_step[dim];
        (row.iter().map(|r| r * r).sum::<f64>() / row.len() as f64).sqrt()
    }

    /// Plot-ready CSV: `step,rms_x1,rms_x2,...`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["step".to_string()];
        header.extend((1..=self.per_step.len()).map(|d| format!("rms_x{d}")));
        w.write_record(&header)?;
        let steps = self.per_step.first().map_or(0, Vec::len);
        for k in 0..steps {
            let mut row = vec![k.to_string()];
            row.extend(self.per_step.iter().map(|col| col[k].to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// JSON report layout: the RMS report with the run's counters attached.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub per_step: Vec<Vec<f64>>,
    pub overall: f64,
    pub n_rollouts: usize,
    pub counters: CostSnapshot,
}

impl ReportFile {
    pub fn new(report: &RmsReport, counters: CostSnapshot) -> Self {
        Self {
            per_step: report.per_step.clone(),
            overall: report.overall,
            n_rollouts: report.n_rollouts,
            counters,
        }
    }
}
