//! In-memory experiment pipeline. The file-based commands in
//! [`crate::commands`] are thin wrappers around these functions.

use std::time::Instant;

use prkhs::metrics::ReportFile;
use prkhs::signals::{hankel_windows, required_length};
use prkhs::systems::{lifted_trajectory_data, LiftedData, SystemModel};
use prkhs::{
    count_standard_cost, generate_dataset, multisine, sample_states, simulate, CostSnapshot,
    Dataset, Dims, Model, ProductOperator, RmsReport, StandardOperator,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, StandardData};
use crate::error::CliError;

/// Lifted training data for the single-kernel baseline.
#[derive(Clone, Debug, PartialEq)]
pub struct StandardTrainingData {
    /// Driving signal and initial state when the data come from one trajectory.
    pub signal: Option<Vec<f64>>,
    pub x0: Option<Vec<f64>>,
    pub lifted: LiftedData,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingData {
    /// The excitation the input windows were cut from.
    pub signal: Vec<f64>,
    pub dataset: Dataset,
    /// `None` when the matched budget exceeds `standard.max_points`.
    pub standard: Option<StandardTrainingData>,
}

pub fn generate(cfg: &ExperimentConfig) -> Result<TrainingData, CliError> {
    cfg.validate()?;
    let model = cfg.system.build()?;
    let window = cfg.horizon + 1;
    let length = required_length(cfg.t_u, window, cfg.hankel_stride);
    let signal = multisine(&cfg.multisine.multisine(length, cfg.multisine.seed))?;
    let u_points = hankel_windows(&signal, window, cfg.hankel_stride, Some(cfg.t_u))?;
    let x_points = sample_states(&cfg.states.sampler(cfg.t_x, cfg.states.seed))?;
    let dataset = generate_dataset(model.as_ref(), x_points, u_points, cfg.horizon)?;
    let standard = standard_data(cfg, model.as_ref(), &dataset)?;
    Ok(TrainingData { signal, dataset, standard })
}

/// Baseline data on the same budget as the product grid (`T_u T_x` lifted
/// points), or `None` if that exceeds the configured cap.
pub fn standard_data(
    cfg: &ExperimentConfig,
    model: &dyn SystemModel,
    dataset: &Dataset,
) -> Result<Option<StandardTrainingData>, CliError> {
    let budget = cfg.standard_budget();
    if budget > cfg.standard.max_points {
        return Ok(None);
    }
    Ok(Some(match cfg.standard.data {
        StandardData::Trajectory => {
            let signal =
                multisine(&cfg.multisine.multisine(budget + cfg.horizon, cfg.standard.seed))?;
            let x0 = sample_states(&cfg.states.sampler(1, cfg.standard.seed))?.remove(0);
            let lifted = lifted_trajectory_data(model, &x0, &signal, cfg.horizon)?;
            StandardTrainingData { signal: Some(signal), x0: Some(x0), lifted }
        }
        StandardData::Grid => StandardTrainingData {
            signal: None,
            x0: None,
            lifted: LiftedData { points: dataset.lifted_grid(), y: dataset.y().clone() },
        },
    }))
}

pub fn train_product(cfg: &ExperimentConfig, dataset: Dataset) -> Result<ProductOperator, CliError> {
    Ok(ProductOperator::fit(dataset, cfg.product_kernel, cfg.jitter)?.with_explicit_cap(cfg.explicit_cap))
}

pub fn train_standard(
    cfg: &ExperimentConfig,
    dims: Dims,
    lifted: &LiftedData,
) -> Result<StandardOperator, CliError> {
    Ok(StandardOperator::fit(
        dims,
        lifted.points.clone(),
        lifted.y.clone(),
        cfg.lifted_kernel()?,
        cfg.jitter,
    )?)
}

/// Rollouts with known ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidationSet {
    pub inputs: Vec<Vec<f64>>,
    pub states: Vec<Vec<f64>>,
    pub truths: Vec<Vec<f64>>,
}

impl ValidationSet {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

fn simulate_all(
    cfg: &ExperimentConfig,
    inputs: Vec<Vec<f64>>,
    states: Vec<Vec<f64>>,
) -> Result<ValidationSet, CliError> {
    let model = cfg.system.build()?;
    let truths = inputs
        .par_iter()
        .zip(&states)
        .map(|(u, x)| simulate(model.as_ref(), x, u, cfg.horizon))
        .collect::<prkhs::Result<Vec<_>>>()?;
    Ok(ValidationSet { inputs, states, truths })
}

/// Fresh rollouts: states drawn with `validation.state_seed`, inputs cut as
/// non-overlapping windows from a multisine drawn with `validation.input_seed`.
pub fn fresh_validation_set(cfg: &ExperimentConfig) -> Result<ValidationSet, CliError> {
    let n = cfg.validation.n_rollouts;
    if n == 0 {
        return Err(CliError::Config("validation needs at least one rollout".into()));
    }
    let window = cfg.horizon + 1;
    let signal = multisine(&cfg.multisine.multisine(n * window, cfg.validation.input_seed))?;
    let inputs = hankel_windows(&signal, window, window, Some(n))?;
    let states = sample_states(&cfg.states.sampler(n, cfg.validation.state_seed))?;
    simulate_all(cfg, inputs, states)
}

/// The first `n_rollouts` training pairs of `model` (cycling if needed).
pub fn training_validation_set(
    cfg: &ExperimentConfig,
    model: &Model,
) -> Result<ValidationSet, CliError> {
    let n = cfg.validation.n_rollouts;
    if n == 0 {
        return Err(CliError::Config("validation needs at least one rollout".into()));
    }
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = match model {
        Model::Product(op) => {
            let ds = op.dataset();
            let total = ds.t_u() * ds.t_x();
            (0..n)
                .map(|r| {
                    let c = r % total;
                    (ds.u_points()[c / ds.t_x()].clone(), ds.x_points()[c % ds.t_x()].clone())
                })
                .collect()
        }
        Model::Standard(op) => {
            let split = op.dims().state_dim;
            let pts = op.points();
            (0..n)
                .map(|r| {
                    let (x, u) = pts[r % pts.len()].split_at(split);
                    (u.to_vec(), x.to_vec())
                })
                .collect()
        }
    };
    let (inputs, states) = pairs.into_iter().unzip();
    simulate_all(cfg, inputs, states)
}

pub fn validation_set(cfg: &ExperimentConfig, model: &Model) -> Result<ValidationSet, CliError> {
    if cfg.validation.from_training {
        training_validation_set(cfg, model)
    } else {
        fresh_validation_set(cfg)
    }
}

pub fn predict_all(model: &Model, set: &ValidationSet) -> Result<Vec<Vec<f64>>, CliError> {
    Ok(set
        .inputs
        .par_iter()
        .zip(&set.states)
        .map(|(u, x)| model.predict(u, x))
        .collect::<prkhs::Result<Vec<_>>>()?)
}

pub fn evaluate(model: &Model, set: &ValidationSet) -> Result<RmsReport, CliError> {
    let dims = model.dims();
    if let Some(u) = set.inputs.first() {
        if u.len() != dims.input_len() || set.states[0].len() != dims.state_dim {
            return Err(CliError::Config(format!(
                "validation rollouts do not match the model (input length {} vs {}, state dim {} vs {})",
                u.len(),
                dims.input_len(),
                set.states[0].len(),
                dims.state_dim
            )));
        }
    }
    let preds = predict_all(model, set)?;
    Ok(RmsReport::from_rollouts(&preds, &set.truths, dims.output_dim)?)
}

/// What happened to the single-kernel baseline in a comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum StandardOutcome {
    Fitted { lifted_points: usize, report: ReportFile },
    CostProjected { lifted_points: usize, projected_kernel_evals: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub product: ReportFile,
    pub standard: StandardOutcome,
}

impl ComparisonReport {
    /// Side-by-side per-step RMS: `step,product_rms_x1,...,standard_rms_x1,...`.
    /// Standard columns are left empty when the baseline was only projected.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(out);
        let dims = self.product.per_step.len();
        let mut header = vec!["step".to_string()];
        header.extend((1..=dims).map(|d| format!("product_rms_x{d}")));
        header.extend((1..=dims).map(|d| format!("standard_rms_x{d}")));
        w.write_record(&header)?;
        let steps = self.product.per_step.first().map_or(0, Vec::len);
        for k in 0..steps {
            let mut row = vec![k.to_string()];
            row.extend(self.product.per_step.iter().map(|c| c[k].to_string()));
            match &self.standard {
                StandardOutcome::Fitted { report, .. } => {
                    row.extend(report.per_step.iter().map(|c| c[k].to_string()))
                }
                StandardOutcome::CostProjected { .. } => {
                    row.extend(std::iter::repeat_n(String::new(), dims))
                }
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Fits both learners on matched budgets and validates them on one fresh
/// rollout set.
pub fn compare(cfg: &ExperimentConfig) -> Result<ComparisonReport, CliError> {
    let data = generate(cfg)?;
    let dims = data.dataset.dims();
    let set = fresh_validation_set(cfg)?;
    let product = Model::from(train_product(cfg, data.dataset)?);
    let product_report = evaluate(&product, &set)?;
    let standard = match &data.standard {
        Some(sd) => {
            let model = Model::from(train_standard(cfg, dims, &sd.lifted)?);
            let report = evaluate(&model, &set)?;
            StandardOutcome::Fitted {
                lifted_points: sd.lifted.points.len(),
                report: ReportFile::new(&report, model.counters()),
            }
        }
        None => {
            let lifted_points = cfg.standard_budget();
            StandardOutcome::CostProjected {
                lifted_points,
                projected_kernel_evals: count_standard_cost(lifted_points as u64)?,
            }
        }
    };
    Ok(ComparisonReport {
        product: ReportFile::new(&product_report, product.counters()),
        standard,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub t_u: usize,
    pub t_x: usize,
    pub lifted_points: usize,
    pub data_seconds: f64,
    /// Counters right after fitting the product learner.
    pub product_fit: CostSnapshot,
    pub queries: usize,
    pub seconds_per_query: f64,
    pub standard_projected_kernel_evals: u64,
    /// Present when the matched baseline is within `standard.max_points`.
    pub standard_fit: Option<CostSnapshot>,
}

pub fn bench(cfg: &ExperimentConfig) -> Result<BenchReport, CliError> {
    let start = Instant::now();
    let data = generate(cfg)?;
    let data_seconds = start.elapsed().as_secs_f64();
    let dims = data.dataset.dims();
    let (t_u, t_x) = (data.dataset.t_u(), data.dataset.t_x());
    let product = train_product(cfg, data.dataset)?;
    let product_fit = product.counters().snapshot();
    let set = fresh_validation_set(cfg)?;
    let model = Model::from(product);
    let start = Instant::now();
    predict_all(&model, &set)?;
    let seconds_per_query = start.elapsed().as_secs_f64() / set.len() as f64;
    let standard_fit = match &data.standard {
        Some(sd) => Some(train_standard(cfg, dims, &sd.lifted)?.counters().snapshot()),
        None => None,
    };
    Ok(BenchReport {
        t_u,
        t_x,
        lifted_points: t_u * t_x,
        data_seconds,
        product_fit,
        queries: set.len(),
        seconds_per_query,
        standard_projected_kernel_evals: count_standard_cost((t_u * t_x) as u64)?,
        standard_fit,
    })
}
