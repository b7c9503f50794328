//! File-based commands behind the `prkhs` binary.
//!
//! Data directory layout written by [`gen_data`]:
//!
//! | file                  | contents                                             |
//! |-----------------------|------------------------------------------------------|
//! | `signal.csv`          | training excitation, one column `u`                  |
//! | `u_windows.csv`       | Hankel windows, columns `u_0..u_N`                   |
//! | `states.csv`          | initial states, columns `x_0..`                      |
//! | `trajectories.csv`    | `i,j,y_0_0,...` one row per (input, state) pair      |
//! | `standard_signal.csv` | baseline excitation (trajectory mode only)           |
//! | `lifted.csv`          | baseline points `x_..,u_..,y_..` (when within cap)   |
//! | `manifest.json`       | resolved config, RNG, dimensions and file list       |

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use prkhs::metrics::ReportFile;
use prkhs::signals::{write_points_csv, write_signal_csv, RNG_ALGORITHM};
use prkhs::systems::{write_trajectories_csv, LiftedData};
use prkhs::{Dataset, Dims, Model};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::pipeline::{self, BenchReport, ComparisonReport, TrainingData};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub rng: String,
    pub dims: Dims,
    pub t_u: usize,
    pub t_x: usize,
    pub trajectories: usize,
    pub lifted_points: Option<usize>,
    pub standard_x0: Option<Vec<f64>>,
    pub files: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Approach {
    Product,
    Standard,
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    serde_json::from_reader(open(path)?)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn read_numeric_csv(path: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    let mut r = csv::Reader::from_reader(open(path)?);
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|e| CliError::Io(format!("{}: bad number {f:?}: {e}", path.display())))
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok(rows)
}

fn write_lifted_csv<W: Write>(lifted: &LiftedData, dims: Dims, out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (0..dims.state_dim).map(|k| format!("x_{k}")).collect();
    header.extend((0..dims.input_len()).map(|k| format!("u_{k}")));
    for k in 0..dims.steps() {
        header.extend((0..dims.output_dim).map(|d| format!("y_{k}_{d}")));
    }
    w.write_record(&header)?;
    for (c, z) in lifted.points.iter().enumerate() {
        let col = lifted.y.column(c);
        w.write_record(z.iter().chain(col.iter()).map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the training data files and manifest into `out_dir`.
pub fn write_data(
    out_dir: &Path,
    cfg: &ExperimentConfig,
    data: &TrainingData,
) -> Result<Manifest, CliError> {
    fs::create_dir_all(out_dir)?;
    let ds = &data.dataset;
    let dims = ds.dims();
    let mut files = vec![
        "signal.csv".to_string(),
        "u_windows.csv".into(),
        "states.csv".into(),
        "trajectories.csv".into(),
    ];
    write_signal_csv(&data.signal, create(&out_dir.join("signal.csv"))?)?;
    write_points_csv(ds.u_points(), "u", create(&out_dir.join("u_windows.csv"))?)?;
    write_points_csv(ds.x_points(), "x", create(&out_dir.join("states.csv"))?)?;
    write_trajectories_csv(ds, create(&out_dir.join("trajectories.csv"))?)?;
    if let Some(sd) = &data.standard {
        if let Some(signal) = &sd.signal {
            write_signal_csv(signal, create(&out_dir.join("standard_signal.csv"))?)?;
            files.push("standard_signal.csv".into());
        }
        write_lifted_csv(&sd.lifted, dims, create(&out_dir.join("lifted.csv"))?)?;
        files.push("lifted.csv".into());
    }
    files.push("manifest.json".into());
    let manifest = Manifest {
        config: cfg.clone(),
        rng: RNG_ALGORITHM.to_string(),
        dims,
        t_u: ds.t_u(),
        t_x: ds.t_x(),
        trajectories: ds.y().ncols(),
        lifted_points: data.standard.as_ref().map(|s| s.lifted.points.len()),
        standard_x0: data.standard.as_ref().and_then(|s| s.x0.clone()),
        files,
    };
    write_json(&out_dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

pub fn gen_data(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Manifest, CliError> {
    let data = pipeline::generate(cfg)?;
    write_data(out_dir, cfg, &data)
}

pub fn read_manifest(data_dir: &Path) -> Result<Manifest, CliError> {
    read_json(&data_dir.join("manifest.json"))
}

/// Rebuilds the product-learner dataset from a data directory.
pub fn read_dataset(data_dir: &Path) -> Result<Dataset, CliError> {
    let m = read_manifest(data_dir)?;
    let u = read_numeric_csv(&data_dir.join("u_windows.csv"))?;
    let x = read_numeric_csv(&data_dir.join("states.csv"))?;
    let rows = read_numeric_csv(&data_dir.join("trajectories.csv"))?;
    let n_y = m.dims.output_len();
    let t_x = x.len();
    let mut y = DMatrix::<f64>::zeros(n_y, u.len() * t_x);
    if rows.len() != y.ncols() {
        return Err(CliError::Io(format!(
            "trajectories.csv has {} rows, expected {}",
            rows.len(),
            y.ncols()
        )));
    }
    for row in &rows {
        if row.len() != n_y + 2 {
            return Err(CliError::Io(format!(
                "trajectories.csv row has {} fields, expected {}",
                row.len(),
                n_y + 2
            )));
        }
        let (i, j) = (row[0] as usize, row[1] as usize);
        if i >= u.len() || j >= t_x {
            return Err(CliError::Io(format!("trajectories.csv index ({i}, {j}) out of range")));
        }
        let c = i * t_x + j;
        y.column_mut(c).copy_from_slice(&row[2..]);
    }
    Ok(Dataset::new(m.dims, u, x, y)?)
}

pub fn read_lifted(data_dir: &Path) -> Result<LiftedData, CliError> {
    let m = read_manifest(data_dir)?;
    if m.lifted_points.is_none() {
        return Err(CliError::Config(format!(
            "{} has no baseline data: the matched budget exceeded standard.max_points",
            data_dir.display()
        )));
    }
    let rows = read_numeric_csv(&data_dir.join("lifted.csv"))?;
    let dims = m.dims;
    let zl = dims.lifted_len();
    let points: Vec<Vec<f64>> = rows.iter().map(|r| r[..zl].to_vec()).collect();
    let y = DMatrix::from_fn(dims.output_len(), rows.len(), |r, c| rows[c][zl + r]);
    Ok(LiftedData { points, y })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub approach: String,
    pub model: PathBuf,
    pub counters: prkhs::CostSnapshot,
}

/// Fits the chosen learner on a data directory and writes `model.json` and
/// `train_cost.json` into `out_dir`.
pub fn train(
    cfg: &ExperimentConfig,
    data_dir: &Path,
    out_dir: &Path,
    approach: Approach,
) -> Result<TrainSummary, CliError> {
    let model: Model = match approach {
        Approach::Product => pipeline::train_product(cfg, read_dataset(data_dir)?)?.into(),
        Approach::Standard => {
            let dims = read_manifest(data_dir)?.dims;
            pipeline::train_standard(cfg, dims, &read_lifted(data_dir)?)?.into()
        }
    };
    fs::create_dir_all(out_dir)?;
    let path = out_dir.join("model.json");
    let mut w = create(&path)?;
    model.save(&mut w)?;
    w.flush()?;
    let summary = TrainSummary {
        approach: model.approach().to_string(),
        model: path,
        counters: model.counters(),
    };
    write_json(&out_dir.join("train_cost.json"), &summary)?;
    Ok(summary)
}

pub fn load_model(path: &Path) -> Result<Model, CliError> {
    Ok(Model::load(open(path)?)?)
}

pub fn predict(model_path: &Path, u: &[f64], x: &[f64]) -> Result<Vec<f64>, CliError> {
    Ok(load_model(model_path)?.predict(u, x)?)
}

/// Validates a saved model on rollouts from `cfg` and writes `report.json`
/// and `rms.csv` into `out_dir`.
pub fn validate(
    model_path: &Path,
    cfg: &ExperimentConfig,
    out_dir: &Path,
) -> Result<ReportFile, CliError> {
    let model = load_model(model_path)?;
    let dims = model.dims();
    if dims.horizon != cfg.horizon {
        return Err(CliError::Config(format!(
            "model horizon {} does not match config horizon {}",
            dims.horizon, cfg.horizon
        )));
    }
    let set = pipeline::validation_set(cfg, &model)?;
    let report = pipeline::evaluate(&model, &set)?;
    fs::create_dir_all(out_dir)?;
    let mut w = create(&out_dir.join("rms.csv"))?;
    report.write_csv(&mut w)?;
    w.flush()?;
    let file = ReportFile::new(&report, model.counters());
    write_json(&out_dir.join("report.json"), &file)?;
    Ok(file)
}

pub fn compare(cfg: &ExperimentConfig, out_dir: &Path) -> Result<ComparisonReport, CliError> {
    let report = pipeline::compare(cfg)?;
    fs::create_dir_all(out_dir)?;
    write_json(&out_dir.join("comparison.json"), &report)?;
    let mut w = create(&out_dir.join("comparison.csv"))?;
    report.write_csv(&mut w)?;
    w.flush()?;
    Ok(report)
}

pub fn bench(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Result<BenchReport, CliError> {
    let report = pipeline::bench(cfg)?;
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        write_json(&dir.join("bench.json"), &report)?;
    }
    Ok(report)
}
