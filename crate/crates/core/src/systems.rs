//! Discrete-time data-generating systems.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::operator::{Dataset, Dims};

/// Deterministic discrete-time system `x+ = step(x, u)`, `y = output(x)`.
pub trait SystemModel: Sync {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn step(&self, x: &[f64], u: &[f64]) -> Vec<f64>;
    fn output(&self, x: &[f64]) -> Vec<f64>;

    fn dims(&self, horizon: usize) -> Dims {
        Dims {
            horizon,
            input_dim: self.input_dim(),
            state_dim: self.state_dim(),
            output_dim: self.output_dim(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VanDerPolParams {
    /// Damping.
    pub mu: f64,
    /// Sampling period in seconds.
    pub ts: f64,
}

impl Default for VanDerPolParams {
    fn default() -> Self {
        Self { mu: 1.0, ts: 0.1 }
    }
}

/// Forward-Euler discretized Van der Pol oscillator with full-state output:
///
/// ```text
/// x1+ = x1 + Ts x2
/// x2+ = x2 + Ts (mu (1 - x1^2) x2 - x1 + u)
/// ```
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VanDerPol {
    params: VanDerPolParams,
}

impl VanDerPol {
    pub fn new(params: VanDerPolParams) -> Result<Self> {
        if !(params.ts.is_finite() && params.ts > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "sampling period must be positive, got {}",
                params.ts
            )));
        }
        if !params.mu.is_finite() {
            return Err(Error::InvalidConfig("mu must be finite".into()));
        }
        Ok(Self { params })
    }

    pub fn params(&self) -> VanDerPolParams {
        self.params
    }
}

pub fn vdp_step(x: [f64; 2], u: f64, params: &VanDerPolParams) -> [f64; 2] {
    let VanDerPolParams { mu, ts } = *params;
    let [x1, x2] = x;
    [x1 + ts * x2, x2 + ts * (mu * (1.0 - x1 * x1) * x2 - x1 + u)]
}

impl SystemModel for VanDerPol {
    fn state_dim(&self) -> usize {
        2
    }
    fn input_dim(&self) -> usize {
        1
    }
    fn output_dim(&self) -> usize {
        2
    }
    fn step(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        vdp_step([x[0], x[1]], u[0], &self.params).to_vec()
    }
    fn output(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PendulumParams {
    /// Gravity over length.
    pub g_over_l: f64,
    pub damping: f64,
    pub ts: f64,
}

impl Default for PendulumParams {
    fn default() -> Self {
        Self { g_over_l: 9.81, damping: 0.5, ts: 0.05 }
    }
}

/// Euler-discretized damped pendulum with torque input; only the angle is measured.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DampedPendulum {
    params: PendulumParams,
}

impl DampedPendulum {
    pub fn new(params: PendulumParams) -> Result<Self> {
        if !(params.ts.is_finite() && params.ts > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "sampling period must be positive, got {}",
                params.ts
            )));
        }
        Ok(Self { params })
    }
}

impl SystemModel for DampedPendulum {
    fn state_dim(&self) -> usize {
        2
    }
    fn input_dim(&self) -> usize {
        1
    }
    fn output_dim(&self) -> usize {
        1
    }
    fn step(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let PendulumParams { g_over_l, damping, ts } = self.params;
        vec![
            x[0] + ts * x[1],
            x[1] + ts * (-g_over_l * x[0].sin() - damping * x[1] + u[0]),
        ]
    }
    fn output(&self, x: &[f64]) -> Vec<f64> {
        vec![x[0]]
    }
}

/// Output trajectory `(y(0), ..., y(N))` flattened step-major.
///
/// `useq` holds `m (N + 1)` values but only `u(0), ..., u(N - 1)` affect the
/// result; `u(N)` is carried so that input sequences and output trajectories
/// share the index set `0..=N`.
pub fn simulate(
    model: &dyn SystemModel,
    x0: &[f64],
    useq: &[f64],
    horizon: usize,
) -> Result<Vec<f64>> {
    let m = model.input_dim();
    check_dim(model.state_dim(), x0.len())?;
    check_dim(m * (horizon + 1), useq.len())?;
    let mut out = Vec::with_capacity(model.output_dim() * (horizon + 1));
    let mut x = x0.to_vec();
    out.extend(model.output(&x));
    for k in 0..horizon {
        x = model.step(&x, &useq[k * m..(k + 1) * m]);
        out.extend(model.output(&x));
    }
    Ok(out)
}

/// Simulates every (input, state) pair. Column `i * T_x + j` of `Y` is the
/// trajectory from `x_points[j]` under `u_points[i]`.
pub fn generate_dataset(
    model: &dyn SystemModel,
    x_points: Vec<Vec<f64>>,
    u_points: Vec<Vec<f64>>,
    horizon: usize,
) -> Result<Dataset> {
    let dims = model.dims(horizon);
    let t_x = x_points.len();
    let n_y = dims.output_len();
    for x in &x_points {
        check_dim(dims.state_dim, x.len())?;
    }
    for u in &u_points {
        check_dim(dims.input_len(), u.len())?;
    }
    let mut y = DMatrix::<f64>::zeros(n_y, u_points.len() * t_x);
    if n_y > 0 {
        y.as_mut_slice()
            .par_chunks_mut(n_y)
            .enumerate()
            .try_for_each(|(c, col)| -> Result<()> {
                let traj = simulate(model, &x_points[c % t_x], &u_points[c / t_x], horizon)?;
                col.copy_from_slice(&traj);
                Ok(())
            })?;
    }
    Dataset::new(dims, u_points, x_points, y)
}

/// Lifted training data for the single-kernel baseline, taken from one long
/// trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct LiftedData {
    /// `(x(t), u(t), ..., u(t + N))` for each start time `t`.
    pub points: Vec<Vec<f64>>,
    /// `(y(t), ..., y(t + N))` for each start time, one per column.
    pub y: DMatrix<f64>,
}

/// Drives the system from `x0` with `signal` (scalar-input systems only) and
/// cuts the run into `len - N` overlapping windows of `N + 1` samples.
pub fn lifted_trajectory_data(
    model: &dyn SystemModel,
    x0: &[f64],
    signal: &[f64],
    horizon: usize,
) -> Result<LiftedData> {
    check_dim(1, model.input_dim())?;
    check_dim(model.state_dim(), x0.len())?;
    let win = horizon + 1;
    if signal.len() < win {
        return Err(Error::InvalidConfig(format!(
            "signal of length {} is shorter than the window {win}",
            signal.len()
        )));
    }
    let count = signal.len() - win + 1;
    let p = model.output_dim();
    let mut states = Vec::with_capacity(signal.len());
    let mut x = x0.to_vec();
    states.push(x.clone());
    for u in &signal[..signal.len() - 1] {
        x = model.step(&x, std::slice::from_ref(u));
        states.push(x.clone());
    }
    let outputs: Vec<Vec<f64>> = states.iter().map(|s| model.output(s)).collect();
    let points = (0..count)
        .map(|t| states[t].iter().chain(&signal[t..t + win]).copied().collect())
        .collect();
    let y = DMatrix::from_fn(p * win, count, |r, t| outputs[t + r / p][r % p]);
    Ok(LiftedData { points, y })
}

/// Trajectory CSV: `i,j,y_0_0,y_0_1,...,y_N_{p-1}`, one row per (i, j) pair
/// in column order.
pub fn write_trajectories_csv<W: Write>(dataset: &Dataset, out: W) -> Result<()> {
    let dims = dataset.dims();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["i".to_string(), "j".to_string()];
    for k in 0..dims.steps() {
        for d in 0..dims.output_dim {
            header.push(format!("y_{k}_{d}"));
        }
    }
    w.write_record(&header)?;
    for i in 0..dataset.t_u() {
        for j in 0..dataset.t_x() {
            let mut row = vec![i.to_string(), j.to_string()];
            let col = dataset.y().column(dataset.column_index(i, j));
            row.extend(col.iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}
