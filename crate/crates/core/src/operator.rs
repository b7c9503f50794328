//! Operator learners.
//!
//! [`ProductOperator`] learns `G(u)(x)` in the RKHS of the product kernel
//! `k_u(u, u') * k_x(x, x')` over a full grid of training input sequences and
//! initial states. Its Gram matrix over the grid is `K_u ⊗ K_x`, which is never
//! formed: the interpolation coefficients for a query are
//!
//! ```text
//! (K_u ⊗ K_x)^{-1} (k_u(u) ⊗ k_x(x)) = (K_u^{-1} k_u(u)) ⊗ (K_x^{-1} k_x(x))
//! ```
//!
//! so fitting costs `T_u^2 + T_x^2` kernel evaluations and each prediction
//! `T_u + T_x`. The explicit Kronecker path is kept as a test oracle.
//!
//! [`StandardOperator`] is the single-kernel baseline on the lifted space of
//! concatenated `(x, u)` vectors with a dense `T x T` Gram matrix.
//!
//! Training outputs are stored as the columns of `Y`. For the product learner
//! column `i * T_x + j` holds the trajectory for input `u_i` and state `x_j`
//! (state index fastest), which is the ordering that matches `K_u ⊗ K_x`.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::gram::{
    build_gram, common_dim, factorize, factorize_matrix, kernel_vector, kron_matrix, kron_vector,
    CholeskyFactor, GramMatrix,
};
use crate::kernels::{squared_distance, KernelConfig, ProductKernelConfig};
use crate::metrics::{CostCounters, CostSnapshot, Phase};

/// Points closer than this (Euclidean) are treated as duplicates.
pub const DUPLICATE_DISTANCE: f64 = 1e-12;

/// Default limit on `T_u * T_x` for [`ProductOperator::predict_explicit`].
pub const DEFAULT_EXPLICIT_CAP: usize = 4096;

/// Trajectory dimensions shared by a dataset and the operators fitted on it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    /// Horizon `N`; trajectories cover steps `0..=N`.
    pub horizon: usize,
    pub input_dim: usize,
    pub state_dim: usize,
    pub output_dim: usize,
}

impl Dims {
    pub fn steps(&self) -> usize {
        self.horizon + 1
    }

    /// Length of a flattened input sequence, `m (N + 1)`.
    pub fn input_len(&self) -> usize {
        self.input_dim * self.steps()
    }

    /// Length of a flattened output trajectory, `p (N + 1)`.
    pub fn output_len(&self) -> usize {
        self.output_dim * self.steps()
    }

    /// Length of a lifted `(x, u)` point.
    pub fn lifted_len(&self) -> usize {
        self.state_dim + self.input_len()
    }

    pub fn lift(&self, u: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.input_len(), u.len())?;
        check_dim(self.state_dim, x.len())?;
        Ok(x.iter().chain(u).copied().collect())
    }
}

/// Rejects point sets containing two points closer than [`DUPLICATE_DISTANCE`].
pub fn check_distinct<P: AsRef<[f64]>>(points: &[P], kind: &'static str) -> Result<()> {
    let tol = DUPLICATE_DISTANCE * DUPLICATE_DISTANCE;
    for (a, pa) in points.iter().enumerate() {
        for (b, pb) in points.iter().enumerate().skip(a + 1) {
            let d2 = squared_distance(pa.as_ref(), pb.as_ref());
            if d2 < tol {
                return Err(Error::DuplicatePoints {
                    kind,
                    first: a,
                    second: b,
                    distance: d2.sqrt(),
                });
            }
        }
    }
    Ok(())
}

/// Training data on a full grid of input sequences x initial states.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    dims: Dims,
    u_points: Vec<Vec<f64>>,
    x_points: Vec<Vec<f64>>,
    y: DMatrix<f64>,
}

impl Dataset {
    /// `y` is `p (N + 1) x (T_u T_x)` with column `i * T_x + j` holding the
    /// trajectory from state `x_j` under input `u_i`.
    pub fn new(
        dims: Dims,
        u_points: Vec<Vec<f64>>,
        x_points: Vec<Vec<f64>>,
        y: DMatrix<f64>,
    ) -> Result<Self> {
        if u_points.is_empty() {
            return Err(Error::Empty("input sequences"));
        }
        if x_points.is_empty() {
            return Err(Error::Empty("initial states"));
        }
        check_dim(dims.input_len(), common_dim(&u_points)?)?;
        check_dim(dims.state_dim, common_dim(&x_points)?)?;
        check_dim(dims.output_len(), y.nrows())?;
        check_dim(u_points.len() * x_points.len(), y.ncols())?;
        check_distinct(&u_points, "input sequence")?;
        check_distinct(&x_points, "initial state")?;
        Ok(Self { dims, u_points, x_points, y })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn u_points(&self) -> &[Vec<f64>] {
        &self.u_points
    }

    pub fn x_points(&self) -> &[Vec<f64>] {
        &self.x_points
    }

    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn t_u(&self) -> usize {
        self.u_points.len()
    }

    pub fn t_x(&self) -> usize {
        self.x_points.len()
    }

    pub fn column_index(&self, i: usize, j: usize) -> usize {
        i * self.t_x() + j
    }

    /// Observed trajectory for input `i` and state `j`.
    pub fn trajectory(&self, i: usize, j: usize) -> Vec<f64> {
        self.y.column(self.column_index(i, j)).iter().copied().collect()
    }

    /// The grid as lifted `(x_j, u_i)` points in column order.
    pub fn lifted_grid(&self) -> Vec<Vec<f64>> {
        self.u_points
            .iter()
            .flat_map(|u| {
                self.x_points
                    .iter()
                    .map(move |x| x.iter().chain(u.iter()).copied().collect())
            })
            .collect()
    }
}

/// Coefficients `g` solving `K g = k(query)` and the residual `|K g - k|_inf`.
#[derive(Clone, Debug, PartialEq)]
pub struct FundamentalSolution {
    pub g: Vec<f64>,
    pub residual: f64,
}

fn apply_outputs(y: &DMatrix<f64>, g: &[f64]) -> Result<Vec<f64>> {
    check_dim(y.ncols(), g.len())?;
    Ok((y * DVector::from_column_slice(g)).data.into())
}

fn shifted(k: &GramMatrix, jitter: f64) -> DMatrix<f64> {
    let mut m = k.entries().clone();
    for i in 0..m.nrows() {
        m[(i, i)] += jitter;
    }
    m
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Product-kernel operator fitted through the factored Kronecker structure.
#[derive(Debug)]
pub struct ProductOperator {
    dataset: Dataset,
    cfg: ProductKernelConfig,
    jitter: f64,
    ku: GramMatrix,
    kx: GramMatrix,
    fu: CholeskyFactor,
    fx: CholeskyFactor,
    explicit_cap: usize,
    counters: CostCounters,
}

pub fn fit_product(
    dataset: Dataset,
    cfg: ProductKernelConfig,
    jitter: f64,
) -> Result<ProductOperator> {
    ProductOperator::fit(dataset, cfg, jitter)
}

impl ProductOperator {
    /// Builds and factorizes `K_u` and `K_x`. Charges `T_u^2 + T_x^2` kernel
    /// evaluations.
    pub fn fit(dataset: Dataset, cfg: ProductKernelConfig, jitter: f64) -> Result<Self> {
        let counters = CostCounters::new();
        let ku = build_gram(dataset.u_points(), &cfg.ku, &counters)?;
        let kx = build_gram(dataset.x_points(), &cfg.kx, &counters)?;
        let (fu, fx) = counters.timed(Phase::Factorize, || -> Result<_> {
            Ok((factorize(&ku, jitter)?, factorize(&kx, jitter)?))
        })?;
        Ok(Self {
            dataset,
            cfg,
            jitter,
            ku,
            kx,
            fu,
            fx,
            explicit_cap: DEFAULT_EXPLICIT_CAP,
            counters,
        })
    }

    pub fn with_explicit_cap(mut self, cap: usize) -> Self {
        self.explicit_cap = cap;
        self
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn dims(&self) -> Dims {
        self.dataset.dims()
    }

    pub fn config(&self) -> &ProductKernelConfig {
        &self.cfg
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn gram_u(&self) -> &GramMatrix {
        &self.ku
    }

    pub fn gram_x(&self) -> &GramMatrix {
        &self.kx
    }

    pub fn factor_u(&self) -> &CholeskyFactor {
        &self.fu
    }

    pub fn factor_x(&self) -> &CholeskyFactor {
        &self.fx
    }

    pub fn counters(&self) -> &CostCounters {
        &self.counters
    }

    fn kernel_vectors(&self, u: &[f64], x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let dims = self.dims();
        check_dim(dims.input_len(), u.len())?;
        check_dim(dims.state_dim, x.len())?;
        let ku = kernel_vector(self.dataset.u_points(), u, &self.cfg.ku, &self.counters)?;
        let kx = kernel_vector(self.dataset.x_points(), x, &self.cfg.kx, &self.counters)?;
        Ok((ku, kx))
    }

    /// Factored coefficient pieces `K_u^{-1} k_u(u)` and `K_x^{-1} k_x(x)`.
    fn factored_coefficients(&self, ku: &[f64], kx: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        Ok((self.fu.solve(ku)?, self.fx.solve(kx)?))
    }

    /// `Y g` for a coefficient vector over the training grid.
    pub fn combine_outputs(&self, g: &[f64]) -> Result<Vec<f64>> {
        apply_outputs(self.dataset.y(), g)
    }

    /// Solves the fundamental system `(K_u ⊗ K_x) g = k_u(u) ⊗ k_x(x)`
    /// through the factored identity.
    pub fn solve_fundamental(&self, u: &[f64], x: &[f64]) -> Result<FundamentalSolution> {
        let (ku, kx) = self.kernel_vectors(u, x)?;
        let (gu, gx) = self.factored_coefficients(&ku, &kx)?;
        // (A ⊗ B)(a ⊗ b) = (A a) ⊗ (B b)
        let au: Vec<f64> = (shifted(&self.ku, self.jitter) * DVector::from_column_slice(&gu))
            .data
            .into();
        let ax: Vec<f64> = (shifted(&self.kx, self.jitter) * DVector::from_column_slice(&gx))
            .data
            .into();
        let residual = max_abs_diff(&kron_vector(&au, &ax), &kron_vector(&ku, &kx));
        Ok(FundamentalSolution { g: kron_vector(&gu, &gx), residual })
    }

    /// Predicted output trajectory for input sequence `u` from state `x`.
    /// Charges `T_u + T_x` kernel evaluations.
    pub fn predict(&self, u: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        let start = std::time::Instant::now();
        let (ku, kx) = self.kernel_vectors(u, x)?;
        let (gu, gx) = self.factored_coefficients(&ku, &kx)?;
        let out = self.combine_outputs(&kron_vector(&gu, &gx));
        self.counters.add_time(Phase::Predict, start.elapsed());
        out
    }

    /// Same prediction through the literal `K_u ⊗ K_x` system. With nonzero
    /// jitter the explicit matrix is `(K_u + jI) ⊗ (K_x + jI)` so both paths
    /// solve the same system.
    pub fn predict_explicit(&self, u: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        let t = self.dataset.t_u() * self.dataset.t_x();
        if t > self.explicit_cap {
            return Err(Error::ExplicitCapExceeded { cap: self.explicit_cap, requested: t });
        }
        let (ku, kx) = self.kernel_vectors(u, x)?;
        let big = kron_matrix(&shifted(&self.ku, self.jitter), &shifted(&self.kx, self.jitter));
        let factor = factorize_matrix(&big, 0.0)?;
        let g = factor.solve(&kron_vector(&ku, &kx))?;
        self.combine_outputs(&g)
    }
}

/// Kernel on lifted `(x, u)` points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LiftedKernel {
    /// One radial kernel on the concatenated vector.
    Single { kernel: KernelConfig },
    /// Product kernel: the first `state_dim` entries go to `kx`, the rest to `ku`.
    Product { kernel: ProductKernelConfig, state_dim: usize },
}

impl From<KernelConfig> for LiftedKernel {
    fn from(kernel: KernelConfig) -> Self {
        LiftedKernel::Single { kernel }
    }
}

impl LiftedKernel {
    #[inline]
    fn eval_unchecked(&self, z1: &[f64], z2: &[f64]) -> f64 {
        match self {
            LiftedKernel::Single { kernel } => kernel.eval_unchecked(z1, z2),
            LiftedKernel::Product { kernel, state_dim } => {
                let (x1, u1) = z1.split_at(*state_dim);
                let (x2, u2) = z2.split_at(*state_dim);
                kernel.ku.eval_unchecked(u1, u2) * kernel.kx.eval_unchecked(x1, x2)
            }
        }
    }

    fn gram(&self, points: &[Vec<f64>], counters: &CostCounters) -> Result<GramMatrix> {
        match self {
            LiftedKernel::Single { kernel } => build_gram(points, kernel, counters),
            LiftedKernel::Product { .. } => {
                common_dim(points)?;
                let t = points.len();
                let m = counters.timed(Phase::GramBuild, || {
                    DMatrix::from_fn(t, t, |i, j| self.eval_unchecked(&points[i], &points[j]))
                });
                counters.add_kernel_evals((t as u64) * (t as u64));
                GramMatrix::from_matrix(m)
            }
        }
    }

    fn vector(&self, points: &[Vec<f64>], query: &[f64], counters: &CostCounters) -> Result<Vec<f64>> {
        match self {
            LiftedKernel::Single { kernel } => kernel_vector(points, query, kernel, counters),
            LiftedKernel::Product { .. } => {
                check_dim(common_dim(points)?, query.len())?;
                counters.add_kernel_evals(points.len() as u64);
                Ok(points.iter().map(|p| self.eval_unchecked(p, query)).collect())
            }
        }
    }
}

/// Single-kernel operator on lifted `(x, u)` points with a dense Gram matrix.
#[derive(Debug)]
pub struct StandardOperator {
    dims: Dims,
    points: Vec<Vec<f64>>,
    kernel: LiftedKernel,
    jitter: f64,
    y: DMatrix<f64>,
    gram: GramMatrix,
    factor: CholeskyFactor,
    counters: CostCounters,
}

pub fn fit_standard(
    dims: Dims,
    z_points: Vec<Vec<f64>>,
    y: DMatrix<f64>,
    kernel: LiftedKernel,
    jitter: f64,
) -> Result<StandardOperator> {
    StandardOperator::fit(dims, z_points, y, kernel, jitter)
}

impl StandardOperator {
    /// Builds the full `T x T` Gram matrix (`T^2` kernel evaluations) and
    /// factorizes it.
    pub fn fit(
        dims: Dims,
        points: Vec<Vec<f64>>,
        y: DMatrix<f64>,
        kernel: LiftedKernel,
        jitter: f64,
    ) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Empty("lifted points"));
        }
        check_dim(dims.lifted_len(), common_dim(&points)?)?;
        check_dim(dims.output_len(), y.nrows())?;
        check_dim(points.len(), y.ncols())?;
        if let LiftedKernel::Product { state_dim, .. } = kernel {
            check_dim(dims.state_dim, state_dim)?;
        }
        check_distinct(&points, "lifted")?;
        let counters = CostCounters::new();
        let gram = kernel.gram(&points, &counters)?;
        let factor = counters.timed(Phase::Factorize, || factorize(&gram, jitter))?;
        Ok(Self { dims, points, kernel, jitter, y, gram, factor, counters })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn kernel(&self) -> &LiftedKernel {
        &self.kernel
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn gram(&self) -> &GramMatrix {
        &self.gram
    }

    pub fn factor(&self) -> &CholeskyFactor {
        &self.factor
    }

    pub fn counters(&self) -> &CostCounters {
        &self.counters
    }

    pub fn combine_outputs(&self, g: &[f64]) -> Result<Vec<f64>> {
        apply_outputs(&self.y, g)
    }

    pub fn solve_fundamental(&self, u: &[f64], x: &[f64]) -> Result<FundamentalSolution> {
        let z = self.dims.lift(u, x)?;
        let k = self.kernel.vector(&self.points, &z, &self.counters)?;
        let g = self.factor.solve(&k)?;
        let kg: Vec<f64> = (shifted(&self.gram, self.jitter) * DVector::from_column_slice(&g))
            .data
            .into();
        Ok(FundamentalSolution { residual: max_abs_diff(&kg, &k), g })
    }

    pub fn predict(&self, u: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        let start = std::time::Instant::now();
        let z = self.dims.lift(u, x)?;
        let k = self.kernel.vector(&self.points, &z, &self.counters)?;
        let out = self.combine_outputs(&self.factor.solve(&k)?);
        self.counters.add_time(Phase::Predict, start.elapsed());
        out
    }
}

/// Either fitted learner.
#[derive(Debug)]
pub enum Model {
    Product(ProductOperator),
    Standard(StandardOperator),
}

impl Model {
    pub fn dims(&self) -> Dims {
        match self {
            Model::Product(op) => op.dims(),
            Model::Standard(op) => op.dims(),
        }
    }

    pub fn predict(&self, u: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        match self {
            Model::Product(op) => op.predict(u, x),
            Model::Standard(op) => op.predict(u, x),
        }
    }

    pub fn solve_fundamental(&self, u: &[f64], x: &[f64]) -> Result<FundamentalSolution> {
        match self {
            Model::Product(op) => op.solve_fundamental(u, x),
            Model::Standard(op) => op.solve_fundamental(u, x),
        }
    }

    pub fn counters(&self) -> CostSnapshot {
        match self {
            Model::Product(op) => op.counters().snapshot(),
            Model::Standard(op) => op.counters().snapshot(),
        }
    }

    pub fn approach(&self) -> &'static str {
        match self {
            Model::Product(_) => "product",
            Model::Standard(_) => "standard",
        }
    }

    pub fn to_saved(&self) -> SavedModel {
        match self {
            Model::Product(op) => SavedModel::Product {
                kernel: op.cfg,
                jitter: op.jitter,
                dims: op.dims(),
                u_points: op.dataset.u_points.clone(),
                x_points: op.dataset.x_points.clone(),
                y_columns: columns(op.dataset.y()),
            },
            Model::Standard(op) => SavedModel::Standard {
                kernel: op.kernel,
                jitter: op.jitter,
                dims: op.dims,
                points: op.points.clone(),
                y_columns: columns(&op.y),
            },
        }
    }

    pub fn save<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer(out, &self.to_saved())?;
        Ok(())
    }

    /// Reads a saved model and refits it; Cholesky factors are recomputed.
    pub fn load<R: Read>(input: R) -> Result<Self> {
        let saved: SavedModel = serde_json::from_reader(input)?;
        saved.into_model()
    }
}

impl From<ProductOperator> for Model {
    fn from(op: ProductOperator) -> Self {
        Model::Product(op)
    }
}

impl From<StandardOperator> for Model {
    fn from(op: StandardOperator) -> Self {
        Model::Standard(op)
    }
}

fn columns(y: &DMatrix<f64>) -> Vec<Vec<f64>> {
    y.column_iter().map(|c| c.iter().copied().collect()).collect()
}

fn from_columns(rows: usize, cols: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    for c in cols {
        check_dim(rows, c.len())?;
    }
    Ok(DMatrix::from_fn(rows, cols.len(), |r, c| cols[c][r]))
}

/// On-disk model: configuration, training points and outputs (one trajectory
/// per entry of `y_columns`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "approach", rename_all = "snake_case")]
pub enum SavedModel {
    Product {
        kernel: ProductKernelConfig,
        jitter: f64,
        dims: Dims,
        u_points: Vec<Vec<f64>>,
        x_points: Vec<Vec<f64>>,
        y_columns: Vec<Vec<f64>>,
    },
    Standard {
        kernel: LiftedKernel,
        jitter: f64,
        dims: Dims,
        points: Vec<Vec<f64>>,
        y_columns: Vec<Vec<f64>>,
    },
}

impl SavedModel {
    pub fn into_model(self) -> Result<Model> {
        match self {
            SavedModel::Product { kernel, jitter, dims, u_points, x_points, y_columns } => {
                let y = from_columns(dims.output_len(), &y_columns)?;
                let ds = Dataset::new(dims, u_points, x_points, y)?;
                Ok(Model::Product(ProductOperator::fit(ds, kernel, jitter)?))
            }
            SavedModel::Standard { kernel, jitter, dims, points, y_columns } => {
                let y = from_columns(dims.output_len(), &y_columns)?;
                Ok(Model::Standard(StandardOperator::fit(dims, points, y, kernel, jitter)?))
            }
        }
    }
}
