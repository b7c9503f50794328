//! Gram matrices, their Cholesky factors, and Kronecker products.

use std::io::Write;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;

use crate::error::{check_dim, Error, Result};
use crate::kernels::KernelConfig;
use crate::metrics::{CostCounters, Phase};

/// Largest matrix for which a failed factorization also reports the minimum
/// eigenvalue. Above this the eigensolve would dominate the run.
const DIAGNOSTIC_EIGEN_LIMIT: usize = 4096;

/// Symmetric matrix of pairwise kernel evaluations.
#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix {
    entries: DMatrix<f64>,
}

impl GramMatrix {
    /// Wraps an existing matrix. The matrix must be square; symmetry is the
    /// caller's responsibility.
    pub fn from_matrix(entries: DMatrix<f64>) -> Result<Self> {
        check_dim(entries.nrows(), entries.ncols())?;
        if entries.nrows() == 0 {
            return Err(Error::Empty("Gram matrix"));
        }
        Ok(Self { entries })
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.entries
    }

    /// Debug dump: row-major, one row per line.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        for row in self.entries.row_iter() {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Checks that every point has the same dimension and returns it.
pub(crate) fn common_dim<P: AsRef<[f64]>>(points: &[P]) -> Result<usize> {
    let first = points.first().ok_or(Error::Empty("point list"))?;
    let d = first.as_ref().len();
    for p in points {
        check_dim(d, p.as_ref().len())?;
    }
    Ok(d)
}

/// Builds `K[i][j] = k(points[i], points[j])`, charging `T^2` evaluations.
pub fn build_gram<P: AsRef<[f64]> + Sync>(
    points: &[P],
    cfg: &KernelConfig,
    counters: &CostCounters,
) -> Result<GramMatrix> {
    common_dim(points)?;
    let t = points.len();
    let entries = counters.timed(Phase::GramBuild, || {
        let mut m = DMatrix::<f64>::zeros(t, t);
        // column-major storage: chunk j is column j
        m.as_mut_slice()
            .par_chunks_mut(t)
            .enumerate()
            .for_each(|(j, col)| {
                let pj = points[j].as_ref();
                for (i, slot) in col.iter_mut().enumerate() {
                    *slot = cfg.eval_unchecked(points[i].as_ref(), pj);
                }
            });
        m
    });
    counters.add_kernel_evals((t as u64) * (t as u64));
    Ok(GramMatrix { entries })
}

/// Vector of kernel evaluations of `query` against every training point.
pub fn kernel_vector<P: AsRef<[f64]> + Sync>(
    points: &[P],
    query: &[f64],
    cfg: &KernelConfig,
    counters: &CostCounters,
) -> Result<Vec<f64>> {
    let d = common_dim(points)?;
    check_dim(d, query.len())?;
    let out: Vec<f64> = points
        .iter()
        .map(|p| cfg.eval_unchecked(p.as_ref(), query))
        .collect();
    counters.add_kernel_evals(points.len() as u64);
    Ok(out)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue_of(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub fn min_eigenvalue(k: &GramMatrix) -> f64 {
    min_eigenvalue_of(&k.entries)
}

/// Cholesky factor of `K + jitter * I`.
#[derive(Clone, Debug)]
pub struct CholeskyFactor {
    chol: Cholesky<f64, Dyn>,
    jitter_used: f64,
}

impl CholeskyFactor {
    pub fn size(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    pub fn jitter_used(&self) -> f64 {
        self.jitter_used
    }

    /// The lower-triangular factor `L` with `L L^T = K + jitter I`.
    pub fn lower(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    /// `(K + jitter I)^{-1} b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.size(), b.len())?;
        let x = self.chol.solve(&DVector::from_column_slice(b));
        Ok(x.data.into())
    }

    /// `(K + jitter I)^{-1} B` for a matrix right-hand side.
    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_dim(self.size(), b.nrows())?;
        Ok(self.chol.solve(b))
    }
}

pub fn factorize(k: &GramMatrix, jitter: f64) -> Result<CholeskyFactor> {
    factorize_matrix(&k.entries, jitter)
}

pub(crate) fn factorize_matrix(k: &DMatrix<f64>, jitter: f64) -> Result<CholeskyFactor> {
    if !(jitter.is_finite() && jitter >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "jitter must be a nonnegative finite number, got {jitter}"
        )));
    }
    check_dim(k.nrows(), k.ncols())?;
    let mut shifted = k.clone();
    if jitter > 0.0 {
        for i in 0..shifted.nrows() {
            shifted[(i, i)] += jitter;
        }
    }
    match Cholesky::new(shifted) {
        Some(chol) => Ok(CholeskyFactor { chol, jitter_used: jitter }),
        None => {
            let min_eigenvalue = if k.nrows() <= DIAGNOSTIC_EIGEN_LIMIT {
                min_eigenvalue_of(k)
            } else {
                f64::NAN
            };
            Err(Error::NotPositiveDefinite { jitter, min_eigenvalue })
        }
    }
}

/// Kronecker product: block `(i, j)` of the result is `a[(i, j)] * b`.
pub fn kron_matrix(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    DMatrix::from_fn(ar * br, ac * bc, |r, c| {
        a[(r / br, c / bc)] * b[(r % br, c % bc)]
    })
}

/// Kronecker product of column vectors: `out[i * b.len() + j] = a[i] * b[j]`.
pub fn kron_vector(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter()
        .flat_map(|&ai| b.iter().map(move |&bj| ai * bj))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn e1() -> f64 {
        (-1.0f64).exp()
    }

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        let a = random_matrix(rng, n, n);
        &a * a.transpose() + DMatrix::identity(n, n) * (n as f64 * 0.1)
    }

    #[test]
    fn single_point_gram() {
        let c = CostCounters::new();
        let k = build_gram(&[vec![3.0, 4.0]], &KernelConfig::gaussian(1.0).unwrap(), &c).unwrap();
        assert_eq!(k.entries(), &DMatrix::from_element(1, 1, 1.0));
        assert_eq!(c.kernel_evals(), 1);
    }

    #[test]
    fn two_point_gram() {
        let c = CostCounters::new();
        let pts = vec![vec![0.0, 0.0], vec![0.0, 1.0]];
        let k = build_gram(&pts, &KernelConfig::gaussian(1.0).unwrap(), &c).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[1.0, e1(), e1(), 1.0]);
        assert_abs_diff_eq!(k.entries(), &expected, epsilon = 1e-15);
        assert_eq!(c.kernel_evals(), 4);
    }

    #[test]
    fn gram_errors() {
        let c = CostCounters::new();
        let cfg = KernelConfig::gaussian(1.0).unwrap();
        let empty: Vec<Vec<f64>> = vec![];
        assert!(matches!(build_gram(&empty, &cfg, &c), Err(Error::Empty(_))));
        assert!(matches!(
            build_gram(&[vec![0.0], vec![0.0, 1.0]], &cfg, &c),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn gram_permutation() {
        let c = CostCounters::new();
        let cfg = KernelConfig::hardy(0.7).unwrap();
        let pts = vec![vec![0.0, 1.0], vec![2.0, -1.0], vec![0.5, 0.5], vec![-1.0, 3.0]];
        let perm = [2usize, 0, 3, 1];
        let permuted: Vec<Vec<f64>> = perm.iter().map(|&i| pts[i].clone()).collect();
        let k = build_gram(&pts, &cfg, &c).unwrap();
        let kp = build_gram(&permuted, &cfg, &c).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                assert_eq!(kp.entries()[(a, b)], k.entries()[(perm[a], perm[b])]);
            }
        }
        assert_eq!(k.entries(), &k.entries().transpose());
    }

    #[test]
    fn min_eigenvalue_examples() {
        let id = GramMatrix::from_matrix(DMatrix::identity(3, 3)).unwrap();
        assert_abs_diff_eq!(min_eigenvalue(&id), 1.0, epsilon = 1e-15);
        let k = GramMatrix::from_matrix(DMatrix::from_row_slice(2, 2, &[1.0, e1(), e1(), 1.0])).unwrap();
        assert_abs_diff_eq!(min_eigenvalue(&k), 1.0 - e1(), epsilon = 1e-14);
        assert!((min_eigenvalue(&k) - 0.6321206).abs() < 1e-7);
        let ones = GramMatrix::from_matrix(DMatrix::from_element(2, 2, 1.0)).unwrap();
        assert_abs_diff_eq!(min_eigenvalue(&ones), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn factorize_examples() {
        let id = GramMatrix::from_matrix(DMatrix::identity(3, 3)).unwrap();
        assert_eq!(factorize(&id, 0.0).unwrap().lower(), DMatrix::identity(3, 3));

        let k = GramMatrix::from_matrix(DMatrix::from_row_slice(2, 2, &[1.0, e1(), e1(), 1.0])).unwrap();
        let l = factorize(&k, 0.0).unwrap().lower();
        assert_abs_diff_eq!(l[(0, 0)], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(l[(1, 0)], e1(), epsilon = 1e-15);
        assert_abs_diff_eq!(l[(1, 1)], (1.0 - (-2.0f64).exp()).sqrt(), epsilon = 1e-15);
        assert_eq!(l[(0, 1)], 0.0);

        let ones = GramMatrix::from_matrix(DMatrix::from_element(2, 2, 1.0)).unwrap();
        match factorize(&ones, 0.0) {
            Err(Error::NotPositiveDefinite { min_eigenvalue, .. }) => {
                assert!(min_eigenvalue.abs() < 1e-12)
            }
            other => panic!("expected failure, got {other:?}"),
        }
        // jitter rescues the duplicated point
        let f = factorize(&ones, 1e-6).unwrap();
        assert_eq!(f.jitter_used(), 1e-6);
        assert!(factorize(&ones, -1.0).is_err());
    }

    #[test]
    fn solve_examples() {
        let id = factorize(&GramMatrix::from_matrix(DMatrix::identity(3, 3)).unwrap(), 0.0).unwrap();
        assert_eq!(id.solve(&[1.0, -2.0, 3.5]).unwrap(), vec![1.0, -2.0, 3.5]);
        assert!(id.solve(&[1.0]).is_err());

        let k = GramMatrix::from_matrix(DMatrix::from_row_slice(2, 2, &[1.0, e1(), e1(), 1.0])).unwrap();
        let g = factorize(&k, 0.0).unwrap().solve(&[1.0, e1()]).unwrap();
        assert_abs_diff_eq!(g[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g[1], 0.0, epsilon = 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_spd(&mut rng, 5);
        let b: Vec<f64> = (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let f = factorize_matrix(&a, 0.0).unwrap();
        let x = DVector::from_vec(f.solve(&b).unwrap());
        let r = &a * x - DVector::from_column_slice(&b);
        assert!(r.amax() < 1e-10);

        let bm = random_matrix(&mut rng, 5, 3);
        let xm = f.solve_matrix(&bm).unwrap();
        assert!((&a * xm - bm).amax() < 1e-10);
    }

    #[test]
    fn factor_recomposes_with_jitter() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_spd(&mut rng, 7);
        let f = factorize_matrix(&a, 0.25).unwrap();
        let l = f.lower();
        let recomposed = &l * l.transpose();
        let target = &a + DMatrix::identity(7, 7) * 0.25;
        assert!((recomposed - target).amax() < 1e-10 * 7.0);
    }

    #[test]
    fn kron_examples() {
        let i6 = kron_matrix(&DMatrix::identity(2, 2), &DMatrix::identity(3, 3));
        assert_eq!(i6, DMatrix::identity(6, 6));

        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let expected = DMatrix::from_row_slice(
            4,
            4,
            &[
                0.0, 1.0, 0.0, 2.0, //
                1.0, 0.0, 2.0, 0.0, //
                0.0, 3.0, 0.0, 4.0, //
                3.0, 0.0, 4.0, 0.0,
            ],
        );
        assert_eq!(kron_matrix(&a, &b), expected);

        assert_eq!(kron_vector(&[1.0, 0.0], &[1.0, 0.0]), vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(kron_vector(&[1.0, 2.0], &[3.0, 4.0]), vec![3.0, 4.0, 6.0, 8.0]);
        let (a1, a2, b1, b2) = (1.5, -2.0, 0.25, 7.0);
        assert_eq!(kron_vector(&[a1, a2], &[b1, b2]), vec![a1 * b1, a1 * b2, a2 * b1, a2 * b2]);

        let r = kron_matrix(&DMatrix::from_element(2, 3, 1.0), &DMatrix::from_element(4, 5, 1.0));
        assert_eq!(r.shape(), (8, 15));
    }

    #[test]
    fn gram_csv_dump() {
        let k = GramMatrix::from_matrix(DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0])).unwrap();
        let mut buf = Vec::new();
        k.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "1,0.5\n0.5,1\n");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn kron_mixed_product(seed in any::<u64>(), n in 1usize..4, m in 1usize..4, k in 1usize..4, l in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_matrix(&mut rng, n, m);
            let b = random_matrix(&mut rng, k, l);
            let c = random_matrix(&mut rng, m, 2);
            let d = random_matrix(&mut rng, l, 3);
            let lhs = kron_matrix(&a, &b) * kron_matrix(&c, &d);
            let rhs = kron_matrix(&(&a * &c), &(&b * &d));
            prop_assert!((lhs - rhs).amax() < 1e-10);
        }

        #[test]
        fn factorize_solve_residual(seed in any::<u64>(), n in 1usize..12, jitter in 0.0f64..0.5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_spd(&mut rng, n);
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let f = factorize_matrix(&a, jitter).unwrap();
            let x = DVector::from_vec(f.solve(&b).unwrap());
            let shifted = &a + DMatrix::identity(n, n) * jitter;
            let resid = (shifted * x - DVector::from_column_slice(&b)).amax();
            let bmax = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            prop_assert!(resid < 1e-10 * n as f64 * bmax.max(1e-300));
        }
    }
}
