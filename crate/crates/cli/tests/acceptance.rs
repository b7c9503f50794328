//! Acceptance suite. Each test prints one `[PASS]`/`[FAIL]` line for its
//! criterion before asserting it. Run with
//! `cargo test -p prkhs-cli --test acceptance -- --nocapture --test-threads 1`.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use prkhs::gram::min_eigenvalue_of;
use prkhs::metrics::ReportFile;
use prkhs::systems::{vdp_step, VanDerPol, VanDerPolParams};
use prkhs::{
    build_gram, count_standard_cost, fit_product, generate_dataset, kron_matrix, kron_vector,
    min_eigenvalue, KernelConfig, KernelFamily, LiftedKernel, Model, ProductKernelConfig,
    StandardOperator,
};
use prkhs_cli::config::ExperimentConfig;
use prkhs_cli::pipeline;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn criterion(id: u32, title: &str, ok: bool, detail: &str) {
    let tag = if ok { "PASS" } else { "FAIL" };
    println!("[{tag}] AC{id} {title}: {detail}");
    assert!(ok, "AC{id} {title} failed: {detail}");
}

fn max_abs(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn default_sigmas(family: KernelFamily) -> ProductKernelConfig {
    ProductKernelConfig::new(
        KernelConfig::new(family, 2f64.sqrt()).unwrap(),
        KernelConfig::new(family, 0.4f64.sqrt()).unwrap(),
    )
}

fn random_points(rng: &mut ChaCha8Rng, n: usize, d: usize, half: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..d).map(|_| rng.gen_range(-half..half)).collect())
        .collect()
}

#[test]
fn ac1_kernel_evaluation_counts() {
    let start = Instant::now();
    let big = count_standard_cost(43_500).unwrap();
    let mid = count_standard_cost(9_990).unwrap();
    let counting = start.elapsed();

    let cfg = ExperimentConfig::full_scale();
    let start = Instant::now();
    let data = pipeline::generate(&cfg).unwrap();
    assert_eq!(data.dataset.y().ncols(), 43_500);
    let op = pipeline::train_product(&cfg, data.dataset).unwrap();
    let fit = start.elapsed();
    let evals = op.counters().kernel_evals();

    let ok = evals == 106_600
        && big == 1_892_250_000
        && mid == 99_800_100
        && counting < Duration::from_secs(1)
        && fit < Duration::from_secs(60);
    criterion(
        1,
        "kernel-evaluation counts",
        ok,
        &format!(
            "fit_product(290,150) = {evals} evals in {:.2}s; standard(43500) = {big}; standard(9990) = {mid}",
            fit.as_secs_f64()
        ),
    );
}

#[test]
fn ac2_cross_path_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let vdp = VanDerPol::new(VanDerPolParams::default()).unwrap();
    let mut worst = 0.0f64;
    let instances = 120;
    for _ in 0..instances {
        let t_u = rng.gen_range(1..=8);
        let t_x = rng.gen_range(1..=8);
        let n = rng.gen_range(1..=4);
        let family = if rng.gen_bool(0.5) {
            KernelFamily::Gaussian
        } else {
            KernelFamily::HardyReverseMultiquadric
        };
        let cfg = default_sigmas(family);
        let u = random_points(&mut rng, t_u, n + 1, 5.0);
        let x = random_points(&mut rng, t_x, 2, 2.5);
        let ds = generate_dataset(&vdp, x, u, n).unwrap();
        let grid = ds.lifted_grid();
        let y = ds.y().clone();
        let dims = ds.dims();
        let op = fit_product(ds, cfg, 0.0).unwrap();
        let std_op = StandardOperator::fit(
            dims,
            grid,
            y,
            LiftedKernel::Product { kernel: cfg, state_dim: 2 },
            0.0,
        )
        .unwrap();
        let qu: Vec<f64> = (0..=n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let qx = vec![rng.gen_range(-2.5..2.5), rng.gen_range(-2.5..2.5)];
        let a = op.predict(&qu, &qx).unwrap();
        let b = op.predict_explicit(&qu, &qx).unwrap();
        let c = std_op.predict(&qu, &qx).unwrap();
        worst = worst.max(max_abs(&a, &b)).max(max_abs(&a, &c)).max(max_abs(&b, &c));
    }
    let elapsed = start.elapsed();
    criterion(
        2,
        "cross-path oracle equivalence",
        worst < 1e-8 && elapsed < Duration::from_secs(30),
        &format!("{instances} instances, worst max-norm gap {worst:.3e} (tol 1e-8), {:.2}s", elapsed.as_secs_f64()),
    );
}

#[test]
fn ac3_interpolation() {
    let start = Instant::now();
    let cfg = ExperimentConfig::desk();
    let data = pipeline::generate(&cfg).unwrap();
    let ds = data.dataset.clone();
    let op = pipeline::train_product(&cfg, data.dataset).unwrap();
    let mut worst = 0.0f64;
    for i in 0..ds.t_u() {
        for j in 0..ds.t_x() {
            let p = op.predict(&ds.u_points()[i], &ds.x_points()[j]).unwrap();
            let t = ds.trajectory(i, j);
            worst = worst.max(max_abs(&p, &t) / inf_norm(&t).max(f64::MIN_POSITIVE));
        }
    }
    let elapsed = start.elapsed();
    criterion(
        3,
        "interpolation of training data",
        worst < 1e-6 && elapsed < Duration::from_secs(60),
        &format!("T_u=60, T_x=20, N=10: worst relative max-norm error {worst:.3e} (tol 1e-6)"),
    );
}

#[test]
fn ac4_positive_definiteness() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let counters = prkhs::CostCounters::new();
    let pts = random_points(&mut rng, 200, 3, 5.0);
    let mut min_eigs = Vec::new();
    for k in [KernelConfig::gaussian(1.0).unwrap(), KernelConfig::hardy(1.0).unwrap()] {
        min_eigs.push(min_eigenvalue(&build_gram(&pts, &k, &counters).unwrap()));
    }
    let pd = min_eigs.iter().all(|&e| e > 0.0);

    let mut worst = 0.0f64;
    for _ in 0..50 {
        let t_u = rng.gen_range(1..=8);
        let t_x = rng.gen_range(1..=8);
        let cfg = default_sigmas(KernelFamily::HardyReverseMultiquadric);
        let ku = build_gram(&random_points(&mut rng, t_u, 5, 5.0), &cfg.ku, &counters).unwrap();
        let kx = build_gram(&random_points(&mut rng, t_x, 2, 2.5), &cfg.kx, &counters).unwrap();
        let prod = min_eigenvalue_of(&kron_matrix(ku.entries(), kx.entries()));
        worst = worst.max((prod - min_eigenvalue(&ku) * min_eigenvalue(&kx)).abs());
    }
    criterion(
        4,
        "positive definiteness",
        pd && worst < 1e-8,
        &format!(
            "200-point min eigenvalues gaussian {:.3e}, hardy {:.3e}; rank-multiplicativity gap {worst:.3e} (tol 1e-8)",
            min_eigs[0], min_eigs[1]
        ),
    );
}

#[test]
fn ac5_kronecker_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_inv = 0.0f64;
    let mut worst_mv = 0.0f64;
    for _ in 0..100 {
        let (n, m) = (rng.gen_range(1..=6), rng.gen_range(1..=6));
        // diagonally dominant, hence well conditioned
        let a = DMatrix::from_fn(n, n, |i, j| rng.gen_range(-1.0..1.0) + if i == j { n as f64 + 1.0 } else { 0.0 });
        let b = DMatrix::from_fn(m, m, |i, j| rng.gen_range(-1.0..1.0) + if i == j { m as f64 + 1.0 } else { 0.0 });
        let lhs = kron_matrix(&a, &b).try_inverse().unwrap();
        let rhs = kron_matrix(&a.clone().try_inverse().unwrap(), &b.clone().try_inverse().unwrap());
        worst_inv = worst_inv.max((lhs - rhs).amax());

        let av: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let bv: Vec<f64> = (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let lhs = kron_matrix(&a, &b) * DVector::from_vec(kron_vector(&av, &bv));
        let aa = &a * DVector::from_column_slice(&av);
        let bb = &b * DVector::from_column_slice(&bv);
        let rhs = kron_vector(aa.as_slice(), bb.as_slice());
        worst_mv = worst_mv.max(max_abs(lhs.as_slice(), &rhs));
    }
    let (a1, a2, b1, b2) = (0.7, -1.3, 2.9, 0.4);
    let expansion = kron_vector(&[a1, a2], &[b1, b2]) == vec![a1 * b1, a1 * b2, a2 * b1, a2 * b2];
    criterion(
        5,
        "Kronecker identities",
        worst_inv < 1e-10 && worst_mv < 1e-10 && expansion,
        &format!("inverse gap {worst_inv:.3e}, mixed-product gap {worst_mv:.3e} (tol 1e-10), 2-vector expansion {expansion}"),
    );
}

#[test]
fn ac6_van_der_pol_dynamics() {
    let p = VanDerPolParams { mu: 1.0, ts: 0.1 };
    let a = vdp_step([0.0, 0.0], 1.0, &p);
    let b = vdp_step([1.0, 1.0], 0.0, &p);
    let examples = (a[0] - 0.0).abs() <= 1e-15
        && (a[1] - 0.1).abs() <= 1e-15
        && (b[0] - 1.1).abs() <= 1e-15
        && (b[1] - 0.9).abs() <= 1e-15;

    // x1+ does not involve u and must agree bit-for-bit; x2+ differs by Ts*u up
    // to the rounding of two separate floating-point evaluations.
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut first_exact = true;
    let mut worst_ulps = 0.0f64;
    for _ in 0..10_000 {
        let x = [rng.gen_range(-2.5..2.5), rng.gen_range(-2.5..2.5)];
        let u = rng.gen_range(-5.0..5.0);
        let with = vdp_step(x, u, &p);
        let without = vdp_step(x, 0.0, &p);
        first_exact &= with[0].to_bits() == without[0].to_bits();
        let scale = f64::EPSILON * with[1].abs().max(without[1].abs()).max(1.0);
        worst_ulps = worst_ulps.max(((with[1] - without[1]) - p.ts * u).abs() / scale);
    }
    criterion(
        6,
        "Van der Pol dynamics",
        examples && first_exact && worst_ulps <= 2.0,
        &format!("hand examples within 1e-15: {examples}; affinity: x1 bit-exact {first_exact}, x2 within {worst_ulps:.2} ulp"),
    );
}

fn golden_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/ac7_rms_x1.json")
}

#[test]
fn ac7_prediction_accuracy() {
    let start = Instant::now();
    let mut large = Vec::new();
    let mut small = Vec::new();
    let mut first_curve = None;
    for s in 0..10u64 {
        let cfg = ExperimentConfig::desk().with_seed(1000 + 10 * s);
        let set = pipeline::fresh_validation_set(&cfg).unwrap();
        assert_eq!(set.len(), 50);
        for (t_u, t_x, out) in [(60, 20, &mut large), (15, 5, &mut small)] {
            let c = ExperimentConfig { t_u, t_x, ..cfg.clone() };
            let data = pipeline::generate(&c).unwrap();
            let model = Model::from(pipeline::train_product(&c, data.dataset).unwrap());
            let rep = pipeline::evaluate(&model, &set).unwrap();
            if s == 0 && t_u == 60 {
                first_curve = Some(rep.per_step[0].clone());
            }
            out.push(rep.dim_overall(0));
        }
    }
    let median = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        (v[4] + v[5]) / 2.0
    };
    let (med_large, med_small) = (median(&mut large), median(&mut small));

    let curve = first_curve.unwrap();
    let path = golden_path();
    let (golden_ok, golden_note) = match fs::read_to_string(&path) {
        Ok(text) => {
            let golden: Vec<f64> = serde_json::from_str(&text).unwrap();
            let worst = golden
                .iter()
                .zip(&curve)
                .map(|(g, c)| (c - g).abs() / g.abs())
                .fold(0.0f64, f64::max);
            (
                golden.len() == curve.len() && worst <= 0.05,
                format!("golden curve deviation {:.2}% (tol 5%)", worst * 100.0),
            )
        }
        Err(_) => {
            fs::create_dir_all(path.parent().unwrap()).unwrap();
            fs::write(&path, serde_json::to_string_pretty(&curve).unwrap()).unwrap();
            (true, "golden curve recorded".to_string())
        }
    };
    let elapsed = start.elapsed();
    criterion(
        7,
        "prediction accuracy",
        med_large < med_small && golden_ok && elapsed < Duration::from_secs(300),
        &format!(
            "median x1 RMS over 10 seeds: (60,20) {med_large:.4} vs (15,5) {med_small:.4}; {golden_note}; {:.1}s",
            elapsed.as_secs_f64()
        ),
    );
}

fn run_bin(args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_prkhs")).args(args).output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn report_gap(a: &ReportFile, b: &ReportFile) -> f64 {
    let mut gap = (a.overall - b.overall).abs();
    for (ra, rb) in a.per_step.iter().zip(&b.per_step) {
        gap = gap.max(max_abs(ra, rb));
    }
    if a.n_rollouts != b.n_rollouts || a.counters.kernel_evals != b.counters.kernel_evals {
        gap = f64::INFINITY;
    }
    gap
}

#[test]
fn ac8_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let cfg_path = root.join("config.json");
    let cfg = ExperimentConfig { t_u: 30, t_x: 12, ..ExperimentConfig::desk() };
    fs::write(&cfg_path, cfg.to_json()).unwrap();
    let cfg_s = cfg_path.to_str().unwrap();

    let mut reports = Vec::new();
    let mut comparisons = Vec::new();
    for threads in ["1", "4"] {
        let run = root.join(format!("t{threads}"));
        let p = |name: &str| run.join(name).to_str().unwrap().to_string();
        run_bin(&["--threads", threads, "gen-data", "--config", cfg_s, "--out", &p("data")]);
        run_bin(&["--threads", threads, "train", "--config", cfg_s, "--data", &p("data"), "--out", &p("model")]);
        run_bin(&[
            "--threads", threads, "validate", "--config", cfg_s, "--model", &p("model/model.json"), "--out", &p("val"),
        ]);
        run_bin(&["--threads", threads, "compare", "--config", cfg_s, "--out", &p("cmp")]);
        let rep: ReportFile = serde_json::from_str(&fs::read_to_string(run.join("val/report.json")).unwrap()).unwrap();
        reports.push(rep);
        comparisons.push(fs::read_to_string(run.join("cmp/comparison.csv")).unwrap());
    }

    let files = [
        "signal.csv",
        "u_windows.csv",
        "states.csv",
        "trajectories.csv",
        "standard_signal.csv",
        "lifted.csv",
        "manifest.json",
    ];
    let identical = files.iter().all(|f| {
        fs::read(root.join("t1/data").join(f)).unwrap() == fs::read(root.join("t4/data").join(f)).unwrap()
    });
    let models_identical =
        fs::read(root.join("t1/model/model.json")).unwrap() == fs::read(root.join("t4/model/model.json")).unwrap();
    let gap = report_gap(&reports[0], &reports[1]);
    let csv_same = comparisons[0] == comparisons[1];
    criterion(
        8,
        "determinism",
        identical && models_identical && gap <= 1e-12 && csv_same,
        &format!(
            "--threads 1 vs 4: data files byte-identical {identical}, models identical {models_identical}, report gap {gap:.1e} (tol 1e-12), comparison CSV identical {csv_same}"
        ),
    );
}
