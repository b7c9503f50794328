//! Learning nonlinear discrete-time system operators with product kernels.
//!
//! An operator maps an input sequence `u = (u(0), ..., u(N))` and an initial
//! state `x` to the output trajectory `y = (y(0), ..., y(N))`. The learner
//! [`ProductOperator`] interpolates training data collected on a full grid of
//! input sequences and initial states with the product kernel
//! `k_u(u, u') k_x(x, x')`. Because the Gram matrix of that grid is the
//! Kronecker product `K_u ⊗ K_x`, fitting only needs the two small Gram
//! matrices.
//!
//! ```
//! use prkhs::{fit_product, generate_dataset, KernelConfig, ProductKernelConfig};
//! use prkhs::systems::{VanDerPol, VanDerPolParams};
//!
//! let vdp = VanDerPol::new(VanDerPolParams::default()).unwrap();
//! let states = vec![vec![0.0, 1.0], vec![1.0, -0.5], vec![-1.0, 0.5]];
//! let inputs = vec![vec![1.0, -1.0, 0.5], vec![0.0, 2.0, -2.0]];
//! let data = generate_dataset(&vdp, states, inputs, 2).unwrap();
//! let cfg = ProductKernelConfig::new(
//!     KernelConfig::hardy(2f64.sqrt()).unwrap(),
//!     KernelConfig::hardy(0.4f64.sqrt()).unwrap(),
//! );
//! let op = fit_product(data, cfg, 0.0).unwrap();
//! assert_eq!(op.counters().kernel_evals(), 2 * 2 + 3 * 3);
//! let y = op.predict(&[0.5, 0.5, 0.5], &[0.2, 0.2]).unwrap();
//! assert_eq!(y.len(), 6);
//! ```

pub mod error;
pub mod gram;
pub mod kernels;
pub mod metrics;
pub mod operator;
pub mod signals;
pub mod systems;

pub use error::{Error, Result};
pub use gram::{
    build_gram, factorize, kron_matrix, kron_vector, min_eigenvalue, CholeskyFactor, GramMatrix,
};
pub use kernels::{eval_kernel, eval_product, KernelConfig, KernelFamily, ProductKernelConfig};
pub use metrics::{count_standard_cost, rms_per_step, CostCounters, CostSnapshot, RmsReport};
pub use operator::{
    fit_product, fit_standard, Dataset, Dims, FundamentalSolution, LiftedKernel, Model,
    ProductOperator, SavedModel, StandardOperator,
};
pub use signals::{
    hankel_sequences, multisine, sample_states, MultisineConfig, StateSamplerConfig,
};
pub use systems::{generate_dataset, simulate, SystemModel};
