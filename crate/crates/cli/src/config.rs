//! Experiment configuration: one JSON file that determines a whole run.

use std::path::Path;

use prkhs::systems::{DampedPendulum, PendulumParams, SystemModel, VanDerPol, VanDerPolParams};
use prkhs::{KernelConfig, LiftedKernel, MultisineConfig, ProductKernelConfig, StateSamplerConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum SystemConfig {
    VanDerPol(VanDerPolParams),
    DampedPendulum(PendulumParams),
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig::VanDerPol(VanDerPolParams::default())
    }
}

impl SystemConfig {
    pub fn build(&self) -> Result<Box<dyn SystemModel>, CliError> {
        Ok(match self {
            SystemConfig::VanDerPol(p) => Box::new(VanDerPol::new(*p)?),
            SystemConfig::DampedPendulum(p) => Box::new(DampedPendulum::new(*p)?),
        })
    }
}

/// Excitation used to build the training input windows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignalConfig {
    pub lo: f64,
    pub hi: f64,
    pub num_sinusoids: usize,
    pub band: (f64, f64),
    pub seed: u64,
}

impl Default for SignalConfig {
    fn default() -> Self {
        Self { lo: -5.0, hi: 5.0, num_sinusoids: 25, band: (0.0, 1.0), seed: 1 }
    }
}

impl SignalConfig {
    pub fn multisine(&self, length: usize, seed: u64) -> MultisineConfig {
        MultisineConfig {
            length,
            lo: self.lo,
            hi: self.hi,
            num_sinusoids: self.num_sinusoids,
            band: self.band,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StateBoxConfig {
    pub box_lo: Vec<f64>,
    pub box_hi: Vec<f64>,
    pub seed: u64,
}

impl Default for StateBoxConfig {
    fn default() -> Self {
        Self { box_lo: vec![-2.5, -2.5], box_hi: vec![2.5, 2.5], seed: 2 }
    }
}

impl StateBoxConfig {
    pub fn sampler(&self, count: usize, seed: u64) -> StateSamplerConfig {
        StateSamplerConfig {
            count,
            box_lo: self.box_lo.clone(),
            box_hi: self.box_hi.clone(),
            seed,
        }
    }
}

/// How the single-kernel baseline gets its lifted training points.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StandardData {
    /// Windows of one long trajectory driven by a multisine.
    Trajectory,
    /// The product learner's `(x_j, u_i)` grid.
    Grid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StandardConfig {
    pub kernel: KernelConfig,
    /// Use the product kernel on lifted points instead of `kernel`.
    pub use_product_kernel: bool,
    pub data: StandardData,
    /// Largest lifted point count that is actually fitted; larger budgets are
    /// only cost-projected.
    pub max_points: usize,
    pub seed: u64,
}

impl Default for StandardConfig {
    fn default() -> Self {
        Self {
            kernel: KernelConfig::hardy(2.0).expect("valid sigma"),
            use_product_kernel: false,
            data: StandardData::Trajectory,
            max_points: 2000,
            seed: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationConfig {
    pub n_rollouts: usize,
    pub state_seed: u64,
    pub input_seed: u64,
    /// Validate on training pairs instead of fresh ones (interpolation check).
    pub from_training: bool,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self { n_rollouts: 50, state_seed: 4, input_seed: 5, from_training: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    pub horizon: usize,
    pub t_u: usize,
    pub t_x: usize,
    /// Step between consecutive Hankel windows of the training signal.
    pub hankel_stride: usize,
    pub product_kernel: ProductKernelConfig,
    pub multisine: SignalConfig,
    pub states: StateBoxConfig,
    pub standard: StandardConfig,
    pub jitter: f64,
    pub explicit_cap: usize,
    pub validation: ValidationConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl ExperimentConfig {
    /// Van der Pol with reduced counts: `T_u = 60`, `T_x = 20`, `N = 10`.
    pub fn desk() -> Self {
        Self {
            system: SystemConfig::default(),
            horizon: 10,
            t_u: 60,
            t_x: 20,
            hankel_stride: 1,
            product_kernel: ProductKernelConfig::new(
                KernelConfig::hardy(2f64.sqrt()).expect("valid sigma"),
                KernelConfig::hardy(0.4f64.sqrt()).expect("valid sigma"),
            ),
            multisine: SignalConfig::default(),
            states: StateBoxConfig::default(),
            standard: StandardConfig::default(),
            jitter: 0.0,
            explicit_cap: prkhs::operator::DEFAULT_EXPLICIT_CAP,
            validation: ValidationConfig::default(),
        }
    }

    /// Full-size Van der Pol experiment: `T_u = 290`, `T_x = 150`.
    pub fn full_scale() -> Self {
        Self { t_u: 290, t_x: 150, ..Self::desk() }
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| {
            CliError::Config(format!("line {}, column {}: {e}", e.line(), e.column()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Reseeds every random quantity from one base seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.multisine.seed = seed;
        self.states.seed = seed.wrapping_add(1);
        self.standard.seed = seed.wrapping_add(2);
        self.validation.state_seed = seed.wrapping_add(3);
        self.validation.input_seed = seed.wrapping_add(4);
        self
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.horizon < 1 {
            return bad("horizon must be at least 1".into());
        }
        if self.t_u == 0 || self.t_x == 0 {
            return bad("t_u and t_x must be positive".into());
        }
        if self.hankel_stride == 0 {
            return bad("hankel_stride must be positive".into());
        }
        if !(self.jitter.is_finite() && self.jitter >= 0.0) {
            return bad(format!("jitter must be nonnegative, got {}", self.jitter));
        }
        let model = self.system.build()?;
        if model.input_dim() != 1 {
            return bad("only scalar-input systems are supported by the multisine generator".into());
        }
        let n = model.state_dim();
        if self.states.box_lo.len() != n || self.states.box_hi.len() != n {
            return bad(format!("state box must have {n} dimensions"));
        }
        if self.states.box_lo.iter().zip(&self.states.box_hi).any(|(l, h)| !(l < h)) {
            return bad("state box must satisfy box_lo < box_hi".into());
        }
        self.multisine.multisine(self.horizon + 1, 0).validate()?;
        Ok(())
    }

    pub fn lifted_kernel(&self) -> Result<LiftedKernel, CliError> {
        Ok(if self.standard.use_product_kernel {
            LiftedKernel::Product {
                kernel: self.product_kernel,
                state_dim: self.system.build()?.state_dim(),
            }
        } else {
            self.standard.kernel.into()
        })
    }

    /// Lifted points the baseline would use on a budget matched to the grid.
    pub fn standard_budget(&self) -> usize {
        self.t_u.saturating_mul(self.t_x)
    }
}
