//! Radial kernel functions and their product composition.
//!
//! Both families are written in terms of the squared distance scaled by
//! `1/sigma^2`:
//!
//! * Gaussian: `exp(-|z1 - z2|^2 / sigma^2)`
//! * Hardy reverse multiquadric: `(1 + |z1 - z2|^2 / sigma^2)^(-1/2)`
//!
//! Both are universal (strictly positive definite), take values in `(0, 1]`
//! and equal 1 only at zero distance.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KernelFamily {
    #[serde(rename = "gaussian")]
    Gaussian,
    #[serde(rename = "hardy_rmq")]
    HardyReverseMultiquadric,
}

/// A radial kernel with shape parameter `sigma > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawKernelConfig")]
pub struct KernelConfig {
    pub family: KernelFamily,
    pub sigma: f64,
}

#[derive(Deserialize)]
struct RawKernelConfig {
    family: KernelFamily,
    sigma: f64,
}

impl TryFrom<RawKernelConfig> for KernelConfig {
    type Error = Error;

    fn try_from(raw: RawKernelConfig) -> Result<Self> {
        KernelConfig::new(raw.family, raw.sigma)
    }
}

impl KernelConfig {
    pub fn new(family: KernelFamily, sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "kernel sigma must be a positive finite number, got {sigma}"
            )));
        }
        Ok(Self { family, sigma })
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        Self::new(KernelFamily::Gaussian, sigma)
    }

    pub fn hardy(sigma: f64) -> Result<Self> {
        Self::new(KernelFamily::HardyReverseMultiquadric, sigma)
    }

    /// Kernel value as a function of the squared distance between the arguments.
    #[inline]
    pub fn profile(&self, squared_distance: f64) -> f64 {
        let r = squared_distance / (self.sigma * self.sigma);
        match self.family {
            KernelFamily::Gaussian => (-r).exp(),
            KernelFamily::HardyReverseMultiquadric => 1.0 / (1.0 + r).sqrt(),
        }
    }

    pub fn eval(&self, z1: &[f64], z2: &[f64]) -> Result<f64> {
        check_dim(z1.len(), z2.len())?;
        Ok(self.eval_unchecked(z1, z2))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, z1: &[f64], z2: &[f64]) -> f64 {
        self.profile(squared_distance(z1, z2))
    }
}

/// `sum_i (a_i - b_i)^2`. Symmetric bit-for-bit because `(a - b)^2 == (b - a)^2`
/// in floating point.
#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

pub fn eval_kernel(cfg: &KernelConfig, z1: &[f64], z2: &[f64]) -> Result<f64> {
    cfg.eval(z1, z2)
}

/// Product kernel `k_u(u1, u2) * k_x(x1, x2)` on the input-sequence x state space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductKernelConfig {
    pub ku: KernelConfig,
    pub kx: KernelConfig,
}

impl ProductKernelConfig {
    pub fn new(ku: KernelConfig, kx: KernelConfig) -> Self {
        Self { ku, kx }
    }

    pub fn eval(&self, u1: &[f64], x1: &[f64], u2: &[f64], x2: &[f64]) -> Result<f64> {
        Ok(self.ku.eval(u1, u2)? * self.kx.eval(x1, x2)?)
    }
}

pub fn eval_product(
    cfg: &ProductKernelConfig,
    u1: &[f64],
    x1: &[f64],
    u2: &[f64],
    x2: &[f64],
) -> Result<f64> {
    cfg.eval(u1, x1, u2, x2)
}
