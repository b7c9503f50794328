//! Excitation signals, Hankel windows and initial-state sampling.
//!
//! All randomness comes from `ChaCha8Rng` seeded with `seed_from_u64`, so a
//! seed fully determines the output on every platform.

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Name of the generator recorded in manifests.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng (rand_chacha 0.3, seed_from_u64)";

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Sum-of-sinusoids excitation rescaled to `[lo, hi]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultisineConfig {
    pub length: usize,
    pub lo: f64,
    pub hi: f64,
    pub num_sinusoids: usize,
    /// Frequency band as fractions of the Nyquist frequency (0.5 cycles/sample).
    pub band: (f64, f64),
    pub seed: u64,
}

impl MultisineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.length == 0 {
            return Err(Error::InvalidConfig("multisine length must be positive".into()));
        }
        if self.num_sinusoids == 0 {
            return Err(Error::InvalidConfig("multisine needs at least one sinusoid".into()));
        }
        if !(self.lo < self.hi) {
            return Err(Error::InvalidConfig(format!(
                "multisine range must satisfy lo < hi, got [{}, {}]",
                self.lo, self.hi
            )));
        }
        let (b0, b1) = self.band;
        if !(0.0 <= b0 && b0 < b1 && b1 <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "multisine band must satisfy 0 <= lo < hi <= 1, got [{b0}, {b1}]"
            )));
        }
        Ok(())
    }
}

/// One sinusoidal component: frequency in cycles/sample, phase in radians.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sinusoid {
    pub frequency: f64,
    pub phase: f64,
}

/// Draws the components in order: for each sinusoid a frequency then a phase.
pub fn multisine_components(cfg: &MultisineConfig) -> Result<Vec<Sinusoid>> {
    cfg.validate()?;
    let mut r = rng(cfg.seed);
    let (f_lo, f_hi) = (0.5 * cfg.band.0, 0.5 * cfg.band.1);
    Ok((0..cfg.num_sinusoids)
        .map(|_| {
            let frequency = r.gen_range(f_lo..f_hi);
            let phase = r.gen_range(0.0..2.0 * PI);
            Sinusoid { frequency, phase }
        })
        .collect())
}

/// Equal-amplitude multisine, affinely rescaled so that its minimum is `lo`
/// and its maximum is `hi`.
pub fn multisine(cfg: &MultisineConfig) -> Result<Vec<f64>> {
    let comps = multisine_components(cfg)?;
    let raw: Vec<f64> = (0..cfg.length)
        .map(|t| {
            let t = t as f64;
            comps
                .iter()
                .map(|c| (2.0 * PI * c.frequency * t + c.phase).sin())
                .sum()
        })
        .collect();
    rescale(&raw, cfg.lo, cfg.hi)
}

fn rescale(raw: &[f64], lo: f64, hi: f64) -> Result<Vec<f64>> {
    let (mut imin, mut imax) = (0, 0);
    for (i, v) in raw.iter().enumerate() {
        if *v < raw[imin] {
            imin = i;
        }
        if *v > raw[imax] {
            imax = i;
        }
    }
    let (min, max) = (raw[imin], raw[imax]);
    if !(max > min) {
        return Err(Error::InvalidConfig(
            "degenerate multisine: the signal is constant, lengthen it or widen the band".into(),
        ));
    }
    let mut out: Vec<f64> = raw
        .iter()
        .map(|v| lo + (hi - lo) * ((v - min) / (max - min)))
        .collect();
    out[imin] = lo;
    out[imax] = hi;
    Ok(out)
}

/// Overlapping windows `signal[t..t + window]` for `t = 0, 1, ...`.
pub fn hankel_sequences(signal: &[f64], window: usize) -> Result<Vec<Vec<f64>>> {
    hankel_windows(signal, window, 1, None)
}

/// Windows starting at `0, stride, 2 stride, ...`, optionally limited to the
/// first `count`.
pub fn hankel_windows(
    signal: &[f64],
    window: usize,
    stride: usize,
    count: Option<usize>,
) -> Result<Vec<Vec<f64>>> {
    if window == 0 || stride == 0 {
        return Err(Error::InvalidConfig("window and stride must be positive".into()));
    }
    if window > signal.len() {
        return Err(Error::InvalidConfig(format!(
            "window {window} exceeds signal length {}",
            signal.len()
        )));
    }
    let available = (signal.len() - window) / stride + 1;
    let n = match count {
        Some(c) if c > available => {
            return Err(Error::InvalidConfig(format!(
                "requested {c} windows but the signal only holds {available}"
            )))
        }
        Some(c) => c,
        None => available,
    };
    Ok((0..n)
        .map(|k| signal[k * stride..k * stride + window].to_vec())
        .collect())
}

/// Signal length needed for `count` windows of `window` samples at `stride`.
pub fn required_length(count: usize, window: usize, stride: usize) -> usize {
    count.saturating_sub(1) * stride + window
}

/// Uniform sampling of initial states in an axis-aligned box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateSamplerConfig {
    pub count: usize,
    pub box_lo: Vec<f64>,
    pub box_hi: Vec<f64>,
    pub seed: u64,
}

const MAX_RESAMPLE_ATTEMPTS: usize = 1000;

/// `count` i.i.d. uniform states in `[box_lo, box_hi]`. A draw equal to an
/// earlier one is redrawn, at most 1000 times in total.
pub fn sample_states(cfg: &StateSamplerConfig) -> Result<Vec<Vec<f64>>> {
    if cfg.box_lo.len() != cfg.box_hi.len() {
        return Err(Error::DimensionMismatch {
            expected: cfg.box_lo.len(),
            got: cfg.box_hi.len(),
        });
    }
    if cfg.box_lo.is_empty() {
        return Err(Error::InvalidConfig("state box has no dimensions".into()));
    }
    for (lo, hi) in cfg.box_lo.iter().zip(&cfg.box_hi) {
        if !(lo <= hi) {
            return Err(Error::InvalidConfig(format!("state box bound {lo} > {hi}")));
        }
    }
    let mut r = rng(cfg.seed);
    let draw = |r: &mut ChaCha8Rng| -> Vec<f64> {
        cfg.box_lo
            .iter()
            .zip(&cfg.box_hi)
            .map(|(lo, hi)| lo + (hi - lo) * r.gen::<f64>())
            .collect()
    };
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(cfg.count);
    let mut retries = 0;
    while out.len() < cfg.count {
        let s = draw(&mut r);
        if out.contains(&s) {
            retries += 1;
            if retries > MAX_RESAMPLE_ATTEMPTS {
                return Err(Error::Sampling(format!(
                    "could not draw {} distinct states after {MAX_RESAMPLE_ATTEMPTS} retries",
                    cfg.count
                )));
            }
            continue;
        }
        out.push(s);
    }
    Ok(out)
}

/// Signal CSV: a single column headed `u`.
pub fn write_signal_csv<W: Write>(signal: &[f64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["u"])?;
    for v in signal {
        w.write_record([v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Rows of equal-length vectors with a `{prefix}_{k}` header.
pub fn write_points_csv<W: Write>(points: &[Vec<f64>], prefix: &str, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let d = points.first().map_or(0, Vec::len);
    w.write_record((0..d).map(|k| format!("{prefix}_{k}")))?;
    for p in points {
        w.write_record(p.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
