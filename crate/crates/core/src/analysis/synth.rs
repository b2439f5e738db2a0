//! Seeded synthetic activations: i.i.d. standard normal values with a subset
//! of channels (columns) multiplied by an outlier scale.
//!
//! The generator is `ChaCha8Rng::seed_from_u64(seed)`. It first picks the
//! outlier channels (`round(outlier_frac * cols)` of them, at least one when
//! the fraction is positive): a uniform sample without replacement for
//! [`Placement::Random`], or a run of consecutive channels starting at a
//! uniform offset for [`Placement::Adjacent`]. It then draws the values in
//! row-major order.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Placement {
    #[default]
    Random,
    Adjacent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub rows: usize,
    pub cols: usize,
    pub outlier_frac: f64,
    pub outlier_scale: f64,
    pub placement: Placement,
    pub seed: u64,
}

impl SynthConfig {
    pub fn outlier_channels(&self) -> usize {
        let n = (self.outlier_frac * self.cols as f64).round() as usize;
        if self.outlier_frac > 0.0 {
            n.clamp(1, self.cols)
        } else {
            0
        }
    }
}

/// Generate the tensor and the sorted list of outlier channels.
pub fn generate(cfg: &SynthConfig) -> Result<(Tensor, Vec<usize>)> {
    if cfg.rows == 0 || cfg.cols == 0 {
        return Err(Error::EmptyTensor);
    }
    if !(0.0..=1.0).contains(&cfg.outlier_frac) {
        return Err(Error::InvalidArgument(format!("outlier fraction {} not in [0, 1]", cfg.outlier_frac)));
    }
    if !(cfg.outlier_scale.is_finite() && cfg.outlier_scale > 0.0) {
        return Err(Error::InvalidArgument(format!("outlier scale {} must be positive", cfg.outlier_scale)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_out = cfg.outlier_channels();
    let mut channels: Vec<usize> = match cfg.placement {
        Placement::Random => sample(&mut rng, cfg.cols, n_out).into_vec(),
        Placement::Adjacent => {
            let start = rng.gen_range(0..=cfg.cols - n_out);
            (start..start + n_out).collect()
        }
    };
    channels.sort_unstable();
    let mut gain = vec![1.0f64; cfg.cols];
    for &c in &channels {
        gain[c] = cfg.outlier_scale;
    }
    let mut data = Vec::with_capacity(cfg.rows * cfg.cols);
    for _ in 0..cfg.rows {
        for g in &gain {
            let z: f64 = StandardNormal.sample(&mut rng);
            data.push((z * g) as f32);
        }
    }
    Ok((Tensor::from_rows(cfg.rows, cfg.cols, data)?, channels))
}
