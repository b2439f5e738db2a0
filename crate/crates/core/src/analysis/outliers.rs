use serde::{Deserialize, Serialize};

use crate::blockcodec::argmax_abs;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// 3-sigma outlier statistics. `mu` and `sigma` are the population mean and
/// standard deviation over the whole tensor; channels are the last axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierStats {
    pub mu: f64,
    pub sigma: f64,
    pub total_outliers: u64,
    pub per_channel_counts: Vec<u64>,
    /// Outlier-holding blocks that hold two or more outliers.
    pub pct_blocks_with_multiple_outliers: f64,
    /// Outliers that are the max-magnitude element of their block.
    pub pct_outliers_as_bm: f64,
}

impl OutlierStats {
    pub fn is_outlier(&self, x: f32) -> bool {
        self.sigma > 0.0 && (f64::from(x) - self.mu).abs() > 3.0 * self.sigma
    }
}

pub fn outlier_stats(t: &Tensor, block_size: usize) -> Result<OutlierStats> {
    if t.is_empty() {
        return Err(Error::EmptyTensor);
    }
    if block_size == 0 {
        return Err(Error::InvalidArgument("block size must be positive".into()));
    }
    if let Some(v) = t.data().iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(f64::from(*v)));
    }
    let n = t.len() as f64;
    let mu = t.data().iter().map(|&x| f64::from(x)).sum::<f64>() / n;
    let var = t.data().iter().map(|&x| (f64::from(x) - mu).powi(2)).sum::<f64>() / n;
    let mut stats = OutlierStats {
        mu,
        sigma: var.sqrt(),
        total_outliers: 0,
        per_channel_counts: vec![0; t.cols()],
        pct_blocks_with_multiple_outliers: 0.0,
        pct_outliers_as_bm: 0.0,
    };
    let (mut hit_blocks, mut multi_blocks, mut as_bm) = (0u64, 0u64, 0u64);
    for r in 0..t.rows() {
        for (b, blk) in t.row(r).chunks(block_size).enumerate() {
            let wide: Vec<f64> = blk.iter().map(|&x| f64::from(x)).collect();
            let bm = argmax_abs(&wide);
            let mut here = 0;
            for (i, &x) in blk.iter().enumerate() {
                if stats.is_outlier(x) {
                    here += 1;
                    stats.per_channel_counts[b * block_size + i] += 1;
                    as_bm += u64::from(i == bm);
                }
            }
            stats.total_outliers += here;
            hit_blocks += u64::from(here > 0);
            multi_blocks += u64::from(here > 1);
        }
    }
    let pct = |a: u64, b: u64| if b == 0 { 0.0 } else { 100.0 * a as f64 / b as f64 };
    stats.pct_blocks_with_multiple_outliers = pct(multi_blocks, hit_blocks);
    stats.pct_outliers_as_bm = pct(as_bm, stats.total_outliers);
    Ok(stats)
}
