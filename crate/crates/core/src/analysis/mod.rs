//! Quantization-error analytics.
//!
//! * [`mse_report`]: per-block squared error and the share of it carried by
//!   each block's max-magnitude element (BM) or its largest-error element.
//! * [`topk_hybrid_sse`]: top-k elements per block in E2M3, the rest in
//!   E2M1, under one shared scale.
//! * [`outlier_stats`] and [`reorder_channels`]: 3-sigma outlier statistics
//!   and the outlier-spreading channel permutation.
//! * [`synth`]: seeded Gaussian tensors with planted outlier channels.

mod outliers;
mod reorder;
pub mod synth;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blockcodec::{argmax_abs, compute_shared_exponent, encode_tensor, SharedExp};
use crate::error::{Error, Result};
use crate::format::Format;
use crate::formats::{pow2, ElementFormat};
use crate::tensor::Tensor;

pub use outliers::{outlier_stats, OutlierStats};
pub use reorder::{apply_permutation, average_counts, reorder_channels, HalfOrder, Permutation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseReport {
    pub format: String,
    pub element_count: usize,
    pub total_mse: f64,
    pub per_block_sse: Vec<f64>,
    pub bm_contribution_pct: f64,
    pub max_elem_contribution_pct: f64,
}

/// Squared errors of one block against its (zero-padded) original values.
struct BlockError {
    sse: f64,
    bm: f64,
    max: f64,
}

fn block_error(orig: &[f32], decoded: &[f64]) -> BlockError {
    let mut sse = 0.0;
    let mut max = 0.0f64;
    let mut errs = Vec::with_capacity(orig.len());
    for (&x, &q) in orig.iter().zip(decoded) {
        let e = (q - f64::from(x)).powi(2);
        sse += e;
        max = max.max(e);
        errs.push(e);
    }
    let wide: Vec<f64> = orig.iter().map(|&x| f64::from(x)).collect();
    BlockError { sse, bm: errs[argmax_abs(&wide)], max }
}

/// Zero-padded blocks of `t` along its last axis, row-major.
fn padded_blocks(t: &Tensor, k: usize) -> Vec<Vec<f32>> {
    let cols = t.cols();
    let per_row = cols.div_ceil(k);
    let mut out = Vec::with_capacity(t.rows() * per_row);
    for r in 0..t.rows() {
        let row = t.row(r);
        for b in 0..per_row {
            let mut blk = row[b * k..cols.min((b + 1) * k)].to_vec();
            blk.resize(k, 0.0);
            out.push(blk);
        }
    }
    out
}

fn pct(part: f64, total: f64) -> f64 {
    if total == 0.0 {
        0.0
    } else {
        100.0 * part / total
    }
}

fn summarize(format: String, n: usize, errs: Vec<BlockError>) -> MseReport {
    let mut total = 0.0;
    let mut bm = 0.0;
    let mut max = 0.0;
    for e in &errs {
        total += e.sse;
        bm += e.bm;
        max += e.max;
    }
    MseReport {
        format,
        element_count: n,
        total_mse: total / n as f64,
        per_block_sse: errs.iter().map(|e| e.sse).collect(),
        bm_contribution_pct: pct(bm, total),
        max_elem_contribution_pct: pct(max, total),
    }
}

/// Quantize `t` with `format` and decompose the squared error.
///
/// The BM of a block is its largest-magnitude original value (lowest index
/// on ties), for every format. Percentages are 0 when the error is 0.
pub fn mse_report(t: &Tensor, format: &Format) -> Result<MseReport> {
    let et = encode_tensor(t, format)?;
    let blocks = padded_blocks(t, format.block_size());
    let errs = blocks
        .par_iter()
        .zip(&et.blocks)
        .map(|(orig, enc)| Ok(block_error(orig, &format.decode_block(enc)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(format.to_string(), t.len(), errs))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopkReport {
    pub k_hi: usize,
    pub total_mse: f64,
    pub per_block_sse: Vec<f64>,
    /// Share of 3-sigma outliers that fall in the high-precision set.
    pub outlier_coverage_pct: f64,
}

pub const TOPK_BLOCK: usize = 32;

/// Per 32-element block, the `k_hi` largest magnitudes (lowest index first on
/// ties) are quantized as E2M3 and the rest as E2M1, all under the MX shared
/// exponent (both element types have `e_max = 2`).
pub fn topk_hybrid_sse(t: &Tensor, k_hi: usize) -> Result<TopkReport> {
    if k_hi > TOPK_BLOCK {
        return Err(Error::InvalidArgument(format!("k_hi {k_hi} exceeds block size {TOPK_BLOCK}")));
    }
    if t.is_empty() {
        return Err(Error::EmptyTensor);
    }
    let (lo, hi) = (ElementFormat::E2M1, ElementFormat::E2M3);
    debug_assert_eq!(lo.e_max, hi.e_max);
    let stats = outlier_stats(t, TOPK_BLOCK)?;
    let blocks = padded_blocks(t, TOPK_BLOCK);
    let per_row = t.cols().div_ceil(TOPK_BLOCK);
    let results = blocks
        .par_iter()
        .enumerate()
        .map(|(bi, blk)| {
            let se = match compute_shared_exponent(blk, lo.e_max, false)? {
                SharedExp::Exp(e) => e,
                SharedExp::AllZero => -127,
            };
            let mut order: Vec<usize> = (0..blk.len()).collect();
            order.sort_by(|&a, &b| blk[b].abs().total_cmp(&blk[a].abs()).then(a.cmp(&b)));
            let mut high = vec![false; blk.len()];
            for &i in &order[..k_hi] {
                high[i] = true;
            }
            let decoded: Vec<f64> = blk
                .iter()
                .zip(&high)
                .map(|(&x, &h)| {
                    let fmt = if h { &hi } else { &lo };
                    fmt.decode_finite(fmt.encode_bits(f64::from(x) * pow2(-se))) * pow2(se)
                })
                .collect();
            let col0 = (bi % per_row) * TOPK_BLOCK;
            let covered =
                (0..blk.len()).filter(|&i| high[i] && col0 + i < t.cols() && stats.is_outlier(blk[i])).count();
            Ok((block_error(blk, &decoded), covered))
        })
        .collect::<Result<Vec<_>>>()?;
    let covered: usize = results.iter().map(|r| r.1).sum();
    let rep = summarize(String::new(), t.len(), results.into_iter().map(|r| r.0).collect());
    Ok(TopkReport {
        k_hi,
        total_mse: rep.total_mse,
        per_block_sse: rep.per_block_sse,
        outlier_coverage_pct: pct(covered as f64, stats.total_outliers as f64),
    })
}
