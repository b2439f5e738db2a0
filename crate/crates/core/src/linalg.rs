//! Emulated matrix multiplication over encoded tensors.
//!
//! `A` is `M x K` and `B` is given transposed as `N x K`, so both operands
//! are blocked along the shared reduction axis and block `b` of row `i`
//! pairs with block `b` of row `j`. Every path computes each block pair's
//! partial sum exactly, rounds it to `f64` once and accumulates the partial
//! sums in block order. Products of decoded elements are short dyadic
//! rationals, so three paths that compute the same exact partial sums agree
//! bit for bit:
//!
//! * `reference` dequantizes both blocks and takes the dot product.
//! * `decomposed` splits A's Block-Max into `BM_H + BM_L`: a dense dot with
//!   `BM_L` in place of the BM plus a sparse `BM_H * b[idx]` term.
//! * `bcu` zeroes both BM positions in the dense tree and adds the cross
//!   terms `A_BM * B[idx_A] + B_BM * A[idx_B]` (a single `A_BM * B_BM` when
//!   the indices coincide), applying the MX++ NBM shifts per term.
//!
//! With MXFP4+ operands the BM significands are 4 bits, so the BCU
//! multipliers need 4x4-bit significand products plus the exponent sums.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blockcodec::{block_terms, split_bm, BlockTerms, EncodedTensor, Variant};
use crate::error::{Error, Result};
use crate::exact::Dyadic;
use crate::format::Format;
use crate::formats::pow2;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatmulPath {
    Reference,
    Decomposed,
    Bcu,
}

impl MatmulPath {
    pub const ALL: [MatmulPath; 3] = [MatmulPath::Reference, MatmulPath::Decomposed, MatmulPath::Bcu];
}

impl fmt::Display for MatmulPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatmulPath::Reference => "reference",
            MatmulPath::Decomposed => "decomposed",
            MatmulPath::Bcu => "bcu",
        })
    }
}

impl FromStr for MatmulPath {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reference" => Ok(MatmulPath::Reference),
            "decomposed" => Ok(MatmulPath::Decomposed),
            "bcu" => Ok(MatmulPath::Bcu),
            other => Err(Error::InvalidArgument(format!("unknown matmul path `{other}`"))),
        }
    }
}

/// Row-major `f64` matmul result.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    /// Narrow to an `f32` tensor (rounding to nearest).
    pub fn to_tensor(&self) -> Tensor {
        let data = self.data.iter().map(|&v| v as f32).collect();
        Tensor::from_rows(self.rows, self.cols, data).expect("matrix shape is consistent")
    }

    /// First coordinate where `self` and `other` differ bit-wise.
    pub fn first_mismatch(&self, other: &Matrix) -> Option<(usize, usize)> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Some((0, 0));
        }
        self.data
            .iter()
            .zip(&other.data)
            .position(|(a, b)| a.to_bits() != b.to_bits() && !(*a == 0.0 && *b == 0.0))
            .map(|p| (p / self.cols, p % self.cols))
    }
}

/// Exact values held as integers times a shared power of two.
struct Fixed {
    mant: Vec<i64>,
    exp: i32,
}

impl Fixed {
    fn new(values: &[f64]) -> Fixed {
        let parts: Vec<Dyadic> = values.iter().map(|&v| Dyadic::from_f64(v)).collect();
        let exp = parts.iter().filter(|d| !d.is_zero()).map(|d| d.exponent()).min().unwrap_or(0);
        let mant = parts
            .iter()
            .map(|d| {
                let shift = (d.exponent() - exp) as u32;
                let m = d.mantissa();
                assert!(
                    m == 0 || (shift < 64 && m.unsigned_abs() << shift < 1 << 62),
                    "block values span too many binades"
                );
                if m == 0 {
                    0
                } else {
                    (m << shift) as i64
                }
            })
            .collect();
        Fixed { mant, exp }
    }

    fn at(&self, i: usize) -> Dyadic {
        Dyadic::new(i128::from(self.mant[i]), self.exp)
    }
}

/// Exact `sum a_t * b_t` over the positions not in `skip`.
fn dot(a: &Fixed, b: &Fixed, skip: &[usize]) -> Dyadic {
    let mut acc: i128 = 0;
    for t in 0..a.mant.len() {
        if !skip.contains(&t) {
            acc = acc
                .checked_add(i128::from(a.mant[t]) * i128::from(b.mant[t]))
                .expect("block dot product exceeds 127 bits");
        }
    }
    Dyadic::new(acc, a.exp + b.exp)
}

fn check_operands(a: &EncodedTensor, b: &EncodedTensor) -> Result<()> {
    a.check()?;
    b.check()?;
    if a.shape.len() != 2 || b.shape.len() != 2 {
        return Err(Error::ShapeMismatch("matmul operands must be 2-D".into()));
    }
    if a.cols() != b.cols() {
        return Err(Error::ShapeMismatch(format!("reduction lengths differ: A has {}, B has {}", a.cols(), b.cols())));
    }
    if a.format.block_size() != b.format.block_size() {
        return Err(Error::ShapeMismatch("operands use different block sizes".into()));
    }
    Ok(())
}

fn terms(format: &Format, block: &crate::blockcodec::EncodedBlock) -> Result<BlockTerms> {
    match format {
        Format::Mx(c) => block_terms(block, c),
        _ => Err(Error::VariantMismatch { expected: "an MX-family operand", got: format.to_string() }),
    }
}

/// Run `per_pair(i, j, block)` over every block pair and accumulate.
fn accumulate<F>(m: usize, n: usize, nb: usize, per_pair: F) -> Matrix
where
    F: Fn(usize, usize, usize) -> f64 + Sync,
{
    let data: Vec<f64> = (0..m)
        .into_par_iter()
        .flat_map_iter(|i| {
            let per_pair = &per_pair;
            (0..n).map(move |j| {
                let mut acc = 0.0f64;
                for blk in 0..nb {
                    acc += per_pair(i, j, blk);
                }
                acc
            })
        })
        .collect();
    Matrix { rows: m, cols: n, data }
}

pub fn matmul_reference(a: &EncodedTensor, b: &EncodedTensor) -> Result<Matrix> {
    check_operands(a, b)?;
    let fa = a.blocks.iter().map(|x| a.format.decode_block(x).map(|v| Fixed::new(&v)));
    let fa: Vec<Fixed> = fa.collect::<Result<_>>()?;
    let fb = b.blocks.iter().map(|x| b.format.decode_block(x).map(|v| Fixed::new(&v)));
    let fb: Vec<Fixed> = fb.collect::<Result<_>>()?;
    let nb = a.blocks_per_row();
    Ok(accumulate(a.rows(), b.rows(), nb, |i, j, k| dot(&fa[i * nb + k], &fb[j * nb + k], &[]).to_f64()))
}

struct ElemBlock {
    terms: BlockTerms,
    fixed: Fixed,
}

fn elem_blocks(t: &EncodedTensor) -> Result<Vec<ElemBlock>> {
    t.blocks
        .iter()
        .map(|b| {
            let terms = terms(&t.format, b)?;
            let fixed = Fixed::new(&terms.elems);
            Ok(ElemBlock { terms, fixed })
        })
        .collect()
}

fn is_e2m1(format: &Format, variant: Variant) -> bool {
    matches!(format, Format::Mx(c) if c.element.name == "e2m1" && c.variant == variant)
}

pub fn matmul_decomposed(a: &EncodedTensor, b: &EncodedTensor) -> Result<Matrix> {
    check_operands(a, b)?;
    if !is_e2m1(&a.format, Variant::Plus) {
        return Err(Error::VariantMismatch { expected: "A in MXFP4+", got: a.format.to_string() });
    }
    if !is_e2m1(&b.format, Variant::Plain) || a.format.block_size() != b.format.block_size() {
        return Err(Error::VariantMismatch { expected: "B in MXFP4", got: b.format.to_string() });
    }
    let cfg_a = *a.format.mx_config().unwrap();
    // dense operand: A with each BM replaced by BM_L; sparse: (index, BM_H)
    let mut dense = Vec::with_capacity(a.blocks.len());
    let mut sparse = Vec::with_capacity(a.blocks.len());
    for blk in &a.blocks {
        let t = terms(&a.format, blk)?;
        let mut elems = t.elems.clone();
        let sp = match t.bm {
            Some(idx) => {
                let s = split_bm(blk, &cfg_a)?;
                elems[idx] = s.bm_l;
                Some((idx, Dyadic::from_f64(s.bm_h)))
            }
            None => None,
        };
        dense.push((Fixed::new(&elems), Dyadic::from_f64(t.scale)));
        sparse.push(sp);
    }
    let eb = elem_blocks(b)?;
    let nb = a.blocks_per_row();
    Ok(accumulate(a.rows(), b.rows(), nb, |i, j, k| {
        let (da, xa) = &dense[i * nb + k];
        let bb = &eb[j * nb + k];
        let mut sum = dot(da, &bb.fixed, &[]);
        if let Some((idx, bm_h)) = sparse[i * nb + k] {
            sum = sum.add(bm_h.mul(bb.fixed.at(idx)));
        }
        sum.mul(*xa).mul(Dyadic::from_f64(bb.terms.scale)).to_f64()
    }))
}

pub fn matmul_bcu(a: &EncodedTensor, b: &EncodedTensor) -> Result<Matrix> {
    check_operands(a, b)?;
    for t in [a, b] {
        if t.format.variant() == Variant::Plain || t.format.is_legacy() {
            return Err(Error::VariantMismatch {
                expected: "operands with BM metadata (+ or ++)",
                got: t.format.to_string(),
            });
        }
    }
    let ea = elem_blocks(a)?;
    let eb = elem_blocks(b)?;
    let nb = a.blocks_per_row();
    Ok(accumulate(a.rows(), b.rows(), nb, |i, j, k| {
        let (pa, pb) = (&ea[i * nb + k], &eb[j * nb + k]);
        let (ta, tb) = (&pa.terms, &pb.terms);
        let shift_a = Dyadic::from_f64(pow2(-(ta.delta as i32)));
        let shift_b = Dyadic::from_f64(pow2(-(tb.delta as i32)));
        let skip: Vec<usize> = ta.bm.iter().chain(tb.bm.iter()).copied().collect();
        let mut sum = dot(&pa.fixed, &pb.fixed, &skip).mul(shift_a).mul(shift_b);
        match (ta.bm, tb.bm) {
            (Some(ia), Some(ib)) if ia == ib => {
                sum = sum.add(pa.fixed.at(ia).mul(pb.fixed.at(ib)));
            }
            (ia, ib) => {
                if let Some(ia) = ia {
                    sum = sum.add(pa.fixed.at(ia).mul(pb.fixed.at(ia)).mul(shift_b));
                }
                if let Some(ib) = ib {
                    sum = sum.add(pb.fixed.at(ib).mul(pa.fixed.at(ib)).mul(shift_a));
                }
            }
        }
        sum.mul(Dyadic::from_f64(ta.scale)).mul(Dyadic::from_f64(tb.scale)).to_f64()
    }))
}

pub fn matmul(path: MatmulPath, a: &EncodedTensor, b: &EncodedTensor) -> Result<Matrix> {
    match path {
        MatmulPath::Reference => matmul_reference(a, b),
        MatmulPath::Decomposed => matmul_decomposed(a, b),
        MatmulPath::Bcu => matmul_bcu(a, b),
    }
}
