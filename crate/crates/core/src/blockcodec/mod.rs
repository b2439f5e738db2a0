//! Block-level codecs for the MX family (plain, MX+ and MX++), the MXINT
//! integer variants and NVFP4 / NVFP4+.
//!
//! A block is `k` host values sharing one scale. Encoding produces an
//! [`EncodedBlock`] holding the raw scale code, one code per element and,
//! for the plus variants, the metadata byte with the Block-Max (BM) index in
//! bits `[4:0]` and the MX++ exponent delta in bits `[7:5]`.

mod bm;
mod mx;
mod nvfp4;
mod tensor;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::{floor_log2, ElementFormat};

pub use bm::BmSplit;
pub use nvfp4::NVFP4_FALLBACK_MAX_CODE;
pub use tensor::{decode_tensor, encode_tensor, EncodedTensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScaleKind {
    E8M0,
    E4M3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    Plain,
    Plus,
    PlusPlus,
}

impl Variant {
    pub fn has_meta(self) -> bool {
        self != Variant::Plain
    }

    pub fn suffix(self) -> &'static str {
        match self {
            Variant::Plain => "",
            Variant::Plus => "+",
            Variant::PlusPlus => "++",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MxFormatConfig {
    pub element: ElementFormat,
    pub block_size: usize,
    pub scale_kind: ScaleKind,
    pub variant: Variant,
    /// Zero out blocks whose shared exponent would clamp at -127. Always on
    /// for the plus variants.
    pub flush_small_blocks: bool,
}

impl MxFormatConfig {
    /// MX-family config with block size 32 and an E8M0 scale.
    pub fn mx(element: ElementFormat, variant: Variant) -> Self {
        MxFormatConfig {
            element,
            block_size: 32,
            scale_kind: ScaleKind::E8M0,
            variant,
            flush_small_blocks: variant != Variant::Plain,
        }
    }

    pub fn nvfp4(plus: bool) -> Self {
        MxFormatConfig {
            element: ElementFormat::E2M1,
            block_size: 16,
            scale_kind: ScaleKind::E4M3,
            variant: if plus { Variant::Plus } else { Variant::Plain },
            flush_small_blocks: false,
        }
    }

    pub fn is_nvfp4(&self) -> bool {
        self.scale_kind == ScaleKind::E4M3
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        match self.scale_kind {
            ScaleKind::E8M0 => {
                if self.block_size != 32 {
                    return bad("E8M0-scaled blocks hold 32 elements");
                }
                if self.variant.has_meta() && !self.flush_small_blocks {
                    return bad("plus variants reserve scale code 0x00 and must flush small blocks");
                }
                if self.variant == Variant::PlusPlus && self.element.integer_mode {
                    return bad("MX++ needs private element exponents");
                }
            }
            ScaleKind::E4M3 => {
                if self.element != ElementFormat::E2M1 || self.block_size != 16 {
                    return bad("E4M3-scaled blocks are NVFP4: E2M1 elements, 16 per block");
                }
                if self.variant == Variant::PlusPlus {
                    return bad("NVFP4 has no ++ variant");
                }
                if self.flush_small_blocks {
                    return bad("NVFP4 blocks are never flushed");
                }
            }
        }
        Ok(())
    }
}

/// One quantized block. Codes are raw bit patterns of the configured widths.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EncodedBlock {
    pub scale_code: u8,
    pub elem_codes: Vec<u8>,
    pub meta: Option<u8>,
}

impl EncodedBlock {
    pub fn bm_index(&self) -> Option<usize> {
        self.meta.map(|m| usize::from(m & 0x1f))
    }

    pub fn delta(&self) -> u32 {
        self.meta.map_or(0, |m| u32::from(m >> 5))
    }
}

/// Outcome of the shared-exponent rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SharedExp {
    Exp(i32),
    AllZero,
}

pub(crate) fn check_finite(values: &[f32]) -> Result<()> {
    match values.iter().find(|v| !v.is_finite()) {
        Some(&v) => Err(Error::NonFinite(f64::from(v))),
        None => Ok(()),
    }
}

pub(crate) fn check_len(values: &[f32], k: usize) -> Result<()> {
    if values.len() != k {
        return Err(Error::BlockLength { expected: k, got: values.len() });
    }
    Ok(())
}

/// `max floor(log2|x|) - e_max`, clamped to `[-127, 127]`. With `flush`,
/// blocks whose largest exponent is `<= -127 + e_max` report `AllZero`.
pub fn compute_shared_exponent(values: &[f32], e_max: i32, flush: bool) -> Result<SharedExp> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("empty block".into()));
    }
    check_finite(values)?;
    let absmax = values.iter().fold(0.0f32, |m, v| m.max(v.abs()));
    if absmax == 0.0 {
        return Ok(SharedExp::AllZero);
    }
    let top = floor_log2(f64::from(absmax));
    if flush && top <= -127 + e_max {
        return Ok(SharedExp::AllZero);
    }
    Ok(SharedExp::Exp((top - e_max).clamp(-127, 127)))
}

/// Index of the largest magnitude, lowest index on ties.
pub(crate) fn argmax_abs(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if v.abs() > values[best].abs() {
            best = i;
        }
    }
    best
}

pub fn encode_block(values: &[f32], cfg: &MxFormatConfig) -> Result<EncodedBlock> {
    cfg.validate()?;
    check_len(values, cfg.block_size)?;
    check_finite(values)?;
    match cfg.scale_kind {
        ScaleKind::E8M0 => mx::encode(values, cfg),
        ScaleKind::E4M3 => nvfp4::encode(values, cfg.variant == Variant::Plus, 1.0),
    }
}

pub fn decode_block(block: &EncodedBlock, cfg: &MxFormatConfig) -> Result<Vec<f64>> {
    Ok(block_terms(block, cfg)?.values())
}

/// NVFP4 encode with an explicit per-tensor pre-scale: values are divided by
/// `tensor_scale` before the block scale is chosen.
pub fn encode_block_nvfp4(values: &[f32], plus: bool, tensor_scale: f64) -> Result<EncodedBlock> {
    check_len(values, 16)?;
    check_finite(values)?;
    if !(tensor_scale.is_finite() && tensor_scale > 0.0) {
        return Err(Error::InvalidScale(tensor_scale));
    }
    nvfp4::encode(values, plus, tensor_scale)
}

/// Inverse of [`encode_block_nvfp4`].
pub fn decode_block_nvfp4(block: &EncodedBlock, plus: bool, tensor_scale: f64) -> Result<Vec<f64>> {
    let cfg = MxFormatConfig::nvfp4(plus);
    Ok(block_terms(block, &cfg)?.values().into_iter().map(|v| v * tensor_scale).collect())
}

/// Element-domain view of an encoded block.
///
/// `elems[i]` is the element value before scaling: the BM (if any) is read
/// with the extended-mantissa rule, every other element with the plain
/// element decode. The real value is `elems[i] * scale`, with an extra
/// `2^-delta` on non-BM elements.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockTerms {
    pub elems: Vec<f64>,
    pub bm: Option<usize>,
    pub scale: f64,
    pub delta: u32,
}

impl BlockTerms {
    pub fn nbm_scale(&self) -> f64 {
        self.scale * crate::formats::pow2(-(self.delta as i32))
    }

    pub fn value(&self, i: usize) -> f64 {
        if Some(i) == self.bm {
            self.elems[i] * self.scale
        } else {
            self.elems[i] * self.nbm_scale()
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.elems.len()).map(|i| self.value(i)).collect()
    }
}

pub fn block_terms(block: &EncodedBlock, cfg: &MxFormatConfig) -> Result<BlockTerms> {
    cfg.validate()?;
    if block.elem_codes.len() != cfg.block_size {
        return Err(Error::BlockLength { expected: cfg.block_size, got: block.elem_codes.len() });
    }
    if block.meta.is_some() != cfg.variant.has_meta() {
        return Err(Error::Malformed(format!("metadata byte presence does not match variant {:?}", cfg.variant)));
    }
    let width = cfg.element.width();
    if let Some(&c) = block.elem_codes.iter().find(|&&c| width < 8 && u32::from(c) >> width != 0) {
        return Err(Error::WidthMismatch { expected: width, got: 8 - c.leading_zeros() });
    }
    match cfg.scale_kind {
        ScaleKind::E8M0 => mx::terms(block, cfg),
        ScaleKind::E4M3 => nvfp4::terms(block, cfg.variant == Variant::Plus),
    }
}

/// Split the BM of an MXFP4+ / NVFP4+ block into two E2M1-representable
/// halves, `BM = BM_H + BM_L`.
pub fn split_bm(block: &EncodedBlock, cfg: &MxFormatConfig) -> Result<BmSplit> {
    if cfg.variant != Variant::Plus || cfg.element != ElementFormat::E2M1 {
        return Err(Error::VariantMismatch {
            expected: "an E2M1 plus variant",
            got: format!("{}{:?}", cfg.element.name, cfg.variant),
        });
    }
    let terms = block_terms(block, cfg)?;
    let idx = terms.bm.ok_or_else(|| Error::InvalidArgument("block has no extended BM".into()))?;
    Ok(BmSplit::new(block.elem_codes[idx], terms.scale))
}
