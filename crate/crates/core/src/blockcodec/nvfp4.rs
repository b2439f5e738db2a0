use super::bm::{decode_ext, encode_plus};
use super::{argmax_abs, BlockTerms, EncodedBlock};
use crate::error::{Error, Result};
use crate::formats::{decode_scale_e4m3, encode_scale_e4m3, ElementFormat};

/// Largest scale code that still falls back to plain NVFP4 in NVFP4+.
pub const NVFP4_FALLBACK_MAX_CODE: u8 = 0b0000_0010;

pub(super) fn encode(values: &[f32], plus: bool, tensor_scale: f64) -> Result<EncodedBlock> {
    let elem = ElementFormat::E2M1;
    let pre: Vec<f64> = values.iter().map(|&v| f64::from(v) / tensor_scale).collect();
    let absmax = pre.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale_code = if absmax == 0.0 { 1 } else { encode_scale_e4m3(absmax / elem.max_norm)?.bits().max(1) };
    let s = decode_scale_e4m3(scale_code)?;
    let scaled: Vec<f64> = pre.iter().map(|&v| v / s).collect();
    if plus && scale_code > NVFP4_FALLBACK_MAX_CODE {
        let enc = encode_plus(&scaled, &elem, false);
        return Ok(EncodedBlock { scale_code, elem_codes: enc.codes, meta: Some(enc.bm as u8) });
    }
    let elem_codes: Vec<u8> = scaled.iter().map(|&v| elem.encode_bits(v)).collect();
    // fallback meta: lowest index of the largest decoded magnitude
    let meta = plus.then(|| {
        let dec: Vec<f64> = elem_codes.iter().map(|&c| elem.decode_finite(c)).collect();
        argmax_abs(&dec) as u8
    });
    Ok(EncodedBlock { scale_code, elem_codes, meta })
}

pub(super) fn terms(block: &EncodedBlock, plus: bool) -> Result<BlockTerms> {
    let elem = ElementFormat::E2M1;
    let scale = decode_scale_e4m3(block.scale_code)?;
    let mut elems: Vec<f64> = block.elem_codes.iter().map(|&c| elem.decode_finite(c)).collect();
    let idx = match block.meta {
        Some(m) if m > 0x0f => return Err(Error::Malformed(format!("NVFP4+ BM index {m} needs more than 4 bits"))),
        Some(m) => usize::from(m),
        None => return Ok(BlockTerms { elems, bm: None, scale, delta: 0 }),
    };
    if !plus || block.scale_code <= NVFP4_FALLBACK_MAX_CODE {
        return Ok(BlockTerms { elems, bm: None, scale, delta: 0 });
    }
    let code = block.elem_codes[idx];
    let sign = if code & 0b1000 != 0 { -1.0 } else { 1.0 };
    elems[idx] = sign * decode_ext(&elem, code & 0b111);
    Ok(BlockTerms { elems, bm: Some(idx), scale, delta: 0 })
}
