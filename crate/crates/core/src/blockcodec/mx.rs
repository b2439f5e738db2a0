use super::bm::{decode_ext, encode_plus};
use super::{compute_shared_exponent, BlockTerms, EncodedBlock, MxFormatConfig, SharedExp, Variant};
use crate::error::{Error, Result};
use crate::formats::{decode_scale_e8m0, encode_scale_e8m0, pow2, E8m0};

pub(super) fn encode(values: &[f32], cfg: &MxFormatConfig) -> Result<EncodedBlock> {
    let elem = &cfg.element;
    let se = match compute_shared_exponent(values, elem.e_max, cfg.flush_small_blocks)? {
        SharedExp::AllZero if cfg.variant.has_meta() => {
            return Ok(EncodedBlock { scale_code: 0, elem_codes: vec![0; values.len()], meta: Some(0) })
        }
        // plain all-zero blocks take the clamped exponent, which is code 0x00
        SharedExp::AllZero => -127,
        SharedExp::Exp(e) => e,
    };
    let inv = pow2(-se);
    let scaled: Vec<f64> = values.iter().map(|&v| f64::from(v) * inv).collect();
    let scale_code = encode_scale_e8m0(se);
    if cfg.variant == Variant::Plain {
        let elem_codes = scaled.iter().map(|&s| elem.encode_bits(s)).collect();
        return Ok(EncodedBlock { scale_code, elem_codes, meta: None });
    }
    let enc = encode_plus(&scaled, elem, cfg.variant == Variant::PlusPlus);
    Ok(EncodedBlock { scale_code, elem_codes: enc.codes, meta: Some(enc.bm as u8 | (enc.delta as u8) << 5) })
}

pub(super) fn terms(block: &EncodedBlock, cfg: &MxFormatConfig) -> Result<BlockTerms> {
    let elem = &cfg.element;
    let k = block.elem_codes.len();
    let se = match decode_scale_e8m0(block.scale_code) {
        E8m0::NaN => return Err(Error::NanScale(block.scale_code)),
        E8m0::AllZero if cfg.variant.has_meta() => {
            if block.elem_codes.iter().any(|&c| c != 0) || block.meta != Some(0) {
                return Err(Error::Malformed("all-zero block carries nonzero codes".into()));
            }
            return Ok(BlockTerms { elems: vec![0.0; k], bm: None, scale: 0.0, delta: 0 });
        }
        E8m0::AllZero => -127,
        E8m0::Exponent(e) => e,
    };
    let mut elems: Vec<f64> = block.elem_codes.iter().map(|&c| elem.decode_lossy(c)).collect();
    let scale = pow2(se);
    let Some(idx) = block.bm_index() else {
        check_finite(&elems)?;
        return Ok(BlockTerms { elems, bm: None, scale, delta: 0 });
    };
    if idx >= k {
        return Err(Error::Malformed(format!("BM index {idx} outside block of {k}")));
    }
    let delta = block.delta();
    if delta != 0 && cfg.variant != Variant::PlusPlus {
        return Err(Error::Malformed(format!("delta {delta} in a non-++ block")));
    }
    let code = block.elem_codes[idx];
    let mag_mask = (1u8 << elem.magnitude_bits()) - 1;
    let sign = if code & !mag_mask != 0 { -1.0 } else { 1.0 };
    elems[idx] = sign * decode_ext(elem, code & mag_mask);
    check_finite(&elems)?;
    Ok(BlockTerms { elems, bm: Some(idx), scale, delta })
}

fn check_finite(elems: &[f64]) -> Result<()> {
    if elems.iter().any(|v| !v.is_finite()) {
        return Err(Error::Malformed("element code decodes to NaN or Inf".into()));
    }
    Ok(())
}
