//! MSFP and SMX comparison codecs.
//!
//! Both use 16-element blocks with an 8-bit shared exponent taken directly
//! from the block max (no `e_max` offset) and sign-magnitude elements with no
//! private exponent and no implicit leading bit. A `w`-bit element holds a
//! `(w-1)`-bit magnitude `M` and decodes to `M * 2^(se - (w-2))`, so the
//! block max lands in the top half of the magnitude range.
//!
//! SMX adds a one-bit microexponent `d` per element pair that shifts the
//! pair's grid down by one binade; `d` is picked to minimize the pair's
//! squared error (ties keep `d = 0`). Blocks are stored as [`EncodedBlock`]
//! with the biased exponent as scale code and, for SMX, the eight pair bits
//! in `meta` (bit `p` for pair `p`).

use serde::{Deserialize, Serialize};

use crate::blockcodec::{check_finite, check_len, EncodedBlock};
use crate::error::{Error, Result};
use crate::exact::Dyadic;
use crate::formats::{floor_log2, pow2};

pub const LEGACY_BLOCK: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MsfpConfig {
    pub total_bits: u32,
}

impl MsfpConfig {
    pub fn new(total_bits: u32) -> Result<Self> {
        match total_bits {
            12 | 14 | 16 => Ok(MsfpConfig { total_bits }),
            n => Err(Error::InvalidConfig(format!("MSFP{n} is not defined"))),
        }
    }

    pub fn width(&self) -> u32 {
        self.total_bits - 8
    }

    pub fn bits_per_element(&self) -> f64 {
        f64::from(self.width()) + 8.0 / LEGACY_BLOCK as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SmxConfig {
    Smx4,
    Smx6,
    Smx9,
}

impl SmxConfig {
    pub fn width(&self) -> u32 {
        match self {
            SmxConfig::Smx4 => 3,
            SmxConfig::Smx6 => 5,
            SmxConfig::Smx9 => 8,
        }
    }

    pub fn bits_per_element(&self) -> f64 {
        f64::from(self.width()) + 8.0 / LEGACY_BLOCK as f64 + 0.5
    }
}

fn shared_exp(values: &[f32]) -> i32 {
    let absmax = values.iter().fold(0.0f32, |m, v| m.max(v.abs()));
    if absmax == 0.0 {
        -127
    } else {
        floor_log2(f64::from(absmax)).clamp(-127, 127)
    }
}

fn quantize(v: f64, unit_exp: i32, width: u32) -> (u8, f64) {
    let mmax = (1u32 << (width - 1)) - 1;
    let m = ((v.abs() * pow2(-unit_exp)).round_ties_even() as u32).min(mmax);
    let sign = if v.is_sign_negative() { 1u8 << (width - 1) } else { 0 };
    let q = f64::from(m) * pow2(unit_exp);
    (sign | m as u8, if v.is_sign_negative() { -q } else { q })
}

fn decode_code(code: u8, unit_exp: i32, width: u32) -> Result<f64> {
    if width < 8 && code >> width != 0 {
        return Err(Error::WidthMismatch { expected: width, got: 8 - code.leading_zeros() });
    }
    let mag = f64::from(code & ((1u8 << (width - 1)) - 1)) * pow2(unit_exp);
    Ok(if code >> (width - 1) & 1 == 1 { -mag } else { mag })
}

fn scale_exp(block: &EncodedBlock) -> Result<i32> {
    if block.scale_code == 0xff {
        return Err(Error::Malformed("legacy scale code 0xff is out of range".into()));
    }
    Ok(i32::from(block.scale_code) - 127)
}

pub fn msfp_encode_block(values: &[f32], cfg: &MsfpConfig) -> Result<EncodedBlock> {
    check_len(values, LEGACY_BLOCK)?;
    check_finite(values)?;
    let w = cfg.width();
    let se = shared_exp(values);
    let unit = se - (w as i32 - 2);
    let elem_codes = values.iter().map(|&v| quantize(f64::from(v), unit, w).0).collect();
    Ok(EncodedBlock { scale_code: (se + 127) as u8, elem_codes, meta: None })
}

pub fn msfp_decode_block(block: &EncodedBlock, cfg: &MsfpConfig) -> Result<Vec<f64>> {
    if block.elem_codes.len() != LEGACY_BLOCK {
        return Err(Error::BlockLength { expected: LEGACY_BLOCK, got: block.elem_codes.len() });
    }
    if block.meta.is_some() {
        return Err(Error::Malformed("MSFP blocks carry no metadata".into()));
    }
    let w = cfg.width();
    let unit = scale_exp(block)? - (w as i32 - 2);
    block.elem_codes.iter().map(|&c| decode_code(c, unit, w)).collect()
}

/// Sign of `SSE(d=1) - SSE(d=0)` for one pair, computed exactly.
fn finer_grid_gain(v: &[f64], q0: &[f64], q1: &[f64]) -> i32 {
    let mut diff = Dyadic::ZERO;
    for i in 0..v.len() {
        if q0[i] == q1[i] {
            continue;
        }
        // (v - q1)^2 - (v - q0)^2 = (q0 - q1)(2v - q0 - q1)
        let a = Dyadic::from_f64(q0[i]).sub(Dyadic::from_f64(q1[i]));
        let b = Dyadic::from_f64(2.0 * v[i]).sub(Dyadic::from_f64(q0[i])).sub(Dyadic::from_f64(q1[i]));
        diff = diff.add(a.mul(b));
    }
    diff.signum()
}

pub fn smx_encode_block(values: &[f32], cfg: &SmxConfig) -> Result<EncodedBlock> {
    check_len(values, LEGACY_BLOCK)?;
    check_finite(values)?;
    let w = cfg.width();
    let se = shared_exp(values);
    let unit = se - (w as i32 - 2);
    let mut elem_codes = vec![0u8; LEGACY_BLOCK];
    let mut micro = 0u8;
    for p in 0..LEGACY_BLOCK / 2 {
        let v = [f64::from(values[2 * p]), f64::from(values[2 * p + 1])];
        let coarse = v.map(|x| quantize(x, unit, w));
        let fine = v.map(|x| quantize(x, unit - 1, w));
        let gain = finer_grid_gain(&v, &coarse.map(|c| c.1), &fine.map(|c| c.1));
        let pick = if gain < 0 {
            micro |= 1 << p;
            fine
        } else {
            coarse
        };
        elem_codes[2 * p] = pick[0].0;
        elem_codes[2 * p + 1] = pick[1].0;
    }
    Ok(EncodedBlock { scale_code: (se + 127) as u8, elem_codes, meta: Some(micro) })
}

pub fn smx_decode_block(block: &EncodedBlock, cfg: &SmxConfig) -> Result<Vec<f64>> {
    if block.elem_codes.len() != LEGACY_BLOCK {
        return Err(Error::BlockLength { expected: LEGACY_BLOCK, got: block.elem_codes.len() });
    }
    let micro = block.meta.ok_or_else(|| Error::Malformed("SMX block is missing its microexponent byte".into()))?;
    let w = cfg.width();
    let unit = scale_exp(block)? - (w as i32 - 2);
    block
        .elem_codes
        .iter()
        .enumerate()
        .map(|(i, &c)| decode_code(c, unit - i32::from(micro >> (i / 2) & 1), w))
        .collect()
}
