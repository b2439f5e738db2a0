//! Extended-mantissa Block-Max encoding shared by MX+, MX++ and NVFP4+.

use serde::{Deserialize, Serialize};

use super::argmax_abs;
use crate::formats::{floor_log2, pow2, ElementFormat};

/// Fraction bits of the extended BM mantissa: every non-sign bit of the
/// element code (the integer bit becomes implicit for MXINT).
pub(crate) fn ext_bits(elem: &ElementFormat) -> u32 {
    elem.magnitude_bits()
}

/// `2^e_max * (1 + m / 2^M)`.
pub(crate) fn decode_ext(elem: &ElementFormat, m: u8) -> f64 {
    let fb = ext_bits(elem) as i32;
    pow2(elem.e_max) * (1.0 + f64::from(m) * pow2(-fb))
}

/// RNE onto the extended grid `[2^e_max, 2^(e_max+1))`, clamped at both ends.
fn encode_ext(elem: &ElementFormat, a: f64) -> u32 {
    let fb = ext_bits(elem) as i32;
    let t = a * pow2(fb - elem.e_max) - pow2(fb);
    t.round_ties_even().clamp(0.0, pow2(fb) - 1.0) as u32
}

/// Smallest extended code whose value is at least `floor`.
fn ext_ceil(elem: &ElementFormat, floor: f64) -> u32 {
    let fb = ext_bits(elem) as i32;
    let t = floor * pow2(fb - elem.e_max) - pow2(fb);
    t.ceil().clamp(0.0, pow2(fb) - 1.0) as u32
}

/// MX++ exponent delta for a BM at `bm`, from element-domain values.
fn plusplus_delta(scaled: &[f64], bm: usize, e_max: i32) -> u32 {
    let max2 = scaled.iter().enumerate().filter(|&(i, v)| i != bm && *v != 0.0).map(|(_, v)| floor_log2(v.abs())).max();
    match max2 {
        Some(m) => (-(m - e_max + 1).clamp(-7, 0)) as u32,
        None => 0,
    }
}

pub(crate) struct PlusEncoding {
    pub bm: usize,
    pub delta: u32,
    pub codes: Vec<u8>,
}

/// Encode a block already divided by its scale.
///
/// The BM magnitude is the RNE extended value, raised if needed so it is at
/// least every decoded NBM. If a lower-index NBM then decodes to the same
/// magnitude, that element takes over the BM role and the block is
/// re-encoded; the index strictly decreases so this terminates.
pub(crate) fn encode_plus(scaled: &[f64], elem: &ElementFormat, plusplus: bool) -> PlusEncoding {
    let mut bm = argmax_abs(scaled);
    loop {
        let delta = if plusplus { plusplus_delta(scaled, bm, elem.e_max) } else { 0 };
        let shift = pow2(delta as i32);
        let mut codes = vec![0u8; scaled.len()];
        let mut mags = vec![0.0f64; scaled.len()];
        for (i, &s) in scaled.iter().enumerate() {
            if i != bm {
                codes[i] = elem.encode_bits(s * shift);
                mags[i] = elem.decode_finite(codes[i]).abs() / shift;
            }
        }
        let nbm_max = mags.iter().fold(0.0f64, |m, &v| m.max(v));
        let m = encode_ext(elem, scaled[bm].abs()).max(ext_ceil(elem, nbm_max));
        let sign = if scaled[bm].is_sign_negative() { 1u8 << elem.magnitude_bits() } else { 0 };
        codes[bm] = sign | m as u8;
        let bm_mag = decode_ext(elem, m as u8);
        match (0..bm).find(|&i| mags[i] == bm_mag) {
            Some(j) => bm = j,
            None => return PlusEncoding { bm, delta, codes },
        }
    }
}

/// `BM = BM_H + BM_L` for an E2M1 extended BM.
///
/// `um` is the mantissa with its leading one made explicit (`1 m2 m1 m0`).
/// `bm_h = ±2^e_max * um[3].um[2]` and `bm_l = ±2^(e_max-2) * um[1].um[0]`
/// are element-domain values; multiply by `scale` for real values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BmSplit {
    pub bm_h: f64,
    pub bm_l: f64,
    pub um: u8,
    pub sign: u8,
    pub scale: f64,
}

impl BmSplit {
    pub(crate) fn new(code: u8, scale: f64) -> BmSplit {
        let um = 0b1000 | (code & 0b111);
        let sign = (code >> 3) & 1;
        let s = if sign == 1 { -1.0 } else { 1.0 };
        let e_max = ElementFormat::E2M1.e_max;
        BmSplit {
            bm_h: s * pow2(e_max) * f64::from(um >> 2) * 0.5,
            bm_l: s * pow2(e_max - 2) * f64::from(um & 0b11) * 0.5,
            um,
            sign,
            scale,
        }
    }

    pub fn scaled_high(&self) -> f64 {
        self.bm_h * self.scale
    }

    pub fn scaled_low(&self) -> f64 {
        self.bm_l * self.scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extended_grid_e2m1() {
        let f = ElementFormat::E2M1;
        let grid: Vec<f64> = (0..8).map(|m| decode_ext(&f, m)).collect();
        assert_eq!(grid, vec![4.0, 4.5, 5.0, 5.5, 6.0, 6.5, 7.0, 7.5]);
        assert_eq!(encode_ext(&f, 5.74), 3);
        assert_eq!(encode_ext(&f, 7.9), 7);
        assert_eq!(encode_ext(&f, 4.25), 0);
        assert_eq!(encode_ext(&f, 4.75), 2);
    }

    #[test]
    fn extended_grid_int8() {
        let f = ElementFormat::INT8;
        assert_eq!(encode_ext(&f, 1.8125), 104);
        assert_eq!(decode_ext(&f, 104), 1.8125);
        assert_eq!(decode_ext(&f, 127), 2.0 - 1.0 / 128.0);
    }

    #[test]
    fn bm_raised_above_rounded_nbm() {
        // plain RNE would give BM 5.5 and NBM 6.0
        let enc = encode_plus(&[5.74, 5.7], &ElementFormat::E2M1, false);
        assert_eq!(enc.bm, 0);
        assert_eq!(decode_ext(&ElementFormat::E2M1, enc.codes[0]), 6.0);
        assert_eq!(ElementFormat::E2M1.decode_finite(enc.codes[1]), 6.0);
    }

    #[test]
    fn bm_role_moves_to_lower_index_on_decoded_tie() {
        let enc = encode_plus(&[5.9, 5.95], &ElementFormat::E2M1, false);
        assert_eq!(enc.bm, 0);
        assert_eq!(decode_ext(&ElementFormat::E2M1, enc.codes[0] & 7), 6.0);
    }

    #[test]
    fn split_values() {
        let s = BmSplit::new(0b0011, 1.0);
        assert_eq!((s.bm_h, s.bm_l, s.um), (4.0, 1.5, 0b1011));
        let s = BmSplit::new(0b0000, 1.0);
        assert_eq!((s.bm_h, s.bm_l), (4.0, 0.0));
        let s = BmSplit::new(0b1111, 0.25);
        assert_eq!((s.scaled_high(), s.scaled_low()), (-1.5, -0.375));
    }
}
