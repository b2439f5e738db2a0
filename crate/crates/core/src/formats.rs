//! Scalar element encodings (FP4/FP6/FP8 and the MXINT integer types) and
//! the E8M0 / E4M3 scale codes.
//!
//! All conversions are exact in `f64`: every element grid point is a dyadic
//! rational with at most eight significant bits, and quantization rounds to
//! the nearest grid point with ties to the even code. Magnitudes above the
//! largest finite value saturate; encoders never produce NaN or Inf codes.

use crate::error::{Error, Result};

/// `2^k` for `k` in the binary64 range (including subnormal results).
pub(crate) fn pow2(k: i32) -> f64 {
    if k >= -1022 {
        assert!(k <= 1023, "2^{k} overflows f64");
        f64::from_bits(((k + 1023) as u64) << 52)
    } else {
        assert!(k >= -1074, "2^{k} underflows f64");
        f64::from_bits(1u64 << (k + 1074))
    }
}

/// Exact `floor(log2(a))` for a finite, strictly positive `a`.
pub(crate) fn floor_log2(a: f64) -> i32 {
    debug_assert!(a > 0.0 && a.is_finite());
    let bits = a.to_bits();
    let biased = ((bits >> 52) & 0x7ff) as i32;
    if biased == 0 {
        let mant = bits & ((1u64 << 52) - 1);
        63 - mant.leading_zeros() as i32 - 1074
    } else {
        biased - 1023
    }
}

/// Which bit patterns of an FP element are reserved for non-finite values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpecialCodes {
    /// Every pattern is a finite number (E2M1, E2M3, E3M2, integers).
    None,
    /// Only `S.1111.111` is NaN (OCP E4M3).
    AllOnesNan,
    /// IEEE-style: all-ones exponent is Inf (zero mantissa) or NaN (E5M2).
    Ieee,
}

/// Descriptor of a scalar element encoding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementFormat {
    pub name: &'static str,
    pub exp_bits: u32,
    pub man_bits: u32,
    pub bias: i32,
    /// Largest unbiased exponent of a finite value; 0 in integer mode.
    pub e_max: i32,
    pub max_norm: f64,
    pub has_subnormals: bool,
    pub integer_mode: bool,
    /// Fraction bits below the single integer bit (integer mode only).
    pub frac_bits: u32,
    pub specials: SpecialCodes,
}

impl ElementFormat {
    pub const E2M1: ElementFormat = ElementFormat {
        name: "e2m1",
        exp_bits: 2,
        man_bits: 1,
        bias: 1,
        e_max: 2,
        max_norm: 6.0,
        has_subnormals: true,
        integer_mode: false,
        frac_bits: 0,
        specials: SpecialCodes::None,
    };
    pub const E2M3: ElementFormat = ElementFormat {
        name: "e2m3",
        exp_bits: 2,
        man_bits: 3,
        bias: 1,
        e_max: 2,
        max_norm: 7.5,
        has_subnormals: true,
        integer_mode: false,
        frac_bits: 0,
        specials: SpecialCodes::None,
    };
    pub const E3M2: ElementFormat = ElementFormat {
        name: "e3m2",
        exp_bits: 3,
        man_bits: 2,
        bias: 3,
        e_max: 4,
        max_norm: 28.0,
        has_subnormals: true,
        integer_mode: false,
        frac_bits: 0,
        specials: SpecialCodes::None,
    };
    pub const E4M3: ElementFormat = ElementFormat {
        name: "e4m3",
        exp_bits: 4,
        man_bits: 3,
        bias: 7,
        e_max: 8,
        max_norm: 448.0,
        has_subnormals: true,
        integer_mode: false,
        frac_bits: 0,
        specials: SpecialCodes::AllOnesNan,
    };
    pub const E5M2: ElementFormat = ElementFormat {
        name: "e5m2",
        exp_bits: 5,
        man_bits: 2,
        bias: 15,
        e_max: 15,
        max_norm: 57344.0,
        has_subnormals: true,
        integer_mode: false,
        frac_bits: 0,
        specials: SpecialCodes::Ieee,
    };
    /// MXINT8 element: sign, one integer bit, six fraction bits.
    pub const INT8: ElementFormat = ElementFormat {
        name: "int8",
        exp_bits: 0,
        man_bits: 0,
        bias: 0,
        e_max: 0,
        max_norm: 127.0 / 64.0,
        has_subnormals: false,
        integer_mode: true,
        frac_bits: 6,
        specials: SpecialCodes::None,
    };
    /// Hypothetical MXINT4 element: sign, one integer bit, two fraction bits.
    pub const INT4: ElementFormat = ElementFormat {
        name: "int4",
        exp_bits: 0,
        man_bits: 0,
        bias: 0,
        e_max: 0,
        max_norm: 7.0 / 4.0,
        has_subnormals: false,
        integer_mode: true,
        frac_bits: 2,
        specials: SpecialCodes::None,
    };

    pub const ALL: [ElementFormat; 7] =
        [Self::E2M1, Self::E2M3, Self::E3M2, Self::E4M3, Self::E5M2, Self::INT8, Self::INT4];

    /// Total code width in bits, sign included.
    pub fn width(&self) -> u32 {
        if self.integer_mode {
            2 + self.frac_bits
        } else {
            1 + self.exp_bits + self.man_bits
        }
    }

    /// Number of magnitude bits (everything but the sign).
    pub fn magnitude_bits(&self) -> u32 {
        self.width() - 1
    }

    fn sign_bit(&self) -> u8 {
        1 << self.magnitude_bits()
    }

    /// Unbiased exponent of the smallest normal value.
    pub fn min_normal_exp(&self) -> i32 {
        1 - self.bias
    }

    /// Magnitude code of the largest finite value.
    pub fn max_magnitude_code(&self) -> u8 {
        let all_ones = (1u16 << self.magnitude_bits()) as u8 - 1;
        match self.specials {
            SpecialCodes::None => all_ones,
            SpecialCodes::AllOnesNan => all_ones - 1,
            // largest finite exponent, full mantissa
            SpecialCodes::Ieee => all_ones - (1 << self.man_bits),
        }
    }

    /// Decode raw code bits. Bits above the element width are ignored.
    pub fn decode_bits(&self, bits: u8) -> ElementValue {
        let negative = bits & self.sign_bit() != 0;
        let mag = bits & (self.sign_bit() - 1);
        let sign = if negative { -1.0 } else { 1.0 };
        if self.integer_mode {
            return ElementValue::Finite(sign * f64::from(mag) * pow2(-(self.frac_bits as i32)));
        }
        let man_mask = (1u8 << self.man_bits) - 1;
        let exp_field = (mag >> self.man_bits) as i32;
        let man = mag & man_mask;
        let exp_all_ones = (1i32 << self.exp_bits) - 1;
        match self.specials {
            SpecialCodes::AllOnesNan if exp_field == exp_all_ones && man == man_mask => return ElementValue::NaN,
            SpecialCodes::Ieee if exp_field == exp_all_ones => {
                return if man == 0 { ElementValue::Infinite { negative } } else { ElementValue::NaN };
            }
            _ => {}
        }
        let man_bits = self.man_bits as i32;
        let value = if exp_field == 0 {
            f64::from(man) * pow2(self.min_normal_exp() - man_bits)
        } else {
            f64::from((1u8 << self.man_bits) | man) * pow2(exp_field - self.bias - man_bits)
        };
        ElementValue::Finite(sign * value)
    }

    /// Decode bits known to hold a finite value.
    pub(crate) fn decode_finite(&self, bits: u8) -> f64 {
        match self.decode_bits(bits) {
            ElementValue::Finite(v) => v,
            other => panic!("{} code {bits:#x} is {other:?}", self.name),
        }
    }

    /// Decode to `f64`, mapping the special codes to NaN / infinities.
    pub(crate) fn decode_lossy(&self, bits: u8) -> f64 {
        match self.decode_bits(bits) {
            ElementValue::Finite(v) => v,
            ElementValue::Infinite { negative: true } => f64::NEG_INFINITY,
            ElementValue::Infinite { negative: false } => f64::INFINITY,
            ElementValue::NaN => f64::NAN,
        }
    }

    /// Round-to-nearest-even onto the element grid with saturation.
    /// The caller guarantees `value` is finite.
    pub(crate) fn encode_bits(&self, value: f64) -> u8 {
        debug_assert!(value.is_finite());
        let sign = if value.is_sign_negative() { self.sign_bit() } else { 0 };
        let a = value.abs();
        if a >= self.max_norm {
            return sign | self.max_magnitude_code();
        }
        if a == 0.0 {
            return sign;
        }
        if self.integer_mode {
            let n = (a * pow2(self.frac_bits as i32)).round_ties_even() as u32;
            let n = n.min(u32::from(self.max_magnitude_code()));
            return sign | n as u8;
        }
        let man_bits = self.man_bits as i32;
        let mut exp = floor_log2(a).max(self.min_normal_exp());
        let mut n = (a * pow2(man_bits - exp)).round_ties_even() as u32;
        if n == 1 << (man_bits + 1) {
            n >>= 1;
            exp += 1;
        }
        let mag = if n < 1 << man_bits {
            // subnormal: exponent field stays zero
            n
        } else {
            (((exp + self.bias) as u32) << man_bits) | (n - (1 << man_bits))
        };
        sign | (mag.min(u32::from(self.max_magnitude_code())) as u8)
    }

    /// Every finite non-negative grid value, ascending.
    pub fn positive_grid(&self) -> Vec<f64> {
        (0..=self.max_magnitude_code()).map(|c| self.decode_finite(c)).collect()
    }
}

/// Result of decoding an element code.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ElementValue {
    Finite(f64),
    Infinite { negative: bool },
    NaN,
}

impl ElementValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            ElementValue::Finite(v) => Some(v),
            _ => None,
        }
    }
}

/// Raw code bits tagged with their width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ScalarCode {
    bits: u8,
    width: u8,
}

impl ScalarCode {
    pub fn new(bits: u8, width: u32) -> Result<Self> {
        if width == 0 || width > 8 || (width < 8 && u32::from(bits) >> width != 0) {
            return Err(Error::InvalidArgument(format!("code {bits:#x} does not fit in {width} bits")));
        }
        Ok(ScalarCode { bits, width: width as u8 })
    }

    pub fn bits(self) -> u8 {
        self.bits
    }

    pub fn width(self) -> u32 {
        u32::from(self.width)
    }
}

pub fn decode_element(code: ScalarCode, fmt: &ElementFormat) -> Result<ElementValue> {
    if code.width() != fmt.width() {
        return Err(Error::WidthMismatch { expected: fmt.width(), got: code.width() });
    }
    Ok(fmt.decode_bits(code.bits))
}

pub fn encode_element(value: f64, fmt: &ElementFormat) -> Result<ScalarCode> {
    if !value.is_finite() {
        return Err(Error::NonFinite(value));
    }
    Ok(ScalarCode { bits: fmt.encode_bits(value), width: fmt.width() as u8 })
}

/// Decoded E8M0 shared-scale code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum E8m0 {
    /// Unbiased exponent in `-126..=127`.
    Exponent(i32),
    /// Code `0x00`: reserved by MX+ to mark an all-zero block. Plain MX
    /// reads it as the exponent `-127` instead.
    AllZero,
    NaN,
}

pub const E8M0_BIAS: i32 = 127;

pub fn decode_scale_e8m0(code: u8) -> E8m0 {
    match code {
        0x00 => E8m0::AllZero,
        0xff => E8m0::NaN,
        c => E8m0::Exponent(i32::from(c) - E8M0_BIAS),
    }
}

/// Biased E8M0 code for an exponent in `-127..=127`.
pub fn encode_scale_e8m0(exp: i32) -> u8 {
    debug_assert!((-E8M0_BIAS..=E8M0_BIAS).contains(&exp));
    (exp + E8M0_BIAS) as u8
}

/// RNE onto the positive E4M3 grid, saturating at 448. Values below half the
/// smallest subnormal round to the zero code.
pub fn encode_scale_e4m3(value: f64) -> Result<ScalarCode> {
    if !(value.is_finite() && value > 0.0) {
        return Err(Error::InvalidScale(value));
    }
    Ok(ScalarCode { bits: ElementFormat::E4M3.encode_bits(value), width: 8 })
}

pub fn decode_scale_e4m3(code: u8) -> Result<f64> {
    match ElementFormat::E4M3.decode_bits(code) {
        ElementValue::Finite(v) if v >= 0.0 => Ok(v),
        _ => Err(Error::NanScale(code)),
    }
}
