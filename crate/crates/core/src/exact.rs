//! Exact dyadic arithmetic for short reductions.
//!
//! Every value the codecs produce is `m * 2^e` with a small integer `m`, so
//! sums and products over one block pair fit comfortably in an `i128`
//! mantissa. Reductions are carried out exactly and rounded to `f64` once.

use crate::formats::pow2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Dyadic {
    mant: i128,
    exp: i32,
}

impl Dyadic {
    pub(crate) const ZERO: Dyadic = Dyadic { mant: 0, exp: 0 };

    pub(crate) fn new(mant: i128, exp: i32) -> Dyadic {
        Dyadic { mant, exp }.normalized()
    }

    pub(crate) fn mantissa(self) -> i128 {
        self.mant
    }

    /// Exponent of the least significant set bit (0 for zero).
    pub(crate) fn exponent(self) -> i32 {
        self.exp
    }

    pub(crate) fn from_f64(v: f64) -> Dyadic {
        assert!(v.is_finite(), "dyadic from non-finite {v}");
        if v == 0.0 {
            return Dyadic::ZERO;
        }
        let bits = v.to_bits();
        let biased = ((bits >> 52) & 0x7ff) as i32;
        let frac = (bits & ((1u64 << 52) - 1)) as i128;
        let (mant, exp) = if biased == 0 { (frac, -1074) } else { (frac | (1 << 52), biased - 1075) };
        let mant = if v < 0.0 { -mant } else { mant };
        Dyadic { mant, exp }.normalized()
    }

    fn normalized(self) -> Dyadic {
        if self.mant == 0 {
            return Dyadic::ZERO;
        }
        let tz = self.mant.trailing_zeros();
        Dyadic { mant: self.mant >> tz, exp: self.exp + tz as i32 }
    }

    pub(crate) fn is_zero(self) -> bool {
        self.mant == 0
    }

    pub(crate) fn signum(self) -> i32 {
        self.mant.signum() as i32
    }

    pub(crate) fn mul(self, other: Dyadic) -> Dyadic {
        if self.is_zero() || other.is_zero() {
            return Dyadic::ZERO;
        }
        let mant = self.mant.checked_mul(other.mant).expect("dyadic product exceeds 127 bits");
        Dyadic { mant, exp: self.exp + other.exp }.normalized()
    }

    pub(crate) fn add(self, other: Dyadic) -> Dyadic {
        if self.is_zero() {
            return other;
        }
        if other.is_zero() {
            return self;
        }
        let (hi, lo) = if self.exp >= other.exp { (self, other) } else { (other, self) };
        let shift = (hi.exp - lo.exp) as u32;
        let headroom = hi.mant.unsigned_abs().leading_zeros().saturating_sub(2);
        assert!(shift <= headroom, "dyadic alignment shift {shift} exceeds i128");
        let mant = (hi.mant << shift).checked_add(lo.mant).expect("dyadic sum exceeds 127 bits");
        Dyadic { mant, exp: lo.exp }.normalized()
    }

    pub(crate) fn sub(self, other: Dyadic) -> Dyadic {
        self.add(Dyadic { mant: -other.mant, exp: other.exp })
    }

    /// Nearest `f64`, ties to even.
    pub(crate) fn to_f64(self) -> f64 {
        if self.mant == 0 {
            return 0.0;
        }
        let neg = self.mant < 0;
        let mut mag = self.mant.unsigned_abs();
        let mut exp = self.exp;
        let bits = 128 - mag.leading_zeros() as i32;
        // keep 53 significant bits (fewer when the result is subnormal)
        let top = exp + bits - 1;
        let keep = if top < -1022 { 53 - (-1022 - top) } else { 53 };
        let drop = bits - keep;
        if drop > 0 {
            if drop > 127 {
                return if neg { -0.0 } else { 0.0 };
            }
            let d = drop as u32;
            let rem = mag & ((1u128 << d) - 1);
            let half = 1u128 << (d - 1);
            mag >>= d;
            if rem > half || (rem == half && mag & 1 == 1) {
                mag += 1;
            }
            exp += drop;
        }
        // mag has at most 54 bits here
        let mut v = mag as f64;
        while exp > 0 {
            let step = exp.min(1000);
            v *= pow2(step);
            exp -= step;
        }
        while exp < 0 {
            let step = exp.max(-1000);
            v *= pow2(step);
            exp -= step;
        }
        if neg {
            -v
        } else {
            v
        }
    }
}
