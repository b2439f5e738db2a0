//! One handle for every supported block format, with its command-line name
//! and its block-file id.
//!
//! | name | id | k | bytes/block |
//! |---|---|---|---|
//! | `mxfp4`, `mxfp4+`, `mxfp4++` | 1 | 32 | 17, 18, 18 |
//! | `mxfp6` (E2M3) and `+`/`++` | 2 | 32 | 25, 26, 26 |
//! | `mxfp6-e3m2` and `+`/`++` | 3 | 32 | 25, 26, 26 |
//! | `mxfp8` (E4M3) and `+`/`++` | 4 | 32 | 33, 34, 34 |
//! | `mxfp8-e5m2` and `+`/`++` | 5 | 32 | 33, 34, 34 |
//! | `mxint8`, `mxint8+` | 6 | 32 | 33, 34 |
//! | `mxint4`, `mxint4+` | 7 | 32 | 17, 18 |
//! | `nvfp4`, `nvfp4+` | 8 | 16 | 9, 9 + one meta byte per block pair |
//! | `msfp12`, `msfp14`, `msfp16` | 16, 17, 18 | 16 | 9, 13, 17 |
//! | `smx4`, `smx6`, `smx9` | 32, 33, 34 | 16 | 8, 12, 18 |
//!
//! The variant byte of the block file is 0 (plain), 1 (`+`) or 2 (`++`).

use std::fmt;
use std::str::FromStr;

use crate::blockcodec::{self, EncodedBlock, MxFormatConfig, Variant};
use crate::error::{Error, Result};
use crate::formats::ElementFormat;
use crate::legacy::{self, MsfpConfig, SmxConfig, LEGACY_BLOCK};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Format {
    Mx(MxFormatConfig),
    Msfp(MsfpConfig),
    Smx(SmxConfig),
}

const MX_ELEMENTS: [(ElementFormat, &str, u8); 7] = [
    (ElementFormat::E2M1, "mxfp4", 1),
    (ElementFormat::E2M3, "mxfp6", 2),
    (ElementFormat::E3M2, "mxfp6-e3m2", 3),
    (ElementFormat::E4M3, "mxfp8", 4),
    (ElementFormat::E5M2, "mxfp8-e5m2", 5),
    (ElementFormat::INT8, "mxint8", 6),
    (ElementFormat::INT4, "mxint4", 7),
];

const NVFP4_ID: u8 = 8;
const SMX: [(SmxConfig, &str, u8); 3] =
    [(SmxConfig::Smx4, "smx4", 32), (SmxConfig::Smx6, "smx6", 33), (SmxConfig::Smx9, "smx9", 34)];

fn variant_code(v: Variant) -> u8 {
    match v {
        Variant::Plain => 0,
        Variant::Plus => 1,
        Variant::PlusPlus => 2,
    }
}

impl Format {
    pub fn mx(element: ElementFormat, variant: Variant) -> Format {
        Format::Mx(MxFormatConfig::mx(element, variant))
    }

    pub fn nvfp4(plus: bool) -> Format {
        Format::Mx(MxFormatConfig::nvfp4(plus))
    }

    /// Every named format, in table order.
    pub fn all() -> Vec<Format> {
        let mut out = Vec::new();
        for (elem, _, _) in MX_ELEMENTS {
            out.push(Format::mx(elem, Variant::Plain));
            out.push(Format::mx(elem, Variant::Plus));
            if !elem.integer_mode {
                out.push(Format::mx(elem, Variant::PlusPlus));
            }
        }
        out.push(Format::nvfp4(false));
        out.push(Format::nvfp4(true));
        for n in [12, 14, 16] {
            out.push(Format::Msfp(MsfpConfig { total_bits: n }));
        }
        for (cfg, _, _) in SMX {
            out.push(Format::Smx(cfg));
        }
        out
    }

    pub fn block_size(&self) -> usize {
        match self {
            Format::Mx(c) => c.block_size,
            Format::Msfp(_) | Format::Smx(_) => LEGACY_BLOCK,
        }
    }

    pub fn variant(&self) -> Variant {
        match self {
            Format::Mx(c) => c.variant,
            Format::Msfp(_) | Format::Smx(_) => Variant::Plain,
        }
    }

    pub fn mx_config(&self) -> Option<&MxFormatConfig> {
        match self {
            Format::Mx(c) => Some(c),
            _ => None,
        }
    }

    /// Element code width in bits.
    pub fn element_width(&self) -> u32 {
        match self {
            Format::Mx(c) => c.element.width(),
            Format::Msfp(c) => c.width(),
            Format::Smx(c) => c.width(),
        }
    }

    pub fn encode_block(&self, values: &[f32]) -> Result<EncodedBlock> {
        match self {
            Format::Mx(c) => blockcodec::encode_block(values, c),
            Format::Msfp(c) => legacy::msfp_encode_block(values, c),
            Format::Smx(c) => legacy::smx_encode_block(values, c),
        }
    }

    pub fn decode_block(&self, block: &EncodedBlock) -> Result<Vec<f64>> {
        match self {
            Format::Mx(c) => blockcodec::decode_block(block, c),
            Format::Msfp(c) => legacy::msfp_decode_block(block, c),
            Format::Smx(c) => legacy::smx_decode_block(block, c),
        }
    }

    /// `(format id, variant code)` as written to block files.
    pub fn file_id(&self) -> (u8, u8) {
        match self {
            Format::Mx(c) if c.is_nvfp4() => (NVFP4_ID, variant_code(c.variant)),
            Format::Mx(c) => {
                let id = MX_ELEMENTS.iter().find(|e| e.0 == c.element).map(|e| e.2).unwrap();
                (id, variant_code(c.variant))
            }
            Format::Msfp(c) => (16 + ((c.total_bits - 12) / 2) as u8, 0),
            Format::Smx(c) => (SMX.iter().find(|e| e.0 == *c).unwrap().2, 0),
        }
    }

    pub fn from_file_id(id: u8, variant: u8, block_size: u8) -> Result<Format> {
        let unknown = Error::UnknownFormatId { id, variant, block_size };
        let found = Format::all()
            .into_iter()
            .find(|f| f.file_id() == (id, variant) && f.block_size() == usize::from(block_size));
        found.ok_or(unknown)
    }

    /// Serialized size of one block. NVFP4+ metadata is shared between
    /// block pairs and is not included here.
    pub fn block_bytes(&self) -> usize {
        let k = self.block_size();
        let elems = (k * self.element_width() as usize).div_ceil(8);
        let extra = match self {
            Format::Mx(c) if c.is_nvfp4() => 0,
            Format::Mx(c) => usize::from(c.variant.has_meta()),
            Format::Msfp(_) => 0,
            Format::Smx(_) => 1,
        };
        1 + elems + extra
    }

    /// Average storage cost in bits per element over whole blocks.
    pub fn bits_per_element(&self) -> f64 {
        let mut bytes = self.block_bytes() as f64;
        if matches!(self, Format::Mx(c) if c.is_nvfp4() && c.variant == Variant::Plus) {
            bytes += 0.5;
        }
        bytes * 8.0 / self.block_size() as f64
    }

    pub fn is_legacy(&self) -> bool {
        !matches!(self, Format::Mx(_))
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Format::Mx(c) if c.is_nvfp4() => write!(f, "nvfp4{}", c.variant.suffix()),
            Format::Mx(c) => {
                let base = MX_ELEMENTS.iter().find(|e| e.0 == c.element).map(|e| e.1).unwrap();
                write!(f, "{base}{}", c.variant.suffix())
            }
            Format::Msfp(c) => write!(f, "msfp{}", c.total_bits),
            Format::Smx(c) => f.write_str(SMX.iter().find(|e| e.0 == *c).unwrap().1),
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Format> {
        let name = s.trim().to_ascii_lowercase();
        Format::all().into_iter().find(|f| f.to_string() == name).ok_or_else(|| Error::UnknownFormatName(s.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for f in Format::all() {
            assert_eq!(f.to_string().parse::<Format>().unwrap(), f);
        }
        assert_eq!("MXFP4+".parse::<Format>().unwrap(), Format::mx(ElementFormat::E2M1, Variant::Plus));
        assert!(matches!("mxint8++".parse::<Format>(), Err(Error::UnknownFormatName(_))));
        assert!("fp4".parse::<Format>().is_err());
    }

    #[test]
    fn required_names_exist() {
        for name in [
            "mxfp4", "mxfp4+", "mxfp4++", "mxfp6", "mxfp6+", "mxfp8", "mxfp8+", "mxint8", "mxint8+", "mxint4",
            "mxint4+", "nvfp4", "nvfp4+", "msfp12", "msfp14", "msfp16", "smx4", "smx6", "smx9",
        ] {
            assert!(name.parse::<Format>().is_ok(), "{name}");
        }
    }

    #[test]
    fn file_ids_are_unique_and_invertible() {
        let all = Format::all();
        for f in &all {
            let (id, v) = f.file_id();
            assert_eq!(Format::from_file_id(id, v, f.block_size() as u8).unwrap(), *f);
        }
        assert!(matches!(Format::from_file_id(99, 0, 32), Err(Error::UnknownFormatId { .. })));
        assert!(Format::from_file_id(1, 0, 16).is_err());
    }

    #[test]
    fn block_sizes_in_bytes() {
        let bytes = |s: &str| s.parse::<Format>().unwrap().block_bytes();
        assert_eq!(bytes("mxfp4"), 17);
        assert_eq!(bytes("mxfp4+"), 18);
        assert_eq!(bytes("mxfp6"), 25);
        assert_eq!(bytes("mxfp6+"), 26);
        assert_eq!(bytes("mxfp8+"), 34);
        assert_eq!(bytes("mxint8"), 33);
        assert_eq!(bytes("nvfp4"), 9);
        assert_eq!(bytes("msfp12"), 9);
        assert_eq!(bytes("smx4"), 8);
        assert_eq!(bytes("smx9"), 18);
    }

    #[test]
    fn average_widths() {
        let bpe = |s: &str| s.parse::<Format>().unwrap().bits_per_element();
        assert_eq!(bpe("mxfp4"), 4.25);
        assert_eq!(bpe("mxfp4+"), 4.5);
        assert_eq!(bpe("nvfp4"), 4.5);
        assert_eq!(bpe("nvfp4+"), 4.75);
        assert_eq!(bpe("msfp12"), MsfpConfig { total_bits: 12 }.bits_per_element());
        assert_eq!(bpe("smx6"), SmxConfig::Smx6.bits_per_element());
    }
}
