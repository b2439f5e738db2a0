//! Packed little-endian block layouts.
//!
//! MX blocks are `[scale][element codes][meta]`, with element codes packed
//! LSB-first into a bit stream (for 4-bit codes element `2i` is the low
//! nibble of byte `i`; 6-bit codes fill three bytes per four elements). The
//! meta byte is present for plus variants only.
//!
//! NVFP4 blocks are `[E4M3 scale][8 element bytes]`. NVFP4+ follows every
//! pair of blocks with one meta byte, low nibble for the first block's BM
//! index and high nibble for the second; an odd trailing block gets its own
//! meta byte with a zero high nibble.
//!
//! MSFP blocks are `[scale][codes]`; SMX blocks are
//! `[scale][microexponent byte][codes]`.

use crate::blockcodec::{EncodedBlock, Variant};
use crate::error::{Error, Result};
use crate::format::Format;

fn pack_codes(codes: &[u8], width: u32, out: &mut Vec<u8>) {
    let start = out.len();
    out.resize(start + (codes.len() * width as usize).div_ceil(8), 0);
    for (i, &c) in codes.iter().enumerate() {
        let bit = i * width as usize;
        let word = u16::from(c) << (bit % 8);
        out[start + bit / 8] |= word as u8;
        if bit % 8 + width as usize > 8 {
            out[start + bit / 8 + 1] |= (word >> 8) as u8;
        }
    }
}

fn unpack_codes(bytes: &[u8], k: usize, width: u32) -> Vec<u8> {
    let mask = ((1u16 << width) - 1) as u8;
    (0..k)
        .map(|i| {
            let bit = i * width as usize;
            let lo = u16::from(bytes[bit / 8]);
            let hi = bytes.get(bit / 8 + 1).map_or(0, |&b| u16::from(b));
            ((lo | hi << 8) >> (bit % 8)) as u8 & mask
        })
        .collect()
}

fn is_nvfp4_plus(format: &Format) -> bool {
    matches!(format, Format::Mx(c) if c.is_nvfp4() && c.variant == Variant::Plus)
}

/// Payload size of `blocks` consecutive blocks.
pub fn payload_len(format: &Format, blocks: usize) -> usize {
    let meta = if is_nvfp4_plus(format) { blocks.div_ceil(2) } else { 0 };
    blocks * format.block_bytes() + meta
}

fn pack_one(format: &Format, block: &EncodedBlock, out: &mut Vec<u8>) {
    out.push(block.scale_code);
    if let Format::Smx(_) = format {
        out.push(block.meta.unwrap_or(0));
    }
    pack_codes(&block.elem_codes, format.element_width(), out);
    if let Format::Mx(c) = format {
        if !c.is_nvfp4() && c.variant.has_meta() {
            out.push(block.meta.unwrap_or(0));
        }
    }
}

pub fn pack_blocks(format: &Format, blocks: &[EncodedBlock]) -> Vec<u8> {
    let mut out = Vec::with_capacity(payload_len(format, blocks.len()));
    let nv_plus = is_nvfp4_plus(format);
    for (i, b) in blocks.iter().enumerate() {
        pack_one(format, b, &mut out);
        if nv_plus && (i % 2 == 1 || i + 1 == blocks.len()) {
            let lo = blocks[i - i % 2].meta.unwrap_or(0) & 0x0f;
            let hi = if i % 2 == 1 { b.meta.unwrap_or(0) & 0x0f } else { 0 };
            out.push(lo | hi << 4);
        }
    }
    out
}

pub fn unpack_blocks(format: &Format, bytes: &[u8], count: usize) -> Result<Vec<EncodedBlock>> {
    let expected = payload_len(format, count);
    if bytes.len() < expected {
        return Err(Error::Truncated);
    }
    if bytes.len() > expected {
        return Err(Error::Malformed(format!("block payload has {} bytes, expected {expected}", bytes.len())));
    }
    let k = format.block_size();
    let width = format.element_width();
    let code_bytes = (k * width as usize).div_ceil(8);
    let nv_plus = is_nvfp4_plus(format);
    let mut pos = 0;
    let mut out: Vec<EncodedBlock> = Vec::with_capacity(count);
    for i in 0..count {
        let scale_code = bytes[pos];
        pos += 1;
        let mut meta = None;
        if let Format::Smx(_) = format {
            meta = Some(bytes[pos]);
            pos += 1;
        }
        let elem_codes = unpack_codes(&bytes[pos..pos + code_bytes], k, width);
        pos += code_bytes;
        if let Format::Mx(c) = format {
            if !c.is_nvfp4() && c.variant.has_meta() {
                meta = Some(bytes[pos]);
                pos += 1;
            }
        }
        out.push(EncodedBlock { scale_code, elem_codes, meta });
        if nv_plus && (i % 2 == 1 || i + 1 == count) {
            let m = bytes[pos];
            pos += 1;
            if i % 2 == 1 {
                out[i - 1].meta = Some(m & 0x0f);
                out[i].meta = Some(m >> 4);
            } else {
                if m >> 4 != 0 {
                    return Err(Error::Malformed("unpaired NVFP4+ meta byte has a high nibble".into()));
                }
                out[i].meta = Some(m);
            }
        }
    }
    Ok(out)
}
