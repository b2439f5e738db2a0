//! Binary containers for raw tensors (`MXTN`) and encoded block streams
//! (`MXBK`), plus JSON report output. Everything is little-endian.
//!
//! ```text
//! MXTN: "MXTN" | version u16 | dtype u8 (0 = f32) | rank u8 | dims u32 × rank | f32 × prod(dims)
//! MXBK: "MXBK" | version u16 | format id u8 | k u8 | variant u8 | rank u8 | dims u32 × rank
//!       | packed blocks | tail_pad u8
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::blockcodec::EncodedTensor;
use crate::error::{Error, Result};
use crate::format::Format;
use crate::tensor::Tensor;
use crate::wire;

pub const TENSOR_MAGIC: [u8; 4] = *b"MXTN";
pub const BLOCK_MAGIC: [u8; 4] = *b"MXBK";
pub const VERSION: u16 = 1;
pub const DTYPE_F32: u8 = 0;

fn put_shape(out: &mut Vec<u8>, shape: &[usize]) -> Result<()> {
    let rank =
        u8::try_from(shape.len()).map_err(|_| Error::InvalidArgument(format!("rank {} too large", shape.len())))?;
    out.push(rank);
    for &d in shape {
        let d = u32::try_from(d).map_err(|_| Error::InvalidArgument(format!("dimension {d} exceeds u32")))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    Ok(())
}

/// Cursor over a fully read file.
struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).ok_or(Error::Truncated)?;
        let s = self.buf.get(self.pos..end).ok_or(Error::Truncated)?;
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn header(&mut self, magic: [u8; 4]) -> Result<()> {
        let got: [u8; 4] = self.take(4)?.try_into().unwrap();
        if got != magic {
            return Err(Error::BadMagic(got));
        }
        match self.u16()? {
            VERSION => Ok(()),
            v => Err(Error::UnsupportedVersion(v)),
        }
    }

    fn shape(&mut self) -> Result<Vec<usize>> {
        let rank = self.u8()?;
        if rank == 0 {
            return Err(Error::Malformed("rank 0".into()));
        }
        let shape = (0..rank).map(|_| self.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        if shape.contains(&0) {
            return Err(Error::EmptyTensor);
        }
        Ok(shape)
    }

    fn rest(&mut self) -> &'a [u8] {
        let s = &self.buf[self.pos..];
        self.pos = self.buf.len();
        s
    }
}

fn checked_product(shape: &[usize]) -> Result<usize> {
    shape
        .iter()
        .try_fold(1usize, |a, &d| a.checked_mul(d))
        .ok_or_else(|| Error::Malformed(format!("shape {shape:?} overflows")))
}

pub fn tensor_to_bytes(t: &Tensor) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(8 + 4 * t.shape().len() + 4 * t.len());
    out.extend_from_slice(&TENSOR_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(DTYPE_F32);
    put_shape(&mut out, t.shape())?;
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn tensor_from_bytes(bytes: &[u8]) -> Result<Tensor> {
    let mut c = Cursor { buf: bytes, pos: 0 };
    c.header(TENSOR_MAGIC)?;
    let dtype = c.u8()?;
    if dtype != DTYPE_F32 {
        return Err(Error::UnknownDtype(dtype));
    }
    let shape = c.shape()?;
    let n = checked_product(&shape)?;
    let payload = c.rest();
    let expected = n.checked_mul(4).ok_or_else(|| Error::Malformed("payload size overflows".into()))?;
    if payload.len() < expected {
        return Err(Error::Truncated);
    }
    if payload.len() > expected {
        return Err(Error::Malformed(format!("{} trailing bytes", payload.len() - expected)));
    }
    let data = payload.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect();
    Tensor::new(shape, data)
}

pub fn blocks_to_bytes(et: &EncodedTensor) -> Result<Vec<u8>> {
    et.check()?;
    let (id, variant) = et.format.file_id();
    let k = u8::try_from(et.format.block_size()).map_err(|_| Error::InvalidConfig("block size exceeds 255".into()))?;
    let pad = u8::try_from(et.tail_pad).map_err(|_| Error::InvalidConfig("tail padding exceeds 255".into()))?;
    let mut out = Vec::with_capacity(12 + 4 * et.shape.len() + wire::payload_len(&et.format, et.blocks.len()));
    out.extend_from_slice(&BLOCK_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&[id, k, variant]);
    put_shape(&mut out, &et.shape)?;
    out.extend(wire::pack_blocks(&et.format, &et.blocks));
    out.push(pad);
    Ok(out)
}

pub fn blocks_from_bytes(bytes: &[u8]) -> Result<EncodedTensor> {
    let mut c = Cursor { buf: bytes, pos: 0 };
    c.header(BLOCK_MAGIC)?;
    let (id, k, variant) = (c.u8()?, c.u8()?, c.u8()?);
    let format = Format::from_file_id(id, variant, k)?;
    let shape = c.shape()?;
    let cols = *shape.last().unwrap();
    let count = (checked_product(&shape)? / cols)
        .checked_mul(cols.div_ceil(format.block_size()))
        .ok_or_else(|| Error::Malformed("block count overflows".into()))?;
    let rest = c.rest();
    let expected = wire::payload_len(&format, count);
    if rest.len() <= expected {
        return Err(Error::Truncated);
    }
    let (payload, trailer) = rest.split_at(expected);
    if trailer.len() > 1 {
        return Err(Error::Malformed(format!("{} trailing bytes", trailer.len() - 1)));
    }
    let et = EncodedTensor {
        format,
        shape,
        blocks: wire::unpack_blocks(&format, payload, count)?,
        tail_pad: usize::from(trailer[0]),
    };
    et.check().map_err(|e| Error::Malformed(e.to_string()))?;
    Ok(et)
}

pub fn write_tensor_to<W: Write>(t: &Tensor, mut w: W) -> Result<()> {
    w.write_all(&tensor_to_bytes(t)?)?;
    w.flush()?;
    Ok(())
}

pub fn read_tensor_from<R: Read>(mut r: R) -> Result<Tensor> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    tensor_from_bytes(&buf)
}

pub fn write_blocks_to<W: Write>(et: &EncodedTensor, mut w: W) -> Result<()> {
    w.write_all(&blocks_to_bytes(et)?)?;
    w.flush()?;
    Ok(())
}

pub fn read_blocks_from<R: Read>(mut r: R) -> Result<EncodedTensor> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    blocks_from_bytes(&buf)
}

pub fn write_tensor(path: impl AsRef<Path>, t: &Tensor) -> Result<()> {
    write_tensor_to(t, BufWriter::new(File::create(path)?))
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    read_tensor_from(BufReader::new(File::open(path)?))
}

pub fn write_blocks(path: impl AsRef<Path>, et: &EncodedTensor) -> Result<()> {
    write_blocks_to(et, BufWriter::new(File::create(path)?))
}

pub fn read_blocks(path: impl AsRef<Path>) -> Result<EncodedTensor> {
    read_blocks_from(BufReader::new(File::open(path)?))
}

/// Pretty-printed UTF-8 JSON with a trailing newline.
pub fn write_json<T: Serialize, W: Write>(value: &T, mut w: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value).map_err(std::io::Error::from)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn write_json_file<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    write_json(value, BufWriter::new(File::create(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encode_tensor;

    fn ramp(rows: usize, cols: usize) -> Tensor {
        let data = (0..rows * cols).map(|i| ((i * 7919) % 97) as f32 / 13.0 - 3.5).collect();
        Tensor::from_rows(rows, cols, data).unwrap()
    }

    #[test]
    fn tensor_round_trip() {
        let t = Tensor::from_rows(2, 3, vec![1.0, -2.5, 0.0, -0.0, 3e-20, 7.0]).unwrap();
        let bytes = tensor_to_bytes(&t).unwrap();
        assert_eq!(bytes.len(), 4 + 2 + 1 + 1 + 8 + 24);
        assert_eq!(&bytes[..8], b"MXTN\x01\x00\x00\x02");
        let back = tensor_from_bytes(&bytes).unwrap();
        assert_eq!(back.shape(), &[2, 3]);
        let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&t));
        assert_eq!(tensor_to_bytes(&back).unwrap(), bytes);
    }

    #[test]
    fn tensor_errors_are_distinct() {
        let bytes = tensor_to_bytes(&ramp(2, 3)).unwrap();
        let code = |b: &[u8]| tensor_from_bytes(b).unwrap_err().code();
        assert_eq!(code(&bytes[..bytes.len() - 1]), "truncated");
        assert_eq!(code(&bytes[..5]), "truncated");
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert_eq!(code(&bad), "bad-magic");
        let mut bad = bytes.clone();
        bad[4] = 2;
        assert_eq!(code(&bad), "unsupported-version");
        let mut bad = bytes.clone();
        bad[6] = 1;
        assert_eq!(code(&bad), "unknown-dtype");
        let mut bad = bytes.clone();
        bad.push(0);
        assert_eq!(code(&bad), "malformed");
    }

    #[test]
    fn mxfp4_payload_sizes() {
        let t = ramp(1, 1024);
        let header = 4 + 2 + 3 + 1 + 2 * 4;
        for (name, payload) in [("mxfp4", 544), ("mxfp4+", 576), ("mxfp4++", 576)] {
            let et = encode_tensor(&t, &name.parse().unwrap()).unwrap();
            let bytes = blocks_to_bytes(&et).unwrap();
            assert_eq!(bytes.len(), header + payload + 1, "{name}");
        }
    }

    #[test]
    fn block_round_trip_every_format() {
        let t = Tensor::new(vec![3, 2, 50], (0..300).map(|i| ((i * 31) % 41) as f32 - 20.0).collect()).unwrap();
        for f in Format::all() {
            let et = encode_tensor(&t, &f).unwrap();
            let bytes = blocks_to_bytes(&et).unwrap();
            let back = blocks_from_bytes(&bytes).unwrap();
            assert_eq!(back, et, "{f}");
            assert_eq!(blocks_to_bytes(&back).unwrap(), bytes, "{f}");
        }
    }

    #[test]
    fn block_errors_are_distinct() {
        let et = encode_tensor(&ramp(2, 64), &"mxfp6+".parse().unwrap()).unwrap();
        let bytes = blocks_to_bytes(&et).unwrap();
        let code = |b: &[u8]| blocks_from_bytes(b).unwrap_err().code();
        assert_eq!(code(&bytes[..bytes.len() - 1]), "truncated");
        assert_eq!(code(&bytes[..3]), "truncated");
        let mut bad = bytes.clone();
        bad[3] = b'N';
        assert_eq!(code(&bad), "bad-magic");
        let mut bad = bytes.clone();
        bad[6] = 99;
        assert_eq!(code(&bad), "unknown-format-id");
        let mut bad = bytes.clone();
        bad[8] = 7;
        assert_eq!(code(&bad), "unknown-format-id");
        let mut bad = bytes.clone();
        *bad.last_mut().unwrap() = 5;
        assert_eq!(code(&bad), "malformed");
        let mut bad = bytes.clone();
        bad.push(0);
        assert_eq!(code(&bad), "malformed");
    }

    #[test]
    fn file_helpers_round_trip() {
        let dir = std::env::temp_dir().join(format!("mxplus-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let t = ramp(4, 40);
        write_tensor(dir.join("t.mxtn"), &t).unwrap();
        assert_eq!(read_tensor(dir.join("t.mxtn")).unwrap(), t);
        let et = encode_tensor(&t, &"nvfp4+".parse().unwrap()).unwrap();
        write_blocks(dir.join("t.mxbk"), &et).unwrap();
        assert_eq!(read_blocks(dir.join("t.mxbk")).unwrap(), et);
        assert_eq!(read_tensor(dir.join("missing")).unwrap_err().code(), "io");
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn json_report_fields() {
        let r = crate::analysis::mse_report(&ramp(1, 64), &"mxfp4".parse().unwrap()).unwrap();
        let mut buf = Vec::new();
        write_json(&r, &mut buf).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        for key in ["total_mse", "per_block_sse", "bm_contribution_pct", "max_elem_contribution_pct"] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }
}
