use rayon::prelude::*;

use super::EncodedBlock;
use crate::error::{Error, Result};
use crate::format::Format;
use crate::tensor::Tensor;

/// A tensor quantized block-by-block along its last axis.
///
/// Each row of `shape[last]` values is split into `ceil(cols / k)` blocks;
/// the final block of every row is zero-padded by `tail_pad` elements.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedTensor {
    pub format: Format,
    pub shape: Vec<usize>,
    pub blocks: Vec<EncodedBlock>,
    pub tail_pad: usize,
}

impl EncodedTensor {
    pub fn blocking_axis(&self) -> usize {
        self.shape.len() - 1
    }

    pub fn cols(&self) -> usize {
        *self.shape.last().unwrap()
    }

    pub fn rows(&self) -> usize {
        self.shape[..self.shape.len() - 1].iter().product()
    }

    pub fn blocks_per_row(&self) -> usize {
        self.cols().div_ceil(self.format.block_size())
    }

    pub fn row_blocks(&self, r: usize) -> &[EncodedBlock] {
        let n = self.blocks_per_row();
        &self.blocks[r * n..(r + 1) * n]
    }

    /// Structural consistency of shape, block count and padding.
    pub fn check(&self) -> Result<()> {
        let k = self.format.block_size();
        if self.shape.is_empty() || self.shape.contains(&0) {
            return Err(Error::EmptyTensor);
        }
        let expected = self.rows() * self.blocks_per_row();
        if self.blocks.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "{} blocks for shape {:?}, expected {expected}",
                self.blocks.len(),
                self.shape
            )));
        }
        if self.tail_pad != self.blocks_per_row() * k - self.cols() {
            return Err(Error::ShapeMismatch(format!("tail padding {} is inconsistent", self.tail_pad)));
        }
        Ok(())
    }
}

pub fn encode_tensor(t: &Tensor, format: &Format) -> Result<EncodedTensor> {
    if t.is_empty() {
        return Err(Error::EmptyTensor);
    }
    let k = format.block_size();
    let cols = t.cols();
    let per_row = cols.div_ceil(k);
    let rows: Vec<Vec<EncodedBlock>> = (0..t.rows())
        .into_par_iter()
        .map(|r| {
            let row = t.row(r);
            let mut buf = vec![0.0f32; k];
            (0..per_row)
                .map(|b| {
                    let chunk = &row[b * k..cols.min((b + 1) * k)];
                    buf.fill(0.0);
                    buf[..chunk.len()].copy_from_slice(chunk);
                    format.encode_block(&buf)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EncodedTensor {
        format: *format,
        shape: t.shape().to_vec(),
        blocks: rows.into_iter().flatten().collect(),
        tail_pad: per_row * k - cols,
    })
}

pub fn decode_tensor(et: &EncodedTensor) -> Result<Tensor> {
    et.check()?;
    let cols = et.cols();
    let rows: Vec<Vec<f32>> = (0..et.rows())
        .into_par_iter()
        .map(|r| {
            let mut row = Vec::with_capacity(et.blocks_per_row() * et.format.block_size());
            for b in et.row_blocks(r) {
                row.extend(et.format.decode_block(b)?.into_iter().map(|v| v as f32));
            }
            row.truncate(cols);
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Tensor::new(et.shape.clone(), rows.concat())
}
