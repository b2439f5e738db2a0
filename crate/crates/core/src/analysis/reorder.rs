use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Channel permutation: `forward[new] = old`, `inverse[old] = new`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Permutation {
    pub forward: Vec<usize>,
    pub inverse: Vec<usize>,
}

impl Permutation {
    pub fn from_forward(forward: Vec<usize>) -> Result<Self> {
        let mut inverse = vec![usize::MAX; forward.len()];
        for (new, &old) in forward.iter().enumerate() {
            if old >= forward.len() || inverse[old] != usize::MAX {
                return Err(Error::InvalidArgument("forward map is not a bijection".into()));
            }
            inverse[old] = new;
        }
        Ok(Permutation { forward, inverse })
    }

    pub fn identity(n: usize) -> Self {
        Permutation { forward: (0..n).collect(), inverse: (0..n).collect() }
    }

    pub fn inverted(&self) -> Self {
        Permutation { forward: self.inverse.clone(), inverse: self.forward.clone() }
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }
}

/// Which half of the non-top channels fills the free slots first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum HalfOrder {
    /// Fewer-outlier half first, then the other half.
    #[default]
    LowerFirst,
    UpperFirst,
}

/// Spread the outlier-heavy channels one per block.
///
/// Channels are sorted by count, descending, ties by lower index. The top
/// `C / block_size` take positions `0, block_size, 2 * block_size, ...`. The
/// rest split into an upper half (the first `ceil(R / 2)`, more outliers)
/// and a lower half, which fill the remaining slots in order, each half in
/// descending order. A channel count that is not a multiple of the block
/// size is padded with zero-count virtual channels that are dropped from
/// the result.
pub fn reorder_channels(counts: &[f64], block_size: usize, order: HalfOrder) -> Result<Permutation> {
    if block_size == 0 {
        return Err(Error::InvalidArgument("block size must be positive".into()));
    }
    if counts.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidArgument("channel counts must be finite".into()));
    }
    let c = counts.len();
    let padded = c.div_ceil(block_size) * block_size;
    let count = |i: usize| if i < c { counts[i] } else { 0.0 };
    let mut sorted: Vec<usize> = (0..padded).collect();
    sorted.sort_by(|&a, &b| count(b).total_cmp(&count(a)).then(a.cmp(&b)));

    let blocks = padded / block_size;
    let (top, rest) = sorted.split_at(blocks);
    let (upper, lower) = rest.split_at(rest.len().div_ceil(2));
    let fill: Vec<usize> = match order {
        HalfOrder::LowerFirst => lower.iter().chain(upper).copied().collect(),
        HalfOrder::UpperFirst => upper.iter().chain(lower).copied().collect(),
    };
    let mut slots = vec![0usize; padded];
    let mut fill = fill.into_iter();
    for (pos, slot) in slots.iter_mut().enumerate() {
        *slot = if pos % block_size == 0 { top[pos / block_size] } else { fill.next().unwrap() };
    }
    Permutation::from_forward(slots.into_iter().filter(|&ch| ch < c).collect())
}

/// Element-wise mean of several count vectors.
pub fn average_counts(sets: &[Vec<u64>]) -> Result<Vec<f64>> {
    let first = sets.first().ok_or_else(|| Error::InvalidArgument("no count sets".into()))?;
    if sets.iter().any(|s| s.len() != first.len()) {
        return Err(Error::ShapeMismatch("count sets have different channel counts".into()));
    }
    let n = sets.len() as f64;
    Ok((0..first.len()).map(|i| sets.iter().map(|s| s[i] as f64).sum::<f64>() / n).collect())
}

/// Permute the last axis: output column `p` is input column `forward[p]`.
pub fn apply_permutation(t: &Tensor, perm: &Permutation) -> Result<Tensor> {
    if perm.len() != t.cols() {
        return Err(Error::ShapeMismatch(format!(
            "permutation over {} channels applied to {} columns",
            perm.len(),
            t.cols()
        )));
    }
    let mut data = Vec::with_capacity(t.len());
    for r in 0..t.rows() {
        let row = t.row(r);
        data.extend(perm.forward.iter().map(|&old| row[old]));
    }
    Tensor::new(t.shape().to_vec(), data)
}
