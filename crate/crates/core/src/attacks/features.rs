use crate::compose::PufKind;
use crate::crpgen::CrpDataset;
use crate::delay::transform_challenge;
use crate::error::{PufError, Result};

/// Parity features of a dataset: one `(n + 1)`-wide block per distinct
/// challenge in a record (k blocks for CDC, one otherwise), the last entry
/// of each block the constant +1.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    kind: PufKind,
    k: usize,
    blocks: usize,
    block_width: usize,
    data: Vec<i8>,
    labels: Vec<u8>,
}

pub fn build_features(d: &CrpDataset) -> Result<FeatureMatrix> {
    let blocks = d.kind().challenges_per_record(d.k());
    let width = d.n() + 1;
    let mut data = Vec::with_capacity(d.len() * blocks * width);
    for r in d.records() {
        for c in &r.challenges {
            if c.len() != d.n() {
                return Err(PufError::input(format!("challenge of {} stages in a {}-stage dataset", c.len(), d.n())));
            }
            data.extend_from_slice(transform_challenge(c).phi());
            data.push(1);
        }
    }
    Ok(FeatureMatrix { kind: d.kind(), k: d.k(), blocks, block_width: width, data, labels: d.responses() })
}

impl FeatureMatrix {
    /// Features from raw parts; `data` is row-major, `blocks * block_width`
    /// entries per row.
    pub fn from_parts(kind: PufKind, k: usize, blocks: usize, block_width: usize, data: Vec<i8>, labels: Vec<u8>) -> Result<Self> {
        if blocks == 0 || block_width == 0 || data.len() != labels.len() * blocks * block_width {
            return Err(PufError::input("feature data does not match its shape"));
        }
        if labels.iter().any(|&y| y > 1) || data.iter().any(|&x| x != 1 && x != -1) {
            return Err(PufError::input("features must be +-1 and labels 0/1"));
        }
        Ok(Self { kind, k, blocks, block_width, data, labels })
    }

    pub fn kind(&self) -> PufKind {
        self.kind
    }

    /// Component count of the source dataset.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    pub fn block_width(&self) -> usize {
        self.block_width
    }

    pub fn width(&self) -> usize {
        self.blocks * self.block_width
    }

    pub fn rows(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[i8] {
        let w = self.width();
        &self.data[i * w..(i + 1) * w]
    }

    #[inline]
    pub fn block(&self, i: usize, j: usize) -> &[i8] {
        let start = i * self.width() + j * self.block_width;
        &self.data[start..start + self.block_width]
    }

    /// Rows `range` as a new matrix.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        let w = self.width();
        Self {
            data: self.data[range.start * w..range.end * w].to_vec(),
            labels: self.labels[range].to_vec(),
            ..*self
        }
    }

    /// Leading rows for training, the trailing `val_fraction` for validation.
    pub fn split(&self, val_fraction: f64) -> (Self, Self) {
        let val = ((self.rows() as f64 * val_fraction).round() as usize).clamp(1, self.rows().saturating_sub(1).max(1));
        let cut = self.rows() - val.min(self.rows());
        (self.slice(0..cut), self.slice(cut..self.rows()))
    }
}
