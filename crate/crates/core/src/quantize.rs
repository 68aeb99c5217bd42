//! Sign binarization of embeddings.

use thiserror::Error;

pub use crate::bits::{hamming, BitString};
use crate::synthbio::Embedding;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QuantizeError {
    #[error("embedding has dimension {got}, quantizer expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid quantizer configuration: {0}")]
    InvalidConfig(String),
}

/// Which embedding coordinates feed the bit string, in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizerConfig {
    dim: usize,
    selected_positions: Vec<usize>,
}

impl QuantizerConfig {
    /// `selected_positions` must be strictly increasing and below `dim`.
    pub fn new(dim: usize, selected_positions: Vec<usize>) -> Result<Self, QuantizeError> {
        if selected_positions.is_empty() {
            return Err(QuantizeError::InvalidConfig("no positions selected".into()));
        }
        if selected_positions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(QuantizeError::InvalidConfig(
                "positions must be strictly increasing".into(),
            ));
        }
        if selected_positions.last().is_some_and(|&p| p >= dim) {
            return Err(QuantizeError::InvalidConfig(format!(
                "position out of range for dimension {dim}"
            )));
        }
        Ok(Self {
            dim,
            selected_positions,
        })
    }

    /// Selects the first `code_length` coordinates.
    pub fn prefix(dim: usize, code_length: usize) -> Result<Self, QuantizeError> {
        if code_length > dim {
            return Err(QuantizeError::InvalidConfig(format!(
                "code length {code_length} exceeds dimension {dim}"
            )));
        }
        Self::new(dim, (0..code_length).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn code_length(&self) -> usize {
        self.selected_positions.len()
    }

    pub fn selected_positions(&self) -> &[usize] {
        &self.selected_positions
    }

    pub fn is_prefix(&self) -> bool {
        self.selected_positions.iter().enumerate().all(|(i, &p)| i == p)
    }
}

/// Bit `i` is set iff the `i`-th selected coordinate is nonnegative.
pub fn quantize(e: &Embedding, cfg: &QuantizerConfig) -> Result<BitString, QuantizeError> {
    if e.dim() != cfg.dim {
        return Err(QuantizeError::DimensionMismatch {
            expected: cfg.dim,
            got: e.dim(),
        });
    }
    let values = e.values();
    let mut out = BitString::zeros(cfg.code_length());
    for (i, &p) in cfg.selected_positions.iter().enumerate() {
        if values[p] >= 0.0 {
            out.set(i, true);
        }
    }
    Ok(out)
}
