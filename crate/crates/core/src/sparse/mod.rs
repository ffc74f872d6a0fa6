//! Sparse coding over patch dictionaries: OMP, masked OMP, KSVD learning
//! and dictionary files.

mod dictionary;
mod ksvd;
mod omp;
mod reconstruct;

pub use dictionary::{load_dict, read_dict, save_dict, write_dict, DictMeta, Dictionary};
pub use ksvd::{ksvd_learn, ksvd_learn_dataset, training_signals, KsvdOptions, KsvdReport};
pub use omp::{masked_omp_encode, omp_encode, SparseCode, RESIDUAL_TOLERANCE};
pub use reconstruct::{reconstruct_patches, ReconstructionStats};

use crate::patch::PatchError;

/// Observed-bin mask (`true` = observed), one entry per signal component.
pub type BinMask = [bool];

#[derive(Debug, thiserror::Error)]
pub enum SparseError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("sparsity {k} must be in 1..={max}")]
    InvalidSparsity { k: usize, max: usize },
    #[error("mask has no observed entries")]
    EmptyMask,
    #[error("only {observed} observed entries for sparsity {k}")]
    TooFewObserved { observed: usize, k: usize },
    #[error("{n} training signals cannot seed {p} atoms")]
    NotEnoughSignals { n: usize, p: usize },
    #[error("training data is degenerate (all-zero signals)")]
    DegenerateData,
    #[error("atom {0} is not unit norm")]
    NotUnitNorm(usize),
    #[error("dictionary contains non-finite values")]
    NonFinite,
    #[error("bad magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("truncated dictionary file: {0}")]
    Truncated(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed dictionary metadata: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Patch(#[from] PatchError),
}
