//! Height-map patches: extraction from point clouds, connectivity records,
//! mesh reconstruction, normalization and the QPD container format.

mod extract;
mod normalize;
mod qpd;
mod reconstruct;

pub use extract::{bin_of_local, extract_dataset, extract_patch, extract_patch_labeled, CloudIndex, PatchParams};
pub use normalize::{denormalize_patches, normalize_patches, normalize_patches_with, NormRecord, NORMALIZED_MAX};
pub use qpd::{read_dataset, read_qpd, sidecar_path, write_dataset, write_qpd, HEADER_BYTES};
pub use reconstruct::{reconstruct_mesh, reconstruct_vertices, ring_fill, vertex_estimates, ResolveReport, MAX_RING_ROUNDS};

use serde::{Deserialize, Serialize};

use crate::frames::{FrameError, PatchFrame};
use crate::mesh::{MeshError, ScaleRecord};

#[derive(Debug, thiserror::Error)]
pub enum PatchError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed sidecar: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid patch: {0}")]
    InvalidPatch(Rejection),
    #[error("bad magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("truncated file: {0}")]
    Truncated(String),
    #[error("patch mismatch: expected N={expected_n}, r={expected_r}, found N={found_n}, r={found_r}")]
    ParameterMismatch {
        expected_n: usize,
        expected_r: f64,
        found_n: usize,
        found_r: f64,
    },
    #[error("heights span a degenerate range [{0}, {0}]")]
    DegenerateRange(f64),
    #[error("dataset has no connectivity map")]
    MissingConn,
    #[error("vertex {0} has no estimate and no estimated neighbour")]
    UnresolvableVertex(usize),
}

/// Why a frame produced no patch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Rejection {
    /// Fraction of empty bins inside the inscribed disk.
    EmptyDisk(f64),
    /// A bin's samples span more than the allowed height range.
    MultiLayer { bin: usize, range: f64 },
}

impl std::fmt::Display for Rejection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Rejection::EmptyDisk(frac) => write!(f, "{:.1}% of inscribed-disk bins are empty", 100.0 * frac),
            Rejection::MultiLayer { bin, range } => write!(f, "bin {bin} spans a height range of {range}"),
        }
    }
}

/// Per-bin state, stored in QPD files as 0, 1, 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum BinState {
    Valid = 0,
    /// No samples landed in the bin.
    Invalid = 1,
    /// The bin lies in a region to be inpainted.
    Hole = 2,
}

impl BinState {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(Self::Valid),
            1 => Some(Self::Invalid),
            2 => Some(Self::Hole),
            _ => None,
        }
    }
}

/// `N × N` height map in the local frame of a seed. Bin `row · N + col`
/// covers `x ∈ [-L/2 + col·h, -L/2 + (col+1)·h)` and likewise `y` for
/// `row`, with side `L = √2·r` and bin size `h = L / N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub heights: Vec<f64>,
    pub mask: Vec<BinState>,
    pub frame: PatchFrame,
    pub radius: f64,
    pub resolution: usize,
}

impl Patch {
    pub fn side(&self) -> f64 {
        grid_side(self.radius)
    }

    pub fn bin_size(&self) -> f64 {
        bin_size(self.radius, self.resolution)
    }

    pub fn len(&self) -> usize {
        self.resolution * self.resolution
    }

    pub fn is_empty(&self) -> bool {
        self.heights.is_empty()
    }

    pub fn is_valid(&self, bin: usize) -> bool {
        self.mask[bin] == BinState::Valid
    }

    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|&&s| s == BinState::Valid).count()
    }

    pub fn count(&self, state: BinState) -> usize {
        self.mask.iter().filter(|&&s| s == state).count()
    }

    /// `true` where the bin is valid.
    pub fn observed(&self) -> Vec<bool> {
        self.mask.iter().map(|&s| s == BinState::Valid).collect()
    }

    /// Local `(x, y)` of a bin centre.
    pub fn bin_center(&self, bin: usize) -> (f64, f64) {
        bin_center(self.radius, self.resolution, bin)
    }

    /// World position of a bin centre lifted to its height.
    pub fn bin_point(&self, bin: usize) -> crate::geom::Vec3 {
        let (x, y) = self.bin_center(bin);
        self.frame.to_world(&crate::geom::Vec3::new(x, y, self.heights[bin]))
    }
}

pub fn grid_side(radius: f64) -> f64 {
    std::f64::consts::SQRT_2 * radius
}

pub fn bin_size(radius: f64, resolution: usize) -> f64 {
    grid_side(radius) / resolution as f64
}

pub fn bin_center(radius: f64, resolution: usize, bin: usize) -> (f64, f64) {
    let h = bin_size(radius, resolution);
    let half = 0.5 * grid_side(radius);
    let (row, col) = (bin / resolution, bin % resolution);
    (-half + (col as f64 + 0.5) * h, -half + (row as f64 + 0.5) * h)
}

/// Vertex → `(patch, bin)` occurrences, plus the source face list needed
/// to rebuild a connected mesh.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConnMap {
    pub entries: Vec<Vec<(u32, u32)>>,
    pub faces: Vec<[usize; 3]>,
}

impl ConnMap {
    pub fn vertex_count(&self) -> usize {
        self.entries.len()
    }

    /// Number of vertices with at least one occurrence.
    pub fn covered(&self) -> usize {
        self.entries.iter().filter(|e| !e.is_empty()).count()
    }
}

/// Where a dataset came from. Rejected frames are kept here rather than
/// treated as errors.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub rejected: Vec<RejectedFrame>,
    pub normalization: Option<ScaleRecord>,
    pub frame_params: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedFrame {
    pub quad_id: usize,
    pub offset_id: usize,
    pub reason: Rejection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchDataset {
    pub resolution: usize,
    pub radius: f64,
    pub patches: Vec<Patch>,
    pub conn: Option<ConnMap>,
    pub provenance: Provenance,
}

impl PatchDataset {
    pub fn new(resolution: usize, radius: f64) -> Self {
        Self {
            resolution,
            radius,
            patches: Vec::new(),
            conn: None,
            provenance: Provenance::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    /// Signal length `N²`.
    pub fn dim(&self) -> usize {
        self.resolution * self.resolution
    }

    pub fn bin_size(&self) -> f64 {
        bin_size(self.radius, self.resolution)
    }

    pub fn check_compatible(&self, resolution: usize, radius: f64) -> Result<(), PatchError> {
        if resolution != self.resolution || radius != self.radius {
            return Err(PatchError::ParameterMismatch {
                expected_n: self.resolution,
                expected_r: self.radius,
                found_n: resolution,
                found_r: radius,
            });
        }
        Ok(())
    }

    /// Appends the patches of `other` (used to pool training sets). The
    /// connectivity map is dropped since it no longer describes one mesh.
    pub fn merge(&mut self, other: &PatchDataset) -> Result<(), PatchError> {
        self.check_compatible(other.resolution, other.radius)?;
        self.patches.extend(other.patches.iter().cloned());
        self.conn = None;
        Ok(())
    }

    /// Heights of every patch with non-valid bins filled by the mean of
    /// their valid 3×3 neighbours, repeated until every bin has a value.
    /// Bins with no valid bin anywhere in the patch become 0.
    pub fn gap_filled(&self, patch: usize) -> Vec<f64> {
        fill_by_neighbour_mean(&self.patches[patch].heights, &self.patches[patch].observed(), self.resolution)
    }
}

/// Iterative 3×3 neighbourhood-mean fill of the bins where `known` is false.
pub fn fill_by_neighbour_mean(values: &[f64], known: &[bool], n: usize) -> Vec<f64> {
    let mut out = values.to_vec();
    let mut have = known.to_vec();
    if !have.iter().any(|&k| k) {
        return vec![0.0; values.len()];
    }
    while have.iter().any(|&k| !k) {
        let mut next_have = have.clone();
        let snapshot = out.clone();
        for i in 0..n * n {
            if have[i] {
                continue;
            }
            let (r, c) = ((i / n) as i64, (i % n) as i64);
            let (mut s, mut cnt) = (0.0, 0usize);
            for dr in -1..=1 {
                for dc in -1..=1 {
                    let (rr, cc) = (r + dr, c + dc);
                    if rr < 0 || cc < 0 || rr >= n as i64 || cc >= n as i64 {
                        continue;
                    }
                    let j = rr as usize * n + cc as usize;
                    if have[j] {
                        s += snapshot[j];
                        cnt += 1;
                    }
                }
            }
            if cnt > 0 {
                out[i] = s / cnt as f64;
                next_have[i] = true;
            }
        }
        have = next_have;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bin_geometry() {
        let r = 1.0 / std::f64::consts::SQRT_2;
        // Side 1, N = 4: bins of 0.25.
        assert!((grid_side(r) - 1.0).abs() < 1e-15);
        assert!((bin_size(r, 4) - 0.25).abs() < 1e-15);
        let (x, y) = bin_center(r, 4, 0);
        assert!((x + 0.375).abs() < 1e-15 && (y + 0.375).abs() < 1e-15);
        let (x, y) = bin_center(r, 4, 4 + 3);
        assert!((x - 0.375).abs() < 1e-15 && (y + 0.125).abs() < 1e-15);
    }

    #[test]
    fn neighbour_fill_propagates() {
        let n = 4;
        let mut v = vec![0.0; 16];
        let mut k = vec![false; 16];
        v[0] = 2.0;
        k[0] = true;
        let out = fill_by_neighbour_mean(&v, &k, n);
        assert!(out.iter().all(|&x| x == 2.0));
        assert_eq!(fill_by_neighbour_mean(&v, &[false; 16], n), vec![0.0; 16]);
    }

    #[test]
    fn state_codes() {
        for s in [BinState::Valid, BinState::Invalid, BinState::Hole] {
            assert_eq!(BinState::from_code(s.code()), Some(s));
        }
        assert_eq!(BinState::from_code(3), None);
    }
}
