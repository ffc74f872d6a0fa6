//! Mesh restoration: hole detection and triangulation, damage simulation,
//! patch-model inpainting, missing-vertex recovery and denoising.

mod damage;
mod inpainter;
mod pipeline;
mod triangulate;

pub use damage::{drop_vertices, punch_holes, DroppedVertices, HoleRecord};
pub use inpainter::{
    stub_fill, stub_fill_file, DictionaryInpainter, ExternalInpainter, PatchInpainter, StubInpainter,
};
pub use pipeline::{
    compute_frames, denoise, evaluate_repair, fill_gaps, generate_quads, inpaint, learn_self_similar, recover_vertices, DenoiseReport, FrameSource,
    HoleReport, InpaintConfig, RecoveryReport, RepairReport, StageTiming,
};
pub use triangulate::{fill_holes, hole_loops, triangulate_hole, FillOptions};

use crate::frames::FrameError;
use crate::mesh::{BoundaryLoop, MeshError};
use crate::metrics::MetricsError;
use crate::patch::PatchError;
use crate::sparse::SparseError;

#[derive(Debug, thiserror::Error)]
pub enum InpaintError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Patch(#[from] PatchError),
    #[error(transparent)]
    Sparse(#[from] SparseError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("boundary loop has {0} vertices; at least 3 are needed")]
    LoopTooShort(usize),
    #[error("boundary loop visits vertex {0} twice")]
    NonSimpleLoop(usize),
    #[error("the requested damage leaves no faces")]
    NoFacesLeft,
    #[error("external inpainter failed: {0}")]
    External(String),
    #[error("inpainter broke its contract: {0}")]
    Contract(String),
}

/// A filled hole: its former boundary and what the triangulation added.
#[derive(Debug, Clone, PartialEq)]
pub struct HoleRegion {
    pub boundary: BoundaryLoop,
    pub scaffold_vertices: Vec<usize>,
    pub scaffold_faces: Vec<usize>,
}
