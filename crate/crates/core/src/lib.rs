//! Surface geometry as rigid-frame height-map patches: extraction and
//! exact-connectivity reconstruction, sparse patch dictionaries (OMP and
//! KSVD), hole inpainting, missing-vertex recovery, denoising and the
//! error and compression metrics used to compare them.

pub mod config;
pub mod frames;
pub mod geom;
pub mod inpaint;
pub mod mesh;
pub mod metrics;
pub mod patch;
pub mod shapes;
pub mod sparse;
pub mod spatial;

pub use config::{FrameChoice, Method, RunConfig};
pub use frames::{FrameError, PatchFrame, QuadMesh};
pub use geom::{Mat3, Vec3};
pub use inpaint::{HoleRegion, InpaintConfig, InpaintError, PatchInpainter};
pub use mesh::{Mesh, MeshError, PointCloud};
pub use metrics::MetricsError;
pub use patch::{BinState, ConnMap, Patch, PatchDataset, PatchError, PatchParams};
pub use sparse::{Dictionary, SparseCode, SparseError};

/// Any error the library can return.
#[derive(Debug, thiserror::Error)]
pub enum Error {
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
    #[error(transparent)]
    Inpaint(#[from] InpaintError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Mesh(_) => "mesh",
            Error::Frame(_) => "frame",
            Error::Patch(_) => "patch",
            Error::Sparse(_) => "sparse",
            Error::Metrics(_) => "metrics",
            Error::Inpaint(_) => "inpaint",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Config(_) => "config",
        }
    }
}
