use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qpatch::inpaint::FillOptions;
use qpatch::{FrameChoice, Method, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "qpatch", version, about = "Height-map patch toolkit for triangle meshes")]
pub struct Cli {
    #[command(subcommand)]
    pub verb: Verb,
    #[command(flatten)]
    pub knobs: Knobs,
    /// JSON file whose keys override the corresponding flags.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Print per-stage wall time to stderr.
    #[arg(long, global = true)]
    pub timing: bool,
}

/// Experiment knobs shared by every verb.
#[derive(Debug, Args)]
pub struct Knobs {
    /// Patch radius r [default: quad length / √2]
    #[arg(long, short = 'r', global = true)]
    pub radius: Option<f64>,
    /// Bins per patch side N
    #[arg(long, short = 'N', global = true, default_value_t = 16)]
    pub resolution: usize,
    /// Sparsity k
    #[arg(long, short = 'k', global = true, default_value_t = 20)]
    pub sparsity: usize,
    /// Dictionary atoms p
    #[arg(long, short = 'p', global = true, default_value_t = 100)]
    pub atoms: usize,
    /// Offset level: 4·level extra patches per quad
    #[arg(long, global = true, default_value_t = 0)]
    pub overlap: usize,
    #[arg(long, global = true, default_value_t = 0.03)]
    pub quad_length: f64,
    /// KSVD iterations
    #[arg(long, global = true, default_value_t = 20)]
    pub iterations: usize,
    /// Seed for sampling, learning and damage
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, default_value_t = 0)]
    pub frame_seed: u64,
    /// Surface samples per unit area [default: 4 per bin]
    #[arg(long, global = true)]
    pub density: Option<f64>,
    /// Laplacian passes before frame generation
    #[arg(long, global = true, default_value_t = 30)]
    pub smooth_iterations: usize,
    /// Largest boundary loop (bounding-box diagonal) treated as a hole [default: 4 · quad length]
    #[arg(long, global = true)]
    pub max_hole_extent: Option<f64>,
    #[arg(long, global = true, default_value_t = 0.4)]
    pub max_empty_disk_fraction: f64,
    #[arg(long, global = true, default_value_t = 0.25)]
    pub max_z_range_fraction: f64,
    /// Target scaffold edge length as a multiple of the mean hole-boundary edge
    #[arg(long, global = true, default_value_t = 1.5)]
    pub fill_density_factor: f64,
    #[arg(long, global = true, default_value_t = 5)]
    pub fill_relaxation_passes: usize,
    #[arg(long, global = true, default_value_t = 20_000)]
    pub fill_max_new_vertices: usize,
    /// Import frames from this quad mesh (OBJ) instead of generating them
    #[arg(long, global = true, value_name = "OBJ")]
    pub quads: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = MethodArg::Dict)]
    pub method: MethodArg,
    /// Dictionary file (QDL1)
    #[arg(long, global = true, value_name = "FILE")]
    pub dict: Option<PathBuf>,
    /// External inpainter for cnn-file; `{input}` and `{output}` are replaced by QPD paths
    #[arg(long, global = true, value_name = "CMD")]
    pub fill_command: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Baseline,
    Dict,
    CnnStub,
    CnnFile,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Baseline => Method::Baseline,
            MethodArg::Dict => Method::Dict,
            MethodArg::CnnStub => Method::CnnStub,
            MethodArg::CnnFile => Method::CnnFile,
        }
    }
}

impl Knobs {
    pub fn to_config(&self) -> RunConfig {
        RunConfig {
            radius: self.radius,
            resolution: self.resolution,
            sparsity: self.sparsity,
            atoms: self.atoms,
            overlap: self.overlap,
            quad_length: self.quad_length,
            iterations: self.iterations,
            seed: self.seed,
            frame_seed: self.frame_seed,
            density: self.density,
            smooth_iterations: self.smooth_iterations,
            max_hole_extent: self.max_hole_extent,
            max_empty_disk_fraction: self.max_empty_disk_fraction,
            max_z_range_fraction: self.max_z_range_fraction,
            fill: FillOptions {
                density_factor: self.fill_density_factor,
                relaxation_passes: self.fill_relaxation_passes,
                max_new_vertices: self.fill_max_new_vertices,
            },
            frames: match &self.quads {
                Some(path) => FrameChoice::Import { path: path.clone() },
                None => FrameChoice::Generate,
            },
            method: self.method.into(),
            dictionary: self.dict.clone(),
            fill_command: self.fill_command.clone(),
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Verb {
    /// Fit a mesh into the unit cube, optionally resampling it first.
    Normalize {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Scale/translation record (JSON)
        #[arg(long)]
        record: Option<PathBuf>,
        /// Subdivide or decimate to roughly this many vertices
        #[arg(long)]
        target_vertices: Option<usize>,
    },
    /// Uniform Laplacian smoothing (`--smooth-iterations` passes).
    Smooth {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Patch frames from a quad mesh.
    Frames {
        #[command(subcommand)]
        source: FramesVerb,
    },
    /// Sample a mesh and extract a patch dataset (QPD plus sidecar).
    Extract {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Precomputed frames (JSON) instead of --quads or generation
        #[arg(long, conflicts_with = "quads")]
        frames: Option<PathBuf>,
    },
    /// Learn a dictionary from a patch dataset with KSVD.
    LearnDict {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Rebuild a mesh from a patch dataset, optionally through a dictionary.
    Reconstruct {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Score the result against this mesh
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Entity counts of a mesh versus its sparse patch encoding.
    CompressReport {
        /// Source mesh
        #[arg(long)]
        mesh: PathBuf,
        /// Patch dataset encoding the mesh
        #[arg(long)]
        patches: PathBuf,
        /// Reconstructed mesh, for the PSNR column
        #[arg(long)]
        reconstructed: Option<PathBuf>,
        /// Print the ledger as JSON instead of a table
        #[arg(long)]
        json: bool,
    },
    /// Remove round regions from a mesh.
    PunchHoles {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        hole_radius: f64,
        /// Minimum distance between hole centres [default: 4 · hole radius]
        #[arg(long)]
        spacing: Option<f64>,
        /// Ground-truth record (JSON)
        #[arg(long)]
        record: Option<PathBuf>,
    },
    /// Choose vertices whose coordinates are to be treated as unknown.
    DropVertices {
        #[arg(long)]
        input: PathBuf,
        /// Record of missing vertices and their true positions (JSON)
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        ratio: f64,
    },
    /// Fill the holes of a mesh.
    Inpaint {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Undamaged mesh for scoring the inpainted vertices
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Write the repair report (JSON) here
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Re-estimate the coordinates of dropped vertices.
    Recover {
        /// Mesh whose missing vertices are listed in --dropped
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        dropped: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Project every patch onto a dictionary and rebuild the mesh.
    Denoise {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Cloud-to-mesh error and PSNR of a mesh against a reference.
    Eval {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        reference: PathBuf,
    },
    /// Neighbour-mean fill of a QPD file; stands in for an external inpainter.
    StubFill {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum FramesVerb {
    /// Frames from an external quad mesh (OBJ).
    Import {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Frames from the built-in generator on a smoothed copy of a mesh.
    Generate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Also write the generated quad cells (OBJ)
        #[arg(long)]
        quads_output: Option<PathBuf>,
    },
}
