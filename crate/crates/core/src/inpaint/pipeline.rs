use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{fill_holes, DroppedVertices, FillOptions, HoleRegion, InpaintError, PatchInpainter};
use crate::frames::{expand_offsets, generate_fallback_frames, orient_frames, FallbackOptions, PatchFrame, QuadMesh};
use crate::geom::Vec3;
use crate::mesh::{laplacian_smooth, sample_points, Mesh, PointCloud, DEFAULT_SMOOTH_ITERATIONS};
use crate::metrics::{cloud_to_mesh, rmse};
use crate::patch::{
    extract_dataset, fill_by_neighbour_mean, ring_fill, vertex_estimates, BinState, PatchDataset, PatchParams,
};
use crate::sparse::{ksvd_learn_dataset, reconstruct_patches, Dictionary, KsvdOptions, KsvdReport};

/// Where patch frames come from.
#[derive(Debug, Clone, Default)]
pub enum FrameSource {
    /// Built-in generator on a smoothed copy of the working mesh.
    #[default]
    Fallback,
    /// Quad mesh from an external quadrangulator.
    Quads(QuadMesh),
    /// Ready-made frames, used as given (no offsets added).
    Frames(Vec<PatchFrame>),
}

/// Parameters shared by the restoration pipelines.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct InpaintConfig {
    /// Patch radius `r`; `None` gives `quad_length / √2`, so the patch grid
    /// spans one quad.
    pub radius: Option<f64>,
    pub resolution: usize,
    pub quad_length: f64,
    /// Offset level: `4k` extra seeds per quad.
    pub overlap: usize,
    pub sparsity: usize,
    /// Samples per unit area; `None` gives 4 per bin.
    pub density: Option<f64>,
    pub smooth_iterations: usize,
    /// Boundary loops whose bounding-box diagonal exceeds this are borders,
    /// not holes; `None` gives 4 quad lengths.
    pub max_hole_extent: Option<f64>,
    pub fill: FillOptions,
    pub frame_seed: u64,
    pub frame_jitter: f64,
    pub sample_seed: u64,
    pub max_empty_disk_fraction: f64,
    pub max_z_range_fraction: f64,
    #[serde(skip)]
    pub frames: FrameSource,
}

impl Default for InpaintConfig {
    fn default() -> Self {
        Self {
            radius: None,
            resolution: 16,
            quad_length: 0.03,
            overlap: 0,
            sparsity: 20,
            density: None,
            smooth_iterations: DEFAULT_SMOOTH_ITERATIONS,
            max_hole_extent: None,
            fill: FillOptions::default(),
            frame_seed: 0,
            frame_jitter: 0.0,
            sample_seed: 0,
            max_empty_disk_fraction: 0.4,
            max_z_range_fraction: 0.25,
            frames: FrameSource::Fallback,
        }
    }
}

impl InpaintConfig {
    pub fn radius(&self) -> f64 {
        self.radius.unwrap_or(self.quad_length / std::f64::consts::SQRT_2)
    }

    pub fn params(&self) -> PatchParams {
        PatchParams {
            radius: self.radius(),
            resolution: self.resolution,
            max_empty_disk_fraction: self.max_empty_disk_fraction,
            max_z_range_fraction: self.max_z_range_fraction,
        }
    }

    pub fn density(&self) -> f64 {
        self.density.unwrap_or_else(|| {
            let h = self.params().bin_size();
            4.0 / (h * h)
        })
    }

    pub fn max_hole_extent(&self) -> f64 {
        self.max_hole_extent.unwrap_or(4.0 * self.quad_length)
    }

    pub fn validate(&self) -> Result<(), InpaintError> {
        self.params().validate()?;
        let pos = [("quad_length", self.quad_length), ("density", self.density())];
        for (name, v) in pos {
            if !(v > 0.0) || !v.is_finite() {
                return Err(InpaintError::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if self.sparsity == 0 {
            return Err(InpaintError::InvalidArgument("sparsity must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct HoleReport {
    pub boundary_vertices: usize,
    pub scaffold_vertices: usize,
    pub scaffold_faces: usize,
    /// Distance of every inpainted vertex to the reference surface.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub vertex_errors: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mean_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RepairReport {
    pub method: String,
    pub holes: Vec<HoleReport>,
    /// Mean cloud-to-mesh error of all inpainted vertices.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mean_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rms_error: Option<f64>,
    pub patches: usize,
    pub hole_patches: usize,
    pub rejected_frames: usize,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub timing: Vec<StageTiming>,
}

struct Clock {
    start: Instant,
    stages: Vec<StageTiming>,
}

impl Clock {
    fn new() -> Self {
        Self {
            start: Instant::now(),
            stages: Vec::new(),
        }
    }

    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.stages.push(StageTiming {
            stage: stage.into(),
            seconds: (now - self.start).as_secs_f64(),
        });
        self.start = now;
    }
}

/// Frames for `mesh` per `cfg.frames`. Generated and imported quads give
/// one oriented frame per quad plus `4·overlap` offsets.
pub fn compute_frames(mesh: &Mesh, cfg: &InpaintConfig) -> Result<Vec<PatchFrame>, InpaintError> {
    let quads = match &cfg.frames {
        FrameSource::Frames(f) => return Ok(f.clone()),
        FrameSource::Quads(q) => q.clone(),
        FrameSource::Fallback => generate_quads(mesh, cfg)?,
    };
    let centers = orient_frames(&quads)?;
    Ok(expand_offsets(&centers, cfg.overlap, cfg.quad_length))
}

/// Quad cells from the built-in generator, run on a copy of `mesh`
/// smoothed by `cfg.smooth_iterations` Laplacian passes.
pub fn generate_quads(mesh: &Mesh, cfg: &InpaintConfig) -> Result<QuadMesh, InpaintError> {
    let smoothed = laplacian_smooth(mesh, cfg.smooth_iterations)?;
    let opts = FallbackOptions {
        seed: cfg.frame_seed,
        jitter: cfg.frame_jitter,
        ..FallbackOptions::new(cfg.quad_length)
    };
    Ok(generate_fallback_frames(&smoothed, &opts)?)
}

/// Sets every invalid (never sampled) bin to the mean of its valid 3×3
/// neighbourhood, repeated outward, and marks it valid. Hole bins are
/// left alone.
pub fn fill_gaps(ds: &mut PatchDataset) {
    for p in &mut ds.patches {
        if !p.mask.contains(&BinState::Invalid) {
            continue;
        }
        let filled = fill_by_neighbour_mean(&p.heights, &p.observed(), p.resolution);
        for b in 0..p.len() {
            if p.mask[b] == BinState::Invalid {
                p.heights[b] = filled[b];
                p.mask[b] = BinState::Valid;
            }
        }
    }
}

/// Distances of the inpainted vertices of each region to `reference`.
pub fn evaluate_repair(
    repaired: &Mesh,
    regions: &[HoleRegion],
    reference: &Mesh,
    report: &mut RepairReport,
) -> Result<(), InpaintError> {
    let mut all = Vec::new();
    for (h, r) in report.holes.iter_mut().zip(regions) {
        let pts: Vec<Vec3> = r.scaffold_vertices.iter().map(|&v| repaired.vertices[v]).collect();
        if pts.is_empty() {
            continue;
        }
        let d = cloud_to_mesh(&pts, reference)?;
        h.mean_error = Some(d.mean);
        all.extend_from_slice(&d.distances);
        h.vertex_errors = d.distances;
    }
    if !all.is_empty() {
        let n = all.len() as f64;
        report.mean_error = Some(all.iter().sum::<f64>() / n);
        report.rms_error = Some((all.iter().map(|d| d * d).sum::<f64>() / n).sqrt());
    }
    Ok(())
}

/// Restores holes in a damaged mesh.
///
/// Holes are boundary loops up to `cfg.max_hole_extent` across. Each is
/// closed by [`fill_holes`](super::fill_holes); with no inpainter that
/// scaffold is the result. Otherwise frames are computed on the
/// hole-filled mesh, patches are extracted from samples of it with bins
/// dominated by scaffold faces marked as holes and sampling gaps filled
/// from their neighbours, the inpainter fills the holes, and every inserted
/// vertex moves to the mean of its patch cells. Vertices of the damaged
/// mesh are not modified. With a reference mesh the inpainted vertices are
/// scored against it.
pub fn inpaint(
    damaged: &Mesh,
    inpainter: Option<&dyn PatchInpainter>,
    cfg: &InpaintConfig,
    reference: Option<&Mesh>,
) -> Result<(Mesh, RepairReport, Vec<HoleRegion>), InpaintError> {
    cfg.validate()?;
    let mut clock = Clock::new();
    let method = inpainter.map_or("baseline", |m| m.method()).to_string();
    let (filled, regions) = fill_holes(damaged, Some(cfg.max_hole_extent()), &cfg.fill)?;
    clock.lap("triangulate");
    let mut report = RepairReport {
        method,
        holes: regions
            .iter()
            .map(|r| HoleReport {
                boundary_vertices: r.boundary.len(),
                scaffold_vertices: r.scaffold_vertices.len(),
                scaffold_faces: r.scaffold_faces.len(),
                ..HoleReport::default()
            })
            .collect(),
        ..RepairReport::default()
    };
    if regions.is_empty() {
        log::warn!("no holes found; mesh returned unchanged");
        report.timing = clock.stages;
        return Ok((damaged.clone(), report, regions));
    }
    let mut out = filled;
    if let Some(model) = inpainter {
        let n_scaffold: usize = regions.iter().map(|r| r.scaffold_vertices.len()).sum();
        if n_scaffold > 0 {
            out = patch_fill(&out, &regions, model, cfg, &mut report, &mut clock)?;
        }
    }
    if let Some(reference) = reference {
        evaluate_repair(&out, &regions, reference, &mut report)?;
        clock.lap("evaluate");
    }
    report.timing = clock.stages;
    Ok((out, report, regions))
}

/// Dictionary learned from the undamaged part of the mesh being repaired:
/// the patches of the hole-filled mesh that contain no scaffold bins.
pub fn learn_self_similar(
    damaged: &Mesh,
    cfg: &InpaintConfig,
    opts: &KsvdOptions,
) -> Result<(Dictionary, KsvdReport), InpaintError> {
    cfg.validate()?;
    let (filled, regions) = fill_holes(damaged, Some(cfg.max_hole_extent()), &cfg.fill)?;
    let mut scaffold_face = vec![false; filled.faces.len()];
    for r in &regions {
        for &f in &r.scaffold_faces {
            scaffold_face[f] = true;
        }
    }
    let frames = compute_frames(&filled, cfg)?;
    let cloud = sample_points(&filled, cfg.density(), cfg.sample_seed)?;
    let mut ds = extract_dataset(&cloud, &frames, &cfg.params(), None, Some(&scaffold_face))?;
    fill_gaps(&mut ds);
    ds.patches.retain(|p| !p.mask.contains(&BinState::Hole));
    Ok(ksvd_learn_dataset(&ds, opts)?)
}

fn patch_fill(
    filled: &Mesh,
    regions: &[HoleRegion],
    model: &dyn PatchInpainter,
    cfg: &InpaintConfig,
    report: &mut RepairReport,
    clock: &mut Clock,
) -> Result<Mesh, InpaintError> {
    let mut scaffold_face = vec![false; filled.faces.len()];
    let mut scaffold_vertex = vec![false; filled.vertices.len()];
    for r in regions {
        for &f in &r.scaffold_faces {
            scaffold_face[f] = true;
        }
        for &v in &r.scaffold_vertices {
            scaffold_vertex[v] = true;
        }
    }
    let frames = compute_frames(filled, cfg)?;
    clock.lap("frames");
    let cloud = sample_points(filled, cfg.density(), cfg.sample_seed)?;
    let mut ds = extract_dataset(&cloud, &frames, &cfg.params(), Some(filled), Some(&scaffold_face))?;
    fill_gaps(&mut ds);
    clock.lap("extract");
    report.patches = ds.len();
    report.rejected_frames = ds.provenance.rejected.len();

    let holed: Vec<usize> = (0..ds.len())
        .filter(|&i| ds.patches[i].mask.contains(&BinState::Hole))
        .collect();
    report.hole_patches = holed.len();
    let mut sub = PatchDataset::new(ds.resolution, ds.radius);
    sub.patches = holed.iter().map(|&i| ds.patches[i].clone()).collect();
    let done = model.fill(&sub)?;
    if done.len() != sub.len() || done.resolution != sub.resolution {
        return Err(InpaintError::Contract("patch count or resolution changed".into()));
    }
    for (&i, p) in holed.iter().zip(done.patches) {
        let orig = &mut ds.patches[i];
        if !orig.mask.contains(&BinState::Valid) {
            // Nothing observed: the output is a guess about nothing.
            continue;
        }
        for b in 0..orig.len() {
            if orig.mask[b] == BinState::Hole && p.mask[b] == BinState::Valid {
                orig.heights[b] = p.heights[b];
                orig.mask[b] = BinState::Valid;
            }
        }
    }
    clock.lap("inpaint");

    let conn = ds.conn.as_ref().expect("extract_dataset was given a mesh");
    let est = vertex_estimates(&ds, conn);
    let seeded: Vec<Option<Vec3>> = (0..filled.vertices.len())
        .map(|v| if scaffold_vertex[v] { est[v] } else { Some(filled.vertices[v]) })
        .collect();
    let (vertices, _) = ring_fill(seeded, &filled.faces)?;
    clock.lap("reconstruct");
    Ok(Mesh::new(vertices, filled.faces.clone())?)
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub missing: usize,
    /// Missing vertices estimated from patch cells.
    pub from_patches: usize,
    /// Missing vertices filled from their neighbours.
    pub from_neighbours: usize,
    pub rmse: f64,
    pub patches: usize,
    pub rejected_frames: usize,
}

/// Re-estimates the coordinates of missing vertices.
///
/// Patches are extracted from the cloud of known vertices; cells without
/// a known vertex are unknown and go to the inpainter (or, without one, are
/// filled by neighbourhood means). The connectivity map is built from a
/// first guess of the missing positions (1-ring means of known vertices),
/// which also seeds the frames. Each missing vertex becomes the mean of its
/// filled cells; vertices outside every patch take the 1-ring mean.
pub fn recover_vertices(
    mesh: &Mesh,
    dropped: &DroppedVertices,
    inpainter: Option<&dyn PatchInpainter>,
    cfg: &InpaintConfig,
) -> Result<(Mesh, RecoveryReport), InpaintError> {
    cfg.validate()?;
    let n = mesh.vertices.len();
    if dropped.missing.iter().any(|&v| v >= n) {
        return Err(InpaintError::InvalidArgument("missing vertex index out of range".into()));
    }
    let missing = dropped.missing_mask(n);
    let mut report = RecoveryReport {
        missing: dropped.missing.len(),
        ..RecoveryReport::default()
    };
    if dropped.missing.is_empty() {
        return Ok((mesh.clone(), report));
    }
    let known: Vec<Option<Vec3>> = (0..n).map(|v| (!missing[v]).then(|| mesh.vertices[v])).collect();
    let (guess, _) = ring_fill(known.clone(), &mesh.faces)?;
    let proxy = Mesh::new(guess, mesh.faces.clone())?;
    let frames = compute_frames(&proxy, cfg)?;
    let cloud = PointCloud::from_points((0..n).filter(|&v| !missing[v]).map(|v| mesh.vertices[v]).collect());
    let mut ds = extract_dataset(&cloud, &frames, &cfg.params(), Some(&proxy), None)?;
    report.patches = ds.len();
    report.rejected_frames = ds.provenance.rejected.len();
    for p in &mut ds.patches {
        for s in &mut p.mask {
            if *s == BinState::Invalid {
                *s = BinState::Hole;
            }
        }
    }
    let ds = match inpainter {
        Some(m) => m.fill(&ds)?,
        None => super::stub_fill(&ds),
    };
    let conn = ds.conn.as_ref().expect("extract_dataset was given a mesh");
    let est = vertex_estimates(&ds, conn);
    let seeded: Vec<Option<Vec3>> = (0..n).map(|v| if missing[v] { est[v] } else { known[v] }).collect();
    report.from_patches = (0..n).filter(|&v| missing[v] && seeded[v].is_some()).count();
    report.from_neighbours = report.missing - report.from_patches;
    let (vertices, _) = ring_fill(seeded, &mesh.faces)?;
    let est: Vec<Vec3> = dropped.missing.iter().map(|&v| vertices[v]).collect();
    let truth: Vec<Vec3> = dropped.truth.iter().map(|&t| Vec3::from(t)).collect();
    report.rmse = rmse(&est, &truth)?;
    Ok((Mesh::new(vertices, mesh.faces.clone())?, report))
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DenoiseReport {
    pub patches: usize,
    pub rejected_frames: usize,
    pub mean_patch_residual: f64,
    pub from_patches: usize,
    pub from_neighbours: usize,
}

/// Replaces every patch of a noisy mesh by its `k`-sparse approximation
/// over a dictionary learnt on clean data, then rebuilds the vertices.
pub fn denoise(noisy: &Mesh, dict: &Dictionary, cfg: &InpaintConfig) -> Result<(Mesh, DenoiseReport), InpaintError> {
    cfg.validate()?;
    dict.check_dim(cfg.resolution * cfg.resolution)?;
    if let (Some(r), Some(n)) = (dict.meta.radius, dict.meta.resolution) {
        if (r - cfg.radius()).abs() > 1e-12 * r.abs().max(1.0) || n != cfg.resolution {
            return Err(crate::patch::PatchError::ParameterMismatch {
                expected_n: n,
                expected_r: r,
                found_n: cfg.resolution,
                found_r: cfg.radius(),
            }
            .into());
        }
    }
    let frames = compute_frames(noisy, cfg)?;
    let cloud = sample_points(noisy, cfg.density(), cfg.sample_seed)?;
    let mut ds = extract_dataset(&cloud, &frames, &cfg.params(), Some(noisy), None)?;
    fill_gaps(&mut ds);
    let (coded, stats) = reconstruct_patches(&ds, dict, cfg.sparsity)?;
    let conn = coded.conn.as_ref().expect("extract_dataset was given a mesh");
    let (vertices, res) = ring_fill(vertex_estimates(&coded, conn), &conn.faces)?;
    let report = DenoiseReport {
        patches: ds.len(),
        rejected_frames: ds.provenance.rejected.len(),
        mean_patch_residual: stats.mean_residual,
        from_patches: res.from_patches,
        from_neighbours: res.from_neighbours,
    };
    Ok((Mesh::new(vertices, noisy.faces.clone())?, report))
}
