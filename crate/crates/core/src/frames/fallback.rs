use nalgebra::{DMatrix, DVector, Matrix2, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{FrameError, QuadMesh};
use crate::geom::{any_orthogonal, project_to_plane, Mat3, Vec3};
use crate::mesh::{sample_points, Mesh};
use crate::spatial::PointGrid;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FallbackOptions {
    /// Target seed spacing, which is also the side of the emitted cells.
    pub spacing: f64,
    pub seed: u64,
    /// Relative spacing perturbation drawn once from `[-jitter, jitter]`.
    /// Lets test-time frames differ from training-time frames.
    pub jitter: f64,
    pub smoothing_rounds: usize,
    /// Dense samples per `spacing²` of surface used for seeding and fitting.
    pub samples_per_cell: f64,
}

impl FallbackOptions {
    pub fn new(spacing: f64) -> Self {
        Self {
            spacing,
            seed: 0,
            jitter: 0.0,
            smoothing_rounds: 10,
            samples_per_cell: 30.0,
        }
    }
}

/// Built-in stand-in for an external quadrangulator.
///
/// Seeds are a Poisson-disk subset of dense surface samples. Each seed gets
/// a normal from local PCA and a tangent direction from the principal
/// curvature of largest magnitude (a local quadric fit), smoothed as a
/// 4-fold rotationally symmetric field. The result is a quad mesh of
/// independent square cells of side `spacing` centred on the seeds, linked
/// to their nearest neighbours (at most 8, within 1.5 × spacing).
pub fn generate_fallback_frames(mesh: &Mesh, opts: &FallbackOptions) -> Result<QuadMesh, FrameError> {
    if !(opts.spacing > 0.0) || !opts.spacing.is_finite() {
        return Err(FrameError::InvalidArgument(format!("spacing must be positive, got {}", opts.spacing)));
    }
    if !(0.0..1.0).contains(&opts.jitter) {
        return Err(FrameError::InvalidArgument(format!("jitter must be in [0, 1), got {}", opts.jitter)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let spacing = if opts.jitter > 0.0 {
        opts.spacing * (1.0 + rng.random_range(-opts.jitter..=opts.jitter))
    } else {
        opts.spacing
    };
    if mesh.is_empty() || mesh.bounding_box().diagonal() < spacing {
        return Err(FrameError::SurfaceTooSmall(spacing));
    }

    let density = opts.samples_per_cell / (spacing * spacing);
    let cloud = sample_points(mesh, density, opts.seed)?;
    let sample_grid = PointGrid::from_points(&cloud.points, spacing);

    // Dart throwing over the shuffled dense samples.
    let mut order: Vec<usize> = (0..cloud.len()).collect();
    order.shuffle(&mut rng);
    let mut seed_grid = PointGrid::new(spacing);
    let mut seed_src = Vec::new();
    for i in order {
        let p = cloud.points[i];
        if !seed_grid.any_closer(&p, spacing) {
            seed_grid.insert(p);
            seed_src.push(i);
        }
    }
    if seed_src.is_empty() {
        return Err(FrameError::SurfaceTooSmall(spacing));
    }
    let n = seed_src.len();
    let seeds: Vec<Vec3> = seed_src.iter().map(|&i| cloud.points[i]).collect();

    let mut normals = Vec::with_capacity(n);
    let mut dirs = Vec::with_capacity(n);
    for (s, &src) in seeds.iter().zip(&seed_src) {
        let near = sample_grid.within(s, 2.0 * spacing);
        let pts: Vec<Vec3> = near.iter().map(|&i| cloud.points[i]).collect();
        let face_n = cloud.normals[src];
        let nrm = pca_normal(s, &pts, spacing).map_or(face_n, |v| if v.dot(&face_n) < 0.0 { -v } else { v });
        let dir = principal_direction(s, &nrm, &pts, spacing).unwrap_or_else(|| axis_direction(&nrm));
        normals.push(nrm);
        dirs.push(dir);
    }

    // Symmetric k-nearest links.
    let mut nbrs = vec![Vec::new(); n];
    for i in 0..n {
        let near: Vec<usize> = seed_grid
            .nearest_within(&seeds[i], 1.5 * spacing, 9)
            .into_iter()
            .filter(|&j| j != i)
            .take(8)
            .collect();
        for j in near {
            nbrs[i].push(j);
            nbrs[j].push(i);
        }
    }
    for l in &mut nbrs {
        l.sort_unstable();
        l.dedup();
    }
    let links: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| nbrs[i].iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
        .collect();

    for _ in 0..opts.smoothing_rounds {
        dirs = rosy_round(&dirs, &normals, &nbrs);
    }

    let h = 0.5 * spacing;
    let mut vertices = Vec::with_capacity(4 * n);
    let mut quads = Vec::with_capacity(n);
    for i in 0..n {
        let x = dirs[i];
        let y = normals[i].cross(&x);
        let s = seeds[i];
        let b = vertices.len();
        vertices.extend([s - x * h - y * h, s + x * h - y * h, s + x * h + y * h, s - x * h + y * h]);
        quads.push([b, b + 1, b + 2, b + 3]);
    }
    QuadMesh::with_adjacency(vertices, quads, &links)
}

/// Normal of the best-fit plane through the samples within `spacing`.
fn pca_normal(center: &Vec3, pts: &[Vec3], spacing: f64) -> Option<Vec3> {
    let near: Vec<&Vec3> = pts.iter().filter(|p| (*p - center).norm() <= spacing).collect();
    if near.len() < 3 {
        return None;
    }
    let mean = near.iter().copied().sum::<Vec3>() / near.len() as f64;
    let mut cov = Mat3::zeros();
    for p in &near {
        let d = *p - mean;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let (imin, _) = eig.eigenvalues.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1))?;
    let mut sorted: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    sorted.sort_by(f64::total_cmp);
    // Collinear neighbourhoods do not define a plane.
    if sorted[1] <= 1e-12 * sorted[2].max(1e-300) {
        return None;
    }
    Some(eig.eigenvectors.column(imin).into_owned().normalize())
}

/// Tangent direction of the principal curvature with the largest
/// magnitude, from a quadric height fit in the tangent plane. `None` when
/// the surface is flat or umbilic at this scale.
fn principal_direction(center: &Vec3, n: &Vec3, pts: &[Vec3], spacing: f64) -> Option<Vec3> {
    if pts.len() < 12 {
        return None;
    }
    let u = any_orthogonal(n);
    let v = n.cross(&u);
    let rows = pts.len();
    let mut a = DMatrix::zeros(rows, 6);
    let mut b = DVector::zeros(rows);
    for (r, p) in pts.iter().enumerate() {
        let d = p - center;
        // Scaled coordinates keep the system well conditioned.
        let (x, y) = (d.dot(&u) / spacing, d.dot(&v) / spacing);
        a.row_mut(r).copy_from_slice(&[x * x, x * y, y * y, x, y, 1.0]);
        b[r] = d.dot(n) / spacing;
    }
    let sol = a.svd(true, true).solve(&b, 1e-12).ok()?;
    let hess = Matrix2::new(2.0 * sol[0], sol[1], sol[1], 2.0 * sol[2]);
    let eig = SymmetricEigen::new(hess);
    let (l0, l1) = (eig.eigenvalues[0], eig.eigenvalues[1]);
    let big = l0.abs().max(l1.abs());
    // Curvature of 1e-3 / spacing or less is treated as flat.
    if big < 1e-3 || (l0.abs() - l1.abs()).abs() < 0.05 * big {
        return None;
    }
    let col = if l0.abs() >= l1.abs() { 0 } else { 1 };
    let e = eig.eigenvectors.column(col);
    Some((u * e[0] + v * e[1]).normalize())
}

/// Global axis projected into the tangent plane, for flat regions.
fn axis_direction(n: &Vec3) -> Vec3 {
    for axis in [Vec3::x(), Vec3::y(), Vec3::z()] {
        let t = project_to_plane(&axis, n);
        if t.norm() > 0.5 {
            return t.normalize();
        }
    }
    any_orthogonal(n)
}

/// One Jacobi round of uniform 4-RoSy averaging.
fn rosy_round(dirs: &[Vec3], normals: &[Vec3], nbrs: &[Vec<usize>]) -> Vec<Vec3> {
    (0..dirs.len())
        .map(|i| {
            let n = normals[i];
            let u = dirs[i];
            let v = n.cross(&u);
            let (mut sx, mut sy) = (1.0, 0.0);
            for &j in &nbrs[i] {
                let d = project_to_plane(&dirs[j], &n);
                if d.norm() < 1e-12 {
                    continue;
                }
                let theta = d.dot(&v).atan2(d.dot(&u));
                sx += (4.0 * theta).cos();
                sy += (4.0 * theta).sin();
            }
            if sx.hypot(sy) < 1e-12 {
                return u;
            }
            let phi = sy.atan2(sx) / 4.0;
            (u * phi.cos() + v * phi.sin()).normalize()
        })
        .collect()
}
