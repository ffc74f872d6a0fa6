use std::collections::VecDeque;

use rayon::prelude::*;

use super::{FrameError, PatchFrame, QuadMesh};
use crate::geom::{any_orthogonal, project_to_plane, Vec3};

/// Frame of a single quad before propagation: seed at the centroid, Z from
/// the diagonals, X from the difference of opposite side midpoints
/// projected onto the tangent plane.
pub fn quad_frame(q: &QuadMesh, id: usize) -> Result<PatchFrame, FrameError> {
    let z = q.normal(id).ok_or(FrameError::DegenerateQuad(id))?;
    let c = q.corners(id);
    let side = (c[1] + c[2]) * 0.5 - (c[3] + c[0]) * 0.5;
    let t = project_to_plane(&side, &z);
    let x = if t.norm() > 1e-12 * side.norm().max(1e-300) {
        t.normalize()
    } else {
        any_orthogonal(&z)
    };
    let y = z.cross(&x);
    Ok(PatchFrame::from_axes(q.centroid(id), x, y, z, id, 0))
}

/// One frame per quad, X/Y axes made consistent by breadth-first
/// propagation from the lowest-index quad of every connected component.
pub fn orient_frames(q: &QuadMesh) -> Result<Vec<PatchFrame>, FrameError> {
    let frames = (0..q.len())
        .map(|i| quad_frame(q, i))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(propagate_orientation(frames, &q.adjacency))
}

/// Rotates each frame's X/Y by the multiple of 90° about its Z that best
/// matches its BFS parent. Frames keep their seed, Z axis and ids.
pub fn propagate_orientation(mut frames: Vec<PatchFrame>, adjacency: &[Vec<usize>]) -> Vec<PatchFrame> {
    let n = frames.len();
    assert_eq!(adjacency.len(), n, "adjacency must cover every frame");
    // Components in increasing order of their lowest member.
    let mut comp = vec![usize::MAX; n];
    let mut orders: Vec<Vec<(usize, usize)>> = Vec::new();
    for root in 0..n {
        if comp[root] != usize::MAX {
            continue;
        }
        let cid = orders.len();
        let mut order = Vec::new();
        let mut queue = VecDeque::from([root]);
        comp[root] = cid;
        order.push((root, usize::MAX));
        while let Some(u) = queue.pop_front() {
            for &v in &adjacency[u] {
                if comp[v] == usize::MAX {
                    comp[v] = cid;
                    order.push((v, u));
                    queue.push_back(v);
                }
            }
        }
        orders.push(order);
    }

    let updates: Vec<Vec<(usize, PatchFrame)>> = orders
        .par_iter()
        .map(|order| {
            let mut local: std::collections::HashMap<usize, PatchFrame> = std::collections::HashMap::new();
            for &(v, parent) in order {
                let mut f = frames[v];
                if parent != usize::MAX {
                    let px = local[&parent].x_axis();
                    f = align_to(&f, &px);
                }
                local.insert(v, f);
            }
            order.iter().map(|&(v, _)| (v, local[&v])).collect()
        })
        .collect();
    for list in updates {
        for (v, f) in list {
            frames[v] = f;
        }
    }
    frames
}

fn align_to(f: &PatchFrame, parent_x: &Vec3) -> PatchFrame {
    let z = f.z_axis();
    let target = project_to_plane(parent_x, &z);
    let x = f.x_axis();
    let y = f.y_axis();
    let candidates = [x, y, -x, -y];
    let mut best = 0;
    let mut best_dot = candidates[0].dot(&target);
    for (i, c) in candidates.iter().enumerate().skip(1) {
        let d = c.dot(&target);
        if d > best_dot {
            best = i;
            best_dot = d;
        }
    }
    if best == 0 {
        return *f;
    }
    let nx = candidates[best];
    let ny = z.cross(&nx);
    PatchFrame::from_axes(f.seed, nx, ny, z, f.quad_id, f.offset_id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn permuted_grid_aligns() {
        let mut q = shapes::plane_quads(6, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for quad in &mut q.quads {
            let s = rng.random_range(0..4);
            quad.rotate_left(s);
        }
        let frames = orient_frames(&q).unwrap();
        let x0 = frames[0].x_axis();
        for f in &frames {
            assert!((f.x_axis() - x0).norm() < 1e-6);
            assert!((f.z_axis() - Vec3::z()).norm() < 1e-9);
            assert!(f.is_rigid(1e-9));
        }
    }

    #[test]
    fn single_quad_uses_its_sides() {
        let v = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(2.0, 0.0, 0.0),
            Vec3::new(2.0, 1.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        ];
        let q = QuadMesh::new(v, vec![[0, 1, 2, 3]]).unwrap();
        let f = orient_frames(&q).unwrap()[0];
        assert!((f.x_axis() - Vec3::x()).norm() < 1e-12);
        assert!((f.y_axis() - Vec3::y()).norm() < 1e-12);
        assert!((f.z_axis() - Vec3::z()).norm() < 1e-12);
        assert!((f.seed - Vec3::new(1.0, 0.5, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn components_and_determinism() {
        let a = shapes::plane_quads(2, 1.0);
        let mut v = a.vertices.clone();
        let off = v.len();
        v.extend(a.vertices.iter().map(|p| p + Vec3::new(5.0, 0.0, 0.0)));
        let mut quads = a.quads.clone();
        // Second component with rotated side orderings.
        quads.extend(a.quads.iter().map(|q| {
            let mut q = q.map(|i| i + off);
            q.rotate_left(1);
            q
        }));
        let q = QuadMesh::new(v, quads).unwrap();
        let f1 = orient_frames(&q).unwrap();
        let f2 = orient_frames(&q).unwrap();
        assert_eq!(f1, f2);
        // Roots of the two components keep their own side-derived axes.
        assert_eq!(f1[0], quad_frame(&q, 0).unwrap());
        assert_eq!(f1[4], quad_frame(&q, 4).unwrap());
        assert!((f1[4].x_axis() - f1[0].x_axis()).norm() > 0.5);
    }

    #[test]
    fn idempotent_on_sphere() {
        let q = shapes::cube_sphere_quads(6, 1.0);
        let f = orient_frames(&q).unwrap();
        let again = propagate_orientation(f.clone(), &q.adjacency);
        assert_eq!(f, again);
        for (i, fr) in f.iter().enumerate() {
            let n = q.normal(i).unwrap();
            assert!(fr.z_axis().dot(&n) > 1.0 - 1e-12);
        }
    }

    #[test]
    fn degenerate_quad_errors() {
        let v = vec![Vec3::zeros(), Vec3::x(), Vec3::x() * 2.0, Vec3::x() * 3.0];
        let q = QuadMesh::new(v, vec![[0, 1, 2, 3]]).unwrap();
        assert!(matches!(orient_frames(&q), Err(FrameError::DegenerateQuad(0))));
    }
}
