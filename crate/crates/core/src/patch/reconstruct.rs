use rayon::prelude::*;

use super::{ConnMap, PatchDataset, PatchError};
use crate::geom::Vec3;
use crate::mesh::Mesh;

/// Cap on the 1-ring propagation rounds for vertices without estimates.
pub const MAX_RING_ROUNDS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ResolveReport {
    /// Vertices estimated directly from patch bins.
    pub from_patches: usize,
    /// Vertices filled from their neighbours.
    pub from_neighbours: usize,
    pub rounds: usize,
}

/// Per-vertex mean of the world positions of its valid `(patch, bin)`
/// cells; `None` where no valid cell covers the vertex.
pub fn vertex_estimates(ds: &PatchDataset, conn: &ConnMap) -> Vec<Option<Vec3>> {
    conn.entries
        .par_iter()
        .map(|cells| {
            let mut sum = Vec3::zeros();
            let mut n = 0usize;
            for &(p, b) in cells {
                let patch = &ds.patches[p as usize];
                let b = b as usize;
                if patch.is_valid(b) {
                    sum += patch.bin_point(b);
                    n += 1;
                }
            }
            (n > 0).then(|| sum / n as f64)
        })
        .collect()
}

/// Fills `None` entries with the mean of already-resolved 1-ring
/// neighbours, one Jacobi round at a time.
pub fn ring_fill(
    estimates: Vec<Option<Vec3>>,
    faces: &[[usize; 3]],
) -> Result<(Vec<Vec3>, ResolveReport), PatchError> {
    let n = estimates.len();
    let mut report = ResolveReport {
        from_patches: estimates.iter().filter(|e| e.is_some()).count(),
        ..Default::default()
    };
    let mut cur = estimates;
    if report.from_patches < n {
        let mut nbrs = vec![Vec::new(); n];
        for f in faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                nbrs[a].push(b);
                nbrs[b].push(a);
            }
        }
        for l in &mut nbrs {
            l.sort_unstable();
            l.dedup();
        }
        while report.rounds < MAX_RING_ROUNDS && cur.iter().any(Option::is_none) {
            let prev = cur.clone();
            let mut changed = false;
            for v in 0..n {
                if prev[v].is_some() {
                    continue;
                }
                let known: Vec<Vec3> = nbrs[v].iter().filter_map(|&u| prev[u]).collect();
                if !known.is_empty() {
                    cur[v] = Some(known.iter().sum::<Vec3>() / known.len() as f64);
                    report.from_neighbours += 1;
                    changed = true;
                }
            }
            report.rounds += 1;
            if !changed {
                break;
            }
        }
    }
    let mut out = Vec::with_capacity(n);
    for (v, e) in cur.into_iter().enumerate() {
        out.push(e.ok_or(PatchError::UnresolvableVertex(v))?);
    }
    Ok((out, report))
}

/// Vertex positions rebuilt from the patches through the connectivity map.
pub fn reconstruct_vertices(ds: &PatchDataset) -> Result<(Vec<Vec3>, ResolveReport), PatchError> {
    let conn = ds.conn.as_ref().ok_or(PatchError::MissingConn)?;
    ring_fill(vertex_estimates(ds, conn), &conn.faces)
}

/// Connected mesh from (possibly edited) patches: every valid cell of a
/// vertex becomes a world point, the vertex takes their mean, uncovered
/// vertices take the mean of their neighbours. Faces come from the map.
pub fn reconstruct_mesh(ds: &PatchDataset) -> Result<Mesh, PatchError> {
    let (vertices, _) = reconstruct_vertices(ds)?;
    let faces = ds.conn.as_ref().ok_or(PatchError::MissingConn)?.faces.clone();
    Ok(Mesh::new(vertices, faces)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::orient_frames;
    use crate::mesh::sample_points;
    use crate::patch::{extract_dataset, BinState, PatchParams};
    use crate::shapes;

    fn plane_dataset() -> (Mesh, PatchDataset) {
        let m = shapes::plane_grid(20, 20, 1.0);
        let params = {
            let mut p = PatchParams::new(0.1, 16);
            p.max_empty_disk_fraction = 0.8;
            p
        };
        let c = sample_points(&m, 4.0 / (params.bin_size() * params.bin_size()), 3).unwrap();
        let frames = orient_frames(&shapes::plane_quads(10, 1.0)).unwrap();
        let ds = extract_dataset(&c, &frames, &params, Some(&m), None).unwrap();
        (m, ds)
    }

    #[test]
    fn plane_roundtrip_within_bin_size() {
        let (m, ds) = plane_dataset();
        let rec = reconstruct_mesh(&ds).unwrap();
        assert_eq!(rec.faces, m.faces);
        let err: f64 = rec
            .vertices
            .iter()
            .zip(&m.vertices)
            .map(|(a, b)| (a - b).norm())
            .sum::<f64>()
            / m.vertices.len() as f64;
        assert!(err <= ds.bin_size(), "{err} > {}", ds.bin_size());
    }

    #[test]
    fn height_edit_moves_vertices_along_z() {
        let (_, mut ds) = plane_dataset();
        let base = reconstruct_mesh(&ds).unwrap();
        let target = 55;
        for h in &mut ds.patches[target].heights {
            *h += 0.05;
        }
        let moved = reconstruct_mesh(&ds).unwrap();
        let conn = ds.conn.as_ref().unwrap();
        for (v, cells) in conn.entries.iter().enumerate() {
            let valid: Vec<_> = cells.iter().filter(|(p, b)| ds.patches[*p as usize].is_valid(*b as usize)).collect();
            let in_target = valid.iter().filter(|(p, _)| *p as usize == target).count();
            if valid.is_empty() {
                continue;
            }
            let expected = 0.05 * in_target as f64 / valid.len() as f64;
            let d = moved.vertices[v] - base.vertices[v];
            assert!((d.z - expected).abs() < 1e-12);
            assert!(d.x.abs() < 1e-12 && d.y.abs() < 1e-12);
            if valid.len() == in_target {
                assert!((d.z - 0.05).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn uncovered_vertex_takes_neighbour_mean() {
        let (_, mut ds) = plane_dataset();
        let v = 21 * 10 + 10;
        // Hide every cell of vertex v.
        let cells = ds.conn.as_ref().unwrap().entries[v].clone();
        for (p, b) in cells {
            ds.patches[p as usize].mask[b as usize] = BinState::Invalid;
        }
        let conn = ds.conn.clone().unwrap();
        let est = vertex_estimates(&ds, &conn);
        assert!(est[v].is_none());
        let (pos, report) = reconstruct_vertices(&ds).unwrap();
        assert!(report.from_neighbours >= 1);
        let nb: Vec<usize> = crate::mesh::topology::vertex_neighbors(&crate::mesh::Mesh::new(pos.clone(), conn.faces.clone()).unwrap())[v].clone();
        let known: Vec<Vec3> = nb.iter().filter_map(|&u| est[u]).collect();
        let mean = known.iter().sum::<Vec3>() / known.len() as f64;
        assert!((pos[v] - mean).norm() < 1e-15);
    }

    #[test]
    fn isolated_unresolved_vertex_errors() {
        let est = vec![Some(Vec3::zeros()), None, None];
        let err = ring_fill(est, &[]).unwrap_err();
        assert!(matches!(err, PatchError::UnresolvableVertex(1)));
    }

    #[test]
    fn missing_conn_is_an_error() {
        let ds = PatchDataset::new(16, 0.1);
        assert!(matches!(reconstruct_mesh(&ds), Err(PatchError::MissingConn)));
    }
}
