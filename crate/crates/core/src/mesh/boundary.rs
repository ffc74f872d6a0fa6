use std::collections::{BTreeMap, HashMap};

use super::topology::{check_manifold_edges, edge_faces};
use super::{Mesh, MeshError};

/// Closed cycle of boundary edges. Consecutive vertices (and last → first)
/// follow the orientation of the single face owning each edge, so a hole
/// loop runs clockwise when seen from the side the normals point to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryLoop {
    pub vertices: Vec<usize>,
}

impl BoundaryLoop {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn perimeter(&self, mesh: &Mesh) -> f64 {
        self.edges()
            .map(|(a, b)| (mesh.vertices[a] - mesh.vertices[b]).norm())
            .sum()
    }

    pub fn mean_edge_length(&self, mesh: &Mesh) -> f64 {
        self.perimeter(mesh) / self.len().max(1) as f64
    }
}

/// Every maximal cycle of edges used by exactly one face. Loops through a
/// pinch vertex (a vertex touched by two boundary cycles) are split so each
/// returned loop is simple. Loops are sorted by descending vertex count;
/// each one starts at its smallest vertex index.
pub fn find_boundary_loops(mesh: &Mesh) -> Result<Vec<BoundaryLoop>, MeshError> {
    check_manifold_edges(mesh)?;
    let ef = edge_faces(mesh);
    // Outgoing boundary half-edges per vertex, ordered for determinism.
    let mut out: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for f in &mesh.faces {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            if ef[&super::topology::edge_key(a, b)].len() == 1 {
                out.entry(a).or_default().push(b);
            }
        }
    }
    for targets in out.values_mut() {
        targets.sort_unstable();
        targets.reverse(); // pop() yields the smallest
    }

    let mut loops = Vec::new();
    while let Some((&start, _)) = out.iter().find(|(_, t)| !t.is_empty()) {
        let mut path = vec![start];
        let mut pos: HashMap<usize, usize> = HashMap::from([(start, 0)]);
        let mut cur = start;
        loop {
            let next = match out.get_mut(&cur).and_then(Vec::pop) {
                Some(n) => n,
                // Open chain: cannot happen for consistently oriented
                // manifold input; drop it rather than loop forever.
                None => break,
            };
            if let Some(&i) = pos.get(&next) {
                let cycle: Vec<usize> = path.drain(i..).collect();
                for v in &cycle {
                    pos.remove(v);
                }
                loops.push(canonical(cycle));
                if path.is_empty() {
                    break;
                }
                // Continue from the pinch vertex itself.
                path.push(next);
                pos.insert(next, path.len() - 1);
                cur = next;
                if out.get(&cur).is_none_or(Vec::is_empty) {
                    break;
                }
                continue;
            }
            pos.insert(next, path.len());
            path.push(next);
            cur = next;
        }
    }
    loops.sort_by(|a: &BoundaryLoop, b| b.len().cmp(&a.len()).then(a.vertices[0].cmp(&b.vertices[0])));
    Ok(loops)
}

fn canonical(mut cycle: Vec<usize>) -> BoundaryLoop {
    let imin = cycle
        .iter()
        .enumerate()
        .min_by_key(|(_, &v)| v)
        .map(|(i, _)| i)
        .unwrap_or(0);
    cycle.rotate_left(imin);
    BoundaryLoop { vertices: cycle }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec3;
    use crate::shapes;

    #[test]
    fn cube_has_no_boundary() {
        assert!(find_boundary_loops(&shapes::cube(1.0)).unwrap().is_empty());
    }

    #[test]
    fn grid_has_single_perimeter_loop() {
        let m = shapes::plane_grid(4, 3, 1.0);
        let loops = find_boundary_loops(&m).unwrap();
        assert_eq!(loops.len(), 1);
        assert_eq!(loops[0].len(), 2 * (4 + 3));
        assert!((loops[0].perimeter(&m) - 2.0 * (1.0 + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn removed_quad_gives_two_loops() {
        let mut m = shapes::plane_grid(4, 4, 1.0);
        // Quad (1,1) is faces 2·(1·4+1) and the next.
        let q = 2 * (4 + 1);
        m.faces.drain(q..q + 2);
        let loops = find_boundary_loops(&m).unwrap();
        assert_eq!(loops.len(), 2);
        assert_eq!(loops[0].len(), 16);
        assert_eq!(loops[1].len(), 4);
        // Every loop edge is used by exactly one face, in that direction.
        for l in &loops {
            for (a, b) in l.edges() {
                let owners = m
                    .faces
                    .iter()
                    .filter(|f| (0..3).any(|k| f[k] == a && f[(k + 1) % 3] == b))
                    .count();
                assert_eq!(owners, 1);
            }
        }
    }

    #[test]
    fn pinch_vertex_splits_loops() {
        // Two triangles touching at vertex 0 only.
        let v = vec![
            Vec3::zeros(),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(1.0, 1.0, 0.0),
            Vec3::new(-1.0, 0.0, 0.0),
            Vec3::new(-1.0, -1.0, 0.0),
        ];
        let m = Mesh::new(v, vec![[0, 1, 2], [0, 3, 4]]).unwrap();
        let loops = find_boundary_loops(&m).unwrap();
        assert_eq!(loops.len(), 2);
        assert!(loops.iter().all(|l| l.len() == 3));
    }

    #[test]
    fn non_manifold_is_an_error() {
        let mut m = shapes::plane_grid(1, 1, 1.0);
        m.vertices.push(Vec3::new(0.0, 0.0, 1.0));
        m.faces.push([0, 3, 4]);
        assert!(find_boundary_loops(&m).is_err());
    }
}
