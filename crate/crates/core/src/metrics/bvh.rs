use rayon::prelude::*;

use crate::geom::{closest_point_on_triangle, Aabb, Vec3};
use crate::mesh::Mesh;

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone)]
struct Node {
    bounds: Aabb,
    /// Leaf: range into `order`. Inner: children indices.
    start: usize,
    count: usize,
    left: usize,
    right: usize,
}

/// Bounding-volume hierarchy over the triangles of a mesh, for exact
/// closest-point queries.
#[derive(Debug, Clone)]
pub struct Bvh {
    tris: Vec<[Vec3; 3]>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

/// Result of a closest-point query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Closest {
    pub face: usize,
    pub point: Vec3,
    pub distance: f64,
}

impl Bvh {
    pub fn new(mesh: &Mesh) -> Self {
        let tris: Vec<[Vec3; 3]> = (0..mesh.faces.len())
            .map(|f| {
                let [a, b, c] = mesh.triangle(f);
                [*a, *b, *c]
            })
            .collect();
        let mut bvh = Self {
            order: (0..tris.len()).collect(),
            tris,
            nodes: Vec::new(),
        };
        if !bvh.tris.is_empty() {
            let n = bvh.tris.len();
            bvh.build(0, n);
        }
        bvh
    }

    pub fn len(&self) -> usize {
        self.tris.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tris.is_empty()
    }

    fn tri_box(&self, t: usize) -> Aabb {
        Aabb::from_points(self.tris[t].iter())
    }

    fn build(&mut self, start: usize, count: usize) -> usize {
        let mut bounds = Aabb::empty();
        let mut centers = Aabb::empty();
        for &t in &self.order[start..start + count] {
            bounds = bounds.union(&self.tri_box(t));
            let [a, b, c] = &self.tris[t];
            centers.grow(&((a + b + c) / 3.0));
        }
        let id = self.nodes.len();
        self.nodes.push(Node {
            bounds,
            start,
            count,
            left: 0,
            right: 0,
        });
        if count <= LEAF_SIZE {
            return id;
        }
        let ext = centers.extent();
        let axis = if ext.x >= ext.y && ext.x >= ext.z {
            0
        } else if ext.y >= ext.z {
            1
        } else {
            2
        };
        let tris = &self.tris;
        let key = |t: usize| tris[t][0][axis] + tris[t][1][axis] + tris[t][2][axis];
        let mid = count / 2;
        self.order[start..start + count]
            .select_nth_unstable_by(mid, |&a, &b| key(a).total_cmp(&key(b)).then(a.cmp(&b)));
        let left = self.build(start, mid);
        let right = self.build(start + mid, count - mid);
        let node = &mut self.nodes[id];
        node.left = left;
        node.right = right;
        node.count = 0;
        id
    }

    /// Exact closest point on the mesh. Among equidistant faces the lowest
    /// index wins. `None` for an empty mesh.
    pub fn closest(&self, p: &Vec3) -> Option<Closest> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best = Closest {
            face: usize::MAX,
            point: *p,
            distance: f64::INFINITY,
        };
        let mut best_sq = f64::INFINITY;
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            if node.bounds.distance_squared(p) > best_sq {
                continue;
            }
            if node.count > 0 {
                for &t in &self.order[node.start..node.start + node.count] {
                    let [a, b, c] = &self.tris[t];
                    let q = closest_point_on_triangle(p, a, b, c);
                    let d = (q - p).norm_squared();
                    if d < best_sq || (d == best_sq && t < best.face) {
                        best_sq = d;
                        best = Closest {
                            face: t,
                            point: q,
                            distance: 0.0,
                        };
                    }
                }
            } else {
                let (l, r) = (node.left, node.right);
                let dl = self.nodes[l].bounds.distance_squared(p);
                let dr = self.nodes[r].bounds.distance_squared(p);
                // Nearer child popped first.
                if dl <= dr {
                    stack.push(r);
                    stack.push(l);
                } else {
                    stack.push(l);
                    stack.push(r);
                }
            }
        }
        best.distance = best_sq.sqrt();
        Some(best)
    }

    pub fn distance(&self, p: &Vec3) -> f64 {
        self.closest(p).map_or(f64::INFINITY, |c| c.distance)
    }

    pub fn distances(&self, points: &[Vec3]) -> Vec<f64> {
        points.par_iter().map(|p| self.distance(p)).collect()
    }
}

/// Point-to-mesh distance by scanning every face.
pub fn brute_force_distance(p: &Vec3, mesh: &Mesh) -> f64 {
    (0..mesh.faces.len())
        .map(|f| {
            let [a, b, c] = mesh.triangle(f);
            (closest_point_on_triangle(p, a, b, c) - p).norm_squared()
        })
        .fold(f64::INFINITY, f64::min)
        .sqrt()
}
