use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{HoleRegion, InpaintError};
use crate::geom::{triangle_area, triangle_normal, Aabb, Vec3};
use crate::mesh::topology::edge_key;
use crate::mesh::{find_boundary_loops, BoundaryLoop, Mesh};

/// Hole-filling knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FillOptions {
    /// Interior edges longer than this multiple of the mean boundary edge
    /// are split.
    pub density_factor: f64,
    pub relaxation_passes: usize,
    /// Upper bound on vertices inserted per hole.
    pub max_new_vertices: usize,
}

impl Default for FillOptions {
    fn default() -> Self {
        Self {
            density_factor: 1.5,
            relaxation_passes: 5,
            max_new_vertices: 20_000,
        }
    }
}

/// (max dihedral angle, area), compared lexicographically.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Weight {
    angle: f64,
    area: f64,
}

impl Weight {
    const ZERO: Weight = Weight { angle: 0.0, area: 0.0 };

    fn better_than(&self, o: &Weight) -> bool {
        self.angle < o.angle || (self.angle == o.angle && self.area < o.area)
    }
}

fn dihedral(a: Option<Vec3>, b: Option<Vec3>) -> f64 {
    match (a, b) {
        (Some(a), Some(b)) => a.dot(&b).clamp(-1.0, 1.0).acos(),
        _ => std::f64::consts::PI,
    }
}

/// Directed half-edge → owning face.
pub(crate) fn half_edge_faces(mesh: &Mesh) -> HashMap<(usize, usize), usize> {
    let mut m = HashMap::with_capacity(3 * mesh.faces.len());
    for (fi, f) in mesh.faces.iter().enumerate() {
        for k in 0..3 {
            m.insert((f[k], f[(k + 1) % 3]), fi);
        }
    }
    m
}

/// Minimum-weight triangulation of the loop polygon by dynamic
/// programming. A triangle's weight is the largest dihedral angle it makes
/// with its neighbours (inside the polygon, or the mesh face across a
/// boundary edge) and its area; weights combine by (max, sum).
fn min_weight_triangulation(mesh: &Mesh, lp: &[usize], hef: &HashMap<(usize, usize), usize>) -> Vec<[usize; 3]> {
    let n = lp.len();
    let p = |i: usize| &mesh.vertices[lp[i]];
    // New faces traverse loop edges backwards: triangle (i, m, k) with
    // i < m < k is stored as [v_i, v_k, v_m].
    let tri_normal = |i: usize, m: usize, k: usize| triangle_normal(p(i), p(k), p(m));
    let across = |i: usize, j: usize| -> Option<Vec3> {
        hef.get(&(lp[i], lp[j])).and_then(|&f| {
            let [a, b, c] = mesh.triangle(f);
            triangle_normal(a, b, c)
        })
    };
    let mut w = vec![Weight::ZERO; n * n];
    let mut choice = vec![usize::MAX; n * n];
    let at = |i: usize, k: usize| i * n + k;
    for d in 2..n {
        for i in 0..n - d {
            let k = i + d;
            let mut best = Weight {
                angle: f64::INFINITY,
                area: f64::INFINITY,
            };
            let mut best_m = usize::MAX;
            for m in i + 1..k {
                let nt = tri_normal(i, m, k);
                let left = if m == i + 1 {
                    across(i, m)
                } else {
                    tri_normal(i, choice[at(i, m)], m)
                };
                let right = if k == m + 1 {
                    across(m, k)
                } else {
                    tri_normal(m, choice[at(m, k)], k)
                };
                let mut angle = w[at(i, m)]
                    .angle
                    .max(w[at(m, k)].angle)
                    .max(dihedral(nt, left))
                    .max(dihedral(nt, right));
                if i == 0 && k == n - 1 {
                    angle = angle.max(dihedral(nt, across(n - 1, 0)));
                }
                let cand = Weight {
                    angle,
                    area: w[at(i, m)].area + w[at(m, k)].area + triangle_area(p(i), p(m), p(k)),
                };
                if cand.better_than(&best) {
                    best = cand;
                    best_m = m;
                }
            }
            w[at(i, k)] = best;
            choice[at(i, k)] = best_m;
        }
    }
    let mut tris = Vec::with_capacity(n - 2);
    let mut stack = vec![(0usize, n - 1)];
    while let Some((i, k)) = stack.pop() {
        if k < i + 2 {
            continue;
        }
        let m = choice[at(i, k)];
        tris.push([lp[i], lp[k], lp[m]]);
        stack.push((i, m));
        stack.push((m, k));
    }
    tris
}

/// Working triangulation of one hole: global vertex ids, positions of the
/// inserted vertices appended after the mesh's own.
struct Patchwork<'a> {
    mesh: &'a Mesh,
    extra: Vec<Vec3>,
    tris: Vec<[usize; 3]>,
    fixed_edges: HashSet<(usize, usize)>,
}

impl Patchwork<'_> {
    fn pos(&self, v: usize) -> Vec3 {
        let n = self.mesh.vertices.len();
        if v < n {
            self.mesh.vertices[v]
        } else {
            self.extra[v - n]
        }
    }

    fn edge_tris(&self) -> HashMap<(usize, usize), Vec<usize>> {
        let mut m: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (t, f) in self.tris.iter().enumerate() {
            for k in 0..3 {
                m.entry(edge_key(f[k], f[(k + 1) % 3])).or_default().push(t);
            }
        }
        m
    }

    fn len(&self, e: (usize, usize)) -> f64 {
        (self.pos(e.0) - self.pos(e.1)).norm()
    }

    fn normal(&self, f: &[usize; 3]) -> Option<Vec3> {
        triangle_normal(&self.pos(f[0]), &self.pos(f[1]), &self.pos(f[2]))
    }

    /// Longest interior edge, ties to the smallest key.
    fn longest_interior(&self) -> Option<((usize, usize), f64)> {
        let mut best: Option<((usize, usize), f64)> = None;
        let mut keys: Vec<(usize, usize)> = self.edge_tris().into_keys().filter(|e| !self.fixed_edges.contains(e)).collect();
        keys.sort_unstable();
        for e in keys {
            let l = self.len(e);
            if best.is_none_or(|(_, b)| l > b) {
                best = Some((e, l));
            }
        }
        best
    }

    fn split(&mut self, e: (usize, usize)) {
        let mid = 0.5 * (self.pos(e.0) + self.pos(e.1));
        let m = self.mesh.vertices.len() + self.extra.len();
        self.extra.push(mid);
        let mut out = Vec::with_capacity(self.tris.len() + 2);
        for f in &self.tris {
            let mut handled = false;
            for k in 0..3 {
                let (x, y, z) = (f[k], f[(k + 1) % 3], f[(k + 2) % 3]);
                if edge_key(x, y) == e {
                    out.push([x, m, z]);
                    out.push([m, y, z]);
                    handled = true;
                    break;
                }
            }
            if !handled {
                out.push(*f);
            }
        }
        self.tris = out;
    }

    /// Flips interior edges whose opposite diagonal is shorter, while the
    /// flip keeps both triangles facing the same way.
    fn improve_by_flips(&mut self) {
        let cap = 10 * self.tris.len() + 10;
        for _ in 0..cap {
            let et = self.edge_tris();
            let mut keys: Vec<(usize, usize)> = et.keys().copied().filter(|e| !self.fixed_edges.contains(e)).collect();
            keys.sort_unstable();
            let mut flipped = false;
            // Triangles changed in this pass; their edges in `et` are stale.
            let mut touched = HashSet::new();
            for e in keys {
                let ts = &et[&e];
                if ts.len() != 2 || touched.contains(&ts[0]) || touched.contains(&ts[1]) {
                    continue;
                }
                let (t1, t2) = (ts[0], ts[1]);
                let Some((a, b, c)) = oriented(&self.tris[t1], e) else { continue };
                let Some((b2, a2, d)) = oriented(&self.tris[t2], e) else { continue };
                if a2 != a || b2 != b || c == d || et.contains_key(&edge_key(c, d)) {
                    continue;
                }
                if self.len((c, d)) >= self.len((a, b)) * (1.0 - 1e-12) {
                    continue;
                }
                let (n1, n2) = ([c, a, d], [d, b, c]);
                let old = self.normal(&self.tris[t1]).unwrap_or_default() + self.normal(&self.tris[t2]).unwrap_or_default();
                let ok = [n1, n2].iter().all(|f| self.normal(f).is_some_and(|n| n.dot(&old) > 0.0));
                if !ok {
                    continue;
                }
                self.tris[t1] = n1;
                self.tris[t2] = n2;
                touched.insert(t1);
                touched.insert(t2);
                flipped = true;
            }
            if !flipped {
                break;
            }
        }
    }
}

/// `(x, y, z)` with `x → y` the directed edge of `f` covering `e`.
fn oriented(f: &[usize; 3], e: (usize, usize)) -> Option<(usize, usize, usize)> {
    (0..3).find_map(|k| {
        let (x, y, z) = (f[k], f[(k + 1) % 3], f[(k + 2) % 3]);
        (edge_key(x, y) == e).then_some((x, y, z))
    })
}

/// Closes one boundary loop.
///
/// The polygon is triangulated by the minimum-weight dynamic program, then
/// refined by bisecting the longest interior edge (with length-reducing
/// edge flips after each split) until no interior edge exceeds
/// `density_factor` × the mean boundary edge (or 3/4 of the longest
/// boundary edge, if that is larger). Finally the inserted vertices
/// get `relaxation_passes` rounds of umbrella smoothing; loop vertices stay
/// fixed. Inserted vertices and faces are appended to the mesh.
pub fn triangulate_hole(mesh: &Mesh, lp: &BoundaryLoop, opts: &FillOptions) -> Result<(Mesh, HoleRegion), InpaintError> {
    let hef = half_edge_faces(mesh);
    triangulate_with(mesh, lp, opts, &hef)
}

fn triangulate_with(
    mesh: &Mesh,
    lp: &BoundaryLoop,
    opts: &FillOptions,
    hef: &HashMap<(usize, usize), usize>,
) -> Result<(Mesh, HoleRegion), InpaintError> {
    let n = lp.len();
    if n < 3 {
        return Err(InpaintError::LoopTooShort(n));
    }
    let mut seen = HashSet::with_capacity(n);
    for &v in &lp.vertices {
        if v >= mesh.vertices.len() {
            return Err(InpaintError::InvalidArgument(format!("loop vertex {v} out of range")));
        }
        if !seen.insert(v) {
            return Err(InpaintError::NonSimpleLoop(v));
        }
    }
    let mut work = Patchwork {
        mesh,
        extra: Vec::new(),
        tris: min_weight_triangulation(mesh, &lp.vertices, hef),
        fixed_edges: lp.edges().map(|(a, b)| edge_key(a, b)).collect(),
    };
    // Edges next to a fixed boundary edge of length L cannot all drop below
    // L/2, so the bound never goes under 3/4 of the longest one.
    let longest = lp.edges().map(|(a, b)| (mesh.vertices[a] - mesh.vertices[b]).norm()).fold(0.0, f64::max);
    let bound = (opts.density_factor * lp.mean_edge_length(mesh)).max(0.75 * longest);
    work.improve_by_flips();
    while let Some((e, l)) = work.longest_interior() {
        if l <= bound {
            break;
        }
        if work.extra.len() >= opts.max_new_vertices {
            log::warn!("hole refinement stopped at {} inserted vertices", work.extra.len());
            break;
        }
        work.split(e);
        work.improve_by_flips();
    }

    let base = mesh.vertices.len();
    let added = work.extra.len();
    if added > 0 && opts.relaxation_passes > 0 {
        let mut nbrs: Vec<Vec<usize>> = vec![Vec::new(); added];
        for f in &work.tris {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                if a >= base {
                    nbrs[a - base].push(b);
                }
                if b >= base {
                    nbrs[b - base].push(a);
                }
            }
        }
        for l in &mut nbrs {
            l.sort_unstable();
            l.dedup();
        }
        for _ in 0..opts.relaxation_passes {
            let next: Vec<Vec3> = nbrs
                .iter()
                .map(|l| l.iter().map(|&u| work.pos(u)).sum::<Vec3>() / l.len() as f64)
                .collect();
            work.extra = next;
        }
    }

    let mut vertices = mesh.vertices.clone();
    vertices.extend_from_slice(&work.extra);
    let mut faces = mesh.faces.clone();
    let first_face = faces.len();
    faces.extend_from_slice(&work.tris);
    let region = HoleRegion {
        boundary: lp.clone(),
        scaffold_vertices: (base..base + added).collect(),
        scaffold_faces: (first_face..faces.len()).collect(),
    };
    Ok((Mesh::new(vertices, faces)?, region))
}

/// Loops whose bounding-box diagonal is at most `max_extent` (all loops
/// when `None`), largest first.
pub fn hole_loops(mesh: &Mesh, max_extent: Option<f64>) -> Result<Vec<BoundaryLoop>, InpaintError> {
    let loops = find_boundary_loops(mesh)?;
    Ok(loops
        .into_iter()
        .filter(|l| {
            max_extent.is_none_or(|m| Aabb::from_points(l.vertices.iter().map(|&v| &mesh.vertices[v])).diagonal() <= m)
        })
        .collect())
}

/// Triangulates every hole loop (see [`hole_loops`]) in turn.
pub fn fill_holes(mesh: &Mesh, max_extent: Option<f64>, opts: &FillOptions) -> Result<(Mesh, Vec<HoleRegion>), InpaintError> {
    let loops = hole_loops(mesh, max_extent)?;
    let hef = half_edge_faces(mesh);
    let mut cur = mesh.clone();
    let mut regions = Vec::with_capacity(loops.len());
    for lp in &loops {
        let (next, region) = triangulate_with(&cur, lp, opts, &hef)?;
        cur = next;
        regions.push(region);
    }
    Ok((cur, regions))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::topology::edge_faces;
    use crate::shapes;

    /// Unit-edge hexagon fan in the z = 0 plane with the centre removed
    /// and a ring of outer triangles kept.
    fn hex_hole(scale: f64) -> (Mesh, BoundaryLoop) {
        let mut v = Vec::new();
        for k in 0..6 {
            let a = std::f64::consts::PI / 3.0 * k as f64;
            v.push(Vec3::new(scale * a.cos(), scale * a.sin(), 0.0));
        }
        for k in 0..6 {
            let a = std::f64::consts::PI / 3.0 * (k as f64 + 0.5);
            v.push(Vec3::new(2.0 * scale * a.cos(), 2.0 * scale * a.sin(), 0.0));
        }
        let mut f = Vec::new();
        for k in 0..6 {
            let (a, b, o) = (k, (k + 1) % 6, 6 + k);
            f.push([b, a, o]);
            f.push([b, o, 6 + (k + 1) % 6]);
        }
        let m = Mesh::new(v, f).unwrap();
        let loops = find_boundary_loops(&m).unwrap();
        let inner = loops.into_iter().find(|l| l.vertices.iter().all(|&x| x < 6)).unwrap();
        (m, inner)
    }

    #[test]
    fn triangle_hole_gets_one_face() {
        let m = Mesh::new(
            vec![Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::new(1.0, 1.0, 0.0)],
            vec![[1, 3, 2]],
        )
        .unwrap();
        let lp = BoundaryLoop { vertices: vec![1, 2, 3] };
        let (out, region) = triangulate_hole(&m, &lp, &FillOptions::default()).unwrap();
        assert_eq!(region.scaffold_faces.len(), 1);
        assert!(region.scaffold_vertices.is_empty());
        assert_eq!(out.vertices.len(), 4);
    }

    #[test]
    fn planar_hexagon_stays_planar_and_closes() {
        let (m, lp) = hex_hole(1.0);
        let (out, region) = triangulate_hole(&m, &lp, &FillOptions::default()).unwrap();
        assert!(!region.scaffold_vertices.is_empty());
        for &v in &region.scaffold_vertices {
            assert!(out.vertices[v].z.abs() < 1e-9);
        }
        let bound = 1.5 * lp.mean_edge_length(&m) + 1e-12;
        let fixed: HashSet<_> = lp.edges().map(|(a, b)| edge_key(a, b)).collect();
        for &f in &region.scaffold_faces {
            let t = out.faces[f];
            for k in 0..3 {
                let e = edge_key(t[k], t[(k + 1) % 3]);
                if !fixed.contains(&e) {
                    assert!((out.vertices[e.0] - out.vertices[e.1]).norm() <= bound);
                }
            }
        }
        let after = find_boundary_loops(&out).unwrap();
        assert_eq!(after.len(), 1);
        assert!(after[0].vertices.iter().all(|&v| v >= 6 && v < 12));
        assert!(edge_faces(&out).values().all(|f| f.len() <= 2));
        // Consistent orientation: every scaffold normal points up like the ring.
        for &f in &region.scaffold_faces {
            assert!(out.face_normal(f).z > 0.0);
        }
    }

    #[test]
    fn hexagon_without_split_uses_n_minus_2_faces() {
        let (m, lp) = hex_hole(1.0);
        let opts = FillOptions {
            density_factor: 2.5,
            ..FillOptions::default()
        };
        let (_, region) = triangulate_hole(&m, &lp, &opts).unwrap();
        assert_eq!(region.scaffold_faces.len(), 4);
        assert!(region.scaffold_vertices.is_empty());
    }

    #[test]
    fn rejects_bad_loops() {
        let (m, _) = hex_hole(1.0);
        let short = BoundaryLoop { vertices: vec![0, 1] };
        assert!(matches!(triangulate_hole(&m, &short, &FillOptions::default()), Err(InpaintError::LoopTooShort(2))));
        let rep = BoundaryLoop { vertices: vec![0, 1, 2, 1] };
        assert!(matches!(triangulate_hole(&m, &rep, &FillOptions::default()), Err(InpaintError::NonSimpleLoop(1))));
    }

    #[test]
    fn fill_holes_skips_the_outer_border() {
        let m = shapes::plane_grid(10, 10, 1.0);
        let keep: Vec<[usize; 3]> = m
            .faces
            .iter()
            .copied()
            .filter(|f| {
                let c = (m.vertices[f[0]] + m.vertices[f[1]] + m.vertices[f[2]]) / 3.0;
                c.norm() > 0.15
            })
            .collect();
        let damaged = Mesh::new(m.vertices.clone(), keep).unwrap();
        let (out, regions) = fill_holes(&damaged, Some(1.0), &FillOptions::default()).unwrap();
        assert_eq!(regions.len(), 1);
        assert_eq!(find_boundary_loops(&out).unwrap().len(), 1);
        for &v in &regions[0].scaffold_vertices {
            assert!(out.vertices[v].z.abs() < 1e-12);
        }
    }
}
