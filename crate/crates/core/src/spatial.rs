//! Uniform hash grid for fixed-radius neighbour queries.

use std::collections::HashMap;

use crate::geom::Vec3;

pub struct PointGrid {
    cell: f64,
    buckets: HashMap<[i64; 3], Vec<usize>>,
    points: Vec<Vec3>,
}

impl PointGrid {
    pub fn new(cell: f64) -> Self {
        assert!(cell > 0.0 && cell.is_finite(), "grid cell must be positive");
        Self {
            cell,
            buckets: HashMap::new(),
            points: Vec::new(),
        }
    }

    pub fn from_points(points: &[Vec3], cell: f64) -> Self {
        let mut g = Self::new(cell);
        for p in points {
            g.insert(*p);
        }
        g
    }

    fn key(&self, p: &Vec3) -> [i64; 3] {
        [
            (p.x / self.cell).floor() as i64,
            (p.y / self.cell).floor() as i64,
            (p.z / self.cell).floor() as i64,
        ]
    }

    /// Inserts a point and returns its index.
    pub fn insert(&mut self, p: Vec3) -> usize {
        let id = self.points.len();
        let k = self.key(&p);
        self.buckets.entry(k).or_default().push(id);
        self.points.push(p);
        id
    }

    pub fn point(&self, i: usize) -> &Vec3 {
        &self.points[i]
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn visit(&self, p: &Vec3, radius: f64, mut f: impl FnMut(usize, f64) -> bool) {
        let reach = (radius / self.cell).ceil() as i64;
        let c = self.key(p);
        let r2 = radius * radius;
        for dx in -reach..=reach {
            for dy in -reach..=reach {
                for dz in -reach..=reach {
                    if let Some(ids) = self.buckets.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) {
                        for &i in ids {
                            let d2 = (self.points[i] - p).norm_squared();
                            if d2 <= r2 && !f(i, d2) {
                                return;
                            }
                        }
                    }
                }
            }
        }
    }

    /// Indices of points within `radius` of `p` (inclusive), sorted.
    pub fn within(&self, p: &Vec3, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.visit(p, radius, |i, _| {
            out.push(i);
            true
        });
        out.sort_unstable();
        out
    }

    /// True if any point lies strictly closer than `radius`.
    pub fn any_closer(&self, p: &Vec3, radius: f64) -> bool {
        let mut hit = false;
        self.visit(p, radius, |_, d2| {
            if d2 < radius * radius {
                hit = true;
                return false;
            }
            true
        });
        hit
    }

    /// Up to `k` nearest points within `radius`, nearest first (ties by
    /// index).
    pub fn nearest_within(&self, p: &Vec3, radius: f64, k: usize) -> Vec<usize> {
        let mut found: Vec<(f64, usize)> = Vec::new();
        self.visit(p, radius, |i, d2| {
            found.push((d2, i));
            true
        });
        found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        found.into_iter().take(k).map(|(_, i)| i).collect()
    }
}
