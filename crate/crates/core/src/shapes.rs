//! Procedural test shapes: grids, height fields, spheres, tori, cylinders
//! and their quad-mesh counterparts.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_4, PI};

use crate::frames::QuadMesh;
use crate::geom::Vec3;
use crate::mesh::Mesh;

/// Flat `nx × ny` grid of side `size` centred at the origin in the z = 0
/// plane, normals along +Z.
pub fn plane_grid(nx: usize, ny: usize, size: f64) -> Mesh {
    height_field(nx, ny, size, |_, _| 0.0)
}

/// Regular grid over `[-size/2, size/2]²` with `z = height(x, y)`.
pub fn height_field(nx: usize, ny: usize, size: f64, height: impl Fn(f64, f64) -> f64) -> Mesh {
    assert!(nx > 0 && ny > 0);
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            let x = -0.5 * size + size * i as f64 / nx as f64;
            let y = -0.5 * size + size * j as f64 / ny as f64;
            vertices.push(Vec3::new(x, y, height(x, y)));
        }
    }
    let idx = |i: usize, j: usize| j * (nx + 1) + i;
    let mut faces = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    Mesh::new(vertices, faces).expect("grid indices are in range")
}

/// Product-of-sines texture used throughout the synthetic benchmarks.
pub fn sinusoid(amplitude: f64, wavelength: f64) -> impl Fn(f64, f64) -> f64 + Copy {
    let w = 2.0 * PI / wavelength;
    move |x, y| amplitude * (w * x).sin() * (w * y).sin()
}

/// Grid plane carrying the [`sinusoid`] texture.
pub fn sinusoid_plane(n: usize, size: f64, amplitude: f64, wavelength: f64) -> Mesh {
    height_field(n, n, size, sinusoid(amplitude, wavelength))
}

/// Three oblique waves of different wavelengths, peak height about 0.013.
/// Patches of it need tens of dictionary atoms, unlike [`sinusoid`].
pub fn wave_texture(x: f64, y: f64) -> f64 {
    0.006 * (40.0 * x + 13.0 * y).sin() + 0.004 * (17.0 * x - 55.0 * y).cos() + 0.003 * (90.0 * x).sin() * (70.0 * y + 1.0).cos()
}

/// Grid plane carrying [`wave_texture`].
pub fn wave_plane(n: usize, size: f64) -> Mesh {
    height_field(n, n, size, wave_texture)
}

/// Axis-aligned cube centred at the origin, 8 vertices and 12 outward faces.
pub fn cube(side: f64) -> Mesh {
    cube_quads(side).triangulate()
}

/// Axis-aligned cube as 6 quads.
pub fn cube_quads(side: f64) -> QuadMesh {
    let h = 0.5 * side;
    let mut vertices = Vec::with_capacity(8);
    for k in 0..8 {
        vertices.push(Vec3::new(
            if k & 1 == 0 { -h } else { h },
            if k & 2 == 0 { -h } else { h },
            if k & 4 == 0 { -h } else { h },
        ));
    }
    let quads = vec![
        [0, 2, 3, 1], // -z
        [4, 5, 7, 6], // +z
        [0, 1, 5, 4], // -y
        [2, 6, 7, 3], // +y
        [0, 4, 6, 2], // -x
        [1, 3, 7, 5], // +x
    ];
    QuadMesh::new(vertices, quads).expect("cube quads are valid")
}

/// Regular tetrahedron inscribed in the unit sphere.
pub fn tetrahedron() -> Mesh {
    let s = 1.0 / 3f64.sqrt();
    let vertices = vec![
        Vec3::new(s, s, s),
        Vec3::new(s, -s, -s),
        Vec3::new(-s, s, -s),
        Vec3::new(-s, -s, s),
    ];
    let faces = vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]];
    Mesh::new(vertices, faces).unwrap()
}

/// Subdivided icosahedron projected onto a sphere.
pub fn icosphere(subdivisions: usize, radius: f64) -> Mesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, vertices: &mut Vec<Vec3>| {
            let key = if a < b { (a, b) } else { (b, a) };
            *cache.entry(key).or_insert_with(|| {
                vertices.push(((vertices[a] + vertices[b]) * 0.5).normalize());
                vertices.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    for v in &mut vertices {
        *v *= radius;
    }
    Mesh::new(vertices, faces).unwrap()
}

/// Torus around the Z axis as a quad mesh (`nu` segments around the main
/// circle, `nv` around the tube), quads wound outward.
pub fn torus_quads(major: f64, minor: f64, nu: usize, nv: usize) -> QuadMesh {
    let mut vertices = Vec::with_capacity(nu * nv);
    for i in 0..nu {
        let u = 2.0 * PI * i as f64 / nu as f64;
        for j in 0..nv {
            let v = 2.0 * PI * j as f64 / nv as f64;
            let rr = major + minor * v.cos();
            vertices.push(Vec3::new(rr * u.cos(), rr * u.sin(), minor * v.sin()));
        }
    }
    let idx = |i: usize, j: usize| (i % nu) * nv + (j % nv);
    let mut quads = Vec::with_capacity(nu * nv);
    for i in 0..nu {
        for j in 0..nv {
            quads.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    QuadMesh::new(vertices, quads).unwrap()
}

pub fn torus(major: f64, minor: f64, nu: usize, nv: usize) -> Mesh {
    torus_quads(major, minor, nu, nv).triangulate()
}

/// Cube-sphere: each cube face split into `n × n` quads (equal-angle warp)
/// and projected on the sphere of the given radius.
pub fn cube_sphere_quads(n: usize, radius: f64) -> QuadMesh {
    assert!(n > 0);
    // (normal axis, sign, u axis, v axis) with u × v = sign · e_axis.
    const FACES: [(usize, bool, usize, usize); 6] = [
        (0, true, 1, 2),
        (0, false, 2, 1),
        (1, true, 2, 0),
        (1, false, 0, 2),
        (2, true, 0, 1),
        (2, false, 1, 0),
    ];
    let mut lattice: HashMap<[usize; 3], usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut vertex_at = |p: [usize; 3], vertices: &mut Vec<Vec3>| -> usize {
        *lattice.entry(p).or_insert_with(|| {
            let warp = |k: usize| (FRAC_PI_4 * (2.0 * k as f64 / n as f64 - 1.0)).tan();
            let q = Vec3::new(warp(p[0]), warp(p[1]), warp(p[2]));
            vertices.push(q.normalize() * radius);
            vertices.len() - 1
        })
    };
    let mut quads = Vec::with_capacity(6 * n * n);
    for &(axis, positive, ua, va) in &FACES {
        let point = |iu: usize, iv: usize| {
            let mut p = [0usize; 3];
            p[axis] = if positive { n } else { 0 };
            p[ua] = iu;
            p[va] = iv;
            p
        };
        for iv in 0..n {
            for iu in 0..n {
                let q = [
                    vertex_at(point(iu, iv), &mut vertices),
                    vertex_at(point(iu + 1, iv), &mut vertices),
                    vertex_at(point(iu + 1, iv + 1), &mut vertices),
                    vertex_at(point(iu, iv + 1), &mut vertices),
                ];
                quads.push(q);
            }
        }
    }
    QuadMesh::new(vertices, quads).unwrap()
}

/// Open cylinder of the given radius along Z, `height` tall.
pub fn cylinder(radius: f64, height: f64, n_around: usize, n_along: usize) -> Mesh {
    let mut vertices = Vec::with_capacity(n_around * (n_along + 1));
    for j in 0..=n_along {
        let z = -0.5 * height + height * j as f64 / n_along as f64;
        for i in 0..n_around {
            let a = 2.0 * PI * i as f64 / n_around as f64;
            vertices.push(Vec3::new(radius * a.cos(), radius * a.sin(), z));
        }
    }
    let idx = |i: usize, j: usize| j * n_around + (i % n_around);
    let mut faces = Vec::with_capacity(2 * n_around * n_along);
    for j in 0..n_along {
        for i in 0..n_around {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    Mesh::new(vertices, faces).unwrap()
}

/// Planar `n × n` quad grid of side `size` centred at the origin.
pub fn plane_quads(n: usize, size: f64) -> QuadMesh {
    let m = plane_grid(n, n, size);
    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let mut quads = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            quads.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    QuadMesh::new(m.vertices, quads).unwrap()
}
