use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{FrameError, QuadMesh};
use crate::mesh::io::read_obj_polygons;

/// Loads a quad-only OBJ (as written by an external quadrangulator).
pub fn import_quad_mesh(path: impl AsRef<Path>) -> Result<QuadMesh, FrameError> {
    read_quad_obj(BufReader::new(File::open(path)?))
}

pub fn read_quad_obj(reader: impl BufRead) -> Result<QuadMesh, FrameError> {
    let raw = read_obj_polygons(reader)?;
    let mut quads = Vec::with_capacity(raw.polygons.len());
    for (fi, p) in raw.polygons.iter().enumerate() {
        if p.len() != 4 {
            return Err(FrameError::NotAQuad {
                face: fi,
                arity: p.len(),
            });
        }
        quads.push([p[0], p[1], p[2], p[3]]);
    }
    QuadMesh::new(raw.vertices, quads)
}

pub fn write_quad_obj(path: impl AsRef<Path>, q: &QuadMesh) -> Result<(), FrameError> {
    let mut w = BufWriter::new(File::create(path)?);
    for v in &q.vertices {
        writeln!(w, "v {:?} {:?} {:?}", v.x, v.y, v.z)?;
    }
    for f in &q.quads {
        writeln!(w, "f {} {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1, f[3] + 1)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;

    const GRID: &str = "v 0 0 0\nv 1 0 0\nv 2 0 0\nv 0 1 0\nv 1 1 0\nv 2 1 0\nv 0 2 0\nv 1 2 0\nv 2 2 0\n\
                        f 1 2 5 4\nf 2 3 6 5\nf 4 5 8 7\nf 5 6 9 8\n";

    #[test]
    fn grid_obj() {
        let q = read_quad_obj(GRID.as_bytes()).unwrap();
        assert_eq!(q.len(), 4);
        assert_eq!(q.link_count(), 4);
    }

    #[test]
    fn triangle_is_rejected_with_face_index() {
        let src = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\nf 1 2 3\n";
        let err = read_quad_obj(src.as_bytes()).unwrap_err();
        assert!(matches!(err, FrameError::NotAQuad { face: 1, arity: 3 }));
        assert!(err.to_string().contains("face 1"));
    }

    #[test]
    fn cube_roundtrip_through_file() {
        let c = shapes::cube_quads(2.0);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cube.obj");
        write_quad_obj(&p, &c).unwrap();
        let back = import_quad_mesh(&p).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.link_count(), 12);
    }

    #[test]
    fn non_manifold_quad_edge() {
        let src = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nv 1 0 1\nv 0 0 1\nv 1 0 -1\nv 0 0 -1\n\
                   f 1 2 3 4\nf 2 1 6 5\nf 1 2 7 8\n";
        assert!(matches!(read_quad_obj(src.as_bytes()), Err(FrameError::NonManifoldEdge(0, 1, 3))));
    }
}
