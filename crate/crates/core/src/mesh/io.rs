//! OBJ and PLY readers and writers.
//!
//! OBJ: ASCII `v` / `f` records with 1-based (or negative, relative)
//! indices; polygon faces are fan-triangulated. PLY: `ascii` and
//! `binary_little_endian` bodies with `vertex` (x, y, z, optional nx, ny, nz)
//! and `face` (vertex_indices list) elements. Other elements are skipped.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{Mesh, MeshError};
use crate::geom::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    Ply,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "obj" => Some(Self::Obj),
            "ply" => Some(Self::Ply),
            _ => None,
        }
    }
}

fn format_for(path: &Path) -> Result<MeshFormat, MeshError> {
    MeshFormat::from_path(path).ok_or_else(|| {
        MeshError::InvalidArgument(format!("cannot infer mesh format from {}", path.display()))
    })
}

/// Loads a mesh; `format` is inferred from the extension when `None`.
pub fn load_mesh(path: impl AsRef<Path>, format: Option<MeshFormat>) -> Result<Mesh, MeshError> {
    let path = path.as_ref();
    let format = match format {
        Some(f) => f,
        None => format_for(path)?,
    };
    let reader = BufReader::new(File::open(path)?);
    match format {
        MeshFormat::Obj => read_obj(reader),
        MeshFormat::Ply => read_ply(reader),
    }
}

/// Writes OBJ or ASCII PLY depending on the extension.
pub fn save_mesh(path: impl AsRef<Path>, mesh: &Mesh) -> Result<(), MeshError> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path)?);
    match format_for(path)? {
        MeshFormat::Obj => write_obj(mesh, &mut w)?,
        MeshFormat::Ply => write_ply(mesh, &mut w, false)?,
    }
    w.flush()?;
    Ok(())
}

/// Raw OBJ contents: vertices and polygons with 0-based indices, unchecked
/// arity.
pub struct ObjPolygons {
    pub vertices: Vec<Vec3>,
    pub polygons: Vec<Vec<usize>>,
}

pub fn read_obj_polygons(reader: impl BufRead) -> Result<ObjPolygons, MeshError> {
    let mut vertices = Vec::new();
    let mut polygons = Vec::new();
    for (ln, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.split('#').next().unwrap_or("");
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("v") => {
                let mut c = [0.0f64; 3];
                for slot in &mut c {
                    let t = tok.next().ok_or_else(|| MeshError::Parse {
                        line: ln + 1,
                        msg: "vertex needs three coordinates".into(),
                    })?;
                    *slot = t.parse().map_err(|_| MeshError::Parse {
                        line: ln + 1,
                        msg: format!("bad coordinate {t:?}"),
                    })?;
                }
                vertices.push(Vec3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let mut poly = Vec::new();
                for t in tok {
                    let head = t.split('/').next().unwrap_or("");
                    let raw: i64 = head.parse().map_err(|_| MeshError::Parse {
                        line: ln + 1,
                        msg: format!("bad face index {t:?}"),
                    })?;
                    let n = vertices.len() as i64;
                    let idx = match raw {
                        0 => -1,
                        r if r > 0 => r - 1,
                        r => n + r,
                    };
                    if idx < 0 {
                        return Err(MeshError::IndexOutOfRange {
                            face: polygons.len(),
                            index: raw,
                            vertex_count: vertices.len(),
                        });
                    }
                    poly.push(idx as usize);
                }
                if poly.len() < 3 {
                    return Err(MeshError::Parse {
                        line: ln + 1,
                        msg: "face needs at least three vertices".into(),
                    });
                }
                polygons.push(poly);
            }
            _ => {}
        }
    }
    // Forward references are legal in OBJ, so bounds are checked at the end.
    for (fi, p) in polygons.iter().enumerate() {
        if let Some(&bad) = p.iter().find(|&&i| i >= vertices.len()) {
            return Err(MeshError::IndexOutOfRange {
                face: fi,
                index: bad as i64 + 1,
                vertex_count: vertices.len(),
            });
        }
    }
    Ok(ObjPolygons { vertices, polygons })
}

fn fan(polygons: &[Vec<usize>]) -> Vec<[usize; 3]> {
    let mut faces = Vec::with_capacity(polygons.len());
    for p in polygons {
        for k in 1..p.len() - 1 {
            faces.push([p[0], p[k], p[k + 1]]);
        }
    }
    faces
}

pub fn read_obj(reader: impl BufRead) -> Result<Mesh, MeshError> {
    let raw = read_obj_polygons(reader)?;
    Mesh::new(raw.vertices, fan(&raw.polygons))
}

pub fn write_obj(mesh: &Mesh, w: &mut impl Write) -> std::io::Result<()> {
    for v in &mesh.vertices {
        writeln!(w, "v {:?} {:?} {:?}", v.x, v.y, v.z)?;
    }
    for f in &mesh.faces {
        writeln!(w, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
    }
    Ok(())
}

pub fn write_ply(mesh: &Mesh, w: &mut impl Write, binary: bool) -> std::io::Result<()> {
    writeln!(w, "ply")?;
    if binary {
        writeln!(w, "format binary_little_endian 1.0")?;
    } else {
        writeln!(w, "format ascii 1.0")?;
    }
    writeln!(w, "element vertex {}", mesh.vertices.len())?;
    for p in ["x", "y", "z"] {
        writeln!(w, "property double {p}")?;
    }
    if mesh.normals.is_some() {
        for p in ["nx", "ny", "nz"] {
            writeln!(w, "property double {p}")?;
        }
    }
    writeln!(w, "element face {}", mesh.faces.len())?;
    writeln!(w, "property list uchar int vertex_indices")?;
    writeln!(w, "end_header")?;
    for (i, v) in mesh.vertices.iter().enumerate() {
        let n = mesh.normals.as_ref().map(|n| n[i]);
        if binary {
            for c in v.iter().chain(n.iter().flat_map(|n| n.iter())) {
                w.write_all(&c.to_le_bytes())?;
            }
        } else {
            write!(w, "{:?} {:?} {:?}", v.x, v.y, v.z)?;
            if let Some(n) = n {
                write!(w, " {:?} {:?} {:?}", n.x, n.y, n.z)?;
            }
            writeln!(w)?;
        }
    }
    for f in &mesh.faces {
        if binary {
            w.write_all(&[3u8])?;
            for &i in f {
                w.write_all(&(i as i32).to_le_bytes())?;
            }
        } else {
            writeln!(w, "3 {} {} {}", f[0], f[1], f[2])?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }

    fn decode(self, b: &[u8]) -> f64 {
        match self {
            Self::I8 => b[0] as i8 as f64,
            Self::U8 => b[0] as f64,
            Self::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Self::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Self::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Self::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Self::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Self::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar(String, Scalar),
    List(String, Scalar, Scalar),
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

fn perr(line: usize, msg: impl Into<String>) -> MeshError {
    MeshError::Parse {
        line,
        msg: msg.into(),
    }
}

pub fn read_ply(mut reader: impl BufRead) -> Result<Mesh, MeshError> {
    let mut line = String::new();
    let mut ln = 0usize;
    let mut next_line = |reader: &mut dyn BufRead, line: &mut String| -> Result<usize, MeshError> {
        line.clear();
        ln += 1;
        if reader.read_line(line)? == 0 {
            return Err(perr(ln, "unexpected end of header"));
        }
        Ok(ln)
    };
    next_line(&mut reader, &mut line)?;
    if line.trim() != "ply" {
        return Err(perr(1, "missing ply magic"));
    }
    let mut binary = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let l = next_line(&mut reader, &mut line)?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["format", "ascii", _] => binary = Some(false),
            ["format", "binary_little_endian", _] => binary = Some(true),
            ["format", other, ..] => return Err(perr(l, format!("unsupported format {other}"))),
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count.parse().map_err(|_| perr(l, "bad element count"))?,
                props: Vec::new(),
            }),
            ["property", "list", ct, it, name] => {
                let el = elements.last_mut().ok_or_else(|| perr(l, "property before element"))?;
                let ct = Scalar::parse(ct).ok_or_else(|| perr(l, "bad list count type"))?;
                let it = Scalar::parse(it).ok_or_else(|| perr(l, "bad list item type"))?;
                el.props.push(Property::List(name.to_string(), ct, it));
            }
            ["property", ty, name] => {
                let el = elements.last_mut().ok_or_else(|| perr(l, "property before element"))?;
                let ty = Scalar::parse(ty).ok_or_else(|| perr(l, format!("bad type {ty}")))?;
                el.props.push(Property::Scalar(name.to_string(), ty));
            }
            ["end_header"] => break,
            _ => {}
        }
    }
    let binary = binary.ok_or_else(|| perr(ln, "missing format line"))?;

    let mut vertices = Vec::new();
    let mut normals: Vec<Vec3> = Vec::new();
    let mut faces: Vec<Vec<usize>> = Vec::new();

    let mut ascii_lines = if binary { None } else { Some(String::new()) };
    let mut body_line = ln;
    for el in &elements {
        for _ in 0..el.count {
            // One record as (scalars, lists).
            let mut scalars: Vec<(&str, f64)> = Vec::new();
            let mut lists: Vec<(&str, Vec<f64>)> = Vec::new();
            if let Some(buf) = ascii_lines.as_mut() {
                buf.clear();
                body_line += 1;
                if reader.read_line(buf)? == 0 {
                    return Err(perr(body_line, "truncated body"));
                }
                let mut tok = buf.split_whitespace();
                let num = |tok: &mut std::str::SplitWhitespace| -> Result<f64, MeshError> {
                    tok.next()
                        .ok_or_else(|| perr(body_line, "missing value"))?
                        .parse::<f64>()
                        .map_err(|_| perr(body_line, "bad number"))
                };
                for p in &el.props {
                    match p {
                        Property::Scalar(name, _) => scalars.push((name, num(&mut tok)?)),
                        Property::List(name, _, _) => {
                            let n = num(&mut tok)? as usize;
                            let mut items = Vec::with_capacity(n);
                            for _ in 0..n {
                                items.push(num(&mut tok)?);
                            }
                            lists.push((name, items));
                        }
                    }
                }
            } else {
                let mut read = |ty: Scalar| -> Result<f64, MeshError> {
                    let mut b = [0u8; 8];
                    reader
                        .read_exact(&mut b[..ty.size()])
                        .map_err(|_| perr(ln, "truncated binary body"))?;
                    Ok(ty.decode(&b))
                };
                for p in &el.props {
                    match p {
                        Property::Scalar(name, ty) => scalars.push((name, read(*ty)?)),
                        Property::List(name, ct, it) => {
                            let n = read(*ct)? as usize;
                            let mut items = Vec::with_capacity(n);
                            for _ in 0..n {
                                items.push(read(*it)?);
                            }
                            lists.push((name, items));
                        }
                    }
                }
            }
            let get = |k: &str| scalars.iter().find(|(n, _)| *n == k).map(|(_, v)| *v);
            match el.name.as_str() {
                "vertex" => {
                    let (x, y, z) = match (get("x"), get("y"), get("z")) {
                        (Some(x), Some(y), Some(z)) => (x, y, z),
                        _ => return Err(perr(body_line, "vertex without x/y/z")),
                    };
                    vertices.push(Vec3::new(x, y, z));
                    if let (Some(nx), Some(ny), Some(nz)) = (get("nx"), get("ny"), get("nz")) {
                        normals.push(Vec3::new(nx, ny, nz));
                    }
                }
                "face" => {
                    let list = lists
                        .iter()
                        .find(|(n, _)| *n == "vertex_indices" || *n == "vertex_index")
                        .ok_or_else(|| perr(body_line, "face without vertex_indices"))?;
                    let mut poly = Vec::with_capacity(list.1.len());
                    for &i in &list.1 {
                        if i < 0.0 {
                            return Err(MeshError::IndexOutOfRange {
                                face: faces.len(),
                                index: i as i64,
                                vertex_count: vertices.len(),
                            });
                        }
                        poly.push(i as usize);
                    }
                    if poly.len() < 3 {
                        return Err(perr(body_line, "face needs at least three vertices"));
                    }
                    faces.push(poly);
                }
                _ => {}
            }
        }
    }
    let mut mesh = Mesh::new(vertices, fan(&faces))?;
    if !normals.is_empty() && normals.len() == mesh.vertices.len() {
        mesh.normals = Some(normals);
    }
    Ok(mesh)
}
