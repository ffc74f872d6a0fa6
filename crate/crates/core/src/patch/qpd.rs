//! QPD: little-endian patch container shared with external inpainters.
//!
//! ```text
//! "QPD1" | u32 N | f64 r | u32 count
//! per patch: u32 quad_id | u32 offset_id | 9 × f64 R (row-major) | 3 × f64 seed
//!            | N² × f32 heights | N² × u8 mask (0 valid, 1 invalid, 2 hole)
//! ```
//! The connectivity map and provenance live in a JSON sidecar next to it.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{BinState, ConnMap, Patch, PatchDataset, PatchError, Provenance};
use crate::frames::PatchFrame;
use crate::geom::{Mat3, Vec3};

pub const MAGIC: &[u8; 4] = b"QPD1";
pub const HEADER_BYTES: usize = 4 + 4 + 8 + 4;

pub fn patch_bytes(resolution: usize) -> usize {
    8 + 12 * 8 + 5 * resolution * resolution
}

pub fn write_qpd(w: &mut impl Write, ds: &PatchDataset) -> Result<(), PatchError> {
    let n = ds.resolution;
    for p in &ds.patches {
        ds.check_compatible(p.resolution, p.radius)?;
        if p.heights.len() != n * n || p.mask.len() != n * n {
            return Err(PatchError::InvalidArgument(format!(
                "patch has {} heights / {} mask entries, expected {}",
                p.heights.len(),
                p.mask.len(),
                n * n
            )));
        }
    }
    let count = u32::try_from(ds.patches.len())
        .map_err(|_| PatchError::InvalidArgument("too many patches for QPD".into()))?;
    w.write_all(MAGIC)?;
    w.write_all(&(n as u32).to_le_bytes())?;
    w.write_all(&ds.radius.to_le_bytes())?;
    w.write_all(&count.to_le_bytes())?;
    let mut buf = Vec::with_capacity(patch_bytes(n));
    for p in &ds.patches {
        buf.clear();
        buf.extend_from_slice(&(p.frame.quad_id as u32).to_le_bytes());
        buf.extend_from_slice(&(p.frame.offset_id as u32).to_le_bytes());
        for i in 0..3 {
            for j in 0..3 {
                buf.extend_from_slice(&p.frame.rotation[(i, j)].to_le_bytes());
            }
        }
        for k in 0..3 {
            buf.extend_from_slice(&p.frame.seed[k].to_le_bytes());
        }
        for &h in &p.heights {
            buf.extend_from_slice(&(h as f32).to_le_bytes());
        }
        buf.extend(p.mask.iter().map(|s| s.code()));
        w.write_all(&buf)?;
    }
    Ok(())
}

fn take<const K: usize>(r: &mut impl Read, what: &str) -> Result<[u8; K], PatchError> {
    let mut b = [0u8; K];
    r.read_exact(&mut b).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => PatchError::Truncated(format!("while reading {what}")),
        _ => PatchError::Io(e),
    })?;
    Ok(b)
}

pub fn read_qpd(r: &mut impl Read) -> Result<PatchDataset, PatchError> {
    let magic = take::<4>(r, "magic")?;
    if &magic != MAGIC {
        return Err(PatchError::BadMagic(magic));
    }
    let n = u32::from_le_bytes(take(r, "resolution")?) as usize;
    let radius = f64::from_le_bytes(take(r, "radius")?);
    let count = u32::from_le_bytes(take(r, "patch count")?) as usize;
    if n < 2 || !(radius > 0.0) {
        return Err(PatchError::InvalidArgument(format!("bad header: N={n}, r={radius}")));
    }
    let m = n * n;
    let mut ds = PatchDataset::new(n, radius);
    let mut body = vec![0u8; patch_bytes(n)];
    for pi in 0..count {
        r.read_exact(&mut body).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => PatchError::Truncated(format!("patch {pi} of {count}")),
            _ => PatchError::Io(e),
        })?;
        let u32_at = |o: usize| u32::from_le_bytes(body[o..o + 4].try_into().unwrap());
        let f64_at = |o: usize| f64::from_le_bytes(body[o..o + 8].try_into().unwrap());
        let quad_id = u32_at(0) as usize;
        let offset_id = u32_at(4) as usize;
        let mut rot = [0.0; 9];
        for (k, v) in rot.iter_mut().enumerate() {
            *v = f64_at(8 + 8 * k);
        }
        let seed = Vec3::new(f64_at(80), f64_at(88), f64_at(96));
        let hoff = 104;
        let heights = (0..m)
            .map(|i| f32::from_le_bytes(body[hoff + 4 * i..hoff + 4 * i + 4].try_into().unwrap()) as f64)
            .collect();
        let moff = hoff + 4 * m;
        let mask = body[moff..moff + m]
            .iter()
            .map(|&c| {
                BinState::from_code(c)
                    .ok_or_else(|| PatchError::InvalidArgument(format!("patch {pi}: unknown mask code {c}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        ds.patches.push(Patch {
            heights,
            mask,
            frame: PatchFrame {
                seed,
                rotation: Mat3::from_row_slice(&rot),
                quad_id,
                offset_id,
            },
            radius,
            resolution: n,
        });
    }
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(PatchError::InvalidArgument(format!(
            "trailing bytes after {count} patches"
        )));
    }
    Ok(ds)
}

/// Sidecar location for a QPD file: `<path>.conn.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".conn.json");
    PathBuf::from(s)
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    faces: Vec<[usize; 3]>,
    conn: BTreeMap<String, Vec<[u32; 2]>>,
    #[serde(default)]
    provenance: Provenance,
}

/// Writes the QPD file and, when the dataset has a connectivity map or
/// provenance, its JSON sidecar.
pub fn write_dataset(path: impl AsRef<Path>, ds: &PatchDataset) -> Result<(), PatchError> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path)?);
    write_qpd(&mut w, ds)?;
    w.flush()?;
    let side = sidecar_path(path);
    if ds.conn.is_some() || ds.provenance != Provenance::default() {
        let empty = ConnMap::default();
        let conn = ds.conn.as_ref().unwrap_or(&empty);
        let sc = Sidecar {
            faces: conn.faces.clone(),
            conn: conn
                .entries
                .iter()
                .enumerate()
                .map(|(j, e)| (j.to_string(), e.iter().map(|&(p, b)| [p, b]).collect()))
                .collect(),
            provenance: ds.provenance.clone(),
        };
        serde_json::to_writer(BufWriter::new(File::create(side)?), &sc)?;
    } else if side.exists() {
        std::fs::remove_file(side)?;
    }
    Ok(())
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<PatchDataset, PatchError> {
    let path = path.as_ref();
    let mut ds = read_qpd(&mut BufReader::new(File::open(path)?))?;
    let side = sidecar_path(path);
    if side.exists() {
        let sc: Sidecar = serde_json::from_reader(BufReader::new(File::open(side)?))?;
        let mut entries = Vec::new();
        for (k, cells) in sc.conn {
            let j: usize = k
                .parse()
                .map_err(|_| PatchError::InvalidArgument(format!("bad vertex key {k:?} in sidecar")))?;
            if j >= entries.len() {
                entries.resize(j + 1, Vec::new());
            }
            for [p, b] in cells {
                if p as usize >= ds.len() || b as usize >= ds.dim() {
                    return Err(PatchError::InvalidArgument(format!("vertex {j}: cell ({p}, {b}) out of range")));
                }
                entries[j].push((p, b));
            }
        }
        if !(entries.is_empty() && sc.faces.is_empty()) {
            let needed = sc.faces.iter().flatten().map(|&i| i + 1).max().unwrap_or(0);
            if entries.len() < needed {
                entries.resize(needed, Vec::new());
            }
            ds.conn = Some(ConnMap {
                entries,
                faces: sc.faces,
            });
        }
        ds.provenance = sc.provenance;
    }
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_dataset(count: usize, n: usize) -> PatchDataset {
        let mut ds = PatchDataset::new(n, 0.05);
        for k in 0..count {
            let r = nalgebra::Rotation3::from_euler_angles(0.1 * k as f64, 0.2, -0.3);
            ds.patches.push(Patch {
                heights: (0..n * n).map(|i| ((i * 7 + k) as f32 * 0.001) as f64).collect(),
                mask: (0..n * n).map(|i| BinState::from_code((i % 3) as u8).unwrap()).collect(),
                frame: PatchFrame {
                    seed: Vec3::new(k as f64, 0.5, -0.25),
                    rotation: *r.matrix(),
                    quad_id: k,
                    offset_id: k % 5,
                },
                radius: 0.05,
                resolution: n,
            });
        }
        ds
    }

    #[test]
    fn size_arithmetic() {
        let ds = sample_dataset(3, 16);
        let mut buf = Vec::new();
        write_qpd(&mut buf, &ds).unwrap();
        assert_eq!(buf.len(), 20 + 3 * (8 + 96 + 4 * 256 + 256));
        assert_eq!(buf.len(), HEADER_BYTES + 3 * patch_bytes(16));
    }

    #[test]
    fn roundtrip_in_memory() {
        let ds = sample_dataset(4, 5);
        let mut buf = Vec::new();
        write_qpd(&mut buf, &ds).unwrap();
        assert_eq!(read_qpd(&mut buf.as_slice()).unwrap(), ds);
    }

    #[test]
    fn bad_magic_and_truncation() {
        let ds = sample_dataset(2, 4);
        let mut buf = Vec::new();
        write_qpd(&mut buf, &ds).unwrap();
        let mut bad = buf.clone();
        bad[..4].copy_from_slice(b"XXXX");
        assert!(matches!(read_qpd(&mut bad.as_slice()), Err(PatchError::BadMagic(m)) if &m == b"XXXX"));
        let cut = &buf[..buf.len() - 3];
        assert!(matches!(read_qpd(&mut &cut[..]), Err(PatchError::Truncated(_))));
        assert!(matches!(read_qpd(&mut &buf[..10]), Err(PatchError::Truncated(_))));
    }

    #[test]
    fn mismatched_patch_is_rejected() {
        let mut ds = sample_dataset(2, 4);
        ds.patches[1].radius = 0.06;
        let mut buf = Vec::new();
        assert!(matches!(write_qpd(&mut buf, &ds), Err(PatchError::ParameterMismatch { .. })));
    }

    #[test]
    fn file_roundtrip_with_sidecar() {
        let mut ds = sample_dataset(3, 4);
        ds.conn = Some(ConnMap {
            entries: vec![vec![(0, 3), (2, 15)], vec![], vec![(1, 0)], vec![]],
            faces: vec![[0, 1, 2], [0, 2, 3]],
        });
        ds.provenance.source = "unit".into();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.qpd");
        write_dataset(&p, &ds).unwrap();
        assert!(sidecar_path(&p).exists());
        assert_eq!(read_dataset(&p).unwrap(), ds);
        let json: serde_json::Value = serde_json::from_slice(&std::fs::read(sidecar_path(&p)).unwrap()).unwrap();
        assert_eq!(json["conn"]["0"], serde_json::json!([[0, 3], [2, 15]]));
        assert_eq!(json["conn"]["1"], serde_json::json!([]));
    }
}
