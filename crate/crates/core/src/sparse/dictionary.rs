use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::SparseError;

const MAGIC: &[u8; 4] = b"QDL1";

/// Training provenance stored with a dictionary.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct DictMeta {
    pub sources: Vec<String>,
    pub sparsity: usize,
    pub iterations: usize,
    pub seed: u64,
    pub resolution: Option<usize>,
    pub radius: Option<f64>,
    /// Training objective after each iteration.
    pub objective: Vec<f64>,
    pub masked_training: bool,
}

/// `m × p` matrix of unit-norm atoms (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    atoms: DMatrix<f64>,
    pub meta: DictMeta,
}

impl Dictionary {
    /// Checks that every column is finite and unit norm within 1e-9.
    pub fn new(atoms: DMatrix<f64>, meta: DictMeta) -> Result<Self, SparseError> {
        if atoms.iter().any(|v| !v.is_finite()) {
            return Err(SparseError::NonFinite);
        }
        for (j, c) in atoms.column_iter().enumerate() {
            if (c.norm() - 1.0).abs() > 1e-9 {
                return Err(SparseError::NotUnitNorm(j));
            }
        }
        Ok(Self { atoms, meta })
    }

    /// Normalizes every column; zero columns are rejected.
    pub fn from_columns(mut atoms: DMatrix<f64>, meta: DictMeta) -> Result<Self, SparseError> {
        for (j, mut c) in atoms.column_iter_mut().enumerate() {
            let n = c.norm();
            if !(n > 0.0) || !n.is_finite() {
                return Err(SparseError::NotUnitNorm(j));
            }
            c /= n;
        }
        Self::new(atoms, meta)
    }

    pub fn atoms(&self) -> &DMatrix<f64> {
        &self.atoms
    }

    /// Signal length.
    pub fn m(&self) -> usize {
        self.atoms.nrows()
    }

    /// Atom count.
    pub fn p(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn check_dim(&self, m: usize) -> Result<(), SparseError> {
        if m != self.m() {
            return Err(SparseError::DimensionMismatch {
                expected: self.m(),
                found: m,
            });
        }
        Ok(())
    }

    pub(crate) fn atoms_mut(&mut self) -> &mut DMatrix<f64> {
        &mut self.atoms
    }
}

pub fn write_dict(w: &mut impl Write, d: &Dictionary) -> Result<(), SparseError> {
    let meta = serde_json::to_vec(&d.meta)?;
    w.write_all(MAGIC)?;
    w.write_all(&(d.m() as u32).to_le_bytes())?;
    w.write_all(&(d.p() as u32).to_le_bytes())?;
    // nalgebra storage is column-major already.
    let mut buf = Vec::with_capacity(8 * d.m() * d.p());
    for v in d.atoms.as_slice() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    w.write_all(&(meta.len() as u32).to_le_bytes())?;
    w.write_all(&meta)?;
    Ok(())
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<(), SparseError> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => SparseError::Truncated(what.to_string()),
        _ => SparseError::Io(e),
    })
}

pub fn read_dict(r: &mut impl Read) -> Result<Dictionary, SparseError> {
    let mut head = [0u8; 12];
    read_exact(r, &mut head, "header")?;
    let magic: [u8; 4] = head[..4].try_into().unwrap();
    if &magic != MAGIC {
        return Err(SparseError::BadMagic(magic));
    }
    let m = u32::from_le_bytes(head[4..8].try_into().unwrap()) as usize;
    let p = u32::from_le_bytes(head[8..12].try_into().unwrap()) as usize;
    let mut data = vec![0u8; 8 * m * p];
    read_exact(r, &mut data, "atoms")?;
    let vals: Vec<f64> = data
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let mut len = [0u8; 4];
    read_exact(r, &mut len, "metadata length")?;
    let mut meta = vec![0u8; u32::from_le_bytes(len) as usize];
    read_exact(r, &mut meta, "metadata")?;
    let meta: DictMeta = serde_json::from_slice(&meta)?;
    Dictionary::new(DMatrix::from_vec(m, p, vals), meta)
}

pub fn save_dict(path: impl AsRef<Path>, d: &Dictionary) -> Result<(), SparseError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_dict(&mut w, d)?;
    w.flush()?;
    Ok(())
}

pub fn load_dict(path: impl AsRef<Path>) -> Result<Dictionary, SparseError> {
    read_dict(&mut BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_dict(m: usize, p: usize) -> Dictionary {
        let a = DMatrix::from_fn(m, p, |i, j| ((i * 31 + j * 17) as f64 * 0.7).sin());
        Dictionary::from_columns(a, DictMeta::default()).unwrap()
    }

    #[test]
    fn roundtrip_is_exact() {
        let mut d = random_dict(9, 4);
        d.meta.sources = vec!["a".into()];
        d.meta.objective = vec![1.5, 0.25];
        let mut buf = Vec::new();
        write_dict(&mut buf, &d).unwrap();
        assert_eq!(read_dict(&mut buf.as_slice()).unwrap(), d);
    }

    #[test]
    fn file_size_arithmetic() {
        let d = random_dict(576, 100);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.qdl");
        save_dict(&p, &d).unwrap();
        let meta_len = serde_json::to_vec(&d.meta).unwrap().len() as u64;
        assert_eq!(std::fs::metadata(&p).unwrap().len(), 16 + 100 * 576 * 8 + meta_len);
        assert_eq!(load_dict(&p).unwrap(), d);
    }

    #[test]
    fn bad_magic_and_shape_check() {
        let d = random_dict(4, 2);
        let mut buf = Vec::new();
        write_dict(&mut buf, &d).unwrap();
        buf[0] = b'X';
        assert!(matches!(read_dict(&mut buf.as_slice()), Err(SparseError::BadMagic(_))));
        assert!(matches!(d.check_dim(256), Err(SparseError::DimensionMismatch { expected: 4, found: 256 })));
    }

    #[test]
    fn non_unit_columns_rejected() {
        let a = DMatrix::from_element(3, 2, 1.0);
        assert!(matches!(Dictionary::new(a, DictMeta::default()), Err(SparseError::NotUnitNorm(0))));
        let z = DMatrix::zeros(3, 2);
        assert!(Dictionary::from_columns(z, DictMeta::default()).is_err());
    }
}
