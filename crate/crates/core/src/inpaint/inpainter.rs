use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::process::Command;

use rayon::prelude::*;

use super::InpaintError;
use crate::patch::{
    denormalize_patches, fill_by_neighbour_mean, normalize_patches, normalize_patches_with, read_qpd, write_qpd, BinState, PatchDataset,
    NormRecord, PatchError,
};
use crate::sparse::{masked_omp_encode, Dictionary};

/// Fills the non-valid bins of patches.
///
/// Contract: the output has the same patch count, resolution and radius;
/// valid input bins keep their heights; in every patch with at least one
/// valid bin all bins come back valid.
pub trait PatchInpainter: Sync {
    /// Method tag for reports.
    fn method(&self) -> &str;
    fn fill(&self, ds: &PatchDataset) -> Result<PatchDataset, InpaintError>;
}

/// Masked sparse coding against a dictionary: `y` is fitted on the valid
/// bins and `D y` supplies the rest.
#[derive(Debug, Clone)]
pub struct DictionaryInpainter {
    pub dictionary: Dictionary,
    pub sparsity: usize,
    pub tag: String,
}

impl DictionaryInpainter {
    pub fn new(dictionary: Dictionary, sparsity: usize) -> Self {
        Self {
            dictionary,
            sparsity,
            tag: "dict".into(),
        }
    }
}

impl PatchInpainter for DictionaryInpainter {
    fn method(&self) -> &str {
        &self.tag
    }

    fn fill(&self, ds: &PatchDataset) -> Result<PatchDataset, InpaintError> {
        self.dictionary.check_dim(ds.dim())?;
        let heights: Vec<Option<Vec<f64>>> = ds
            .patches
            .par_iter()
            .map(|p| {
                let mask = p.observed();
                let obs = mask.iter().filter(|&&o| o).count();
                if obs == 0 || obs == mask.len() {
                    return Ok(None);
                }
                let code = masked_omp_encode(&p.heights, &mask, &self.dictionary, self.sparsity.min(obs))?;
                let full = code.expand(&self.dictionary);
                Ok(Some(
                    (0..mask.len()).map(|b| if mask[b] { p.heights[b] } else { full[b] }).collect(),
                ))
            })
            .collect::<Result<_, crate::sparse::SparseError>>()?;
        let mut out = ds.clone();
        for (p, h) in out.patches.iter_mut().zip(heights) {
            if let Some(h) = h {
                p.heights = h;
                p.mask.fill(BinState::Valid);
            }
        }
        Ok(out)
    }
}

/// Stand-in for a learned inpainter: valid bins are copied and the rest are
/// filled by repeated 3×3 means of known neighbours. A patch without valid
/// bins becomes all zeros.
pub fn stub_fill(ds: &PatchDataset) -> PatchDataset {
    let mut out = ds.clone();
    out.patches.par_iter_mut().for_each(|p| {
        p.heights = fill_by_neighbour_mean(&p.heights, &p.observed(), p.resolution);
        p.mask.fill(BinState::Valid);
    });
    out
}

/// [`stub_fill`] from one QPD file to another, as an external inpainter
/// would run.
pub fn stub_fill_file(input: impl AsRef<Path>, output: impl AsRef<Path>) -> Result<(), PatchError> {
    let ds = read_qpd(&mut BufReader::new(File::open(input)?))?;
    let mut w = BufWriter::new(File::create(output)?);
    write_qpd(&mut w, &stub_fill(&ds))?;
    w.flush()?;
    Ok(())
}

/// Round trip through the file contract: normalize, write QPD, let `run`
/// turn `in.qpd` into `out.qpd`, read back, check, denormalize. Valid bins
/// are restored from the input so the exchange cannot perturb them.
fn exchange(
    ds: &PatchDataset,
    run: impl FnOnce(&Path, &Path) -> Result<(), InpaintError>,
) -> Result<PatchDataset, InpaintError> {
    if ds.is_empty() {
        return Ok(ds.clone());
    }
    let (norm, rec) = match normalize_patches(ds) {
        // Flat data: any unit range will do.
        Err(PatchError::DegenerateRange(v)) => {
            let rec = NormRecord { min: v - 0.5, max: v + 0.5 };
            (normalize_patches_with(ds, &rec), rec)
        }
        r => r?,
    };
    let dir = tempfile::tempdir()?;
    let input = dir.path().join("in.qpd");
    let output = dir.path().join("out.qpd");
    {
        let mut w = BufWriter::new(File::create(&input)?);
        write_qpd(&mut w, &norm)?;
        w.flush()?;
    }
    rec.save(dir.path().join("in.norm.json"))?;
    run(&input, &output)?;
    let back = read_qpd(&mut BufReader::new(File::open(&output)?))?;
    if back.resolution != ds.resolution || back.radius != ds.radius || back.len() != ds.len() {
        return Err(InpaintError::Contract(format!(
            "header changed: N={} r={} count={} (sent N={} r={} count={})",
            back.resolution,
            back.radius,
            back.len(),
            ds.resolution,
            ds.radius,
            ds.len()
        )));
    }
    if let Some((i, _)) = back
        .patches
        .iter()
        .enumerate()
        .find(|(_, p)| p.mask.iter().any(|&s| s != BinState::Valid))
    {
        return Err(InpaintError::Contract(format!("patch {i} still has non-valid bins")));
    }
    let mut out = denormalize_patches(&back, &rec);
    for (o, orig) in out.patches.iter_mut().zip(&ds.patches) {
        o.frame = orig.frame;
        for b in 0..o.len() {
            if orig.mask[b] == BinState::Valid {
                o.heights[b] = orig.heights[b];
            }
        }
    }
    out.conn = ds.conn.clone();
    out.provenance = ds.provenance.clone();
    Ok(out)
}

/// The file-exchange path with the built-in stub on the other side.
#[derive(Debug, Clone, Copy, Default)]
pub struct StubInpainter;

impl PatchInpainter for StubInpainter {
    fn method(&self) -> &str {
        "cnn-stub"
    }

    fn fill(&self, ds: &PatchDataset) -> Result<PatchDataset, InpaintError> {
        exchange(ds, |i, o| Ok(stub_fill_file(i, o)?))
    }
}

/// Runs an external program on a QPD file. `{input}` and `{output}` in the
/// arguments are replaced by the file paths; the program must write a QPD
/// with the same header and every bin valid.
#[derive(Debug, Clone)]
pub struct ExternalInpainter {
    pub program: String,
    pub args: Vec<String>,
}

impl ExternalInpainter {
    /// Splits a command line on whitespace.
    pub fn from_command_line(cmd: &str) -> Result<Self, InpaintError> {
        let mut parts = cmd.split_whitespace().map(str::to_string);
        let program = parts
            .next()
            .ok_or_else(|| InpaintError::InvalidArgument("empty fill command".into()))?;
        Ok(Self {
            program,
            args: parts.collect(),
        })
    }
}

impl PatchInpainter for ExternalInpainter {
    fn method(&self) -> &str {
        "cnn"
    }

    fn fill(&self, ds: &PatchDataset) -> Result<PatchDataset, InpaintError> {
        exchange(ds, |input, output| {
            let subst = |a: &String| {
                a.replace("{input}", &input.to_string_lossy())
                    .replace("{output}", &output.to_string_lossy())
            };
            let status = Command::new(&self.program)
                .args(self.args.iter().map(subst))
                .status()
                .map_err(|e| InpaintError::External(format!("{}: {e}", self.program)))?;
            if !status.success() {
                return Err(InpaintError::External(format!("{} exited with {status}", self.program)));
            }
            if !output.exists() {
                return Err(InpaintError::External(format!("{} wrote no output", self.program)));
            }
            Ok(())
        })
    }
}
