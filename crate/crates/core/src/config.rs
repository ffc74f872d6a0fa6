//! Run configuration shared by the command-line verbs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::frames::QuadMesh;
use crate::inpaint::{FillOptions, FrameSource, InpaintConfig};
use crate::sparse::KsvdOptions;
use crate::Error;

/// How a run obtains patch frames.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum FrameChoice {
    /// Built-in generator on a smoothed copy of the mesh.
    #[default]
    Generate,
    /// Quad mesh (OBJ) from an external quadrangulator.
    Import { path: PathBuf },
}

/// Hole-filling method.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Triangulation and fairing only.
    Baseline,
    /// Masked sparse coding against a dictionary.
    #[default]
    Dict,
    /// Built-in stand-in for a learned inpainter, over the QPD exchange.
    CnnStub,
    /// External inpainter command over the QPD exchange.
    CnnFile,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::Baseline => "baseline",
            Method::Dict => "dict",
            Method::CnnStub => "cnn-stub",
            Method::CnnFile => "cnn-file",
        }
    }
}

/// Every experiment knob in one place. Serialized field names are the
/// keys accepted by `--config` files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Patch radius `r`; absent means `quad_length / √2`.
    pub radius: Option<f64>,
    /// Bins per side `N`.
    pub resolution: usize,
    /// Coding sparsity `k`.
    pub sparsity: usize,
    /// Dictionary size `p`.
    pub atoms: usize,
    pub overlap: usize,
    pub quad_length: f64,
    /// KSVD iterations.
    pub iterations: usize,
    /// Seed for sampling, learning and damage.
    pub seed: u64,
    pub frame_seed: u64,
    /// Samples per unit area; absent means 4 per bin.
    pub density: Option<f64>,
    pub smooth_iterations: usize,
    pub max_hole_extent: Option<f64>,
    pub max_empty_disk_fraction: f64,
    pub max_z_range_fraction: f64,
    pub fill: FillOptions,
    pub frames: FrameChoice,
    pub method: Method,
    pub dictionary: Option<PathBuf>,
    /// Command line for `cnn-file`, with `{input}` and `{output}` placeholders.
    pub fill_command: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let ic = InpaintConfig::default();
        Self {
            radius: ic.radius,
            resolution: ic.resolution,
            sparsity: ic.sparsity,
            atoms: 100,
            overlap: ic.overlap,
            quad_length: ic.quad_length,
            iterations: 20,
            seed: 0,
            frame_seed: ic.frame_seed,
            density: ic.density,
            smooth_iterations: ic.smooth_iterations,
            max_hole_extent: ic.max_hole_extent,
            max_empty_disk_fraction: ic.max_empty_disk_fraction,
            max_z_range_fraction: ic.max_z_range_fraction,
            fill: ic.fill,
            frames: FrameChoice::Generate,
            method: Method::Dict,
            dictionary: None,
            fill_command: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Overwrites the fields named in a JSON object, leaving the rest.
    pub fn merge_json(&mut self, overrides: &serde_json::Value) -> Result<(), Error> {
        let serde_json::Value::Object(over) = overrides else {
            return Err(Error::Config("configuration must be a JSON object".into()));
        };
        let mut base = serde_json::to_value(&*self)?;
        let obj = base.as_object_mut().expect("RunConfig serializes to an object");
        for (k, v) in over {
            if !obj.contains_key(k) {
                return Err(Error::Config(format!("unknown configuration key `{k}`")));
            }
            obj.insert(k.clone(), v.clone());
        }
        *self = serde_json::from_value(base)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<(), Error> {
        let pos = [
            ("radius", self.radius.unwrap_or(1.0)),
            ("quad_length", self.quad_length),
            ("density", self.density.unwrap_or(1.0)),
            ("max_hole_extent", self.max_hole_extent.unwrap_or(1.0)),
            ("max_empty_disk_fraction", self.max_empty_disk_fraction),
            ("max_z_range_fraction", self.max_z_range_fraction),
        ];
        for (name, v) in pos {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        let counts = [("sparsity", self.sparsity), ("atoms", self.atoms)];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if self.resolution < 2 {
            return Err(Error::Config(format!("resolution must be at least 2, got {}", self.resolution)));
        }
        if self.method == Method::CnnFile && self.fill_command.is_none() {
            return Err(Error::Config("method cnn-file needs a fill command".into()));
        }
        Ok(())
    }

    /// Pipeline parameters; imported quads must be loaded by the caller.
    pub fn inpaint_config(&self, quads: Option<QuadMesh>) -> InpaintConfig {
        InpaintConfig {
            radius: self.radius,
            resolution: self.resolution,
            quad_length: self.quad_length,
            overlap: self.overlap,
            sparsity: self.sparsity,
            density: self.density,
            smooth_iterations: self.smooth_iterations,
            max_hole_extent: self.max_hole_extent,
            fill: self.fill,
            frame_seed: self.frame_seed,
            frame_jitter: 0.0,
            sample_seed: self.seed,
            max_empty_disk_fraction: self.max_empty_disk_fraction,
            max_z_range_fraction: self.max_z_range_fraction,
            frames: quads.map_or(FrameSource::Fallback, FrameSource::Quads),
        }
    }

    pub fn ksvd_options(&self) -> KsvdOptions {
        KsvdOptions::new(self.atoms, self.sparsity, self.iterations, self.seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_overrides_only_named_fields() {
        let mut c = RunConfig { atoms: 7, ..Default::default() };
        c.merge_json(&serde_json::json!({"resolution": 24, "method": "cnn-stub"})).unwrap();
        assert_eq!(c.resolution, 24);
        assert_eq!(c.method, Method::CnnStub);
        assert_eq!(c.atoms, 7);
        assert!(c.merge_json(&serde_json::json!({"bogus": 1})).is_err());
        assert!(c.merge_json(&serde_json::json!([1])).is_err());
    }

    #[test]
    fn roundtrips_through_json() {
        let c = RunConfig {
            frames: FrameChoice::Import { path: "q.obj".into() },
            radius: Some(0.02),
            ..Default::default()
        };
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn validation() {
        assert!(RunConfig::default().validate().is_ok());
        assert!(RunConfig { resolution: 1, ..Default::default() }.validate().is_err());
        assert!(RunConfig { quad_length: 0.0, ..Default::default() }.validate().is_err());
        assert!(RunConfig { method: Method::CnnFile, ..Default::default() }.validate().is_err());
        let ic = RunConfig::default().inpaint_config(None);
        assert!((ic.radius() - 0.03 / 2f64.sqrt()).abs() < 1e-15);
    }
}
