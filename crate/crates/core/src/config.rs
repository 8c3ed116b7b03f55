//! Benchmark configuration and the scene manifest format.
//!
//! Configs are declarative TOML files. Unknown keys are rejected, every
//! parameter is range-checked with the offending key named, and length
//! parameters can be given either in multiples of the model resolution
//! (`units = "pr"`, the default) or as absolute distances
//! (`units = "abs"`). The NNSR threshold is a descriptor-distance ratio
//! and is never rescaled.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synthesis::SceneSpec;

/// Interpretation of length-valued parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    #[default]
    Pr,
    Abs,
}

/// What |C_GT|, the recall denominator, is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RecallUniverse {
    /// Correct members of the raw matched set (the default): recall says
    /// how many of the available correct matches the grouping retained.
    #[default]
    Matches,
    /// Every (model keypoint, scene keypoint) pair within tolerance, for
    /// sensitivity analysis.
    KeypointPairs,
}

/// The five grouping strategies the benchmark can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Nnsr,
    Ransac,
    Gc,
    Hough,
    Mlesac,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Nnsr,
        Algorithm::Ransac,
        Algorithm::Gc,
        Algorithm::Hough,
        Algorithm::Mlesac,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Nnsr => "nnsr",
            Algorithm::Ransac => "ransac",
            Algorithm::Gc => "gc",
            Algorithm::Hough => "hough",
            Algorithm::Mlesac => "mlesac",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "nnsr" => Ok(Algorithm::Nnsr),
            "ransac" => Ok(Algorithm::Ransac),
            "gc" => Ok(Algorithm::Gc),
            "hough" => Ok(Algorithm::Hough),
            "mlesac" => Ok(Algorithm::Mlesac),
            other => Err(Error::Config(format!(
                "unknown algorithm `{other}` (expected nnsr, ransac, gc, hough or mlesac)"
            ))),
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Where the benchmark scenes come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum SceneSource {
    /// The 10 × 8 noise/downsampling grid, seeded from `base_seed`.
    #[default]
    Suite,
    /// Explicit scene specs applied to every model.
    Specs { specs: Vec<SceneSpec> },
    /// Pre-generated scene files listed in a manifest (single model).
    Files { manifest: PathBuf },
}

/// Keypoint detection settings (lengths in `units`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectionConfig {
    pub salient_fraction: f64,
    pub nms_radius: f64,
    pub support_radius: f64,
    pub gamma21: f64,
    pub gamma32: f64,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            salient_fraction: 0.03,
            nms_radius: 4.0,
            support_radius: 6.0,
            gamma21: 0.975,
            gamma32: 0.975,
        }
    }
}

/// Descriptor settings (radius in `units`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DescriptionConfig {
    pub radius: f64,
    pub dim: usize,
}

impl Default for DescriptionConfig {
    fn default() -> Self {
        Self { radius: 8.0, dim: 128 }
    }
}

/// Per-algorithm parameters. Lengths are in `units`; `t_nnsr` is a
/// unitless ratio; `nu = 0` selects the scene bounding-box diagonal
/// automatically.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlgorithmParams {
    pub t_nnsr: f64,
    pub t_ransac: f64,
    #[serde(rename = "N_ran")]
    pub n_ran: i64,
    #[serde(rename = "t_GC")]
    pub t_gc: f64,
    pub t_mlesac: f64,
    #[serde(rename = "N_mlesac")]
    pub n_mlesac: i64,
    pub sigma: f64,
    pub nu: f64,
    pub bin_size: f64,
    pub mlesac_sample_size: i64,
    pub em_iterations: i64,
    pub mlesac_label_by_responsibility: bool,
}

impl Default for AlgorithmParams {
    fn default() -> Self {
        Self {
            t_nnsr: 0.8,
            t_ransac: 5.0,
            n_ran: 1000,
            t_gc: 5.0,
            t_mlesac: 5.0,
            n_mlesac: 1000,
            sigma: 1.0,
            nu: 0.0,
            bin_size: 4.0,
            mlesac_sample_size: 5,
            em_iterations: 5,
            mlesac_label_by_responsibility: false,
        }
    }
}

/// Full benchmark configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub models: Vec<PathBuf>,
    pub base_seed: u64,
    pub output: PathBuf,
    #[serde(default)]
    pub units: Units,
    /// Ground-truth correctness threshold t (in `units`).
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Worker threads; 0 means machine parallelism.
    #[serde(default)]
    pub workers: usize,
    #[serde(default = "all_algorithms")]
    pub algorithms: Vec<Algorithm>,
    #[serde(default)]
    pub recall_universe: RecallUniverse,
    #[serde(default)]
    pub scenes: SceneSource,
    #[serde(default)]
    pub detection: DetectionConfig,
    #[serde(default)]
    pub description: DescriptionConfig,
    #[serde(default)]
    pub params: AlgorithmParams,
}

fn default_tolerance() -> f64 {
    5.0
}

fn all_algorithms() -> Vec<Algorithm> {
    Algorithm::ALL.to_vec()
}

impl BenchmarkConfig {
    /// A config with every optional block at its defaults.
    pub fn with_defaults(models: Vec<PathBuf>, output: PathBuf, base_seed: u64) -> Self {
        Self {
            models,
            base_seed,
            output,
            units: Units::default(),
            tolerance: default_tolerance(),
            workers: 0,
            algorithms: all_algorithms(),
            recall_universe: RecallUniverse::default(),
            scenes: SceneSource::default(),
            detection: DetectionConfig::default(),
            description: DescriptionConfig::default(),
            params: AlgorithmParams::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: BenchmarkConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config = Self::from_toml(&text)?;
        config.validate_paths()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Range checks with the offending key named.
    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() {
            return Err(Error::invalid_parameter("models", "at least one model path"));
        }
        if self.algorithms.is_empty() {
            return Err(Error::invalid_parameter("algorithms", "at least one algorithm"));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::invalid_parameter("tolerance", "must be positive"));
        }

        let d = &self.detection;
        if !(d.salient_fraction > 0.0 && d.salient_fraction <= 1.0) {
            return Err(Error::invalid_parameter("detection.salient_fraction", "must be in (0, 1]"));
        }
        for (name, v) in [
            ("detection.nms_radius", d.nms_radius),
            ("detection.support_radius", d.support_radius),
            ("detection.gamma21", d.gamma21),
            ("detection.gamma32", d.gamma32),
            ("description.radius", self.description.radius),
        ] {
            if !(v > 0.0) {
                return Err(Error::invalid_parameter(name, "must be positive"));
            }
        }
        crate::features::HistogramLayout::for_dim(self.description.dim)?;

        let p = &self.params;
        for (name, v) in [
            ("t_nnsr", p.t_nnsr),
            ("t_ransac", p.t_ransac),
            ("t_GC", p.t_gc),
            ("t_mlesac", p.t_mlesac),
            ("sigma", p.sigma),
            ("bin_size", p.bin_size),
        ] {
            if !(v > 0.0) {
                return Err(Error::invalid_parameter(name, "must be positive"));
            }
        }
        if p.nu < 0.0 {
            return Err(Error::invalid_parameter("nu", "must be ≥ 0 (0 = auto)"));
        }
        for (name, v) in [
            ("N_ran", p.n_ran),
            ("N_mlesac", p.n_mlesac),
            ("em_iterations", p.em_iterations),
        ] {
            if v <= 0 {
                return Err(Error::invalid_parameter(name, "must be a positive integer"));
            }
        }
        if p.mlesac_sample_size < 3 {
            return Err(Error::invalid_parameter("mlesac_sample_size", "must be ≥ 3"));
        }

        if let SceneSource::Specs { specs } = &self.scenes {
            if specs.is_empty() {
                return Err(Error::invalid_parameter("scenes.specs", "at least one spec"));
            }
            for spec in specs {
                spec.validate()?;
            }
        }
        if matches!(self.scenes, SceneSource::Files { .. }) && self.models.len() != 1 {
            return Err(Error::invalid_parameter(
                "scenes",
                "file-based scenes support exactly one model",
            ));
        }

        Ok(())
    }

    /// Existence checks for every referenced path.
    pub fn validate_paths(&self) -> Result<()> {
        for model in &self.models {
            if !model.exists() {
                return Err(Error::Config(format!(
                    "model path does not exist: {}",
                    model.display()
                )));
            }
        }
        if let SceneSource::Files { manifest } = &self.scenes {
            if !manifest.exists() {
                return Err(Error::Config(format!(
                    "manifest does not exist: {}",
                    manifest.display()
                )));
            }
        }
        Ok(())
    }
}

/// Manifest describing a set of generated scenes, written by `synth` and
/// consumed by the file-based scene source. Rotations are row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneManifest {
    pub version: u32,
    pub model: String,
    pub base_seed: u64,
    pub scenes: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub file: String,
    pub noise_sigma: f64,
    pub keep_ratio: f64,
    pub rotation_seed: Option<u64>,
    pub rng_seed: u64,
    /// Row-major 3 × 3 ground-truth rotation.
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
    /// Present when generation failed; the scene file is then absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ManifestEntry {
    pub fn ground_truth(&self) -> Result<crate::geometry::RigidTransform> {
        let r = nalgebra::Matrix3::from_row_slice(&self.rotation);
        crate::geometry::RigidTransform::new(r, nalgebra::Vector3::from(self.translation))
    }
}

impl SceneManifest {
    pub const VERSION: u32 = 1;

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let manifest: SceneManifest =
            toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
        if manifest.version != Self::VERSION {
            return Err(Error::Config(format!(
                "manifest version {} unsupported (expected {})",
                manifest.version,
                Self::VERSION
            )));
        }
        Ok(manifest)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = toml::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}
