//! Ground-truth correctness judgment, precision/recall, and the benchmark
//! harness that sweeps models × scenes × algorithms into CSV rows.

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::config::{Algorithm, BenchmarkConfig, RecallUniverse, SceneSource, Units};
use crate::error::{Error, Result};
use crate::features::{Correspondence, CorrespondenceSet};
use crate::geometry::{load_ply, PointCloud, RigidTransform};
use crate::pipeline::{
    extract_features, match_features, resolve_params, run_algorithm, CloudFeatures,
    ResolvedParams,
};
use crate::seed::{derive_seed, derive_seed2};
use crate::synthesis::{generate_scene, make_benchmark_suite};

/// Ground-truth transform plus the correctness threshold t in multiples of
/// the model resolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruth {
    pub transform: RigidTransform,
    /// Threshold in multiples of `pr`.
    pub tolerance: f64,
    /// Model resolution the threshold is scaled by.
    pub pr: f64,
}

impl GroundTruth {
    pub fn new(transform: RigidTransform, tolerance: f64, pr: f64) -> Result<Self> {
        if !(tolerance > 0.0) {
            return Err(Error::invalid_parameter("tolerance", "must be positive"));
        }
        if !(pr > 0.0) {
            return Err(Error::invalid_parameter("pr", "must be positive"));
        }
        Ok(Self {
            transform,
            tolerance,
            pr,
        })
    }

    /// Threshold as an absolute distance.
    pub fn absolute_tolerance(&self) -> f64 {
        self.tolerance * self.pr
    }
}

/// A correspondence is correct when the ground-truth transform carries its
/// model point to within the threshold of its scene point.
pub fn is_correct(c: &Correspondence, gt: &GroundTruth) -> bool {
    (gt.transform.apply_point(&c.model_point) - c.scene_point).norm() <= gt.absolute_tolerance()
}

/// The subset of the raw matched set that is correct under the ground
/// truth; recall is measured against this set, so it reflects how many of
/// the available correct matches a grouping retained.
pub fn ground_truth_set(c: &CorrespondenceSet, gt: &GroundTruth) -> CorrespondenceSet {
    let ids: Vec<usize> = (0..c.len())
        .filter(|&i| is_correct(&c.items()[i], gt))
        .collect();
    c.select(&ids)
}

/// The alternative recall denominator: every (model keypoint, scene
/// keypoint) pair the ground truth carries within tolerance, whether or
/// not the matcher proposed it.
pub fn keypoint_pair_universe(
    model_keypoints: &[crate::features::Keypoint],
    scene_keypoints: &[crate::features::Keypoint],
    gt: &GroundTruth,
) -> usize {
    let tol = gt.absolute_tolerance();
    model_keypoints
        .iter()
        .map(|mk| {
            let target = gt.transform.apply_point(&mk.position);
            scene_keypoints
                .iter()
                .filter(|sk| (target - sk.position).norm() <= tol)
                .count()
        })
        .sum()
}

/// Precision/recall of an inlier set against the raw matches, with
/// explicit flags for the empty-denominator conventions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecisionRecall {
    pub precision: f64,
    pub recall: f64,
    pub n_correct: usize,
    pub n_ground_truth: usize,
    /// `|C_in| = 0`; precision reported as 0.
    pub empty_inliers: bool,
    /// `|C_GT| = 0`; recall reported as 0.
    pub empty_ground_truth: bool,
}

/// `precision = |C_cor| / |C_in|`, `recall = |C_cor| / |C_GT|`, both 0
/// (flagged) on empty denominators. `inliers` must be a subset of `raw`.
pub fn precision_recall(
    inliers: &CorrespondenceSet,
    raw: &CorrespondenceSet,
    gt: &GroundTruth,
) -> Result<PrecisionRecall> {
    if !inliers.is_subset_of(raw) {
        return Err(Error::ContractViolation(
            "inlier set is not a subset of the raw correspondence set".into(),
        ));
    }
    let n_correct = inliers.iter().filter(|c| is_correct(c, gt)).count();
    let n_gt = raw.iter().filter(|c| is_correct(c, gt)).count();
    let empty_inliers = inliers.is_empty();
    let empty_ground_truth = n_gt == 0;
    Ok(PrecisionRecall {
        precision: if empty_inliers {
            0.0
        } else {
            n_correct as f64 / inliers.len() as f64
        },
        recall: if empty_ground_truth {
            0.0
        } else {
            n_correct as f64 / n_gt as f64
        },
        n_correct,
        n_ground_truth: n_gt,
        empty_inliers,
        empty_ground_truth,
    })
}

/// One CSV row: a scene × algorithm cell, or an aggregate (mean per noise
/// level or per keep ratio) where the per-cell fields are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationRow {
    pub model: String,
    pub scene_noise: Option<f64>,
    pub scene_keep: Option<f64>,
    pub algorithm: String,
    pub params_hash: String,
    pub n_raw: Option<usize>,
    pub n_inlier: Option<usize>,
    pub n_correct: Option<usize>,
    pub n_gt: Option<usize>,
    pub precision: f64,
    pub recall: f64,
    pub wall_ms: Option<f64>,
    pub seed: Option<u64>,
    pub flags: Vec<String>,
}

pub const CSV_HEADER: &str =
    "model,scene_noise,scene_keep,algorithm,params_hash,n_raw,n_inlier,n_correct,n_gt,precision,recall,wall_ms,seed,flags";

fn fmt_opt_real(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

fn fmt_opt_count(v: Option<usize>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl EvaluationRow {
    /// The full CSV line, timing included.
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{:.6},{:.6},{},{},{}",
            self.model,
            fmt_opt_real(self.scene_noise),
            fmt_opt_real(self.scene_keep),
            self.algorithm,
            self.params_hash,
            fmt_opt_count(self.n_raw),
            fmt_opt_count(self.n_inlier),
            fmt_opt_count(self.n_correct),
            fmt_opt_count(self.n_gt),
            self.precision,
            self.recall,
            fmt_opt_real(self.wall_ms),
            self.seed.map(|s| s.to_string()).unwrap_or_default(),
            self.flags.join(";"),
        )
    }

    /// The CSV line with the timing column blanked; input to the
    /// determinism hash.
    pub fn to_csv_without_timing(&self) -> String {
        let mut fields: Vec<&str> = Vec::new();
        let line = self.to_csv();
        fields.extend(line.split(','));
        fields[11] = "";
        fields.join(",")
    }

    /// Parses one data line of the benchmark CSV.
    pub fn from_csv(line: &str) -> Result<Self> {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 14 {
            return Err(Error::Config(format!(
                "CSV row has {} fields, expected 14",
                fields.len()
            )));
        }
        let opt_f64 = |s: &str, name: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse()
                    .map(Some)
                    .map_err(|_| Error::Config(format!("bad {name} value `{s}`")))
            }
        };
        let opt_usize = |s: &str, name: &str| -> Result<Option<usize>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse()
                    .map(Some)
                    .map_err(|_| Error::Config(format!("bad {name} value `{s}`")))
            }
        };
        let req_f64 = |s: &str, name: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::Config(format!("bad {name} value `{s}`")))
        };
        Ok(Self {
            model: fields[0].to_string(),
            scene_noise: opt_f64(fields[1], "scene_noise")?,
            scene_keep: opt_f64(fields[2], "scene_keep")?,
            algorithm: fields[3].to_string(),
            params_hash: fields[4].to_string(),
            n_raw: opt_usize(fields[5], "n_raw")?,
            n_inlier: opt_usize(fields[6], "n_inlier")?,
            n_correct: opt_usize(fields[7], "n_correct")?,
            n_gt: opt_usize(fields[8], "n_gt")?,
            precision: req_f64(fields[9], "precision")?,
            recall: req_f64(fields[10], "recall")?,
            wall_ms: opt_f64(fields[11], "wall_ms")?,
            seed: if fields[12].is_empty() {
                None
            } else {
                Some(fields[12].parse().map_err(|_| {
                    Error::Config(format!("bad seed value `{}`", fields[12]))
                })?)
            },
            flags: if fields[13].is_empty() {
                Vec::new()
            } else {
                fields[13].split(';').map(str::to_string).collect()
            },
        })
    }

    /// True for per-noise / per-keep aggregate rows.
    pub fn is_aggregate(&self) -> bool {
        self.flags.iter().any(|f| f == "agg_noise" || f == "agg_keep")
    }
}

/// The benchmark CSV: comment lines, header, rows; UTF-8, LF.
pub fn write_csv(rows: &[EvaluationRow], comments: &[String]) -> String {
    let mut out = String::new();
    for comment in comments {
        out.push_str("# ");
        out.push_str(comment);
        out.push('\n');
    }
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_csv());
        out.push('\n');
    }
    out
}

/// SHA-256 over all rows with the timing column excluded; identical config
/// and seeds must reproduce it bit for bit, sequentially or in parallel.
pub fn determinism_hash(rows: &[EvaluationRow]) -> String {
    let mut hasher = Sha256::new();
    for row in rows {
        hasher.update(row.to_csv_without_timing().as_bytes());
        hasher.update(b"\n");
    }
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Short stable hash of the resolved parameter set, embedded per row so
/// results are self-describing.
fn params_hash(resolved: &ResolvedParams, tolerance: f64, units: Units) -> String {
    let text = format!("{resolved:?}|tol={tolerance}|units={units:?}");
    let digest = Sha256::digest(text.as_bytes());
    digest
        .iter()
        .take(6)
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// One scene ready for evaluation.
struct SceneCase {
    noise: f64,
    keep: f64,
    scene: Option<PointCloud>,
    ground_truth: RigidTransform,
    load_error: Option<String>,
}

fn scene_cases(config: &BenchmarkConfig, model_idx: usize, model: &PointCloud) -> Result<Vec<SceneCase>> {
    match &config.scenes {
        SceneSource::Suite => {
            let suite_seed = derive_seed(config.base_seed, model_idx as u64);
            Ok(make_benchmark_suite(model, suite_seed)?
                .into_iter()
                .map(|s| SceneCase {
                    noise: s.spec.noise_sigma,
                    keep: s.spec.downsample_keep_ratio,
                    scene: Some(s.scene),
                    ground_truth: s.ground_truth,
                    load_error: None,
                })
                .collect())
        }
        SceneSource::Specs { specs } => specs
            .iter()
            .map(|spec| {
                let s = generate_scene(model, spec)?;
                Ok(SceneCase {
                    noise: spec.noise_sigma,
                    keep: spec.downsample_keep_ratio,
                    scene: Some(s.scene),
                    ground_truth: s.ground_truth,
                    load_error: None,
                })
            })
            .collect(),
        SceneSource::Files { manifest } => {
            let dir = manifest.parent().map(|p| p.to_path_buf()).unwrap_or_default();
            let manifest = crate::config::SceneManifest::load(manifest)?;
            manifest
                .scenes
                .iter()
                .map(|entry| {
                    let ground_truth = entry.ground_truth()?;
                    let (scene, load_error) = if let Some(err) = &entry.error {
                        (None, Some(err.clone()))
                    } else {
                        match load_ply(dir.join(&entry.file)) {
                            Ok(cloud) => (Some(cloud), None),
                            Err(e) => (None, Some(e.to_string())),
                        }
                    };
                    Ok(SceneCase {
                        noise: entry.noise_sigma,
                        keep: entry.keep_ratio,
                        scene,
                        ground_truth,
                        load_error,
                    })
                })
                .collect()
        }
    }
}

fn short_error(e: &Error) -> String {
    let text = e.to_string();
    let head: String = text.chars().take(60).collect();
    format!("error:{}", head.replace([',', '\n'], " "))
}

/// Runs the full benchmark: every model × scene × algorithm cell, then
/// per-noise and per-keep aggregate rows. Cell failures become flagged
/// rows; the sweep continues.
pub fn run_benchmark(config: &BenchmarkConfig) -> Result<Vec<EvaluationRow>> {
    config.validate()?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_benchmark_inner(config))
}

fn run_benchmark_inner(config: &BenchmarkConfig) -> Result<Vec<EvaluationRow>> {
    let mut rows: Vec<EvaluationRow> = Vec::new();

    for (model_idx, model_path) in config.models.iter().enumerate() {
        let model_name = model_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| model_path.display().to_string());
        let model = load_ply(model_path)?;
        let resolved = resolve_params(config, &model)?;
        let hash = params_hash(&resolved, config.tolerance, config.units);
        let cases = scene_cases(config, model_idx, &model)?;

        let model_features = extract_features(&model, &resolved.extraction)?;

        let mut scene_rows: Vec<Vec<EvaluationRow>> = Vec::new();
        cases
            .par_iter()
            .enumerate()
            .map(|(scene_idx, case)| {
                evaluate_scene(
                    config,
                    &resolved,
                    &hash,
                    &model_name,
                    model_idx,
                    scene_idx,
                    &model,
                    &model_features,
                    case,
                )
            })
            .collect_into_vec(&mut scene_rows);

        let flat: Vec<EvaluationRow> = scene_rows.into_iter().flatten().collect();
        let aggregates = aggregate_rows(&model_name, &flat, &config.algorithms);
        rows.extend(flat);
        rows.extend(aggregates);
    }

    Ok(rows)
}

#[allow(clippy::too_many_arguments)]
fn evaluate_scene(
    config: &BenchmarkConfig,
    resolved: &ResolvedParams,
    hash: &str,
    model_name: &str,
    model_idx: usize,
    scene_idx: usize,
    model: &PointCloud,
    model_features: &CloudFeatures,
    case: &SceneCase,
) -> Vec<EvaluationRow> {
    let blank_row = |algorithm: Algorithm, message: String| EvaluationRow {
        model: model_name.to_string(),
        scene_noise: Some(case.noise),
        scene_keep: Some(case.keep),
        algorithm: algorithm.name().to_string(),
        params_hash: hash.to_string(),
        n_raw: None,
        n_inlier: None,
        n_correct: None,
        n_gt: None,
        precision: 0.0,
        recall: 0.0,
        wall_ms: None,
        seed: None,
        flags: vec![message.clone()],
    };

    if let Some(err) = &case.load_error {
        return config
            .algorithms
            .iter()
            .map(|&a| blank_row(a, format!("error:{}", err.replace([',', '\n'], " "))))
            .collect();
    }
    let scene = case.scene.as_ref().expect("scene present when no load error");

    // tolerance is resolved to absolute units; GroundTruth wants pr multiples
    let gt = GroundTruth::new(
        case.ground_truth,
        resolved.tolerance / resolved.model_pr,
        resolved.model_pr,
    )
    .expect("resolved tolerance is positive");

    let prepared = extract_features(scene, &resolved.extraction)
        .and_then(|sf| match_features(model_features, &sf, resolved.grouping.t_nnsr).map(|o| (sf, o)));
    let (scene_features, outcome) = match prepared {
        Ok(p) => p,
        Err(e) => {
            return config
                .algorithms
                .iter()
                .map(|&a| blank_row(a, short_error(&e)))
                .collect()
        }
    };

    let raw = &outcome.correspondences;
    let n_gt = match config.recall_universe {
        RecallUniverse::Matches => ground_truth_set(raw, &gt).len(),
        RecallUniverse::KeypointPairs => keypoint_pair_universe(
            model_features.features.keypoints(),
            scene_features.features.keypoints(),
            &gt,
        ),
    };

    config
        .algorithms
        .iter()
        .enumerate()
        .map(|(algo_idx, &algorithm)| {
            let seed = derive_seed2(
                config.base_seed,
                (model_idx as u64) << 32 | scene_idx as u64,
                algo_idx as u64,
            );
            let mut row = blank_row(algorithm, String::new());
            row.flags.clear();
            row.seed = Some(seed);
            row.n_raw = Some(raw.len());
            row.n_gt = Some(n_gt);

            match run_algorithm(
                algorithm,
                &outcome,
                model,
                scene,
                model_features,
                &scene_features,
                &resolved.grouping,
                seed,
            ) {
                Ok(result) => {
                    let pr = precision_recall(&result.inliers, raw, &gt)
                        .expect("grouping inliers come from the raw set");
                    row.n_inlier = Some(result.inliers.len());
                    row.n_correct = Some(pr.n_correct);
                    row.precision = pr.precision;
                    // recall against the configured universe; for the
                    // default matched-set universe this equals pr.recall
                    row.recall = if n_gt == 0 {
                        0.0
                    } else {
                        pr.n_correct as f64 / n_gt as f64
                    };
                    row.wall_ms = Some(result.wall_time.as_secs_f64() * 1e3);
                    if pr.empty_inliers {
                        row.flags.push("empty_inliers".into());
                    }
                    if n_gt == 0 {
                        row.flags.push("empty_gt".into());
                    }
                }
                Err(e) => row.flags.push(short_error(&e)),
            }
            row
        })
        .collect()
}

/// Mean precision/recall/time per noise level and per keep ratio, one row
/// per (algorithm, level); errored cells count with their reported zeros
/// so curves stay complete.
pub fn aggregate_rows(
    model_name: &str,
    scene_rows: &[EvaluationRow],
    algorithms: &[Algorithm],
) -> Vec<EvaluationRow> {
    let mut out = Vec::new();
    for &(axis, flag) in &[(true, "agg_noise"), (false, "agg_keep")] {
        let mut levels: Vec<f64> = scene_rows
            .iter()
            .filter_map(|r| if axis { r.scene_noise } else { r.scene_keep })
            .collect();
        levels.sort_by(|a, b| a.total_cmp(b));
        levels.dedup();
        for algorithm in algorithms {
            for &level in &levels {
                let members: Vec<&EvaluationRow> = scene_rows
                    .iter()
                    .filter(|r| {
                        r.algorithm == algorithm.name()
                            && (if axis { r.scene_noise } else { r.scene_keep }) == Some(level)
                    })
                    .collect();
                if members.is_empty() {
                    continue;
                }
                let n = members.len() as f64;
                let mean = |f: &dyn Fn(&EvaluationRow) -> f64| -> f64 {
                    members.iter().map(|r| f(r)).sum::<f64>() / n
                };
                out.push(EvaluationRow {
                    model: model_name.to_string(),
                    scene_noise: axis.then_some(level),
                    scene_keep: (!axis).then_some(level),
                    algorithm: algorithm.name().to_string(),
                    params_hash: String::new(),
                    n_raw: None,
                    n_inlier: None,
                    n_correct: None,
                    n_gt: None,
                    precision: mean(&|r| r.precision),
                    recall: mean(&|r| r.recall),
                    wall_ms: Some(mean(&|r| r.wall_ms.unwrap_or(0.0))),
                    seed: None,
                    flags: vec![flag.to_string()],
                });
            }
        }
    }
    out
}
