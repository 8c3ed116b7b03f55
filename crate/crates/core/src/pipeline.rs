//! The detect → describe → match → group pipeline shared by the CLI and
//! the benchmark harness.
//!
//! Length parameters are resolved once against the *model's* resolution:
//! descriptors are only comparable between clouds when both are computed
//! over the same absolute support radii, and scene resolution drifts with
//! downsampling.

use std::time::{Duration, Instant};

use crate::config::{Algorithm, AlgorithmParams, BenchmarkConfig, Units};
use crate::error::{Error, Result};
use crate::features::{describe, detect_iss, match_nnsr, FeatureCloud, HistogramLayout, IssParams};
use crate::geometry::{compute_resolution, PointCloud, SpatialIndex};
use crate::grouping::{
    compute_lrf_indexed, gc_group, hough_group, mlesac_group, ransac_group, GroupingResult, LrfMap,
    MlesacParams,
};

/// Feature-extraction settings with all lengths absolute.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractionParams {
    pub iss: IssParams,
    pub descriptor_radius: f64,
    pub layout: HistogramLayout,
}

/// Grouping thresholds with all lengths absolute; `nu = None` selects the
/// scene bounding-box diagonal per scene.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupingParams {
    pub t_nnsr: f64,
    pub t_ransac: f64,
    pub n_ran: usize,
    pub t_gc: f64,
    pub t_mlesac: f64,
    pub n_mlesac: usize,
    pub sigma: f64,
    pub nu: Option<f64>,
    pub bin_size: f64,
    pub mlesac_sample_size: usize,
    pub em_iterations: usize,
    pub mlesac_label_by_responsibility: bool,
}

/// All pipeline settings resolved to absolute units for one model.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedParams {
    pub extraction: ExtractionParams,
    pub grouping: GroupingParams,
    /// Ground-truth correctness threshold t, absolute.
    pub tolerance: f64,
    /// The model resolution the values were resolved against.
    pub model_pr: f64,
}

/// Resolves a benchmark config against a model cloud, applying the
/// `pr`-relative scaling when requested. `t_nnsr` is a unitless ratio and
/// is never scaled.
pub fn resolve_params(config: &BenchmarkConfig, model: &PointCloud) -> Result<ResolvedParams> {
    let pr = compute_resolution(model)?;
    let scale = match config.units {
        Units::Pr => pr,
        Units::Abs => 1.0,
    };
    let p: &AlgorithmParams = &config.params;
    Ok(ResolvedParams {
        extraction: ExtractionParams {
            iss: IssParams {
                salient_fraction: config.detection.salient_fraction,
                nms_radius: config.detection.nms_radius * scale,
                support_radius: config.detection.support_radius * scale,
                gamma21: config.detection.gamma21,
                gamma32: config.detection.gamma32,
            },
            descriptor_radius: config.description.radius * scale,
            layout: HistogramLayout::for_dim(config.description.dim)?,
        },
        grouping: GroupingParams {
            t_nnsr: p.t_nnsr,
            t_ransac: p.t_ransac * scale,
            n_ran: p.n_ran as usize,
            t_gc: p.t_gc * scale,
            t_mlesac: p.t_mlesac * scale,
            n_mlesac: p.n_mlesac as usize,
            sigma: p.sigma * scale,
            nu: if p.nu > 0.0 { Some(p.nu * scale) } else { None },
            bin_size: p.bin_size * scale,
            mlesac_sample_size: p.mlesac_sample_size as usize,
            em_iterations: p.em_iterations as usize,
            mlesac_label_by_responsibility: p.mlesac_label_by_responsibility,
        },
        tolerance: config.tolerance * scale,
        model_pr: pr,
    })
}

/// Detected keypoints, their descriptors and their reference frames for
/// one cloud. Keypoints without a usable frame (zero descriptors) are
/// dropped up front so every downstream consumer sees the same set.
#[derive(Debug, Clone)]
pub struct CloudFeatures {
    pub features: FeatureCloud,
    pub lrfs: LrfMap,
    pub dropped_keypoints: usize,
}

/// Runs detection, description and LRF computation on one cloud.
pub fn extract_features(cloud: &PointCloud, params: &ExtractionParams) -> Result<CloudFeatures> {
    let keypoints = detect_iss(cloud, &params.iss)?;
    let mut features = describe(cloud, &keypoints, params.descriptor_radius, params.layout)?;
    let dropped = features.retain_nonzero();
    if dropped > 0 {
        log::debug!("dropped {dropped} keypoints with degenerate neighborhoods");
    }

    let index = SpatialIndex::build(cloud);
    let mut lrfs = LrfMap::new();
    for kp in features.keypoints() {
        // retained keypoints had a full-rank neighborhood at this radius
        let lrf = compute_lrf_indexed(cloud, &index, kp, params.descriptor_radius)?;
        lrfs.insert(kp.point_id, lrf);
    }

    Ok(CloudFeatures {
        features,
        lrfs,
        dropped_keypoints: dropped,
    })
}

/// The raw match set between two feature clouds plus the matching wall
/// time (the cost reported for the NNSR baseline).
pub struct MatchOutcome {
    pub correspondences: crate::features::CorrespondenceSet,
    pub match_time: Duration,
}

pub fn match_features(
    model: &CloudFeatures,
    scene: &CloudFeatures,
    t_nnsr: f64,
) -> Result<MatchOutcome> {
    let start = Instant::now();
    let correspondences = match_nnsr(&model.features, &scene.features, t_nnsr)?;
    Ok(MatchOutcome {
        correspondences,
        match_time: start.elapsed(),
    })
}

/// Dispatches one grouping algorithm over a matched pair.
#[allow(clippy::too_many_arguments)]
pub fn run_algorithm(
    algorithm: Algorithm,
    outcome: &MatchOutcome,
    model: &PointCloud,
    scene: &PointCloud,
    model_features: &CloudFeatures,
    scene_features: &CloudFeatures,
    params: &GroupingParams,
    seed: u64,
) -> Result<GroupingResult> {
    let c = &outcome.correspondences;
    match algorithm {
        Algorithm::Nnsr => {
            // The raw match set is its own inlier set; its cost is the
            // matching call.
            if c.is_empty() {
                return Err(Error::DegenerateInput("no correspondences".into()));
            }
            Ok(GroupingResult {
                inliers: c.clone(),
                transform: None,
                score: c.len() as f64,
                iterations_used: 0,
                wall_time: outcome.match_time,
            })
        }
        Algorithm::Ransac => ransac_group(c, params.t_ransac, params.n_ran, seed),
        Algorithm::Gc => gc_group(c, params.t_gc),
        Algorithm::Hough => hough_group(
            c,
            model,
            scene,
            &model_features.lrfs,
            &scene_features.lrfs,
            params.bin_size,
        ),
        Algorithm::Mlesac => {
            let nu = params.nu.unwrap_or_else(|| scene.bounding_box_diagonal());
            let mlesac = MlesacParams {
                sigma: params.sigma,
                nu,
                iterations: params.n_mlesac,
                sample_size: params.mlesac_sample_size,
                em_iterations: params.em_iterations,
                threshold: params.t_mlesac,
                label_by_responsibility: params.mlesac_label_by_responsibility,
            };
            mlesac_group(c, &mlesac, seed)
        }
    }
}
