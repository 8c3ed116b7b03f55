//! Shared fixtures for the grouping benchmarks: a bumpy-torus model, a
//! seeded synthetic correspondence set, and a fully matched scene pair.

use corrgroup::config::BenchmarkConfig;
use corrgroup::features::CorrespondenceSet;
use corrgroup::geometry::{apply_transform, compute_resolution, PointCloud, RigidTransform};
use corrgroup::grouping::LrfMap;
use corrgroup::pipeline::{
    extract_features, match_features, resolve_params, CloudFeatures, GroupingParams,
};
use corrgroup::shapes::bumpy_torus;
use corrgroup::synthesis::synth_correspondences;

pub struct SyntheticFixture {
    pub model: PointCloud,
    pub pr: f64,
    pub set: CorrespondenceSet,
}

/// `n` synthetic correspondences at the given inlier ratio with noise
/// σ = 0.1·pr, over an 8000-point torus.
pub fn synthetic_fixture(n: usize, inlier_ratio: f64) -> SyntheticFixture {
    let model = bumpy_torus(8000, 7);
    let pr = compute_resolution(&model).expect("resolution");
    let t_gt = RigidTransform::random_rotation(3);
    let synth = synth_correspondences(&model, &t_gt, n, inlier_ratio, 0.1 * pr, 11)
        .expect("synthetic correspondences");
    SyntheticFixture {
        model,
        pr,
        set: synth.set,
    }
}

pub struct MatchedFixture {
    pub model: PointCloud,
    pub scene: PointCloud,
    pub pr: f64,
    pub set: CorrespondenceSet,
    pub model_lrfs: LrfMap,
    pub scene_lrfs: LrfMap,
    pub grouping: GroupingParams,
}

/// A model and a rotated scene run through the full feature pipeline.
pub fn matched_fixture() -> MatchedFixture {
    let model = bumpy_torus(8000, 7);
    let pr = compute_resolution(&model).expect("resolution");
    let config = BenchmarkConfig::with_defaults(
        vec!["unused.ply".into()],
        "unused.csv".into(),
        1,
    );
    let resolved = resolve_params(&config, &model).expect("resolve params");
    let scene = apply_transform(&RigidTransform::random_rotation(5), &model);

    let model_features: CloudFeatures =
        extract_features(&model, &resolved.extraction).expect("model features");
    let scene_features = extract_features(&scene, &resolved.extraction).expect("scene features");
    let outcome = match_features(&model_features, &scene_features, resolved.grouping.t_nnsr)
        .expect("matching");

    MatchedFixture {
        model,
        scene,
        pr,
        set: outcome.correspondences,
        model_lrfs: model_features.lrfs,
        scene_lrfs: scene_features.lrfs,
        grouping: resolved.grouping,
    }
}
