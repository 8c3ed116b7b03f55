// `!(v > 0.0)` guards reject NaN, which `v <= 0.0` would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Correspondence grouping for 3D point clouds.
//!
//! Five grouping strategies over feature matches between a model and a
//! scene cloud — nearest-neighbor similarity ratio, RANSAC, geometric
//! consistency clustering, 3D Hough voting and MLESAC — plus the synthetic
//! scene generator and precision/recall harness used to benchmark them.

pub mod config;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod geometry;
pub mod grouping;
pub mod pipeline;
pub mod seed;
pub mod shapes;
pub mod synthesis;

pub use config::{Algorithm, BenchmarkConfig, SceneManifest, SceneSource, Units};
pub use error::{Error, Result};
pub use evaluation::{
    determinism_hash, ground_truth_set, is_correct, keypoint_pair_universe, precision_recall,
    run_benchmark, write_csv, EvaluationRow, GroundTruth, PrecisionRecall,
};
pub use features::{
    describe, detect_iss, match_nnsr, Correspondence, CorrespondenceSet, Descriptor, FeatureCloud,
    HistogramLayout, IssParams, Keypoint, Provenance,
};
pub use geometry::{
    apply_transform, compute_resolution, estimate_rigid_transform, load_ply, save_ply, Point3,
    PointCloud, RigidTransform, SpatialIndex,
};
pub use grouping::{
    compute_lrf, gc_group, hough_group, mlesac_group, ransac_group, GroupingResult,
    LocalReferenceFrame, MlesacParams,
};
pub use synthesis::{
    generate_scene, make_benchmark_suite, synth_correspondences, SceneSpec, SyntheticScene,
};
