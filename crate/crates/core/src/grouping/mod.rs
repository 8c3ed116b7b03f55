//! The correspondence-grouping algorithms: RANSAC, geometric consistency
//! clustering, 3D Hough voting and MLESAC. Each filters a raw
//! correspondence set down to the subset consistent with a single rigid
//! motion.

mod gc;
mod hough;
mod lrf;
mod mlesac;
mod ransac;

pub use gc::{compatibility_gap, gc_group};
pub use hough::{hough_group, replay_check, LrfMap};
pub use lrf::{compute_lrf, compute_lrf_indexed, LocalReferenceFrame};
pub use mlesac::{estimate_gamma_em, mlesac_group, negative_log_likelihood, MlesacParams, Nll};
pub use ransac::ransac_group;

use std::time::Duration;

use crate::features::CorrespondenceSet;
use crate::geometry::RigidTransform;

/// Output of one grouping run.
///
/// `score` is algorithm-specific: consensus size for RANSAC, cluster size
/// for geometric consistency, peak votes for Hough voting, and the
/// negative log-likelihood (lower is better) for MLESAC. `transform` is
/// present for the estimator-based algorithms only.
#[derive(Debug, Clone)]
pub struct GroupingResult {
    pub inliers: CorrespondenceSet,
    pub transform: Option<RigidTransform>,
    pub score: f64,
    pub iterations_used: usize,
    pub wall_time: Duration,
}

/// Residual of one correspondence under a transform:
/// `‖T(model_point) − scene_point‖`.
pub(crate) fn residual(t: &RigidTransform, c: &crate::features::Correspondence) -> f64 {
    (t.apply_point(&c.model_point) - c.scene_point).norm()
}
