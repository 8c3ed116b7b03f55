//! Intrinsic-shape-signature keypoint detection.
//!
//! Saliency is the smallest eigenvalue of the distance-weighted covariance
//! of each point's support neighborhood; flat and elongated neighborhoods
//! are filtered by eigenvalue-ratio thresholds, survivors go through
//! non-maximum suppression and the best `salient_fraction` are kept.

use nalgebra::Matrix3;

use super::Keypoint;
use crate::error::{Error, Result};
use crate::geometry::{PointCloud, SpatialIndex};

/// Detection parameters; radii are absolute distances, conventionally
/// multiples of the cloud resolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IssParams {
    /// Cap on the keypoint count as a fraction of the cloud size.
    pub salient_fraction: f64,
    /// Non-maximum suppression radius.
    pub nms_radius: f64,
    /// Covariance support radius.
    pub support_radius: f64,
    /// Upper bound on λ2/λ1.
    pub gamma21: f64,
    /// Upper bound on λ3/λ2.
    pub gamma32: f64,
}

impl IssParams {
    /// Defaults in resolution units: 3% of points, NMS at 4·pr, support at
    /// 6·pr, both ratio gates at 0.975.
    pub fn for_resolution(pr: f64) -> Self {
        Self {
            salient_fraction: 0.03,
            nms_radius: 4.0 * pr,
            support_radius: 6.0 * pr,
            gamma21: 0.975,
            gamma32: 0.975,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.salient_fraction > 0.0 && self.salient_fraction <= 1.0) {
            return Err(Error::invalid_parameter("salient_fraction", "must be in (0, 1]"));
        }
        for (name, v) in [
            ("nms_radius", self.nms_radius),
            ("support_radius", self.support_radius),
            ("gamma21", self.gamma21),
            ("gamma32", self.gamma32),
        ] {
            if !(v > 0.0) {
                return Err(Error::invalid_parameter(name, "must be positive"));
            }
        }
        Ok(())
    }
}

/// Eigenvalues (descending) of the distance-weighted covariance of the
/// neighborhood of `cloud[point_id]`; `None` when fewer than 3 neighbors.
pub fn weighted_covariance_eigenvalues(
    cloud: &PointCloud,
    index: &SpatialIndex<'_>,
    point_id: usize,
    support_radius: f64,
) -> Option<[f64; 3]> {
    let center = cloud.point(point_id);
    let mut cov = Matrix3::zeros();
    let mut weight_sum = 0.0;
    let mut neighbors = 0usize;
    for id in index.radius_search(&center, support_radius) {
        if id == point_id {
            continue;
        }
        let v = cloud.point(id) - center;
        let w = support_radius - v.norm();
        cov += w * v * v.transpose();
        weight_sum += w;
        neighbors += 1;
    }
    if neighbors < 3 || weight_sum <= 0.0 {
        return None;
    }
    cov /= weight_sum;
    let mut lambda: [f64; 3] = nalgebra::SymmetricEigen::new(cov).eigenvalues.into();
    lambda.sort_by(|a, b| b.total_cmp(a));
    Some(lambda)
}

/// Detects ISS keypoints. Returns an empty vector (not an error) when no
/// candidate survives the gates.
pub fn detect_iss(cloud: &PointCloud, params: &IssParams) -> Result<Vec<Keypoint>> {
    params.validate()?;
    if cloud.len() < 10 {
        return Err(Error::DegenerateInput(format!(
            "ISS needs ≥ 10 points, got {}",
            cloud.len()
        )));
    }

    let index = SpatialIndex::build(cloud);

    // Saliency per candidate; rank-deficient neighborhoods (λ3 ≈ 0) are
    // never salient.
    let mut saliency = vec![f64::NEG_INFINITY; cloud.len()];
    let mut candidates = Vec::new();
    #[allow(clippy::needless_range_loop)]
    for id in 0..cloud.len() {
        let Some([l1, l2, l3]) = weighted_covariance_eigenvalues(cloud, &index, id, params.support_radius)
        else {
            continue;
        };
        if l1 <= 0.0 || l2 <= 0.0 || l3 <= 1e-9 * l1 {
            continue;
        }
        if l2 / l1 < params.gamma21 && l3 / l2 < params.gamma32 {
            saliency[id] = l3;
            candidates.push(id);
        }
    }

    // Non-maximum suppression among candidates; equal saliency keeps the
    // lower identifier.
    let mut survivors = Vec::new();
    for &id in &candidates {
        let s = saliency[id];
        let dominated = index
            .radius_search(&cloud.point(id), params.nms_radius)
            .into_iter()
            .any(|j| {
                j != id && (saliency[j] > s || (saliency[j] == s && j < id))
            });
        if !dominated {
            survivors.push(id);
        }
    }

    survivors.sort_by(|&a, &b| saliency[b].total_cmp(&saliency[a]).then_with(|| a.cmp(&b)));
    let cap = (params.salient_fraction * cloud.len() as f64).floor() as usize;
    survivors.truncate(cap);

    Ok(survivors
        .into_iter()
        .map(|id| Keypoint {
            point_id: id,
            position: cloud.point(id),
            saliency: saliency[id],
        })
        .collect())
}
