//! Nearest-neighbor similarity-ratio matching.

use super::{Correspondence, CorrespondenceSet, FeatureCloud, Provenance};
use crate::error::{Error, Result};

/// Matches every model descriptor against the scene by L2 distance and
/// keeps the pair when `‖f − f'₁‖ / ‖f − f'₂‖ ≤ t_nnsr`, storing the ratio
/// as the similarity score. One correspondence at most per model keypoint;
/// ties on distance resolve to the lower scene index.
pub fn match_nnsr(
    model_features: &FeatureCloud,
    scene_features: &FeatureCloud,
    t_nnsr: f64,
) -> Result<CorrespondenceSet> {
    if scene_features.len() < 2 {
        return Err(Error::InsufficientFeatures(scene_features.len()));
    }
    if !(t_nnsr > 0.0) {
        return Err(Error::invalid_parameter("t_nnsr", "must be positive"));
    }

    let mut items = Vec::new();
    for (mi, md) in model_features.descriptors().iter().enumerate() {
        let mut first: (f64, usize) = (f64::INFINITY, usize::MAX);
        let mut second: (f64, usize) = (f64::INFINITY, usize::MAX);
        for (si, sd) in scene_features.descriptors().iter().enumerate() {
            let d = md.l2_distance(sd);
            let entry = (d, si);
            if entry < first {
                second = first;
                first = entry;
            } else if entry < second {
                second = entry;
            }
        }
        // Two zero distances mean the nearest pair is indistinguishable
        // from the runner-up; that is a ratio of 1.
        let ratio = if second.0 > 0.0 { first.0 / second.0 } else { 1.0 };
        if ratio <= t_nnsr {
            let mk = model_features.keypoints()[mi];
            let sk = scene_features.keypoints()[first.1];
            items.push(Correspondence {
                model_id: mk.point_id,
                model_point: mk.position,
                scene_id: sk.point_id,
                scene_point: sk.position,
                similarity: ratio,
            });
        }
    }

    CorrespondenceSet::new(items, Provenance::Matched)
}
