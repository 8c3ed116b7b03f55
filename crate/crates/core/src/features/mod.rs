//! Keypoint detection, local descriptors and ratio-test matching: the
//! pipeline stage that turns two clouds into a raw correspondence set.

mod describe;
mod iss;
mod matching;
mod sidecar;

pub use describe::{describe, estimate_normals, HistogramLayout};
pub use iss::{detect_iss, IssParams};
pub use matching::match_nnsr;
pub use sidecar::{load_features, save_features};

use crate::error::{Error, Result};
use crate::geometry::Point3;

/// A detected interest point; `point_id` indexes the cloud it came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint {
    pub point_id: usize,
    pub position: Point3,
    pub saliency: f64,
}

/// Fixed-dimension local descriptor, compared by L2 distance.
#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor {
    pub keypoint_id: usize,
    pub values: Vec<f32>,
}

impl Descriptor {
    pub fn l2_distance(&self, other: &Descriptor) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| {
                let d = *a as f64 - *b as f64;
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }
}

/// Keypoints of one cloud with their descriptors, index-aligned.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureCloud {
    keypoints: Vec<Keypoint>,
    descriptors: Vec<Descriptor>,
    dim: usize,
}

impl FeatureCloud {
    pub fn new(keypoints: Vec<Keypoint>, descriptors: Vec<Descriptor>, dim: usize) -> Result<Self> {
        if keypoints.len() != descriptors.len() {
            return Err(Error::DegenerateInput(format!(
                "{} keypoints vs {} descriptors",
                keypoints.len(),
                descriptors.len()
            )));
        }
        if let Some(d) = descriptors.iter().find(|d| d.values.len() != dim) {
            return Err(Error::DegenerateInput(format!(
                "descriptor for keypoint {} has dimension {}, expected {dim}",
                d.keypoint_id,
                d.values.len()
            )));
        }
        if descriptors
            .iter()
            .any(|d| d.values.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::DegenerateInput("non-finite descriptor value".into()));
        }
        Ok(Self {
            keypoints,
            descriptors,
            dim,
        })
    }

    pub fn len(&self) -> usize {
        self.keypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keypoints.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn keypoints(&self) -> &[Keypoint] {
        &self.keypoints
    }

    pub fn descriptors(&self) -> &[Descriptor] {
        &self.descriptors
    }

    /// Drops keypoints whose descriptor is the zero vector (empty or
    /// rank-deficient neighborhoods yield those, and they carry no shape
    /// information to match on).
    pub fn retain_nonzero(&mut self) -> usize {
        let keep: Vec<bool> = self.descriptors.iter().map(|d| !d.is_zero()).collect();
        let dropped = keep.iter().filter(|k| !**k).count();
        let mut it = keep.iter();
        self.keypoints.retain(|_| *it.next().unwrap());
        let mut it = keep.iter();
        self.descriptors.retain(|_| *it.next().unwrap());
        dropped
    }
}

/// One putative match between a model keypoint and a scene keypoint.
///
/// `similarity` is the score the matcher assigned; for NNSR output it is
/// the nearest/second-nearest distance ratio, so lower means more
/// distinctive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub model_id: usize,
    pub model_point: Point3,
    pub scene_id: usize,
    pub scene_point: Point3,
    pub similarity: f64,
}

/// How a correspondence set was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Matched,
    Synthetic,
}

/// Ordered set of correspondences with unique (model, scene) id pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceSet {
    items: Vec<Correspondence>,
    provenance: Provenance,
}

impl CorrespondenceSet {
    pub fn new(items: Vec<Correspondence>, provenance: Provenance) -> Result<Self> {
        let mut seen = std::collections::HashSet::with_capacity(items.len());
        for c in &items {
            if !c.similarity.is_finite() || c.similarity < 0.0 {
                return Err(Error::DegenerateInput(format!(
                    "correspondence ({}, {}) has invalid similarity {}",
                    c.model_id, c.scene_id, c.similarity
                )));
            }
            if !seen.insert((c.model_id, c.scene_id)) {
                return Err(Error::DegenerateInput(format!(
                    "duplicate correspondence pair ({}, {})",
                    c.model_id, c.scene_id
                )));
            }
        }
        Ok(Self { items, provenance })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn items(&self) -> &[Correspondence] {
        &self.items
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Correspondence> {
        self.items.iter()
    }

    /// The (model_id, scene_id) pairs in order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.items.iter().map(|c| (c.model_id, c.scene_id)).collect()
    }

    /// True when every pair of `self` occurs in `other`.
    pub fn is_subset_of(&self, other: &CorrespondenceSet) -> bool {
        let pairs: std::collections::HashSet<_> =
            other.items.iter().map(|c| (c.model_id, c.scene_id)).collect();
        self.items
            .iter()
            .all(|c| pairs.contains(&(c.model_id, c.scene_id)))
    }

    /// New set with the items at `indices`, same provenance.
    pub fn select(&self, indices: &[usize]) -> CorrespondenceSet {
        CorrespondenceSet {
            items: indices.iter().map(|&i| self.items[i]).collect(),
            provenance: self.provenance,
        }
    }
}

impl<'a> IntoIterator for &'a CorrespondenceSet {
    type Item = &'a Correspondence;
    type IntoIter = std::slice::Iter<'a, Correspondence>;

    fn into_iter(self) -> Self::IntoIter {
        self.items.iter()
    }
}
