//! Rotation-invariant histogram descriptor.
//!
//! Neighbors inside the support radius are expressed in the keypoint's
//! local reference frame and binned by normalized radial distance,
//! elevation against the frame's third axis (the neighborhood normal) and
//! azimuth in the tangent plane; the counts are L2-normalized. Keypoints
//! with an empty or rank-deficient neighborhood get the zero vector.

use nalgebra::Vector3;

use super::{Descriptor, FeatureCloud, Keypoint};
use crate::error::{Error, Result};
use crate::geometry::{PointCloud, SpatialIndex};
use crate::grouping::compute_lrf_indexed;

/// Histogram bin layout; descriptor dimension is the product of the three
/// bin counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HistogramLayout {
    pub radial: usize,
    pub elevation: usize,
    pub azimuth: usize,
}

impl Default for HistogramLayout {
    /// 4 × 4 × 8 = 128.
    fn default() -> Self {
        Self {
            radial: 4,
            elevation: 4,
            azimuth: 8,
        }
    }
}

impl HistogramLayout {
    pub fn dim(&self) -> usize {
        self.radial * self.elevation * self.azimuth
    }

    /// Layout for a requested dimension; supported dimensions are the
    /// azimuth-8 family 8, 16, 32, 64, 128, 256.
    pub fn for_dim(dim: usize) -> Result<Self> {
        let (radial, elevation) = match dim {
            8 => (1, 1),
            16 => (1, 2),
            32 => (1, 4),
            64 => (2, 4),
            128 => (4, 4),
            256 => (8, 4),
            _ => {
                return Err(Error::invalid_parameter(
                    "dim",
                    format!("{dim} is not expressible as radial × elevation × 8 bins"),
                ))
            }
        };
        Ok(Self {
            radial,
            elevation,
            azimuth: 8,
        })
    }
}

/// Computes one descriptor per keypoint over neighborhoods of `radius`.
pub fn describe(
    cloud: &PointCloud,
    keypoints: &[Keypoint],
    radius: f64,
    layout: HistogramLayout,
) -> Result<FeatureCloud> {
    if radius <= 0.0 {
        return Err(Error::invalid_parameter("radius", "must be positive"));
    }
    if layout.dim() < 8 {
        return Err(Error::invalid_parameter("dim", "must be ≥ 8"));
    }

    let index = SpatialIndex::build(cloud);
    let dim = layout.dim();
    let mut descriptors = Vec::with_capacity(keypoints.len());
    for kp in keypoints {
        let values = match compute_lrf_indexed(cloud, &index, kp, radius) {
            Ok(lrf) => {
                let mut hist = vec![0.0f64; dim];
                for id in index.radius_search(&kp.position, radius) {
                    if id == kp.point_id {
                        continue;
                    }
                    let offset = cloud.point(id) - kp.position;
                    let d = offset.norm();
                    if d <= 0.0 {
                        continue;
                    }
                    let local = lrf.to_local(&offset);
                    hist[bin_index(&local, d, radius, layout)] += 1.0;
                }
                normalize(hist)
            }
            // Rank-deficient or empty neighborhood: no stable frame, no
            // shape signal.
            Err(Error::DegenerateFrame) => vec![0.0f32; dim],
            Err(e) => return Err(e),
        };
        descriptors.push(Descriptor {
            keypoint_id: kp.point_id,
            values,
        });
    }

    FeatureCloud::new(keypoints.to_vec(), descriptors, dim)
}

fn bin_index(local: &Vector3<f64>, d: f64, radius: f64, layout: HistogramLayout) -> usize {
    let clamp = |v: usize, n: usize| v.min(n - 1);
    let r_bin = clamp((d / radius * layout.radial as f64) as usize, layout.radial);
    // equal-area elevation bins over cos θ ∈ [−1, 1]
    let cos_elev = (local.z / d).clamp(-1.0, 1.0);
    let e_bin = clamp(
        ((cos_elev + 1.0) / 2.0 * layout.elevation as f64) as usize,
        layout.elevation,
    );
    let azimuth = local.y.atan2(local.x); // (−π, π]
    let frac = (azimuth + std::f64::consts::PI) / (2.0 * std::f64::consts::PI);
    let a_bin = clamp((frac * layout.azimuth as f64) as usize, layout.azimuth);
    (r_bin * layout.elevation + e_bin) * layout.azimuth + a_bin
}

fn normalize(hist: Vec<f64>) -> Vec<f32> {
    let norm = hist.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm <= 0.0 {
        return vec![0.0f32; hist.len()];
    }
    hist.into_iter().map(|v| (v / norm) as f32).collect()
}

/// Per-point normals from an unweighted plane fit over the radius
/// neighborhood, oriented away from the cloud centroid. Points with fewer
/// than two neighbors fall back to the outward radial direction.
pub fn estimate_normals(cloud: &PointCloud, radius: f64) -> Result<Vec<Vector3<f64>>> {
    if radius <= 0.0 {
        return Err(Error::invalid_parameter("radius", "must be positive"));
    }
    let index = SpatialIndex::build(cloud);
    let centroid = cloud.centroid();
    let mut normals = Vec::with_capacity(cloud.len());
    for (i, p) in cloud.points().iter().enumerate() {
        let neighbors: Vec<usize> = index
            .radius_search(p, radius)
            .into_iter()
            .filter(|&j| j != i)
            .collect();
        let outward = p - centroid;
        let mut normal = if neighbors.len() < 2 {
            outward
        } else {
            let mean: Vector3<f64> = neighbors
                .iter()
                .map(|&j| cloud.point(j) - p)
                .sum::<Vector3<f64>>()
                / neighbors.len() as f64;
            let mut cov = nalgebra::Matrix3::zeros();
            for &j in &neighbors {
                let v = (cloud.point(j) - p) - mean;
                cov += v * v.transpose();
            }
            let eigen = nalgebra::SymmetricEigen::new(cov);
            let mut smallest = 0;
            for k in 1..3 {
                if eigen.eigenvalues[k] < eigen.eigenvalues[smallest] {
                    smallest = k;
                }
            }
            eigen.eigenvectors.column(smallest).into_owned()
        };
        let norm = normal.norm();
        normal = if norm > 1e-12 {
            normal / norm
        } else {
            Vector3::z()
        };
        if normal.dot(&outward) < 0.0 {
            normal = -normal;
        }
        normals.push(normal);
    }
    Ok(normals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{apply_transform, Point3, RigidTransform};
    use crate::shapes::bumpy_sphere;

    fn keypoints_for(cloud: &PointCloud, ids: &[usize]) -> Vec<Keypoint> {
        ids.iter()
            .map(|&id| Keypoint {
                point_id: id,
                position: cloud.point(id),
                saliency: 1.0,
            })
            .collect()
    }

    #[test]
    fn empty_neighborhood_gets_zero_vector() {
        let mut pts: Vec<Point3> = bumpy_sphere(100, 1).points().to_vec();
        pts.push(Point3::new(50.0, 50.0, 50.0)); // isolated
        let cloud = PointCloud::new(pts).unwrap();
        let kps = keypoints_for(&cloud, &[cloud.len() - 1]);
        let features = describe(&cloud, &kps, 0.3, HistogramLayout::default()).unwrap();
        assert!(features.descriptors()[0].is_zero());
    }

    #[test]
    fn identical_geometry_gives_identical_descriptors() {
        let cloud = bumpy_sphere(600, 2);
        let kps = keypoints_for(&cloud, &[42, 42]);
        let features = describe(&cloud, &kps, 0.3, HistogramLayout::default()).unwrap();
        assert_eq!(features.descriptors()[0].values, features.descriptors()[1].values);
    }

    #[test]
    fn descriptor_is_rotation_invariant() {
        let cloud = bumpy_sphere(800, 3);
        let t = RigidTransform::random_rotation(31)
            .with_translation(nalgebra::Vector3::new(2.0, 0.5, -1.0));
        let moved = apply_transform(&t, &cloud);
        let ids = [7, 120, 400, 633];
        let layout = HistogramLayout::default();
        let a = describe(&cloud, &keypoints_for(&cloud, &ids), 0.3, layout).unwrap();
        let b = describe(&moved, &keypoints_for(&moved, &ids), 0.3, layout).unwrap();
        for (da, db) in a.descriptors().iter().zip(b.descriptors()) {
            let diff = da.l2_distance(db);
            assert!(diff <= 1e-6, "descriptor moved by {diff}");
        }
    }

    #[test]
    fn layout_dims_round_trip() {
        for dim in [8, 16, 32, 64, 128, 256] {
            assert_eq!(HistogramLayout::for_dim(dim).unwrap().dim(), dim);
        }
        assert!(HistogramLayout::for_dim(100).is_err());
    }

    #[test]
    fn normals_point_outward_on_sphere() {
        let cloud = bumpy_sphere(500, 4);
        let normals = estimate_normals(&cloud, 0.25).unwrap();
        let centroid = cloud.centroid();
        let outward_ok = cloud
            .points()
            .iter()
            .zip(&normals)
            .filter(|(p, n)| n.dot(&(*p - centroid)) > 0.0)
            .count();
        assert!(outward_ok >= cloud.len() * 95 / 100);
        for n in &normals {
            assert!((n.norm() - 1.0).abs() <= 1e-9);
        }
    }
}
