//! Repeatable local reference frames from weighted neighborhood
//! covariance.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::features::Keypoint;
use crate::geometry::{PointCloud, SpatialIndex};

/// Relative eigenvalue floor below which a neighborhood counts as rank
/// deficient.
const RANK_TOL: f64 = 1e-9;

/// Orthonormal right-handed basis attached to a keypoint.
///
/// Rows of `basis` are the frame axes expressed in global coordinates, so
/// `basis * v` maps a global vector into the frame and `basisᵀ` maps back.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalReferenceFrame {
    basis: Matrix3<f64>,
    keypoint_id: usize,
}

impl LocalReferenceFrame {
    pub fn new(basis: Matrix3<f64>, keypoint_id: usize) -> Result<Self> {
        let gram = basis * basis.transpose() - Matrix3::identity();
        if gram.norm() > 1e-9 || (basis.determinant() - 1.0).abs() > 1e-9 {
            return Err(Error::DegenerateInput(
                "LRF basis is not a proper rotation".into(),
            ));
        }
        Ok(Self { basis, keypoint_id })
    }

    pub fn basis(&self) -> &Matrix3<f64> {
        &self.basis
    }

    pub fn keypoint_id(&self) -> usize {
        self.keypoint_id
    }

    /// Global → local.
    pub fn to_local(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.basis * v
    }

    /// Local → global.
    pub fn to_global(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.basis.transpose() * v
    }
}

/// Computes the LRF of `keypoint` from the radius-weighted covariance of
/// neighbor offsets (weight `radius − distance`). Axes are the covariance
/// eigenvectors ordered by descending eigenvalue; the first and third axis
/// signs point toward the majority of neighbor offsets and the second
/// closes a right-handed frame.
pub fn compute_lrf(
    cloud: &PointCloud,
    keypoint: &Keypoint,
    radius: f64,
) -> Result<LocalReferenceFrame> {
    let index = SpatialIndex::build(cloud);
    compute_lrf_indexed(cloud, &index, keypoint, radius)
}

/// [`compute_lrf`] against a prebuilt index; callers computing many frames
/// over one cloud use this to avoid rebuilding the tree.
pub fn compute_lrf_indexed(
    cloud: &PointCloud,
    index: &SpatialIndex<'_>,
    keypoint: &Keypoint,
    radius: f64,
) -> Result<LocalReferenceFrame> {
    if radius <= 0.0 {
        return Err(Error::invalid_parameter("radius", "must be positive"));
    }

    let center = keypoint.position;
    let offsets: Vec<Vector3<f64>> = index
        .radius_search(&center, radius)
        .into_iter()
        .filter(|&id| id != keypoint.point_id)
        .map(|id| cloud.point(id) - center)
        .collect();
    if offsets.len() < 2 {
        return Err(Error::DegenerateFrame);
    }

    let mut cov = Matrix3::zeros();
    let mut weight_sum = 0.0;
    for v in &offsets {
        let w = radius - v.norm();
        cov += w * v * v.transpose();
        weight_sum += w;
    }
    if weight_sum <= 0.0 {
        return Err(Error::DegenerateFrame);
    }
    cov /= weight_sum;

    let eigen = nalgebra::SymmetricEigen::new(cov);
    // Sort eigenpairs by descending eigenvalue.
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eigen.eigenvalues[b].total_cmp(&eigen.eigenvalues[a]));
    let lambda: Vec<f64> = order.iter().map(|&i| eigen.eigenvalues[i]).collect();
    if lambda[0] <= 0.0 || lambda[1] <= RANK_TOL * lambda[0] {
        return Err(Error::DegenerateFrame);
    }

    let mut x = eigen.eigenvectors.column(order[0]).normalize();
    let mut z = eigen.eigenvectors.column(order[2]).normalize();
    disambiguate_sign(&mut x, &offsets);
    disambiguate_sign(&mut z, &offsets);
    let y = z.cross(&x);

    let basis = Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
    LocalReferenceFrame::new(basis, keypoint.point_id)
}

/// Flips `axis` so it points toward the majority of the offset mass. The
/// net projection integrates the whole neighborhood, so it is far more
/// stable under noise than a point count; the count settles exact zeros.
fn disambiguate_sign(axis: &mut Vector3<f64>, offsets: &[Vector3<f64>]) {
    let mut pos = 0usize;
    let mut neg = 0usize;
    let mut net = 0.0;
    for v in offsets {
        let d = v.dot(axis);
        net += d;
        if d > 0.0 {
            pos += 1;
        } else if d < 0.0 {
            neg += 1;
        }
    }
    let flip = if net < 0.0 {
        true
    } else if net > 0.0 {
        false
    } else {
        pos < neg
    };
    if flip {
        *axis = -*axis;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{apply_transform, Point3, RigidTransform};
    use crate::shapes::{bumpy_sphere, planar_grid};

    fn keypoint(cloud: &PointCloud, id: usize) -> Keypoint {
        Keypoint {
            point_id: id,
            position: cloud.point(id),
            saliency: 0.0,
        }
    }

    #[test]
    fn basis_is_orthonormal_right_handed() {
        let cloud = bumpy_sphere(800, 3);
        let lrf = compute_lrf(&cloud, &keypoint(&cloud, 100), 0.3).unwrap();
        let b = lrf.basis();
        assert!((b * b.transpose() - Matrix3::identity()).norm() <= 1e-9);
        assert!((b.determinant() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn planar_neighborhood_third_axis_is_plane_normal() {
        let cloud = planar_grid(15, 15, 0.1);
        // off-center point so the sign disambiguation is decisive
        let lrf = compute_lrf(&cloud, &keypoint(&cloud, 16), 0.35).unwrap();
        let z = lrf.basis().row(2).transpose();
        assert!(z.z.abs() > 1.0 - 1e-9, "third axis {z:?} not ± plane normal");
    }

    #[test]
    fn frame_rotates_with_the_cloud() {
        let cloud = bumpy_sphere(800, 4);
        let radius = 0.3;
        let t = RigidTransform::random_rotation(9)
            .with_translation(nalgebra::Vector3::new(0.5, -1.0, 2.0));
        let moved = apply_transform(&t, &cloud);

        for id in [10, 250, 500] {
            let before = compute_lrf(&cloud, &keypoint(&cloud, id), radius).unwrap();
            let after = compute_lrf(&moved, &keypoint(&moved, id), radius).unwrap();
            // rows are axes, so a cloud rotation R sends B to B·Rᵀ
            let expected = before.basis() * t.rotation().transpose();
            assert!(
                (after.basis() - expected).norm() <= 1e-6,
                "id {id}: {:?} vs {:?}",
                after.basis(),
                expected
            );
        }
    }

    #[test]
    fn collinear_neighborhood_is_degenerate() {
        let pts: Vec<Point3> = (0..20).map(|i| Point3::new(i as f64 * 0.1, 0.0, 0.0)).collect();
        let cloud = PointCloud::new(pts).unwrap();
        let result = compute_lrf(&cloud, &keypoint(&cloud, 5), 0.5);
        assert!(matches!(result, Err(Error::DegenerateFrame)));
    }

    #[test]
    fn empty_neighborhood_is_degenerate() {
        let cloud = bumpy_sphere(50, 5);
        let result = compute_lrf(&cloud, &keypoint(&cloud, 0), 1e-9);
        assert!(matches!(result, Err(Error::DegenerateFrame)));
    }
}
