//! Least-squares rigid alignment of paired point sets (orthogonal
//! Procrustes with reflection correction).

use nalgebra::{Matrix3, Vector3};

use super::{Point3, RigidTransform};
use crate::error::{Error, Result};

/// Returns the rigid transform minimizing `Σ ‖R·sᵢ + t − tᵢ‖²`.
///
/// Both slices must be the same length ≥ 3 and the source points must not
/// be collinear; a degenerate sample yields [`Error::DegenerateSample`] so
/// sampling callers can draw again. `det R = +1` is guaranteed.
pub fn estimate_rigid_transform(source: &[Point3], target: &[Point3]) -> Result<RigidTransform> {
    if source.len() != target.len() {
        return Err(Error::DegenerateInput(format!(
            "{} source points vs {} target points",
            source.len(),
            target.len()
        )));
    }
    if source.len() < 3 {
        return Err(Error::DegenerateInput(
            "rigid estimation needs at least 3 pairs".into(),
        ));
    }

    let n = source.len() as f64;
    let centroid_s: Vector3<f64> = source.iter().map(|p| p.coords).sum::<Vector3<f64>>() / n;
    let centroid_t: Vector3<f64> = target.iter().map(|p| p.coords).sum::<Vector3<f64>>() / n;

    // Cross-covariance H = Σ (tᵢ − t̄)(sᵢ − s̄)ᵀ, so R = proj_SO3(H).
    let mut h = Matrix3::zeros();
    for (s, t) in source.iter().zip(target) {
        let sc = s.coords - centroid_s;
        let tc = t.coords - centroid_t;
        h += tc * sc.transpose();
    }

    let svd = h.svd(true, true);
    let u = svd.u.expect("3x3 SVD always yields U");
    let vt = svd.v_t.expect("3x3 SVD always yields Vᵀ");

    // Collinear (or coincident) source points leave the rotation about the
    // line axis unconstrained: the second singular value vanishes.
    let sigma = svd.singular_values;
    if sigma[0] <= f64::EPSILON || sigma[1] <= 1e-9 * sigma[0] {
        return Err(Error::DegenerateSample);
    }

    let mut r = u * vt;
    if r.determinant() < 0.0 {
        let mut u = u;
        u.column_mut(2).neg_mut();
        r = u * vt;
    }

    let t = centroid_t - r * centroid_s;
    RigidTransform::new(r, t)
}
