//! Point-cloud representation, PLY I/O, spatial indexing, resolution
//! estimation and rigid-transform algebra.
//!
//! Coordinates are dimensionless model units; every threshold elsewhere in
//! the crate is expressed as a multiple of the cloud's resolution (`pr`,
//! the mean nearest-neighbor distance returned by [`compute_resolution`]).

mod kdtree;
mod ply;
mod procrustes;

pub use kdtree::SpatialIndex;
pub use ply::{load_ply, save_ply};
pub use procrustes::estimate_rigid_transform;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in 3D model space.
pub type Point3 = nalgebra::Point3<f64>;

/// Tolerance for the rotation-orthonormality invariant.
const ROTATION_TOL: f64 = 1e-9;
/// Tolerance for the unit-normal invariant.
const NORMAL_TOL: f64 = 1e-6;

/// An ordered set of 3D points with optional per-point unit normals.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Point3>,
    normals: Option<Vec<Vector3<f64>>>,
}

impl PointCloud {
    /// Builds a cloud from points, checking that every coordinate is finite.
    pub fn new(points: Vec<Point3>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::DegenerateInput("point cloud is empty".into()));
        }
        if let Some(i) = points.iter().position(|p| !p.coords.iter().all(|c| c.is_finite())) {
            return Err(Error::DegenerateInput(format!(
                "point {i} has a non-finite coordinate"
            )));
        }
        Ok(Self { points, normals: None })
    }

    /// Builds a cloud with normals; each normal must be unit length to 1e-6.
    pub fn with_normals(points: Vec<Point3>, normals: Vec<Vector3<f64>>) -> Result<Self> {
        let mut cloud = Self::new(points)?;
        if normals.len() != cloud.points.len() {
            return Err(Error::DegenerateInput(format!(
                "{} normals for {} points",
                normals.len(),
                cloud.points.len()
            )));
        }
        if let Some(i) = normals.iter().position(|n| (n.norm() - 1.0).abs() > NORMAL_TOL) {
            return Err(Error::DegenerateInput(format!("normal {i} is not unit length")));
        }
        cloud.normals = Some(normals);
        Ok(cloud)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn point(&self, id: usize) -> Point3 {
        self.points[id]
    }

    pub fn normals(&self) -> Option<&[Vector3<f64>]> {
        self.normals.as_deref()
    }

    /// Centroid of all points.
    pub fn centroid(&self) -> Point3 {
        let sum: Vector3<f64> = self.points.iter().map(|p| p.coords).sum();
        Point3::from(sum / self.points.len() as f64)
    }

    /// Axis-aligned bounding box as (min, max) corners.
    pub fn bounding_box(&self) -> (Point3, Point3) {
        let mut lo = self.points[0];
        let mut hi = self.points[0];
        for p in &self.points {
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        (lo, hi)
    }

    /// Length of the bounding-box diagonal.
    pub fn bounding_box_diagonal(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        (hi - lo).norm()
    }
}

/// A rotation plus translation; the only transform family used anywhere in
/// the crate. The rotation is kept orthonormal with determinant +1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl RigidTransform {
    /// Validates orthonormality (`‖RᵀR − I‖_F ≤ 1e-9`, `|det R − 1| ≤ 1e-9`).
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let gram = rotation.transpose() * rotation - Matrix3::identity();
        if gram.norm() > ROTATION_TOL {
            return Err(Error::DegenerateInput(format!(
                "rotation is not orthonormal (‖RᵀR − I‖ = {:.3e})",
                gram.norm()
            )));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > ROTATION_TOL {
            return Err(Error::DegenerateInput(format!(
                "rotation determinant {det} is not +1"
            )));
        }
        Ok(Self { rotation, translation })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Rotation about `axis` by `angle` radians, no translation.
    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64) -> Result<Self> {
        let axis = nalgebra::Unit::try_new(axis, 1e-12)
            .ok_or_else(|| Error::DegenerateInput("zero rotation axis".into()))?;
        let rotation = nalgebra::Rotation3::from_axis_angle(&axis, angle);
        Self::new(rotation.into_inner(), Vector3::zeros())
    }

    /// Rotation drawn uniformly from SO(3), seeded; no translation.
    ///
    /// Uses the unit-quaternion construction: four standard normals,
    /// normalized, which is exactly uniform over the rotation group.
    pub fn random_rotation(seed: u64) -> Self {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        let q = loop {
            let v: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
            let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2] + v[3] * v[3]).sqrt();
            if norm > 1e-6 {
                break nalgebra::Quaternion::new(v[0] / norm, v[1] / norm, v[2] / norm, v[3] / norm);
            }
        };
        let rot = nalgebra::UnitQuaternion::from_quaternion(q).to_rotation_matrix();
        // Re-orthonormalize so the constructor invariant holds exactly.
        let m = reorthonormalize(rot.into_inner());
        Self {
            rotation: m,
            translation: Vector3::zeros(),
        }
    }

    pub fn with_translation(mut self, translation: Vector3<f64>) -> Self {
        self.translation = translation;
        self
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// Applies the transform to a single point.
    pub fn apply_point(&self, p: &Point3) -> Point3 {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    /// Rotates a direction vector (no translation).
    pub fn apply_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: reorthonormalize(self.rotation * other.rotation),
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// Rotation angle (radians) of `self.inverse() ∘ other`; 0 iff the
    /// rotations agree.
    pub fn rotation_angle_to(&self, other: &RigidTransform) -> f64 {
        let rel = self.rotation.transpose() * other.rotation;
        let cos = ((rel.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
        cos.acos()
    }
}

/// Projects a near-rotation back onto SO(3) via SVD so compounded error
/// never violates the orthonormality invariant.
fn reorthonormalize(m: Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("3x3 SVD always yields U");
    let vt = svd.v_t.expect("3x3 SVD always yields Vᵀ");
    let mut r = u * vt;
    if r.determinant() < 0.0 {
        let mut u = u;
        u.column_mut(2).neg_mut();
        r = u * vt;
    }
    r
}

/// Applies a rigid transform to every point; normals are rotated only.
pub fn apply_transform(t: &RigidTransform, cloud: &PointCloud) -> PointCloud {
    let points = cloud.points().iter().map(|p| t.apply_point(p)).collect();
    let normals = cloud
        .normals()
        .map(|ns| ns.iter().map(|n| t.apply_vector(n)).collect());
    PointCloud {
        points,
        normals,
    }
}

/// Point-cloud resolution `pr`: the mean over all points of the distance to
/// each point's nearest distinct neighbor.
pub fn compute_resolution(cloud: &PointCloud) -> Result<f64> {
    if cloud.len() < 2 {
        return Err(Error::DegenerateInput(
            "resolution needs at least 2 points".into(),
        ));
    }
    let index = SpatialIndex::build(cloud);
    let mut total = 0.0;
    for (i, p) in cloud.points().iter().enumerate() {
        let nn = index.knn_search(p, 2).expect("k = 2 <= cloud size");
        // The query point itself is in the cloud; pick the first hit with a
        // different identifier (distance 0 is legitimate for duplicates).
        let (_, d) = nn
            .iter()
            .find(|(id, _)| *id != i)
            .expect("two results, at most one is the query itself");
        total += d;
    }
    Ok(total / cloud.len() as f64)
}
