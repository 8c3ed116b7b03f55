//! Synthetic scene and correspondence generation.
//!
//! Scenes are derived from a model cloud by a seeded rotation, isotropic
//! Gaussian noise (σ in multiples of the model resolution) and Bernoulli
//! downsampling, with the applied transform kept as ground truth. A
//! correspondence synthesizer with hidden inlier labels isolates the
//! grouping algorithms from the feature pipeline in tests.

use std::collections::BTreeMap;

use nalgebra::Vector3;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{Correspondence, CorrespondenceSet, Provenance};
use crate::geometry::{apply_transform, compute_resolution, Point3, PointCloud, RigidTransform};
use crate::seed::{derive_seed, derive_seed2};

/// Recipe for deriving one scene from a model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    /// Seed for the uniform SO(3) rotation; `None` keeps the model
    /// orientation (identity ground truth rotation).
    pub rotation_seed: Option<u64>,
    /// Noise standard deviation in multiples of the model resolution.
    pub noise_sigma: f64,
    /// Probability of keeping each point, in (0, 1].
    pub downsample_keep_ratio: f64,
    /// Seed for the noise and downsampling draws.
    pub rng_seed: u64,
    /// Add a random translation (derived from `rotation_seed`) to the
    /// ground truth instead of the default zero translation.
    #[serde(default)]
    pub random_translation: bool,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::invalid_parameter("noise_sigma", "must be ≥ 0"));
        }
        if !(self.downsample_keep_ratio > 0.0 && self.downsample_keep_ratio <= 1.0) {
            return Err(Error::invalid_parameter(
                "downsample_keep_ratio",
                "must be in (0, 1]",
            ));
        }
        Ok(())
    }
}

/// A generated scene with its ground-truth transform and the mapping from
/// scene point identifiers back to the model points they came from.
#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub scene: PointCloud,
    pub ground_truth: RigidTransform,
    pub spec: SceneSpec,
    pub point_origin_map: BTreeMap<usize, usize>,
}

/// Builds a scene: `downsample(add_noise(rotate(model)))`, deterministic
/// for a fixed spec.
pub fn generate_scene(model: &PointCloud, spec: &SceneSpec) -> Result<SyntheticScene> {
    spec.validate()?;
    if model.len() < 10 {
        return Err(Error::DegenerateInput(format!(
            "scene generation needs ≥ 10 model points, got {}",
            model.len()
        )));
    }

    let pr = compute_resolution(model)?;
    let ground_truth = match spec.rotation_seed {
        Some(seed) => {
            let rotation = RigidTransform::random_rotation(seed);
            if spec.random_translation {
                let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, TRANSLATION_STREAM));
                let d = model.bounding_box_diagonal();
                rotation.with_translation(Vector3::new(
                    rng.random_range(-d..d),
                    rng.random_range(-d..d),
                    rng.random_range(-d..d),
                ))
            } else {
                rotation
            }
        }
        None => RigidTransform::identity(),
    };

    let rotated = apply_transform(&ground_truth, model);

    let sigma = spec.noise_sigma * pr;
    let mut noise_rng = ChaCha12Rng::seed_from_u64(derive_seed(spec.rng_seed, 0));
    let noisy: Vec<Point3> = rotated
        .points()
        .iter()
        .map(|p| {
            let mut q = *p;
            if sigma > 0.0 {
                for k in 0..3 {
                    let e: f64 = StandardNormal.sample(&mut noise_rng);
                    q[k] += sigma * e;
                }
            }
            q
        })
        .collect();

    let mut keep_rng = ChaCha12Rng::seed_from_u64(derive_seed(spec.rng_seed, 1));
    let mut points = Vec::new();
    let mut normals = rotated.normals().map(|_| Vec::new());
    let mut origin = BTreeMap::new();
    for (model_id, q) in noisy.into_iter().enumerate() {
        let keep = spec.downsample_keep_ratio >= 1.0
            || keep_rng.random::<f64>() < spec.downsample_keep_ratio;
        if keep {
            origin.insert(points.len(), model_id);
            points.push(q);
            if let (Some(ns), Some(src)) = (normals.as_mut(), rotated.normals()) {
                ns.push(src[model_id]);
            }
        }
    }

    if points.is_empty() {
        return Err(Error::DegenerateOutput);
    }

    let scene = match normals {
        Some(ns) => PointCloud::with_normals(points, ns)?,
        None => PointCloud::new(points)?,
    };

    Ok(SyntheticScene {
        scene,
        ground_truth,
        spec: *spec,
        point_origin_map: origin,
    })
}

// Stream tag separating the translation draw from noise/downsampling.
const TRANSLATION_STREAM: u64 = 2;

/// The 10 noise levels of the benchmark grid, in multiples of `pr`.
pub fn noise_levels() -> Vec<f64> {
    (1..=10).map(|i| i as f64 / 10.0).collect()
}

/// The 8 keep ratios of the benchmark grid.
pub fn keep_ratios() -> Vec<f64> {
    (0..8).map(|j| 1.0 - 0.125 * j as f64).collect()
}

/// The 80 specs of the 10 × 8 benchmark grid in suite order (noise
/// ascending, keep ratio descending from 1.0), seeds fanned out
/// deterministically from `base_seed`.
pub fn benchmark_suite_specs(base_seed: u64) -> Vec<SceneSpec> {
    let mut specs = Vec::with_capacity(80);
    let mut index = 0u64;
    for noise in noise_levels() {
        for keep in keep_ratios() {
            specs.push(SceneSpec {
                rotation_seed: Some(derive_seed2(base_seed, index, 0)),
                noise_sigma: noise,
                downsample_keep_ratio: keep,
                rng_seed: derive_seed2(base_seed, index, 1),
                random_translation: false,
            });
            index += 1;
        }
    }
    specs
}

/// The 10 × 8 benchmark grid: one scene per (noise, keep-ratio) cell, 80
/// in total. The first scene pairs the lowest noise with keep ratio 1.0.
pub fn make_benchmark_suite(model: &PointCloud, base_seed: u64) -> Result<Vec<SyntheticScene>> {
    benchmark_suite_specs(base_seed)
        .iter()
        .map(|spec| generate_scene(model, spec))
        .collect()
}

/// A synthetic correspondence set plus the hidden per-item inlier labels
/// tests assert against.
#[derive(Debug, Clone)]
pub struct SyntheticCorrespondences {
    pub set: CorrespondenceSet,
    /// True where the correspondence was constructed as an inlier.
    pub inlier_flags: Vec<bool>,
}

impl SyntheticCorrespondences {
    pub fn flagged_inlier_ids(&self) -> Vec<(usize, usize)> {
        self.set
            .iter()
            .zip(&self.inlier_flags)
            .filter(|(_, f)| **f)
            .map(|(c, _)| (c.model_id, c.scene_id))
            .collect()
    }
}

/// Draws `round(inlier_ratio · n_total)` correspondences that map sampled
/// model points to their transformed positions plus Gaussian noise
/// (`noise_sigma` in model units), and fills the rest with uniform points
/// in the transformed model's bounding box. Similarity scores for the two
/// groups overlap, so scores alone cannot separate them.
pub fn synth_correspondences(
    model: &PointCloud,
    t_gt: &RigidTransform,
    n_total: usize,
    inlier_ratio: f64,
    noise_sigma: f64,
    seed: u64,
) -> Result<SyntheticCorrespondences> {
    if n_total == 0 {
        return Err(Error::invalid_parameter("n_total", "must be ≥ 1"));
    }
    if !(0.0..=1.0).contains(&inlier_ratio) {
        return Err(Error::invalid_parameter("inlier_ratio", "must be in [0, 1]"));
    }
    if model.is_empty() {
        return Err(Error::DegenerateInput("empty model".into()));
    }

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let n_inliers = (inlier_ratio * n_total as f64).round() as usize;

    // Model points to pair up: distinct while the model is large enough.
    let model_ids: Vec<usize> = if n_total <= model.len() {
        rand::seq::index::sample(&mut rng, model.len(), n_total).into_vec()
    } else {
        (0..n_total).map(|_| rng.random_range(0..model.len())).collect()
    };

    // Scene extent for outlier placement.
    let (mut lo, mut hi) = {
        let p = t_gt.apply_point(&model.point(0));
        (p, p)
    };
    for p in model.points() {
        let q = t_gt.apply_point(p);
        for k in 0..3 {
            lo[k] = lo[k].min(q[k]);
            hi[k] = hi[k].max(q[k]);
        }
    }

    let mut drafted: Vec<(Correspondence, bool)> = Vec::with_capacity(n_total);
    for (slot, &model_id) in model_ids.iter().enumerate() {
        let model_point = model.point(model_id);
        let is_inlier = slot < n_inliers;
        let (scene_point, similarity) = if is_inlier {
            let mut q = t_gt.apply_point(&model_point);
            if noise_sigma > 0.0 {
                for k in 0..3 {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    q[k] += noise_sigma * e;
                }
            }
            (q, rng.random_range(0.0..0.9))
        } else {
            let q = Point3::new(
                rng.random_range(lo.x..=hi.x),
                rng.random_range(lo.y..=hi.y),
                rng.random_range(lo.z..=hi.z),
            );
            (q, rng.random_range(0.1..1.0))
        };
        drafted.push((
            Correspondence {
                model_id,
                model_point,
                scene_id: 0, // assigned after the shuffle
                scene_point,
                similarity,
            },
            is_inlier,
        ));
    }

    drafted.shuffle(&mut rng);
    let mut items = Vec::with_capacity(n_total);
    let mut flags = Vec::with_capacity(n_total);
    for (scene_id, (mut c, flag)) in drafted.into_iter().enumerate() {
        c.scene_id = scene_id;
        items.push(c);
        flags.push(flag);
    }

    Ok(SyntheticCorrespondences {
        set: CorrespondenceSet::new(items, Provenance::Synthetic)?,
        inlier_flags: flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes::bumpy_sphere;
    use approx::assert_relative_eq;

    fn spec(rotation: Option<u64>, noise: f64, keep: f64, rng: u64) -> SceneSpec {
        SceneSpec {
            rotation_seed: rotation,
            noise_sigma: noise,
            downsample_keep_ratio: keep,
            rng_seed: rng,
            random_translation: false,
        }
    }

    #[test]
    fn identity_spec_reproduces_model() {
        let model = bumpy_sphere(300, 1);
        let out = generate_scene(&model, &spec(None, 0.0, 1.0, 7)).unwrap();
        assert_eq!(out.scene, model);
        assert_eq!(out.ground_truth, RigidTransform::identity());
        assert_eq!(out.point_origin_map.len(), model.len());
    }

    #[test]
    fn generation_is_deterministic() {
        let model = bumpy_sphere(300, 2);
        let s = spec(Some(5), 0.4, 0.6, 11);
        let a = generate_scene(&model, &s).unwrap();
        let b = generate_scene(&model, &s).unwrap();
        assert_eq!(a.scene, b.scene);
        assert_eq!(a.ground_truth, b.ground_truth);
        assert_eq!(a.point_origin_map, b.point_origin_map);
    }

    #[test]
    fn zero_noise_scene_inverts_back_onto_model() {
        let model = bumpy_sphere(400, 3);
        let out = generate_scene(&model, &spec(Some(9), 0.0, 1.0, 1)).unwrap();
        let back = apply_transform(&out.ground_truth.inverse(), &out.scene);
        for (scene_id, model_id) in &out.point_origin_map {
            let d = (back.point(*scene_id) - model.point(*model_id)).norm();
            assert!(d <= 1e-9, "point {scene_id} off by {d}");
        }
    }

    #[test]
    fn noise_magnitude_matches_gaussian_expectation() {
        // E‖N(0, σ²I₃)‖ = σ·√(8/π); Monte-Carlo over 10 seeds.
        let model = bumpy_sphere(1000, 4);
        let pr = compute_resolution(&model).unwrap();
        let sigma = 0.5;
        let expected = sigma * pr * (8.0 / std::f64::consts::PI).sqrt();
        let mut total = 0.0;
        let mut count = 0usize;
        for seed in 0..10 {
            let out = generate_scene(&model, &spec(Some(40 + seed), sigma, 1.0, 100 + seed)).unwrap();
            let rotated = apply_transform(&out.ground_truth, &model);
            for (scene_id, model_id) in &out.point_origin_map {
                total += (out.scene.point(*scene_id) - rotated.point(*model_id)).norm();
                count += 1;
            }
        }
        let mean = total / count as f64;
        assert!(
            (mean - expected).abs() <= 0.1 * expected,
            "mean {mean}, expected {expected}"
        );
    }

    #[test]
    fn origin_map_displacement_within_gaussian_bound() {
        // noise is drawn per coordinate, so the three-sigma rule applies
        // coordinate-wise: ≥ 99% of mapped points stay within 3σ on every
        // axis after inverting the ground truth (0.9973³ ≈ 99.2%).
        let model = bumpy_sphere(1000, 5);
        let pr = compute_resolution(&model).unwrap();
        let sigma = 0.3;
        let out = generate_scene(&model, &spec(Some(8), sigma, 0.8, 21)).unwrap();
        let back = apply_transform(&out.ground_truth.inverse(), &out.scene);
        let bound = 3.0 * sigma * pr;
        let ok = out
            .point_origin_map
            .iter()
            .filter(|(s, m)| {
                let delta = back.point(**s) - model.point(**m);
                delta.iter().all(|c| c.abs() <= bound)
            })
            .count();
        assert!(
            ok as f64 >= 0.99 * out.point_origin_map.len() as f64,
            "{ok} of {} inside the bound",
            out.point_origin_map.len()
        );
    }

    #[test]
    fn suite_is_80_scenes_in_grid_order() {
        let model = bumpy_sphere(200, 6);
        let suite = make_benchmark_suite(&model, 42).unwrap();
        assert_eq!(suite.len(), 80);
        assert_relative_eq!(suite[0].spec.noise_sigma, 0.1);
        assert_relative_eq!(suite[0].spec.downsample_keep_ratio, 1.0);
        let noises: Vec<f64> = noise_levels();
        let keeps: Vec<f64> = keep_ratios();
        for (i, scene) in suite.iter().enumerate() {
            assert_eq!(scene.spec.noise_sigma, noises[i / 8]);
            assert_eq!(scene.spec.downsample_keep_ratio, keeps[i % 8]);
        }
        let again = make_benchmark_suite(&model, 42).unwrap();
        for (a, b) in suite.iter().zip(&again) {
            assert_eq!(a.scene, b.scene);
        }
    }

    #[test]
    fn suite_ground_truths_satisfy_rotation_invariants() {
        let model = bumpy_sphere(150, 7);
        for scene in make_benchmark_suite(&model, 3).unwrap() {
            let r = scene.ground_truth.rotation();
            assert!((r.transpose() * r - nalgebra::Matrix3::identity()).norm() <= 1e-9);
            assert!((r.determinant() - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn exact_correspondences_when_ratio_one_noise_zero() {
        let model = bumpy_sphere(500, 8);
        let t = RigidTransform::random_rotation(2).with_translation(Vector3::new(1.0, -1.0, 0.5));
        let out = synth_correspondences(&model, &t, 100, 1.0, 0.0, 13).unwrap();
        assert!(out.inlier_flags.iter().all(|f| *f));
        for c in out.set.iter() {
            assert!((t.apply_point(&c.model_point) - c.scene_point).norm() <= 1e-12);
        }
    }

    #[test]
    fn inlier_count_follows_rounding_contract() {
        let model = bumpy_sphere(500, 9);
        let t = RigidTransform::identity();
        let out = synth_correspondences(&model, &t, 200, 0.5, 0.01, 14).unwrap();
        assert_eq!(out.set.len(), 200);
        assert_eq!(out.inlier_flags.iter().filter(|f| **f).count(), 100);
    }

    #[test]
    fn all_outlier_set_is_far_from_transformed_sources() {
        let model = bumpy_sphere(500, 10);
        let pr = compute_resolution(&model).unwrap();
        let t = RigidTransform::random_rotation(4);
        let sigma = 0.1 * pr;
        let out = synth_correspondences(&model, &t, 200, 0.0, sigma, 15).unwrap();
        assert!(out.inlier_flags.iter().all(|f| !*f));
        let close = out
            .set
            .iter()
            .filter(|c| (t.apply_point(&c.model_point) - c.scene_point).norm() <= 3.0 * sigma)
            .count();
        assert!(close <= 2, "{close} outliers landed within 3σ by chance");
    }

    #[test]
    fn empty_downsample_is_an_error() {
        // keep ratio so small every point is dropped for this seed
        let model = bumpy_sphere(10, 11);
        let result = generate_scene(&model, &spec(None, 0.0, 1e-12, 3));
        assert!(matches!(result, Err(Error::DegenerateOutput)));
    }
}
