//! RANSAC over correspondence triples: hypothesize a rigid transform from
//! three sampled pairs, keep the one with the largest consensus.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use super::{residual, GroupingResult};
use crate::error::{Error, Result};
use crate::features::CorrespondenceSet;
use crate::geometry::{estimate_rigid_transform, Point3, RigidTransform};
use crate::seed::derive_seed;

const SAMPLE_SIZE: usize = 3;

/// Runs `iterations` hypothesize-and-verify rounds with per-round RNG
/// streams derived from `seed`, then re-estimates the winning transform by
/// least squares over its consensus set. Every reported inlier satisfies
/// the threshold under the returned transform.
pub fn ransac_group(
    c: &CorrespondenceSet,
    threshold: f64,
    iterations: usize,
    seed: u64,
) -> Result<GroupingResult> {
    let start = std::time::Instant::now();
    if c.len() < SAMPLE_SIZE {
        return Err(Error::DegenerateInput(format!(
            "RANSAC needs ≥ {SAMPLE_SIZE} correspondences, got {}",
            c.len()
        )));
    }
    if !(threshold > 0.0) {
        return Err(Error::invalid_parameter("threshold", "must be positive"));
    }
    if iterations == 0 {
        return Err(Error::invalid_parameter("iterations", "must be ≥ 1"));
    }

    let mut best: Option<(usize, RigidTransform)> = None; // (consensus size, transform)
    for iter in 0..iterations {
        let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, iter as u64));
        let sample = rand::seq::index::sample(&mut rng, c.len(), SAMPLE_SIZE);
        let (src, dst): (Vec<Point3>, Vec<Point3>) = sample
            .iter()
            .map(|i| {
                let corr = &c.items()[i];
                (corr.model_point, corr.scene_point)
            })
            .unzip();
        let transform = match estimate_rigid_transform(&src, &dst) {
            Ok(t) => t,
            Err(Error::DegenerateSample) => continue,
            Err(e) => return Err(e),
        };
        let count = c.iter().filter(|corr| residual(&transform, corr) <= threshold).count();
        if best.as_ref().is_none_or(|(best_count, _)| count > *best_count) {
            best = Some((count, transform));
        }
    }

    let (_, sampled_transform) = best.ok_or(Error::NoConsensus)?;
    let (transform, inlier_ids) = refine(c, &sampled_transform, threshold);

    Ok(GroupingResult {
        inliers: c.select(&inlier_ids),
        transform: Some(transform),
        score: inlier_ids.len() as f64,
        iterations_used: iterations,
        wall_time: start.elapsed(),
    })
}

/// Least-squares re-estimate over the consensus set, then a final
/// consensus pass under the refined transform so the residual contract
/// holds for exactly the reported inliers.
pub(crate) fn refine(
    c: &CorrespondenceSet,
    sampled: &RigidTransform,
    threshold: f64,
) -> (RigidTransform, Vec<usize>) {
    let consensus = consensus_ids(c, sampled, threshold);
    if consensus.len() >= SAMPLE_SIZE {
        let src: Vec<Point3> = consensus.iter().map(|&i| c.items()[i].model_point).collect();
        let dst: Vec<Point3> = consensus.iter().map(|&i| c.items()[i].scene_point).collect();
        if let Ok(refined) = estimate_rigid_transform(&src, &dst) {
            return (refined, consensus_ids(c, &refined, threshold));
        }
    }
    (*sampled, consensus)
}

fn consensus_ids(c: &CorrespondenceSet, t: &RigidTransform, threshold: f64) -> Vec<usize> {
    (0..c.len())
        .filter(|&i| residual(t, &c.items()[i]) <= threshold)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{Correspondence, Provenance};
    use crate::geometry::{apply_transform, compute_resolution};
    use crate::shapes::bumpy_sphere;
    use crate::synthesis::synth_correspondences;
    use nalgebra::Vector3;

    #[test]
    fn exact_consensus_recovers_ground_truth() {
        let model = bumpy_sphere(500, 1);
        let t_gt = RigidTransform::random_rotation(3).with_translation(Vector3::new(1.0, 0.0, -0.5));
        let synth = synth_correspondences(&model, &t_gt, 60, 1.0, 0.0, 5).unwrap();
        let pr = compute_resolution(&model).unwrap();

        let result = ransac_group(&synth.set, pr, 200, 7).unwrap();
        assert_eq!(result.inliers.len(), synth.set.len());
        let t = result.transform.unwrap();
        assert!((t.rotation() - t_gt.rotation()).norm() <= 1e-6);
        assert!((t.translation() - t_gt.translation()).norm() <= 1e-6);
    }

    #[test]
    fn separates_flagged_inliers_from_outliers() {
        let model = bumpy_sphere(2000, 2);
        let pr = compute_resolution(&model).unwrap();
        let mut good_runs = 0;
        let n_seeds = 20;
        for seed in 0..n_seeds {
            let t_gt = RigidTransform::random_rotation(100 + seed);
            let synth =
                synth_correspondences(&model, &t_gt, 200, 0.5, 0.1 * pr, 200 + seed).unwrap();
            let result = ransac_group(&synth.set, 1.0 * pr, 1000, 300 + seed).unwrap();

            let inlier_pairs: std::collections::HashSet<_> =
                result.inliers.pairs().into_iter().collect();
            let flagged = synth.flagged_inlier_ids();
            let recalled = flagged.iter().filter(|p| inlier_pairs.contains(p)).count();
            let admitted_outliers = inlier_pairs.len() - recalled;
            let n_outliers = synth.set.len() - flagged.len();
            if recalled as f64 >= 0.95 * flagged.len() as f64
                && admitted_outliers as f64 <= 0.05 * n_outliers as f64
            {
                good_runs += 1;
            }
        }
        assert!(good_runs >= n_seeds - 1, "only {good_runs}/{n_seeds} runs passed");
    }

    #[test]
    fn collinear_triples_give_no_consensus() {
        let items: Vec<Correspondence> = (0..3)
            .map(|i| Correspondence {
                model_id: i,
                model_point: Point3::new(i as f64, 0.0, 0.0),
                scene_id: i,
                scene_point: Point3::new(i as f64, 1.0, 0.0),
                similarity: 0.1,
            })
            .collect();
        let set = CorrespondenceSet::new(items, Provenance::Synthetic).unwrap();
        assert!(matches!(
            ransac_group(&set, 0.1, 50, 1),
            Err(Error::NoConsensus)
        ));
    }

    #[test]
    fn reported_inliers_satisfy_threshold_under_returned_transform() {
        let model = bumpy_sphere(800, 3);
        let pr = compute_resolution(&model).unwrap();
        let t_gt = RigidTransform::random_rotation(11);
        let synth = synth_correspondences(&model, &t_gt, 150, 0.6, 0.2 * pr, 17).unwrap();
        let threshold = 1.5 * pr;
        let result = ransac_group(&synth.set, threshold, 500, 19).unwrap();
        let t = result.transform.unwrap();
        for corr in result.inliers.iter() {
            assert!(residual(&t, corr) <= threshold);
        }
        assert!(result.inliers.is_subset_of(&synth.set));
    }

    #[test]
    fn equivariant_under_rigid_motion_of_the_scene() {
        let model = bumpy_sphere(600, 4);
        let pr = compute_resolution(&model).unwrap();
        let t_gt = RigidTransform::random_rotation(21);
        let synth = synth_correspondences(&model, &t_gt, 120, 0.5, 0.1 * pr, 23).unwrap();

        let result = ransac_group(&synth.set, pr, 400, 29).unwrap();

        let g = RigidTransform::random_rotation(31).with_translation(Vector3::new(3.0, -1.0, 2.0));
        let moved_items: Vec<Correspondence> = synth
            .set
            .iter()
            .map(|corr| Correspondence {
                scene_point: g.apply_point(&corr.scene_point),
                ..*corr
            })
            .collect();
        let moved_set = CorrespondenceSet::new(moved_items, Provenance::Synthetic).unwrap();
        let moved_result = ransac_group(&moved_set, pr, 400, 29).unwrap();

        assert_eq!(result.inliers.pairs(), moved_result.inliers.pairs());
        let expected = g.compose(&result.transform.unwrap());
        let got = moved_result.transform.unwrap();
        assert!((got.rotation() - expected.rotation()).norm() <= 1e-6);
        assert!((got.translation() - expected.translation()).norm() <= 1e-6);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let model = bumpy_sphere(400, 5);
        let pr = compute_resolution(&model).unwrap();
        let t_gt = RigidTransform::random_rotation(41);
        let synth = synth_correspondences(&model, &t_gt, 100, 0.5, 0.1 * pr, 43).unwrap();
        let a = ransac_group(&synth.set, pr, 300, 47).unwrap();
        let b = ransac_group(&synth.set, pr, 300, 47).unwrap();
        assert_eq!(a.inliers.pairs(), b.inliers.pairs());
        assert_eq!(a.transform, b.transform);
        assert_eq!(a.score, b.score);
    }

    #[test]
    fn scene_cloud_pipeline_smoke() {
        // consensus against a transformed cloud rather than synthetic pairs
        let model = bumpy_sphere(300, 6);
        let t = RigidTransform::random_rotation(51);
        let scene = apply_transform(&t, &model);
        let items: Vec<Correspondence> = (0..40)
            .map(|i| {
                let id = i * 7;
                Correspondence {
                    model_id: id,
                    model_point: model.point(id),
                    scene_id: id,
                    scene_point: scene.point(id),
                    similarity: 0.2,
                }
            })
            .collect();
        let set = CorrespondenceSet::new(items, Provenance::Synthetic).unwrap();
        let pr = compute_resolution(&model).unwrap();
        let result = ransac_group(&set, pr, 100, 53).unwrap();
        assert_eq!(result.inliers.len(), 40);
    }
}
