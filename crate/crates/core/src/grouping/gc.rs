//! Geometric consistency clustering: rigid motions preserve pairwise
//! distances, so mutually consistent correspondences satisfy
//! `|d(pᵢ, pⱼ) − d(pᵢ', pⱼ')| ≤ t_gc` for every pair.

use super::GroupingResult;
use crate::error::{Error, Result};
use crate::features::{Correspondence, CorrespondenceSet};

/// Compatibility gap of a correspondence pair: the absolute difference of
/// the model-side and scene-side keypoint distances.
pub fn compatibility_gap(a: &Correspondence, b: &Correspondence) -> f64 {
    let dm = (a.model_point - b.model_point).norm();
    let ds = (a.scene_point - b.scene_point).norm();
    (dm - ds).abs()
}

/// Greedy clustering. Seeds are visited in order of descending
/// distinctiveness (ascending similarity score, ties by input order); an
/// unassigned correspondence joins a cluster only when compatible with
/// every member already in it. The largest cluster wins, earliest-seeded
/// on ties. No transform is estimated.
pub fn gc_group(c: &CorrespondenceSet, t_gc: f64) -> Result<GroupingResult> {
    let start = std::time::Instant::now();
    if c.len() < 2 {
        return Err(Error::DegenerateInput(format!(
            "geometric consistency needs ≥ 2 correspondences, got {}",
            c.len()
        )));
    }
    if !(t_gc > 0.0) {
        return Err(Error::invalid_parameter("t_gc", "must be positive"));
    }

    let mut order: Vec<usize> = (0..c.len()).collect();
    order.sort_by(|&a, &b| {
        c.items()[a]
            .similarity
            .total_cmp(&c.items()[b].similarity)
            .then_with(|| a.cmp(&b))
    });

    let mut assigned = vec![false; c.len()];
    let mut best: Vec<usize> = Vec::new();
    let mut clusters_formed = 0usize;
    for &seed in &order {
        if assigned[seed] {
            continue;
        }
        assigned[seed] = true;
        clusters_formed += 1;
        let mut cluster = vec![seed];
        for &j in &order {
            if assigned[j] {
                continue;
            }
            let compatible = cluster
                .iter()
                .all(|&m| compatibility_gap(&c.items()[m], &c.items()[j]) <= t_gc);
            if compatible {
                assigned[j] = true;
                cluster.push(j);
            }
        }
        if cluster.len() > best.len() {
            best = cluster;
        }
    }

    best.sort_unstable();
    Ok(GroupingResult {
        score: best.len() as f64,
        inliers: c.select(&best),
        transform: None,
        iterations_used: clusters_formed,
        wall_time: start.elapsed(),
    })
}
