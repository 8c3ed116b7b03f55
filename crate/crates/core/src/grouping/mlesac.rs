//! MLESAC: sample-consensus estimation ranked by the likelihood of the
//! residuals under a Gaussian-inlier / uniform-outlier mixture instead of
//! by inlier count. The mixing parameter γ is re-estimated per hypothesis
//! by a short expectation-maximization loop.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use super::{residual, GroupingResult};
use crate::error::{Error, Result};
use crate::features::CorrespondenceSet;
use crate::geometry::{estimate_rigid_transform, Point3, RigidTransform};
use crate::seed::derive_seed;

/// MLESAC configuration. `sigma` is the inlier residual deviation and `nu`
/// the outlier range constant, both in model units; `threshold` labels the
/// final inliers under the winning transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlesacParams {
    pub sigma: f64,
    pub nu: f64,
    pub iterations: usize,
    pub sample_size: usize,
    pub em_iterations: usize,
    pub threshold: f64,
    /// Label inliers by EM responsibility > 0.5 instead of the distance
    /// threshold.
    pub label_by_responsibility: bool,
}

impl MlesacParams {
    /// Five-point samples, five EM rounds, 1000 iterations.
    pub fn new(sigma: f64, nu: f64, threshold: f64) -> Self {
        Self {
            sigma,
            nu,
            iterations: 1000,
            sample_size: 5,
            em_iterations: 5,
            threshold,
            label_by_responsibility: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sigma", self.sigma),
            ("nu", self.nu),
            ("threshold", self.threshold),
        ] {
            if !(v > 0.0) {
                return Err(Error::invalid_parameter(name, "must be positive"));
            }
        }
        if self.sample_size < 3 {
            return Err(Error::invalid_parameter("sample_size", "must be ≥ 3"));
        }
        if self.iterations == 0 {
            return Err(Error::invalid_parameter("iterations", "must be ≥ 1"));
        }
        if self.em_iterations == 0 {
            return Err(Error::invalid_parameter("em_iterations", "must be ≥ 1"));
        }
        Ok(())
    }
}

fn gaussian_density(d: f64, sigma: f64) -> f64 {
    let norm = 1.0 / (2.0 * std::f64::consts::PI * sigma * sigma).sqrt();
    norm * (-d * d / (2.0 * sigma * sigma)).exp()
}

/// Inlier responsibility of one residual under mixing parameter `gamma`.
fn responsibility(d: f64, gamma: f64, sigma: f64, nu: f64) -> f64 {
    let inlier = gamma * gaussian_density(d, sigma);
    let denom = inlier + (1.0 - gamma) / nu;
    if denom > 0.0 {
        inlier / denom
    } else {
        0.0
    }
}

/// Estimates the inlier mixing parameter γ by expectation-maximization:
/// starting from γ = 0.5, alternately compute per-residual inlier
/// responsibilities and average them. Always lands in [0, 1].
pub fn estimate_gamma_em(distances: &[f64], sigma: f64, nu: f64, em_iterations: usize) -> f64 {
    debug_assert!(!distances.is_empty());
    let mut gamma = 0.5;
    for _ in 0..em_iterations {
        let sum: f64 = distances
            .iter()
            .map(|&d| responsibility(d, gamma, sigma, nu))
            .sum();
        gamma = sum / distances.len() as f64;
    }
    gamma.clamp(0.0, 1.0)
}

/// Negative log-likelihood value plus a flag recording whether any mixture
/// term underflowed and had to be clamped to the smallest positive f64
/// (only reachable at γ = 1 with astronomically large residuals).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nll {
    pub value: f64,
    pub saturated: bool,
}

/// `−Σᵢ log(γ·N(dᵢ; 0, σ²) + (1−γ)/ν)`.
pub fn negative_log_likelihood(distances: &[f64], gamma: f64, sigma: f64, nu: f64) -> Nll {
    let mut value = 0.0;
    let mut saturated = false;
    for &d in distances {
        let mut term = gamma * gaussian_density(d, sigma) + (1.0 - gamma) / nu;
        if term <= 0.0 {
            term = f64::MIN_POSITIVE;
            saturated = true;
        }
        value -= term.ln();
    }
    Nll { value, saturated }
}

/// Runs MLESAC: per iteration, fit a transform to `sample_size` sampled
/// correspondences, estimate γ from all residuals and score the hypothesis
/// by its negative log-likelihood; minimum wins (first on ties). Inliers
/// are labeled under the winning transform.
pub fn mlesac_group(
    c: &CorrespondenceSet,
    params: &MlesacParams,
    seed: u64,
) -> Result<GroupingResult> {
    let start = std::time::Instant::now();
    params.validate()?;
    if c.len() < params.sample_size {
        return Err(Error::DegenerateInput(format!(
            "MLESAC needs ≥ {} correspondences, got {}",
            params.sample_size,
            c.len()
        )));
    }

    struct Best {
        nll: Nll,
        gamma: f64,
        transform: RigidTransform,
    }
    let mut best: Option<Best> = None;
    for iter in 0..params.iterations {
        let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, iter as u64));
        let sample = rand::seq::index::sample(&mut rng, c.len(), params.sample_size);
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

        let distances: Vec<f64> = c.iter().map(|corr| residual(&transform, corr)).collect();
        let gamma = estimate_gamma_em(&distances, params.sigma, params.nu, params.em_iterations);
        let nll = negative_log_likelihood(&distances, gamma, params.sigma, params.nu);

        if best.as_ref().is_none_or(|b| nll.value < b.nll.value) {
            best = Some(Best {
                nll,
                gamma,
                transform,
            });
        }
    }

    let best = best.ok_or(Error::NoConsensus)?;
    let inlier_ids: Vec<usize> = (0..c.len())
        .filter(|&i| {
            let d = residual(&best.transform, &c.items()[i]);
            if params.label_by_responsibility {
                responsibility(d, best.gamma, params.sigma, params.nu) > 0.5
            } else {
                d <= params.threshold
            }
        })
        .collect();

    Ok(GroupingResult {
        inliers: c.select(&inlier_ids),
        transform: Some(best.transform),
        score: best.nll.value,
        iterations_used: params.iterations,
        wall_time: start.elapsed(),
    })
}
