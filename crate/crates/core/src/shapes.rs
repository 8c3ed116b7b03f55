//! Procedural point-cloud generators used as stand-ins for scanned models:
//! a planar grid and a cube for degenerate-geometry tests, and a randomly
//! bumped sphere as a feature-rich benchmark model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::geometry::{Point3, PointCloud};

/// `nx × ny` grid in the z = 0 plane.
pub fn planar_grid(nx: usize, ny: usize, spacing: f64) -> PointCloud {
    let mut pts = Vec::with_capacity(nx * ny);
    for i in 0..nx {
        for j in 0..ny {
            pts.push(Point3::new(i as f64 * spacing, j as f64 * spacing, 0.0));
        }
    }
    PointCloud::new(pts).expect("grid is finite and non-empty")
}

/// Unit-cube surface sampled with `per_edge` points along each axis of
/// every face (corners and edges shared, no duplicates).
pub fn cube_surface(per_edge: usize) -> PointCloud {
    assert!(per_edge >= 2);
    let step = 1.0 / (per_edge - 1) as f64;
    let mut pts = Vec::new();
    for i in 0..per_edge {
        for j in 0..per_edge {
            for k in 0..per_edge {
                let on_boundary = [i, j, k]
                    .iter()
                    .any(|&v| v == 0 || v == per_edge - 1);
                if on_boundary {
                    pts.push(Point3::new(i as f64 * step, j as f64 * step, k as f64 * step));
                }
            }
        }
    }
    PointCloud::new(pts).expect("cube surface is finite and non-empty")
}

/// Sphere of radius ~1 deformed by `n_bumps` random Gaussian bumps, sampled
/// at `n` near-uniform directions (Fibonacci lattice). The bumps make local
/// neighborhoods distinctive, which keypoint detection and descriptor
/// matching both need; a plain sphere is degenerate for either.
pub fn bumpy_sphere(n: usize, seed: u64) -> PointCloud {
    bumpy_sphere_with(n, seed, 40, 0.18)
}

/// [`bumpy_sphere`] with explicit bump count and amplitude.
pub fn bumpy_sphere_with(n: usize, seed: u64, n_bumps: usize, amplitude: f64) -> PointCloud {
    assert!(n >= 4);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);

    struct Bump {
        center: nalgebra::Vector3<f64>,
        amp: f64,
        inv_width2: f64,
    }
    let bumps: Vec<Bump> = (0..n_bumps)
        .map(|_| {
            let dir = random_unit(&mut rng);
            let amp = rng.random_range(-amplitude..amplitude);
            let width: f64 = rng.random_range(0.15..0.45); // radians
            Bump {
                center: dir,
                amp,
                inv_width2: 1.0 / (width * width),
            }
        })
        .collect();

    let golden = std::f64::consts::PI * (3.0 - 5.0_f64.sqrt());
    let mut pts = Vec::with_capacity(n);
    for i in 0..n {
        // Fibonacci lattice direction.
        let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
        let r_xy = (1.0 - z * z).sqrt();
        let phi = golden * i as f64;
        let dir = nalgebra::Vector3::new(r_xy * phi.cos(), r_xy * phi.sin(), z);

        let mut radius = 1.0;
        for b in &bumps {
            let angle = dir.dot(&b.center).clamp(-1.0, 1.0).acos();
            radius += b.amp * (-angle * angle * b.inv_width2).exp();
        }
        pts.push(Point3::from(dir * radius));
    }
    PointCloud::new(pts).expect("bumpy sphere is finite and non-empty")
}

/// Torus (major radius 1, minor radius 0.4) with Gaussian bumps, sampled
/// uniformly by area. Unlike a sphere, its surface normals never point at
/// the centroid, so centroid-offset votes from mismatched pairs scatter —
/// the discriminative case Hough voting needs.
pub fn bumpy_torus(n: usize, seed: u64) -> PointCloud {
    assert!(n >= 4);
    let major = 1.0;
    let minor = 0.4;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);

    struct Bump {
        u: f64,
        v: f64,
        amp: f64,
        inv_width2: f64,
    }
    let tau = std::f64::consts::TAU;
    // Many sharp, localized bumps: saliency then peaks on bump tips with
    // wide ranking gaps, which keeps the detected keypoint set stable
    // under noise and downsampling.
    let bumps: Vec<Bump> = (0..160)
        .map(|_| {
            let amp = rng.random_range(0.05..0.14);
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            Bump {
                u: rng.random_range(0.0..tau),
                v: rng.random_range(0.0..tau),
                amp: sign * amp,
                inv_width2: 1.0 / rng.random_range(0.008..0.04),
            }
        })
        .collect();

    let mut pts = Vec::with_capacity(n);
    while pts.len() < n {
        let u = rng.random_range(0.0..tau);
        let v = rng.random_range(0.0..tau);
        // area element ∝ (R + r·cos v): rejection keeps sampling uniform
        if rng.random_range(0.0..1.0) > (major + minor * v.cos()) / (major + minor) {
            continue;
        }
        let mut r_tube = minor;
        for b in &bumps {
            let du = angle_gap(u, b.u);
            let dv = angle_gap(v, b.v);
            r_tube += b.amp * (-(du * du + dv * dv) * b.inv_width2).exp();
        }
        let ring = major + r_tube * v.cos();
        pts.push(Point3::new(
            ring * u.cos(),
            ring * u.sin(),
            r_tube * v.sin(),
        ));
    }
    PointCloud::new(pts).expect("bumpy torus is finite and non-empty")
}

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(std::f64::consts::TAU);
    d.min(std::f64::consts::TAU - d)
}

fn random_unit(rng: &mut ChaCha12Rng) -> nalgebra::Vector3<f64> {
    use rand_distr::{Distribution, StandardNormal};
    loop {
        let coords: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(rng));
        let v = nalgebra::Vector3::from(coords);
        let norm = v.norm();
        if norm > 1e-6 {
            return v / norm;
        }
    }
}
