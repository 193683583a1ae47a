//! Seeded synthetic mixtures.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, TAU};

use rand::Rng as _;

use crate::measures::{MetaMeasure, PointCloud};
use crate::rng;
use crate::{Error, Result};

pub const RING_RADIUS: f64 = 1.0;
pub const RING_CENTER_RADIUS: f64 = 2.5;

/// `n_rings` unit circles with centers equally spaced on a circle of radius
/// 2.5 (first center straight up), each sampled at `n_per_ring` equally
/// spaced angles with a seeded phase. Uniform mixture.
pub fn make_rings(n_per_ring: usize, n_rings: usize, seed: u64) -> Result<MetaMeasure> {
    if n_per_ring < 3 || n_rings == 0 {
        return Err(Error::InvalidParameter("rings need at least 3 points and one ring".into()));
    }
    let mut rng = rng::seeded(seed);
    let clouds = (0..n_rings)
        .map(|r| {
            let center_angle = FRAC_PI_2 + TAU * r as f64 / n_rings as f64;
            let (cx, cy) = (RING_CENTER_RADIUS * libm::cos(center_angle), RING_CENTER_RADIUS * libm::sin(center_angle));
            let phase = rng.random::<f64>() * TAU / n_per_ring as f64;
            let pts: Vec<f64> = (0..n_per_ring)
                .flat_map(|i| {
                    let a = phase + TAU * i as f64 / n_per_ring as f64;
                    [cx + RING_RADIUS * libm::cos(a), cy + RING_RADIUS * libm::sin(a)]
                })
                .collect();
            PointCloud::uniform(pts, 2)
        })
        .collect::<Result<Vec<_>>>()?;
    MetaMeasure::uniform(clouds)
}

/// Centers of the rings produced by [`make_rings`].
pub fn ring_centers(n_rings: usize) -> Vec<[f64; 2]> {
    (0..n_rings)
        .map(|r| {
            let a = FRAC_PI_2 + TAU * r as f64 / n_rings as f64;
            [RING_CENTER_RADIUS * libm::cos(a), RING_CENTER_RADIUS * libm::sin(a)]
        })
        .collect()
}

/// `c` isotropic Gaussian clouds of `n` points in ℝᵈ with standard deviation
/// `spread`, centered at standard-normal random centers. Uniform mixture.
pub fn make_gaussian_blobs(c: usize, n: usize, d: usize, spread: f64, seed: u64) -> Result<MetaMeasure> {
    make_gaussian_blobs_scaled(c, n, d, spread, 1.0, seed)
}

/// [`make_gaussian_blobs`] with centers drawn from `N(0, center_scale² I)`.
pub fn make_gaussian_blobs_scaled(
    c: usize,
    n: usize,
    d: usize,
    spread: f64,
    center_scale: f64,
    seed: u64,
) -> Result<MetaMeasure> {
    if c == 0 || n == 0 || d == 0 {
        return Err(Error::InvalidParameter("blobs need C, n, d >= 1".into()));
    }
    if !(spread >= 0.0) || !(center_scale >= 0.0) {
        return Err(Error::InvalidParameter("spread and center scale must be non-negative".into()));
    }
    let mut rng = rng::seeded(seed);
    let clouds = (0..c)
        .map(|_| {
            let center: Vec<f64> = (0..d).map(|_| center_scale * rng::standard_normal(&mut rng)).collect();
            let mut pts = Vec::with_capacity(n * d);
            for _ in 0..n {
                for x in &center {
                    pts.push(x + spread * rng::standard_normal(&mut rng));
                }
            }
            PointCloud::uniform(pts, d)
        })
        .collect::<Result<Vec<_>>>()?;
    MetaMeasure::uniform(clouds)
}

/// Radius, relative to the ring layout, at which [`make_ring_sources`] places blobs.
pub const SOURCE_SHRINK: f64 = 0.8;
/// Standard deviation of the per-blob center jitter in [`make_ring_sources`].
pub const SOURCE_JITTER: f64 = 0.2;

/// Flow initialization for ring targets: `n_clouds` Gaussian blobs of `n`
/// points with standard deviation `spread`, centered on a circle of radius
/// `0.8 · 2.5` at the angles [`ring_centers`] would use for `n_clouds` rings,
/// each center jittered, and assigned to clouds in a seeded random order.
pub fn make_ring_sources(n_clouds: usize, n: usize, spread: f64, seed: u64) -> Result<MetaMeasure> {
    if n_clouds == 0 || n == 0 || !(spread >= 0.0) {
        return Err(Error::InvalidParameter("ring sources need clouds, points and a non-negative spread".into()));
    }
    let mut rng = rng::seeded(seed);
    let mut slots: Vec<usize> = (0..n_clouds).collect();
    for i in (1..n_clouds).rev() {
        let j = rng.random_range(0..=i);
        slots.swap(i, j);
    }
    let anchors = ring_centers(n_clouds);
    let clouds = slots
        .iter()
        .map(|&s| {
            let center = [
                SOURCE_SHRINK * anchors[s][0] + SOURCE_JITTER * rng::standard_normal(&mut rng),
                SOURCE_SHRINK * anchors[s][1] + SOURCE_JITTER * rng::standard_normal(&mut rng),
            ];
            let mut pts = Vec::with_capacity(2 * n);
            for _ in 0..n {
                for x in center {
                    pts.push(x + spread * rng::standard_normal(&mut rng));
                }
            }
            PointCloud::uniform(pts, 2)
        })
        .collect::<Result<Vec<_>>>()?;
    MetaMeasure::uniform(clouds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rings_shape_and_geometry() {
        let m = make_rings(80, 3, 1).unwrap();
        assert_eq!(m.num_clouds(), 3);
        assert_eq!(m.common_uniform_size(), Some(80));
        for (cloud, c) in m.clouds().iter().zip(ring_centers(3)) {
            for i in 0..cloud.len() {
                let p = cloud.point(i);
                let r = libm::hypot(p[0] - c[0], p[1] - c[1]);
                assert!((r - 1.0).abs() < 1e-12);
            }
        }
        assert_eq!(make_rings(80, 3, 1).unwrap(), m);
        assert!(make_rings(2, 3, 1).is_err());
    }

    #[test]
    fn ring_sources_sit_inside_the_layout() {
        let m = make_ring_sources(4, 50, 0.0, 3).unwrap();
        assert_eq!(m.num_clouds(), 4);
        for cloud in m.clouds() {
            let p = cloud.point(0);
            let r = libm::hypot(p[0], p[1]);
            assert!((r - SOURCE_SHRINK * RING_CENTER_RADIUS).abs() < 6.0 * SOURCE_JITTER);
        }
        assert_eq!(make_ring_sources(4, 50, 0.4, 3).unwrap(), make_ring_sources(4, 50, 0.4, 3).unwrap());
    }

    #[test]
    fn zero_spread_collapses_to_centers() {
        let m = make_gaussian_blobs(3, 5, 2, 0.0, 4).unwrap();
        for cloud in m.clouds() {
            let first = cloud.point(0).to_vec();
            for i in 1..cloud.len() {
                assert_eq!(cloud.point(i), first.as_slice());
            }
        }
    }

    #[test]
    fn blob_spread_matches() {
        let spread = 0.3;
        let m = make_gaussian_blobs(2, 1000, 3, spread, 9).unwrap();
        for cloud in m.clouds() {
            let n = cloud.len() as f64;
            for axis in 0..3 {
                let mean: f64 = (0..cloud.len()).map(|i| cloud.point(i)[axis]).sum::<f64>() / n;
                let var: f64 = (0..cloud.len()).map(|i| (cloud.point(i)[axis] - mean).powi(2)).sum::<f64>() / n;
                let sd = libm::sqrt(var);
                assert!((sd - spread).abs() / spread < 0.15);
            }
        }
        assert_eq!(make_gaussian_blobs(2, 10, 3, spread, 9).unwrap(), make_gaussian_blobs(2, 10, 3, spread, 9).unwrap());
    }
}
