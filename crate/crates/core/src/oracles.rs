//! Reference implementations used to check the production paths.
//!
//! Nothing here reuses the sorting or assignment code it is meant to check:
//! transport costs are found by enumerating permutations, gradients by
//! central differences.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::functional::{mmd_half, wow_gradient};
use crate::kernels::KernelSpec;
use crate::measures::{Displacement, MetaMeasure, PointCloud};
use crate::rng;
use crate::sliced::ProjectionSet;
use crate::{Error, Result};

pub const DEFAULT_FD_STEP: f64 = 1e-5;
pub const DEFAULT_JITTER: f64 = 1e-7;
pub const BRUTE_FORCE_MAX_POINTS: usize = 8;
pub const BRUTE_FORCE_MAX_CLOUDS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// `(cloud, point, axis)` of the worst coordinate.
    pub worst_coordinate: (usize, usize, usize),
    pub step_h: f64,
}

/// Central differences `(f(x+h) − f(x−h)) / 2h` in every particle coordinate.
pub fn fd_gradient<F>(objective: F, p: &MetaMeasure, h: f64) -> Result<Displacement>
where
    F: Fn(&MetaMeasure) -> Result<f64>,
{
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("finite-difference step must be positive, got {h}")));
    }
    let mut fields = Vec::with_capacity(p.num_clouds());
    for c in 0..p.num_clouds() {
        let base = p.cloud(c).points().to_vec();
        let mut field = vec![0.0; base.len()];
        for (idx, slot) in field.iter_mut().enumerate() {
            let eval = |delta: f64| -> Result<f64> {
                let mut pts = base.clone();
                pts[idx] += delta;
                objective(&replace_cloud(p, c, pts)?)
            };
            *slot = (eval(h)? - eval(-h)?) / (2.0 * h);
        }
        fields.push(field);
    }
    Ok(Displacement::new(fields))
}

fn replace_cloud(p: &MetaMeasure, c: usize, pts: Vec<f64>) -> Result<MetaMeasure> {
    let mut clouds = p.clouds().to_vec();
    clouds[c] = clouds[c].with_points(pts)?;
    MetaMeasure::new(clouds, p.mix_weights().to_vec())
}

/// Adds seeded uniform noise in `[−amount, amount]` to every coordinate.
pub fn jitter(p: &MetaMeasure, amount: f64, seed: u64) -> Result<MetaMeasure> {
    use rand::Rng as _;
    let mut rng = rng::seeded(seed);
    let clouds = p
        .clouds()
        .iter()
        .map(|c| {
            let pts = c.points().iter().map(|x| x + amount * (2.0 * rng.random::<f64>() - 1.0)).collect();
            c.with_points(pts)
        })
        .collect::<Result<Vec<_>>>()?;
    MetaMeasure::new(clouds, p.mix_weights().to_vec())
}

/// Largest coordinate-wise relative error between two fields.
///
/// Each coordinate is compared relative to the larger of the two magnitudes,
/// floored at `1e-6 ×` the reference's largest entry so near-zero
/// components do not dominate.
pub fn compare_fields(analytic: &Displacement, reference: &Displacement, dim: usize, h: f64) -> GradCheckReport {
    let floor = (reference.max_abs() * 1e-6).max(f64::MIN_POSITIVE);
    let mut worst = (0.0, (0, 0, 0));
    for (c, (a, b)) in analytic.fields().iter().zip(reference.fields()).enumerate() {
        for (idx, (x, y)) in a.iter().zip(b).enumerate() {
            let denom = x.abs().max(y.abs()).max(floor);
            let err = (x - y).abs() / denom;
            if !(err <= worst.0) {
                worst = (err, (c, idx / dim, idx % dim));
            }
        }
    }
    GradCheckReport { max_relative_error: worst.0, worst_coordinate: worst.1, step_h: h }
}

/// Checks the WoW gradient against `factor ×` the Euclidean finite-difference
/// gradient of `½MMD²` under the frozen projections.
pub fn gradcheck_with_factor(
    p: &MetaMeasure,
    q: &MetaMeasure,
    spec: &KernelSpec,
    proj: &ProjectionSet,
    h: f64,
    factor: f64,
) -> Result<GradCheckReport> {
    let analytic = wow_gradient(p, q, spec, proj)?;
    let fd = fd_gradient(|m| Ok(mmd_half(m, q, spec, proj)?.mmd_squared_half), p, h)?;
    let scaled = Displacement::new(fd.into_fields().into_iter().map(|f| f.into_iter().map(|x| factor * x).collect()).collect());
    Ok(compare_fields(&analytic, &scaled, p.dim(), h))
}

/// [`gradcheck_with_factor`] with the `n·C` rescaling for uniform mixtures of `n`-point clouds.
pub fn gradcheck(p: &MetaMeasure, q: &MetaMeasure, spec: &KernelSpec, proj: &ProjectionSet, h: f64) -> Result<GradCheckReport> {
    let n = p
        .common_uniform_size()
        .filter(|_| p.has_uniform_mix())
        .ok_or_else(|| Error::InvalidWeights("gradcheck needs a uniform mixture of equal-size clouds".into()))?;
    gradcheck_with_factor(p, q, spec, proj, h, (n * p.num_clouds()) as f64)
}

/// Calls `visit` with every permutation of `0..n` (Heap's algorithm).
fn for_each_permutation(n: usize, mut visit: impl FnMut(&[usize])) {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut stack = vec![0usize; n];
    visit(&perm);
    let mut i = 1;
    while i < n {
        if stack[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(stack[i], i);
            }
            visit(&perm);
            stack[i] += 1;
            i = 1;
        } else {
            stack[i] = 0;
            i += 1;
        }
    }
}

/// Minimum over all matchings of `(1/n) Σ (aᵢ − b_π(i))²`.
pub fn brute_force_w2_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
    }
    if a.len() > BRUTE_FORCE_MAX_POINTS {
        return Err(Error::SizeLimitExceeded { size: a.len(), limit: BRUTE_FORCE_MAX_POINTS });
    }
    let n = a.len();
    let mut best = f64::INFINITY;
    for_each_permutation(n, |perm| {
        let mut s = 0.0;
        for i in 0..n {
            let t = a[i] - b[perm[i]];
            s += t * t;
        }
        best = best.min(s / n as f64);
    });
    Ok(best)
}

fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..x.len() {
        let t = x[k] - y[k];
        s += t * t;
    }
    s
}

/// Exact W₂² by enumerating all `n!` point matchings (n ≤ 8).
pub fn brute_force_w2(mu: &PointCloud, nu: &PointCloud) -> Result<f64> {
    if mu.len() != nu.len() {
        return Err(Error::SizeMismatch { left: mu.len(), right: nu.len() });
    }
    if mu.len() > BRUTE_FORCE_MAX_POINTS {
        return Err(Error::SizeLimitExceeded { size: mu.len(), limit: BRUTE_FORCE_MAX_POINTS });
    }
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch { expected: mu.dim(), found: nu.dim() });
    }
    let n = mu.len();
    let mut best = f64::INFINITY;
    for_each_permutation(n, |perm| {
        let mut s = 0.0;
        for i in 0..n {
            s += sq_dist(mu.point(i), nu.point(perm[i]));
        }
        best = best.min(s / n as f64);
    });
    Ok(best)
}

/// Squared WoW distance by enumerating all `C!` cloud matchings over
/// brute-force inner costs (uniform mixtures, C ≤ 5).
pub fn brute_force_wow(p: &MetaMeasure, q: &MetaMeasure) -> Result<f64> {
    let c = p.num_clouds();
    if q.num_clouds() != c {
        return Err(Error::SizeMismatch { left: c, right: q.num_clouds() });
    }
    if c > BRUTE_FORCE_MAX_CLOUDS {
        return Err(Error::SizeLimitExceeded { size: c, limit: BRUTE_FORCE_MAX_CLOUDS });
    }
    let mut inner = vec![0.0; c * c];
    for i in 0..c {
        for j in 0..c {
            inner[i * c + j] = brute_force_w2(p.cloud(i), q.cloud(j))?;
        }
    }
    let mut best = f64::INFINITY;
    for_each_permutation(c, |perm| {
        let mut s = 0.0;
        for i in 0..c {
            s += inner[i * c + perm[i]];
        }
        best = best.min(s / c as f64);
    });
    Ok(best)
}
