//! One-dimensional optimal transport and Monte-Carlo sliced Wasserstein.
//!
//! Every cloud is projected on `L` unit directions and each projection is
//! sorted once. Along a line, transport between two uniform empirical
//! measures is the monotone rearrangement: for sizes `n` and `m` the unit
//! interval is cut at the breakpoints `k/n` and `j/m` and each piece pairs
//! one order statistic of each side. Breakpoints are handled in integer
//! units of `1/(n·m)`, so the equal-size case reduces exactly to rank
//! matching.
//!
//! Ties in projected values are broken by point index. Gradients at ties are
//! a subgradient choice.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::measures::PointCloud;
use crate::rng;
use crate::{Error, Result};

/// `L` unit directions in ℝᵈ, row-major, plus the seed that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionSet {
    directions: Vec<f64>,
    dim: usize,
    seed: u64,
}

impl ProjectionSet {
    /// Wraps explicit directions. Each row must have unit norm within `1e-12`.
    pub fn from_directions(directions: Vec<f64>, dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 || directions.is_empty() || !directions.len().is_multiple_of(dim) {
            return Err(Error::InvalidParameter(format!(
                "{} values do not form directions in dimension {}",
                directions.len(),
                dim
            )));
        }
        for (l, row) in directions.chunks_exact(dim).enumerate() {
            let norm = libm::sqrt(row.iter().map(|x| x * x).sum::<f64>());
            if !((norm - 1.0).abs() <= 1e-12) {
                return Err(Error::InvalidParameter(format!("direction {l} has norm {norm}")));
            }
        }
        Ok(Self { directions, dim, seed })
    }

    pub fn len(&self) -> usize {
        self.directions.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn direction(&self, l: usize) -> &[f64] {
        &self.directions[l * self.dim..(l + 1) * self.dim]
    }

    pub fn directions(&self) -> &[f64] {
        &self.directions
    }
}

/// Draws `count` i.i.d. directions uniformly on the sphere `S^{d-1}` by
/// normalizing standard Gaussian vectors. Same `(count, dim, seed)`, same bits.
pub fn sample_projections(count: usize, dim: usize, seed: u64) -> Result<ProjectionSet> {
    if count == 0 || dim == 0 {
        return Err(Error::InvalidParameter(format!(
            "need at least one projection in dimension >= 1 (got L={count}, d={dim})"
        )));
    }
    let mut rng = rng::seeded(seed);
    let mut directions = Vec::with_capacity(count * dim);
    let mut row = vec![0.0; dim];
    for _ in 0..count {
        loop {
            for x in row.iter_mut() {
                *x = rng::standard_normal(&mut rng);
            }
            let norm = libm::sqrt(row.iter().map(|x| x * x).sum::<f64>());
            if norm > 1e-150 {
                directions.extend(row.iter().map(|x| x / norm));
                break;
            }
        }
    }
    Ok(ProjectionSet { directions, dim, seed })
}

/// Projections of one cloud on every direction, sorted per direction.
///
/// `sorted[l*n + k]` is the k-th smallest projected value along direction `l`
/// and `order[l*n + k]` is the index of the point holding it.
#[derive(Debug, Clone)]
pub struct SortedProjections {
    n: usize,
    sorted: Vec<f64>,
    order: Vec<u32>,
}

impl SortedProjections {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn line(&self, l: usize) -> &[f64] {
        &self.sorted[l * self.n..(l + 1) * self.n]
    }

    /// Point indices in sorted order; empty for [`project_sorted_values`].
    pub fn line_order(&self, l: usize) -> &[u32] {
        &self.order[l * self.n..(l + 1) * self.n]
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn order_key(x: f64) -> u64 {
    let bits = x.to_bits();
    if bits >> 63 == 1 {
        !bits
    } else {
        bits | (1 << 63)
    }
}

fn from_order_key(k: u64) -> f64 {
    f64::from_bits(if k >> 63 == 1 { k & !(1 << 63) } else { !k })
}

/// Projects and sorts `cloud` along every direction of `proj`.
pub fn project_sorted(cloud: &PointCloud, proj: &ProjectionSet) -> SortedProjections {
    let n = cloud.len();
    let lines = proj.len();
    let mut sorted = Vec::with_capacity(n * lines);
    let mut order = Vec::with_capacity(n * lines);
    // (total-order key of the value, index) packed so integer order is
    // value order with ties broken by index.
    let mut keyed: Vec<u128> = Vec::with_capacity(n);
    for l in 0..lines {
        let theta = proj.direction(l);
        keyed.clear();
        keyed.extend((0..n).map(|i| ((order_key(dot(cloud.point(i), theta)) as u128) << 32) | i as u128));
        keyed.sort_unstable();
        sorted.extend(keyed.iter().map(|&k| from_order_key((k >> 32) as u64)));
        order.extend(keyed.iter().map(|&k| k as u32));
    }
    SortedProjections { n, sorted, order }
}

/// [`project_sorted`] without the permutations, for clouds that only enter
/// through their sorted values.
pub fn project_sorted_values(cloud: &PointCloud, proj: &ProjectionSet) -> SortedProjections {
    let n = cloud.len();
    let lines = proj.len();
    let mut sorted = Vec::with_capacity(n * lines);
    let mut keys: Vec<u64> = Vec::with_capacity(n);
    for l in 0..lines {
        let theta = proj.direction(l);
        keys.clear();
        keys.extend((0..n).map(|i| order_key(dot(cloud.point(i), theta))));
        keys.sort_unstable();
        sorted.extend(keys.iter().map(|&k| from_order_key(k)));
    }
    SortedProjections { n, sorted, order: Vec::new() }
}

/// Walks the common refinement of the quantile partitions of two sorted
/// samples, calling `f(k, j, len)` for each piece where sample `a`'s k-th and
/// sample `b`'s j-th order statistics are paired over a length of `len/(n·m)`.
#[inline]
fn for_each_piece(n: usize, m: usize, mut f: impl FnMut(usize, usize, f64)) {
    let (mut k, mut j, mut pos) = (0usize, 0usize, 0usize);
    while k < n && j < m {
        let end_a = (k + 1) * m;
        let end_b = (j + 1) * n;
        let end = end_a.min(end_b);
        f(k, j, (end - pos) as f64);
        pos = end;
        if end == end_a {
            k += 1;
        }
        if end == end_b {
            j += 1;
        }
    }
}

/// Exact W₂² between uniform empirical measures on ℝ given sorted samples.
pub(crate) fn line_w2(a: &[f64], b: &[f64]) -> f64 {
    let (n, m) = (a.len(), b.len());
    if n == m {
        let mut acc = 0.0;
        for (x, y) in a.iter().zip(b) {
            let d = x - y;
            acc += d * d;
        }
        return acc / n as f64;
    }
    let mut acc = 0.0;
    for_each_piece(n, m, |k, j, len| {
        let d = a[k] - b[j];
        acc += len * d * d;
    });
    acc / (n * m) as f64
}

/// Exact W₁ between uniform empirical measures on ℝ given sorted samples.
pub(crate) fn line_w1(a: &[f64], b: &[f64]) -> f64 {
    let (n, m) = (a.len(), b.len());
    if n == m {
        let mut acc = 0.0;
        for (x, y) in a.iter().zip(b) {
            acc += (x - y).abs();
        }
        return acc / n as f64;
    }
    let mut acc = 0.0;
    for_each_piece(n, m, |k, j, len| acc += len * (a[k] - b[j]).abs());
    acc / (n * m) as f64
}

/// Adds `scale · ψ'(a_(k))` to `out[k]`, where `ψ'` is the derivative of the
/// Kantorovich potential from `a` to `b`: `a_(k)` minus the mean of `b`'s
/// quantile function over `a_(k)`'s quantile interval.
pub(crate) fn line_potential_coef(a: &[f64], b: &[f64], scale: f64, out: &mut [f64]) {
    let (n, m) = (a.len(), b.len());
    if n == m {
        for k in 0..n {
            out[k] += scale * (a[k] - b[k]);
        }
        return;
    }
    let inv_m = 1.0 / m as f64;
    let mut mean_b = 0.0;
    let mut cur = 0;
    for_each_piece(n, m, |k, j, len| {
        if k != cur {
            out[cur] += scale * (a[cur] - mean_b * inv_m);
            mean_b = 0.0;
            cur = k;
        }
        mean_b += len * b[j];
    });
    out[cur] += scale * (a[cur] - mean_b * inv_m);
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Adds `scale ·` (derivative of W₁ in `a_(k)`, times n) to `out[k]`, with sign(0) = 0.
pub(crate) fn line_sign_coef(a: &[f64], b: &[f64], scale: f64, out: &mut [f64]) {
    let (n, m) = (a.len(), b.len());
    if n == m {
        for k in 0..n {
            out[k] += scale * sign(a[k] - b[k]);
        }
        return;
    }
    let s = scale / m as f64;
    for_each_piece(n, m, |k, j, len| out[k] += s * len * sign(a[k] - b[j]));
}

/// Squared 2-Wasserstein distance between two equal-size uniform samples on ℝ.
pub fn w2_squared_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_unstable_by(f64::total_cmp);
    b.sort_unstable_by(f64::total_cmp);
    Ok(line_w2(&a, &b))
}

/// For each `a_i` of rank `k` (1-based, ties by index) returns `b`'s
/// empirical quantile at level `k/n`, i.e. `b_(⌈k·m/n⌉)`.
pub fn quantile_match(a: &[f64], b: &[f64]) -> Vec<f64> {
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return Vec::new();
    }
    let mut ranks: Vec<usize> = (0..n).collect();
    ranks.sort_by(|&i, &j| a[i].total_cmp(&a[j]));
    let mut b = b.to_vec();
    b.sort_unstable_by(f64::total_cmp);
    let mut out = vec![0.0; n];
    for (k0, &i) in ranks.iter().enumerate() {
        let k = k0 + 1;
        let idx = (k * m).div_ceil(n);
        out[i] = b[idx - 1];
    }
    out
}

pub(crate) fn check_pair(mu: &PointCloud, nu: &PointCloud, proj: &ProjectionSet) -> Result<()> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch { expected: mu.dim(), found: nu.dim() });
    }
    if proj.dim() != mu.dim() {
        return Err(Error::DimensionMismatch { expected: mu.dim(), found: proj.dim() });
    }
    if !mu.is_uniform() || !nu.is_uniform() {
        return Err(Error::InvalidWeights("sliced distances need uniformly weighted clouds".into()));
    }
    Ok(())
}

/// Mean over directions of a per-line cost.
pub(crate) fn sliced_cost(
    a: &SortedProjections,
    b: &SortedProjections,
    lines: usize,
    cost: impl Fn(&[f64], &[f64]) -> f64,
) -> f64 {
    let mut acc = 0.0;
    for l in 0..lines {
        acc += cost(a.line(l), b.line(l));
    }
    acc / lines as f64
}

/// Accumulates `(1/L) Σ_ℓ coef_ℓ(x_i) θ_ℓ` into `grad` (row-major n×d), where
/// `fill(l, coefs)` writes per-rank coefficients for line `l`.
pub(crate) fn scatter_lines(
    a: &SortedProjections,
    proj: &ProjectionSet,
    grad: &mut [f64],
    mut fill: impl FnMut(usize, &mut [f64]),
) {
    let n = a.len();
    let d = proj.dim();
    let lines = proj.len();
    let mut coef = vec![0.0; n];
    for l in 0..lines {
        coef.iter_mut().for_each(|c| *c = 0.0);
        fill(l, &mut coef);
        let theta = proj.direction(l);
        for (k, &i) in a.line_order(l).iter().enumerate() {
            let c = coef[k];
            if c != 0.0 {
                let row = &mut grad[i as usize * d..(i as usize + 1) * d];
                for (g, t) in row.iter_mut().zip(theta) {
                    *g += c * t;
                }
            }
        }
    }
    let inv = 1.0 / lines as f64;
    grad.iter_mut().for_each(|g| *g *= inv);
}

/// Monte-Carlo SW₂²: mean over directions of the 1D W₂² between projections.
pub fn sw2_squared(mu: &PointCloud, nu: &PointCloud, proj: &ProjectionSet) -> Result<f64> {
    check_pair(mu, nu, proj)?;
    let a = project_sorted_values(mu, proj);
    let b = project_sorted_values(nu, proj);
    Ok(sliced_cost(&a, &b, proj.len(), line_w2))
}

/// Per-point Wasserstein gradient of `½ SW₂²(·, ν)` at `μ` under the given
/// projections: `(1/L) Σ_ℓ ψ'_ℓ(⟨xᵢ,θ_ℓ⟩) θ_ℓ`, returned row-major `n × d`.
pub fn sw_potential_grad(mu: &PointCloud, nu: &PointCloud, proj: &ProjectionSet) -> Result<Vec<f64>> {
    check_pair(mu, nu, proj)?;
    let a = project_sorted(mu, proj);
    let b = project_sorted(nu, proj);
    let mut grad = vec![0.0; mu.points().len()];
    scatter_lines(&a, proj, &mut grad, |l, coef| line_potential_coef(a.line(l), b.line(l), 1.0, coef));
    Ok(grad)
}

/// Monte-Carlo SW₁ and its per-point Wasserstein gradient in the first argument.
pub fn sw1_and_sign_grad(
    mu: &PointCloud,
    nu: &PointCloud,
    proj: &ProjectionSet,
) -> Result<(f64, Vec<f64>)> {
    check_pair(mu, nu, proj)?;
    let a = project_sorted(mu, proj);
    let b = project_sorted(nu, proj);
    let value = sliced_cost(&a, &b, proj.len(), line_w1);
    let mut grad = vec![0.0; mu.points().len()];
    scatter_lines(&a, proj, &mut grad, |l, coef| line_sign_coef(a.line(l), b.line(l), 1.0, coef));
    Ok((value, grad))
}
