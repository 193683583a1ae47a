//! Empirical measures on ℝᵈ and finite mixtures of them.

use alloc::format;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Weights within this distance of summing to one are accepted untouched.
const SUM_EXACT_TOL: f64 = 1e-12;
/// Weights within this distance of summing to one are renormalized; beyond it they are rejected.
const SUM_RENORM_TOL: f64 = 1e-9;

/// An empirical measure: `n` points in ℝᵈ (row-major) with non-negative weights.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<f64>,
    weights: Vec<f64>,
    dim: usize,
}

impl PointCloud {
    /// Builds a cloud from row-major coordinates and explicit weights.
    pub fn new(points: Vec<f64>, dim: usize, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidCloud("dimension must be at least 1".into()));
        }
        if points.is_empty() || !points.len().is_multiple_of(dim) {
            return Err(Error::InvalidCloud(format!(
                "{} coordinates do not form a non-empty set of {}-dimensional points",
                points.len(),
                dim
            )));
        }
        let n = points.len() / dim;
        if weights.len() != n {
            return Err(Error::LengthMismatch { left: n, right: weights.len() });
        }
        if let Some(pos) = points.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidCloud(format!(
                "non-finite coordinate at point {}, axis {}",
                pos / dim,
                pos % dim
            )));
        }
        let weights = normalize_weights(weights)?;
        Ok(Self { points, weights, dim })
    }

    /// Builds a uniformly weighted cloud from row-major coordinates.
    pub fn uniform(points: Vec<f64>, dim: usize) -> Result<Self> {
        let n = if dim == 0 { 0 } else { points.len() / dim };
        let w = if n == 0 { 0.0 } else { 1.0 / n as f64 };
        Self::new(points, dim, alloc::vec![w; n])
    }

    /// Builds a uniformly weighted cloud from a list of points.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut points = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::InvalidCloud(format!(
                    "row {} has {} coordinates, expected {}",
                    i,
                    r.len(),
                    dim
                )));
            }
            points.extend_from_slice(r);
        }
        Self::uniform(points, dim)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Row-major `n × d` coordinates.
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// True when every weight is exactly `1/n`.
    pub fn is_uniform(&self) -> bool {
        let w = 1.0 / self.len() as f64;
        self.weights.iter().all(|&x| x == w)
    }

    /// Replaces the coordinates, keeping the weights. The new buffer must have the same shape.
    pub fn with_points(&self, points: Vec<f64>) -> Result<Self> {
        if points.len() != self.points.len() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} coordinates, got {}",
                self.points.len(),
                points.len()
            )));
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidCloud("non-finite coordinate".into()));
        }
        Ok(Self { points, weights: self.weights.clone(), dim: self.dim })
    }
}

/// A weighted finite mixture of point clouds sharing one ambient dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaMeasure {
    clouds: Vec<PointCloud>,
    mix_weights: Vec<f64>,
}

/// Validates `clouds` and `mix_weights` into a [`MetaMeasure`].
///
/// Weights whose sum is off by at most `1e-9` are renormalized; larger
/// deviations and negative entries are rejected.
pub fn new_meta_measure(clouds: Vec<PointCloud>, mix_weights: Vec<f64>) -> Result<MetaMeasure> {
    MetaMeasure::new(clouds, mix_weights)
}

impl MetaMeasure {
    pub fn new(clouds: Vec<PointCloud>, mix_weights: Vec<f64>) -> Result<Self> {
        let Some(first) = clouds.first() else {
            return Err(Error::InvalidCloud("a mixture needs at least one cloud".into()));
        };
        let dim = first.dim();
        if let Some(bad) = clouds.iter().find(|c| c.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: bad.dim() });
        }
        if mix_weights.len() != clouds.len() {
            return Err(Error::LengthMismatch { left: clouds.len(), right: mix_weights.len() });
        }
        let mix_weights = normalize_weights(mix_weights)?;
        Ok(Self { clouds, mix_weights })
    }

    /// Uniform mixture `(1/C) Σ δ_{μᶜ}`.
    pub fn uniform(clouds: Vec<PointCloud>) -> Result<Self> {
        let c = clouds.len().max(1);
        let w = alloc::vec![1.0 / c as f64; clouds.len()];
        Self::new(clouds, w)
    }

    pub fn num_clouds(&self) -> usize {
        self.clouds.len()
    }

    pub fn dim(&self) -> usize {
        self.clouds[0].dim()
    }

    pub fn clouds(&self) -> &[PointCloud] {
        &self.clouds
    }

    pub fn cloud(&self, c: usize) -> &PointCloud {
        &self.clouds[c]
    }

    pub fn mix_weights(&self) -> &[f64] {
        &self.mix_weights
    }

    pub fn total_points(&self) -> usize {
        self.clouds.iter().map(PointCloud::len).sum()
    }

    /// True when every cloud has `n` uniformly weighted points, for a common `n`.
    pub fn common_uniform_size(&self) -> Option<usize> {
        let n = self.clouds[0].len();
        self.clouds.iter().all(|c| c.len() == n && c.is_uniform()).then_some(n)
    }

    /// True when the mixture weights are exactly `1/C`.
    pub fn has_uniform_mix(&self) -> bool {
        let w = 1.0 / self.num_clouds() as f64;
        self.mix_weights.iter().all(|&x| x == w)
    }

    /// Same clouds, new mixture weights (validated like [`MetaMeasure::new`]).
    pub fn with_mix_weights(&self, mix_weights: Vec<f64>) -> Result<Self> {
        Self::new(self.clouds.clone(), mix_weights)
    }

    /// Re-runs validation. A validated measure comes back unchanged.
    pub fn revalidated(&self) -> Result<Self> {
        let clouds = self
            .clouds
            .iter()
            .map(|c| PointCloud::new(c.points.clone(), c.dim, c.weights.clone()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(clouds, self.mix_weights.clone())
    }

    pub fn into_parts(self) -> (Vec<PointCloud>, Vec<f64>) {
        (self.clouds, self.mix_weights)
    }
}

fn normalize_weights(mut w: Vec<f64>) -> Result<Vec<f64>> {
    if let Some(i) = w.iter().position(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::InvalidWeights(format!("weight {} is {}", i, w[i])));
    }
    let sum: f64 = w.iter().sum();
    let dev = (sum - 1.0).abs();
    if dev > SUM_RENORM_TOL {
        return Err(Error::InvalidWeights(format!("weights sum to {sum}")));
    }
    if dev > SUM_EXACT_TOL {
        w.iter_mut().for_each(|x| *x /= sum);
    }
    Ok(w)
}

/// A per-particle vector field over a [`MetaMeasure`]: one `n × d` buffer per cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct Displacement {
    fields: Vec<Vec<f64>>,
}

impl Displacement {
    /// Wraps per-cloud buffers; shape compatibility is checked when applied.
    pub fn new(fields: Vec<Vec<f64>>) -> Self {
        Self { fields }
    }

    pub fn zeros_like(p: &MetaMeasure) -> Self {
        Self { fields: p.clouds().iter().map(|c| alloc::vec![0.0; c.points().len()]).collect() }
    }

    pub fn fields(&self) -> &[Vec<f64>] {
        &self.fields
    }

    pub fn field(&self, c: usize) -> &[f64] {
        &self.fields[c]
    }

    pub fn field_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.fields[c]
    }

    pub fn into_fields(self) -> Vec<Vec<f64>> {
        self.fields
    }

    pub fn is_finite(&self) -> bool {
        self.fields.iter().flatten().all(|x| x.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.fields.iter().flatten().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn is_compatible_with(&self, p: &MetaMeasure) -> bool {
        self.fields.len() == p.num_clouds()
            && self.fields.iter().zip(p.clouds()).all(|(f, c)| f.len() == c.points().len())
    }

    /// `self ← a·self + other`, used by the momentum recurrence.
    pub fn scale_add(&mut self, a: f64, other: &Displacement) -> Result<()> {
        if self.fields.len() != other.fields.len()
            || self.fields.iter().zip(&other.fields).any(|(x, y)| x.len() != y.len())
        {
            return Err(Error::ShapeMismatch("displacements have different shapes".into()));
        }
        for (x, y) in self.fields.iter_mut().zip(&other.fields) {
            for (xi, yi) in x.iter_mut().zip(y) {
                *xi = a * *xi + yi;
            }
        }
        Ok(())
    }
}

/// Moves every particle: `x ← x + scale·v`. Weights are carried over untouched.
pub fn displace(p: &MetaMeasure, v: &Displacement, scale: f64) -> Result<MetaMeasure> {
    if !v.is_compatible_with(p) {
        return Err(Error::ShapeMismatch(format!(
            "displacement with {} fields does not fit a mixture of {} clouds",
            v.fields.len(),
            p.num_clouds()
        )));
    }
    if !v.is_finite() {
        return Err(Error::ShapeMismatch("displacement has non-finite entries".into()));
    }
    let clouds = p
        .clouds()
        .iter()
        .zip(v.fields())
        .map(|(cloud, field)| {
            let pts = cloud.points().iter().zip(field).map(|(x, dx)| x + scale * dx).collect();
            cloud.with_points(pts)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetaMeasure { clouds, mix_weights: p.mix_weights.clone() })
}
