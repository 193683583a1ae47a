//! Kernels between point clouds built on sliced Wasserstein distances.
//!
//! | variant          | K(μ,ν)                 |
//! |------------------|------------------------|
//! | `riesz:r=..`     | −SW₂(μ,ν)^r, r ∈ (0,2) |
//! | `gaussian:h=..`  | exp(−SW₂²(μ,ν)/(2h))   |
//! | `laplace:h=..`   | exp(−SW₁(μ,ν)/h)       |
//! | `imq:c=..`       | (c + SW₂²(μ,ν))^(−1/2) |
//!
//! The Gaussian bandwidth follows the `2h` convention, so its Wasserstein
//! gradient is `−(1/h)·K·G` with `G` the gradient of `½SW₂²`.
//!
//! Every gradient has the form `factor(stat) · G`, where `stat` is SW₂² (SW₁
//! for Laplace) and `G` is the matching per-point gradient from [`crate::sliced`].

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::measures::PointCloud;
use crate::sliced::{self, ProjectionSet};
use crate::{Error, Result};

pub const DEFAULT_EPSILON_SINGULARITY: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelVariant {
    Riesz { r: f64 },
    Gaussian { h: f64 },
    Laplace { h: f64 },
    Imq { c: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub variant: KernelVariant,
    /// Below this SW₂ the Riesz gradient is taken to be zero.
    pub epsilon_singularity: f64,
}

impl KernelSpec {
    pub fn new(variant: KernelVariant) -> Result<Self> {
        let spec = Self { variant, epsilon_singularity: DEFAULT_EPSILON_SINGULARITY };
        spec.validate()?;
        Ok(spec)
    }

    pub fn riesz(r: f64) -> Result<Self> {
        Self::new(KernelVariant::Riesz { r })
    }

    pub fn gaussian(h: f64) -> Result<Self> {
        Self::new(KernelVariant::Gaussian { h })
    }

    pub fn laplace(h: f64) -> Result<Self> {
        Self::new(KernelVariant::Laplace { h })
    }

    pub fn imq(c: f64) -> Result<Self> {
        Self::new(KernelVariant::Imq { c })
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.variant {
            KernelVariant::Riesz { r } => r > 0.0 && r < 2.0,
            KernelVariant::Gaussian { h } | KernelVariant::Laplace { h } => h > 0.0 && h.is_finite(),
            KernelVariant::Imq { c } => c > 0.0 && c.is_finite(),
        };
        if !ok {
            return Err(Error::InvalidParameter(format!("kernel parameter out of range: {self}")));
        }
        if !(self.epsilon_singularity > 0.0) {
            return Err(Error::InvalidParameter("epsilon_singularity must be positive".into()));
        }
        Ok(())
    }

    /// Whether the kernel is a function of SW₁ (Laplace) rather than SW₂².
    pub fn uses_sw1(&self) -> bool {
        matches!(self.variant, KernelVariant::Laplace { .. })
    }

    /// Kernel value from its base statistic (SW₂², or SW₁ for Laplace).
    pub fn value_from_stat(&self, s: f64) -> f64 {
        match self.variant {
            KernelVariant::Riesz { r } => -libm::pow(libm::sqrt(s), r),
            KernelVariant::Gaussian { h } => libm::exp(-s / (2.0 * h)),
            KernelVariant::Laplace { h } => libm::exp(-s / h),
            KernelVariant::Imq { c } => 1.0 / libm::sqrt(c + s),
        }
    }

    /// Scalar multiplying the base gradient to give the kernel's Wasserstein gradient.
    pub fn grad_factor(&self, s: f64) -> f64 {
        if !s.is_finite() {
            return f64::NAN;
        }
        match self.variant {
            KernelVariant::Riesz { r } => {
                if libm::sqrt(s) < self.epsilon_singularity {
                    0.0
                } else {
                    -r * libm::pow(s, (r - 2.0) / 2.0)
                }
            }
            KernelVariant::Gaussian { h } => -libm::exp(-s / (2.0 * h)) / h,
            KernelVariant::Laplace { h } => -libm::exp(-s / h) / h,
            KernelVariant::Imq { c } => -libm::pow(c + s, -1.5),
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.variant {
            KernelVariant::Riesz { r } => write!(f, "riesz:r={r}"),
            KernelVariant::Gaussian { h } => write!(f, "gaussian:h={h}"),
            KernelVariant::Laplace { h } => write!(f, "laplace:h={h}"),
            KernelVariant::Imq { c } => write!(f, "imq:c={c}"),
        }
    }
}

impl FromStr for KernelSpec {
    type Err = Error;

    /// Parses `riesz:r=1`, `gaussian:h=0.05`, `laplace:h=0.1` or `imq:c=1`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: &str| Error::InvalidParameter(format!("kernel `{s}`: {why}"));
        let (name, param) = s.trim().split_once(':').ok_or_else(|| bad("expected name:key=value"))?;
        let (key, value) = param.split_once('=').ok_or_else(|| bad("expected key=value"))?;
        let value: f64 = value.trim().parse().map_err(|_| bad("parameter is not a number"))?;
        let variant = match (name.trim(), key.trim()) {
            ("riesz", "r") => KernelVariant::Riesz { r: value },
            ("gaussian", "h") => KernelVariant::Gaussian { h: value },
            ("laplace", "h") => KernelVariant::Laplace { h: value },
            ("imq", "c") => KernelVariant::Imq { c: value },
            _ => return Err(bad("unknown kernel; use riesz:r=, gaussian:h=, laplace:h= or imq:c=")),
        };
        KernelSpec::new(variant)
    }
}

/// Base statistic of a pair: SW₂², or SW₁ for the Laplace kernel.
fn stat(spec: &KernelSpec, mu: &PointCloud, nu: &PointCloud, proj: &ProjectionSet) -> Result<f64> {
    if spec.uses_sw1() {
        Ok(sliced::sw1_and_sign_grad(mu, nu, proj)?.0)
    } else {
        sliced::sw2_squared(mu, nu, proj)
    }
}

/// `K(μ, ν)` under the given projections.
pub fn kernel_eval(spec: &KernelSpec, mu: &PointCloud, nu: &PointCloud, proj: &ProjectionSet) -> Result<f64> {
    Ok(spec.value_from_stat(stat(spec, mu, nu, proj)?))
}

/// Per-point Wasserstein gradient of `K(·, ν)` at `μ` (row-major `n × d`).
pub fn kernel_grad(
    spec: &KernelSpec,
    mu: &PointCloud,
    nu: &PointCloud,
    proj: &ProjectionSet,
) -> Result<Vec<f64>> {
    let (s, mut g) = if spec.uses_sw1() {
        sliced::sw1_and_sign_grad(mu, nu, proj)?
    } else {
        (sliced::sw2_squared(mu, nu, proj)?, sliced::sw_potential_grad(mu, nu, proj)?)
    };
    let factor = spec.grad_factor(s);
    g.iter_mut().for_each(|x| *x *= factor);
    Ok(g)
}

/// Human-readable list of accepted kernel strings.
pub fn kernel_syntax() -> String {
    String::from("riesz:r=<0..2> | gaussian:h=<h> | laplace:h=<h> | imq:c=<c>")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sliced::sample_projections;
    use alloc::string::ToString;
    use alloc::vec;

    fn cloud(rows: &[[f64; 2]]) -> PointCloud {
        PointCloud::from_rows(rows).unwrap()
    }

    fn all_specs() -> [KernelSpec; 4] {
        [
            KernelSpec::riesz(1.0).unwrap(),
            KernelSpec::gaussian(0.5).unwrap(),
            KernelSpec::laplace(0.5).unwrap(),
            KernelSpec::imq(1.0).unwrap(),
        ]
    }

    #[test]
    fn parse_and_display() {
        for s in ["riesz:r=1", "gaussian:h=0.05", "laplace:h=0.1", "imq:c=1"] {
            let k: KernelSpec = s.parse().unwrap();
            assert_eq!(k.to_string(), s);
        }
        assert!("cauchy:h=1".parse::<KernelSpec>().is_err());
        assert!("riesz:r=2".parse::<KernelSpec>().is_err());
        assert!("gaussian:h=0".parse::<KernelSpec>().is_err());
        assert!("gaussian".parse::<KernelSpec>().is_err());
        assert!("gaussian:r=1".parse::<KernelSpec>().is_err());
    }

    #[test]
    fn identity_values() {
        let mu = cloud(&[[0.0, 1.0], [1.0, 0.0]]);
        let p = sample_projections(20, 2, 1).unwrap();
        let k = |s: KernelSpec| kernel_eval(&s, &mu, &mu, &p).unwrap();
        assert_eq!(k(KernelSpec::gaussian(0.3).unwrap()), 1.0);
        assert_eq!(k(KernelSpec::riesz(1.0).unwrap()), 0.0);
        assert_eq!(k(KernelSpec::imq(4.0).unwrap()), 0.5);
        for spec in all_specs() {
            assert!(kernel_grad(&spec, &mu, &mu, &p).unwrap().iter().all(|&g| g == 0.0));
        }
    }

    #[test]
    fn imq_on_crafted_pair() {
        // Along e1 the 1D samples {0, 1} and {√3, 1+√3} are at W₂² = 3.
        let t = libm::sqrt(3.0);
        let mu = cloud(&[[0.0, 0.0], [1.0, 5.0]]);
        let nu = cloud(&[[t, -1.0], [1.0 + t, 2.0]]);
        let p = ProjectionSet::from_directions(vec![1.0, 0.0], 2, 0).unwrap();
        let s = sliced::sw2_squared(&mu, &nu, &p).unwrap();
        assert!((s - 3.0).abs() < 1e-14);
        let v = kernel_eval(&KernelSpec::imq(1.0).unwrap(), &mu, &nu, &p).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
    }

    #[test]
    fn riesz_on_diracs_is_unit_direction() {
        let theta = [0.6, 0.8];
        let p = ProjectionSet::from_directions(theta.to_vec(), 2, 0).unwrap();
        let mu = cloud(&[[1.0, 2.0]]);
        let nu = cloud(&[[-1.0, 0.5]]);
        let g = kernel_grad(&KernelSpec::riesz(1.0).unwrap(), &mu, &nu, &p).unwrap();
        let proj = 2.0 * 0.6 + 1.5 * 0.8;
        let sqrt_s = proj;
        // −G/√s with G = proj·θ
        assert!((g[0] + proj * theta[0] / sqrt_s).abs() < 1e-15);
        assert!((g[1] + proj * theta[1] / sqrt_s).abs() < 1e-15);
        assert!((libm::sqrt(g[0] * g[0] + g[1] * g[1]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn value_ranges_and_symmetry() {
        let mu = cloud(&[[0.0, 1.0], [2.0, -1.0], [0.3, 0.3]]);
        let nu = cloud(&[[1.0, 1.0], [-2.0, 0.5], [0.0, 4.0]]);
        let p = sample_projections(40, 2, 2).unwrap();
        for spec in all_specs() {
            let a = kernel_eval(&spec, &mu, &nu, &p).unwrap();
            let b = kernel_eval(&spec, &nu, &mu, &p).unwrap();
            assert_eq!(a, b);
            match spec.variant {
                KernelVariant::Gaussian { .. } | KernelVariant::Laplace { .. } => assert!(a > 0.0 && a <= 1.0),
                KernelVariant::Imq { c } => assert!(a > 0.0 && a <= 1.0 / libm::sqrt(c)),
                KernelVariant::Riesz { .. } => assert!(a <= 0.0),
            }
        }
    }

    #[test]
    fn grad_matches_finite_differences() {
        let mu = cloud(&[[0.1, 1.3], [2.2, -1.1], [0.35, 0.4], [-0.8, 0.9]]);
        let nu = cloud(&[[1.0, 1.2], [-2.0, 0.55], [0.05, 3.0], [0.7, -0.6]]);
        let p = sample_projections(16, 2, 3).unwrap();
        let h = 1e-5;
        for spec in all_specs() {
            let g = kernel_grad(&spec, &mu, &nu, &p).unwrap();
            let n = mu.len() as f64;
            for idx in 0..mu.points().len() {
                let bump = |delta: f64| {
                    let mut pts = mu.points().to_vec();
                    pts[idx] += delta;
                    kernel_eval(&spec, &mu.with_points(pts).unwrap(), &nu, &p).unwrap()
                };
                // Wasserstein gradient = n × Euclidean gradient for uniform clouds.
                let fd = n * (bump(h) - bump(-h)) / (2.0 * h);
                let tol = if spec.uses_sw1() { 1e-4 } else { 1e-5 };
                let err = (fd - g[idx]).abs() / g[idx].abs().max(1e-3);
                assert!(err < tol, "{spec}: coord {idx}: fd {fd} vs {}", g[idx]);
            }
        }
    }
}
