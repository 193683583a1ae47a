//! Half squared MMD between mixtures of point clouds and its WoW gradient.
//!
//! For `ℙ = Σ wᶜ δ_{μᶜ}` and `ℚ = Σ vᵏ δ_{νᵏ}`,
//!
//! ```text
//! F(ℙ) = ½ ΣΣ wᶜwᶜ' K(μᶜ,μᶜ')  −  ΣΣ wᶜvᵏ K(μᶜ,νᵏ)  +  ½ ΣΣ vᵏvᵏ' K(νᵏ,νᵏ')
//!        └── interaction ──┘    └──── potential ───┘    └──── constant ────┘
//! ```
//!
//! and the WoW gradient at cloud `μᶜ` is
//! `Σ_c' wᶜ' ∇K(μᶜ,μᶜ') − Σ_k vᵏ ∇K(μᶜ,νᵏ)`, a per-particle field.
//! For uniform mixtures of `n`-point clouds it equals `n·C` times the
//! Euclidean gradient of `F` in the particle coordinates.
//!
//! One [`ProjectionSet`] is shared by every pair so the objective is a
//! deterministic function and the gradient is its exact derivative.

use alloc::vec;
use alloc::vec::Vec;

use crate::kernels::KernelSpec;
use crate::measures::{Displacement, MetaMeasure, PointCloud};
use crate::par::map_indexed;
use crate::sliced::{self, ProjectionSet, SortedProjections};
use crate::{Error, Result};

/// `F(ℙ)` with its decomposition; `mmd_squared_half` is the sum of the three parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveValue {
    pub mmd_squared_half: f64,
    pub potential_part: f64,
    pub interaction_part: f64,
    pub constant_part: f64,
}

pub(crate) fn check_clouds(clouds: &[PointCloud], dim: usize) -> Result<()> {
    for c in clouds {
        if c.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: c.dim() });
        }
        if !c.is_uniform() {
            return Err(Error::InvalidWeights("flow-path clouds must be uniformly weighted".into()));
        }
    }
    Ok(())
}

pub(crate) fn project_all(clouds: &[PointCloud], proj: &ProjectionSet) -> Vec<SortedProjections> {
    map_indexed(clouds.len(), |c| sliced::project_sorted(&clouds[c], proj))
}

pub(crate) fn project_values_all(clouds: &[PointCloud], proj: &ProjectionSet) -> Vec<SortedProjections> {
    map_indexed(clouds.len(), |c| sliced::project_sorted_values(&clouds[c], proj))
}

/// Base statistics (SW₂², or SW₁ for Laplace) for every pair, row-major `|a| × |b|`.
pub(crate) fn stat_matrix(
    spec: &KernelSpec,
    a: &[SortedProjections],
    b: &[SortedProjections],
    lines: usize,
) -> Vec<f64> {
    let rows = map_indexed(a.len(), |i| {
        b.iter()
            .map(|bj| {
                if spec.uses_sw1() {
                    sliced::sliced_cost(&a[i], bj, lines, sliced::line_w1)
                } else {
                    sliced::sliced_cost(&a[i], bj, lines, sliced::line_w2)
                }
            })
            .collect::<Vec<_>>()
    });
    rows.into_iter().flatten().collect()
}

/// SW₂² for every pair, row-major `|a| × |b|`.
pub(crate) fn sw2_matrix(a: &[SortedProjections], b: &[SortedProjections], lines: usize) -> Vec<f64> {
    let rows = map_indexed(a.len(), |i| {
        b.iter().map(|bj| sliced::sliced_cost(&a[i], bj, lines, sliced::line_w2)).collect::<Vec<_>>()
    });
    rows.into_iter().flatten().collect()
}

fn weighted_sum(stats: &[f64], wa: &[f64], wb: &[f64], spec: &KernelSpec) -> f64 {
    let mut acc = 0.0;
    for (i, x) in wa.iter().enumerate() {
        for (j, y) in wb.iter().enumerate() {
            acc += x * y * spec.value_from_stat(stats[i * wb.len() + j]);
        }
    }
    acc
}

/// Shared evaluation of the objective and/or the WoW gradient.
pub(crate) fn evaluate(
    p: &MetaMeasure,
    q: &MetaMeasure,
    spec: &KernelSpec,
    proj: &ProjectionSet,
    want_value: bool,
    want_grad: bool,
) -> Result<(Option<ObjectiveValue>, Option<Displacement>)> {
    let dim = p.dim();
    if q.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: q.dim() });
    }
    if proj.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: proj.dim() });
    }
    check_clouds(p.clouds(), dim)?;
    check_clouds(q.clouds(), dim)?;

    let lines = proj.len();
    let sp = if want_grad { project_all(p.clouds(), proj) } else { project_values_all(p.clouds(), proj) };
    let sq = project_values_all(q.clouds(), proj);
    let (cp, cq) = (sp.len(), sq.len());
    let wp = p.mix_weights();
    let wq = q.mix_weights();

    let pp = stat_matrix(spec, &sp, &sp, lines);
    let pq = stat_matrix(spec, &sp, &sq, lines);

    let value = want_value.then(|| {
        let qq = stat_matrix(spec, &sq, &sq, lines);
        let interaction_part = 0.5 * weighted_sum(&pp, wp, wp, spec);
        let potential_part = -weighted_sum(&pq, wp, wq, spec);
        let constant_part = 0.5 * weighted_sum(&qq, wq, wq, spec);
        ObjectiveValue {
            mmd_squared_half: interaction_part + potential_part + constant_part,
            potential_part,
            interaction_part,
            constant_part,
        }
    });

    let grad = want_grad.then(|| {
        let fields = map_indexed(cp, |a| {
            // Self pair contributes nothing: identical lines give a zero potential.
            let own: Vec<(usize, f64)> = (0..cp)
                .filter(|&b| b != a)
                .map(|b| (b, wp[b] * spec.grad_factor(pp[a * cp + b])))
                .filter(|&(_, f)| f != 0.0)
                .collect();
            let target: Vec<(usize, f64)> = (0..cq)
                .map(|k| (k, -wq[k] * spec.grad_factor(pq[a * cq + k])))
                .filter(|&(_, f)| f != 0.0)
                .collect();
            let mut field = vec![0.0; p.cloud(a).points().len()];
            let line_coef = if spec.uses_sw1() { sliced::line_sign_coef } else { sliced::line_potential_coef };
            sliced::scatter_lines(&sp[a], proj, &mut field, |l, coef| {
                let mine = sp[a].line(l);
                for &(b, f) in &own {
                    line_coef(mine, sp[b].line(l), f, coef);
                }
                for &(k, f) in &target {
                    line_coef(mine, sq[k].line(l), f, coef);
                }
            });
            field
        });
        Displacement::new(fields)
    });

    Ok((value, grad))
}

/// `½ MMD²(ℙ, ℚ)` with its potential / interaction / constant decomposition.
pub fn mmd_half(p: &MetaMeasure, q: &MetaMeasure, spec: &KernelSpec, proj: &ProjectionSet) -> Result<ObjectiveValue> {
    let (v, _) = evaluate(p, q, spec, proj, true, false)?;
    Ok(v.expect("value requested"))
}

/// WoW gradient of `½ MMD²(·, ℚ)` at `ℙ`, one field per cloud of `ℙ`.
pub fn wow_gradient(p: &MetaMeasure, q: &MetaMeasure, spec: &KernelSpec, proj: &ProjectionSet) -> Result<Displacement> {
    let (_, g) = evaluate(p, q, spec, proj, false, true)?;
    Ok(g.expect("gradient requested"))
}

/// Objective and gradient from one set of sorted projections.
pub fn mmd_half_and_gradient(
    p: &MetaMeasure,
    q: &MetaMeasure,
    spec: &KernelSpec,
    proj: &ProjectionSet,
) -> Result<(ObjectiveValue, Displacement)> {
    let (v, g) = evaluate(p, q, spec, proj, true, true)?;
    Ok((v.expect("value requested"), g.expect("gradient requested")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::kernel_grad;
    use crate::sliced::{sample_projections, sw2_squared};

    fn blob(center: [f64; 2], n: usize, phase: f64) -> PointCloud {
        let pts: Vec<f64> = (0..n)
            .flat_map(|i| {
                let a = phase + i as f64 * 2.1;
                [center[0] + 0.5 * libm::cos(a) + 0.01 * i as f64, center[1] + 0.4 * libm::sin(1.3 * a)]
            })
            .collect();
        PointCloud::uniform(pts, 2).unwrap()
    }

    fn specs() -> [KernelSpec; 4] {
        [
            KernelSpec::riesz(1.0).unwrap(),
            KernelSpec::gaussian(0.5).unwrap(),
            KernelSpec::laplace(0.7).unwrap(),
            KernelSpec::imq(1.0).unwrap(),
        ]
    }

    #[test]
    fn zero_at_target() {
        let q = MetaMeasure::uniform(vec![blob([0.0, 0.0], 5, 0.1), blob([2.0, 1.0], 5, 0.7)]).unwrap();
        let proj = sample_projections(32, 2, 4).unwrap();
        for spec in specs() {
            let (v, g) = mmd_half_and_gradient(&q, &q, &spec, &proj).unwrap();
            assert!(v.mmd_squared_half.abs() < 1e-10, "{spec}");
            assert!(g.max_abs() < 1e-12, "{spec}");
        }
    }

    #[test]
    fn single_cloud_gaussian_closed_form() {
        let h = 0.8;
        let spec = KernelSpec::gaussian(h).unwrap();
        let mu = blob([0.0, 0.0], 6, 0.2);
        let nu = blob([1.0, -0.5], 6, 1.1);
        let proj = sample_projections(25, 2, 8).unwrap();
        let s = sw2_squared(&mu, &nu, &proj).unwrap();
        let p = MetaMeasure::uniform(vec![mu]).unwrap();
        let q = MetaMeasure::uniform(vec![nu]).unwrap();
        let v = mmd_half(&p, &q, &spec, &proj).unwrap();
        assert!((v.mmd_squared_half - (1.0 - libm::exp(-s / (2.0 * h)))).abs() < 1e-14);
        let sum = v.potential_part + v.interaction_part + v.constant_part;
        assert!((v.mmd_squared_half - sum).abs() < 1e-10);
    }

    #[test]
    fn cloud_order_does_not_matter() {
        let a = blob([0.0, 0.0], 4, 0.1);
        let b = blob([2.0, 1.0], 4, 0.5);
        let c = blob([-1.0, 2.0], 4, 0.9);
        let q = MetaMeasure::uniform(vec![blob([1.0, 1.0], 4, 0.3), blob([0.0, -1.0], 4, 0.2)]).unwrap();
        let proj = sample_projections(30, 2, 1).unwrap();
        let p1 = MetaMeasure::uniform(vec![a.clone(), b.clone(), c.clone()]).unwrap();
        let p2 = MetaMeasure::uniform(vec![c, a, b]).unwrap();
        for spec in specs() {
            let v1 = mmd_half(&p1, &q, &spec, &proj).unwrap().mmd_squared_half;
            let v2 = mmd_half(&p2, &q, &spec, &proj).unwrap().mmd_squared_half;
            assert!((v1 - v2).abs() < 1e-12);
        }
    }

    #[test]
    fn single_cloud_riesz_is_pure_attraction() {
        let spec = KernelSpec::riesz(1.0).unwrap();
        let mu = blob([0.0, 0.0], 5, 0.2);
        let nu = blob([1.5, 0.5], 5, 0.9);
        let proj = sample_projections(20, 2, 3).unwrap();
        let p = MetaMeasure::uniform(vec![mu.clone()]).unwrap();
        let q = MetaMeasure::uniform(vec![nu.clone()]).unwrap();
        let g = wow_gradient(&p, &q, &spec, &proj).unwrap();
        let self_term = kernel_grad(&spec, &mu, &mu, &proj).unwrap();
        let target = kernel_grad(&spec, &mu, &nu, &proj).unwrap();
        assert!(self_term.iter().all(|&x| x == 0.0));
        for (i, gi) in g.field(0).iter().enumerate() {
            assert!((gi - (self_term[i] - target[i])).abs() < 1e-14);
        }
    }

    #[test]
    fn joint_translation_leaves_gradient() {
        let shift = |c: &PointCloud| {
            let pts = c.points().chunks(2).flat_map(|r| [r[0] + 3.0, r[1] - 2.0]).collect();
            PointCloud::uniform(pts, 2).unwrap()
        };
        let pc = vec![blob([0.0, 0.0], 5, 0.1), blob([2.0, 1.0], 5, 0.4)];
        let qc = vec![blob([1.0, 1.0], 5, 0.6), blob([-1.0, 0.5], 5, 0.8)];
        let proj = sample_projections(24, 2, 6).unwrap();
        let p = MetaMeasure::uniform(pc.clone()).unwrap();
        let q = MetaMeasure::uniform(qc.clone()).unwrap();
        let pt = MetaMeasure::uniform(pc.iter().map(shift).collect()).unwrap();
        let qt = MetaMeasure::uniform(qc.iter().map(shift).collect()).unwrap();
        for spec in specs() {
            let g = wow_gradient(&p, &q, &spec, &proj).unwrap();
            let gt = wow_gradient(&pt, &qt, &spec, &proj).unwrap();
            for (a, b) in g.fields().iter().flatten().zip(gt.fields().iter().flatten()) {
                assert!((a - b).abs() < 1e-10, "{spec}");
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let p = MetaMeasure::uniform(vec![blob([0.0, 0.0], 3, 0.0)]).unwrap();
        let q = MetaMeasure::uniform(vec![PointCloud::from_rows(&[[0.0, 0.0, 0.0]]).unwrap()]).unwrap();
        let proj = sample_projections(4, 2, 0).unwrap();
        let spec = KernelSpec::riesz(1.0).unwrap();
        assert!(matches!(mmd_half(&p, &q, &spec, &proj), Err(Error::DimensionMismatch { .. })));
    }
}
