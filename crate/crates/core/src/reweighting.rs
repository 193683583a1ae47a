//! Flow with evolving mixture weights.
//!
//! Forward steps only move particles, so a source with more clouds than the
//! target can never shed a surplus cloud. Every `snapshot_every` steps a
//! reweighting phase optimizes a coupling between the current clouds and
//! themselves,
//!
//! ```text
//! min_{Γ ≥ 0, Γ1 = α}  ⟨C, Γ⟩ + τ · MMD²(Σⱼ βⱼ δ_{zⱼ}, ℚ),   β = Γᵀ1,
//! ```
//!
//! with `C` the pairwise SW₂² between clouds under frozen projections (or
//! exact W₂² on request). It is solved by mirror-Sinkhorn half steps
//! `Γ ← diag(α ⊘ Γ'1) Γ'` with `Γ' = Γ ⊙ exp(−η ∇f(Γ))`, started from the
//! identity coupling `diag(α)` (off-diagonal entries enter at the floor). The
//! new weights are `β`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::flow::{self, FlowConfig, FlowState, Snapshot};
use crate::functional::{self, check_clouds, project_values_all, stat_matrix, sw2_matrix};
use crate::kernels::KernelSpec;
use crate::matching;
use crate::measures::{MetaMeasure, PointCloud};
use crate::sliced::ProjectionSet;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReweightConfig {
    /// Mirror step size.
    pub eta: f64,
    /// Weight of the MMD² term against the transport cost.
    pub tau_penalty: f64,
    /// Mirror-Sinkhorn half steps per phase.
    pub inner_steps: usize,
    /// Plan entries are floored here before each multiplicative update.
    pub floor: f64,
    /// Use exact W₂² instead of SW₂² as the cost between clouds.
    pub exact_cost: bool,
}

impl Default for ReweightConfig {
    fn default() -> Self {
        Self { eta: 0.003, tau_penalty: 1000.0, inner_steps: 2000, floor: 1e-30, exact_cost: false }
    }
}

/// Weights below this at the end of a run count as killed clouds.
pub const KILLED_WEIGHT: f64 = 1e-12;

impl ReweightConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidParameter(format!("eta must be positive, got {}", self.eta)));
        }
        if !(self.tau_penalty > 0.0 && self.tau_penalty.is_finite()) {
            return Err(Error::InvalidParameter(format!("tau_penalty must be positive, got {}", self.tau_penalty)));
        }
        if self.inner_steps == 0 {
            return Err(Error::InvalidParameter("inner_steps must be at least 1".into()));
        }
        if !(self.floor > 0.0) {
            return Err(Error::InvalidParameter("floor must be positive".into()));
        }
        Ok(())
    }
}

fn kernel_matrix(spec: &KernelSpec, a: &[PointCloud], b: &[PointCloud], proj: &ProjectionSet) -> Result<Vec<f64>> {
    let dim = proj.dim();
    check_clouds(a, dim)?;
    check_clouds(b, dim)?;
    let sa = project_values_all(a, proj);
    let sb = project_values_all(b, proj);
    Ok(stat_matrix(spec, &sa, &sb, proj.len()).into_iter().map(|s| spec.value_from_stat(s)).collect())
}

/// `2 (K_zz β − K_zν w)`: gradient of `β ↦ MMD²(Σ βⱼ δ_{zⱼ}, ℚ)`.
fn weight_grad_from(kzz: &[f64], kzq: &[f64], beta: &[f64], wq: &[f64]) -> Vec<f64> {
    let c = beta.len();
    let cq = wq.len();
    (0..c)
        .map(|j| {
            let mut own = 0.0;
            for k in 0..c {
                own += kzz[j * c + k] * beta[k];
            }
            let mut target = 0.0;
            for k in 0..cq {
                target += kzq[j * cq + k] * wq[k];
            }
            2.0 * (own - target)
        })
        .collect()
}

/// Gradient in `β` of `MMD²(Σ βⱼ δ_{zⱼ}, ℚ)` over the support clouds `z`.
pub fn mmd_weight_grad(
    beta: &[f64],
    supports: &[PointCloud],
    q: &MetaMeasure,
    spec: &KernelSpec,
    proj: &ProjectionSet,
) -> Result<Vec<f64>> {
    if beta.len() != supports.len() {
        return Err(Error::LengthMismatch { left: beta.len(), right: supports.len() });
    }
    if let Some(s) = supports.first() {
        if s.dim() != q.dim() {
            return Err(Error::DimensionMismatch { expected: q.dim(), found: s.dim() });
        }
    }
    let kzz = kernel_matrix(spec, supports, supports, proj)?;
    let kzq = kernel_matrix(spec, supports, q.clouds(), proj)?;
    Ok(weight_grad_from(&kzz, &kzq, beta, q.mix_weights()))
}

/// `MMD²(Σ βⱼ δ_{zⱼ}, ℚ)`, the objective differentiated by [`mmd_weight_grad`].
pub fn mmd_squared_weighted(
    beta: &[f64],
    supports: &[PointCloud],
    q: &MetaMeasure,
    spec: &KernelSpec,
    proj: &ProjectionSet,
) -> Result<f64> {
    let p = MetaMeasure::new(supports.to_vec(), beta.to_vec())?;
    Ok(2.0 * functional::mmd_half(&p, q, spec, proj)?.mmd_squared_half)
}

/// One mirror-Sinkhorn half step on a row-major `C × C` plan:
/// multiplicative update by `exp(−η ∇f)`, then exact row rescaling to `alpha`.
///
/// Entries are floored at `floor` first; the update is evaluated in the log
/// domain with a per-row shift.
pub fn mirror_sinkhorn_step(plan: &[f64], alpha: &[f64], grad_f: &[f64], eta: f64, floor: f64) -> Result<Vec<f64>> {
    let rows = alpha.len();
    if rows == 0 || !plan.len().is_multiple_of(rows) || grad_f.len() != plan.len() {
        return Err(Error::ShapeMismatch(format!(
            "plan of {} entries, gradient of {}, {} rows",
            plan.len(),
            grad_f.len(),
            rows
        )));
    }
    let cols = plan.len() / rows;
    let mut out = vec![0.0; plan.len()];
    let mut logits = vec![0.0; cols];
    for i in 0..rows {
        let row = &plan[i * cols..(i + 1) * cols];
        let g = &grad_f[i * cols..(i + 1) * cols];
        for j in 0..cols {
            logits[j] = libm::log(row[j].max(floor)) - eta * g[j];
        }
        let shift = logits.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        let dst = &mut out[i * cols..(i + 1) * cols];
        let mut sum = 0.0;
        for j in 0..cols {
            dst[j] = libm::exp(logits[j] - shift);
            sum += dst[j];
        }
        if !(sum > 0.0 && sum.is_finite()) {
            return Err(Error::DegenerateRow { row: i });
        }
        let scale = alpha[i] / sum;
        dst.iter_mut().for_each(|x| *x *= scale);
    }
    Ok(out)
}

fn column_sums(plan: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut sums = vec![0.0; cols];
    for i in 0..rows {
        for j in 0..cols {
            sums[j] += plan[i * cols + j];
        }
    }
    sums
}

/// Result of one reweighting phase.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseOutcome {
    /// Column sums of the final plan, renormalized to sum to one.
    pub weights: Vec<f64>,
    /// Final row-major `C × C` plan.
    pub plan: Vec<f64>,
    /// Largest `|row sum − α_i|` seen after any half step.
    pub marginal_error: f64,
}

/// Runs one reweighting phase from the identity coupling `diag(α)`.
pub fn reweight_phase(
    p: &MetaMeasure,
    q: &MetaMeasure,
    spec: &KernelSpec,
    proj: &ProjectionSet,
    rcfg: &ReweightConfig,
) -> Result<PhaseOutcome> {
    rcfg.validate()?;
    let c = p.num_clouds();
    let alpha = p.mix_weights();
    let costs = if rcfg.exact_cost {
        matching::cost_matrix(p, p)?.entries().to_vec()
    } else {
        let sp = project_values_all(p.clouds(), proj);
        sw2_matrix(&sp, &sp, proj.len())
    };
    let kzz = kernel_matrix(spec, p.clouds(), p.clouds(), proj)?;
    let kzq = kernel_matrix(spec, p.clouds(), q.clouds(), proj)?;

    let mut plan: Vec<f64> = (0..c * c).map(|e| if e / c == e % c { alpha[e / c] } else { 0.0 }).collect();
    let mut grad = vec![0.0; c * c];
    let mut marginal_error = 0.0f64;
    for _ in 0..rcfg.inner_steps {
        let beta = column_sums(&plan, c, c);
        let g = weight_grad_from(&kzz, &kzq, &beta, q.mix_weights());
        for e in 0..c * c {
            grad[e] = costs[e] + rcfg.tau_penalty * g[e % c];
        }
        plan = mirror_sinkhorn_step(&plan, alpha, &grad, rcfg.eta, rcfg.floor)?;
        for (i, a) in alpha.iter().enumerate() {
            let row: f64 = plan[i * c..(i + 1) * c].iter().sum();
            marginal_error = marginal_error.max((row - a).abs());
        }
    }
    let beta = column_sums(&plan, c, c);
    let total: f64 = beta.iter().sum();
    let weights = beta.into_iter().map(|b| b / total).collect();
    Ok(PhaseOutcome { weights, plan, marginal_error })
}

/// Alternates forward flow steps (weights frozen) with reweighting phases
/// every `cfg.snapshot_every` steps. Snapshots carry the current weights.
pub fn run_reweighted_flow<S>(
    p0: MetaMeasure,
    q: &MetaMeasure,
    cfg: &FlowConfig,
    rcfg: &ReweightConfig,
    mut sink: S,
) -> Result<FlowState>
where
    S: FnMut(&Snapshot<'_>) -> Result<()>,
{
    cfg.validate()?;
    rcfg.validate()?;
    let mut state = FlowState::new(p0);
    flow::check_compatible(&state, q)?;
    let dim = q.dim();
    let fixed = if cfg.resample_projections { None } else { Some(cfg.projections_for(0, dim)?) };
    for k in 0..cfg.iterations {
        let proj = match &fixed {
            Some(p) => p.clone(),
            None => cfg.projections_for(k, dim)?,
        };
        let emit = k % cfg.snapshot_every == 0;
        let before = emit.then(|| state.measure.clone());
        let (next, value) = flow::step_inner(state, q, cfg, &proj, emit)?;
        if let (Some(measure), Some(objective)) = (before.as_ref(), value) {
            sink(&Snapshot { iteration: k, measure, objective })?;
        }
        state = next;
        if (k + 1) % cfg.snapshot_every == 0 {
            let outcome = reweight_phase(&state.measure, q, &cfg.kernel, &proj, rcfg).map_err(|e| match e {
                Error::DegenerateRow { row } => Error::DegenerateRowAt { iteration: k, row },
                other => other,
            })?;
            state.marginal_error = state.marginal_error.max(outcome.marginal_error);
            state.measure = state.measure.with_mix_weights(outcome.weights)?;
        }
    }
    let proj = match fixed {
        Some(p) => p,
        None => cfg.projections_for(cfg.iterations, dim)?,
    };
    let objective = functional::mmd_half(&state.measure, q, &cfg.kernel, &proj)?.mmd_squared_half;
    state.objective_trace.push((cfg.iterations, objective));
    sink(&Snapshot { iteration: cfg.iterations, measure: &state.measure, objective })?;
    Ok(state)
}
