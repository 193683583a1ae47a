//! Forward-Euler WoW gradient descent with optional momentum.
//!
//! Each step moves every particle of every cloud:
//!
//! ```text
//! v ← ∇F(ℙ)(μᶜ)(xᵢᶜ) + m·v
//! xᵢᶜ ← xᵢᶜ − τ·v
//! ```
//!
//! Mixture weights and cloud sizes never change along the flow.

use alloc::format;
use alloc::vec::Vec;

use crate::functional;
use crate::kernels::KernelSpec;
use crate::measures::{displace, Displacement, MetaMeasure};
use crate::rng::derive_seed;
use crate::sliced::{sample_projections, ProjectionSet};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FlowConfig {
    pub step_size: f64,
    /// Heavy-ball coefficient in `[0, 1)`.
    pub momentum: f64,
    pub iterations: usize,
    pub n_projections: usize,
    pub seed: u64,
    /// Draw fresh directions at every iteration from `(seed, iteration)`.
    pub resample_projections: bool,
    pub snapshot_every: usize,
    pub kernel: KernelSpec,
}

impl FlowConfig {
    pub fn new(kernel: KernelSpec, step_size: f64, iterations: usize, n_projections: usize, seed: u64) -> Self {
        Self {
            step_size,
            momentum: 0.0,
            iterations,
            n_projections,
            seed,
            resample_projections: true,
            snapshot_every: 1,
            kernel,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::InvalidParameter(format!("step size must be positive, got {}", self.step_size)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidParameter(format!("momentum must lie in [0, 1), got {}", self.momentum)));
        }
        if self.n_projections == 0 {
            return Err(Error::InvalidParameter("need at least one projection".into()));
        }
        if self.snapshot_every == 0 {
            return Err(Error::InvalidParameter("snapshot_every must be at least 1".into()));
        }
        self.kernel.validate()
    }

    /// Directions used at `iteration`.
    pub fn projections_for(&self, iteration: usize, dim: usize) -> Result<ProjectionSet> {
        let seed = if self.resample_projections { derive_seed(self.seed, iteration as u64) } else { self.seed };
        sample_projections(self.n_projections, dim, seed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub measure: MetaMeasure,
    pub velocity: Displacement,
    pub iteration: usize,
    /// `(iteration, ½MMD²)` pairs, iterations strictly increasing.
    pub objective_trace: Vec<(usize, f64)>,
    /// Largest `|row sum − α_i|` over every mirror-Sinkhorn step run so far.
    pub marginal_error: f64,
}

impl FlowState {
    pub fn new(measure: MetaMeasure) -> Self {
        let velocity = Displacement::zeros_like(&measure);
        Self { measure, velocity, iteration: 0, objective_trace: Vec::new(), marginal_error: 0.0 }
    }
}

/// What a snapshot consumer sees.
#[derive(Debug, Clone, Copy)]
pub struct Snapshot<'a> {
    pub iteration: usize,
    pub measure: &'a MetaMeasure,
    pub objective: f64,
}

pub(crate) fn check_compatible(state: &FlowState, q: &MetaMeasure) -> Result<()> {
    if state.measure.dim() != q.dim() {
        return Err(Error::DimensionMismatch { expected: state.measure.dim(), found: q.dim() });
    }
    if !state.velocity.is_compatible_with(&state.measure) {
        return Err(Error::ShapeMismatch("velocity does not match the measure".into()));
    }
    Ok(())
}

/// One step from `state`; returns the new state and the objective at the old one
/// when it was needed for the trace.
pub(crate) fn step_inner(
    mut state: FlowState,
    q: &MetaMeasure,
    cfg: &FlowConfig,
    proj: &ProjectionSet,
    want_value: bool,
) -> Result<(FlowState, Option<f64>)> {
    let k = state.iteration;
    let (value, grad) = functional::evaluate(&state.measure, q, &cfg.kernel, proj, want_value, true)?;
    let grad = grad.expect("gradient requested");
    if !grad.is_finite() {
        return Err(Error::NonFiniteGradient { iteration: k });
    }
    state.velocity.scale_add(cfg.momentum, &grad)?;
    state.measure = displace(&state.measure, &state.velocity, -cfg.step_size)
        .map_err(|_| Error::NonFiniteGradient { iteration: k })?;
    let value = value.map(|v| v.mmd_squared_half);
    if let Some(v) = value {
        if k.is_multiple_of(cfg.snapshot_every) {
            state.objective_trace.push((k, v));
        }
    }
    state.iteration = k + 1;
    Ok((state, value))
}

/// One forward step: `v ← ∇F + m·v`, `x ← x − τ·v`.
///
/// The objective at the incoming state is appended to the trace when its
/// iteration is a multiple of `snapshot_every`.
pub fn flow_step(state: FlowState, q: &MetaMeasure, cfg: &FlowConfig) -> Result<FlowState> {
    cfg.validate()?;
    check_compatible(&state, q)?;
    let proj = cfg.projections_for(state.iteration, q.dim())?;
    let want = state.iteration.is_multiple_of(cfg.snapshot_every);
    Ok(step_inner(state, q, cfg, &proj, want)?.0)
}

/// Runs `cfg.iterations` steps from `p0`.
///
/// `sink` is called at iteration 0, at every multiple of `snapshot_every`
/// and at the final iteration. Output depends only on `(p0, q, cfg)`.
pub fn run_flow<S>(p0: MetaMeasure, q: &MetaMeasure, cfg: &FlowConfig, mut sink: S) -> Result<FlowState>
where
    S: FnMut(&Snapshot<'_>) -> Result<()>,
{
    cfg.validate()?;
    let mut state = FlowState::new(p0);
    check_compatible(&state, q)?;
    let dim = q.dim();
    let fixed = if cfg.resample_projections { None } else { Some(cfg.projections_for(0, dim)?) };
    for k in 0..cfg.iterations {
        let proj = match &fixed {
            Some(p) => p.clone(),
            None => cfg.projections_for(k, dim)?,
        };
        let emit = k % cfg.snapshot_every == 0;
        let before = emit.then(|| state.measure.clone());
        let (next, value) = step_inner(state, q, cfg, &proj, emit)?;
        if let (Some(measure), Some(objective)) = (before.as_ref(), value) {
            sink(&Snapshot { iteration: k, measure, objective })?;
        }
        state = next;
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
