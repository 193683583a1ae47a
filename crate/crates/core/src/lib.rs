//! Wasserstein-over-Wasserstein (WoW) gradient flows on mixtures of point clouds.
//!
//! A labeled dataset is a [`MetaMeasure`]: a weighted mixture of empirical
//! measures, one [`PointCloud`] per class. This crate minimizes the
//! half squared MMD between two such mixtures, with kernels between clouds
//! built on the Monte-Carlo sliced-Wasserstein distance, by moving every
//! particle along the WoW gradient field.
//!
//! Besides the flow itself it provides exact discrete tools (inner W₂ by
//! optimal assignment, the top-level WoW distance, McCann geodesics and label
//! alignment), a mirror-Sinkhorn reweighting scheme that lets mixture weights
//! evolve, and brute-force / finite-difference oracles.
//!
//! The crate is `no_std` with `alloc`. The `parallel` feature turns on
//! per-cloud parallelism through rayon with results identical to the
//! sequential build.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

mod error;
mod par;

pub mod flow;
pub mod functional;
pub mod kernels;
pub mod matching;
pub mod measures;
pub mod oracles;
pub mod reweighting;
pub mod rng;
pub mod sliced;
pub mod synth;

pub use error::{Error, Result};
pub use flow::{flow_step, run_flow, FlowConfig, FlowState, Snapshot};
pub use functional::{mmd_half, wow_gradient, ObjectiveValue};
pub use kernels::{kernel_eval, kernel_grad, KernelSpec, KernelVariant};
pub use matching::{align_labels, w2_exact, wow_distance, wow_geodesic, Assignment, CostMatrix};
pub use measures::{displace, new_meta_measure, Displacement, MetaMeasure, PointCloud};
pub use reweighting::{run_reweighted_flow, ReweightConfig};
pub use sliced::{sample_projections, ProjectionSet};
