//! Hamiltonian Monte Carlo and two derivative-free baselines (random-walk
//! Metropolis-Hastings and the t-walk), with the integrators, target models
//! and chain diagnostics needed to compare them.
//!
//! ```
//! use hmc_core::models::Gamma51;
//! use hmc_core::samplers::{hmc_sample, HmcConfig};
//!
//! let trace = hmc_sample(&Gamma51, &HmcConfig::new(0.09, 47, 200, 1), &[5.0]).unwrap();
//! assert_eq!(trace.len(), 200);
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod dynamics;
pub mod harness;
pub mod models;
pub mod samplers;

pub use diagnostics::{DiagnosticsError, DiagnosticsReport};
pub use dynamics::{DynamicsError, Integrator, MassMatrix, PhaseState};
pub use harness::{ExperimentSpec, HarnessError, SamplerKind, Setting};
pub use models::{model_by_name, ModelError, TargetModel};
pub use samplers::{SamplerError, Trace};
