//! Riemannian optimization through trivializations.
//!
//! The crate implements adaptive dynamic trivializations (ATRIV-K): adaptive
//! optimizers such as Adam run on a fixed tangent space `T_{p0}M`, and the
//! adapted direction is carried to the current trivialization point by the
//! adjoint of `d(exp_{p0}⁻¹ ∘ exp_{p_i})`, which maps steepest-descent
//! directions to steepest-descent directions. Around that sit the baselines
//! (DTRIV-K, RGD, transported and full-history Riemannian momentum), the
//! manifolds SO(n), Sⁿ⁻¹ and ℝⁿ, and the matrix functions they need.

pub mod engine;
pub mod error;
pub mod expm;
pub mod manifold;
pub mod matrix;
pub mod optimizer;
pub mod problems;
pub mod rng;
pub mod selftest;

pub use engine::{
    atriv_run, dtriv_run, pullback_gradient, rgd_momentum_full_history_run,
    rgd_momentum_transport_run, rgd_run, static_run, steepest_transport, theorem_step_size,
    Period, Problem, Retraction, RunOptions, RunRecord, TraceRow,
};
pub use error::{Error, Result};
pub use expm::{dexp, dexp_adjoint, dexp_inverse, expm, logm_principal, ExpmReport, LogmReport};
pub use manifold::{ManifoldKind, ManifoldPoint, TangentVector};
pub use matrix::{DenseMatrix, SkewMatrix};
pub use optimizer::{OptimizerRule, OptimizerState};
pub use problems::{build_problem, ProblemName};
pub use rng::RngSeed;
