//! Generalized (Vietoris-style) inexact iterations `x_n = B_{n-1}(x_n)` for
//! fixed-point equations `x = A(x)`, together with the scalar majorant
//! machinery that bounds and certifies the convergence rate of each run.
//!
//! The crate is organized bottom-up:
//!
//! * [`space`]: vectors in `R^d` with a selectable norm, operators and
//!   finite-difference Gateaux derivatives.
//! * [`expr`]: a small arithmetic language used to define operators and
//!   kernels in problem files.
//! * [`schemes`]: contraction, Newton, modified Newton and custom schemes
//!   with perturbation injection, trace recording and the per-step
//!   inequality audit.
//! * [`majorant`]: the recurrence `r_n = eta r_{n-1}^2 + lambda_{n-1}
//!   r_{n-1} + rho_{n-1}`, its coefficient extraction, convergence
//!   certificates and a-posteriori tail bounds.
//! * [`greens`]: integral reformulation `x(t) = int G(t,s) A(x(s)) ds` on
//!   a 1-D grid, Picard iteration and pointwise bound propagation.
//! * [`rootfind`]: `P(x) = 0` rewritten as `x = x - Gamma(x, P(x))`.
//! * [`estimate`]: sampled Lipschitz constants when none are known.
//! * [`cli`]: problem files, the built-in catalog and the `nkv` commands.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

#[cfg(feature = "cli")]
pub mod cli;
pub mod estimate;
pub mod expr;
pub mod greens;
pub mod linalg;
pub mod majorant;
pub mod rootfind;
pub mod schemes;
pub mod seq;
pub mod space;

pub use majorant::{Certificate, MajorantParams, ProblemConstants, Regime};
pub use schemes::{IterationTrace, PerturbationPlan, SchemeKind, StopReason, StopRule};
pub use seq::Sequence;
pub use space::{BallDomain, NormKind, OperatorError, OperatorSpec, Vector};
