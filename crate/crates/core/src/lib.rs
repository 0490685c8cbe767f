//! Transient step-response shaping for nonlinear SISO plants.
//!
//! A plant `ẋ = f(x, u), y = h(x)` is driven through a feedforward path `α·r`
//! plus an integral path `λ·∫(r − y)`. At steady state the residual area
//! `e_r = ∫(r − y) dt` is pinned to `r(k − α)/λ`, where `1/k` is the plant's
//! DC gain. This crate provides:
//!
//! * [`integrator`]: fixed RK4 and adaptive Dormand–Prince 4(5) with dense output
//!   onto a uniform reporting grid and divergence detection.
//! * [`plants`]: the plant catalog (cubic, affine first order, saturated
//!   mass-spring-damper, linear) and user-defined plants.
//! * [`compensator`]: the augmented closed-loop `[x; u]` system.
//! * [`metrics`]: area decomposition, residual integral, settling detection,
//!   the steady-state identity check and a storage state-of-charge view.
//! * [`stability`]: sufficient and linearized integral-gain bounds and an
//!   empirical bisected stability boundary.
//!
//! The crate is `no_std` and only needs `alloc`. IO, configuration and the
//! command line live in the `transhape` crate.
#![no_std]
#![warn(missing_docs)]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod compensator;
mod error;
pub mod integrator;
pub mod metrics;
pub mod plants;
pub mod stability;

pub use compensator::{close_loop, open_loop, ClosedLoop, CompensatorConfig, StepSignal};
pub use error::{Error, Result};
pub use integrator::{detect_divergence, integrate, Method, SolverConfig, SolverStats, StateHistory, Trajectory};
pub use metrics::{AreaReport, Lemma1Record, SettleCriteria, Settling, SocTrace, Verdict};
pub use plants::{Plant, PlantModel, SaturatedStiffness};
pub use stability::{ClassKPair, EmpiricalBoundary, LyapunovConstants, SigmaCertificate, StabilityReport};
