//! Self-triggered tracking of the minimizer of a time-varying, strongly
//! convex objective.
//!
//! The continuous-time Newton tracking flow `ẋ = −∇ₓₓf⁻¹(α∇ₓf + ∇ₓₜf)` is
//! discretized by holding `ẋ` constant between samples. Each sample computes,
//! from known bounds on the objective's higher derivatives, a polynomial
//! upper bound on the Lyapunov derivative `V̇` and schedules the next sample
//! at its zero crossing (descent phase) or where its integral reaches the
//! target level `ε` (hold phase).
//!
//! Modules:
//! * [`objective`] and [`dynamics`]: the objective oracle, the tracking
//!   direction and the Lyapunov function.
//! * [`trigger`]: triggering polynomials and their root solves.
//! * [`solver`]: the self-triggered loop and the periodic Euler baseline.
//! * [`problems`]: built-in test problems, bound estimation and a reference
//!   optimum.
//! * [`validation`]: dense-grid checks of the guarantees.
//! * [`cli`]: the `trigopt` experiment runner.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod objective;
pub mod poly;
pub mod problems;
pub mod solver;
pub mod trigger;
pub mod validation;

pub use dynamics::{lyapunov, lyapunov_rate, newton_tracking_direction};
pub use error::{Error, Result};
pub use objective::{DerivativeBounds, FnObjective, Objective, State};
pub use problems::{paper_problem_1d, quadratic_tracking, DomainBox, ProblemSpec};
pub use solver::{run_periodic, run_self_triggered, Phase, SampleRecord, SolverConfig, Trajectory};
pub use trigger::Strategy;
