//! The Newton tracking vector field and its Lyapunov instrumentation.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::objective::{Objective, State};

/// Smallest admissible pivot of the Hessian factorization.
pub const MIN_PIVOT: f64 = 1e-12;

/// Gradient and tracking direction evaluated at one sampling instant.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionSample {
    pub grad: DVector<f64>,
    pub direction: DVector<f64>,
}

impl DirectionSample {
    /// `½‖∇ₓf‖²` at the sampled point.
    pub fn lyapunov(&self) -> f64 {
        0.5 * self.grad.norm_squared()
    }
}

/// Solves `H h = rhs` for a symmetric positive definite `H` by Cholesky.
pub(crate) fn solve_spd(hess: DMatrix<f64>, rhs: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
    let chol = hess.cholesky().ok_or(Error::SingularHessian { t, min_pivot: f64::NAN })?;
    let min_pivot = chol.l_dirty().diagonal().iter().map(|d| d * d).fold(f64::INFINITY, f64::min);
    if !(min_pivot >= MIN_PIVOT) {
        return Err(Error::SingularHessian { t, min_pivot });
    }
    Ok(chol.solve(rhs))
}

/// Evaluates the gradient and the tracking direction
/// `h = −H⁻¹(α∇ₓf + ∇ₓₜf)` with a single gradient query.
pub fn direction_sample<O: Objective + ?Sized>(oracle: &O, s: &State, alpha: f64) -> Result<DirectionSample> {
    check_dim(oracle, s)?;
    let grad = oracle.grad_x(&s.x, s.t);
    let rhs = &grad * alpha + oracle.grad_xt(&s.x, s.t);
    let direction = -solve_spd(oracle.hess_xx(&s.x, s.t), &rhs, s.t)?;
    Ok(DirectionSample { grad, direction })
}

/// The prediction-correction direction `−∇ₓₓf⁻¹ (α∇ₓf + ∇ₓₜf)`.
///
/// The Hessian is factorized, never inverted. Fails with
/// [`Error::SingularHessian`] when the factorization breaks down, which means
/// the objective is not strongly convex at `s`.
pub fn newton_tracking_direction<O: Objective + ?Sized>(oracle: &O, s: &State, alpha: f64) -> Result<DVector<f64>> {
    direction_sample(oracle, s, alpha).map(|d| d.direction)
}

/// `V(x, t) = ½‖∇ₓf(x, t)‖²`.
pub fn lyapunov<O: Objective + ?Sized>(oracle: &O, s: &State) -> f64 {
    0.5 * oracle.grad_x(&s.x, s.t).norm_squared()
}

/// Time derivative of `V` along a path moving with velocity `xdot` through `s`:
/// `gᵀ(∇ₓₓf·ẋ + ∇ₓₜf)`.
pub fn lyapunov_rate<O: Objective + ?Sized>(oracle: &O, s: &State, xdot: &DVector<f64>) -> f64 {
    oracle.grad_x(&s.x, s.t).dot(&gradient_rate(oracle, s, xdot))
}

/// `ġ = ∇ₓₓf·ẋ + ∇ₓₜf`, the gradient's rate of change along `xdot`.
pub fn gradient_rate<O: Objective + ?Sized>(oracle: &O, s: &State, xdot: &DVector<f64>) -> DVector<f64> {
    oracle.hess_xx(&s.x, s.t) * xdot + oracle.grad_xt(&s.x, s.t)
}

fn check_dim<O: Objective + ?Sized>(oracle: &O, s: &State) -> Result<()> {
    if oracle.dim() != s.dim() {
        return Err(Error::DimensionMismatch { expected: oracle.dim(), got: s.dim() });
    }
    Ok(())
}
