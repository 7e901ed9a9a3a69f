//! Time-varying objectives and the constants that bound their derivatives.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A time-varying objective `f(x, t)` together with the analytic derivatives
/// the tracking dynamics need.
///
/// Implementations must be pure functions of `(x, t)`: the solver and the
/// validation checks evaluate them from several threads at once.
pub trait Objective: Send + Sync {
    /// Dimension `n` of the decision variable. Always at least one.
    fn dim(&self) -> usize;

    fn value(&self, x: &DVector<f64>, t: f64) -> f64;

    /// `∇ₓ f(x, t)`.
    fn grad_x(&self, x: &DVector<f64>, t: f64) -> DVector<f64>;

    /// `∇ₓₓ f(x, t)`, symmetric.
    fn hess_xx(&self, x: &DVector<f64>, t: f64) -> DMatrix<f64>;

    /// `∂/∂t ∇ₓ f(x, t)`.
    fn grad_xt(&self, x: &DVector<f64>, t: f64) -> DVector<f64>;
}

impl<T: Objective + ?Sized> Objective for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &DVector<f64>, t: f64) -> f64 {
        (**self).value(x, t)
    }
    fn grad_x(&self, x: &DVector<f64>, t: f64) -> DVector<f64> {
        (**self).grad_x(x, t)
    }
    fn hess_xx(&self, x: &DVector<f64>, t: f64) -> DMatrix<f64> {
        (**self).hess_xx(x, t)
    }
    fn grad_xt(&self, x: &DVector<f64>, t: f64) -> DVector<f64> {
        (**self).grad_xt(x, t)
    }
}

impl<T: Objective + ?Sized> Objective for Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &DVector<f64>, t: f64) -> f64 {
        (**self).value(x, t)
    }
    fn grad_x(&self, x: &DVector<f64>, t: f64) -> DVector<f64> {
        (**self).grad_x(x, t)
    }
    fn hess_xx(&self, x: &DVector<f64>, t: f64) -> DMatrix<f64> {
        (**self).hess_xx(x, t)
    }
    fn grad_xt(&self, x: &DVector<f64>, t: f64) -> DVector<f64> {
        (**self).grad_xt(x, t)
    }
}

type ScalarFn = dyn Fn(&DVector<f64>, f64) -> f64 + Send + Sync;
type VectorFn = dyn Fn(&DVector<f64>, f64) -> DVector<f64> + Send + Sync;
type MatrixFn = dyn Fn(&DVector<f64>, f64) -> DMatrix<f64> + Send + Sync;

/// An [`Objective`] assembled from closures.
#[derive(Clone)]
pub struct FnObjective {
    dim: usize,
    value: Arc<ScalarFn>,
    grad_x: Arc<VectorFn>,
    hess_xx: Arc<MatrixFn>,
    grad_xt: Arc<VectorFn>,
}

impl FnObjective {
    /// Bundles the four callables. Zero-dimensional objectives are rejected.
    pub fn new<F, G, H, GT>(dim: usize, value: F, grad_x: G, hess_xx: H, grad_xt: GT) -> Result<Self>
    where
        F: Fn(&DVector<f64>, f64) -> f64 + Send + Sync + 'static,
        G: Fn(&DVector<f64>, f64) -> DVector<f64> + Send + Sync + 'static,
        H: Fn(&DVector<f64>, f64) -> DMatrix<f64> + Send + Sync + 'static,
        GT: Fn(&DVector<f64>, f64) -> DVector<f64> + Send + Sync + 'static,
    {
        if dim == 0 {
            return Err(Error::InvalidConfig("objective dimension must be positive".into()));
        }
        Ok(Self {
            dim,
            value: Arc::new(value),
            grad_x: Arc::new(grad_x),
            hess_xx: Arc::new(hess_xx),
            grad_xt: Arc::new(grad_xt),
        })
    }
}

impl fmt::Debug for FnObjective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnObjective").field("dim", &self.dim).finish_non_exhaustive()
    }
}

impl Objective for FnObjective {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &DVector<f64>, t: f64) -> f64 {
        (self.value)(x, t)
    }
    fn grad_x(&self, x: &DVector<f64>, t: f64) -> DVector<f64> {
        (self.grad_x)(x, t)
    }
    fn hess_xx(&self, x: &DVector<f64>, t: f64) -> DMatrix<f64> {
        (self.hess_xx)(x, t)
    }
    fn grad_xt(&self, x: &DVector<f64>, t: f64) -> DVector<f64> {
        (self.grad_xt)(x, t)
    }
}

/// A point `(x, t)` on the decision-variable/time product space.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub x: DVector<f64>,
    pub t: f64,
}

impl State {
    pub fn new(x: DVector<f64>, t: f64) -> Result<Self> {
        if !t.is_finite() || t < 0.0 || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(format!("state must be finite with t >= 0 (t = {t})")));
        }
        Ok(Self { x, t })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

/// Known upper bounds on the derivatives of the objective.
///
/// `m` is the strong-convexity modulus; the remaining fields bound the
/// operator 2-norms of `∇ₓₓf`, `∇ₓₜf`, `∂ᵢ∇ₓₓf` (uniformly in `i`),
/// `∇ₓₓₜf` and `∇ₓₜₜf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeBounds {
    pub m: f64,
    pub c_xx: f64,
    pub c_xt: f64,
    pub c_xxx: f64,
    pub c_xxt: f64,
    pub c_xtt: f64,
}

impl DerivativeBounds {
    pub fn new(m: f64, c_xx: f64, c_xt: f64, c_xxx: f64, c_xxt: f64, c_xtt: f64) -> Result<Self> {
        let b = Self { m, c_xx, c_xt, c_xxx, c_xxt, c_xtt };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("m", self.m),
            ("c_xx", self.c_xx),
            ("c_xt", self.c_xt),
            ("c_xxx", self.c_xxx),
            ("c_xxt", self.c_xxt),
            ("c_xtt", self.c_xtt),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("bound {name} must be finite and positive, got {v}")));
            }
        }
        if self.m > self.c_xx {
            return Err(Error::InvalidConfig(format!(
                "strong-convexity modulus {} exceeds Hessian bound {}",
                self.m, self.c_xx
            )));
        }
        Ok(())
    }

    /// Multiplies every derivative bound (not `m`) by `factor`.
    ///
    /// Used to build deliberately invalid bounds for falsification probes;
    /// the result is not re-validated.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            m: self.m,
            c_xx: self.c_xx * factor,
            c_xt: self.c_xt * factor,
            c_xxx: self.c_xxx * factor,
            c_xxt: self.c_xxt * factor,
            c_xtt: self.c_xtt * factor,
        }
    }
}
