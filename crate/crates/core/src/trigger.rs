//! Triggering polynomials that bound the Lyapunov derivative between samples,
//! and the root solves that turn them into inter-sample intervals.
//!
//! All polynomials are expressed in the elapsed time `τ = t − t_k`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::DerivativeBounds;
use crate::poly::{increasing_root, stable_quadratic_root, Polynomial};

/// Default mixed absolute/relative residual tolerance for trigger roots.
pub const DEFAULT_ROOT_TOL: f64 = 1e-12;

/// Which closed-form bound on `V̇` drives the sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Quadratic trigger; needs all five derivative bounds.
    SecondOrder,
    /// Cubic trigger; needs only the third-derivative bounds.
    ThirdOrder,
}

impl Strategy {
    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::SecondOrder => "second",
            Strategy::ThirdOrder => "third",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "second" | "second_order" | "2" => Ok(Strategy::SecondOrder),
            "third" | "third_order" | "3" => Ok(Strategy::ThirdOrder),
            other => Err(Error::InvalidConfig(format!("unknown strategy `{other}` (expected second|third)"))),
        }
    }
}

/// Growth rates of `‖ġ‖` (`a`) and `‖g̈‖` (`b`) along a frozen direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriggerCoefficients {
    pub a: f64,
    pub b: f64,
}

/// `a = C_xx‖ẋ‖₂ + C_xt` and `b = (C_xxx‖ẋ‖₁ + 2C_xxt)‖ẋ‖₂ + C_xtt`.
pub fn trigger_coefficients(xdot: &DVector<f64>, bounds: &DerivativeBounds) -> TriggerCoefficients {
    let n2 = xdot.norm();
    let n1 = xdot.lp_norm(1);
    TriggerCoefficients {
        a: bounds.c_xx * n2 + bounds.c_xt,
        b: (bounds.c_xxx * n1 + 2.0 * bounds.c_xxt) * n2 + bounds.c_xtt,
    }
}

/// Upper bound `φ_k(τ) ≥ V̇(t_k + τ)`, valid while the direction is frozen.
#[derive(Debug, Clone, PartialEq)]
pub struct TriggerPolynomial {
    pub order: Strategy,
    pub poly: Polynomial,
    pub v_k: f64,
    pub alpha: f64,
}

impl TriggerPolynomial {
    pub fn build(order: Strategy, c: TriggerCoefficients, v_k: f64, alpha: f64) -> Self {
        match order {
            Strategy::SecondOrder => build_phi_second_order(c, v_k, alpha),
            Strategy::ThirdOrder => build_phi_third_order(c, v_k, alpha),
        }
    }

    pub fn eval(&self, tau: f64) -> f64 {
        self.poly.eval(tau)
    }

    pub fn coeffs(&self) -> &[f64] {
        self.poly.coeffs()
    }
}

/// `φ(τ) = ½ab·τ² + (a² + b√(2V_k))·τ − 2αV_k`.
pub fn build_phi_second_order(c: TriggerCoefficients, v_k: f64, alpha: f64) -> TriggerPolynomial {
    let grad_norm = (2.0 * v_k).sqrt();
    let coeffs = vec![-2.0 * alpha * v_k, c.a * c.a + c.b * grad_norm, 0.5 * c.a * c.b];
    TriggerPolynomial { order: Strategy::SecondOrder, poly: Polynomial::new(coeffs), v_k, alpha }
}

/// `φ(τ) = ½b²·τ³ + (3/2)α√(2V_k)·b·τ² + (√(2V_k)·b + 2α²V_k)·τ − 2αV_k`.
///
/// Only `b` enters, so the second-derivative bounds are not needed.
pub fn build_phi_third_order(c: TriggerCoefficients, v_k: f64, alpha: f64) -> TriggerPolynomial {
    let grad_norm = (2.0 * v_k).sqrt();
    let coeffs = vec![
        -2.0 * alpha * v_k,
        grad_norm * c.b + 2.0 * alpha * alpha * v_k,
        1.5 * alpha * grad_norm * c.b,
        0.5 * c.b * c.b,
    ];
    TriggerPolynomial { order: Strategy::ThirdOrder, poly: Polynomial::new(coeffs), v_k, alpha }
}

/// First zero crossing `τ* > 0` of `φ`.
///
/// `φ(0) = −2αV_k < 0` and `φ` increases on `τ ≥ 0`, so the crossing is
/// unique. Quadratics use the closed form; cubics go through the bracketed
/// Newton/bisection solver. The residual is relative to `|φ(0)| = 2αV_k`:
/// `|φ(τ*)| ≤ root_tol·2αV_k`, or the best point of a bracket that has
/// shrunk to machine precision.
pub fn phi_root(p: &TriggerPolynomial, root_tol: f64) -> Result<f64> {
    if !(p.v_k > 0.0) {
        return Err(Error::DegenerateTrigger { v_k: p.v_k });
    }
    let tol = root_tol * 2.0 * p.alpha * p.v_k;
    let c = p.coeffs();
    if c.len() == 3 && c[2] > 0.0 {
        let r = stable_quadratic_root(c[0], c[1], c[2]);
        if p.eval(r).abs() <= tol {
            return Ok(r);
        }
    }
    increasing_root(&p.poly, 0.0, 0.0, tol)
}

/// `ψ(τ) = V_k + ∫₀^τ φ(σ) dσ`, an upper bound on `V(t_k + τ)`.
pub fn build_psi(p: &TriggerPolynomial) -> Polynomial {
    p.poly.antiderivative(p.v_k)
}

/// Smallest `τ* > 0` with `ψ(τ*) = ε`, for `0 ≤ V_k ≤ ε`.
///
/// `ψ` falls until the zero of `φ = ψ'` and rises afterwards, so the search
/// starts there. When `V_k = ε` the trivial crossing at `τ = 0` is skipped
/// and the later one returned. The residual satisfies
/// `|ψ(τ*) − ε| ≤ root_tol·ε` up to machine precision of the bracket.
pub fn psi_root(psi: &Polynomial, epsilon: f64, v_k: f64, root_tol: f64) -> Result<f64> {
    if v_k > epsilon {
        return Err(Error::InvalidPhase { v_k, epsilon });
    }
    let tol = root_tol * epsilon;
    let phi = psi.derivative();
    let start = if phi.eval(0.0) < 0.0 {
        let phi_tol = root_tol * phi.eval(0.0).abs();
        increasing_root(&phi, 0.0, 0.0, phi_tol)?
    } else {
        0.0
    };
    let root = increasing_root(psi, epsilon, start, tol)?;
    if root > 0.0 {
        return Ok(root);
    }
    // ψ(0) = ε with a flat start: step to the first point where ψ exceeds ε.
    increasing_root(psi, epsilon, f64::MIN_POSITIVE, tol).map(|r| r.max(f64::MIN_POSITIVE))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_bounds() -> DerivativeBounds {
        DerivativeBounds::new(1.0, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn coefficients_zero_velocity() {
        let b = DerivativeBounds::new(0.5, 2.0, 0.3, 1.5, 1.2, 0.7).unwrap();
        let c = trigger_coefficients(&DVector::zeros(3), &b);
        assert_eq!(c, TriggerCoefficients { a: 0.3, b: 0.7 });
    }

    #[test]
    fn coefficients_by_substitution() {
        let c = trigger_coefficients(&DVector::from_vec(vec![1.0]), &unit_bounds());
        assert_eq!(c, TriggerCoefficients { a: 2.0, b: 4.0 });
        // ‖·‖₁ = 7, ‖·‖₂ = 5: a = 5 + 1, b = (7 + 2)·5 + 1.
        let c = trigger_coefficients(&DVector::from_vec(vec![3.0, 4.0]), &unit_bounds());
        assert_eq!(c, TriggerCoefficients { a: 6.0, b: 46.0 });
    }

    #[test]
    fn second_order_by_substitution() {
        let c = TriggerCoefficients { a: 2.0, b: 4.0 };
        let p = build_phi_second_order(c, 0.5, 1.0);
        assert_eq!(p.coeffs(), &[-1.0, 8.0, 4.0]);
        let p0 = build_phi_second_order(c, 0.0, 1.0);
        assert_eq!(p0.coeffs(), &[0.0, 4.0, 4.0]);
        assert_eq!(p0.eval(0.0), 0.0);
    }

    #[test]
    fn third_order_by_substitution() {
        let c = TriggerCoefficients { a: 123.0, b: 4.0 };
        let p = build_phi_third_order(c, 0.5, 1.0);
        assert_eq!(p.coeffs(), &[-1.0, 5.0, 6.0, 8.0]);
        let p0 = build_phi_third_order(c, 0.0, 1.0);
        assert_eq!(p0.coeffs(), &[0.0, 0.0, 0.0, 8.0]);
    }

    #[test]
    fn phi_root_quadratic_formula() {
        let p = build_phi_second_order(TriggerCoefficients { a: 2.0, b: 4.0 }, 0.5, 1.0);
        let r = phi_root(&p, DEFAULT_ROOT_TOL).unwrap();
        assert!((r - (-8.0 + 80f64.sqrt()) / 8.0).abs() < 1e-15);
        assert!((r - 0.1180340).abs() < 1e-7);
    }

    #[test]
    fn phi_root_cubic_against_bisection() {
        let p = build_phi_third_order(TriggerCoefficients { a: 0.0, b: 4.0 }, 0.5, 1.0);
        let r = phi_root(&p, DEFAULT_ROOT_TOL).unwrap();
        // Independent plain bisection on [0, 1].
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if 8.0 * mid.powi(3) + 6.0 * mid * mid + 5.0 * mid - 1.0 > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        assert!((r - lo).abs() < 1e-12);
        assert!((r - 0.161805).abs() < 1e-6);
    }

    #[test]
    fn phi_root_rejects_zero_lyapunov() {
        let p = build_phi_third_order(TriggerCoefficients { a: 1.0, b: 1.0 }, 0.0, 1.0);
        assert_eq!(phi_root(&p, DEFAULT_ROOT_TOL), Err(Error::DegenerateTrigger { v_k: 0.0 }));
    }

    #[test]
    fn phi_root_invariant_under_scaling() {
        let p = build_phi_third_order(TriggerCoefficients { a: 0.0, b: 4.0 }, 0.5, 1.0);
        let r = phi_root(&p, DEFAULT_ROOT_TOL).unwrap();
        for lambda in [1e-6, 0.3, 7.0, 1e5] {
            let mut q = p.clone();
            q.poly = p.poly.scaled(lambda);
            let tol = DEFAULT_ROOT_TOL * (1.0 + lambda);
            let rq = increasing_root(&q.poly, 0.0, 0.0, tol).unwrap();
            assert!((rq - r).abs() < 1e-10, "lambda = {lambda}");
        }
    }

    #[test]
    fn psi_by_integration() {
        let p = build_phi_second_order(TriggerCoefficients { a: 2.0, b: 4.0 }, 0.5, 1.0);
        let psi = build_psi(&p);
        assert_eq!(psi.coeffs(), &[0.5, -1.0, 4.0, 4.0 / 3.0]);
        assert_eq!(psi.eval(0.0), 0.5);
        let h = 1e-6;
        for tau in [0.0, 0.05, 0.3, 1.0] {
            let fd = (psi.eval(tau + h) - psi.eval(tau - h)) / (2.0 * h);
            assert!((fd - p.eval(tau)).abs() < 1e-9);
        }
    }

    #[test]
    fn psi_root_after_dip() {
        let p = build_phi_second_order(TriggerCoefficients { a: 2.0, b: 4.0 }, 0.5, 1.0);
        let psi = build_psi(&p);
        let r = psi_root(&psi, 0.6, 0.5, DEFAULT_ROOT_TOL).unwrap();
        assert!((psi.eval(r) - 0.6).abs() <= 1e-12 * 1.6);
        // Bisection on [zero of φ, 1].
        let (mut lo, mut hi) = ((-8.0 + 80f64.sqrt()) / 8.0, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if psi.eval(mid) > 0.6 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        assert!((r - lo).abs() < 1e-12);
        assert!((r - 0.302258).abs() < 1e-6);
    }

    #[test]
    fn psi_root_at_level_is_strictly_positive() {
        let c = TriggerCoefficients { a: 1.0, b: 3.0 };
        for order in [Strategy::SecondOrder, Strategy::ThirdOrder] {
            let p = TriggerPolynomial::build(order, c, 0.01, 5.0);
            let r = psi_root(&build_psi(&p), 0.01, 0.01, DEFAULT_ROOT_TOL).unwrap();
            assert!(r > phi_root(&p, DEFAULT_ROOT_TOL).unwrap());
        }
    }

    #[test]
    fn psi_root_from_zero_lyapunov_is_monotone_solve() {
        let p = build_phi_third_order(TriggerCoefficients { a: 0.0, b: 2.0 }, 0.0, 5.0);
        let psi = build_psi(&p);
        let r = psi_root(&psi, 0.01, 0.0, DEFAULT_ROOT_TOL).unwrap();
        // ψ = ½b²τ⁴/4 = τ⁴/2.
        assert!((r - (0.02f64).powf(0.25)).abs() < 1e-12);
    }

    #[test]
    fn psi_root_rejects_descent_states() {
        let p = build_phi_third_order(TriggerCoefficients { a: 0.0, b: 2.0 }, 0.5, 5.0);
        assert_eq!(
            psi_root(&build_psi(&p), 0.1, 0.5, DEFAULT_ROOT_TOL),
            Err(Error::InvalidPhase { v_k: 0.5, epsilon: 0.1 })
        );
    }

    #[test]
    fn strategy_parsing() {
        assert_eq!("third".parse::<Strategy>().unwrap(), Strategy::ThirdOrder);
        assert_eq!("second".parse::<Strategy>().unwrap(), Strategy::SecondOrder);
        assert!("fourth".parse::<Strategy>().is_err());
    }
}
