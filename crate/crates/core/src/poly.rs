//! Dense real polynomials in one variable and a root finder for functions
//! that increase monotonically past a known point.

use std::fmt;

use crate::error::{Error, Result};

const MAX_DOUBLINGS: usize = 2100;
const MAX_ITERATIONS: usize = 400;

/// A polynomial stored by ascending degree: `c[0] + c[1]·τ + c[2]·τ² + …`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Degree of the stored coefficient vector (trailing zeros included).
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    /// Horner evaluation.
    pub fn eval(&self, tau: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * tau + c)
    }

    /// Value and first derivative in one pass.
    pub fn eval_with_derivative(&self, tau: f64) -> (f64, f64) {
        let mut p = 0.0;
        let mut dp = 0.0;
        for &c in self.coeffs.iter().rev() {
            dp = dp * tau + p;
            p = p * tau + c;
        }
        (p, dp)
    }

    pub fn derivative(&self) -> Self {
        let coeffs = self.coeffs.iter().enumerate().skip(1).map(|(i, &c)| c * i as f64).collect();
        Self { coeffs }
    }

    /// Term-by-term antiderivative with the given constant of integration.
    pub fn antiderivative(&self, constant: f64) -> Self {
        let mut coeffs = Vec::with_capacity(self.coeffs.len() + 1);
        coeffs.push(constant);
        coeffs.extend(self.coeffs.iter().enumerate().map(|(i, &c)| c / (i + 1) as f64));
        Self { coeffs }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { coeffs: self.coeffs.iter().map(|c| c * factor).collect() }
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate().rev() {
            if *c == 0.0 {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            match i {
                0 => write!(f, "{c}")?,
                1 => write!(f, "{c}·τ")?,
                _ => write!(f, "{c}·τ^{i}")?,
            }
            first = false;
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

/// Positive root of `c0 + c1·τ + c2·τ²` with `c0 ≤ 0`, `c1 ≥ 0`, `c2 > 0`,
/// in the cancellation-free form `−2c0 / (c1 + √(c1² − 4c0c2))`.
pub fn stable_quadratic_root(c0: f64, c1: f64, c2: f64) -> f64 {
    let disc = (c1 * c1 - 4.0 * c0 * c2).max(0.0);
    let denom = c1 + disc.sqrt();
    if denom == 0.0 {
        0.0
    } else {
        -2.0 * c0 / denom
    }
}

/// Finds `τ ≥ lo` with `p(τ) = level`, assuming `p(lo) ≤ level` and `p`
/// strictly increasing on `[lo, ∞)`.
///
/// The upper end of the bracket starts near `lo` and doubles until the sign
/// changes; the bracket is then shrunk by Newton steps, falling back to
/// bisection whenever a step leaves the bracket or stalls. Iteration stops
/// once `|p(τ) − level| ≤ tol` or the bracket collapses to adjacent floats.
pub fn increasing_root(p: &Polynomial, level: f64, lo: f64, tol: f64) -> Result<f64> {
    let f = |tau: f64| {
        let (v, d) = p.eval_with_derivative(tau);
        (v - level, d)
    };
    let (f_lo, _) = f(lo);
    if f_lo.abs() <= tol && f_lo >= 0.0 {
        return Ok(lo);
    }
    let mut lo = lo;
    let mut hi = if lo > 0.0 { 2.0 * lo } else { 1e-3 };
    let mut f_hi = f(hi).0;
    let mut doublings = 0;
    while f_hi <= 0.0 {
        lo = hi;
        hi *= 2.0;
        f_hi = f(hi).0;
        doublings += 1;
        if doublings > MAX_DOUBLINGS || !hi.is_finite() {
            return Err(Error::RootNotBracketed { upper: hi });
        }
    }

    let mut best = if f_hi.abs() < f_lo.abs() { (hi, f_hi) } else { (lo, f_lo) };
    let mut x = 0.5 * (lo + hi);
    let mut last_width = hi - lo;
    for _ in 0..MAX_ITERATIONS {
        let (fx, dfx) = f(x);
        if fx.abs() < best.1.abs() {
            best = (x, fx);
        }
        if fx.abs() <= tol {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let width = hi - lo;
        if width <= 2.0 * f64::EPSILON * hi.abs() || width == 0.0 {
            break;
        }
        let newton = x - fx / dfx;
        let shrinking = width < 0.5 * last_width;
        x = if dfx > 0.0 && newton > lo && newton < hi && (shrinking || (newton - x).abs() < 0.25 * width) {
            newton
        } else {
            0.5 * (lo + hi)
        };
        last_width = width;
    }
    Ok(best.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horner_and_derivative() {
        let p = Polynomial::new(vec![-1.0, 8.0, 4.0]);
        assert_eq!(p.eval(0.0), -1.0);
        assert_eq!(p.eval(1.0), 11.0);
        assert_eq!(p.eval_with_derivative(2.0), (31.0, 24.0));
        assert_eq!(p.derivative().coeffs(), &[8.0, 8.0]);
        assert_eq!(p.degree(), 2);
    }

    #[test]
    fn antiderivative_roundtrip() {
        let p = Polynomial::new(vec![-1.0, 8.0, 4.0]);
        let ip = p.antiderivative(0.5);
        assert_eq!(ip.coeffs(), &[0.5, -1.0, 4.0, 4.0 / 3.0]);
        assert_eq!(ip.derivative(), p);
    }

    #[test]
    fn display_skips_zero_terms() {
        assert_eq!(Polynomial::new(vec![-1.0, 0.0, 2.0]).to_string(), "2·τ^2 + -1");
        assert_eq!(Polynomial::new(vec![0.0]).to_string(), "0");
    }

    #[test]
    fn quadratic_closed_form() {
        // 4τ² + 8τ − 1
        let r = stable_quadratic_root(-1.0, 8.0, 4.0);
        assert!((r - (-8.0 + 80f64.sqrt()) / 8.0).abs() < 1e-15);
        assert_eq!(stable_quadratic_root(0.0, 3.0, 1.0), 0.0);
    }

    #[test]
    fn quadratic_closed_form_without_cancellation() {
        // c1 ≫ |c0 c2|: the naive formula loses every digit.
        let r = stable_quadratic_root(-1e-12, 1e4, 1.0);
        assert!((r - 1e-16).abs() < 1e-28);
    }

    #[test]
    fn increasing_root_cubic() {
        let p = Polynomial::new(vec![-1.0, 5.0, 6.0, 8.0]);
        let r = increasing_root(&p, 0.0, 0.0, 1e-14).unwrap();
        assert!(p.eval(r).abs() <= 1e-14);
    }

    #[test]
    fn increasing_root_tiny_and_huge() {
        let tiny = Polynomial::new(vec![-1e-30, 1.0, 1.0]);
        let r = increasing_root(&tiny, 0.0, 0.0, 1e-40).unwrap();
        assert!((r - 1e-30).abs() < 1e-40);
        let huge = Polynomial::new(vec![-1e12, 1.0]);
        let r = increasing_root(&huge, 0.0, 0.0, 1e-3).unwrap();
        assert!((r - 1e12).abs() <= 1e-3);
    }

    #[test]
    fn increasing_root_never_bracketed() {
        let flat = Polynomial::new(vec![-1.0]);
        assert!(matches!(increasing_root(&flat, 0.0, 0.0, 1e-12), Err(Error::RootNotBracketed { .. })));
    }
}
