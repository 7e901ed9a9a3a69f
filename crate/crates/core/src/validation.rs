//! Dense-grid witness checks for the guarantees of the self-triggered scheme.
//!
//! Each check returns a [`ValidationReport`] holding the worst value of
//! `lhs − rhs` over the grid. Checks made of several inequalities with
//! different tolerances report each one as a part; the parent then carries
//! the worst excess over tolerance and a tolerance of zero.

use std::fmt;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{gradient_rate, lyapunov_rate};
use crate::error::{Error, Result};
use crate::objective::{DerivativeBounds, Objective, State};
use crate::problems::DomainBox;
use crate::solver::{Phase, SampleRecord, Trajectory};
use crate::trigger::{trigger_coefficients, TriggerPolynomial};

pub const SOUNDNESS_TOL: f64 = 1e-8;
pub const GRAD_RATE_TOL: f64 = 1e-8;
pub const GRAD_ACCEL_TOL: f64 = 1e-6;
pub const GRAD_NORM_TOL: f64 = 1e-8;
pub const DESCENT_RIPPLE_TOL: f64 = 1e-10;
pub const HOLD_LEVEL_TOL: f64 = 1e-8;
pub const ORACLE_REL_TOL: f64 = 1e-5;
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Step for first differences of supplied quantities.
pub const FD_FIRST_STEP: f64 = 1e-6;
/// Step for the centered difference of `ġ` that estimates `g̈`.
pub const FD_SECOND_STEP: f64 = 1e-5;

/// Where the worst violation of a check occurred: sample (or segment) index
/// and absolute time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Location {
    pub k: usize,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub check: String,
    pub worst_violation: f64,
    pub location: Option<Location>,
    pub tolerance: f64,
    pub pass: bool,
    pub grid_density: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub parts: Vec<ValidationReport>,
}

impl ValidationReport {
    fn leaf(check: &str, worst: Worst, tolerance: f64, grid_density: usize) -> Self {
        Self {
            check: check.into(),
            worst_violation: worst.value,
            location: worst.location,
            tolerance,
            pass: worst.value <= tolerance,
            grid_density,
            parts: Vec::new(),
        }
    }

    fn composite(check: &str, parts: Vec<ValidationReport>, grid_density: usize) -> Self {
        let (excess, location) = parts
            .iter()
            .map(|p| (p.worst_violation - p.tolerance, p.location))
            .fold((f64::NEG_INFINITY, None), |acc, p| if p.0 > acc.0 { p } else { acc });
        Self {
            check: check.into(),
            worst_violation: excess,
            location,
            tolerance: 0.0,
            pass: parts.iter().all(|p| p.pass),
            grid_density,
            parts,
        }
    }

    /// Renders the report as a TOML document.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("reports serialize")
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {} worst={:e} tol={:e}", self.check, self.worst_violation, self.tolerance)?;
        if let Some(loc) = self.location {
            write!(f, " at k={} t={}", loc.k, loc.t)?;
        }
        write!(f, " grid={}", self.grid_density)?;
        for p in &self.parts {
            write!(f, "\n    {p}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Worst {
    value: f64,
    location: Option<Location>,
}

impl Worst {
    const NONE: Worst = Worst { value: f64::NEG_INFINITY, location: None };

    fn at(value: f64, k: usize, t: f64) -> Self {
        // NaN must surface as a violation rather than vanish in comparisons.
        let value = if value.is_nan() { f64::INFINITY } else { value };
        Worst { value, location: Some(Location { k, t }) }
    }

    fn max(self, o: Worst) -> Worst {
        if o.value > self.value {
            o
        } else {
            self
        }
    }
}

/// Grid offsets `τ·j/M`, `j = 0..=M`, so that doubling `M` refines the grid.
fn grid_offsets(tau: f64, per_segment: usize) -> impl Iterator<Item = f64> {
    let m = per_segment.max(1);
    (0..=m).map(move |j| tau * j as f64 / m as f64)
}

fn frozen_state(r: &SampleRecord, s: f64) -> State {
    State { x: &r.x + &r.xdot * s, t: r.t + s }
}

/// `max (V̇(t) − φ_k(t))` along every frozen segment; passes when ≤ 1e-8.
///
/// `φ_k` is rebuilt from the stored sample with the strategy and `α` of the
/// run and the supplied bounds.
pub fn check_trigger_soundness<O: Objective + ?Sized>(
    traj: &Trajectory,
    oracle: &O,
    bounds: &DerivativeBounds,
    grid_per_segment: usize,
) -> ValidationReport {
    let cfg = &traj.config;
    let worst = traj
        .records
        .par_iter()
        .map(|r| {
            let c = trigger_coefficients(&r.xdot, bounds);
            let phi = TriggerPolynomial::build(cfg.strategy, c, r.v, cfg.alpha);
            grid_offsets(r.tau, grid_per_segment)
                .map(|s| {
                    let rate = lyapunov_rate(oracle, &frozen_state(r, s), &r.xdot);
                    Worst::at(rate - phi.eval(s), r.k, r.t + s)
                })
                .fold(Worst::NONE, Worst::max)
        })
        .reduce(|| Worst::NONE, Worst::max);
    ValidationReport::leaf("trigger_soundness", worst, SOUNDNESS_TOL, grid_per_segment)
}

/// The three growth bounds used to derive the triggers, on every segment:
/// `‖ġ‖ ≤ a_k`, `‖g̈‖ ≤ b_k` (centered difference of `ġ`, step 1e-5) and
/// `‖g‖ ≤ √(2V_k) + a_k τ`.
pub fn check_appendix_bounds<O: Objective + ?Sized>(
    traj: &Trajectory,
    oracle: &O,
    bounds: &DerivativeBounds,
    grid_per_segment: usize,
) -> ValidationReport {
    let h = FD_SECOND_STEP;
    let (rate, accel, norm) = traj
        .records
        .par_iter()
        .map(|r| {
            let c = trigger_coefficients(&r.xdot, bounds);
            let g0 = (2.0 * r.v).sqrt();
            let mut acc = (Worst::NONE, Worst::NONE, Worst::NONE);
            for s in grid_offsets(r.tau, grid_per_segment) {
                let t = r.t + s;
                let st = frozen_state(r, s);
                let g_dot = gradient_rate(oracle, &st, &r.xdot);
                let g_ddot = (gradient_rate(oracle, &frozen_state(r, s + h), &r.xdot)
                    - gradient_rate(oracle, &frozen_state(r, s - h), &r.xdot))
                    / (2.0 * h);
                let g = oracle.grad_x(&st.x, st.t);
                acc.0 = acc.0.max(Worst::at(g_dot.norm() - c.a, r.k, t));
                acc.1 = acc.1.max(Worst::at(g_ddot.norm() - c.b, r.k, t));
                acc.2 = acc.2.max(Worst::at(g.norm() - (g0 + c.a * s), r.k, t));
            }
            acc
        })
        .reduce(
            || (Worst::NONE, Worst::NONE, Worst::NONE),
            |a, b| (a.0.max(b.0), a.1.max(b.1), a.2.max(b.2)),
        );
    let parts = vec![
        ValidationReport::leaf("gradient_rate_bound", rate, GRAD_RATE_TOL, grid_per_segment),
        ValidationReport::leaf("gradient_accel_bound", accel, GRAD_ACCEL_TOL, grid_per_segment),
        ValidationReport::leaf("gradient_norm_bound", norm, GRAD_NORM_TOL, grid_per_segment),
    ];
    ValidationReport::composite("appendix_bounds", parts, grid_per_segment)
}

/// `V` along the trajectory: non-increasing (up to 1e-10 ripple) through
/// descent segments and at most `ε + 1e-8` on hold segments.
pub fn check_lyapunov_profile<O: Objective + ?Sized>(
    traj: &Trajectory,
    oracle: &O,
    grid_per_segment: usize,
) -> ValidationReport {
    let eps = traj.config.epsilon;
    let (monotone, level) = traj
        .records
        .par_iter()
        .map(|r| {
            let mut monotone = Worst::NONE;
            let mut level = Worst::NONE;
            let mut prev: Option<f64> = None;
            for s in grid_offsets(r.tau, grid_per_segment) {
                let st = frozen_state(r, s);
                let v = 0.5 * oracle.grad_x(&st.x, st.t).norm_squared();
                match r.phase {
                    Phase::Descent => {
                        if let Some(p) = prev {
                            monotone = monotone.max(Worst::at(v - p, r.k, st.t));
                        }
                    }
                    Phase::Hold => level = level.max(Worst::at(v - eps, r.k, st.t)),
                }
                prev = Some(v);
            }
            (monotone, level)
        })
        .reduce(|| (Worst::NONE, Worst::NONE), |a, b| (a.0.max(b.0), a.1.max(b.1)));
    let parts = vec![
        ValidationReport::leaf("descent_monotone", monotone, DESCENT_RIPPLE_TOL, grid_per_segment),
        ValidationReport::leaf("hold_level", level, HOLD_LEVEL_TOL, grid_per_segment),
    ];
    ValidationReport::composite("lyapunov_profile", parts, grid_per_segment)
}

fn relative_error(analytic: &DVector<f64>, fd: &DVector<f64>) -> f64 {
    (analytic - fd).norm() / fd.norm().max(1.0)
}

/// Finite-difference audit of `∇ₓf`, `∇ₓₓf` and `∇ₓₜf` at `samples` points
/// drawn uniformly (seeded) from `box × t_interval`, plus Hessian symmetry.
///
/// Errors are relative with a floor of one: `‖a − fd‖ / max(‖fd‖, 1)`.
pub fn check_oracle_consistency<O: Objective + ?Sized>(
    oracle: &O,
    domain: &DomainBox,
    t_interval: (f64, f64),
    samples: usize,
    seed: u64,
) -> Result<ValidationReport> {
    let n = oracle.dim();
    if domain.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: domain.dim() });
    }
    if !domain.is_finite() {
        return Err(Error::InvalidConfig("oracle audit needs a finite box".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<(DVector<f64>, f64)> = (0..samples)
        .map(|_| {
            let x = DVector::from_fn(n, |i, _| rng.random_range(domain.lower[i]..=domain.upper[i]));
            let t = rng.random_range(t_interval.0..=t_interval.1);
            (x, t)
        })
        .collect();

    let h = FD_FIRST_STEP;
    let worst = points
        .par_iter()
        .enumerate()
        .map(|(idx, (x, t))| {
            let t = *t;
            let mut fd_grad = DVector::zeros(n);
            let mut fd_hess = nalgebra::DMatrix::zeros(n, n);
            for i in 0..n {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                fd_grad[i] = (oracle.value(&xp, t) - oracle.value(&xm, t)) / (2.0 * h);
                let col = (oracle.grad_x(&xp, t) - oracle.grad_x(&xm, t)) / (2.0 * h);
                fd_hess.set_column(i, &col);
            }
            let fd_gt = (oracle.grad_x(x, t + h) - oracle.grad_x(x, t - h)) / (2.0 * h);
            let hess = oracle.hess_xx(x, t);
            let asym = (&hess - hess.transpose()).amax();
            let hess_err = (&hess - &fd_hess).norm() / fd_hess.norm().max(1.0);
            [
                Worst::at(relative_error(&oracle.grad_x(x, t), &fd_grad), idx, t),
                Worst::at(hess_err, idx, t),
                Worst::at(relative_error(&oracle.grad_xt(x, t), &fd_gt), idx, t),
                Worst::at(asym, idx, t),
            ]
        })
        .reduce(|| [Worst::NONE; 4], |a, b| std::array::from_fn(|i| a[i].max(b[i])));

    let parts = vec![
        ValidationReport::leaf("grad_x", worst[0], ORACLE_REL_TOL, samples),
        ValidationReport::leaf("hess_xx", worst[1], ORACLE_REL_TOL, samples),
        ValidationReport::leaf("grad_xt", worst[2], ORACLE_REL_TOL, samples),
        ValidationReport::leaf("hess_symmetry", worst[3], SYMMETRY_TOL, samples),
    ];
    Ok(ValidationReport::composite("oracle_consistency", parts, samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::quadratic_tracking;
    use crate::solver::{run_self_triggered, SolverConfig};
    use crate::trigger::Strategy;

    #[test]
    fn grid_offsets_nest_under_doubling() {
        let coarse: Vec<f64> = grid_offsets(0.3, 4).collect();
        let fine: Vec<f64> = grid_offsets(0.3, 8).collect();
        assert_eq!(coarse.len(), 5);
        assert!(coarse.iter().all(|c| fine.contains(c)));
        assert_eq!(grid_offsets(1.0, 0).count(), 2);
    }

    #[test]
    fn empty_trajectory_passes_vacuously() {
        let p = quadratic_tracking(1, 0.5).unwrap();
        let cfg = SolverConfig::new(5.0, 0.01, 0.0, 1.0, vec![1.0], Strategy::ThirdOrder);
        let mut traj = run_self_triggered(p.oracle.as_ref(), &p.bounds, &cfg).unwrap();
        traj.records.clear();
        let r = check_trigger_soundness(&traj, p.oracle.as_ref(), &p.bounds, 10);
        assert!(r.pass);
        assert_eq!(r.location, None);
        let r = check_lyapunov_profile(&traj, p.oracle.as_ref(), 10);
        assert!(r.pass);
    }

    #[test]
    fn report_rendering() {
        let p = quadratic_tracking(1, 0.5).unwrap();
        let cfg = SolverConfig::new(5.0, 0.01, 0.0, 1.0, vec![1.0], Strategy::ThirdOrder);
        let traj = run_self_triggered(p.oracle.as_ref(), &p.bounds, &cfg).unwrap();
        let r = check_lyapunov_profile(&traj, p.oracle.as_ref(), 4);
        let line = r.to_string();
        assert!(line.starts_with("PASS lyapunov_profile"));
        assert!(line.contains("hold_level"));
        let doc = r.to_toml();
        assert!(doc.contains("check = \"lyapunov_profile\""));
        assert!(doc.contains("[[parts]]"));
    }

    #[test]
    fn oracle_audit_rejects_unbounded_box() {
        let p = quadratic_tracking(2, 0.5).unwrap();
        assert!(check_oracle_consistency(p.oracle.as_ref(), &p.domain_box, (0.0, 1.0), 5, 0).is_err());
    }
}
