//! The two-phase self-triggered optimizer and the periodic Euler baseline.
//!
//! Both produce a [`Trajectory`]: a list of samples `(t_k, x_k, ẋ_k)` joined
//! by affine segments `x(t) = x_k + ẋ_k (t − t_k)`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::dynamics::{direction_sample, DirectionSample};
use crate::error::{Error, Result};
use crate::objective::{DerivativeBounds, Objective, State};
use crate::problems::DomainBox;
use crate::trigger::{
    build_psi, phi_root, psi_root, trigger_coefficients, Strategy, TriggerPolynomial, DEFAULT_ROOT_TOL,
};

pub const DEFAULT_MAX_SAMPLES: usize = 1_000_000;

/// Parameters of a single run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub alpha: f64,
    pub epsilon: f64,
    pub t0: f64,
    pub tf: f64,
    pub x0: Vec<f64>,
    pub strategy: Strategy,
    pub root_tol: f64,
    pub max_samples: usize,
    /// Region the state must stay in, usually where the bounds are certified.
    #[serde(skip)]
    pub region: Option<DomainBox>,
}

impl SolverConfig {
    pub fn new(alpha: f64, epsilon: f64, t0: f64, tf: f64, x0: Vec<f64>, strategy: Strategy) -> Self {
        Self {
            alpha,
            epsilon,
            t0,
            tf,
            x0,
            strategy,
            root_tol: DEFAULT_ROOT_TOL,
            max_samples: DEFAULT_MAX_SAMPLES,
            region: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [("alpha", self.alpha), ("epsilon", self.epsilon), ("root_tol", self.root_tol)];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be finite and positive, got {v}")));
            }
        }
        if !(self.t0.is_finite() && self.tf.is_finite() && self.t0 >= 0.0 && self.t0 < self.tf) {
            return Err(Error::InvalidConfig(format!(
                "horizon must satisfy 0 <= t0 < tf, got [{}, {}]",
                self.t0, self.tf
            )));
        }
        if self.max_samples == 0 {
            return Err(Error::InvalidConfig("max_samples must be at least 1".into()));
        }
        if self.x0.is_empty() || self.x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("x0 must be a non-empty finite vector".into()));
        }
        Ok(())
    }
}

/// Which trigger chose the step that follows a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// `‖∇ₓf‖ ≥ √(2ε)`: step to the zero of `φ_k`.
    Descent,
    /// `‖∇ₓf‖ < √(2ε)`: step to where `ψ_k` reaches `ε`.
    Hold,
}

impl Phase {
    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::Descent => "descent",
            Phase::Hold => "hold",
        }
    }
}

impl std::str::FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "descent" => Ok(Phase::Descent),
            "hold" => Ok(Phase::Hold),
            other => Err(Error::InvalidConfig(format!("unknown phase `{other}`"))),
        }
    }
}

/// One sample of the optimizer and the step taken from it.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub k: usize,
    pub t: f64,
    pub x: DVector<f64>,
    pub xdot: DVector<f64>,
    /// `V(x_k, t_k)`.
    pub v: f64,
    pub phase: Phase,
    /// `t_{k+1} − t_k`.
    pub tau: f64,
    /// The step was truncated to land on the end of the horizon.
    pub clamped: bool,
}

impl SampleRecord {
    pub fn t_next(&self) -> f64 {
        self.t + self.tau
    }

    pub fn state(&self) -> State {
        State { x: self.x.clone(), t: self.t }
    }

    /// Point on this record's segment at absolute time `t`.
    pub fn position_at(&self, t: f64) -> DVector<f64> {
        &self.x + &self.xdot * (t - self.t)
    }
}

/// Count, mean, population standard deviation and extremes of step sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

/// Statistics in a fixed summation order so that recomputation from a
/// written trajectory reproduces them bit for bit.
pub fn step_statistics(steps: &[f64]) -> StepStats {
    let count = steps.len();
    if count == 0 {
        return StepStats { count, mean: f64::NAN, std: f64::NAN, min: f64::NAN, max: f64::NAN };
    }
    let n = count as f64;
    let mean = steps.iter().sum::<f64>() / n;
    let var = steps.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
    let min = steps.iter().copied().fold(f64::INFINITY, f64::min);
    let max = steps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    StepStats { count, mean, std: var.sqrt(), min, max }
}

/// A finished run: samples joined by affine segments.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub records: Vec<SampleRecord>,
    pub dim: usize,
    pub config: SolverConfig,
    /// State at the end of the last segment.
    pub end: State,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Steps chosen by a trigger, excluding a final step cut at the horizon.
    pub fn trigger_steps(&self) -> Vec<f64> {
        self.records.iter().filter(|r| !r.clamped).map(|r| r.tau).collect()
    }

    pub fn step_stats(&self) -> StepStats {
        step_statistics(&self.trigger_steps())
    }

    /// `k'(ε)`: index of the first hold-phase sample.
    pub fn phase_switch_index(&self) -> Option<usize> {
        self.records.iter().position(|r| r.phase == Phase::Hold)
    }

    pub fn phase_switch_time(&self) -> Option<f64> {
        self.phase_switch_index().map(|k| self.records[k].t)
    }

    pub fn t0(&self) -> f64 {
        self.config.t0
    }

    pub fn tf(&self) -> f64 {
        self.end.t
    }

    /// Index of the segment containing `t` (the last one for `t = t_f`).
    pub fn segment_index(&self, t: f64) -> Result<usize> {
        if !(t >= self.t0() && t <= self.tf()) {
            return Err(Error::OutOfHorizon { t, t0: self.t0(), tf: self.tf() });
        }
        let after = self.records.partition_point(|r| r.t <= t);
        Ok(after.saturating_sub(1))
    }

    /// Evaluates the piecewise-affine state at `t`.
    pub fn interpolate(&self, t: f64) -> Result<DVector<f64>> {
        let k = self.segment_index(t)?;
        Ok(self.records[k].position_at(t))
    }
}

/// Free-function form of [`Trajectory::interpolate`].
pub fn interpolate(traj: &Trajectory, t: f64) -> Result<DVector<f64>> {
    traj.interpolate(t)
}

/// Global truncation bound `(cτ/L)((1 + τL)^k − 1)` of a fixed-step Euler
/// discretization with Lipschitz constant `L` and local error constant `c`.
pub fn euler_error_bound(c: f64, lipschitz: f64, tau: f64, k: u32) -> f64 {
    let growth = (1.0 + tau * lipschitz).powi(k as i32) - 1.0;
    c * tau / lipschitz * growth
}

/// Runs the self-triggered optimizer.
///
/// At every sample the tracking direction is recomputed. While
/// `‖∇ₓf‖ ≥ √(2ε)` the next sample is placed at the zero of the triggering
/// polynomial `φ_k`, which makes `V` strictly decrease; below that level the
/// next sample is placed where `ψ_k = V_k + ∫φ_k` reaches `ε`, which keeps
/// `V ≤ ε`. The final step is clamped to `t_f`.
///
/// The oracle is only ever queried at the current sample `(x_k, t_k)`.
pub fn run_self_triggered<O: Objective + ?Sized>(
    oracle: &O,
    bounds: &DerivativeBounds,
    cfg: &SolverConfig,
) -> Result<Trajectory> {
    let threshold = (2.0 * cfg.epsilon).sqrt();
    integrate(oracle, cfg, |_, t, sample| {
        let v = sample.lyapunov();
        let coeffs = trigger_coefficients(&sample.direction, bounds);
        let tau = if sample.grad.norm() >= threshold {
            let phi = TriggerPolynomial::build(cfg.strategy, coeffs, v, cfg.alpha);
            (phi_root(&phi, cfg.root_tol)?, Phase::Descent)
        } else {
            let v = v.min(cfg.epsilon);
            let phi = TriggerPolynomial::build(cfg.strategy, coeffs, v, cfg.alpha);
            (psi_root(&build_psi(&phi), cfg.epsilon, v, cfg.root_tol)?, Phase::Hold)
        };
        Ok((t + tau.0, tau.1))
    })
}

/// Euler baseline with fixed period `h`: samples at `t0 + k·h`, the last step
/// clamped to `t_f`.
pub fn run_periodic<O: Objective + ?Sized>(oracle: &O, cfg: &SolverConfig, h: f64) -> Result<Trajectory> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidConfig(format!("sampling period must be positive, got {h}")));
    }
    cfg.validate()?;
    let span = cfg.tf - cfg.t0;
    // Guard against ⌈7/0.1⌉ = 71 style round-off.
    let steps = ((span / h) - 1e-9).ceil().max(1.0) as usize;
    if steps > cfg.max_samples {
        return Err(Error::SampleBudgetExceeded { max_samples: cfg.max_samples, t: cfg.t0 });
    }
    let mut times: Vec<f64> = (0..steps).map(|k| cfg.t0 + k as f64 * h).collect();
    times.push(cfg.tf);
    run_schedule(oracle, cfg, &times)
}

/// Replays a fixed list of sampling times `t_0 < t_1 < … < t_N = t_f`.
///
/// Feeding the sample times of a self-triggered run reproduces its
/// trajectory exactly.
pub fn run_schedule<O: Objective + ?Sized>(oracle: &O, cfg: &SolverConfig, times: &[f64]) -> Result<Trajectory> {
    if times.len() < 2 || times[0] != cfg.t0 || *times.last().unwrap() != cfg.tf {
        return Err(Error::InvalidConfig("schedule must run from t0 to tf with at least one step".into()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidConfig("schedule times must be strictly increasing".into()));
    }
    let threshold = (2.0 * cfg.epsilon).sqrt();
    integrate(oracle, cfg, |k, _, sample| {
        let phase = if sample.grad.norm() >= threshold { Phase::Descent } else { Phase::Hold };
        Ok((times[k + 1], phase))
    })
}

/// Shared sample-and-hold loop. `next` maps `(k, t_k, sample)` to the
/// unclamped next sampling time and the phase label.
fn integrate<O, F>(oracle: &O, cfg: &SolverConfig, mut next: F) -> Result<Trajectory>
where
    O: Objective + ?Sized,
    F: FnMut(usize, f64, &DirectionSample) -> Result<(f64, Phase)>,
{
    cfg.validate()?;
    let dim = oracle.dim();
    if cfg.x0.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: cfg.x0.len() });
    }
    let mut state = State { x: DVector::from_column_slice(&cfg.x0), t: cfg.t0 };
    check_region(cfg, &state, 0)?;

    let mut records = Vec::new();
    while state.t < cfg.tf {
        let k = records.len();
        if k >= cfg.max_samples {
            return Err(Error::SampleBudgetExceeded { max_samples: cfg.max_samples, t: state.t });
        }
        let sample = direction_sample(oracle, &state, cfg.alpha)?;
        let (proposed, phase) = next(k, state.t, &sample)?;
        let clamped = proposed > cfg.tf;
        let t_next = if clamped { cfg.tf } else { proposed };
        let tau = t_next - state.t;
        if !(tau > 0.0) {
            return Err(Error::StepUnderflow { k, t: state.t });
        }
        let x_next = &state.x + &sample.direction * tau;
        let v = sample.lyapunov();
        records.push(SampleRecord {
            k,
            t: state.t,
            x: std::mem::replace(&mut state.x, x_next),
            xdot: sample.direction,
            v,
            phase,
            tau,
            clamped,
        });
        state.t = t_next;
        check_region(cfg, &state, k + 1)?;
    }
    Ok(Trajectory { records, dim, config: cfg.clone(), end: state })
}

fn check_region(cfg: &SolverConfig, s: &State, k: usize) -> Result<()> {
    if let Some(region) = &cfg.region {
        if let Some(coord) = region.violation(&s.x) {
            return Err(Error::BoundsRegionExited { k, t: s.t, coord });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use nalgebra::DMatrix;

    use super::*;
    use crate::objective::FnObjective;

    fn static_quadratic() -> FnObjective {
        FnObjective::new(
            2,
            |x, _| 0.5 * x.norm_squared(),
            |x, _| x.clone(),
            |_, _| DMatrix::identity(2, 2),
            |_, _| DVector::zeros(2),
        )
        .unwrap()
    }

    fn bounds() -> DerivativeBounds {
        DerivativeBounds::new(1.0, 1.0, 1e-9, 1e-9, 1e-9, 1e-9).unwrap()
    }

    #[test]
    fn config_validation() {
        let ok = SolverConfig::new(5.0, 0.01, 0.0, 7.0, vec![0.0], Strategy::ThirdOrder);
        assert!(ok.validate().is_ok());
        let mut bad = ok.clone();
        bad.alpha = 0.0;
        assert!(bad.validate().is_err());
        let mut bad = ok.clone();
        bad.tf = 0.0;
        assert!(bad.validate().is_err());
        let mut bad = ok.clone();
        bad.max_samples = 0;
        assert!(bad.validate().is_err());
        let mut bad = ok;
        bad.x0 = vec![f64::NAN];
        assert!(bad.validate().is_err());
    }

    #[test]
    fn static_optimum_holds_throughout() {
        let cfg = SolverConfig::new(5.0, 0.01, 0.0, 3.0, vec![0.0, 0.0], Strategy::ThirdOrder);
        let traj = run_self_triggered(&static_quadratic(), &bounds(), &cfg).unwrap();
        assert!(traj.records.iter().all(|r| r.phase == Phase::Hold && r.v == 0.0));
        assert_eq!(traj.phase_switch_index(), Some(0));
        assert_eq!(traj.end.t, 3.0);
        assert_eq!(traj.end.x, DVector::zeros(2));
    }

    #[test]
    fn dimension_mismatch() {
        let cfg = SolverConfig::new(5.0, 0.01, 0.0, 3.0, vec![0.0], Strategy::ThirdOrder);
        assert!(matches!(
            run_self_triggered(&static_quadratic(), &bounds(), &cfg),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn budget_exhaustion() {
        let mut cfg = SolverConfig::new(5.0, 0.01, 0.0, 3.0, vec![1.0, 1.0], Strategy::ThirdOrder);
        cfg.max_samples = 2;
        let tight = DerivativeBounds::new(1.0, 1.0, 1.0, 10.0, 10.0, 10.0).unwrap();
        assert!(matches!(
            run_self_triggered(&static_quadratic(), &tight, &cfg),
            Err(Error::SampleBudgetExceeded { max_samples: 2, .. })
        ));
    }

    #[test]
    fn region_exit_detected() {
        let mut cfg = SolverConfig::new(5.0, 0.01, 0.0, 3.0, vec![0.5, 0.0], Strategy::ThirdOrder);
        cfg.region = Some(DomainBox::new(vec![-0.1, -0.1], vec![0.1, 0.1]).unwrap());
        assert!(matches!(
            run_self_triggered(&static_quadratic(), &bounds(), &cfg),
            Err(Error::BoundsRegionExited { k: 0, coord: 0, .. })
        ));
    }

    #[test]
    fn periodic_step_count() {
        let cfg = SolverConfig::new(5.0, 0.01, 0.0, 7.0, vec![1.0, -1.0], Strategy::ThirdOrder);
        let q = static_quadratic();
        assert_eq!(run_periodic(&q, &cfg, 0.1).unwrap().len(), 70);
        assert_eq!(run_periodic(&q, &cfg, 0.3).unwrap().len(), 24);
        assert_eq!(run_periodic(&q, &cfg, 0.001).unwrap().len(), 7000);
        let t = run_periodic(&q, &cfg, 0.3).unwrap();
        // The schedule ends exactly at tf, so nothing is clamped.
        assert!(!t.records.last().unwrap().clamped);
        assert!((t.records.last().unwrap().tau - 0.1).abs() < 1e-12);
        assert_eq!(t.end.t, 7.0);
        assert!(run_periodic(&q, &cfg, 0.0).is_err());
    }

    #[test]
    fn schedule_validation() {
        let cfg = SolverConfig::new(5.0, 0.01, 0.0, 1.0, vec![1.0, -1.0], Strategy::ThirdOrder);
        let q = static_quadratic();
        assert!(run_schedule(&q, &cfg, &[0.0]).is_err());
        assert!(run_schedule(&q, &cfg, &[0.0, 0.5, 0.5, 1.0]).is_err());
        assert!(run_schedule(&q, &cfg, &[0.1, 1.0]).is_err());
        assert_eq!(run_schedule(&q, &cfg, &[0.0, 0.4, 1.0]).unwrap().len(), 2);
    }

    #[test]
    fn interpolation_at_knots_and_midpoints() {
        let cfg = SolverConfig::new(1.0, 0.01, 0.0, 1.0, vec![1.0, -1.0], Strategy::ThirdOrder);
        let traj = run_periodic(&static_quadratic(), &cfg, 0.25).unwrap();
        for (i, r) in traj.records.iter().enumerate() {
            assert_eq!(traj.interpolate(r.t).unwrap(), r.x);
            let next = traj.records.get(i + 1).map_or(traj.end.x.clone(), |n| n.x.clone());
            let mid = traj.interpolate(r.t + 0.5 * r.tau).unwrap();
            assert!((mid - (&r.x + &next) * 0.5).norm() < 1e-15);
        }
        assert_eq!(traj.interpolate(1.0).unwrap(), traj.end.x);
        assert!(matches!(traj.interpolate(1.5), Err(Error::OutOfHorizon { .. })));
        assert!(matches!(interpolate(&traj, -0.1), Err(Error::OutOfHorizon { .. })));
    }

    #[test]
    fn euler_bound_values() {
        assert_eq!(euler_error_bound(1.0, 1.0, 1.0, 0), 0.0);
        assert_eq!(euler_error_bound(1.0, 1.0, 1.0, 1), 1.0);
        let mut prev = 0.0;
        for k in 0..50 {
            let e = euler_error_bound(0.3, 2.0, 0.05, k);
            assert!(e >= prev);
            prev = e;
        }
    }

    #[test]
    fn statistics_population_std() {
        let s = step_statistics(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.count, 4);
        assert_eq!(s.mean, 2.5);
        assert!((s.std - 1.25f64.sqrt()).abs() < 1e-15);
        assert_eq!((s.min, s.max), (1.0, 4.0));
        assert!(step_statistics(&[]).mean.is_nan());
    }

    #[test]
    fn phase_round_trip() {
        for p in [Phase::Descent, Phase::Hold] {
            assert_eq!(p.as_str().parse::<Phase>().unwrap(), p);
        }
    }
}
