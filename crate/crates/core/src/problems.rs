//! Built-in benchmark problems, grid estimation of derivative bounds, and a
//! Newton reference for the instantaneous minimizer.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use crate::dynamics::solve_spd;
use crate::error::{Error, Result};
use crate::objective::{DerivativeBounds, Objective};
use crate::solver::SolverConfig;
use crate::trigger::Strategy;

/// Lower floor for bounds that vanish identically (e.g. third derivatives of
/// a quadratic), keeping every trigger coefficient strictly positive.
pub const BOUND_FLOOR: f64 = 1e-9;

/// Step for central differences of analytic derivatives.
pub const FD_STEP: f64 = 1e-6;

/// Residual `‖∇ₓf‖` at which [`reference_optimum`] stops.
pub const OPTIMUM_TOL: f64 = 1e-12;
const OPTIMUM_MAX_ITER: usize = 100;

/// Axis-aligned box `lower ≤ x ≤ upper` (infinite ends allowed).
#[derive(Debug, Clone, PartialEq)]
pub struct DomainBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl DomainBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::InvalidConfig("box bounds must be non-empty and of equal length".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::InvalidConfig("box lower bounds must not exceed upper bounds".into()));
        }
        Ok(Self { lower, upper })
    }

    /// The symmetric cube `[−r, r]ⁿ`.
    pub fn cube(n: usize, r: f64) -> Result<Self> {
        Self::new(vec![-r; n], vec![r; n])
    }

    pub fn unbounded(n: usize) -> Self {
        Self { lower: vec![f64::NEG_INFINITY; n], upper: vec![f64::INFINITY; n] }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn is_finite(&self) -> bool {
        self.lower.iter().chain(&self.upper).all(|v| v.is_finite())
    }

    /// First coordinate of `x` outside the box, if any.
    pub fn violation(&self, x: &DVector<f64>) -> Option<usize> {
        (0..self.dim()).find(|&i| !(x[i] >= self.lower[i] && x[i] <= self.upper[i]))
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        x.len() == self.dim() && self.violation(x).is_none()
    }
}

type OptimumFn = dyn Fn(f64) -> DVector<f64> + Send + Sync;

/// A named objective with certified bounds and defaults for running it.
#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub oracle: Arc<dyn Objective>,
    pub bounds: DerivativeBounds,
    /// Closed-form `x*(t)`, when known.
    pub reference_optimum: Option<Arc<OptimumFn>>,
    /// Region on which `bounds` are certified.
    pub domain_box: DomainBox,
    pub default_x0: Vec<f64>,
    pub default_horizon: (f64, f64),
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("bounds", &self.bounds)
            .field("domain_box", &self.domain_box)
            .field("closed_form_optimum", &self.reference_optimum.is_some())
            .finish_non_exhaustive()
    }
}

impl ProblemSpec {
    pub fn dim(&self) -> usize {
        self.oracle.dim()
    }

    /// Run configuration with this problem's defaults and its region check.
    pub fn config(&self, strategy: Strategy, alpha: f64, epsilon: f64) -> SolverConfig {
        let (t0, tf) = self.default_horizon;
        let mut cfg = SolverConfig::new(alpha, epsilon, t0, tf, self.default_x0.clone(), strategy);
        cfg.region = Some(self.domain_box.clone());
        cfg
    }

    /// `x*(t)`: the closed form when available, otherwise Newton from `seed`.
    pub fn optimum_at(&self, t: f64, seed: &DVector<f64>) -> Result<DVector<f64>> {
        match &self.reference_optimum {
            Some(f) => Ok(f(t)),
            None => reference_optimum(self.oracle.as_ref(), t, seed),
        }
    }

    /// `x*` on an increasing time grid, warm-starting each solve from the
    /// previous minimizer.
    pub fn optimum_path(&self, times: &[f64], seed: &DVector<f64>) -> Result<Vec<DVector<f64>>> {
        let mut out = Vec::with_capacity(times.len());
        let mut seed = seed.clone();
        for &t in times {
            let x = self.optimum_at(t, &seed)?;
            seed = x.clone();
            out.push(x);
        }
        Ok(out)
    }
}

/// `f(x, t) = ½(x − cos ωt)² + (k/2)·cos²(2ωt)·exp(μx²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PaperObjective {
    pub omega: f64,
    pub k: f64,
    pub mu: f64,
}

impl Default for PaperObjective {
    fn default() -> Self {
        Self { omega: PI / 5.0, k: 2.0, mu: 0.5 }
    }
}

impl PaperObjective {
    fn weight(&self, t: f64) -> f64 {
        (2.0 * self.omega * t).cos().powi(2)
    }

    /// `d/dt cos²(2ωt) = −2ω·sin(4ωt)`.
    fn weight_rate(&self, t: f64) -> f64 {
        -2.0 * self.omega * (4.0 * self.omega * t).sin()
    }
}

impl Objective for PaperObjective {
    fn dim(&self) -> usize {
        1
    }

    fn value(&self, x: &DVector<f64>, t: f64) -> f64 {
        let x = x[0];
        0.5 * (x - (self.omega * t).cos()).powi(2) + 0.5 * self.k * self.weight(t) * (self.mu * x * x).exp()
    }

    fn grad_x(&self, x: &DVector<f64>, t: f64) -> DVector<f64> {
        let x = x[0];
        let g = x - (self.omega * t).cos() + self.k * self.mu * x * self.weight(t) * (self.mu * x * x).exp();
        DVector::from_element(1, g)
    }

    fn hess_xx(&self, x: &DVector<f64>, t: f64) -> DMatrix<f64> {
        let x = x[0];
        let e = (self.mu * x * x).exp();
        let h = 1.0 + self.k * self.mu * self.weight(t) * e * (1.0 + 2.0 * self.mu * x * x);
        DMatrix::from_element(1, 1, h)
    }

    fn grad_xt(&self, x: &DVector<f64>, t: f64) -> DVector<f64> {
        let x = x[0];
        let e = (self.mu * x * x).exp();
        let g = self.omega * (self.omega * t).sin() + self.k * self.mu * x * e * self.weight_rate(t);
        DVector::from_element(1, g)
    }
}

/// Half-width of the region on which the 1-D problem's bounds are declared.
pub const PAPER_BOX_HALF_WIDTH: f64 = 1.2;
/// Third-derivative bounds `C_xxx, C_xxt, C_xtt` published with the 1-D problem.
pub const PAPER_C_XXX: f64 = 3.7212;
pub const PAPER_C_XXT: f64 = 2.6924;
pub const PAPER_C_XTT: f64 = 6.9369;

/// The 1-D tracking problem with `ω = π/5`, `k = 2`, `μ = 1/2` on `t ∈ [0, 7]`.
///
/// The third-derivative bounds are the published constants. The
/// second-order quantities, needed only by the second-order trigger and the
/// tracking-error bound, are closed-form bounds over `|x| ≤ 1.2`:
/// `m = 1` (attained where `cos(2ωt) = 0`), `C_xx = 1 + kμe^{μX²}(1 + 2μX²)`
/// and `C_xt = ω + 2ωkμX·e^{μX²}` with `X = 1.2`.
pub fn paper_problem_1d() -> ProblemSpec {
    let obj = PaperObjective::default();
    let x_max = PAPER_BOX_HALF_WIDTH;
    let e = (obj.mu * x_max * x_max).exp();
    let c_xx = 1.0 + obj.k * obj.mu * e * (1.0 + 2.0 * obj.mu * x_max * x_max);
    let c_xt = obj.omega + 2.0 * obj.omega * obj.k * obj.mu * x_max * e;
    let bounds = DerivativeBounds { m: 1.0, c_xx, c_xt, c_xxx: PAPER_C_XXX, c_xxt: PAPER_C_XXT, c_xtt: PAPER_C_XTT };
    ProblemSpec {
        name: "paper1d".into(),
        oracle: Arc::new(obj),
        bounds,
        reference_optimum: None,
        domain_box: DomainBox { lower: vec![-x_max], upper: vec![x_max] },
        default_x0: vec![0.0],
        default_horizon: (0.0, 7.0),
    }
}

/// `f(x, t) = ½‖x − r(t)‖²` with `r_i(t) = cos(ωt + i)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticTracking {
    pub n: usize,
    pub omega: f64,
}

impl QuadraticTracking {
    pub fn target(&self, t: f64) -> DVector<f64> {
        DVector::from_fn(self.n, |i, _| (self.omega * t + i as f64).cos())
    }

    pub fn target_rate(&self, t: f64) -> DVector<f64> {
        DVector::from_fn(self.n, |i, _| -self.omega * (self.omega * t + i as f64).sin())
    }
}

impl Objective for QuadraticTracking {
    fn dim(&self) -> usize {
        self.n
    }
    fn value(&self, x: &DVector<f64>, t: f64) -> f64 {
        0.5 * (x - self.target(t)).norm_squared()
    }
    fn grad_x(&self, x: &DVector<f64>, t: f64) -> DVector<f64> {
        x - self.target(t)
    }
    fn hess_xx(&self, _x: &DVector<f64>, _t: f64) -> DMatrix<f64> {
        DMatrix::identity(self.n, self.n)
    }
    fn grad_xt(&self, _x: &DVector<f64>, t: f64) -> DVector<f64> {
        -self.target_rate(t)
    }
}

/// Closed-form testbed whose minimizer is `r(t)`.
///
/// Bounds: `m = C_xx = 1`, `C_xt = ω√n`, `C_xtt = ω²√n`, and the vanishing
/// `C_xxx`, `C_xxt` floored at [`BOUND_FLOOR`].
pub fn quadratic_tracking(n: usize, omega: f64) -> Result<ProblemSpec> {
    if n == 0 {
        return Err(Error::InvalidConfig("quadratic_tracking needs n >= 1".into()));
    }
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::InvalidConfig(format!("omega must be positive, got {omega}")));
    }
    let obj = QuadraticTracking { n, omega };
    let root_n = (n as f64).sqrt();
    let bounds = DerivativeBounds::new(
        1.0,
        1.0,
        (omega * root_n).max(BOUND_FLOOR),
        BOUND_FLOOR,
        BOUND_FLOOR,
        (omega * omega * root_n).max(BOUND_FLOOR),
    )?;
    Ok(ProblemSpec {
        name: format!("quad:{n},{omega}"),
        oracle: Arc::new(obj),
        bounds,
        reference_optimum: Some(Arc::new(move |t| obj.target(t))),
        domain_box: DomainBox::unbounded(n),
        default_x0: vec![0.0; n],
        default_horizon: (0.0, 7.0),
    })
}

/// Resolves `paper1d` or `quad:<n>,<omega>`.
pub fn problem_by_id(id: &str) -> Result<ProblemSpec> {
    if id == "paper1d" {
        return Ok(paper_problem_1d());
    }
    if let Some(args) = id.strip_prefix("quad:") {
        let mut parts = args.split(',');
        let (Some(n), Some(omega), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::UnknownProblem(id.into()));
        };
        let n: usize = n.trim().parse().map_err(|_| Error::UnknownProblem(id.into()))?;
        let omega: f64 = omega.trim().parse().map_err(|_| Error::UnknownProblem(id.into()))?;
        return quadratic_tracking(n, omega);
    }
    Err(Error::UnknownProblem(id.into()))
}

fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect()
}

/// Largest absolute eigenvalue, i.e. the operator 2-norm of a symmetric matrix.
fn symmetric_norm(m: DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m).eigenvalues.iter().fold(0.0, |acc, e| acc.max(e.abs()))
}

#[derive(Debug, Clone, Copy)]
struct PointMaxima {
    min_eig: f64,
    c_xx: f64,
    c_xt: f64,
    c_xxx: f64,
    c_xxt: f64,
    c_xtt: f64,
    t: f64,
}

impl PointMaxima {
    fn merge(self, o: Self) -> Self {
        Self {
            min_eig: self.min_eig.min(o.min_eig),
            c_xx: self.c_xx.max(o.c_xx),
            c_xt: self.c_xt.max(o.c_xt),
            c_xxx: self.c_xxx.max(o.c_xxx),
            c_xxt: self.c_xxt.max(o.c_xxt),
            c_xtt: self.c_xtt.max(o.c_xtt),
            t: if o.min_eig < self.min_eig { o.t } else { self.t },
        }
    }
}

/// Grid maxima of the derivative norms over `box × [t_lo, t_hi]`.
///
/// Uses `grid` equally spaced points per axis (ends included), so a grid of
/// `2g − 1` points contains the grid of `g`. Third derivatives come from
/// central differences of the analytic `∇ₓₓf` and `∇ₓₜf`. Bounds that vanish
/// are floored at [`BOUND_FLOOR`].
pub fn estimate_bounds<O: Objective + ?Sized>(
    oracle: &O,
    domain: &DomainBox,
    t_interval: (f64, f64),
    grid: usize,
) -> Result<DerivativeBounds> {
    let n = oracle.dim();
    if grid < 2 {
        return Err(Error::InvalidConfig("bound estimation needs at least 2 grid points per axis".into()));
    }
    if domain.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: domain.dim() });
    }
    if !domain.is_finite() {
        return Err(Error::InvalidConfig("bound estimation needs a finite box".into()));
    }
    let axes: Vec<Vec<f64>> = (0..n).map(|i| linspace(domain.lower[i], domain.upper[i], grid)).collect();
    let times = linspace(t_interval.0, t_interval.1, grid);
    let total = grid.checked_pow(n as u32 + 1).ok_or_else(|| Error::InvalidConfig("grid too large".into()))?;

    let h = FD_STEP;
    let maxima = (0..total)
        .into_par_iter()
        .map(|mut idx| {
            let t = times[idx % grid];
            idx /= grid;
            let x = DVector::from_fn(n, |i, _| {
                let v = axes[i][idx % grid];
                idx /= grid;
                v
            });
            let hess = oracle.hess_xx(&x, t);
            let eig = SymmetricEigen::new(hess).eigenvalues;
            let min_eig = eig.iter().copied().fold(f64::INFINITY, f64::min);
            let c_xx = eig.iter().fold(0.0_f64, |a, e| a.max(e.abs()));
            let c_xt = oracle.grad_xt(&x, t).norm();
            let c_xxx = (0..n)
                .map(|i| {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[i] += h;
                    xm[i] -= h;
                    symmetric_norm((oracle.hess_xx(&xp, t) - oracle.hess_xx(&xm, t)) / (2.0 * h))
                })
                .fold(0.0, f64::max);
            let c_xxt = symmetric_norm((oracle.hess_xx(&x, t + h) - oracle.hess_xx(&x, t - h)) / (2.0 * h));
            let c_xtt = ((oracle.grad_xt(&x, t + h) - oracle.grad_xt(&x, t - h)) / (2.0 * h)).norm();
            PointMaxima { min_eig, c_xx, c_xt, c_xxx, c_xxt, c_xtt, t }
        })
        .reduce_with(PointMaxima::merge)
        .expect("grid is non-empty");

    if !(maxima.min_eig > 0.0) {
        return Err(Error::NonConvexDetected { min_eig: maxima.min_eig, t: maxima.t });
    }
    Ok(DerivativeBounds {
        m: maxima.min_eig,
        c_xx: maxima.c_xx.max(maxima.min_eig),
        c_xt: maxima.c_xt.max(BOUND_FLOOR),
        c_xxx: maxima.c_xxx.max(BOUND_FLOOR),
        c_xxt: maxima.c_xxt.max(BOUND_FLOOR),
        c_xtt: maxima.c_xtt.max(BOUND_FLOOR),
    })
}

/// Minimizer of `f(·, t)` at frozen `t` by Newton's method from `seed`.
///
/// Full Newton steps are halved only if they would increase `‖∇ₓf‖`.
/// Stops once `‖∇ₓf‖ ≤ 1e-12`.
pub fn reference_optimum<O: Objective + ?Sized>(oracle: &O, t: f64, seed: &DVector<f64>) -> Result<DVector<f64>> {
    if seed.len() != oracle.dim() {
        return Err(Error::DimensionMismatch { expected: oracle.dim(), got: seed.len() });
    }
    let mut x = seed.clone();
    let mut g = oracle.grad_x(&x, t);
    let mut residual = g.norm();
    for _ in 0..OPTIMUM_MAX_ITER {
        if residual <= OPTIMUM_TOL {
            return Ok(x);
        }
        let step = solve_spd(oracle.hess_xx(&x, t), &g, t)?;
        let mut scale = 1.0;
        let (mut x_new, mut g_new);
        loop {
            x_new = &x - &step * scale;
            g_new = oracle.grad_x(&x_new, t);
            if g_new.norm() < residual || scale < 1e-6 {
                break;
            }
            scale *= 0.5;
        }
        if g_new.norm() >= residual {
            // Stalled at round-off level.
            break;
        }
        x = x_new;
        g = g_new;
        residual = g.norm();
    }
    if residual <= OPTIMUM_TOL {
        Ok(x)
    } else {
        Err(Error::NoConvergence { iterations: OPTIMUM_MAX_ITER, residual })
    }
}
