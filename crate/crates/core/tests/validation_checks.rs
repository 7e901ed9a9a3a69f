use nalgebra::{DMatrix, DVector};
use trigopt::problems::PaperObjective;
use trigopt::validation::{
    check_appendix_bounds, check_lyapunov_profile, check_oracle_consistency, check_trigger_soundness,
};
use trigopt::{paper_problem_1d, quadratic_tracking, run_self_triggered, DomainBox, Objective, Strategy, Trajectory};

fn paper_run(strategy: Strategy) -> Trajectory {
    let p = paper_problem_1d();
    run_self_triggered(p.oracle.as_ref(), &p.bounds, &p.config(strategy, 5.0, 0.01)).unwrap()
}

#[test]
fn paper_runs_pass_every_check() {
    let p = paper_problem_1d();
    for strategy in [Strategy::SecondOrder, Strategy::ThirdOrder] {
        let traj = paper_run(strategy);
        let o = p.oracle.as_ref();
        for r in [
            check_trigger_soundness(&traj, o, &p.bounds, 200),
            check_appendix_bounds(&traj, o, &p.bounds, 200),
            check_lyapunov_profile(&traj, o, 200),
        ] {
            assert!(r.pass, "{strategy:?}\n{r}");
        }
    }
}

#[test]
fn quadratic_runs_pass_every_check() {
    for (n, omega) in [(1, 0.5), (4, 1.3)] {
        let p = quadratic_tracking(n, omega).unwrap();
        for strategy in [Strategy::SecondOrder, Strategy::ThirdOrder] {
            let traj = run_self_triggered(p.oracle.as_ref(), &p.bounds, &p.config(strategy, 5.0, 1e-3)).unwrap();
            let o = p.oracle.as_ref();
            assert!(check_trigger_soundness(&traj, o, &p.bounds, 200).pass);
            assert!(check_appendix_bounds(&traj, o, &p.bounds, 200).pass);
            assert!(check_lyapunov_profile(&traj, o, 200).pass);
        }
    }
}

#[test]
fn underclaimed_bounds_are_caught() {
    let p = paper_problem_1d();
    let bad = p.bounds.scaled(0.1);
    let traj = run_self_triggered(p.oracle.as_ref(), &bad, &p.config(Strategy::ThirdOrder, 5.0, 0.01)).unwrap();
    let r = check_trigger_soundness(&traj, p.oracle.as_ref(), &bad, 200);
    assert!(!r.pass);
    assert!(r.worst_violation > 0.0);
    assert!(r.location.is_some());
}

/// The 1-D benchmark objective with the sign of `∇ₓₜf` flipped.
struct FlippedDrift(PaperObjective);

impl Objective for FlippedDrift {
    fn dim(&self) -> usize {
        1
    }
    fn value(&self, x: &DVector<f64>, t: f64) -> f64 {
        self.0.value(x, t)
    }
    fn grad_x(&self, x: &DVector<f64>, t: f64) -> DVector<f64> {
        self.0.grad_x(x, t)
    }
    fn hess_xx(&self, x: &DVector<f64>, t: f64) -> DMatrix<f64> {
        self.0.hess_xx(x, t)
    }
    fn grad_xt(&self, x: &DVector<f64>, t: f64) -> DVector<f64> {
        -self.0.grad_xt(x, t)
    }
}

#[test]
fn inconsistent_oracle_is_caught() {
    let p = paper_problem_1d();
    let good = check_oracle_consistency(p.oracle.as_ref(), &p.domain_box, (0.0, 7.0), 100, 7).unwrap();
    assert!(good.pass, "{good}");
    let bad = check_oracle_consistency(&FlippedDrift(PaperObjective::default()), &p.domain_box, (0.0, 7.0), 100, 7)
        .unwrap();
    assert!(!bad.pass);
    let part = bad.parts.iter().find(|r| r.check == "grad_xt").unwrap();
    assert!(!part.pass);
    assert!(bad.parts.iter().filter(|r| r.check != "grad_xt").all(|r| r.pass));
}

#[test]
fn quadratic_oracle_consistent_on_a_cube() {
    let p = quadratic_tracking(5, 0.9).unwrap();
    let r = check_oracle_consistency(p.oracle.as_ref(), &DomainBox::cube(5, 3.0).unwrap(), (0.0, 7.0), 100, 1).unwrap();
    assert!(r.pass, "{r}");
}

#[test]
fn checks_are_deterministic() {
    let p = paper_problem_1d();
    let traj = paper_run(Strategy::ThirdOrder);
    let o = p.oracle.as_ref();
    assert_eq!(check_appendix_bounds(&traj, o, &p.bounds, 64), check_appendix_bounds(&traj, o, &p.bounds, 64));
    let a = check_oracle_consistency(o, &p.domain_box, (0.0, 7.0), 50, 3).unwrap();
    let b = check_oracle_consistency(o, &p.domain_box, (0.0, 7.0), 50, 3).unwrap();
    assert_eq!(a, b);
}

#[test]
fn refining_the_grid_never_hides_a_violation() {
    let p = paper_problem_1d();
    let o = p.oracle.as_ref();
    for factor in [1.0, 0.1] {
        let bounds = p.bounds.scaled(factor);
        let traj = run_self_triggered(o, &bounds, &p.config(Strategy::ThirdOrder, 5.0, 0.01)).unwrap();
        let mut prev = [f64::NEG_INFINITY; 3];
        for grid in [1, 2, 4, 8, 16, 32, 64] {
            let now = [
                check_trigger_soundness(&traj, o, &bounds, grid).worst_violation,
                check_appendix_bounds(&traj, o, &bounds, grid).worst_violation,
                check_lyapunov_profile(&traj, o, grid).worst_violation,
            ];
            for (n, p) in now.iter().zip(prev) {
                assert!(*n >= p - 1e-12, "grid {grid}: {n} < {p}");
            }
            prev = now;
        }
    }
}

#[test]
fn single_segment_run_has_a_valid_report() {
    let p = paper_problem_1d();
    let mut cfg = p.config(Strategy::ThirdOrder, 5.0, 0.01);
    cfg.tf = 1e-3;
    let traj = run_self_triggered(p.oracle.as_ref(), &p.bounds, &cfg).unwrap();
    assert_eq!(traj.len(), 1);
    let r = check_trigger_soundness(&traj, p.oracle.as_ref(), &p.bounds, 1);
    assert!(r.pass);
    assert_eq!(r.grid_density, 1);
    assert!(r.to_string().starts_with("PASS trigger_soundness"));
}
