//! Newton iteration on the discrete system `F(u) = 0` with exact banded LU
//! solves, trajectory recording, and multi-start sweeps.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::banded::BandedMatrix;
use crate::error::{Error, Result};
use crate::grid::Norm;
use crate::problems::Problem;

#[derive(Clone, Debug, PartialEq)]
pub struct NewtonConfig {
    /// Linf residual tolerance.
    pub tol_residual: f64,
    pub max_iter: usize,
    /// Linf bound on iterates; exceeding it counts as divergence.
    pub divergence_cap: f64,
    /// Step scale in (0, 1].
    pub damping: f64,
    /// The effective tolerance is never below `floor_factor * EPSILON *
    /// rounding_scale(u)`, the level at which the residual of a
    /// double-precision iterate is pure rounding noise. Zero disables it.
    pub floor_factor: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self { tol_residual: 1e-10, max_iter: 50, divergence_cap: 1e6, damping: 1.0, floor_factor: 8.0 }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_residual > 0.0) {
            return Err(Error::InvalidArgument(format!("tol_residual {} must be positive", self.tol_residual)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidArgument(format!("damping {} outside (0, 1]", self.damping)));
        }
        if !(self.divergence_cap > 0.0) || !(self.floor_factor >= 0.0) {
            return Err(Error::InvalidArgument("divergence_cap and floor_factor must be non-negative".into()));
        }
        Ok(())
    }

    /// Tolerance actually applied at iterate `u`.
    pub fn effective_tolerance(&self, p: &Problem, u: &[f64]) -> f64 {
        self.tol_residual.max(self.floor_factor * f64::EPSILON * p.rounding_scale(u))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NewtonStatus {
    Converged,
    MaxIter,
    Diverged,
    SingularJacobian,
}

#[derive(Clone, Debug)]
pub struct NewtonTrajectory {
    pub iterates: Vec<Vec<f64>>,
    pub steps: Vec<Vec<f64>>,
    /// Linf residual at each iterate.
    pub residual_norms: Vec<f64>,
    pub status: NewtonStatus,
    /// Effective tolerance at the last iterate.
    pub tolerance: f64,
}

impl NewtonTrajectory {
    pub fn final_iterate(&self) -> &[f64] {
        self.iterates.last().expect("trajectory holds the initial guess")
    }

    pub fn final_residual(&self) -> f64 {
        *self.residual_norms.last().expect("trajectory holds the initial residual")
    }

    pub fn iterations(&self) -> usize {
        self.steps.len()
    }

    pub fn converged(&self) -> bool {
        self.status == NewtonStatus::Converged
    }

    /// CSV with columns `iter,residual_linf,step_l2`; the step column is
    /// empty on the last row.
    pub fn to_csv(&self, p: &Problem) -> String {
        let mut out = String::from("iter,residual_linf,step_l2\n");
        for (k, r) in self.residual_norms.iter().enumerate() {
            let step = self.steps.get(k).map(|s| format!("{:e}", p.norm(s, Norm::L2))).unwrap_or_default();
            let _ = writeln!(out, "{k},{r:e},{step}");
        }
        out
    }
}

pub fn assemble_jacobian(p: &Problem, u: &[f64]) -> Result<BandedMatrix> {
    Ok(p.jacobian(u)?.assemble())
}

pub fn banded_lu_solve(m: &BandedMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    m.solve(rhs)
}

fn linf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Newton step `δu` solving `J(u) δu = -F(u)`.
pub fn newton_step(p: &Problem, u: &[f64]) -> Result<Vec<f64>> {
    let f = p.residual(u)?;
    step_from_residual(p, u, &f)
}

fn step_from_residual(p: &Problem, u: &[f64], f: &[f64]) -> Result<Vec<f64>> {
    let rhs: Vec<f64> = f.iter().map(|v| -v).collect();
    assemble_jacobian(p, u)?.solve(&rhs)
}

/// `‖J(u) δu + F(u)‖∞`, the defect of a claimed Newton step.
pub fn step_defect(p: &Problem, u: &[f64], du: &[f64]) -> Result<f64> {
    let f = p.residual(u)?;
    let jdu = p.jacobian(u)?.apply(du);
    Ok(jdu.iter().zip(&f).fold(0.0, |m, (a, b)| m.max((a + b).abs())))
}

/// Runs Newton from `u0`. Non-convergence is reported through the status;
/// `Err` only signals malformed input.
pub fn newton_solve(p: &Problem, u0: &[f64], cfg: &NewtonConfig) -> Result<NewtonTrajectory> {
    cfg.validate()?;
    if u0.len() != p.unknowns() {
        return Err(Error::DimMismatch { expected: p.unknowns(), got: u0.len() });
    }
    let mut u = u0.to_vec();
    let mut f = p.residual(&u)?;
    let mut traj = NewtonTrajectory {
        iterates: vec![u.clone()],
        steps: Vec::new(),
        residual_norms: vec![linf(&f)],
        status: NewtonStatus::MaxIter,
        tolerance: cfg.effective_tolerance(p, &u),
    };
    loop {
        let rn = *traj.residual_norms.last().unwrap();
        traj.tolerance = cfg.effective_tolerance(p, &u);
        if !rn.is_finite() {
            traj.status = NewtonStatus::Diverged;
            break;
        }
        if rn <= traj.tolerance {
            traj.status = NewtonStatus::Converged;
            break;
        }
        if traj.steps.len() >= cfg.max_iter {
            traj.status = NewtonStatus::MaxIter;
            break;
        }
        let step = match step_from_residual(p, &u, &f) {
            Ok(s) => s,
            Err(Error::SingularJacobian { .. }) => {
                traj.status = NewtonStatus::SingularJacobian;
                break;
            }
            Err(e) => return Err(e),
        };
        for (ui, si) in u.iter_mut().zip(&step) {
            *ui += cfg.damping * si;
        }
        f = p.residual(&u)?;
        traj.steps.push(step);
        traj.iterates.push(u.clone());
        traj.residual_norms.push(linf(&f));
        if !u.iter().all(|v| v.is_finite()) || linf(&u) > cfg.divergence_cap {
            traj.status = NewtonStatus::Diverged;
            break;
        }
    }
    Ok(traj)
}

/// `‖a - b‖ / max(‖a‖, ‖b‖)` in the discrete L2 norm (0 when both vanish).
pub fn relative_l2(p: &Problem, a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = p.norm(a, Norm::L2).max(p.norm(b, Norm::L2));
    if scale == 0.0 {
        0.0
    } else {
        p.norm(&diff, Norm::L2) / scale
    }
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub state: Vec<f64>,
    pub residual_linf: f64,
    pub l2_norm: f64,
    /// Indices of the guesses that converged to this solution.
    pub guesses: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct SweepReport {
    /// Distinct solutions sorted by L2 norm.
    pub solutions: Vec<Solution>,
    /// One trajectory per guess, in guess order.
    pub trajectories: Vec<NewtonTrajectory>,
}

impl SweepReport {
    pub fn converged_count(&self) -> usize {
        self.trajectories.iter().filter(|t| t.converged()).count()
    }

    pub fn summary(&self, p: &Problem) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "guesses={}", self.trajectories.len());
        let _ = writeln!(out, "converged={}", self.converged_count());
        let _ = writeln!(out, "distinct_solutions={}", self.solutions.len());
        for (k, s) in self.solutions.iter().enumerate() {
            let _ = writeln!(
                out,
                "solution_{k}: l2={:.12e} linf={:.12e} residual_linf={:.3e} guesses={:?}",
                s.l2_norm,
                p.norm(&s.state, Norm::Linf),
                s.residual_linf,
                s.guesses
            );
        }
        for (k, t) in self.trajectories.iter().enumerate() {
            let _ = writeln!(
                out,
                "guess_{k}: status={:?} iterations={} residual_linf={:.3e}",
                t.status,
                t.iterations(),
                t.final_residual()
            );
        }
        out
    }
}

/// Solves from every guess and clusters the converged endpoints: two
/// endpoints are the same solution iff their relative L2 distance is below
/// `dedup_tol`. Items may run in parallel; results depend only on guess order.
pub fn sweep_solutions(p: &Problem, guesses: &[Vec<f64>], cfg: &NewtonConfig, dedup_tol: f64) -> Result<SweepReport> {
    if guesses.is_empty() {
        return Err(Error::InvalidArgument("sweep needs at least one guess".into()));
    }
    let trajectories: Vec<NewtonTrajectory> =
        guesses.par_iter().map(|g| newton_solve(p, g, cfg)).collect::<Result<_>>()?;
    let mut solutions: Vec<Solution> = Vec::new();
    for (k, t) in trajectories.iter().enumerate().filter(|(_, t)| t.converged()) {
        let u = t.final_iterate();
        match solutions.iter_mut().find(|s| relative_l2(p, &s.state, u) < dedup_tol) {
            Some(s) => s.guesses.push(k),
            None => solutions.push(Solution {
                state: u.to_vec(),
                residual_linf: t.final_residual(),
                l2_norm: p.norm(u, Norm::L2),
                guesses: vec![k],
            }),
        }
    }
    solutions.sort_by(|a, b| a.l2_norm.total_cmp(&b.l2_norm));
    Ok(SweepReport { solutions, trajectories })
}

/// One Newton step per input; the classical baseline the learned operator
/// replaces.
pub fn batch_newton_step(p: &Problem, us: &[Vec<f64>]) -> Vec<Result<Vec<f64>>> {
    us.par_iter().map(|u| newton_step(p, u)).collect()
}

/// `lift + a * Π_d sin(π x_d)` for each amplitude `a`.
pub fn sine_bump_guesses(p: &Problem, amplitudes: &[f64]) -> Vec<Vec<f64>> {
    let grid = *p.grid();
    let bump = grid.map_points(|x, y| if grid.dim() == 1 { (PI * x).sin() } else { (PI * x).sin() * (PI * y).sin() });
    let lift = p.lift();
    amplitudes
        .iter()
        .map(|a| {
            let mut g = lift.clone();
            for (k, b) in bump.iter().enumerate() {
                for c in 0..p.components() {
                    g[k * p.components() + c] += a * b;
                }
            }
            g
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Boundary, Grid};
    use crate::problems::{GrayScottProblem, ScalarProblem};

    fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut m = a.to_vec();
        let mut x = b.to_vec();
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs())).unwrap();
            m.swap(k, p);
            x.swap(k, p);
            for i in k + 1..n {
                let f = m[i][k] / m[k][k];
                for j in k..n {
                    m[i][j] -= f * m[k][j];
                }
                x[i] -= f * x[k];
            }
        }
        for k in (0..n).rev() {
            let s: f64 = (k + 1..n).map(|j| m[k][j] * x[j]).sum();
            x[k] = (x[k] - s) / m[k][k];
        }
        x
    }

    #[test]
    fn example1d_from_linear_profile() {
        let p: Problem = ScalarProblem::example1d(1023).into();
        let t = newton_solve(&p, &p.lift(), &NewtonConfig::default()).unwrap();
        assert_eq!(t.status, NewtonStatus::Converged);
        assert!(t.iterations() <= 20);
        assert!(t.final_residual() <= t.tolerance);
        assert_eq!(t.steps.len() + 1, t.iterates.len());
    }

    #[test]
    fn linear_problem_takes_one_step() {
        let grid = Grid::square(9);
        let g = grid.map_points(|x, y| x * (1.0 - y) + 3.0);
        let p: Problem = ScalarProblem::linear(grid, g, Boundary::Sides(vec![1.0, 0.0, 0.5, 2.0])).unwrap().into();
        let t = newton_solve(&p, &vec![0.0; grid.len()], &NewtonConfig::default()).unwrap();
        assert_eq!(t.status, NewtonStatus::Converged);
        assert_eq!(t.iterations(), 1);
    }

    #[test]
    fn convex2d_converges_quadratically() {
        let p: Problem = ScalarProblem::convex2d(63).into();
        let t = newton_solve(&p, &sine_bump_guesses(&p, &[300.0])[0], &NewtonConfig::default()).unwrap();
        assert!(t.converged());
        let r = &t.residual_norms;
        assert!(r.len() >= 4, "{r:?}");
        // Ratios r_{k+1} / r_k^2 over the last three steps.
        let c = r.windows(2).rev().take(3).map(|w| w[1] / (w[0] * w[0])).fold(0.0f64, f64::max);
        assert!(c.is_finite() && c < 1e3, "{r:?}");
    }

    #[test]
    fn steps_satisfy_the_linear_system() {
        let p: Problem = ScalarProblem::convex2d(15).into();
        let t = newton_solve(&p, &vec![0.0; p.unknowns()], &NewtonConfig::default()).unwrap();
        for (u, du) in t.iterates.iter().zip(&t.steps) {
            let f = linf(&p.residual(u).unwrap());
            assert!(step_defect(&p, u, du).unwrap() <= 1e-8 * (1.0 + f));
        }
    }

    #[test]
    fn converged_solution_is_a_fixed_point() {
        let p: Problem = ScalarProblem::example1d(255).into();
        let cfg = NewtonConfig::default();
        let t = newton_solve(&p, &p.lift(), &cfg).unwrap();
        let again = newton_solve(&p, t.final_iterate(), &cfg).unwrap();
        assert!(again.converged());
        assert!(again.iterations() <= 1);
        assert!(relative_l2(&p, again.final_iterate(), t.final_iterate()) < 1e-9);
    }

    #[test]
    fn sweep_finds_two_solutions_of_example1d() {
        let p: Problem = ScalarProblem::example1d(255).into();
        let amps: Vec<f64> = (-4..=4).map(|k| 10.0 * k as f64).collect();
        let report = sweep_solutions(&p, &sine_bump_guesses(&p, &amps), &NewtonConfig::default(), 1e-4).unwrap();
        assert_eq!(report.solutions.len(), 2);
        assert!(relative_l2(&p, &report.solutions[0].state, &report.solutions[1].state) > 1e-2);
    }

    #[test]
    fn identical_guesses_give_one_solution() {
        let p: Problem = ScalarProblem::example1d(63).into();
        let cfg = NewtonConfig::default();
        let sol = newton_solve(&p, &p.lift(), &cfg).unwrap().final_iterate().to_vec();
        let report = sweep_solutions(&p, &vec![sol; 4], &cfg, 1e-4).unwrap();
        assert_eq!(report.solutions.len(), 1);
        assert_eq!(report.solutions[0].guesses, vec![0, 1, 2, 3]);
    }

    #[test]
    fn divergence_and_singularity_are_statuses() {
        let p: Problem = ScalarProblem::example1d(31).into();
        let cfg = NewtonConfig { divergence_cap: 1.5, ..Default::default() };
        let t = newton_solve(&p, &sine_bump_guesses(&p, &[-40.0])[0], &cfg).unwrap();
        assert_eq!(t.status, NewtonStatus::Diverged);

        let cfg = NewtonConfig { max_iter: 1, ..Default::default() };
        let p: Problem = ScalarProblem::nonconvex2d(15, 1600.0).into();
        let t = newton_solve(&p, &vec![0.0; p.unknowns()], &cfg).unwrap();
        assert_eq!(t.status, NewtonStatus::MaxIter);
        assert_eq!(t.iterations(), 1);
    }

    #[test]
    fn batch_steps_match_single_steps() {
        let p: Problem = ScalarProblem::nonconvex2d(15, 1600.0).into();
        let amps: Vec<f64> = (0..7).map(|k| 5.0 * k as f64 - 10.0).collect();
        let us = sine_bump_guesses(&p, &amps);
        let batch = batch_newton_step(&p, &us);
        assert_eq!(batch.len(), us.len());
        for (u, b) in us.iter().zip(&batch) {
            assert_eq!(b.as_ref().unwrap(), &newton_step(&p, u).unwrap());
        }
        assert!(batch_newton_step(&p, &[]).is_empty());
    }

    #[test]
    fn banded_solves_match_dense_for_catalog_jacobians() {
        let problems: Vec<Problem> = vec![
            ScalarProblem::example1d(9).into(),
            ScalarProblem::convex2d(7).into(),
            ScalarProblem::nonconvex2d(7, 1600.0).into(),
            GrayScottProblem::with_defaults(5).into(),
        ];
        let mut rng = crate::rng::Rng::seed_from_u64(8);
        for p in &problems {
            let u: Vec<f64> = (0..p.unknowns()).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let m = assemble_jacobian(p, &u).unwrap();
            let b: Vec<f64> = (0..p.unknowns()).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let x = banded_lu_solve(&m, &b).unwrap();
            let oracle = dense_solve(&m.to_dense(), &b);
            let scale = linf(&oracle);
            for (a, o) in x.iter().zip(&oracle) {
                assert!((a - o).abs() <= 1e-10 * scale);
            }
        }
    }

    #[test]
    fn scalar_2d_assembly_matches_brute_force() {
        let n = 5;
        let p: Problem = ScalarProblem::convex2d(n).into();
        let u: Vec<f64> = (0..n * n).map(|k| (k as f64 * 0.37).sin()).collect();
        let m = assemble_jacobian(&p, &u).unwrap().to_dense();
        let h2 = (1.0 / 6.0f64).powi(2);
        for i in 0..n * n {
            for j in 0..n * n {
                let (ri, ci) = (i / n, i % n);
                let (rj, cj) = (j / n, j % n);
                let adjacent = ri.abs_diff(rj) + ci.abs_diff(cj) == 1;
                let expected = if i == j {
                    4.0 / h2 + 2.0 * u[i]
                } else if adjacent {
                    -1.0 / h2
                } else {
                    0.0
                };
                assert!((m[i][j] - expected).abs() < 1e-10, "({i},{j})");
            }
        }
        let sym = (0..n * n).all(|i| (0..n * n).all(|j| m[i][j] == m[j][i]));
        assert!(sym);
    }

    #[test]
    fn gray_scott_assembly_band_and_trivial_state() {
        let p: Problem = GrayScottProblem::with_defaults(4).into();
        let m = assemble_jacobian(&p, &p.lift()).unwrap();
        assert_eq!(m.lower_bandwidth(), 9);
        assert_eq!(m.upper_bandwidth(), 9);
        let t = newton_solve(&p, &p.lift(), &NewtonConfig::default()).unwrap();
        assert!(t.converged());
        assert_eq!(t.iterations(), 0);
    }

    #[test]
    fn trajectory_csv_columns() {
        let p: Problem = ScalarProblem::example1d(15).into();
        let t = newton_solve(&p, &p.lift(), &NewtonConfig::default()).unwrap();
        let csv = t.to_csv(&p);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "iter,residual_linf,step_l2");
        assert_eq!(lines.len(), t.residual_norms.len() + 1);
        assert!(lines.last().unwrap().ends_with(','));
    }
}
