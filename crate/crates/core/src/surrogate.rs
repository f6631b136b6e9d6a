//! Iterating `u ← u + O(u)` with a step oracle (exact Newton, a trained
//! operator, or zero) and timing the operator against the banded solver.

use std::fmt::Write as _;
use std::time::Instant;

use ndarray::Array2;
use rayon::prelude::*;

use crate::datagen::sensor_values;
use crate::error::{Error, Result};
use crate::neural::{stack_rows, DeepONet};
use crate::newton::{batch_newton_step, newton_step, relative_l2};
use crate::problems::Problem;
use crate::training::model_coords;

/// Something that proposes a step for each state.
pub trait StepOracle: Sync {
    fn steps(&self, p: &Problem, us: &[Vec<f64>]) -> Result<Vec<Vec<f64>>>;
}

/// The classical Newton step.
pub struct ExactNewton;

impl StepOracle for ExactNewton {
    fn steps(&self, p: &Problem, us: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        batch_newton_step(p, us).into_iter().collect()
    }
}

pub struct ZeroStep;

impl StepOracle for ZeroStep {
    fn steps(&self, p: &Problem, us: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        Ok(vec![vec![0.0; p.unknowns()]; us.len()])
    }
}

/// A trained operator. Outputs cover interior unknowns only, so every step
/// is zero on the boundary.
pub struct ModelOracle {
    pub model: DeepONet,
    coords: Array2<f64>,
}

impl ModelOracle {
    pub fn new(model: DeepONet, p: &Problem) -> Result<Self> {
        let coords = model_coords(&model, p)?;
        Ok(Self { model, coords })
    }

    pub fn sensors(&self, p: &Problem, us: &[Vec<f64>]) -> Result<Array2<f64>> {
        let rows = us.iter().map(|u| sensor_values(p, self.model.sensor_stride, u)).collect::<Result<Vec<_>>>()?;
        stack_rows(&rows)
    }
}

impl StepOracle for ModelOracle {
    fn steps(&self, p: &Problem, us: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if us.is_empty() {
            return Ok(vec![]);
        }
        let out = self.model.predict(self.sensors(p, us)?.view(), self.coords.view())?;
        Ok(out.outer_iter().map(|r| r.to_vec()).collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterateConfig {
    pub max_steps: usize,
    /// Switch to exact Newton once the residual Linf drops below this.
    pub hybrid_tail: Option<f64>,
    pub divergence_cap: f64,
}

impl Default for IterateConfig {
    fn default() -> Self {
        Self { max_steps: 10, hybrid_tail: None, divergence_cap: 1e6 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SurrogateTrajectory {
    pub iterates: Vec<Vec<f64>>,
    /// True residual Linf at each iterate.
    pub residual_linf: Vec<f64>,
    /// Relative L2 distance to the nearest reference solution, if any were given.
    pub dist_to_solution: Vec<Option<f64>>,
    /// Whether the step leading to iterate `k` came from exact Newton (false
    /// for the initial state).
    pub used_exact_newton: Vec<bool>,
    /// First iterate whose residual exceeds its predecessor's.
    pub first_residual_increase: Option<usize>,
    pub diverged: bool,
}

impl SurrogateTrajectory {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,residual_linf,dist_to_solution_rel_l2,used_exact_newton\n");
        for k in 0..self.iterates.len() {
            let d = self.dist_to_solution[k].map(|d| format!("{d:e}")).unwrap_or_default();
            let _ = writeln!(out, "{k},{:e},{d},{}", self.residual_linf[k], u8::from(self.used_exact_newton[k]));
        }
        out
    }
}

fn linf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn nearest(p: &Problem, u: &[f64], refs: &[Vec<f64>]) -> Option<f64> {
    refs.iter().map(|r| relative_l2(p, u, r)).min_by(f64::total_cmp)
}

/// Runs `max_steps` oracle steps from `u0` (fewer if the iterate leaves the
/// divergence cap or becomes non-finite).
pub fn operator_iterate(
    oracle: &dyn StepOracle,
    p: &Problem,
    u0: &[f64],
    cfg: &IterateConfig,
    references: &[Vec<f64>],
) -> Result<SurrogateTrajectory> {
    if u0.len() != p.unknowns() {
        return Err(Error::DimMismatch { expected: p.unknowns(), got: u0.len() });
    }
    let mut u = u0.to_vec();
    let mut t = SurrogateTrajectory {
        iterates: vec![u.clone()],
        residual_linf: vec![linf(&p.residual(&u)?)],
        dist_to_solution: vec![nearest(p, &u, references)],
        used_exact_newton: vec![false],
        first_residual_increase: None,
        diverged: false,
    };
    for k in 1..=cfg.max_steps {
        let r = *t.residual_linf.last().unwrap();
        let exact = cfg.hybrid_tail.is_some_and(|tol| r < tol);
        let step = if exact {
            newton_step(p, &u)?
        } else {
            oracle.steps(p, std::slice::from_ref(&u))?.pop().expect("one step per state")
        };
        for (ui, si) in u.iter_mut().zip(&step) {
            *ui += si;
        }
        let res = p.residual(&u)?;
        let rn = linf(&res);
        t.iterates.push(u.clone());
        t.residual_linf.push(rn);
        t.dist_to_solution.push(nearest(p, &u, references));
        t.used_exact_newton.push(exact);
        if t.first_residual_increase.is_none() && rn > r {
            t.first_residual_increase = Some(k);
        }
        if !rn.is_finite() || !u.iter().all(|v| v.is_finite()) || linf(&u) > cfg.divergence_cap {
            t.diverged = true;
            break;
        }
    }
    Ok(t)
}

/// Independent trajectories, run in parallel; order follows `starts`.
pub fn operator_iterate_many(
    oracle: &dyn StepOracle,
    p: &Problem,
    starts: &[Vec<f64>],
    cfg: &IterateConfig,
    references: &[Vec<f64>],
) -> Result<Vec<SurrogateTrajectory>> {
    starts.par_iter().map(|u0| operator_iterate(oracle, p, u0, cfg, references)).collect()
}

/// Median of the residual Linf at each step over trajectories that reached it.
pub fn median_residuals(trajs: &[SurrogateTrajectory]) -> Vec<f64> {
    let longest = trajs.iter().map(|t| t.residual_linf.len()).max().unwrap_or(0);
    (0..longest)
        .map(|k| {
            let mut v: Vec<f64> = trajs.iter().filter_map(|t| t.residual_linf.get(k).copied()).collect();
            v.sort_by(f64::total_cmp);
            let n = v.len();
            if n % 2 == 1 {
                v[n / 2]
            } else {
                0.5 * (v[n / 2 - 1] + v[n / 2])
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub n_systems: usize,
    pub solver_seconds: f64,
    pub solver_median: f64,
    pub operator_seconds: f64,
    pub operator_median: f64,
}

impl BenchRow {
    pub fn speedup(&self) -> f64 {
        self.solver_seconds / self.operator_seconds
    }
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("n_systems,solver_seconds,operator_seconds,speedup\n");
    for r in rows {
        let _ = writeln!(out, "{},{:e},{:e},{:e}", r.n_systems, r.solver_seconds, r.operator_seconds, r.speedup());
    }
    out
}

fn min_median(mut v: Vec<f64>) -> (f64, f64) {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let med = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
    (v[0], med)
}

/// Wall-clock time of one exact Newton step per input (banded LU) against
/// one batched operator evaluation (sensor extraction plus forward pass).
/// Inputs are reused cyclically when a count exceeds their number. Times are
/// min and median over `reps`.
pub fn bench(p: &Problem, oracle: &ModelOracle, inputs: &[Vec<f64>], counts: &[usize], reps: usize) -> Result<Vec<BenchRow>> {
    if inputs.is_empty() || reps == 0 || counts.contains(&0) {
        return Err(Error::InvalidArgument("bench needs inputs, reps >= 1 and counts >= 1".into()));
    }
    let mut rows = Vec::new();
    for &n in counts {
        let batch: Vec<Vec<f64>> = (0..n).map(|i| inputs[i % inputs.len()].clone()).collect();
        let mut solver = Vec::with_capacity(reps);
        let mut operator = Vec::with_capacity(reps);
        for _ in 0..reps {
            let t0 = Instant::now();
            let steps = batch_newton_step(p, &batch);
            solver.push(t0.elapsed().as_secs_f64());
            if let Some(Err(e)) = steps.into_iter().find(|s| s.is_err()) {
                return Err(e);
            }
            let t0 = Instant::now();
            let out = oracle.steps(p, &batch)?;
            operator.push(t0.elapsed().as_secs_f64());
            debug_assert_eq!(out.len(), n);
        }
        let (solver_seconds, solver_median) = min_median(solver);
        let (operator_seconds, operator_median) = min_median(operator);
        rows.push(BenchRow { n_systems: n, solver_seconds, solver_median, operator_seconds, operator_median });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::ArchConfig;
    use crate::newton::{newton_solve, sine_bump_guesses, NewtonConfig};
    use crate::problems::ScalarProblem;
    use crate::rng::Rng;

    #[test]
    fn exact_oracle_reproduces_newton() {
        for p in [Problem::from(ScalarProblem::example1d(63)), ScalarProblem::convex2d(15).into()] {
            let u0 = sine_bump_guesses(&p, &[3.0]).pop().unwrap();
            let nt = newton_solve(&p, &u0, &NewtonConfig::default()).unwrap();
            let cfg = IterateConfig { max_steps: nt.iterations(), ..Default::default() };
            let st = operator_iterate(&ExactNewton, &p, &u0, &cfg, &[]).unwrap();
            assert_eq!(st.iterates.len(), nt.iterates.len());
            for (a, b) in st.iterates.iter().zip(&nt.iterates) {
                assert!(a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12));
            }
            assert!(st.dist_to_solution.iter().all(Option::is_none));
        }
    }

    #[test]
    fn zero_oracle_is_stationary() {
        let p: Problem = ScalarProblem::example1d(31).into();
        let u0 = sine_bump_guesses(&p, &[1.0]).pop().unwrap();
        let t = operator_iterate(&ZeroStep, &p, &u0, &IterateConfig { max_steps: 4, ..Default::default() }, &[]).unwrap();
        assert!(t.iterates.iter().all(|u| *u == u0));
        assert!(t.residual_linf.windows(2).all(|w| w[0] == w[1]));
        assert_eq!(t.first_residual_increase, None);
    }

    #[test]
    fn hybrid_tail_switches_to_newton() {
        let p: Problem = ScalarProblem::example1d(31).into();
        let sol = newton_solve(&p, &p.lift(), &NewtonConfig::default()).unwrap().final_iterate().to_vec();
        let u0: Vec<f64> = sol.iter().map(|v| v + 1e-3).collect();
        let cfg = IterateConfig { max_steps: 3, hybrid_tail: Some(10.0), ..Default::default() };
        let t = operator_iterate(&ZeroStep, &p, &u0, &cfg, std::slice::from_ref(&sol)).unwrap();
        assert_eq!(t.used_exact_newton, vec![false, true, true, true]);
        assert!(t.dist_to_solution.last().unwrap().unwrap() < 1e-10);
        let csv = t.to_csv();
        assert!(csv.starts_with("step,residual_linf,dist_to_solution_rel_l2,used_exact_newton\n"));
        assert!(csv.lines().nth(2).unwrap().ends_with(",1"));
    }

    #[test]
    fn model_steps_are_finite_and_interior() {
        let p: Problem = ScalarProblem::example1d(20).into();
        let model = DeepONet::with_mlp_trunk(20, 1, 1, &ArchConfig::default(), &mut Rng::seed_from_u64(1)).unwrap();
        let oracle = ModelOracle::new(model, &p).unwrap();
        let us = sine_bump_guesses(&p, &[0.0, 1.0, 2.0]);
        let steps = oracle.steps(&p, &us).unwrap();
        assert_eq!(steps.len(), 3);
        assert!(steps.iter().all(|s| s.len() == p.unknowns() && s.iter().all(|v| v.is_finite())));
        let many = operator_iterate_many(&oracle, &p, &us, &IterateConfig { max_steps: 2, ..Default::default() }, &[]).unwrap();
        assert_eq!(many.len(), 3);
        assert_eq!(median_residuals(&many).len(), 3);
    }

    #[test]
    fn divergence_stops_iteration() {
        struct Huge;
        impl StepOracle for Huge {
            fn steps(&self, p: &Problem, us: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
                Ok(vec![vec![1e7; p.unknowns()]; us.len()])
            }
        }
        let p: Problem = ScalarProblem::example1d(7).into();
        let t = operator_iterate(&Huge, &p, &p.lift(), &IterateConfig::default(), &[]).unwrap();
        assert!(t.diverged);
        assert_eq!(t.iterates.len(), 2);
        assert_eq!(t.first_residual_increase, Some(1));
    }

    #[test]
    fn bench_single_row() {
        let p: Problem = ScalarProblem::convex2d(7).into();
        let model = DeepONet::with_mlp_trunk(49, 2, 1, &ArchConfig::default(), &mut Rng::seed_from_u64(2)).unwrap();
        let oracle = ModelOracle::new(model, &p).unwrap();
        let rows = bench(&p, &oracle, &[vec![0.1; 49]], &[1], 2).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].solver_seconds > 0.0 && rows[0].operator_seconds > 0.0);
        let csv = bench_csv(&rows);
        assert!(csv.starts_with("n_systems,solver_seconds,operator_seconds,speedup\n1,"));
    }
}
