//! Discrete nonlinear problems `F(u) = 0` and their Jacobians.
//!
//! Sign convention everywhere: the Newton step solves `J δu = -F(u)` with
//! `J = ∂F/∂u`.
//!
//! Scalar problems are `F(u) = -D Δ_h u + R(u) - g` with Dirichlet data.
//! The Gray-Scott steady state uses two interleaved species per node
//! (`x[2k] = A_k`, `x[2k + 1] = S_k`) and replicate (Neumann) padding.

use std::f64::consts::PI;

use crate::banded::BandedMatrix;
use crate::error::{Error, Result};
use crate::grid::{laplacian_into, norm, Boundary, Grid, GridFunction, Norm, Padding};

/// Pointwise reaction term `R(u)` of a scalar problem.
#[derive(Clone, Debug, PartialEq)]
pub enum Reaction {
    Zero,
    /// `u^2`
    Square,
    /// `-u^2`
    NegSquare,
    /// `Σ c_k u^k`
    Polynomial(Vec<f64>),
}

impl Reaction {
    pub fn value(&self, u: f64) -> f64 {
        match self {
            Reaction::Zero => 0.0,
            Reaction::Square => u * u,
            Reaction::NegSquare => -u * u,
            Reaction::Polynomial(c) => c.iter().rev().fold(0.0, |acc, ck| acc * u + ck),
        }
    }

    pub fn derivative(&self, u: f64) -> f64 {
        match self {
            Reaction::Zero => 0.0,
            Reaction::Square => 2.0 * u,
            Reaction::NegSquare => -2.0 * u,
            Reaction::Polynomial(c) => c
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (k, ck)| acc * u + k as f64 * ck),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarProblem {
    grid: Grid,
    diffusion: f64,
    reaction: Reaction,
    source: Vec<f64>,
    boundary: Boundary,
}

impl ScalarProblem {
    pub fn new(grid: Grid, diffusion: f64, reaction: Reaction, source: Vec<f64>, boundary: Boundary) -> Result<Self> {
        if !(diffusion > 0.0) {
            return Err(Error::InvalidArgument(format!("diffusion {diffusion} must be positive")));
        }
        if source.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "source has {} values, grid has {}",
                source.len(),
                grid.len()
            )));
        }
        boundary.check(&grid)?;
        Ok(Self { grid, diffusion, reaction, source, boundary })
    }

    /// `-u'' + u^2 = 0` on (0,1), `u(0) = 0`, `u(1) = 1`.
    pub fn example1d(n: usize) -> Self {
        let grid = Grid::line(n);
        Self::new(grid, 1.0, Reaction::Square, vec![0.0; n], Boundary::Sides(vec![0.0, 1.0]))
            .expect("valid catalog problem")
    }

    /// `-Δu + u^2 - sin(5π(x+y)) = 0`, zero boundary.
    pub fn convex2d(n: usize) -> Self {
        let grid = Grid::square(n);
        let g = grid.map_points(|x, y| (5.0 * PI * (x + y)).sin());
        Self::new(grid, 1.0, Reaction::Square, g, Boundary::Zero).expect("valid catalog problem")
    }

    /// `-Δu - u^2 + s sin(πx) sin(πy) = 0`, zero boundary.
    pub fn nonconvex2d(n: usize, s: f64) -> Self {
        let grid = Grid::square(n);
        let g = grid.map_points(|x, y| -s * (PI * x).sin() * (PI * y).sin());
        Self::new(grid, 1.0, Reaction::NegSquare, g, Boundary::Zero).expect("valid catalog problem")
    }

    /// `-Δu = g`; Newton solves it in one step.
    pub fn linear(grid: Grid, source: Vec<f64>, boundary: Boundary) -> Result<Self> {
        Self::new(grid, 1.0, Reaction::Zero, source, boundary)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn boundary(&self) -> &Boundary {
        &self.boundary
    }

    pub fn reaction(&self) -> &Reaction {
        &self.reaction
    }

    pub fn source(&self) -> &[f64] {
        &self.source
    }

    pub fn diffusion(&self) -> f64 {
        self.diffusion
    }

    pub fn into_problem(self) -> Problem {
        Problem::Scalar(self)
    }

    pub fn without_source(mut self) -> Self {
        self.source.iter_mut().for_each(|v| *v = 0.0);
        self
    }

    fn check(&self, u: &GridFunction) -> Result<()> {
        if u.grid() != &self.grid {
            return Err(Error::GridMismatch(format!("field on {:?}, problem on {:?}", u.grid(), self.grid)));
        }
        Ok(())
    }

    pub fn residual(&self, u: &GridFunction) -> Result<GridFunction> {
        self.check(u)?;
        GridFunction::new(self.grid, self.residual_values(u.values())?, Boundary::Zero)
    }

    pub fn jacobian_diag(&self, u: &GridFunction) -> Result<GridFunction> {
        self.check(u)?;
        let d = u.values().iter().map(|&v| self.reaction.derivative(v)).collect();
        GridFunction::new(self.grid, d, Boundary::Zero)
    }

    pub(crate) fn residual_values(&self, u: &[f64]) -> Result<Vec<f64>> {
        check_len(u.len(), self.grid.len())?;
        let mut out = vec![0.0; u.len()];
        laplacian_into(&self.grid, u, Padding::Dirichlet(&self.boundary), -self.diffusion, &mut out);
        for ((o, &v), g) in out.iter_mut().zip(u).zip(&self.source) {
            *o += self.reaction.value(v) - g;
        }
        Ok(out)
    }

    fn rounding_scale(&self, u: &[f64]) -> f64 {
        let h = self.grid.h();
        let umax = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let stencil = 4.0 * self.grid.dim() as f64 * self.diffusion / (h * h);
        let rmax = u.iter().fold(0.0f64, |m, &v| m.max(self.reaction.value(v).abs()));
        let gmax = self.source.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        stencil * (umax + self.boundary.max_abs(&self.grid)) + rmax + gmax
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrayScottProblem {
    grid: Grid,
    pub d_a: f64,
    pub d_s: f64,
    pub mu: f64,
    pub rho: f64,
}

/// Reaction parts of the four Jacobian blocks, one diagonal field each.
#[derive(Clone, Debug, PartialEq)]
pub struct JacobianBlocks {
    /// ∂F_A/∂A without diffusion.
    pub aa: Vec<f64>,
    /// ∂F_A/∂S
    pub as_: Vec<f64>,
    /// ∂F_S/∂A
    pub sa: Vec<f64>,
    /// ∂F_S/∂S without diffusion.
    pub ss: Vec<f64>,
}

impl GrayScottProblem {
    pub const DEFAULT_N: usize = 63;
    pub const DEFAULT_D_A: f64 = 2.5e-4;
    pub const DEFAULT_D_S: f64 = 5.0e-4;
    pub const DEFAULT_MU: f64 = 0.065;
    pub const DEFAULT_RHO: f64 = 0.04;

    pub fn new(grid: Grid, d_a: f64, d_s: f64, mu: f64, rho: f64) -> Result<Self> {
        if grid.dim() != 2 {
            return Err(Error::InvalidArgument("Gray-Scott needs a 2D grid".into()));
        }
        if !(d_a > 0.0 && d_s > 0.0 && mu >= 0.0 && rho >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "Gray-Scott parameters D_A={d_a}, D_S={d_s}, mu={mu}, rho={rho}"
            )));
        }
        Ok(Self { grid, d_a, d_s, mu, rho })
    }

    pub fn with_defaults(n: usize) -> Self {
        Self::new(Grid::square(n), Self::DEFAULT_D_A, Self::DEFAULT_D_S, Self::DEFAULT_MU, Self::DEFAULT_RHO)
            .expect("valid defaults")
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn check(&self, f: &GridFunction) -> Result<()> {
        if f.grid() != &self.grid {
            return Err(Error::GridMismatch(format!("field on {:?}, problem on {:?}", f.grid(), self.grid)));
        }
        Ok(())
    }

    /// Steady-state residuals `(F_A, F_S)`.
    pub fn residual_system(&self, a: &GridFunction, s: &GridFunction) -> Result<(GridFunction, GridFunction)> {
        self.check(a)?;
        self.check(s)?;
        let (fa, fs) = self.residual_split(a.values(), s.values());
        Ok((
            GridFunction::new(self.grid, fa, Boundary::Zero)?,
            GridFunction::new(self.grid, fs, Boundary::Zero)?,
        ))
    }

    fn residual_split(&self, a: &[f64], s: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let len = self.grid.len();
        let mut fa = vec![0.0; len];
        let mut fs = vec![0.0; len];
        laplacian_into(&self.grid, a, Padding::Replicate, self.d_a, &mut fa);
        laplacian_into(&self.grid, s, Padding::Replicate, self.d_s, &mut fs);
        for k in 0..len {
            let sa2 = s[k] * a[k] * a[k];
            fa[k] += -sa2 + (self.mu + self.rho) * a[k];
            fs[k] += sa2 - self.rho * (1.0 - s[k]);
        }
        (fa, fs)
    }

    pub fn jacobian_blocks(&self, a: &GridFunction, s: &GridFunction) -> Result<JacobianBlocks> {
        self.check(a)?;
        self.check(s)?;
        Ok(self.blocks(a.values(), s.values()))
    }

    fn blocks(&self, a: &[f64], s: &[f64]) -> JacobianBlocks {
        let aa = a.iter().zip(s).map(|(a, s)| -2.0 * s * a + self.mu + self.rho).collect();
        let as_ = a.iter().map(|a| -a * a).collect();
        let sa = a.iter().zip(s).map(|(a, s)| 2.0 * s * a).collect();
        let ss = a.iter().map(|a| a * a + self.rho).collect();
        JacobianBlocks { aa, as_, sa, ss }
    }

    fn rounding_scale(&self, a: &[f64], s: &[f64]) -> f64 {
        let h = self.grid.h();
        let amax = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let smax = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        8.0 * self.d_a.max(self.d_s) / (h * h) * amax.max(smax)
            + smax * amax * amax
            + (self.mu + self.rho) * amax
            + self.rho * (1.0 + smax)
    }
}

pub(crate) fn split_species(x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let a = x.iter().step_by(2).copied().collect();
    let s = x.iter().skip(1).step_by(2).copied().collect();
    (a, s)
}

pub(crate) fn interleave(a: &[f64], s: &[f64]) -> Vec<f64> {
    a.iter().zip(s).flat_map(|(a, s)| [*a, *s]).collect()
}

fn check_len(got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(Error::DimMismatch { expected, got });
    }
    Ok(())
}

/// Linearization `J(u) = ∂F/∂u` at a point, applied matrix-free or assembled.
#[derive(Clone, Debug)]
pub enum Jacobian {
    Scalar { grid: Grid, diffusion: f64, diag: Vec<f64> },
    GrayScott { grid: Grid, d_a: f64, d_s: f64, blocks: JacobianBlocks },
}

impl Jacobian {
    pub fn order(&self) -> usize {
        match self {
            Jacobian::Scalar { grid, .. } => grid.len(),
            Jacobian::GrayScott { grid, .. } => 2 * grid.len(),
        }
    }

    /// `J v` for a step `v` (zero Dirichlet data, or replicate padding for
    /// Gray-Scott).
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.order());
        match self {
            Jacobian::Scalar { grid, diffusion, diag } => {
                let mut out = vec![0.0; v.len()];
                laplacian_into(grid, v, Padding::Dirichlet(&Boundary::Zero), -diffusion, &mut out);
                for ((o, d), x) in out.iter_mut().zip(diag).zip(v) {
                    *o += d * x;
                }
                out
            }
            Jacobian::GrayScott { grid, d_a, d_s, blocks } => {
                let (a, s) = split_species(v);
                let len = grid.len();
                let mut oa = vec![0.0; len];
                let mut os = vec![0.0; len];
                laplacian_into(grid, &a, Padding::Replicate, *d_a, &mut oa);
                laplacian_into(grid, &s, Padding::Replicate, *d_s, &mut os);
                for k in 0..len {
                    oa[k] += blocks.aa[k] * a[k] + blocks.as_[k] * s[k];
                    os[k] += blocks.sa[k] * a[k] + blocks.ss[k] * s[k];
                }
                interleave(&oa, &os)
            }
        }
    }

    /// `Jᵀ v`. Both padded Laplacians are symmetric, so only the reaction
    /// coupling is transposed.
    pub fn apply_transpose(&self, v: &[f64]) -> Vec<f64> {
        match self {
            Jacobian::Scalar { .. } => self.apply(v),
            Jacobian::GrayScott { grid, d_a, d_s, blocks } => {
                assert_eq!(v.len(), self.order());
                let (a, s) = split_species(v);
                let len = grid.len();
                let mut oa = vec![0.0; len];
                let mut os = vec![0.0; len];
                laplacian_into(grid, &a, Padding::Replicate, *d_a, &mut oa);
                laplacian_into(grid, &s, Padding::Replicate, *d_s, &mut os);
                for k in 0..len {
                    oa[k] += blocks.aa[k] * a[k] + blocks.sa[k] * s[k];
                    os[k] += blocks.as_[k] * a[k] + blocks.ss[k] * s[k];
                }
                interleave(&oa, &os)
            }
        }
    }

    /// Banded assembly: bandwidth 1 (1D), `n` (2D scalar) or `2n + 1`
    /// (interleaved Gray-Scott).
    pub fn assemble(&self) -> BandedMatrix {
        match self {
            Jacobian::Scalar { grid, diffusion, diag } => {
                let n = grid.n_interior();
                let len = grid.len();
                let c = diffusion / (grid.h() * grid.h());
                let bw = if grid.dim() == 1 { 1.min(len - 1) } else { n.min(len - 1) };
                let mut m = BandedMatrix::zeros(len, bw, bw).expect("valid band");
                for k in 0..len {
                    m.set(k, k, 2.0 * grid.dim() as f64 * c + diag[k]);
                    for nb in neighbors(grid, k).into_iter().flatten() {
                        m.set(k, nb, -c);
                    }
                }
                m
            }
            Jacobian::GrayScott { grid, d_a, d_s, blocks } => {
                let len = grid.len();
                let order = 2 * len;
                let bw = (2 * grid.n_interior() + 1).min(order - 1);
                let mut m = BandedMatrix::zeros(order, bw, bw).expect("valid band");
                let h2 = grid.h() * grid.h();
                for k in 0..len {
                    let nbs = neighbors(grid, k);
                    let present = nbs.iter().flatten().count() as f64;
                    let (ia, is) = (2 * k, 2 * k + 1);
                    // Replicate padding: each missing neighbor cancels one -1 on the diagonal.
                    m.set(ia, ia, -d_a * present / h2 + blocks.aa[k]);
                    m.set(is, is, -d_s * present / h2 + blocks.ss[k]);
                    m.set(ia, is, blocks.as_[k]);
                    m.set(is, ia, blocks.sa[k]);
                    for nb in nbs.into_iter().flatten() {
                        m.set(ia, 2 * nb, d_a / h2);
                        m.set(is, 2 * nb + 1, d_s / h2);
                    }
                }
                m
            }
        }
    }
}

/// Interior neighbors of flat index `k` (west, east, south, north).
fn neighbors(grid: &Grid, k: usize) -> [Option<usize>; 4] {
    let n = grid.n_interior();
    match grid.dim() {
        1 => [k.checked_sub(1), (k + 1 < n).then_some(k + 1), None, None],
        _ => {
            let (i, j) = (k / n, k % n);
            [
                (i > 0).then(|| k - n),
                (i + 1 < n).then(|| k + n),
                (j > 0).then(|| k - 1),
                (j + 1 < n).then(|| k + 1),
            ]
        }
    }
}

/// Serializable description of a catalog problem.
#[derive(Clone, Debug, PartialEq)]
pub enum ProblemSpec {
    Example1d { n: usize },
    Convex2d { n: usize },
    Nonconvex2d { n: usize, s: f64 },
    GrayScott { n: usize, d_a: f64, d_s: f64, mu: f64, rho: f64 },
    /// `-Δu + Σ c_k u^k = 0` with zero boundary.
    Polynomial { dim: usize, n: usize, coeffs: Vec<f64> },
}

impl ProblemSpec {
    pub fn tag(&self) -> u8 {
        match self {
            ProblemSpec::Example1d { .. } => 0,
            ProblemSpec::Convex2d { .. } => 1,
            ProblemSpec::Nonconvex2d { .. } => 2,
            ProblemSpec::GrayScott { .. } => 3,
            ProblemSpec::Polynomial { .. } => 4,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ProblemSpec::Example1d { .. } => "example1d",
            ProblemSpec::Convex2d { .. } => "convex2d",
            ProblemSpec::Nonconvex2d { .. } => "nonconvex2d",
            ProblemSpec::GrayScott { .. } => "grayscott",
            ProblemSpec::Polynomial { .. } => "polynomial",
        }
    }

    /// Parameters as the f64 list stored in dataset headers.
    pub fn params(&self) -> Vec<f64> {
        match self {
            ProblemSpec::Example1d { n } | ProblemSpec::Convex2d { n } => vec![*n as f64],
            ProblemSpec::Nonconvex2d { n, s } => vec![*n as f64, *s],
            ProblemSpec::GrayScott { n, d_a, d_s, mu, rho } => vec![*n as f64, *d_a, *d_s, *mu, *rho],
            ProblemSpec::Polynomial { dim, n, coeffs } => {
                let mut p = vec![*dim as f64, *n as f64];
                p.extend_from_slice(coeffs);
                p
            }
        }
    }

    pub fn from_tag(tag: u8, params: &[f64]) -> Result<Self> {
        let count = |k: usize| -> Result<usize> {
            let v = *params.get(k).ok_or_else(|| Error::Malformed(format!("problem tag {tag}: missing parameter {k}")))?;
            if v < 1.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
                return Err(Error::Malformed(format!("problem tag {tag}: bad integer parameter {v}")));
            }
            Ok(v as usize)
        };
        let expect = |len: usize| -> Result<()> {
            if params.len() != len {
                return Err(Error::Malformed(format!("problem tag {tag}: {} parameters, expected {len}", params.len())));
            }
            Ok(())
        };
        Ok(match tag {
            0 => {
                expect(1)?;
                ProblemSpec::Example1d { n: count(0)? }
            }
            1 => {
                expect(1)?;
                ProblemSpec::Convex2d { n: count(0)? }
            }
            2 => {
                expect(2)?;
                ProblemSpec::Nonconvex2d { n: count(0)?, s: params[1] }
            }
            3 => {
                expect(5)?;
                ProblemSpec::GrayScott { n: count(0)?, d_a: params[1], d_s: params[2], mu: params[3], rho: params[4] }
            }
            4 => ProblemSpec::Polynomial { dim: count(0)?, n: count(1)?, coeffs: params[2..].to_vec() },
            t => return Err(Error::Malformed(format!("unknown problem tag {t}"))),
        })
    }

    pub fn build(&self) -> Result<Problem> {
        Ok(match self {
            ProblemSpec::Example1d { n } => Problem::Scalar(ScalarProblem::example1d(*n)),
            ProblemSpec::Convex2d { n } => Problem::Scalar(ScalarProblem::convex2d(*n)),
            ProblemSpec::Nonconvex2d { n, s } => Problem::Scalar(ScalarProblem::nonconvex2d(*n, *s)),
            ProblemSpec::GrayScott { n, d_a, d_s, mu, rho } => {
                Problem::GrayScott(GrayScottProblem::new(Grid::square(*n), *d_a, *d_s, *mu, *rho)?)
            }
            ProblemSpec::Polynomial { dim, n, coeffs } => {
                let grid = Grid::new(*dim, *n)?;
                Problem::Scalar(ScalarProblem::new(
                    grid,
                    1.0,
                    Reaction::Polynomial(coeffs.clone()),
                    vec![0.0; grid.len()],
                    Boundary::Zero,
                )?)
            }
        })
    }
}

/// Any problem the Newton solver and the training losses can work with.
/// States are flat vectors of interior unknowns.
#[derive(Clone, Debug, PartialEq)]
pub enum Problem {
    Scalar(ScalarProblem),
    GrayScott(GrayScottProblem),
}

impl From<ScalarProblem> for Problem {
    fn from(p: ScalarProblem) -> Self {
        Problem::Scalar(p)
    }
}

impl From<GrayScottProblem> for Problem {
    fn from(p: GrayScottProblem) -> Self {
        Problem::GrayScott(p)
    }
}

impl Problem {
    pub fn grid(&self) -> &Grid {
        match self {
            Problem::Scalar(p) => p.grid(),
            Problem::GrayScott(p) => p.grid(),
        }
    }

    /// Fields per grid node.
    pub fn components(&self) -> usize {
        match self {
            Problem::Scalar(_) => 1,
            Problem::GrayScott(_) => 2,
        }
    }

    pub fn unknowns(&self) -> usize {
        self.components() * self.grid().len()
    }

    pub fn residual(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(x.len(), self.unknowns())?;
        match self {
            Problem::Scalar(p) => p.residual_values(x),
            Problem::GrayScott(p) => {
                let (a, s) = split_species(x);
                let (fa, fs) = p.residual_split(&a, &s);
                Ok(interleave(&fa, &fs))
            }
        }
    }

    pub fn jacobian(&self, x: &[f64]) -> Result<Jacobian> {
        check_len(x.len(), self.unknowns())?;
        Ok(match self {
            Problem::Scalar(p) => Jacobian::Scalar {
                grid: p.grid,
                diffusion: p.diffusion,
                diag: x.iter().map(|&v| p.reaction.derivative(v)).collect(),
            },
            Problem::GrayScott(p) => {
                let (a, s) = split_species(x);
                Jacobian::GrayScott { grid: p.grid, d_a: p.d_a, d_s: p.d_s, blocks: p.blocks(&a, &s) }
            }
        })
    }

    /// Magnitude of the terms summed into `F(x)`; the residual cannot be
    /// resolved much below `f64::EPSILON` times this.
    pub fn rounding_scale(&self, x: &[f64]) -> f64 {
        match self {
            Problem::Scalar(p) => p.rounding_scale(x),
            Problem::GrayScott(p) => {
                let (a, s) = split_species(x);
                p.rounding_scale(&a, &s)
            }
        }
    }

    /// Norm of a state; per-species norms are combined in quadrature (max for Linf).
    pub fn norm(&self, x: &[f64], kind: Norm) -> f64 {
        match self {
            Problem::Scalar(p) => norm(&p.grid, x, kind),
            Problem::GrayScott(p) => {
                let (a, s) = split_species(x);
                let (na, ns) = (norm(&p.grid, &a, kind), norm(&p.grid, &s, kind));
                match kind {
                    Norm::Linf => na.max(ns),
                    _ => na.hypot(ns),
                }
            }
        }
    }

    /// Default starting point: the boundary lift for scalar problems, the
    /// trivial steady state `(A, S) = (0, 1)` for Gray-Scott.
    pub fn lift(&self) -> Vec<f64> {
        match self {
            Problem::Scalar(p) => p.boundary.lift(&p.grid),
            Problem::GrayScott(p) => interleave(&vec![0.0; p.grid.len()], &vec![1.0; p.grid.len()]),
        }
    }

    /// Splits a state into grid functions (one per species) carrying the
    /// problem's boundary data.
    pub fn to_fields(&self, x: &[f64]) -> Result<Vec<GridFunction>> {
        check_len(x.len(), self.unknowns())?;
        match self {
            Problem::Scalar(p) => Ok(vec![GridFunction::new(p.grid, x.to_vec(), p.boundary.clone())?]),
            Problem::GrayScott(p) => {
                let (a, s) = split_species(x);
                Ok(vec![GridFunction::new(p.grid, a, Boundary::Zero)?, GridFunction::new(p.grid, s, Boundary::Zero)?])
            }
        }
    }
}
