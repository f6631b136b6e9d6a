//! Random input fields, Newton-series datasets and their binary format.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::codec::{ByteReader, ByteWriter};
use crate::error::{Error, Result};
use crate::grid::{sensor_indices, Boundary, Grid, GridFunction, Norm};
use crate::newton::{newton_step, step_defect};
use crate::problems::{Problem, ProblemSpec};
pub use crate::rng::Rng;

pub const DATASET_VERSION: u16 = 1;
/// Redraws allowed per requested series before giving up.
pub const REDRAW_BUDGET: u64 = 10;
/// Label validity: `‖J du + F‖∞ ≤ LABEL_RTOL · (1 + ‖F‖∞)`.
pub const LABEL_RTOL: f64 = 1e-8;

/// `Σ_{i≤K} a_i x^i` with `a_i ~ U[-L, L]`, on a 1D grid. The boundary
/// carries the polynomial's end values.
pub fn random_polynomial_field(rng: &mut Rng, degree: usize, bound: f64, grid: &Grid) -> Result<GridFunction> {
    if grid.dim() != 1 {
        return Err(Error::InvalidArgument("polynomial fields are 1D only".into()));
    }
    if !(bound > 0.0) {
        return Err(Error::InvalidArgument(format!("coefficient bound {bound} must be positive")));
    }
    let coeffs: Vec<f64> = (0..=degree).map(|_| rng.uniform(-bound, bound)).collect();
    let eval = |x: f64| coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c);
    let values = grid.map_points(|x, _| eval(x));
    GridFunction::new(*grid, values, Boundary::Sides(vec![eval(0.0), eval(1.0)]))
}

/// Standard-deviation-`sqrt(delta)` normal coefficients `ξ`, one per sine
/// mode, drawn in index-major order (`modes^dim` values).
pub fn spectral_coefficients(rng: &mut Rng, dim: usize, modes: usize, delta: f64) -> Vec<f64> {
    let sd = delta.sqrt();
    (0..modes.pow(dim as u32)).map(|_| sd * rng.normal()).collect()
}

/// `Σ ξ_i (|i|²)^(-decay) Π_d sin(i_d π x_d)` over `i ∈ [1, modes]^dim`.
/// Vanishes on the boundary.
pub fn spectral_gaussian_field(
    rng: &mut Rng,
    grid: &Grid,
    delta: f64,
    modes: usize,
    decay: f64,
) -> Result<GridFunction> {
    if modes == 0 || !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!("need modes >= 1 and delta > 0, got {modes} and {delta}")));
    }
    let xi = spectral_coefficients(rng, grid.dim(), modes, delta);
    GridFunction::new(*grid, sine_series(grid, &xi, modes, decay), Boundary::Zero)
}

fn sine_series(grid: &Grid, xi: &[f64], modes: usize, decay: f64) -> Vec<f64> {
    let n = grid.n_interior();
    // table[i * n + a] = sin((i + 1) π x_a)
    let table: Vec<f64> = (1..=modes)
        .flat_map(|i| (0..n).map(move |a| (i, a)))
        .map(|(i, a)| (i as f64 * PI * grid.axis_coord(a)).sin())
        .collect();
    let weight = |sq: usize| (sq as f64).powf(-decay);
    match grid.dim() {
        1 => (0..n)
            .map(|a| (0..modes).map(|i| xi[i] * weight((i + 1) * (i + 1)) * table[i * n + a]).sum())
            .collect(),
        _ => {
            // t[i * n + b] = Σ_j c_ij sin(j π y_b)
            let mut t = vec![0.0; modes * n];
            for i in 0..modes {
                for j in 0..modes {
                    let c = xi[i * modes + j] * weight((i + 1) * (i + 1) + (j + 1) * (j + 1));
                    let row = &table[j * n..(j + 1) * n];
                    for (tb, s) in t[i * n..(i + 1) * n].iter_mut().zip(row) {
                        *tb += c * s;
                    }
                }
            }
            let mut v = vec![0.0; n * n];
            for a in 0..n {
                for i in 0..modes {
                    let s = table[i * n + a];
                    for (vb, tb) in v[a * n..(a + 1) * n].iter_mut().zip(&t[i * n..(i + 1) * n]) {
                        *vb += s * tb;
                    }
                }
            }
            v
        }
    }
}

/// How initial states are drawn around a base state.
#[derive(Clone, Debug, PartialEq)]
pub enum Recipe {
    /// Add a random polynomial (1D).
    Polynomial { degree: usize, bound: f64 },
    /// Add a spectral Gaussian field to every component.
    Spectral { delta: f64, modes: usize, decay: f64 },
    /// `clamp(base + U(-amplitude, amplitude), 0, 1)` per unknown; the base
    /// defaults to 0.5 everywhere.
    Uniform01 { amplitude: f64 },
}

impl Recipe {
    pub fn polynomial() -> Self {
        Recipe::Polynomial { degree: 3, bound: 1.0 }
    }

    pub fn spectral() -> Self {
        Recipe::Spectral { delta: 1.0, modes: 16, decay: 2.0 }
    }

    pub fn tag(&self) -> u8 {
        match self {
            Recipe::Polynomial { .. } => 0,
            Recipe::Spectral { .. } => 1,
            Recipe::Uniform01 { .. } => 2,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Recipe::Polynomial { .. } => "polynomial",
            Recipe::Spectral { .. } => "spectral",
            Recipe::Uniform01 { .. } => "uniform01",
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match self {
            Recipe::Polynomial { degree, bound } => vec![*degree as f64, *bound],
            Recipe::Spectral { delta, modes, decay } => vec![*delta, *modes as f64, *decay],
            Recipe::Uniform01 { amplitude } => vec![*amplitude],
        }
    }

    pub fn from_tag(tag: u8, params: &[f64]) -> Result<Self> {
        let bad = || Error::Malformed(format!("recipe tag {tag} with parameters {params:?}"));
        let int = |v: f64| if v >= 0.0 && v.fract() == 0.0 && v < 1e9 { Ok(v as usize) } else { Err(bad()) };
        Ok(match (tag, params) {
            (0, [k, l]) => Recipe::Polynomial { degree: int(*k)?, bound: *l },
            (1, [d, m, p]) => Recipe::Spectral { delta: *d, modes: int(*m)?, decay: *p },
            (2, [a]) => Recipe::Uniform01 { amplitude: *a },
            _ => return Err(bad()),
        })
    }

    /// Draws one initial state around `base` (all unknowns of `p`).
    pub fn draw(&self, p: &Problem, base: &[f64], rng: &mut Rng) -> Result<Vec<f64>> {
        let grid = p.grid();
        let c = p.components();
        let mut u = base.to_vec();
        match self {
            Recipe::Polynomial { degree, bound } => {
                let v = random_polynomial_field(rng, *degree, *bound, grid)?;
                add_per_component(&mut u, v.values(), c);
            }
            Recipe::Spectral { delta, modes, decay } => {
                for comp in 0..c {
                    let v = spectral_gaussian_field(rng, grid, *delta, *modes, *decay)?;
                    for (k, x) in v.values().iter().enumerate() {
                        u[k * c + comp] += x;
                    }
                }
            }
            Recipe::Uniform01 { amplitude } => {
                for x in u.iter_mut() {
                    *x = (*x + rng.uniform(-amplitude, *amplitude)).clamp(0.0, 1.0);
                }
            }
        }
        Ok(u)
    }

    /// Base used when the caller supplies none.
    pub fn default_base(&self, p: &Problem) -> Vec<f64> {
        match self {
            Recipe::Uniform01 { .. } => vec![0.5; p.unknowns()],
            _ => p.lift(),
        }
    }
}

fn add_per_component(u: &mut [f64], v: &[f64], c: usize) {
    for (k, x) in v.iter().enumerate() {
        for comp in 0..c {
            u[k * c + comp] += x;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidArgument(format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetConfig {
    /// Series drawn per base state.
    pub count: usize,
    /// Newton steps per series; each contributes one `(u, du)` pair.
    pub newton_depth: usize,
    pub seed: u64,
    pub sensor_stride: usize,
    pub split: Split,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self { count: 100, newton_depth: 3, seed: 0, sensor_stride: 1, split: Split::Train }
    }
}

/// Generation statistics written to the sidecar file; not part of the
/// binary format.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DatasetMeta {
    pub series: usize,
    pub newton_depth: usize,
    pub bases: usize,
    pub attempts: u64,
    pub dropped: u64,
    pub perturbation_l2_mean: f64,
    pub perturbation_l2_std: f64,
    pub perturbation_h2_mean: f64,
    pub perturbation_h2_std: f64,
    pub max_label_defect: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OperatorDataset {
    pub problem: ProblemSpec,
    pub grid: Grid,
    pub sensor_stride: usize,
    pub seed: u64,
    pub recipe: Recipe,
    pub split: Split,
    pub inputs: Vec<Vec<f64>>,
    pub labels: Vec<Vec<f64>>,
    pub meta: DatasetMeta,
}

struct Series {
    pairs: Vec<(Vec<f64>, Vec<f64>)>,
    perturbation: Vec<f64>,
    defect: f64,
}

fn linf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn newton_series(p: &Problem, u0: Vec<f64>, depth: usize) -> Option<(Vec<(Vec<f64>, Vec<f64>)>, f64)> {
    let mut pairs = Vec::with_capacity(depth);
    let mut defect_max = 0.0f64;
    let mut u = u0;
    for _ in 0..depth {
        if !u.iter().all(|x| x.is_finite()) {
            return None;
        }
        let du = newton_step(p, &u).ok()?;
        if !du.iter().all(|x| x.is_finite()) {
            return None;
        }
        let f = linf(&p.residual(&u).ok()?);
        let defect = step_defect(p, &u, &du).ok()?;
        if !(defect <= LABEL_RTOL * (1.0 + f)) {
            return None;
        }
        defect_max = defect_max.max(defect / (1.0 + f));
        let next: Vec<f64> = u.iter().zip(&du).map(|(a, b)| a + b).collect();
        pairs.push((u, du));
        u = next;
    }
    Some((pairs, defect_max))
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Draws `count` series around each base (or around the recipe's default
/// base when `bases` is empty) and records `newton_depth` exact Newton steps
/// per series. Series whose steps fail are redrawn from a fresh substream;
/// each slot gets at most `REDRAW_BUDGET` attempts.
pub fn make_dataset(
    spec: &ProblemSpec,
    bases: &[Vec<f64>],
    recipe: &Recipe,
    cfg: &DatasetConfig,
) -> Result<OperatorDataset> {
    let p = spec.build()?;
    if cfg.count == 0 || cfg.newton_depth == 0 {
        return Err(Error::InvalidArgument("count and newton_depth must be at least 1".into()));
    }
    sensor_indices(p.grid(), cfg.sensor_stride)?;
    let default_base;
    let bases: &[Vec<f64>] = if bases.is_empty() {
        default_base = vec![recipe.default_base(&p)];
        &default_base
    } else {
        bases
    };
    for b in bases {
        if b.len() != p.unknowns() {
            return Err(Error::DimMismatch { expected: p.unknowns(), got: b.len() });
        }
    }
    let total = (cfg.count * bases.len()) as u64;
    let slots: Vec<Result<(Series, u64)>> = (0..total)
        .into_par_iter()
        .map(|slot| {
            let base = &bases[(slot / cfg.count as u64) as usize];
            for retry in 0..REDRAW_BUDGET {
                let mut rng = Rng::substream(cfg.seed, slot + retry * total);
                let u0 = recipe.draw(&p, base, &mut rng)?;
                let perturbation: Vec<f64> = u0.iter().zip(base).map(|(a, b)| a - b).collect();
                if let Some((pairs, defect)) = newton_series(&p, u0, cfg.newton_depth) {
                    return Ok((Series { pairs, perturbation, defect }, retry));
                }
            }
            Err(Error::BudgetExhausted {
                requested: total as usize,
                produced: 0,
                attempts: REDRAW_BUDGET as usize,
            })
        })
        .collect();

    let mut inputs = Vec::with_capacity(total as usize * cfg.newton_depth);
    let mut labels = Vec::with_capacity(inputs.capacity());
    let mut l2 = Vec::new();
    let mut h2 = Vec::new();
    let mut meta = DatasetMeta {
        series: total as usize,
        newton_depth: cfg.newton_depth,
        bases: bases.len(),
        ..Default::default()
    };
    let produced = slots.iter().filter(|s| s.is_ok()).count();
    for slot in slots {
        let (series, retries) = slot.map_err(|e| match e {
            Error::BudgetExhausted { requested, attempts, .. } => {
                Error::BudgetExhausted { requested, produced, attempts }
            }
            other => other,
        })?;
        meta.attempts += retries + 1;
        meta.dropped += retries;
        meta.max_label_defect = meta.max_label_defect.max(series.defect);
        l2.push(p.norm(&series.perturbation, Norm::L2));
        h2.push(p.norm(&series.perturbation, Norm::H2));
        for (u, du) in series.pairs {
            inputs.push(u);
            labels.push(du);
        }
    }
    (meta.perturbation_l2_mean, meta.perturbation_l2_std) = mean_std(&l2);
    (meta.perturbation_h2_mean, meta.perturbation_h2_std) = mean_std(&h2);
    Ok(OperatorDataset {
        problem: spec.clone(),
        grid: *p.grid(),
        sensor_stride: cfg.sensor_stride,
        seed: cfg.seed,
        recipe: recipe.clone(),
        split: cfg.split,
        inputs,
        labels,
        meta,
    })
}

/// Branch-network input: the state at the sensor lattice, components
/// interleaved per sensor.
pub fn sensor_values(p: &Problem, stride: usize, u: &[f64]) -> Result<Vec<f64>> {
    let c = p.components();
    Ok(sensor_indices(p.grid(), stride)?
        .into_iter()
        .flat_map(|k| (0..c).map(move |comp| k * c + comp))
        .map(|i| u[i])
        .collect())
}

impl OperatorDataset {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn build_problem(&self) -> Result<Problem> {
        self.problem.build()
    }

    /// A dataset holding the listed samples (metadata is carried over).
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            inputs: indices.iter().map(|&i| self.inputs[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i].clone()).collect(),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.build_problem()?;
        if *p.grid() != self.grid {
            return Err(Error::GridMismatch(format!("dataset grid {:?} vs problem grid {:?}", self.grid, p.grid())));
        }
        if self.inputs.is_empty() || self.inputs.len() != self.labels.len() {
            return Err(Error::Malformed(format!("{} inputs, {} labels", self.inputs.len(), self.labels.len())));
        }
        let len = p.unknowns();
        if let Some(bad) = self.inputs.iter().chain(&self.labels).find(|v| v.len() != len) {
            return Err(Error::DimMismatch { expected: len, got: bad.len() });
        }
        sensor_indices(&self.grid, self.sensor_stride)?;
        Ok(())
    }

    /// Re-solves the Newton system for about `fraction` of the samples
    /// (at least one) and returns the largest Linf deviation from the
    /// stored labels.
    pub fn audit_labels(&self, fraction: f64, seed: u64) -> Result<f64> {
        let p = self.build_problem()?;
        let want = ((self.len() as f64 * fraction).ceil() as usize).clamp(1, self.len());
        let mut idx: Vec<usize> = (0..self.len()).collect();
        Rng::seed_from_u64(seed).shuffle(&mut idx);
        let mut worst = 0.0f64;
        for &i in &idx[..want] {
            let du = newton_step(&p, &self.inputs[i])?;
            let dev = du.iter().zip(&self.labels[i]).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            worst = worst.max(dev);
        }
        Ok(worst)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let mut w = ByteWriter::new();
        w.bytes(b"NODS");
        w.u16(DATASET_VERSION);
        w.u8(self.problem.tag());
        w.short_f64_list(&self.problem.params())?;
        w.u8(self.grid.dim() as u8);
        w.u32_len(self.grid.n_interior(), "grid size")?;
        let stride = u8::try_from(self.sensor_stride)
            .map_err(|_| Error::InvalidArgument(format!("sensor stride {} exceeds u8", self.sensor_stride)))?;
        w.u8(stride);
        w.u32_len(self.len(), "sample count")?;
        w.u64(self.seed);
        w.u8(self.recipe.tag());
        w.short_f64_list(&self.recipe.params())?;
        w.u8(match self.split {
            Split::Train => 0,
            Split::Test => 1,
        });
        for (u, du) in self.inputs.iter().zip(&self.labels) {
            w.f64s(u);
            w.f64s(du);
        }
        Ok(w.buf)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes, "dataset");
        r.magic("NODS")?;
        let version = r.u16()?;
        if version != DATASET_VERSION {
            return Err(Error::UnsupportedVersion { found: version, expected: DATASET_VERSION });
        }
        let tag = r.u8()?;
        let problem = ProblemSpec::from_tag(tag, &r.short_f64_list()?)?;
        let dim = r.u8()? as usize;
        let n = r.u32()? as usize;
        let grid = Grid::new(dim, n).map_err(|e| Error::Malformed(e.to_string()))?;
        let sensor_stride = r.u8()? as usize;
        let count = r.u32()? as usize;
        let seed = r.u64()?;
        let rtag = r.u8()?;
        let recipe = Recipe::from_tag(rtag, &r.short_f64_list()?)?;
        let split = match r.u8()? {
            0 => Split::Train,
            1 => Split::Test,
            t => return Err(Error::Malformed(format!("split tag {t}"))),
        };
        let len = grid.len() * problem.build()?.components();
        let mut inputs = Vec::with_capacity(count.min(1 << 20));
        let mut labels = Vec::with_capacity(inputs.capacity());
        for _ in 0..count {
            inputs.push(r.f64s(len)?);
            labels.push(r.f64s(len)?);
        }
        r.finish()?;
        let ds = Self { problem, grid, sensor_stride, seed, recipe, split, inputs, labels, meta: DatasetMeta::default() };
        ds.validate().map_err(|e| Error::Malformed(e.to_string()))?;
        Ok(ds)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    /// Plain-text `key=value` description for the sidecar file.
    pub fn meta_text(&self) -> String {
        let m = &self.meta;
        let mut out = String::new();
        let _ = writeln!(out, "problem={}", self.problem.name());
        let _ = writeln!(out, "problem_params={:?}", self.problem.params());
        let _ = writeln!(out, "recipe={}", self.recipe.name());
        let _ = writeln!(out, "recipe_params={:?}", self.recipe.params());
        let _ = writeln!(out, "split={}", self.split.name());
        let _ = writeln!(out, "seed={}", self.seed);
        let _ = writeln!(out, "sensor_stride={}", self.sensor_stride);
        let _ = writeln!(out, "samples={}", self.len());
        let _ = writeln!(out, "series={}", m.series);
        let _ = writeln!(out, "bases={}", m.bases);
        let _ = writeln!(out, "newton_depth={}", m.newton_depth);
        let _ = writeln!(out, "attempts={}", m.attempts);
        let _ = writeln!(out, "dropped={}", m.dropped);
        let _ = writeln!(out, "perturbation_l2_mean={:e}", m.perturbation_l2_mean);
        let _ = writeln!(out, "perturbation_l2_std={:e}", m.perturbation_l2_std);
        let _ = writeln!(out, "perturbation_h2_mean={:e}", m.perturbation_h2_mean);
        let _ = writeln!(out, "perturbation_h2_std={:e}", m.perturbation_h2_std);
        let _ = writeln!(out, "max_label_defect={:e}", m.max_label_defect);
        out
    }
}
