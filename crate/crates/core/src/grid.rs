//! Uniform tensor grids on the unit interval / unit square, fields living on
//! their interior points, and the discrete operators built on top of them.
//!
//! Unknowns are interior-only and stored row-major: in 2D the value at
//! interior node `(i, j)` (x-index `i`, y-index `j`) lives at `i * n + j`.
//! Boundary data is kept separately and folded into stencil applications.

use std::fmt;
use std::sync::Arc;

use crate::codec::{ByteReader, ByteWriter};
use crate::error::{Error, Result};

/// A uniform grid on `[0,1]^dim` with `n` interior points per axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Grid {
    dim: usize,
    n: usize,
}

impl Grid {
    pub fn new(dim: usize, n_interior: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidArgument(format!("grid dimension {dim} (must be 1 or 2)")));
        }
        if n_interior == 0 || n_interior > u32::MAX as usize {
            return Err(Error::InvalidArgument(format!("interior point count {n_interior}")));
        }
        Ok(Self { dim, n: n_interior })
    }

    /// 1D grid. Panics if `n_interior == 0`.
    pub fn line(n_interior: usize) -> Self {
        Self::new(1, n_interior).expect("n_interior must be positive")
    }

    /// 2D grid. Panics if `n_interior == 0`.
    pub fn square(n_interior: usize) -> Self {
        Self::new(2, n_interior).expect("n_interior must be positive")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_interior(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        1.0 / (self.n as f64 + 1.0)
    }

    /// Cell volume `h^dim`, the quadrature weight of the discrete inner product.
    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.dim as i32)
    }

    /// Total number of interior points, `n^dim`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate of interior index `k` along one axis.
    pub fn axis_coord(&self, k: usize) -> f64 {
        (k as f64 + 1.0) * self.h()
    }

    /// Coordinates of flat interior index `idx`; `y` is 0 in 1D.
    pub fn point(&self, idx: usize) -> (f64, f64) {
        match self.dim {
            1 => (self.axis_coord(idx), 0.0),
            _ => (self.axis_coord(idx / self.n), self.axis_coord(idx % self.n)),
        }
    }

    /// All interior coordinates in storage order, `dim` entries per point.
    pub fn coords(&self) -> Vec<Vec<f64>> {
        (0..self.len())
            .map(|idx| {
                let (x, y) = self.point(idx);
                if self.dim == 1 {
                    vec![x]
                } else {
                    vec![x, y]
                }
            })
            .collect()
    }

    /// Evaluates `f(x, y)` at every interior point.
    pub fn map_points(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        (0..self.len())
            .map(|idx| {
                let (x, y) = self.point(idx);
                f(x, y)
            })
            .collect()
    }
}

pub type BoundaryFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Dirichlet boundary trace.
///
/// `Sides` holds one constant per side: `[x=0, x=1]` in 1D and
/// `[x=0, x=1, y=0, y=1]` in 2D.
#[derive(Clone, Default)]
pub enum Boundary {
    #[default]
    Zero,
    Sides(Vec<f64>),
    Function(BoundaryFn),
}

impl fmt::Debug for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Boundary::Zero => write!(f, "Zero"),
            Boundary::Sides(s) => f.debug_tuple("Sides").field(s).finish(),
            Boundary::Function(_) => write!(f, "Function(..)"),
        }
    }
}

impl PartialEq for Boundary {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Boundary::Zero, Boundary::Zero) => true,
            (Boundary::Sides(a), Boundary::Sides(b)) => a == b,
            (Boundary::Function(a), Boundary::Function(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

impl Boundary {
    pub fn check(&self, grid: &Grid) -> Result<()> {
        if let Boundary::Sides(s) = self {
            if s.len() != 2 * grid.dim() {
                return Err(Error::GridMismatch(format!(
                    "{}D grid needs {} side values, got {}",
                    grid.dim(),
                    2 * grid.dim(),
                    s.len()
                )));
            }
            if s.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("boundary side value".into()));
            }
        }
        Ok(())
    }

    /// Value at a boundary point; `side` is the index used by `Sides`.
    fn value(&self, side: usize, x: f64, y: f64) -> f64 {
        match self {
            Boundary::Zero => 0.0,
            Boundary::Sides(s) => s[side],
            Boundary::Function(f) => f(x, y),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Boundary::Zero => true,
            Boundary::Sides(s) => s.iter().all(|v| *v == 0.0),
            Boundary::Function(_) => false,
        }
    }

    /// Largest boundary magnitude seen by the stencil.
    pub fn max_abs(&self, grid: &Grid) -> f64 {
        match self {
            Boundary::Zero => 0.0,
            Boundary::Sides(s) => s.iter().fold(0.0, |m, v| m.max(v.abs())),
            Boundary::Function(_) => {
                let n = grid.n_interior();
                let mut m = 0.0f64;
                for k in 0..n {
                    let t = grid.axis_coord(k);
                    if grid.dim() == 1 {
                        m = m.max(self.value(0, 0.0, 0.0).abs()).max(self.value(1, 1.0, 0.0).abs());
                        break;
                    }
                    for (side, (x, y)) in [(0.0, t), (1.0, t), (t, 0.0), (t, 1.0)].into_iter().enumerate() {
                        m = m.max(self.value(side, x, y).abs());
                    }
                }
                m
            }
        }
    }

    /// Linear-in-x lift used as the natural initial guess in 1D
    /// (`u0(x) = left + (right - left) x`). Zero in 2D unless sides are constant
    /// and equal.
    pub fn lift(&self, grid: &Grid) -> Vec<f64> {
        match (self, grid.dim()) {
            (Boundary::Zero, _) => vec![0.0; grid.len()],
            (b, 1) => {
                let l = b.value(0, 0.0, 0.0);
                let r = b.value(1, 1.0, 0.0);
                grid.map_points(|x, _| l + (r - l) * x)
            }
            (Boundary::Sides(s), _) if s.iter().all(|v| *v == s[0]) => vec![s[0]; grid.len()],
            _ => vec![0.0; grid.len()],
        }
    }
}

/// How the 5-point (3-point in 1D) stencil treats neighbors outside the interior.
#[derive(Clone, Copy, Debug)]
pub enum Padding<'a> {
    /// Substitute the boundary trace (zero padding for `Boundary::Zero`).
    Dirichlet(&'a Boundary),
    /// Repeat the adjacent interior value (homogeneous Neumann).
    Replicate,
}

/// Writes `coef * Δ_h v` into `out`.
pub(crate) fn laplacian_into(grid: &Grid, v: &[f64], padding: Padding<'_>, coef: f64, out: &mut [f64]) {
    let n = grid.n_interior();
    let h = grid.h();
    let scale = coef / (h * h);
    debug_assert_eq!(v.len(), grid.len());
    debug_assert_eq!(out.len(), grid.len());
    match grid.dim() {
        1 => {
            for j in 0..n {
                let c = v[j];
                let left = if j > 0 {
                    v[j - 1]
                } else {
                    match padding {
                        Padding::Dirichlet(b) => b.value(0, 0.0, 0.0),
                        Padding::Replicate => c,
                    }
                };
                let right = if j + 1 < n {
                    v[j + 1]
                } else {
                    match padding {
                        Padding::Dirichlet(b) => b.value(1, 1.0, 0.0),
                        Padding::Replicate => c,
                    }
                };
                out[j] = scale * (left - 2.0 * c + right);
            }
        }
        _ => {
            let ghost = |side: usize, x: f64, y: f64, c: f64| match padding {
                Padding::Dirichlet(b) => b.value(side, x, y),
                Padding::Replicate => c,
            };
            for i in 0..n {
                for j in 0..n {
                    let k = i * n + j;
                    let c = v[k];
                    let west = if i > 0 { v[k - n] } else { ghost(0, 0.0, grid.axis_coord(j), c) };
                    let east = if i + 1 < n { v[k + n] } else { ghost(1, 1.0, grid.axis_coord(j), c) };
                    let south = if j > 0 { v[k - 1] } else { ghost(2, grid.axis_coord(i), 0.0, c) };
                    let north = if j + 1 < n { v[k + 1] } else { ghost(3, grid.axis_coord(i), 1.0, c) };
                    out[k] = scale * (west + east + south + north - 4.0 * c);
                }
            }
        }
    }
}

/// Scalar field on the interior points of a grid plus its Dirichlet trace.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
    boundary: Boundary,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>, boundary: Boundary) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid with {} interior points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("grid value at index {k}")));
        }
        boundary.check(&grid)?;
        Ok(Self { grid, values, boundary })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self { grid, values: vec![0.0; grid.len()], boundary: Boundary::Zero }
    }

    /// Samples `f` at the interior points, with a zero boundary.
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.map_points(f), Boundary::Zero)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn boundary(&self) -> &Boundary {
        &self.boundary
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Result<Self> {
        boundary.check(&self.grid)?;
        self.boundary = boundary;
        Ok(self)
    }

    /// Discrete Laplacian at the interior points (result has a zero boundary).
    pub fn laplacian(&self) -> Result<GridFunction> {
        self.boundary.check(&self.grid)?;
        let mut out = vec![0.0; self.grid.len()];
        laplacian_into(&self.grid, &self.values, Padding::Dirichlet(&self.boundary), 1.0, &mut out);
        GridFunction::new(self.grid, out, Boundary::Zero)
    }

    pub fn norm(&self, kind: Norm) -> f64 {
        norm(&self.grid, &self.values, kind)
    }

    pub fn sample_sensors(&self, stride: usize) -> Result<Vec<f64>> {
        Ok(sensor_indices(&self.grid, stride)?.into_iter().map(|k| self.values[k]).collect())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = ByteWriter::new();
        w.bytes(b"NOGF");
        w.u8(self.grid.dim() as u8);
        w.u32(self.grid.n_interior() as u32);
        w.f64s(&self.values);
        match &self.boundary {
            Boundary::Zero => w.u8(0),
            Boundary::Sides(s) => {
                w.u8(1);
                w.f64s(s);
            }
            Boundary::Function(_) => {
                return Err(Error::InvalidArgument(
                    "function-valued boundaries cannot be serialized".into(),
                ))
            }
        }
        Ok(w.buf)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes, "grid function");
        r.magic("NOGF")?;
        let dim = r.u8()? as usize;
        let n = r.u32()? as usize;
        let grid = Grid::new(dim, n).map_err(|e| Error::Malformed(e.to_string()))?;
        let values = r.f64s(grid.len())?;
        let boundary = match r.u8()? {
            0 => Boundary::Zero,
            1 => Boundary::Sides(r.f64s(2 * dim)?),
            t => return Err(Error::Malformed(format!("boundary tag {t}"))),
        };
        r.finish()?;
        Self::new(grid, values, boundary)
    }
}

/// Discrete norms. Forward differences use zero extension past the last
/// interior point; H2 adds the zero-padded stencil Laplacian.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Norm {
    L2,
    H1,
    H2,
    Linf,
}

pub fn norm(grid: &Grid, v: &[f64], kind: Norm) -> f64 {
    let w = grid.cell_volume();
    let l2_sq = w * v.iter().map(|x| x * x).sum::<f64>();
    match kind {
        Norm::Linf => v.iter().fold(0.0, |m, x| m.max(x.abs())),
        Norm::L2 => l2_sq.sqrt(),
        Norm::H1 => (l2_sq + w * gradient_sq(grid, v)).sqrt(),
        Norm::H2 => {
            let mut lap = vec![0.0; v.len()];
            laplacian_into(grid, v, Padding::Dirichlet(&Boundary::Zero), 1.0, &mut lap);
            let lap_sq = w * lap.iter().map(|x| x * x).sum::<f64>();
            (l2_sq + w * gradient_sq(grid, v) + lap_sq).sqrt()
        }
    }
}

fn gradient_sq(grid: &Grid, v: &[f64]) -> f64 {
    let n = grid.n_interior();
    let inv_h = 1.0 / grid.h();
    let mut acc = 0.0;
    match grid.dim() {
        1 => {
            for j in 0..n {
                let next = if j + 1 < n { v[j + 1] } else { 0.0 };
                let d = (next - v[j]) * inv_h;
                acc += d * d;
            }
        }
        _ => {
            for i in 0..n {
                for j in 0..n {
                    let k = i * n + j;
                    let ex = if i + 1 < n { v[k + n] } else { 0.0 };
                    let ny = if j + 1 < n { v[k + 1] } else { 0.0 };
                    let dx = (ex - v[k]) * inv_h;
                    let dy = (ny - v[k]) * inv_h;
                    acc += dx * dx + dy * dy;
                }
            }
        }
    }
    acc
}

/// Flat indices of the sensor lattice: every `stride`-th interior point per
/// axis, centered in the interior, row-major.
pub fn sensor_indices(grid: &Grid, stride: usize) -> Result<Vec<usize>> {
    let n = grid.n_interior();
    if stride == 0 {
        return Err(Error::InvalidArgument("sensor stride must be positive".into()));
    }
    if stride > 1 && stride >= n {
        return Err(Error::InvalidArgument(format!(
            "sensor stride {stride} too large for {n} interior points per axis"
        )));
    }
    let count = n / stride;
    let offset = (n - (count - 1) * stride - 1) / 2;
    let axis: Vec<usize> = (0..count).map(|k| offset + k * stride).collect();
    Ok(match grid.dim() {
        1 => axis,
        _ => axis.iter().flat_map(|&i| axis.iter().map(move |&j| i * n + j)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn laplacian_of_zero_is_zero() {
        for g in [Grid::line(7), Grid::square(5)] {
            let lap = GridFunction::zeros(g).laplacian().unwrap();
            assert!(lap.values().iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn laplacian_of_linear_vanishes() {
        let g = Grid::line(31);
        let u = GridFunction::new(g, g.map_points(|x, _| x), Boundary::Sides(vec![0.0, 1.0])).unwrap();
        let lap = u.laplacian().unwrap();
        assert!(lap.norm(Norm::Linf) < 1e-9, "{}", lap.norm(Norm::Linf));
    }

    fn sine_error(n: usize) -> f64 {
        let g = Grid::line(n);
        let u = GridFunction::from_fn(g, |x, _| (PI * x).sin()).unwrap();
        let lap = u.laplacian().unwrap();
        lap.values()
            .iter()
            .zip(u.values())
            .map(|(l, v)| (l + PI * PI * v).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn stencil_is_second_order() {
        let errs: Vec<f64> = [63, 127, 255].iter().map(|&n| sine_error(n)).collect();
        for w in errs.windows(2) {
            // h halves exactly between consecutive grids (h = 1/64, 1/128, 1/256).
            let slope = (w[0] / w[1]).log2();
            assert!((slope - 2.0).abs() < 0.1, "observed order {slope}");
        }
        // Constant measured on the finest study grid bounds the n = 1023 error.
        let h = Grid::line(255).h();
        let c = errs[2] / (h * h);
        let h_fine = Grid::line(1023).h();
        assert!(sine_error(1023) <= 1.01 * c * h_fine * h_fine);
        // Leading truncation term is pi^4 h^2 / 12.
        assert!((c - PI.powi(4) / 12.0).abs() < 1e-2 * c);
    }

    #[test]
    fn mismatched_boundary_is_rejected() {
        let g = Grid::square(4);
        let err = GridFunction::new(g, vec![0.0; 16], Boundary::Sides(vec![0.0, 1.0])).unwrap_err();
        assert!(matches!(err, Error::GridMismatch(_)));
        assert!(GridFunction::new(g, vec![0.0; 15], Boundary::Zero).is_err());
        assert!(GridFunction::new(g, vec![f64::NAN; 16], Boundary::Zero).is_err());
    }

    #[test]
    fn norms_of_simple_fields() {
        for g in [Grid::line(9), Grid::square(6)] {
            let z = GridFunction::zeros(g);
            for kind in [Norm::L2, Norm::H1, Norm::H2, Norm::Linf] {
                assert_eq!(z.norm(kind), 0.0);
            }
        }
        let g = Grid::line(99);
        let ones = GridFunction::new(g, vec![1.0; 99], Boundary::Zero).unwrap();
        assert!((ones.norm(Norm::L2) - (0.99f64).sqrt()).abs() < 1e-14);
        assert_eq!(ones.norm(Norm::Linf), 1.0);

        let g = Grid::line(1023);
        let s = GridFunction::from_fn(g, |x, _| (PI * x).sin()).unwrap();
        assert!((s.norm(Norm::L2) - 0.5f64.sqrt()).abs() < 1e-3);
    }

    #[test]
    fn sensor_counts() {
        let g = Grid::line(100);
        let u = GridFunction::from_fn(g, |x, _| x).unwrap();
        let s = u.sample_sensors(1).unwrap();
        assert_eq!(s.len(), 100);
        assert_eq!(s, u.values());
        assert!(u.sample_sensors(100).is_err());
        assert!(u.sample_sensors(0).is_err());

        let g = Grid::square(63);
        let idx = sensor_indices(&g, 3).unwrap();
        assert_eq!(idx.len(), 441);
        // Centered lattice: first and last sensors are symmetric about the middle.
        assert_eq!(idx[0], 63 + 1);
        assert_eq!(*idx.last().unwrap(), 61 * 63 + 61);
    }

    #[test]
    fn binary_layout() {
        let g = Grid::line(2);
        let u = GridFunction::new(g, vec![0.5, -1.0], Boundary::Sides(vec![0.0, 1.0])).unwrap();
        let b = u.to_bytes().unwrap();
        assert_eq!(&b[..4], b"NOGF");
        assert_eq!(b[4], 1);
        assert_eq!(&b[5..9], &2u32.to_le_bytes());
        assert_eq!(&b[9..17], &0.5f64.to_le_bytes());
        assert_eq!(b[25], 1);
        assert_eq!(b.len(), 26 + 16);
        assert_eq!(GridFunction::from_bytes(&b).unwrap(), u);
        assert!(matches!(GridFunction::from_bytes(&b[..20]), Err(Error::Truncated(_))));
        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(matches!(GridFunction::from_bytes(&bad), Err(Error::BadMagic { .. })));
    }

    fn field(dim: usize, n: usize) -> impl Strategy<Value = (Grid, Vec<f64>, Vec<f64>)> {
        let len = n.pow(dim as u32);
        (
            prop::collection::vec(-10.0f64..10.0, len),
            prop::collection::vec(-10.0f64..10.0, len),
        )
            .prop_map(move |(a, b)| (Grid::new(dim, n).unwrap(), a, b))
    }

    fn lap(g: &Grid, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        laplacian_into(g, v, Padding::Dirichlet(&Boundary::Zero), 1.0, &mut out);
        out
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    proptest! {
        #[test]
        fn laplacian_is_linear((g, u, v) in prop_oneof![field(1, 12), field(2, 6)], a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let comb: Vec<f64> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
            let lhs = lap(&g, &comb);
            let (lu, lv) = (lap(&g, &u), lap(&g, &v));
            let scale = lhs.iter().fold(1.0f64, |m, x| m.max(x.abs()));
            for k in 0..lhs.len() {
                prop_assert!((lhs[k] - (a * lu[k] + b * lv[k])).abs() <= 1e-12 * scale);
            }
        }

        #[test]
        fn laplacian_is_symmetric((g, u, v) in prop_oneof![field(1, 12), field(2, 6)]) {
            let uv = dot(&lap(&g, &u), &v);
            let vu = dot(&u, &lap(&g, &v));
            prop_assert!((uv - vu).abs() <= 1e-10 * uv.abs().max(vu.abs()).max(1.0));
        }

        #[test]
        fn norms_are_ordered((g, u, _) in prop_oneof![field(1, 12), field(2, 6)]) {
            let l2 = norm(&g, &u, Norm::L2);
            let h1 = norm(&g, &u, Norm::H1);
            let h2 = norm(&g, &u, Norm::H2);
            prop_assert!(l2 <= h1 && h1 <= h2);
        }

        #[test]
        fn binary_round_trip((g, u, _) in prop_oneof![field(1, 5), field(2, 3)], sides in prop::collection::vec(-5.0f64..5.0, 4)) {
            let boundary = Boundary::Sides(sides[..2 * g.dim()].to_vec());
            let f = GridFunction::new(g, u, boundary).unwrap();
            let bytes = f.to_bytes().unwrap();
            let back = GridFunction::from_bytes(&bytes).unwrap();
            prop_assert_eq!(back.to_bytes().unwrap(), bytes);
        }
    }
}
