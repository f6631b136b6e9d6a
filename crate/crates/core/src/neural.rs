//! Dense tanh networks, the DeepONet built from them, Adam, POD trunks and
//! the checkpoint format. Gradients are derived by hand for this fixed
//! architecture.

use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};

use crate::codec::{ByteReader, ByteWriter};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::rng::Rng;

pub const CHECKPOINT_VERSION: u16 = 1;

/// Affine layers with tanh between them. Parameters live in one flat
/// vector, per layer the row-major `out x in` weight followed by the bias.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    tanh_output: bool,
    params: Vec<f64>,
}

/// Layer inputs and the output of one batched forward pass.
#[derive(Clone, Debug)]
pub struct MlpCache {
    acts: Vec<Array2<f64>>,
}

impl MlpCache {
    pub fn output(&self) -> &Array2<f64> {
        self.acts.last().unwrap()
    }
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
}

impl Mlp {
    pub fn zeros(sizes: &[usize], tanh_output: bool) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidArgument(format!("bad layer sizes {sizes:?}")));
        }
        Ok(Self { sizes: sizes.to_vec(), tanh_output, params: vec![0.0; param_count(sizes)] })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot(sizes: &[usize], tanh_output: bool, rng: &mut Rng) -> Result<Self> {
        let mut m = Self::zeros(sizes, tanh_output)?;
        let mut off = 0;
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for p in &mut m.params[off..off + fan_in * fan_out] {
                *p = rng.uniform(-a, a);
            }
            off += fan_in * fan_out + fan_out;
        }
        Ok(m)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn tanh_output(&self) -> bool {
        self.tanh_output
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn offsets(&self, l: usize) -> (usize, usize, usize, usize) {
        let off: usize = param_count(&self.sizes[..=l]);
        let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
        (off, off + fan_in * fan_out, fan_in, fan_out)
    }

    fn layer(&self, l: usize) -> (ArrayView2<'_, f64>, ArrayView1<'_, f64>) {
        let (w0, b0, fan_in, fan_out) = self.offsets(l);
        let w = ArrayView2::from_shape((fan_out, fan_in), &self.params[w0..b0]).unwrap();
        let b = ArrayView1::from(&self.params[b0..b0 + fan_out]);
        (w, b)
    }

    fn layers(&self) -> usize {
        self.sizes.len() - 1
    }

    /// Batched forward pass; rows of `x` are inputs.
    pub fn forward(&self, x: ArrayView2<f64>) -> Result<MlpCache> {
        if x.ncols() != self.input_dim() {
            return Err(Error::DimMismatch { expected: self.input_dim(), got: x.ncols() });
        }
        let mut acts = Vec::with_capacity(self.sizes.len());
        acts.push(x.to_owned());
        for l in 0..self.layers() {
            let (w, b) = self.layer(l);
            let mut z = acts[l].dot(&w.t());
            z += &b;
            if l + 1 < self.layers() || self.tanh_output {
                z.mapv_inplace(f64::tanh);
            }
            acts.push(z);
        }
        Ok(MlpCache { acts })
    }

    /// Adds the gradient of `Σ dout ⊙ output` to `grad` (flat, same layout
    /// as the parameters).
    pub fn backward(&self, cache: &MlpCache, dout: ArrayView2<f64>, grad: &mut [f64]) -> Result<()> {
        let out = cache.output();
        if dout.dim() != out.dim() {
            return Err(Error::DimMismatch { expected: out.len(), got: dout.len() });
        }
        if grad.len() != self.params.len() {
            return Err(Error::DimMismatch { expected: self.params.len(), got: grad.len() });
        }
        let mut g = dout.to_owned();
        if self.tanh_output {
            g.zip_mut_with(out, |gi, h| *gi *= 1.0 - h * h);
        }
        for l in (0..self.layers()).rev() {
            let (w0, b0, fan_in, fan_out) = self.offsets(l);
            let dw = g.t().dot(&cache.acts[l]);
            for (dst, v) in grad[w0..b0].iter_mut().zip(dw.iter()) {
                *dst += v;
            }
            let db = g.sum_axis(Axis(0));
            for (dst, v) in grad[b0..b0 + fan_out].iter_mut().zip(db.iter()) {
                *dst += v;
            }
            if l > 0 {
                let (w, _) = self.layer(l);
                let mut prev = g.dot(&w);
                prev.zip_mut_with(&cache.acts[l], |gi, h| *gi *= 1.0 - h * h);
                g = prev;
            }
            debug_assert_eq!(g.ncols(), if l > 0 { fan_in } else { fan_out });
        }
        Ok(())
    }
}

/// Frozen trunk: a mean field plus `p` modes on the grid, orthonormal in
/// the discrete L2 inner product (cell volume weight).
#[derive(Clone, Debug, PartialEq)]
pub struct PodBasis {
    pub grid: Grid,
    pub components: usize,
    pub mean: Vec<f64>,
    /// `unknowns x p`, mode `k` in column `k`.
    pub modes: Array2<f64>,
    /// All eigenvalues of the snapshot Gram matrix, descending.
    pub eigenvalues: Vec<f64>,
}

impl PodBasis {
    pub fn rank(&self) -> usize {
        self.modes.ncols()
    }

    /// Coefficients `⟨v - mean, φ_k⟩`.
    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        let w = self.grid.cell_volume();
        (0..self.rank())
            .map(|k| w * self.modes.column(k).iter().zip(v).zip(&self.mean).map(|((m, x), c)| m * (x - c)).sum::<f64>())
            .collect()
    }
}

/// Symmetric eigen-decomposition by cyclic Jacobi rotations. Returns
/// eigenvalues (descending) and the matching eigenvectors as columns of a
/// row-major `n x n` matrix.
pub fn symmetric_eigen(a: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut a = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let total: f64 = a.iter().map(|x| x * x).sum();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i * n + j].powi(2)).sum();
        if off <= 1e-30 * total || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]));
    let vals = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vecs = vec![0.0; n * n];
    for (new, &old) in order.iter().enumerate() {
        for k in 0..n {
            vecs[k * n + new] = v[k * n + old];
        }
    }
    (vals, vecs)
}

/// POD by the method of snapshots. Fails when `p` exceeds the numerical
/// rank (eigenvalues below `1e-12 · λ_max`).
pub fn compute_pod_basis(grid: Grid, components: usize, samples: &[Vec<f64>], p: usize) -> Result<PodBasis> {
    let len = grid.len() * components;
    if p == 0 || samples.len() < p {
        return Err(Error::InvalidArgument(format!("need at least p={p} >= 1 snapshots, got {}", samples.len())));
    }
    if let Some(bad) = samples.iter().find(|s| s.len() != len) {
        return Err(Error::DimMismatch { expected: len, got: bad.len() });
    }
    let ns = samples.len();
    let mut mean = vec![0.0; len];
    for s in samples {
        for (m, x) in mean.iter_mut().zip(s) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= ns as f64);
    let centered = Array2::from_shape_fn((ns, len), |(a, k)| samples[a][k] - mean[k]);
    let w = grid.cell_volume();
    let gram = centered.dot(&centered.t()) * w;
    let gram: Vec<f64> = gram.iter().copied().collect();
    let (vals, vecs) = symmetric_eigen(&gram, ns);
    // Centering leaves rounding noise of relative size eps, so eigenvalues
    // are also compared against the energy of the raw snapshots.
    let raw_energy = w * samples.iter().flatten().map(|x| x * x).sum::<f64>();
    let floor = 1e-12 * vals[0].max(raw_energy);
    let rank = vals.iter().take_while(|&&l| l > 0.0 && l >= floor).count();
    if rank < p {
        return Err(Error::RankDeficient { requested: p, rank });
    }
    let vk = Array2::from_shape_fn((ns, p), |(a, k)| vecs[a * ns + k] / vals[k].sqrt());
    let modes = centered.t().dot(&vk);
    Ok(PodBasis { grid, components, mean, modes, eigenvalues: vals })
}

#[derive(Clone, Debug, PartialEq)]
pub enum Trunk {
    Mlp(Mlp),
    Pod(PodBasis),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ArchConfig {
    pub width: usize,
    /// Hidden layers in the branch.
    pub depth: usize,
    /// Hidden layers in the trunk; 0 with `trunk_tanh_output` gives the
    /// single-layer `σ(w·x + ζ)` trunk.
    pub trunk_depth: usize,
    pub trunk_tanh_output: bool,
    pub rank: usize,
    pub train_bias: bool,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self { width: 40, depth: 2, trunk_depth: 2, trunk_tanh_output: false, rank: 40, train_bias: true }
    }
}

fn mlp_sizes(input: usize, width: usize, depth: usize, output: usize) -> Vec<usize> {
    let mut s = vec![input];
    s.extend(std::iter::repeat(width).take(depth));
    s.push(output);
    s
}

/// `N(u)(x_j) = bias0 + Σ_k b_k(u) t_k(x_j)` (plus the POD mean for a POD
/// trunk).
#[derive(Clone, Debug, PartialEq)]
pub struct DeepONet {
    pub branch: Mlp,
    pub trunk: Trunk,
    pub bias0: f64,
    pub train_bias: bool,
    pub sensor_stride: usize,
}

/// Intermediate values of a forward pass needed for the backward pass.
#[derive(Clone, Debug)]
pub struct DeepONetCache {
    branch: MlpCache,
    trunk: Option<MlpCache>,
    pub output: Array2<f64>,
}

impl DeepONet {
    pub fn with_mlp_trunk(sensors: usize, dim: usize, sensor_stride: usize, cfg: &ArchConfig, rng: &mut Rng) -> Result<Self> {
        let branch = Mlp::glorot(&mlp_sizes(sensors, cfg.width, cfg.depth, cfg.rank), false, rng)?;
        let trunk = Mlp::glorot(&mlp_sizes(dim, cfg.width, cfg.trunk_depth, cfg.rank), cfg.trunk_tanh_output, rng)?;
        Ok(Self { branch, trunk: Trunk::Mlp(trunk), bias0: 0.0, train_bias: cfg.train_bias, sensor_stride })
    }

    /// Branch output size follows the basis rank.
    pub fn with_pod_trunk(sensors: usize, sensor_stride: usize, pod: PodBasis, cfg: &ArchConfig, rng: &mut Rng) -> Result<Self> {
        let branch = Mlp::glorot(&mlp_sizes(sensors, cfg.width, cfg.depth, pod.rank()), false, rng)?;
        Ok(Self { branch, trunk: Trunk::Pod(pod), bias0: 0.0, train_bias: cfg.train_bias, sensor_stride })
    }

    pub fn rank(&self) -> usize {
        self.branch.output_dim()
    }

    pub fn sensor_count(&self) -> usize {
        self.branch.input_dim()
    }

    pub fn n_params(&self) -> usize {
        let trunk = match &self.trunk {
            Trunk::Mlp(m) => m.params().len(),
            Trunk::Pod(_) => 0,
        };
        self.branch.params().len() + trunk + usize::from(self.train_bias)
    }

    /// Trainable parameters: branch, MLP trunk, then `bias0` if trainable.
    pub fn params(&self) -> Vec<f64> {
        let mut v = self.branch.params().to_vec();
        if let Trunk::Mlp(m) = &self.trunk {
            v.extend_from_slice(m.params());
        }
        if self.train_bias {
            v.push(self.bias0);
        }
        v
    }

    pub fn set_params(&mut self, v: &[f64]) -> Result<()> {
        if v.len() != self.n_params() {
            return Err(Error::DimMismatch { expected: self.n_params(), got: v.len() });
        }
        let nb = self.branch.params().len();
        self.branch.params_mut().copy_from_slice(&v[..nb]);
        let mut off = nb;
        if let Trunk::Mlp(m) = &mut self.trunk {
            let nt = m.params().len();
            m.params_mut().copy_from_slice(&v[off..off + nt]);
            off += nt;
        }
        if self.train_bias {
            self.bias0 = v[off];
        }
        Ok(())
    }

    /// Outputs for a batch of sensor vectors (rows) at the query points
    /// `coords` (rows of `dim` coordinates). A POD trunk only accepts its
    /// own grid.
    pub fn forward(&self, sensors: ArrayView2<f64>, coords: ArrayView2<f64>) -> Result<DeepONetCache> {
        let branch = self.branch.forward(sensors)?;
        let b = branch.output();
        match &self.trunk {
            Trunk::Mlp(m) => {
                let trunk = m.forward(coords)?;
                let mut output = b.dot(&trunk.output().t());
                output += self.bias0;
                Ok(DeepONetCache { branch, trunk: Some(trunk), output })
            }
            Trunk::Pod(pod) => {
                check_pod_coords(pod, coords)?;
                let mut output = b.dot(&pod.modes.t());
                output += &ArrayView1::from(&pod.mean);
                output += self.bias0;
                Ok(DeepONetCache { branch, trunk: None, output })
            }
        }
    }

    /// Gradient of `Σ cot ⊙ output` with respect to `params()`.
    pub fn backward(&self, cache: &DeepONetCache, cot: ArrayView2<f64>) -> Result<Vec<f64>> {
        if cot.dim() != cache.output.dim() {
            return Err(Error::DimMismatch { expected: cache.output.len(), got: cot.len() });
        }
        let mut grad = vec![0.0; self.n_params()];
        let nb = self.branch.params().len();
        let b = cache.branch.output();
        let mut off = nb;
        let db = match (&self.trunk, &cache.trunk) {
            (Trunk::Mlp(m), Some(tc)) => {
                let t = tc.output();
                let dt = cot.t().dot(b);
                let nt = m.params().len();
                m.backward(tc, dt.view(), &mut grad[nb..nb + nt])?;
                off += nt;
                cot.dot(t)
            }
            (Trunk::Pod(pod), None) => cot.dot(&pod.modes),
            _ => return Err(Error::InvalidArgument("cache does not belong to this model".into())),
        };
        self.branch.backward(&cache.branch, db.view(), &mut grad[..nb])?;
        if self.train_bias {
            grad[off] = cot.sum();
        }
        Ok(grad)
    }

    pub fn predict(&self, sensors: ArrayView2<f64>, coords: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward(sensors, coords)?.output)
    }
}

fn check_pod_coords(pod: &PodBasis, coords: ArrayView2<f64>) -> Result<()> {
    let expected = grid_coords(&pod.grid);
    if coords.dim() != expected.dim() || coords.iter().zip(expected.iter()).any(|(a, b)| a != b) {
        return Err(Error::GridMismatch("a POD trunk is only defined on its own grid".into()));
    }
    Ok(())
}

/// Interior grid points as rows.
pub fn grid_coords(grid: &Grid) -> Array2<f64> {
    let pts = grid.coords();
    Array2::from_shape_fn((pts.len(), grid.dim()), |(i, d)| pts[i][d])
}

/// Adam with decoupled weight decay.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Adam {
    pub fn new(n: usize, lr: f64, weight_decay: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay, step: 0, m: vec![0.0; n], v: vec![0.0; n] }
    }

    pub fn update(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::DimMismatch { expected: self.m.len(), got: params.len().max(grads.len()) });
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            let g = grads[i];
            params[i] -= self.lr * self.weight_decay * params[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            params[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
        }
        Ok(())
    }
}

fn write_mlp(w: &mut ByteWriter, m: &Mlp) -> Result<()> {
    let layers = u8::try_from(m.sizes.len()).map_err(|_| Error::InvalidArgument("too many layers".into()))?;
    w.u8(layers);
    for s in &m.sizes {
        w.u32_len(*s, "layer width")?;
    }
    w.u8(u8::from(m.tanh_output));
    w.f64s(&m.params);
    Ok(())
}

fn read_mlp(r: &mut ByteReader) -> Result<Mlp> {
    let layers = r.u8()? as usize;
    let sizes = (0..layers).map(|_| r.u32().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
    let tanh_output = r.u8()? != 0;
    let mut m = Mlp::zeros(&sizes, tanh_output).map_err(|e| Error::Malformed(e.to_string()))?;
    let n = m.params.len();
    m.params = r.f64s(n)?;
    Ok(m)
}

/// Model plus optional optimizer state, as stored in a checkpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: DeepONet,
    pub adam: Option<Adam>,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let m = &self.model;
        let mut w = ByteWriter::new();
        w.bytes(b"NONN");
        w.u16(CHECKPOINT_VERSION);
        w.u32_len(m.sensor_stride, "sensor stride")?;
        write_mlp(&mut w, &m.branch)?;
        match &m.trunk {
            Trunk::Mlp(t) => {
                w.u8(0);
                write_mlp(&mut w, t)?;
            }
            Trunk::Pod(pod) => {
                w.u8(1);
                w.u8(pod.grid.dim() as u8);
                w.u32_len(pod.grid.n_interior(), "grid size")?;
                w.u8(pod.components as u8);
                w.u32_len(pod.rank(), "rank")?;
                w.f64s(&pod.mean);
                w.f64s(pod.modes.as_slice().expect("standard layout"));
                w.u32_len(pod.eigenvalues.len(), "eigenvalue count")?;
                w.f64s(&pod.eigenvalues);
            }
        }
        w.u8(u8::from(m.train_bias));
        w.f64(m.bias0);
        match &self.adam {
            None => w.u8(0),
            Some(a) => {
                if a.m.len() != m.n_params() {
                    return Err(Error::DimMismatch { expected: m.n_params(), got: a.m.len() });
                }
                w.u8(1);
                w.u64(a.step);
                w.f64s(&[a.lr, a.beta1, a.beta2, a.eps, a.weight_decay]);
                w.f64s(&a.m);
                w.f64s(&a.v);
            }
        }
        Ok(w.buf)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes, "checkpoint");
        r.magic("NONN")?;
        let version = r.u16()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::UnsupportedVersion { found: version, expected: CHECKPOINT_VERSION });
        }
        let sensor_stride = r.u32()? as usize;
        let branch = read_mlp(&mut r)?;
        let trunk = match r.u8()? {
            0 => Trunk::Mlp(read_mlp(&mut r)?),
            1 => {
                let dim = r.u8()? as usize;
                let n = r.u32()? as usize;
                let grid = Grid::new(dim, n).map_err(|e| Error::Malformed(e.to_string()))?;
                let components = r.u8()? as usize;
                let p = r.u32()? as usize;
                let len = grid.len() * components;
                let mean = r.f64s(len)?;
                let modes = Array2::from_shape_vec((len, p), r.f64s(len * p)?).map_err(|e| Error::Malformed(e.to_string()))?;
                let ne = r.u32()? as usize;
                let eigenvalues = r.f64s(ne)?;
                Trunk::Pod(PodBasis { grid, components, mean, modes, eigenvalues })
            }
            t => return Err(Error::Malformed(format!("trunk tag {t}"))),
        };
        let train_bias = r.u8()? != 0;
        let bias0 = r.f64()?;
        let model = DeepONet { branch, trunk, bias0, train_bias, sensor_stride };
        let rank_ok = match &model.trunk {
            Trunk::Mlp(t) => t.output_dim() == model.rank(),
            Trunk::Pod(p) => p.rank() == model.rank(),
        };
        if !rank_ok {
            return Err(Error::Malformed("branch and trunk ranks differ".into()));
        }
        let adam = match r.u8()? {
            0 => None,
            1 => {
                let step = r.u64()?;
                let h = r.f64s(5)?;
                let n = model.n_params();
                let m = r.f64s(n)?;
                let v = r.f64s(n)?;
                Some(Adam { lr: h[0], beta1: h[1], beta2: h[2], eps: h[3], weight_decay: h[4], step, m, v })
            }
            t => return Err(Error::Malformed(format!("optimizer flag {t}"))),
        };
        r.finish()?;
        Ok(Self { model, adam })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

/// Stacks equal-length vectors into a matrix.
pub fn stack_rows(vs: &[Vec<f64>]) -> Result<Array2<f64>> {
    let cols = vs.first().map_or(0, Vec::len);
    if let Some(bad) = vs.iter().find(|v| v.len() != cols) {
        return Err(Error::DimMismatch { expected: cols, got: bad.len() });
    }
    Ok(Array2::from_shape_fn((vs.len(), cols), |(i, j)| vs[i][j]))
}
