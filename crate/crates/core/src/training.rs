//! Supervised, Newton-residual and combined losses, the training loop and
//! evaluation metrics.

use std::fmt::Write as _;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use crate::datagen::{sensor_values, OperatorDataset};
use crate::error::{Error, Result};
use crate::grid::Norm;
use crate::neural::{grid_coords, stack_rows, Adam, DeepONet};
use crate::problems::Problem;
use crate::rng::Rng;

/// Inputs prepared for a model: sensor rows plus the full states and, when
/// known, the step labels.
#[derive(Clone, Debug)]
pub struct Samples {
    pub sensors: Array2<f64>,
    pub inputs: Vec<Vec<f64>>,
    pub labels: Option<Vec<Vec<f64>>>,
}

impl Samples {
    pub fn new(p: &Problem, stride: usize, inputs: Vec<Vec<f64>>, labels: Option<Vec<Vec<f64>>>) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != inputs.len() {
                return Err(Error::DimMismatch { expected: inputs.len(), got: l.len() });
            }
        }
        for v in inputs.iter().chain(labels.iter().flatten()) {
            if v.len() != p.unknowns() {
                return Err(Error::DimMismatch { expected: p.unknowns(), got: v.len() });
            }
        }
        let rows = inputs.iter().map(|u| sensor_values(p, stride, u)).collect::<Result<Vec<_>>>()?;
        let sensors = if rows.is_empty() {
            Array2::zeros((0, sensor_values(p, stride, &vec![0.0; p.unknowns()])?.len()))
        } else {
            stack_rows(&rows)?
        };
        Ok(Self { sensors, inputs, labels })
    }

    pub fn from_dataset(ds: &OperatorDataset, p: &Problem, stride: usize) -> Result<Self> {
        if *p.grid() != ds.grid {
            return Err(Error::GridMismatch(format!("dataset grid {:?} vs problem grid {:?}", ds.grid, p.grid())));
        }
        Self::new(p, stride, ds.inputs.clone(), Some(ds.labels.clone()))
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            sensors: Array2::from_shape_fn((idx.len(), self.sensors.ncols()), |(i, j)| self.sensors[[idx[i], j]]),
            inputs: idx.iter().map(|&i| self.inputs[i].clone()).collect(),
            labels: self.labels.as_ref().map(|l| idx.iter().map(|&i| l[i].clone()).collect()),
        }
    }

    fn labels(&self) -> Result<&[Vec<f64>]> {
        self.labels.as_deref().ok_or_else(|| Error::MissingLabels("supervised loss needs step labels".into()))
    }
}

/// Query points for a model on the problem grid.
pub fn model_coords(model: &DeepONet, p: &Problem) -> Result<Array2<f64>> {
    if let crate::neural::Trunk::Mlp(_) = model.trunk {
        if p.components() != 1 {
            return Err(Error::InvalidArgument("multi-species problems need a POD trunk".into()));
        }
    }
    Ok(grid_coords(p.grid()))
}

/// `(1/(N M)) Σ |pred - label|²` over all samples and unknowns.
pub fn mse_of_outputs(outputs: ArrayView2<f64>, labels: &[Vec<f64>]) -> f64 {
    let (n, m) = outputs.dim();
    if n == 0 {
        return 0.0;
    }
    let mut acc = 0.0;
    for (row, l) in outputs.outer_iter().zip(labels) {
        acc += row.iter().zip(l).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    acc / (n * m) as f64
}

/// Per-sample residuals `J(u_i) N_i + F(u_i)`.
fn newton_residuals(p: &Problem, inputs: &[Vec<f64>], outputs: ArrayView2<f64>) -> Result<Vec<(Vec<f64>, crate::problems::Jacobian)>> {
    inputs
        .par_iter()
        .enumerate()
        .map(|(i, u)| {
            let j = p.jacobian(u)?;
            let f = p.residual(u)?;
            let row = outputs.row(i).to_vec();
            let mut r = j.apply(&row);
            for (ri, fi) in r.iter_mut().zip(&f) {
                *ri += fi;
            }
            Ok((r, j))
        })
        .collect()
}

/// `(1/(m M)) Σ_i ‖J(u_i) N_i + F(u_i)‖²` for given outputs `N_i`.
pub fn newton_loss_of_outputs(p: &Problem, inputs: &[Vec<f64>], outputs: ArrayView2<f64>) -> Result<f64> {
    let (n, m) = outputs.dim();
    if n != inputs.len() || m != p.unknowns() {
        return Err(Error::DimMismatch { expected: inputs.len() * p.unknowns(), got: n * m });
    }
    if n == 0 {
        return Ok(0.0);
    }
    let res = newton_residuals(p, inputs, outputs)?;
    let total: f64 = res.iter().map(|(r, _)| r.iter().map(|x| x * x).sum::<f64>()).sum();
    Ok(total / (n * m) as f64)
}

pub fn mse_loss(model: &DeepONet, coords: ArrayView2<f64>, batch: &Samples) -> Result<(f64, Vec<f64>)> {
    let labels = batch.labels()?;
    let cache = model.forward(batch.sensors.view(), coords)?;
    let (n, m) = cache.output.dim();
    let scale = 1.0 / (n * m) as f64;
    let mut cot = cache.output.clone();
    for (mut row, l) in cot.outer_iter_mut().zip(labels) {
        for (c, y) in row.iter_mut().zip(l) {
            *c = 2.0 * scale * (*c - y);
        }
    }
    let loss = mse_of_outputs(cache.output.view(), labels);
    Ok((loss, model.backward(&cache, cot.view())?))
}

/// Newton-residual loss; the cotangent of output `i` is `2 Jᵢᵀ rᵢ / (m M)`.
pub fn newton_loss(model: &DeepONet, p: &Problem, coords: ArrayView2<f64>, batch: &Samples) -> Result<(f64, Vec<f64>)> {
    let cache = model.forward(batch.sensors.view(), coords)?;
    let (n, m) = cache.output.dim();
    if m != p.unknowns() {
        return Err(Error::DimMismatch { expected: p.unknowns(), got: m });
    }
    let scale = 1.0 / (n * m) as f64;
    let res = newton_residuals(p, &batch.inputs, cache.output.view())?;
    let mut loss = 0.0;
    let mut cot = Array2::zeros((n, m));
    for (i, (r, j)) in res.iter().enumerate() {
        loss += r.iter().map(|x| x * x).sum::<f64>();
        let jt = j.apply_transpose(r);
        for (c, v) in cot.row_mut(i).iter_mut().zip(&jt) {
            *c = 2.0 * scale * v;
        }
    }
    Ok((loss * scale, model.backward(&cache, cot.view())?))
}

/// `λ · mse(sup) + newton(unsup)`, halved when `halve` is set. Either stream
/// may be empty, not both.
pub fn combined_loss(
    model: &DeepONet,
    p: &Problem,
    coords: ArrayView2<f64>,
    sup: &Samples,
    unsup: &Samples,
    lambda: f64,
    halve: bool,
) -> Result<(f64, Vec<f64>)> {
    if sup.is_empty() && unsup.is_empty() {
        return Err(Error::InvalidArgument("combined loss needs at least one non-empty stream".into()));
    }
    let mut loss = 0.0;
    let mut grad = vec![0.0; model.n_params()];
    if !sup.is_empty() && lambda != 0.0 {
        let (l, g) = mse_loss(model, coords, sup)?;
        loss += lambda * l;
        grad.iter_mut().zip(&g).for_each(|(a, b)| *a += lambda * b);
    }
    if !unsup.is_empty() {
        let (l, g) = newton_loss(model, p, coords, unsup)?;
        loss += l;
        grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
    }
    if halve {
        loss *= 0.5;
        grad.iter_mut().for_each(|g| *g *= 0.5);
    }
    Ok((loss, grad))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossMode {
    Supervised,
    Unsupervised,
    Combined,
}

impl LossMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "supervised" => Ok(LossMode::Supervised),
            "unsupervised" => Ok(LossMode::Unsupervised),
            "combined" => Ok(LossMode::Combined),
            other => Err(Error::InvalidArgument(format!("unknown loss mode {other:?}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LossMode::Supervised => "supervised",
            LossMode::Unsupervised => "unsupervised",
            LossMode::Combined => "combined",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub mode: LossMode,
    /// Weight of the supervised term in combined mode.
    pub lambda: f64,
    /// Divide the combined loss by two.
    pub halve: bool,
    pub lr: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Stop after this many optimizer steps even mid-epoch.
    pub max_steps: Option<usize>,
    pub seed: u64,
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mode: LossMode::Combined,
            lambda: 0.01,
            halve: false,
            lr: 1e-4,
            weight_decay: 1e-6,
            batch_size: 50,
            epochs: 1000,
            max_steps: None,
            seed: 0,
            eval_every: 10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || self.batch_size == 0 || self.eval_every == 0 || !(self.lr >= 0.0) {
            return Err(Error::InvalidArgument(
                "need lambda >= 0, lr >= 0, batch_size >= 1 and eval_every >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Error metrics of predicted against true steps (means over samples) and
/// both loss values.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Metrics {
    pub l2_abs: f64,
    pub l2_rel: f64,
    pub h1_abs: f64,
    pub h1_rel: f64,
    pub h2_abs: f64,
    pub h2_rel: f64,
    pub mse: f64,
    pub newton: f64,
}

pub fn evaluate(model: &DeepONet, p: &Problem, samples: &Samples) -> Result<Metrics> {
    let labels = samples.labels()?;
    if samples.is_empty() {
        return Ok(Metrics::default());
    }
    let coords = model_coords(model, p)?;
    let out = model.predict(samples.sensors.view(), coords.view())?;
    let mut m = Metrics { mse: mse_of_outputs(out.view(), labels), ..Default::default() };
    m.newton = newton_loss_of_outputs(p, &samples.inputs, out.view())?;
    let rel = |a: f64, b: f64| if b == 0.0 { if a == 0.0 { 0.0 } else { f64::INFINITY } } else { a / b };
    for (row, l) in out.outer_iter().zip(labels) {
        let diff: Vec<f64> = row.iter().zip(l).map(|(a, b)| a - b).collect();
        for (kind, abs, relv) in [
            (Norm::L2, &mut m.l2_abs, &mut m.l2_rel),
            (Norm::H1, &mut m.h1_abs, &mut m.h1_rel),
            (Norm::H2, &mut m.h2_abs, &mut m.h2_rel),
        ] {
            let e = p.norm(&diff, kind);
            *abs += e;
            *relv += rel(e, p.norm(l, kind));
        }
    }
    let n = samples.len() as f64;
    for v in [&mut m.l2_abs, &mut m.l2_rel, &mut m.h1_abs, &mut m.h1_rel, &mut m.h2_abs, &mut m.h2_rel] {
        *v /= n;
    }
    Ok(m)
}

#[derive(Clone, Debug, PartialEq)]
pub struct HistoryRow {
    pub epoch: usize,
    pub step: usize,
    pub train: Metrics,
    pub test: Option<Metrics>,
}

pub fn history_csv(rows: &[HistoryRow]) -> String {
    let mut out = String::from("epoch,train_mse,train_newton,test_l2_rel,test_h1_rel,test_h2_rel,test_mse,test_newton,step\n");
    for r in rows {
        let t = r.test.unwrap_or(Metrics { l2_rel: f64::NAN, h1_rel: f64::NAN, h2_rel: f64::NAN, mse: f64::NAN, newton: f64::NAN, ..Default::default() });
        let _ = writeln!(
            out,
            "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{}",
            r.epoch, r.train.mse, r.train.newton, t.l2_rel, t.h1_rel, t.h2_rel, t.mse, t.newton, r.step
        );
    }
    out
}

/// Training data by role. `supervised` feeds the MSE term, `unsupervised`
/// the Newton term (its labels are ignored).
pub struct TrainData<'a> {
    pub supervised: Option<&'a Samples>,
    pub unsupervised: Option<&'a Samples>,
    pub test: Option<&'a Samples>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: DeepONet,
    pub adam: Adam,
    pub history: Vec<HistoryRow>,
    pub steps: usize,
    /// Set when a non-finite loss or gradient stopped training; the model is
    /// the last one with finite values.
    pub aborted: Option<String>,
}

/// Cycles through a shuffled index set, reshuffling on each pass.
struct Stream {
    perm: Vec<usize>,
    pos: usize,
}

impl Stream {
    fn new(n: usize, rng: &mut Rng) -> Self {
        let mut perm: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut perm);
        Self { perm, pos: 0 }
    }

    fn next(&mut self, k: usize, rng: &mut Rng) -> Vec<usize> {
        let mut out = Vec::with_capacity(k);
        while out.len() < k {
            if self.pos == self.perm.len() {
                rng.shuffle(&mut self.perm);
                self.pos = 0;
            }
            let take = (k - out.len()).min(self.perm.len() - self.pos);
            out.extend_from_slice(&self.perm[self.pos..self.pos + take]);
            self.pos += take;
        }
        out
    }
}

fn train_metrics(model: &DeepONet, p: &Problem, data: &TrainData) -> Result<Metrics> {
    let coords = model_coords(model, p)?;
    let mut m = Metrics::default();
    let labelled = data.supervised.or(data.unsupervised).filter(|s| s.labels.is_some());
    if let Some(s) = labelled {
        m = evaluate(model, p, s)?;
    }
    if let Some(u) = data.unsupervised.or(data.supervised) {
        if !u.is_empty() {
            let out = model.predict(u.sensors.view(), coords.view())?;
            m.newton = newton_loss_of_outputs(p, &u.inputs, out.view())?;
        }
    }
    Ok(m)
}

/// Minibatch Adam training. Each step draws one minibatch per active
/// stream; the larger stream gets `batch_size` samples and the other a
/// proportional share, and an epoch is one pass over the larger stream.
/// Metrics are recorded before the first step, every `eval_every` epochs and
/// after the last step; `on_eval` sees each record.
pub fn train(
    model: &DeepONet,
    p: &Problem,
    data: &TrainData,
    cfg: &TrainConfig,
    mut on_eval: impl FnMut(&DeepONet, &Adam, &HistoryRow) -> Result<()>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let empty = Samples { sensors: Array2::zeros((0, model.sensor_count())), inputs: vec![], labels: Some(vec![]) };
    let (sup, unsup): (&Samples, &Samples) = match cfg.mode {
        LossMode::Supervised => (data.supervised.ok_or_else(|| Error::MissingLabels("supervised mode needs labelled data".into()))?, &empty),
        LossMode::Unsupervised => (&empty, data.unsupervised.or(data.supervised).ok_or_else(|| Error::InvalidArgument("no training data".into()))?),
        LossMode::Combined => (data.supervised.unwrap_or(&empty), data.unsupervised.unwrap_or(&empty)),
    };
    if !sup.is_empty() {
        sup.labels()?;
    }
    if sup.is_empty() && unsup.is_empty() {
        return Err(Error::InvalidArgument("no training data".into()));
    }
    let coords = model_coords(model, p)?;
    let big = sup.len().max(unsup.len());
    let share = |n: usize| if n == 0 { 0 } else { ((cfg.batch_size * n) as f64 / big as f64).round().max(1.0) as usize };
    let (bs_sup, bs_unsup) = (share(sup.len()).min(cfg.batch_size), share(unsup.len()).min(cfg.batch_size));
    let steps_per_epoch = big.div_ceil(cfg.batch_size);

    let mut rng = Rng::seed_from_u64(cfg.seed);
    let mut s_sup = Stream::new(sup.len(), &mut rng);
    let mut s_unsup = Stream::new(unsup.len(), &mut rng);
    let mut model = model.clone();
    let mut adam = Adam::new(model.n_params(), cfg.lr, cfg.weight_decay);
    let mut history = Vec::new();
    let record = |model: &DeepONet, epoch: usize, step: usize| -> Result<HistoryRow> {
        Ok(HistoryRow {
            epoch,
            step,
            train: train_metrics(model, p, data)?,
            test: data.test.map(|t| evaluate(model, p, t)).transpose()?,
        })
    };
    let first = record(&model, 0, 0)?;
    on_eval(&model, &adam, &first)?;
    history.push(first);

    let mut step = 0usize;
    let mut aborted = None;
    let mut last_epoch = 0;
    'epochs: for epoch in 1..=cfg.epochs {
        for _ in 0..steps_per_epoch {
            if cfg.max_steps.is_some_and(|m| step >= m) {
                break 'epochs;
            }
            let sb = sup.select(&s_sup.next(bs_sup, &mut rng));
            let ub = unsup.select(&s_unsup.next(bs_unsup, &mut rng));
            let (loss, grad) = match cfg.mode {
                LossMode::Supervised => mse_loss(&model, coords.view(), &sb)?,
                LossMode::Unsupervised => newton_loss(&model, p, coords.view(), &ub)?,
                LossMode::Combined => combined_loss(&model, p, coords.view(), &sb, &ub, cfg.lambda, cfg.halve)?,
            };
            if !loss.is_finite() || !grad.iter().all(|g| g.is_finite()) {
                aborted = Some(format!("non-finite loss {loss} at epoch {epoch}, step {step}"));
                break 'epochs;
            }
            let mut params = model.params();
            adam.update(&mut params, &grad)?;
            if !params.iter().all(|v| v.is_finite()) {
                aborted = Some(format!("non-finite parameters at epoch {epoch}, step {step}"));
                break 'epochs;
            }
            model.set_params(&params)?;
            step += 1;
        }
        last_epoch = epoch;
        if epoch % cfg.eval_every == 0 {
            let row = record(&model, epoch, step)?;
            on_eval(&model, &adam, &row)?;
            history.push(row);
        }
    }
    if history.last().map(|r| r.step) != Some(step) {
        let row = record(&model, last_epoch, step)?;
        on_eval(&model, &adam, &row)?;
        history.push(row);
    }
    Ok(TrainOutcome { model, adam, history, steps: step, aborted })
}
