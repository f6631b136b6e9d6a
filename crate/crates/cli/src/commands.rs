//! One function per subcommand.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use newtonop::datagen::{make_dataset, OperatorDataset};
use newtonop::grid::sensor_indices;
use newtonop::neural::{compute_pod_basis, Checkpoint, DeepONet};
use newtonop::newton::relative_l2;
use newtonop::problems::{Problem, ProblemSpec};
use newtonop::rng::Rng;
use newtonop::surrogate::{self, median_residuals, operator_iterate_many, ModelOracle};
use newtonop::training::{self, evaluate, history_csv, LossMode, Metrics, Samples, TrainData};

use crate::config::Config;
use crate::output::{ensure_dir, sidecar, write, write_state, Manifest};
use crate::setup;
use crate::CliError;

fn metrics_lines(prefix: &str, m: &Metrics, out: &mut Manifest) {
    for (k, v) in [
        ("l2_abs", m.l2_abs),
        ("l2_rel", m.l2_rel),
        ("h1_abs", m.h1_abs),
        ("h1_rel", m.h1_rel),
        ("h2_abs", m.h2_abs),
        ("h2_rel", m.h2_rel),
        ("mse", m.mse),
        ("newton_loss", m.newton),
    ] {
        out.add(&format!("{prefix}{k}"), format!("{v:e}"));
    }
}

pub fn solve(cfg: &Config, out: &Path) -> Result<(), CliError> {
    let t0 = Instant::now();
    let spec = setup::problem_spec(cfg)?;
    let p = spec.build()?;
    let report = setup::sweep(cfg, &p, cfg.raw("guesses"))?;
    ensure_dir(out)?;

    write(&out.join("sweep.txt"), report.summary(&p))?;
    let mut traj = String::from("guess,iter,residual_linf,step_l2\n");
    for (g, t) in report.trajectories.iter().enumerate() {
        for line in t.to_csv(&p).lines().skip(1) {
            let _ = writeln!(traj, "{g},{line}");
        }
    }
    write(&out.join("trajectories.csv"), traj)?;

    let mut m = Manifest::new("solve");
    m.add("guesses", report.trajectories.len());
    m.add("converged", report.converged_count());
    m.add("distinct_solutions", report.solutions.len());
    for (k, s) in report.solutions.iter().enumerate() {
        write_state(out, &format!("solution_{k}"), &p, &s.state)?;
        m.add(&format!("solution_{k}_l2"), format!("{:e}", s.l2_norm));
        m.add(&format!("solution_{k}_residual_linf"), format!("{:e}", s.residual_linf));
    }
    let mut min_dist = f64::INFINITY;
    for (i, a) in report.solutions.iter().enumerate() {
        for b in &report.solutions[i + 1..] {
            min_dist = min_dist.min(relative_l2(&p, &a.state, &b.state));
        }
    }
    if report.solutions.len() > 1 {
        m.add("min_pairwise_rel_l2", format!("{min_dist:e}"));
    }
    m.save(&out.join("manifest.txt"), cfg)?;
    println!(
        "{}: {} distinct solutions from {} guesses ({} converged) in {:.3} s",
        spec.name(),
        report.solutions.len(),
        report.trajectories.len(),
        report.converged_count(),
        t0.elapsed().as_secs_f64()
    );
    if report.solutions.is_empty() {
        return Err(CliError::Numerical("no guess converged".into()));
    }
    Ok(())
}

pub fn gen_data(cfg: &Config, out: &Path) -> Result<(), CliError> {
    let spec = setup::problem_spec(cfg)?;
    let p = spec.build()?;
    let bases = setup::bases(cfg, &p)?;
    let ds = make_dataset(&spec, &bases, &setup::recipe(cfg)?, &setup::dataset_config(cfg)?)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    ds.save(out)?;
    write(&sidecar(out, "meta"), ds.meta_text())?;
    let mut m = Manifest::new("gen-data");
    m.add("samples", ds.len());
    m.add("series", ds.meta.series);
    m.add("dropped", ds.meta.dropped);
    m.save(&sidecar(out, "manifest"), cfg)?;
    println!("{}: wrote {} samples to {}", spec.name(), ds.len(), out.display());
    Ok(())
}

fn load_dataset(path: &Path) -> Result<OperatorDataset, CliError> {
    OperatorDataset::load(path).map_err(|e| match e {
        newtonop::Error::Io(io) => CliError::Io(format!("{}: {io}", path.display())),
        other => CliError::from(other),
    })
}

fn load_model(path: &Path) -> Result<DeepONet, CliError> {
    let ck = Checkpoint::load(path).map_err(|e| match e {
        newtonop::Error::Io(io) => CliError::Io(format!("{}: {io}", path.display())),
        other => CliError::from(other),
    })?;
    Ok(ck.model)
}

fn same_problem(a: &OperatorDataset, b: &OperatorDataset) -> Result<(), CliError> {
    if a.problem != b.problem || a.sensor_stride != b.sensor_stride {
        return Err(CliError::Config(format!(
            "datasets disagree: {} {:?} stride {} vs {} {:?} stride {}",
            a.problem.name(),
            a.problem.params(),
            a.sensor_stride,
            b.problem.name(),
            b.problem.params(),
            b.sensor_stride
        )));
    }
    Ok(())
}

fn sensor_count(p: &Problem, stride: usize) -> Result<usize, CliError> {
    Ok(sensor_indices(p.grid(), stride)?.len() * p.components())
}

fn build_model(cfg: &Config, p: &Problem, stride: usize, snapshots: &[Vec<f64>]) -> Result<DeepONet, CliError> {
    let arch = setup::arch_config(cfg)?;
    let mut rng = Rng::seed_from_u64(cfg.get("seed")?);
    let sensors = sensor_count(p, stride)?;
    match cfg.raw("trunk") {
        "mlp" => Ok(DeepONet::with_mlp_trunk(sensors, p.grid().dim(), stride, &arch, &mut rng)?),
        "pod" => {
            let cap: usize = cfg.get("pod_snapshots")?;
            let take = &snapshots[..snapshots.len().min(cap)];
            let pod = compute_pod_basis(*p.grid(), p.components(), take, arch.rank)?;
            Ok(DeepONet::with_pod_trunk(sensors, stride, pod, &arch, &mut rng)?)
        }
        other => Err(CliError::Config(format!("unknown trunk {other:?}"))),
    }
}

pub fn train(
    cfg: &Config,
    data: &Path,
    data_unsup: Option<&Path>,
    test: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    let tcfg = setup::train_config(cfg)?;
    let main = load_dataset(data)?;
    let unsup = data_unsup.map(load_dataset).transpose()?;
    let test = test.map(load_dataset).transpose()?;
    for other in unsup.iter().chain(&test) {
        same_problem(&main, other)?;
    }
    let p = main.build_problem()?;
    let stride = main.sensor_stride;
    let main_s = Samples::from_dataset(&main, &p, stride)?;
    let unsup_s = unsup.as_ref().map(|d| Samples::from_dataset(d, &p, stride)).transpose()?;
    let test_s = test.as_ref().map(|d| Samples::from_dataset(d, &p, stride)).transpose()?;
    let td = match tcfg.mode {
        LossMode::Unsupervised => {
            TrainData { supervised: None, unsupervised: Some(unsup_s.as_ref().unwrap_or(&main_s)), test: test_s.as_ref() }
        }
        _ => TrainData { supervised: Some(&main_s), unsupervised: unsup_s.as_ref(), test: test_s.as_ref() },
    };
    let model = build_model(cfg, &p, stride, &main.labels)?;

    ensure_dir(out)?;
    let ck_path = out.join("checkpoint.nonn");
    let outcome = training::train(&model, &p, &td, &tcfg, |model, adam, row| {
        Checkpoint { model: model.clone(), adam: Some(adam.clone()) }.save(&ck_path)?;
        let t = row.test.map(|t| format!(" test_l2_rel={:.4e} test_newton={:.4e}", t.l2_rel, t.newton)).unwrap_or_default();
        eprintln!("epoch {} step {} train_mse={:.4e} train_newton={:.4e}{t}", row.epoch, row.step, row.train.mse, row.train.newton);
        Ok(())
    })?;
    Checkpoint { model: outcome.model.clone(), adam: Some(outcome.adam.clone()) }.save(&out.join("model.nonn"))?;
    write(&out.join("history.csv"), history_csv(&outcome.history))?;

    let mut m = Manifest::new("train");
    m.add("problem", main.problem.name());
    m.add("supervised_samples", td.supervised.map_or(0, |s| s.len()));
    m.add("unsupervised_samples", td.unsupervised.map_or(0, |s| s.len()));
    m.add("test_samples", test_s.as_ref().map_or(0, |s| s.len()));
    m.add("parameters", outcome.model.n_params());
    m.add("steps", outcome.steps);
    m.add("aborted", outcome.aborted.as_deref().unwrap_or("no"));
    if let Some(last) = outcome.history.last() {
        metrics_lines("final_train_", &last.train, &mut m);
        if let Some(t) = &last.test {
            metrics_lines("final_test_", t, &mut m);
        }
    }
    m.save(&out.join("manifest.txt"), cfg)?;
    match outcome.aborted {
        Some(msg) => Err(CliError::Numerical(format!("training aborted: {msg}; last good model saved"))),
        None => Ok(()),
    }
}

pub fn eval(cfg: &Config, model: &Path, data: &Path, out: &Path) -> Result<(), CliError> {
    let net = load_model(model)?;
    let ds = load_dataset(data)?;
    let p = ds.build_problem()?;
    let samples = Samples::from_dataset(&ds, &p, net.sensor_stride)?;
    let metrics = evaluate(&net, &p, &samples)?;
    ensure_dir(out)?;
    let mut m = Manifest::new("eval");
    m.add("samples", samples.len());
    metrics_lines("", &metrics, &mut m);
    m.save(&out.join("manifest.txt"), cfg)?;
    println!("l2_rel={:.6e} h1_rel={:.6e} h2_rel={:.6e} newton_loss={:.6e}", metrics.l2_rel, metrics.h1_rel, metrics.h2_rel, metrics.newton);
    Ok(())
}

/// Fresh starting states: recipe draws around the configured bases.
fn drawn_states(cfg: &Config, p: &Problem, count: usize) -> Result<Vec<Vec<f64>>, CliError> {
    let recipe = setup::recipe(cfg)?;
    let mut bases = setup::bases(cfg, p)?;
    if bases.is_empty() {
        bases.push(recipe.default_base(p));
    }
    let seed: u64 = cfg.get("seed")?;
    (0..count)
        .map(|i| Ok(recipe.draw(p, &bases[i % bases.len()], &mut Rng::substream(seed, i as u64))?))
        .collect()
}

pub fn iterate(cfg: &Config, model: &Path, data: Option<&Path>, out: &Path) -> Result<(), CliError> {
    let net = load_model(model)?;
    let count: usize = cfg.get("starts")?;
    let (spec, starts): (ProblemSpec, Vec<Vec<f64>>) = match data {
        Some(path) => {
            let ds = load_dataset(path)?;
            (ds.problem.clone(), ds.inputs.into_iter().take(count).collect())
        }
        None => {
            let spec = setup::problem_spec(cfg)?;
            let p = spec.build()?;
            let s = drawn_states(cfg, &p, count)?;
            (spec, s)
        }
    };
    let p = spec.build()?;
    let oracle = ModelOracle::new(net, &p)?;
    let refs = setup::references(cfg, &p)?;
    let icfg = setup::iterate_config(cfg)?;
    let trajs = operator_iterate_many(&oracle, &p, &starts, &icfg, &refs)?;

    ensure_dir(out)?;
    let med = median_residuals(&trajs);
    let mut csv = String::from("step,median_residual_linf\n");
    for (k, r) in med.iter().enumerate() {
        let _ = writeln!(csv, "{k},{r:e}");
    }
    write(&out.join("median.csv"), csv)?;
    for (i, t) in trajs.iter().enumerate() {
        write(&out.join(format!("trajectory_{i:04}.csv")), t.to_csv())?;
    }
    if let Some(t) = trajs.first() {
        write_state(out, "final_0000", &p, t.iterates.last().expect("trajectory has a start"))?;
    }
    let mut m = Manifest::new("iterate");
    m.add("problem", spec.name());
    m.add("starts", trajs.len());
    m.add("references", refs.len());
    m.add("median_residual_linf", med.iter().map(|r| format!("{r:e}")).collect::<Vec<_>>().join(","));
    m.add("diverged", trajs.iter().filter(|t| t.diverged).count());
    m.add("monotone_trajectories", trajs.iter().filter(|t| t.first_residual_increase.is_none()).count());
    m.save(&out.join("manifest.txt"), cfg)?;
    println!("median residual Linf per step: {}", med.iter().map(|r| format!("{r:.3e}")).collect::<Vec<_>>().join(" "));
    Ok(())
}

/// Distinct inputs drawn for timing; larger batches reuse them cyclically.
const BENCH_DISTINCT_INPUTS: usize = 500;

pub fn bench(cfg: &Config, model: &Path, out: &Path) -> Result<(), CliError> {
    let net = load_model(model)?;
    let spec = setup::problem_spec(cfg)?;
    let p = spec.build()?;
    let counts: Vec<usize> = cfg.get_list("counts")?;
    let reps: usize = cfg.get("reps")?;
    let distinct = counts.iter().copied().max().unwrap_or(1).min(BENCH_DISTINCT_INPUTS);
    let inputs = drawn_states(cfg, &p, distinct)?;
    let oracle = ModelOracle::new(net, &p)?;
    let rows = surrogate::bench(&p, &oracle, &inputs, &counts, reps)?;

    ensure_dir(out)?;
    write(&out.join("bench.csv"), surrogate::bench_csv(&rows))?;
    let mut m = Manifest::new("bench");
    m.add("problem", spec.name());
    m.add("distinct_inputs", distinct);
    for r in &rows {
        m.add(&format!("speedup_{}", r.n_systems), format!("{:.6e}", r.speedup()));
        m.add(&format!("solver_median_seconds_{}", r.n_systems), format!("{:.6e}", r.solver_median));
        m.add(&format!("operator_median_seconds_{}", r.n_systems), format!("{:.6e}", r.operator_median));
    }
    m.save(&out.join("manifest.txt"), cfg)?;
    for r in &rows {
        println!("n={} solver={:.4e}s operator={:.4e}s speedup={:.1}", r.n_systems, r.solver_seconds, r.operator_seconds, r.speedup());
    }
    Ok(())
}
