//! Turning a [`Config`] into library types.

use newtonop::datagen::{DatasetConfig, Recipe, Split};
use newtonop::neural::ArchConfig;
use newtonop::newton::{sine_bump_guesses, sweep_solutions, NewtonConfig, SweepReport};
use newtonop::problems::{GrayScottProblem, Problem, ProblemSpec};
use newtonop::rng::Rng;
use newtonop::surrogate::IterateConfig;
use newtonop::training::{LossMode, TrainConfig};

use crate::config::Config;
use crate::CliError;

pub fn problem_spec(c: &Config) -> Result<ProblemSpec, CliError> {
    let name = c.raw("problem");
    let n = c.get_opt::<usize>("n")?;
    Ok(match name {
        "example1d" => ProblemSpec::Example1d { n: n.unwrap_or(100) },
        "convex2d" => ProblemSpec::Convex2d { n: n.unwrap_or(63) },
        "nonconvex2d" => ProblemSpec::Nonconvex2d { n: n.unwrap_or(63), s: c.get("s")? },
        "grayscott" => ProblemSpec::GrayScott {
            n: n.unwrap_or(GrayScottProblem::DEFAULT_N),
            d_a: c.get("D_A")?,
            d_s: c.get("D_S")?,
            mu: c.get("mu")?,
            rho: c.get("rho")?,
        },
        other => return Err(CliError::Config(format!("unknown problem {other:?}"))),
    })
}

pub fn newton_config(c: &Config) -> Result<NewtonConfig, CliError> {
    let cfg = NewtonConfig {
        tol_residual: c.get("tol")?,
        max_iter: c.get("max_iter")?,
        divergence_cap: c.get("divergence_cap")?,
        damping: c.get("damping")?,
        floor_factor: c.get("floor_factor")?,
    };
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(cfg)
}

pub fn recipe(c: &Config) -> Result<Recipe, CliError> {
    Ok(match c.raw("recipe") {
        "polynomial" => Recipe::Polynomial { degree: c.get("degree")?, bound: c.get("bound")? },
        "spectral" => Recipe::Spectral { delta: c.get("delta")?, modes: c.get("modes")?, decay: c.get("decay")? },
        "uniform01" => Recipe::Uniform01 { amplitude: c.get("amplitude")? },
        other => return Err(CliError::Config(format!("unknown recipe {other:?}"))),
    })
}

pub fn dataset_config(c: &Config) -> Result<DatasetConfig, CliError> {
    Ok(DatasetConfig {
        count: c.get("count")?,
        newton_depth: c.get("newton_depth")?,
        seed: c.get("seed")?,
        sensor_stride: c.get("sensor_stride")?,
        split: Split::parse(c.raw("split")).map_err(|e| CliError::Config(e.to_string()))?,
    })
}

pub fn arch_config(c: &Config) -> Result<ArchConfig, CliError> {
    Ok(ArchConfig {
        width: c.get("width")?,
        depth: c.get("depth")?,
        trunk_depth: c.get("trunk_depth")?,
        trunk_tanh_output: c.get("trunk_tanh_output")?,
        rank: c.get("rank")?,
        train_bias: c.get("train_bias")?,
    })
}

pub fn train_config(c: &Config) -> Result<TrainConfig, CliError> {
    let cfg = TrainConfig {
        mode: LossMode::parse(c.raw("mode")).map_err(|e| CliError::Config(e.to_string()))?,
        lambda: c.get("lambda")?,
        halve: c.get("halve")?,
        lr: c.get("lr")?,
        weight_decay: c.get("weight_decay")?,
        batch_size: c.get("batch_size")?,
        epochs: c.get("epochs")?,
        max_steps: c.get_opt("max_steps")?,
        seed: c.get("seed")?,
        eval_every: c.get("eval_every")?,
    };
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(cfg)
}

pub fn iterate_config(c: &Config) -> Result<IterateConfig, CliError> {
    Ok(IterateConfig {
        max_steps: c.get("steps")?,
        hybrid_tail: c.get_opt("hybrid_tail")?,
        divergence_cap: c.get("divergence_cap")?,
    })
}

/// Expands a guess list. Terms are joined by `+`:
/// `lift`, `sine:FROM:TO:STEP` (lift plus sine bumps of each amplitude),
/// `spectral:COUNT:SCALE` (lift plus scaled spectral fields, drawn with the
/// `delta`/`modes`/`decay`/`seed` keys) and `uniform:COUNT` (`uniform01`
/// draws with the `amplitude` key).
pub fn guesses(c: &Config, p: &Problem, text: &str) -> Result<Vec<Vec<f64>>, CliError> {
    let bad = |t: &str| CliError::Config(format!("bad guess term {t:?}"));
    let seed: u64 = c.get("seed")?;
    let mut out = Vec::new();
    for (term_idx, term) in text.split('+').map(str::trim).enumerate() {
        let parts: Vec<&str> = term.split(':').collect();
        let num = |i: usize| -> Result<f64, CliError> { parts.get(i).and_then(|s| s.parse().ok()).ok_or_else(|| bad(term)) };
        let count = |i: usize| -> Result<usize, CliError> { parts.get(i).and_then(|s| s.parse().ok()).ok_or_else(|| bad(term)) };
        match parts[0] {
            "lift" if parts.len() == 1 => out.push(p.lift()),
            "sine" if parts.len() == 4 => {
                let (from, to, step) = (num(1)?, num(2)?, num(3)?);
                if !(step > 0.0) || to < from {
                    return Err(bad(term));
                }
                let k = ((to - from) / step + 1e-9).floor() as usize;
                let amps: Vec<f64> = (0..=k).map(|i| from + step * i as f64).collect();
                out.extend(sine_bump_guesses(p, &amps));
            }
            "spectral" if parts.len() == 3 => {
                let (n, scale) = (count(1)?, num(2)?);
                let recipe = Recipe::Spectral { delta: c.get("delta")?, modes: c.get("modes")?, decay: c.get("decay")? };
                let zero = vec![0.0; p.unknowns()];
                let lift = p.lift();
                for i in 0..n {
                    let mut rng = Rng::substream(seed, ((term_idx as u64) << 32) | i as u64);
                    let v = recipe.draw(p, &zero, &mut rng)?;
                    out.push(lift.iter().zip(&v).map(|(l, x)| l + scale * x).collect());
                }
            }
            "uniform" if parts.len() == 2 => {
                let recipe = Recipe::Uniform01 { amplitude: c.get("amplitude")? };
                let base = recipe.default_base(p);
                for i in 0..count(1)? {
                    let mut rng = Rng::substream(seed, ((term_idx as u64) << 32) | i as u64);
                    out.push(recipe.draw(p, &base, &mut rng)?);
                }
            }
            _ => return Err(bad(term)),
        }
    }
    if out.is_empty() {
        return Err(CliError::Config("guess list is empty".into()));
    }
    Ok(out)
}

pub fn sweep(c: &Config, p: &Problem, guess_text: &str) -> Result<SweepReport, CliError> {
    let g = guesses(c, p, guess_text)?;
    Ok(sweep_solutions(p, &g, &newton_config(c)?, c.get("dedup_tol")?)?)
}

/// Base states for dataset generation: `default` (the recipe's own base),
/// `sweep` (every solution found from `guesses`) or `sweep:K` (the K-th
/// solution by L2 norm).
pub fn bases(c: &Config, p: &Problem) -> Result<Vec<Vec<f64>>, CliError> {
    let spec = c.raw("base");
    if spec == "default" {
        return Ok(vec![]);
    }
    let pick = match spec.strip_prefix("sweep") {
        Some("") => None,
        Some(rest) => Some(
            rest.strip_prefix(':')
                .and_then(|k| k.parse::<usize>().ok())
                .ok_or_else(|| CliError::Config(format!("bad base {spec:?}")))?,
        ),
        None => return Err(CliError::Config(format!("bad base {spec:?}"))),
    };
    let report = sweep(c, p, c.raw("guesses"))?;
    let mut states: Vec<Vec<f64>> = report.solutions.into_iter().map(|s| s.state).collect();
    if states.is_empty() {
        return Err(CliError::Numerical("the sweep found no solution to use as a base".into()));
    }
    match pick {
        None => Ok(states),
        Some(k) if k < states.len() => Ok(vec![states.swap_remove(k)]),
        Some(k) => Err(CliError::Numerical(format!("base asks for solution {k} but the sweep found {}", states.len()))),
    }
}

/// Reference states for distance tracking: `sweep` or `none`.
pub fn references(c: &Config, p: &Problem) -> Result<Vec<Vec<f64>>, CliError> {
    match c.raw("references") {
        "none" => Ok(vec![]),
        "sweep" => Ok(sweep(c, p, c.raw("guesses"))?.solutions.into_iter().map(|s| s.state).collect()),
        other => Err(CliError::Config(format!("unknown references {other:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> Config {
        let mut c = Config::default();
        c.apply_text(text).unwrap();
        c
    }

    #[test]
    fn sine_range_is_inclusive() {
        let c = cfg("n = 15");
        let p = problem_spec(&c).unwrap().build().unwrap();
        assert_eq!(guesses(&c, &p, "sine:-40:40:10").unwrap().len(), 9);
        assert_eq!(guesses(&c, &p, "lift + sine:0:1:1").unwrap().len(), 3);
    }

    #[test]
    fn spectral_guesses_are_seeded() {
        let c = cfg("problem = convex2d\nn = 7");
        let p = problem_spec(&c).unwrap().build().unwrap();
        let a = guesses(&c, &p, "spectral:3:10").unwrap();
        assert_eq!(a, guesses(&c, &p, "spectral:3:10").unwrap());
        assert_ne!(a[0], a[1]);
    }

    #[test]
    fn malformed_terms_are_config_errors() {
        let c = cfg("n = 7");
        let p = problem_spec(&c).unwrap().build().unwrap();
        for t in ["sine:1:2", "spectral:x:1", "nope", "sine:1:0:1", "sine:0:1:0"] {
            assert!(matches!(guesses(&c, &p, t), Err(CliError::Config(_))), "{t}");
        }
    }

    #[test]
    fn problem_defaults() {
        assert_eq!(problem_spec(&cfg("")).unwrap(), ProblemSpec::Example1d { n: 100 });
        assert_eq!(problem_spec(&cfg("problem = nonconvex2d")).unwrap(), ProblemSpec::Nonconvex2d { n: 63, s: 1600.0 });
        assert!(problem_spec(&cfg("problem = heat")).is_err());
    }

    #[test]
    fn sweep_base_selection() {
        let c = cfg("n = 63\nbase = sweep:1");
        let p = problem_spec(&c).unwrap().build().unwrap();
        assert_eq!(bases(&c, &p).unwrap().len(), 1);
        let c = cfg("n = 63\nbase = sweep:2");
        assert!(matches!(bases(&c, &p), Err(CliError::Numerical(_))));
        let c = cfg("n = 63\nbase = sweep");
        assert_eq!(bases(&c, &p).unwrap().len(), 2);
    }
}
