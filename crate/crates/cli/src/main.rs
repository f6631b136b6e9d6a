mod commands;
mod config;
mod output;
mod setup;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    fn class(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
            CliError::Numerical(_) => "numerical",
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl From<newtonop::Error> for CliError {
    fn from(e: newtonop::Error) -> Self {
        use newtonop::Error as E;
        let msg = e.to_string();
        match e {
            E::Io(_) | E::BadMagic { .. } | E::UnsupportedVersion { .. } | E::Truncated(_) | E::Malformed(_) => {
                CliError::Io(msg)
            }
            E::SingularJacobian { .. } | E::NonFinite(_) | E::BudgetExhausted { .. } | E::RankDeficient { .. } => {
                CliError::Numerical(msg)
            }
            E::GridMismatch(_) | E::InvalidArgument(_) | E::DimMismatch { .. } | E::MissingLabels(_) => {
                CliError::Config(msg)
            }
        }
    }
}

#[derive(Parser)]
#[command(name = "newtonop", version, about = "Newton-step neural operators for nonlinear elliptic problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug)]
pub struct Common {
    /// Key = value run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads for parallel sections.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Find distinct solutions from a sweep of initial guesses.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        /// Guess list, e.g. `sine:-40:40:10+spectral:20:50`.
        #[arg(long)]
        guesses: Option<String>,
    },
    /// Generate a Newton-step dataset.
    GenData {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        split: Option<String>,
        #[arg(long)]
        newton_depth: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a DeepONet on Newton-step data.
    Train {
        #[command(flatten)]
        common: Common,
        /// Labelled data (the supervised stream).
        #[arg(long)]
        data: PathBuf,
        /// Inputs for the Newton-loss stream.
        #[arg(long)]
        data_unsup: Option<PathBuf>,
        /// Held-out data evaluated at every record.
        #[arg(long)]
        test: Option<PathBuf>,
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        max_steps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Error metrics and losses of a checkpoint on a dataset.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Iterate `u <- u + model(u)` from dataset inputs or fresh draws.
    Iterate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        /// Take starting states from this dataset's inputs.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        hybrid_tail: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Time the banded solver against batched operator evaluation.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        /// Comma-separated batch sizes.
        #[arg(long)]
        counts: Option<String>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(common: &Common) -> Result<config::Config, CliError> {
    let mut cfg = config::Config::load_or_default(common.config.as_deref())?;
    cfg.override_with("threads", common.threads)?;
    let threads: usize = cfg.get("threads")?;
    if threads == 0 {
        return Err(CliError::Config("threads must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot start thread pool: {e}")))?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve { common, out, guesses } => {
            let mut cfg = load_config(&common)?;
            cfg.override_with("guesses", guesses)?;
            commands::solve(&cfg, &out)
        }
        Command::GenData { common, seed, count, split, newton_depth, out } => {
            let mut cfg = load_config(&common)?;
            cfg.override_with("seed", seed)?;
            cfg.override_with("count", count)?;
            cfg.override_with("split", split)?;
            cfg.override_with("newton_depth", newton_depth)?;
            commands::gen_data(&cfg, &out)
        }
        Command::Train { common, data, data_unsup, test, mode, lambda, epochs, max_steps, seed, out } => {
            let mut cfg = load_config(&common)?;
            cfg.override_with("mode", mode)?;
            cfg.override_with("lambda", lambda)?;
            cfg.override_with("epochs", epochs)?;
            cfg.override_with("max_steps", max_steps)?;
            cfg.override_with("seed", seed)?;
            commands::train(&cfg, &data, data_unsup.as_deref(), test.as_deref(), &out)
        }
        Command::Eval { common, model, data, out } => {
            let cfg = load_config(&common)?;
            commands::eval(&cfg, &model, &data, &out)
        }
        Command::Iterate { common, model, data, steps, hybrid_tail, out } => {
            let mut cfg = load_config(&common)?;
            cfg.override_with("steps", steps)?;
            cfg.override_with("hybrid_tail", hybrid_tail)?;
            commands::iterate(&cfg, &model, data.as_deref(), &out)
        }
        Command::Bench { common, model, counts, reps, out } => {
            let mut cfg = load_config(&common)?;
            cfg.override_with("counts", counts)?;
            cfg.override_with("reps", reps)?;
            commands::bench(&cfg, &model, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.class(), e.to_string().replace('\n', " "));
            ExitCode::from(e.exit_code())
        }
    }
}
