//! Artifact writers: manifests, field CSVs and PGM heatmaps.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use newtonop::datagen::DATASET_VERSION;
use newtonop::neural::CHECKPOINT_VERSION;
use newtonop::problems::Problem;

use crate::config::Config;
use crate::CliError;

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))
}

pub fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

/// Run record written next to every artifact: command, versions, the fully
/// resolved config and command-specific results. No timestamps, so reruns
/// produce identical files.
pub struct Manifest {
    command: &'static str,
    results: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &'static str) -> Self {
        Self { command, results: Vec::new() }
    }

    pub fn add(&mut self, key: &str, value: impl ToString) {
        self.results.push((key.to_string(), value.to_string()));
    }

    pub fn render(&self, cfg: &Config) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# run");
        let _ = writeln!(out, "command = {}", self.command);
        let _ = writeln!(out, "newtonop_version = {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(out, "dataset_format_version = {DATASET_VERSION}");
        let _ = writeln!(out, "checkpoint_format_version = {CHECKPOINT_VERSION}");
        let _ = writeln!(out, "# config");
        out.push_str(&cfg.echo());
        let _ = writeln!(out, "# results");
        for (k, v) in &self.results {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn save(&self, path: &Path, cfg: &Config) -> Result<(), CliError> {
        write(path, self.render(cfg))
    }
}

/// `<file>.manifest` for single-file outputs.
pub fn sidecar(path: &Path, ext: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

/// Interior values as CSV: coordinates then one column per species.
pub fn field_csv(p: &Problem, state: &[f64]) -> String {
    let grid = p.grid();
    let c = p.components();
    let mut out = String::new();
    out.push_str(if grid.dim() == 1 { "x" } else { "x,y" });
    for k in 0..c {
        let _ = write!(out, ",u{k}");
    }
    out.push('\n');
    for idx in 0..grid.len() {
        let (x, y) = grid.point(idx);
        if grid.dim() == 1 {
            let _ = write!(out, "{x:.17e}");
        } else {
            let _ = write!(out, "{x:.17e},{y:.17e}");
        }
        for k in 0..c {
            let _ = write!(out, ",{:.17e}", state[idx * c + k]);
        }
        out.push('\n');
    }
    out
}

/// Binary PGM (P5) of an `n × n` field in storage order (`x` major), with `x`
/// to the right and `y` up. Values are scaled linearly from `[min, max]` to
/// `[0, 255]`; the range is returned for the sidecar.
pub fn pgm(n: usize, values: &[f64]) -> (Vec<u8>, f64, f64) {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    let mut out = format!("P5\n{n} {n}\n255\n").into_bytes();
    for row in 0..n {
        let iy = n - 1 - row;
        for ix in 0..n {
            let v = values[ix * n + iy];
            let level = if span > 0.0 { ((v - min) / span * 255.0).round() } else { 0.0 };
            out.push(level as u8);
        }
    }
    (out, min, max)
}

/// Writes `<stem>.csv` and, for 2D problems, one `<stem>_u<k>.pgm` heatmap
/// plus `.range` sidecar per species.
pub fn write_state(dir: &Path, stem: &str, p: &Problem, state: &[f64]) -> Result<Vec<PathBuf>, CliError> {
    let mut written = Vec::new();
    let csv = dir.join(format!("{stem}.csv"));
    write(&csv, field_csv(p, state))?;
    written.push(csv);
    let grid = p.grid();
    if grid.dim() == 2 {
        let c = p.components();
        for k in 0..c {
            let field: Vec<f64> = state.iter().skip(k).step_by(c).copied().collect();
            let (bytes, min, max) = pgm(grid.n_interior(), &field);
            let path = dir.join(format!("{stem}_u{k}.pgm"));
            write(&path, bytes)?;
            write(&sidecar(&path, "range"), format!("min = {min:.17e}\nmax = {max:.17e}\n"))?;
            written.push(path);
        }
    }
    Ok(written)
}
