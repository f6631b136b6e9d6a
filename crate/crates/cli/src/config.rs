//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

/// Every accepted key with its default. An empty default means "unset".
const KEYS: &[(&str, &str)] = &[
    // problem
    ("problem", "example1d"),
    ("n", ""),
    ("s", "1600"),
    ("D_A", "2.5e-4"),
    ("D_S", "5e-4"),
    ("mu", "0.065"),
    ("rho", "0.04"),
    // newton / sweep
    ("tol", "1e-10"),
    ("max_iter", "50"),
    ("divergence_cap", "1e6"),
    ("damping", "1"),
    ("floor_factor", "8"),
    ("dedup_tol", "1e-4"),
    ("guesses", "sine:-40:40:10"),
    // datasets
    ("recipe", "polynomial"),
    ("degree", "3"),
    ("bound", "1"),
    ("delta", "1"),
    ("modes", "16"),
    ("decay", "2"),
    ("amplitude", "0.5"),
    ("base", "default"),
    ("count", "100"),
    ("newton_depth", "3"),
    ("seed", "0"),
    ("sensor_stride", "1"),
    ("split", "train"),
    // architecture
    ("width", "40"),
    ("depth", "2"),
    ("trunk", "mlp"),
    ("trunk_depth", "2"),
    ("trunk_tanh_output", "false"),
    ("rank", "40"),
    ("train_bias", "true"),
    ("pod_snapshots", "500"),
    // training
    ("mode", "combined"),
    ("lambda", "0.01"),
    ("halve", "false"),
    ("lr", "1e-4"),
    ("weight_decay", "1e-6"),
    ("batch_size", "50"),
    ("epochs", "1000"),
    ("max_steps", ""),
    ("eval_every", "10"),
    // surrogate
    ("steps", "10"),
    ("hybrid_tail", ""),
    ("references", "sweep"),
    ("starts", "100"),
    ("counts", "500,5000"),
    ("reps", "3"),
    ("threads", "1"),
];

#[derive(Clone, Debug)]
pub struct Config {
    values: BTreeMap<&'static str, String>,
}

impl Default for Config {
    fn default() -> Self {
        Self { values: KEYS.iter().map(|(k, v)| (*k, v.to_string())).collect() }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<Self, CliError> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value, got {line:?}", lineno + 1)))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let slot = self
            .values
            .iter_mut()
            .find(|(k, _)| **k == key)
            .map(|(_, v)| v)
            .ok_or_else(|| CliError::Config(format!("unknown config key {key:?}")))?;
        *slot = value.to_string();
        Ok(())
    }

    /// Applies `--flag` overrides that were given.
    pub fn override_with(&mut self, key: &str, value: Option<impl ToString>) -> Result<(), CliError> {
        match value {
            Some(v) => self.set(key, &v.to_string()),
            None => Ok(()),
        }
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or_else(|| panic!("config key {key} is not registered"))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, CliError> {
        let raw = self.raw(key);
        raw.parse().map_err(|_| CliError::Config(format!("bad value {raw:?} for {key}")))
    }

    pub fn get_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        if self.raw(key).is_empty() {
            Ok(None)
        } else {
            self.get(key).map(Some)
        }
    }

    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Vec<T>, CliError> {
        self.raw(key)
            .split(',')
            .map(|s| s.trim().parse().map_err(|_| CliError::Config(format!("bad list entry {s:?} for {key}"))))
            .collect()
    }

    /// Every key in sorted order, one `key = value` per line.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.values {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}
