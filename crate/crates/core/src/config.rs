//! Line-oriented `key = value` configuration. `#` starts a comment, blank
//! lines are ignored, keys outside the known set are errors (a misspelled
//! key silently falling back to a default would poison an experiment).

use crate::error::{Error, Result};
use std::collections::HashMap;
use std::path::Path;

/// Every key any experiment understands. Scenario drivers read the subset
/// they need; unused known keys are harmless.
pub const KNOWN_KEYS: &[&str] = &[
    // grid and scheme
    "d",
    "n",
    "s",
    "eps",
    "dt",
    "t_end",
    "pad",
    "save_every",
    "seed",
    "preset",
    // guards
    "guard_rho",
    "guard_theta",
    // block functional
    "lambda",
    "lambda_theta",
    // initial data
    "eta",
    "k_band",
    "decay",
    // experiment knobs
    "delta0",
    "ensemble_size",
    "ensemble_t_end",
    "sigma",
    "eps_levels",
    "sup_ratio_bound",
    "c1",
    "amplitude",
    "snapshots",
];

#[derive(Debug, Clone, Default)]
pub struct Config {
    map: HashMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = HashMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected 'key = value', got '{raw}'", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(Error::Config(format!("line {}: unknown key '{key}'", lineno + 1)));
            }
            if value.is_empty() {
                return Err(Error::Config(format!("line {}: empty value for '{key}'", lineno + 1)));
            }
            if map.insert(key.to_string(), value.to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key '{key}'", lineno + 1)));
            }
        }
        Ok(Self { map })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn has(&self, key: &str) -> bool {
        self.map.contains_key(key)
    }

    /// Float values also accept the fraction form `a/b` (handy for cutoffs
    /// like `eps = 1/16`).
    pub fn f64(&self, key: &str, default: f64) -> Result<f64> {
        match self.map.get(key) {
            None => Ok(default),
            Some(raw) => parse_f64(raw)
                .ok_or_else(|| Error::Config(format!("key '{key}': bad number '{raw}'"))),
        }
    }

    pub fn f64_opt(&self, key: &str) -> Result<Option<f64>> {
        match self.map.get(key) {
            None => Ok(None),
            Some(raw) => parse_f64(raw)
                .map(Some)
                .ok_or_else(|| Error::Config(format!("key '{key}': bad number '{raw}'"))),
        }
    }

    pub fn usize(&self, key: &str, default: usize) -> Result<usize> {
        match self.map.get(key) {
            None => Ok(default),
            Some(raw) => raw
                .parse()
                .map_err(|_| Error::Config(format!("key '{key}': bad integer '{raw}'"))),
        }
    }

    pub fn u64(&self, key: &str, default: u64) -> Result<u64> {
        match self.map.get(key) {
            None => Ok(default),
            Some(raw) => raw
                .parse()
                .map_err(|_| Error::Config(format!("key '{key}': bad integer '{raw}'"))),
        }
    }

    pub fn str(&self, key: &str, default: &str) -> String {
        self.map.get(key).cloned().unwrap_or_else(|| default.to_string())
    }
}

fn parse_f64(raw: &str) -> Option<f64> {
    if let Some((num, den)) = raw.split_once('/') {
        let num: f64 = num.trim().parse().ok()?;
        let den: f64 = den.trim().parse().ok()?;
        if den == 0.0 {
            return None;
        }
        return Some(num / den);
    }
    raw.parse().ok()
}
