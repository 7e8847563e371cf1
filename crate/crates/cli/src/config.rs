//! Experiment configuration: defaults, an optional `key = value` file, then
//! command-line flags, in increasing precedence.
//!
//! Recognised keys:
//!
//! | key        | meaning                                          | default |
//! |------------|--------------------------------------------------|---------|
//! | `p`        | comma-separated exponents (`inf` allowed)        | `1,2`   |
//! | `dim`      | comma-separated dimensions                       | `2,4,8` |
//! | `depth`    | martingale depth `n`                             | `6`     |
//! | `restarts` | search restarts per cell                         | `16`    |
//! | `steps`    | ascent steps per restart                         | `300`   |
//! | `seed`     | base seed                                        | `0`     |
//! | `out`      | output directory for CSV, witnesses and plots    | none    |
//! | `svg`      | `true` to also write an SVG plot                 | `false` |
//! | `slack`    | relative slack of monotonicity checks            | `0.02`  |
//! | `tol`      | absolute tolerance of ceiling checks             | `1e-9`  |

use std::path::{Path, PathBuf};

use dclab::quadform::parse_exponent;

use crate::error::{CliError, CliResult};

pub const MAX_DEPTH: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub p: Vec<f64>,
    pub dims: Vec<usize>,
    pub depth: usize,
    pub restarts: usize,
    pub steps: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub svg: bool,
    pub slack: f64,
    pub tol: f64,
}

impl ExperimentConfig {
    pub fn new(scenario: &str) -> Self {
        Self {
            scenario: scenario.to_string(),
            p: vec![1.0, 2.0],
            dims: vec![2, 4, 8],
            depth: 6,
            restarts: 16,
            steps: 300,
            seed: 0,
            out: None,
            svg: false,
            slack: 0.02,
            tol: 1e-9,
        }
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        let value = value.trim();
        match key.trim() {
            "p" => self.p = parse_p_list(value)?,
            "dim" => self.dims = parse_list(value, "dim")?,
            "depth" => self.depth = parse_one(value, "depth")?,
            "restarts" => self.restarts = parse_one(value, "restarts")?,
            "steps" => self.steps = parse_one(value, "steps")?,
            "seed" => self.seed = parse_one(value, "seed")?,
            "out" => self.out = Some(PathBuf::from(value)),
            "svg" => self.svg = parse_one(value, "svg")?,
            "slack" => self.slack = parse_one(value, "slack")?,
            "tol" => self.tol = parse_one(value, "tol")?,
            other => {
                return Err(CliError::Config(format!(
                    "unknown key {other:?} (expected one of p, dim, depth, restarts, steps, seed, out, svg, slack, tol)"
                )))
            }
        }
        Ok(())
    }

    pub fn load_file(&mut self, path: &Path) -> CliResult<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Config(format!(
                    "{}:{}: expected `key = value`, got {line:?}",
                    path.display(),
                    lineno + 1
                )));
            };
            self.set(key, value)
                .map_err(|e| CliError::Config(format!("{}:{}: {e}", path.display(), lineno + 1)))?;
        }
        Ok(())
    }

    /// Checks ranges; `powers_of_two` is required by the Hadamard scenarios.
    pub fn validate(&self, powers_of_two: bool) -> CliResult<()> {
        if self.p.is_empty() {
            return Err(CliError::Config("the p list is empty; pass e.g. --p 1,2".into()));
        }
        if let Some(p) = self.p.iter().find(|p| !(**p >= 1.0)) {
            return Err(CliError::Config(format!("exponent {p} is outside [1, inf]")));
        }
        if self.dims.is_empty() {
            return Err(CliError::Config("the dim list is empty; pass e.g. --dim 2,4,8".into()));
        }
        if self.dims.contains(&0) {
            return Err(CliError::Config("dimensions must be positive".into()));
        }
        if powers_of_two {
            if let Some(m) = self.dims.iter().find(|m| !m.is_power_of_two()) {
                return Err(CliError::Config(format!("dimension {m} is not a power of two (required for Hadamard forms)")));
            }
        }
        if !self.dims.windows(2).all(|w| w[0] < w[1]) {
            return Err(CliError::Config("dimensions must be listed in increasing order".into()));
        }
        if self.depth == 0 || self.depth > MAX_DEPTH {
            return Err(CliError::Config(format!("depth {} is outside 1..={MAX_DEPTH}", self.depth)));
        }
        if self.restarts == 0 || self.steps == 0 {
            return Err(CliError::Config("restarts and steps must be positive".into()));
        }
        if !(self.slack >= 0.0 && self.slack < 1.0) || !(self.tol >= 0.0) {
            return Err(CliError::Config("slack must lie in [0, 1) and tol must be nonnegative".into()));
        }
        Ok(())
    }
}

fn parse_one<T: std::str::FromStr>(value: &str, key: &str) -> CliResult<T> {
    value.parse().map_err(|_| CliError::Config(format!("invalid value {value:?} for {key}")))
}

pub fn parse_list<T: std::str::FromStr>(value: &str, key: &str) -> CliResult<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_one(s, key))
        .collect()
}

pub fn parse_p_list(value: &str) -> CliResult<Vec<f64>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_exponent(s).ok_or_else(|| CliError::Config(format!("invalid exponent {s:?}"))))
        .collect()
}

/// Formats an exponent the way it is accepted on input.
pub fn fmt_p(p: f64) -> String {
    if p.is_infinite() {
        "inf".into()
    } else {
        format!("{p}")
    }
}
