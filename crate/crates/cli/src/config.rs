//! Experiment configuration: `key = value` files with command-line overrides.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use quartamp::priors::Prior;

use crate::error::CliError;

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "QAMP_OUTPUT_DIR";

pub const ALGORITHMS: &[&str] = &["pca", "amp", "bamp", "bamp-empirical", "em"];
pub const THEORIES: &[&str] = &["replica", "baseline-se", "bamp-se", "mismatch", "pca-formula"];

/// How the BAMP state evolution evaluates its expectations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeMoments {
    MonteCarlo,
    Quadrature,
}

impl fmt::Display for SeMoments {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SeMoments::MonteCarlo => "monte-carlo",
            SeMoments::Quadrature => "quadrature",
        })
    }
}

impl FromStr for SeMoments {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "monte-carlo" | "mc" => Ok(SeMoments::MonteCarlo),
            "quadrature" => Ok(SeMoments::Quadrature),
            _ => Err(format!("unknown moment source '{s}' (monte-carlo | quadrature)")),
        }
    }
}

/// Pre-processing coefficients: the quartic-optimal triple or an explicit list.
#[derive(Debug, Clone, PartialEq)]
pub enum CoeffSpec {
    Optimal,
    Explicit(Vec<f64>),
}

impl fmt::Display for CoeffSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoeffSpec::Optimal => f.write_str("optimal"),
            CoeffSpec::Explicit(c) => f.write_str(&join_f64(c)),
        }
    }
}

impl FromStr for CoeffSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "optimal" {
            return Ok(CoeffSpec::Optimal);
        }
        let c = parse_list::<f64>(s)?;
        if c.is_empty() {
            return Err("coefficient list is empty".into());
        }
        Ok(CoeffSpec::Explicit(c))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mu: f64,
    pub lambdas: Vec<f64>,
    pub n: usize,
    pub trials: usize,
    pub prior: Prior,
    pub epsilon: f64,
    pub t: usize,
    pub mc_samples: usize,
    pub se_moments: SeMoments,
    pub seed: u64,
    pub algorithms: Vec<String>,
    pub theory: Vec<String>,
    pub coeffs: CoeffSpec,
    pub em_steps: usize,
    pub zeta: f64,
    pub kmax: usize,
    pub points: usize,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mu: 0.0,
            lambdas: vec![2.5],
            n: 1000,
            trials: 10,
            prior: Prior::Rademacher,
            epsilon: 0.9,
            t: 10,
            mc_samples: 200_000,
            se_moments: SeMoments::MonteCarlo,
            seed: 1,
            algorithms: vec!["pca".into(), "amp".into(), "bamp".into()],
            theory: vec!["replica".into(), "baseline-se".into(), "bamp-se".into()],
            coeffs: CoeffSpec::Optimal,
            em_steps: 20,
            zeta: 0.05,
            kmax: 12,
            points: 1000,
            output: None,
        }
    }
}

/// Keys in serialization order.
pub const KEYS: &[&str] = &[
    "mu",
    "lambda",
    "n",
    "trials",
    "prior",
    "epsilon",
    "t",
    "mc_samples",
    "se_moments",
    "seed",
    "algorithms",
    "theory",
    "coeffs",
    "em_steps",
    "zeta",
    "kmax",
    "points",
    "output",
];

fn join_f64(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",")
}

fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>, String>
where
    T::Err: fmt::Display,
{
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse::<T>().map_err(|e| format!("'{p}': {e}")))
        .collect()
}

/// Parses `a,b,c` or an inclusive range `start:stop:step`.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    match parts.len() {
        1 => parse_list(s),
        3 => {
            let v: Vec<f64> =
                parts.iter().map(|p| p.parse::<f64>().map_err(|e| format!("'{p}': {e}"))).collect::<Result<_, _>>()?;
            let (start, stop, step) = (v[0], v[1], v[2]);
            if !(step > 0.0) || stop < start {
                return Err(format!("bad range '{s}'"));
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            Ok((0..count).map(|i| start + i as f64 * step).collect())
        }
        _ => Err(format!("bad grid '{s}' (use a,b,c or start:stop:step)")),
    }
}

impl ExperimentConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let bad = |msg: String| CliError::Config(format!("{key}: {msg}"));
        let num = |v: &str| v.parse::<f64>().map_err(|e| bad(e.to_string()));
        let int = |v: &str| v.parse::<usize>().map_err(|e| bad(e.to_string()));
        let value = value.trim();
        match key {
            "mu" => self.mu = num(value)?,
            "lambda" => self.lambdas = parse_grid(value).map_err(bad)?,
            "n" => self.n = int(value)?,
            "trials" => self.trials = int(value)?,
            "prior" => self.prior = value.parse().map_err(|e: quartamp::Error| bad(e.to_string()))?,
            "epsilon" => self.epsilon = num(value)?,
            "t" => self.t = int(value)?,
            "mc_samples" => self.mc_samples = int(value)?,
            "se_moments" => self.se_moments = value.parse().map_err(bad)?,
            "seed" => self.seed = value.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
            "algorithms" => self.algorithms = parse_list(value).map_err(bad)?,
            "theory" => self.theory = parse_list(value).map_err(bad)?,
            "coeffs" => self.coeffs = value.parse().map_err(bad)?,
            "em_steps" => self.em_steps = int(value)?,
            "zeta" => self.zeta = num(value)?,
            "kmax" => self.kmax = int(value)?,
            "points" => self.points = int(value)?,
            "output" => self.output = if value.is_empty() { None } else { Some(PathBuf::from(value)) },
            _ => return Err(CliError::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> String {
        match key {
            "mu" => format!("{:?}", self.mu),
            "lambda" => join_f64(&self.lambdas),
            "n" => self.n.to_string(),
            "trials" => self.trials.to_string(),
            "prior" => self.prior.to_string(),
            "epsilon" => format!("{:?}", self.epsilon),
            "t" => self.t.to_string(),
            "mc_samples" => self.mc_samples.to_string(),
            "se_moments" => self.se_moments.to_string(),
            "seed" => self.seed.to_string(),
            "algorithms" => self.algorithms.join(","),
            "theory" => self.theory.join(","),
            "coeffs" => self.coeffs.to_string(),
            "em_steps" => self.em_steps.to_string(),
            "zeta" => format!("{:?}", self.zeta),
            "kmax" => self.kmax.to_string(),
            "points" => self.points.to_string(),
            "output" => self.output.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
            _ => String::new(),
        }
    }

    /// Parses the body of a config file. Blank lines and `#` comments are skipped.
    pub fn parse_str(&mut self, text: &str) -> Result<(), CliError> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", lineno + 1)))?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::default();
        cfg.parse_str(&text)?;
        Ok(cfg)
    }

    /// `key = value` lines in [`KEYS`] order.
    pub fn to_kv(&self) -> String {
        KEYS.iter().map(|k| format!("{k} = {}\n", self.get(k))).collect()
    }

    /// Single-line form for CSV headers.
    pub fn to_inline(&self) -> String {
        KEYS.iter().map(|k| format!("{k}={}", self.get(k))).collect::<Vec<_>>().join("; ")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |m: &str| Err(CliError::Config(m.to_string()));
        if !(self.mu >= 0.0 && self.mu <= 1.0) {
            return fail("mu must lie in [0, 1]");
        }
        if self.lambdas.is_empty() || self.lambdas.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return fail("lambda values must be finite and nonnegative");
        }
        if self.n < 2 {
            return fail("n must be at least 2");
        }
        if self.trials == 0 {
            return fail("trials must be at least 1");
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return fail("epsilon must lie in (0, 1]");
        }
        if self.t == 0 || self.t > 50 {
            return fail("t must lie in 1..=50");
        }
        if self.mc_samples < 2 {
            return fail("mc_samples must be at least 2");
        }
        if !(self.zeta >= 0.0 && self.zeta.is_finite()) {
            return fail("zeta must be finite and nonnegative");
        }
        if self.kmax == 0 || self.kmax > 200 {
            return fail("kmax must lie in 1..=200");
        }
        if self.points < 2 {
            return fail("points must be at least 2");
        }
        for a in &self.algorithms {
            if !ALGORITHMS.contains(&a.as_str()) {
                return Err(CliError::Config(format!("unknown algorithm '{a}' (one of {})", ALGORITHMS.join(", "))));
            }
        }
        for a in &self.theory {
            if !THEORIES.contains(&a.as_str()) {
                return Err(CliError::Config(format!("unknown theory '{a}' (one of {})", THEORIES.join(", "))));
            }
        }
        Ok(())
    }

    /// Output path: explicit setting, else `default_name` inside the
    /// directory named by [`OUTPUT_DIR_ENV`] (current directory if unset).
    pub fn output_path(&self, default_name: &str) -> PathBuf {
        match &self.output {
            Some(p) => p.clone(),
            None => {
                let dir = std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."));
                dir.join(default_name)
            }
        }
    }
}
