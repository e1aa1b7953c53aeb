//! Flat `key = value` configuration.
//!
//! Lines starting with `#` are comments. List-valued keys may be repeated or
//! hold comma-separated values. The same keys are accepted as CLI flags and
//! are echoed as `# key = value` headers in every CSV.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::estimators::Method;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    Agn,
    Outliers,
}

impl FromStr for Model {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "agn" => Ok(Model::Agn),
            "outliers" => Ok(Model::Outliers),
            other => Err(Error::InvalidArgument(format!("unknown model '{other}'"))),
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::Agn => "agn",
            Model::Outliers => "outliers",
        })
    }
}

/// Smoothness budget `S_T` as a function of `T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StRule {
    Const(f64),
    InverseT,
    QuarterPowerT,
}

impl StRule {
    pub fn eval(self, t: usize) -> f64 {
        match self {
            StRule::Const(c) => c,
            StRule::InverseT => 1.0 / t as f64,
            StRule::QuarterPowerT => (t as f64).powf(0.25),
        }
    }
}

impl FromStr for StRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "1/T" => Ok(StRule::InverseT),
            "T^1/4" | "T^(1/4)" => Ok(StRule::QuarterPowerT),
            other => {
                let c: f64 = other
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("bad S_T rule '{other}' (number, 1/T or T^1/4)")))?;
                if !(c >= 0.0) || !c.is_finite() {
                    return Err(Error::InvalidArgument(format!("S_T = {c} must be >= 0")));
                }
                Ok(StRule::Const(c))
            }
        }
    }
}

impl fmt::Display for StRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StRule::Const(c) => write!(f, "{c}"),
            StRule::InverseT => f.write_str("1/T"),
            StRule::QuarterPowerT => f.write_str("T^1/4"),
        }
    }
}

/// How each run picks `β`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Selection {
    /// Grid search with the method's rule.
    Auto,
    /// Fixed `τ` for τ-indexed methods; the others use `Auto`.
    FixedTau(usize),
    /// Fixed `λ` for gtrs and ppm; the others use `Auto`.
    FixedLambda(f64),
    /// `τ*` from the theory for τ-indexed methods; the others use `Auto`.
    OracleTau,
}

impl FromStr for Selection {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidArgument(format!("bad selection '{s}' (auto, fixed-tau=K, fixed-lambda=X, oracle)"));
        if s == "auto" {
            Ok(Selection::Auto)
        } else if s == "oracle" {
            Ok(Selection::OracleTau)
        } else if let Some(v) = s.strip_prefix("fixed-tau=") {
            let tau: usize = v.parse().map_err(|_| bad())?;
            if tau == 0 {
                return Err(bad());
            }
            Ok(Selection::FixedTau(tau))
        } else if let Some(v) = s.strip_prefix("fixed-lambda=") {
            let l: f64 = v.parse().map_err(|_| bad())?;
            if !(l >= 0.0) || !l.is_finite() {
                return Err(bad());
            }
            Ok(Selection::FixedLambda(l))
        } else {
            Err(bad())
        }
    }
}

impl fmt::Display for Selection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Selection::Auto => f.write_str("auto"),
            Selection::FixedTau(t) => write!(f, "fixed-tau={t}"),
            Selection::FixedLambda(l) => write!(f, "fixed-lambda={l}"),
            Selection::OracleTau => f.write_str("oracle"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: Model,
    pub n: usize,
    pub t: Vec<usize>,
    pub st: StRule,
    /// AGN noise levels.
    pub sigma: Vec<f64>,
    /// Outlier rates.
    pub eta: Vec<f64>,
    /// Edge probability, constant in time.
    pub p: f64,
    pub estimators: Vec<Method>,
    pub runs: usize,
    pub seed: u64,
    pub lambda_scale: f64,
    pub selection: Selection,
    pub delta: f64,
    pub mu: f64,
    pub ppm_iters: usize,
    pub ppm_inits: Vec<Method>,
    pub threads: Option<usize>,
    pub timings: bool,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: Model::Agn,
            n: 30,
            t: vec![20],
            st: StRule::InverseT,
            sigma: vec![1.0],
            eta: vec![0.2],
            p: 0.2,
            estimators: vec![Method::Gtrs, Method::LtrsGs, Method::GmdLtrs, Method::GmdSpectral, Method::NaiveSpectral],
            runs: 20,
            seed: 0,
            lambda_scale: crate::selection::DEFAULT_LAMBDA_SCALE,
            selection: Selection::Auto,
            delta: 0.1,
            mu: 1.0,
            ppm_iters: crate::estimators::PPM_DEFAULT_ITERS,
            ppm_inits: vec![Method::Gtrs, Method::GmdLtrs, Method::LtrsGs, Method::NaiveSpectral],
            threads: None,
            timings: false,
            out: None,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("bad value '{v}' for {key}")))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').filter(|s| !s.trim().is_empty()).map(|s| parse_num(key, s)).collect()
}

fn parse_methods(v: &str) -> Result<Vec<Method>> {
    v.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect()
}

fn join<T: fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    pub const KEYS: [&'static str; 19] = [
        "model", "n", "t", "st", "sigma", "eta", "p", "estimators", "runs", "seed", "lambda-scale", "selection",
        "delta", "mu", "ppm-iters", "ppm-inits", "threads", "timings", "out",
    ];

    /// Applies one assignment. `fresh` tells list keys to replace rather than
    /// extend the current list (first occurrence in a file or on the CLI).
    pub fn set(&mut self, key: &str, value: &str, fresh: bool) -> Result<()> {
        let key = key.trim().replace('_', "-");
        fn extend<T>(dst: &mut Vec<T>, v: Vec<T>, fresh: bool) {
            if fresh {
                *dst = v;
            } else {
                dst.extend(v);
            }
        }
        match key.as_str() {
            "model" => self.model = value.parse()?,
            "n" => self.n = parse_num(&key, value)?,
            "t" => extend(&mut self.t, parse_list(&key, value)?, fresh),
            "st" => self.st = value.parse()?,
            "sigma" => extend(&mut self.sigma, parse_list(&key, value)?, fresh),
            "eta" => extend(&mut self.eta, parse_list(&key, value)?, fresh),
            "p" => self.p = parse_num(&key, value)?,
            "estimators" => extend(&mut self.estimators, parse_methods(value)?, fresh),
            "runs" => self.runs = parse_num(&key, value)?,
            "seed" => self.seed = parse_num(&key, value)?,
            "lambda-scale" => self.lambda_scale = parse_num(&key, value)?,
            "selection" => self.selection = value.parse()?,
            "delta" => self.delta = parse_num(&key, value)?,
            "mu" => self.mu = parse_num(&key, value)?,
            "ppm-iters" => self.ppm_iters = parse_num(&key, value)?,
            "ppm-inits" => extend(&mut self.ppm_inits, parse_methods(value)?, fresh),
            "threads" => self.threads = Some(parse_num(&key, value)?),
            "timings" => self.timings = parse_num(&key, value)?,
            "out" => self.out = Some(PathBuf::from(value.trim())),
            _ => return Err(Error::InvalidArgument(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }

    /// Parses a config file on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: format!("expected 'key = value', got '{line}'"),
            })?;
            let k = k.trim().replace('_', "-");
            let fresh = seen.insert(k.clone());
            self.set(&k, v, fresh).map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n < 2 {
            return bad(format!("n = {} must be >= 2", self.n));
        }
        if self.t.is_empty() || self.t.contains(&0) {
            return bad("T list must be nonempty with T >= 1".into());
        }
        if self.estimators.is_empty() {
            return bad("at least one estimator is required".into());
        }
        if self.runs == 0 {
            return bad("runs must be >= 1".into());
        }
        if self.sigma.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) || self.sigma.is_empty() {
            return bad("sigma values must be finite and >= 0".into());
        }
        if self.eta.iter().any(|e| !(0.0..=1.0).contains(e)) || self.eta.is_empty() {
            return bad("eta values must lie in [0, 1]".into());
        }
        if !(0.0..=1.0).contains(&self.p) {
            return bad(format!("p = {} outside [0, 1]", self.p));
        }
        if !(self.lambda_scale >= 0.0) || !self.lambda_scale.is_finite() {
            return bad(format!("lambda-scale = {} must be >= 0", self.lambda_scale));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta = {} outside (0, 1)", self.delta));
        }
        if !(self.mu >= 1.0) {
            return bad(format!("mu = {} must be >= 1", self.mu));
        }
        if self.ppm_iters == 0 {
            return bad("ppm-iters must be >= 1".into());
        }
        if self.ppm_inits.contains(&Method::Ppm) {
            return bad("ppm cannot seed itself".into());
        }
        if self.threads == Some(0) {
            return bad("threads must be >= 1".into());
        }
        Ok(())
    }

    /// Noise levels for the configured model.
    pub fn noise_levels(&self) -> &[f64] {
        match self.model {
            Model::Agn => &self.sigma,
            Model::Outliers => &self.eta,
        }
    }

    /// Resolved config as `key = value` lines, readable by [`apply_text`].
    ///
    /// [`apply_text`]: ExperimentConfig::apply_text
    pub fn to_text(&self) -> String {
        let mut lines = vec![
            format!("model = {}", self.model),
            format!("n = {}", self.n),
            format!("t = {}", join(&self.t)),
            format!("st = {}", self.st),
            format!("sigma = {}", join(&self.sigma)),
            format!("eta = {}", join(&self.eta)),
            format!("p = {}", self.p),
            format!("estimators = {}", join(&self.estimators)),
            format!("runs = {}", self.runs),
            format!("seed = {}", self.seed),
            format!("lambda-scale = {}", self.lambda_scale),
            format!("selection = {}", self.selection),
            format!("delta = {}", self.delta),
            format!("mu = {}", self.mu),
            format!("ppm-iters = {}", self.ppm_iters),
            format!("ppm-inits = {}", join(&self.ppm_inits)),
        ];
        if self.timings {
            lines.push("timings = true".into());
        }
        let mut s = lines.join("\n");
        s.push('\n');
        s
    }
}
