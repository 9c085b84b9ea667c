//! Run configuration: `key = value` files, command-line overrides and
//! validation. Later layers win: defaults, then the file, then flags.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use bingham_core::anderson::{AAConfig, Damping};
use bingham_core::fixed_point::ResidualNorm;
use bingham_core::problems::CornerPolicy;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub key: String,
    pub reason: String,
}

impl ConfigError {
    fn new(key: &str, reason: impl Into<String>) -> Self {
        Self {
            key: key.to_string(),
            reason: reason.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid value for `{}`: {}", self.key, self.reason)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    Channel,
    Cavity,
}

impl ProblemKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Channel => "channel",
            Self::Cavity => "cavity",
        }
    }
}

impl FromStr for ProblemKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "channel" => Ok(Self::Channel),
            "cavity" => Ok(Self::Cavity),
            other => Err(format!("expected channel or cavity, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub problem: ProblemKind,
    /// Subdivisions per side of the unit square.
    pub n: usize,
    pub mu: f64,
    pub tau_s: f64,
    pub epsilon: f64,
    /// Anderson depth.
    pub m: usize,
    pub beta: f64,
    /// Inner product of the Anderson least-squares problem.
    pub norm: ResidualNorm,
    /// Norm of the relative-residual stopping test.
    pub stop_norm: ResidualNorm,
    pub tol: f64,
    pub max_iter: usize,
    pub cs: f64,
    pub corner_policy: CornerPolicy,
    pub quad_degree: usize,
    pub rigid_threshold: f64,
    pub out: PathBuf,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            problem: ProblemKind::Channel,
            n: 8,
            mu: 1.0,
            tau_s: 0.3,
            epsilon: 1e-3,
            m: 0,
            beta: 1.0,
            norm: ResidualNorm::Dof,
            stop_norm: ResidualNorm::L2,
            tol: 1e-8,
            max_iter: 500,
            cs: 0.0,
            corner_policy: CornerPolicy::LidWins,
            quad_degree: 5,
            rigid_threshold: 1e-2,
            out: PathBuf::from("out"),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::new(key, format!("must be > 0, got {v}")))
            }
        };
        if self.n < 2 {
            return Err(ConfigError::new(
                "n",
                format!("need at least 2 subdivisions, got {}", self.n),
            ));
        }
        positive("mu", self.mu)?;
        positive("epsilon", self.epsilon)?;
        if !(self.tau_s >= 0.0 && self.tau_s.is_finite()) {
            return Err(ConfigError::new(
                "tau_s",
                format!("must be >= 0, got {}", self.tau_s),
            ));
        }
        if self.problem == ProblemKind::Channel && self.tau_s >= 0.5 {
            return Err(ConfigError::new(
                "tau_s",
                format!(
                    "the channel plug fills the domain for tau_s >= 0.5, got {}",
                    self.tau_s
                ),
            ));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(ConfigError::new(
                "beta",
                format!("must lie in (0, 1], got {}", self.beta),
            ));
        }
        positive("tol", self.tol)?;
        if self.max_iter < 1 {
            return Err(ConfigError::new("max_iter", "must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.cs) {
            return Err(ConfigError::new(
                "cs",
                format!("must lie in [0, 1), got {}", self.cs),
            ));
        }
        if !(2..=40).contains(&self.quad_degree) {
            return Err(ConfigError::new(
                "quad_degree",
                format!("must lie in 2..=40, got {}", self.quad_degree),
            ));
        }
        positive("rigid_threshold", self.rigid_threshold)
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn aa_config(&self) -> AAConfig {
        AAConfig {
            depth: self.m,
            damping: Damping::Constant(self.beta),
            opt_norm: self.norm,
            stop_norm: self.stop_norm,
            tol: self.tol,
            max_iter: self.max_iter,
            c_s: self.cs,
            record_iterates: false,
        }
    }
}

/// Values swept over; an axis left unset keeps the base configuration value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepLists {
    pub n: Option<Vec<usize>>,
    pub epsilon: Option<Vec<f64>>,
    pub m: Option<Vec<usize>>,
    pub tau_s: Option<Vec<f64>>,
}

impl SweepLists {
    pub fn is_active(&self) -> bool {
        self.n.is_some() || self.epsilon.is_some() || self.m.is_some() || self.tau_s.is_some()
    }

    /// Every combination in lexicographic order over (n, epsilon, tau_s, m),
    /// each axis in the order given.
    pub fn expand(&self, base: &SolverConfig) -> Vec<SolverConfig> {
        let ns = self.n.clone().unwrap_or_else(|| vec![base.n]);
        let eps = self.epsilon.clone().unwrap_or_else(|| vec![base.epsilon]);
        let taus = self.tau_s.clone().unwrap_or_else(|| vec![base.tau_s]);
        let ms = self.m.clone().unwrap_or_else(|| vec![base.m]);
        let mut out = Vec::with_capacity(ns.len() * eps.len() * taus.len() * ms.len());
        for &n in &ns {
            for &e in &eps {
                for &t in &taus {
                    for &m in &ms {
                        out.push(SolverConfig {
                            n,
                            epsilon: e,
                            tau_s: t,
                            m,
                            ..base.clone()
                        });
                    }
                }
            }
        }
        out
    }
}

/// Canonical spelling of a configuration key: lower case, `_` separators.
pub fn canonical_key(key: &str) -> String {
    let k = key.trim().to_ascii_lowercase().replace('-', "_");
    match k.as_str() {
        "eps" => "epsilon".into(),
        "c_s" => "cs".into(),
        "tau" => "tau_s".into(),
        _ => k,
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e: T::Err| ConfigError::new(key, format!("cannot parse `{}`: {e}", value.trim())))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: fmt::Display,
{
    let items: Vec<&str> = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    if items.is_empty() {
        return Err(ConfigError::new(key, "sweep list is empty"));
    }
    items.iter().map(|s| parse_value(key, s)).collect()
}

/// Apply one `key = value` setting.
pub fn apply_setting(
    cfg: &mut SolverConfig,
    sweep: &mut SweepLists,
    key: &str,
    value: &str,
) -> Result<(), ConfigError> {
    let key = canonical_key(key);
    let k = key.as_str();
    match k {
        "problem" => cfg.problem = parse_value(k, value)?,
        "n" => cfg.n = parse_value(k, value)?,
        "mu" => cfg.mu = parse_value(k, value)?,
        "tau_s" => cfg.tau_s = parse_value(k, value)?,
        "epsilon" => cfg.epsilon = parse_value(k, value)?,
        "m" => cfg.m = parse_value(k, value)?,
        "beta" => cfg.beta = parse_value(k, value)?,
        "norm" => cfg.norm = parse_value(k, value)?,
        "stop_norm" => cfg.stop_norm = parse_value(k, value)?,
        "tol" => cfg.tol = parse_value(k, value)?,
        "max_iter" => cfg.max_iter = parse_value(k, value)?,
        "cs" => cfg.cs = parse_value(k, value)?,
        "corner_policy" => cfg.corner_policy = parse_value(k, value)?,
        "quad_degree" => cfg.quad_degree = parse_value(k, value)?,
        "rigid_threshold" => cfg.rigid_threshold = parse_value(k, value)?,
        "out" => {
            let v = value.trim();
            if v.is_empty() {
                return Err(ConfigError::new(k, "output directory is empty"));
            }
            cfg.out = PathBuf::from(v);
        }
        "sweep_n" => sweep.n = Some(parse_list(k, value)?),
        "sweep_epsilon" => sweep.epsilon = Some(parse_list(k, value)?),
        "sweep_m" => sweep.m = Some(parse_list(k, value)?),
        "sweep_tau_s" => sweep.tau_s = Some(parse_list(k, value)?),
        _ => return Err(ConfigError::new(k, "unknown key")),
    }
    Ok(())
}

/// `key = value` pairs of a configuration file; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(ConfigError::new(
                &format!("line {}", i + 1),
                format!("expected `key = value`, got `{line}`"),
            ));
        };
        if k.trim().is_empty() {
            return Err(ConfigError::new(&format!("line {}", i + 1), "missing key"));
        }
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Layer the file settings and then the flag settings over the defaults and
/// validate the result, including every sweep value.
pub fn resolve(
    file: &[(String, String)],
    flags: &[(String, String)],
) -> Result<(SolverConfig, SweepLists), ConfigError> {
    let mut cfg = SolverConfig::default();
    let mut sweep = SweepLists::default();
    for (k, v) in file.iter().chain(flags) {
        apply_setting(&mut cfg, &mut sweep, k, v)?;
    }
    cfg.validate()?;
    for c in sweep.expand(&cfg) {
        c.validate().map_err(|e| {
            let key = match e.key.as_str() {
                "n" if sweep.n.is_some() => "sweep_n".to_string(),
                "epsilon" if sweep.epsilon.is_some() => "sweep_epsilon".to_string(),
                "tau_s" if sweep.tau_s.is_some() => "sweep_tau_s".to_string(),
                other => other.to_string(),
            };
            ConfigError {
                key,
                reason: e.reason,
            }
        })?;
    }
    Ok((cfg, sweep))
}
