//! Experiment configuration.
//!
//! Settings come from `key = value` lines (file or CLI, CLI wins). Keys match
//! the long CLI flag names. Lengths and times may carry a unit suffix
//! (`um`/`µm`/`mm`, `ms`/`s`/`us`); bare numbers are µm and s.

use crate::error::{HarnessError, Result};
use mcvd_core::channel::ChannelParams;
use mcvd_core::isi::{NoiseParams, Prior};
use mcvd_core::modulation::PaRule;
use mcvd_core::threshold::Strategy;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    Bcsk,
    Bmosk,
    Mtsk,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Bcsk, Scheme::Bmosk, Scheme::Mtsk];

    /// Emitted molecules per slot for `m` molecules per symbol.
    pub fn average_power(self, m: f64, prior: Prior) -> f64 {
        match self {
            Scheme::Bcsk | Scheme::Mtsk => m * prior.one(),
            Scheme::Bmosk => m,
        }
    }

    pub fn nominal_m(self, pbar: f64, prior: Prior) -> f64 {
        match self {
            Scheme::Bcsk | Scheme::Mtsk => pbar / prior.one(),
            Scheme::Bmosk => pbar,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Bcsk => "BCSK",
            Scheme::Bmosk => "BMoSK",
            Scheme::Mtsk => "MTSK",
        })
    }
}

impl FromStr for Scheme {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bcsk" => Ok(Scheme::Bcsk),
            "bmosk" => Ok(Scheme::Bmosk),
            "mtsk" => Ok(Scheme::Mtsk),
            _ => Err(HarnessError::config(format!(
                "unknown scheme `{s}` (bcsk, bmosk, mtsk)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Power {
    /// Molecules per symbol.
    M(f64),
    /// Average emitted molecules per slot.
    Pbar(f64),
}

/// How received counts are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Physics {
    #[default]
    Gaussian,
    Particle,
}

impl FromStr for Physics {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(Physics::Gaussian),
            "particle" => Ok(Physics::Particle),
            _ => Err(HarnessError::config(format!(
                "unknown physics `{s}` (gaussian, particle)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Detector {
    /// Per-index MAP thresholds with fitted extrapolation.
    Schedule,
    /// Decision feedback with memory `S` (BCSK only).
    Dff,
    /// One constant threshold per stream, trained on separate messages.
    Empirical,
}

impl FromStr for Detector {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "schedule" => Ok(Detector::Schedule),
            "dff" => Ok(Detector::Dff),
            "empirical" => Ok(Detector::Empirical),
            _ => Err(HarnessError::config(format!(
                "unknown detector `{s}` (schedule, dff, empirical)"
            ))),
        }
    }
}

fn parse_strategy(s: &str) -> Result<Strategy> {
    let lower = s.to_ascii_lowercase();
    let (name, arg) = match lower.split_once(':') {
        Some((n, a)) => (n, Some(a)),
        None => (lower.as_str(), None),
    };
    let num = |default: usize| -> Result<usize> {
        arg.map_or(Ok(default), |a| {
            a.parse()
                .map_err(|_| HarnessError::config(format!("bad strategy argument in `{s}`")))
        })
    };
    match name {
        "per-index" => Ok(Strategy::PerIndex),
        "constant-kappa" => Ok(Strategy::ConstantKappa { burn_in: num(100)? }),
        "binned" => Ok(Strategy::Binned { width: num(10)? }),
        _ => Err(HarnessError::config(format!(
            "unknown strategy `{s}` (per-index, constant-kappa[:N], binned[:W])"
        ))),
    }
}

/// Parses a length in µm, accepting `um`, `µm`, `mm`, `nm` suffixes.
pub fn parse_length(s: &str) -> Result<f64> {
    parse_with_units(s, &[("µm", 1.0), ("um", 1.0), ("mm", 1e3), ("nm", 1e-3)])
}

/// Parses a time in s, accepting `s`, `ms`, `us`, `µs` suffixes.
pub fn parse_time(s: &str) -> Result<f64> {
    parse_with_units(s, &[("ms", 1e-3), ("µs", 1e-6), ("us", 1e-6), ("s", 1.0)])
}

fn parse_with_units(s: &str, units: &[(&str, f64)]) -> Result<f64> {
    let t = s.trim();
    let (num, scale) = units
        .iter()
        .find_map(|&(suffix, scale)| t.strip_suffix(suffix).map(|n| (n.trim(), scale)))
        .unwrap_or((t, 1.0));
    num.parse::<f64>()
        .map(|v| v * scale)
        .map_err(|_| HarnessError::config(format!("cannot parse `{s}` as a number")))
}

fn parse_num<T: FromStr>(key: &str, s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| HarnessError::config(format!("cannot parse `{key}` = `{s}`")))
}

fn parse_bool(key: &str, s: &str) -> Result<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(HarnessError::config(format!(
            "`{key}` expects on/off, got `{s}`"
        ))),
    }
}

/// One BER experiment point.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub channel: ChannelParams,
    pub noise: NoiseParams,
    pub scheme: Scheme,
    /// PA residual memory `K`, or `None` without power adjustment.
    pub pa: Option<usize>,
    pub pa_rule: PaRule,
    pub power: Power,
    pub prior: Prior,
    pub n_bits: usize,
    /// Trials run before checking the error count.
    pub n_trials: usize,
    /// Upper bound on trials when extending towards `min_errors`.
    pub max_trials: usize,
    pub min_errors: u64,
    /// DFF receiver memory `S`.
    pub s_mem: usize,
    /// Exactly computed thresholds before the fitted curve takes over.
    pub i_exact: usize,
    pub strategy: Strategy,
    /// `None` picks the schedule detector, or empirical under PA.
    pub detector: Option<Detector>,
    pub physics: Physics,
    /// Particle-simulation step.
    pub dt: f64,
    /// Bits used to train empirical thresholds.
    pub training_bits: usize,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            channel: ChannelParams::reference(),
            noise: NoiseParams::reference(),
            scheme: Scheme::Bcsk,
            pa: None,
            pa_rule: PaRule::Normalized,
            power: Power::Pbar(100.0),
            prior: Prior::uniform(),
            n_bits: 100,
            n_trials: 1000,
            max_trials: 100_000,
            min_errors: 100,
            s_mem: 35,
            i_exact: 20,
            strategy: Strategy::PerIndex,
            detector: None,
            physics: Physics::Gaussian,
            dt: 1e-3,
            training_bits: 100_000,
            seed: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn detector(&self) -> Detector {
        self.detector.unwrap_or(if self.pa.is_some() {
            Detector::Empirical
        } else {
            Detector::Schedule
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_bits == 0 || self.n_trials == 0 || self.max_trials == 0 {
            return Err(HarnessError::config("n-bits and trials must be positive"));
        }
        if self.max_trials < self.n_trials {
            return Err(HarnessError::config("max-trials must be at least trials"));
        }
        match self.power {
            Power::M(v) | Power::Pbar(v) if !(v > 0.0 && v.is_finite()) => {
                return Err(HarnessError::config(format!("power {v} must be positive")));
            }
            _ => {}
        }
        if let Some(k) = self.pa {
            if k < 2 {
                return Err(HarnessError::config(format!("k-mem = {k} must be >= 2")));
            }
        }
        match self.detector() {
            Detector::Dff if self.scheme != Scheme::Bcsk => {
                return Err(HarnessError::config(
                    "the dff detector applies to BCSK only",
                ));
            }
            Detector::Dff if self.s_mem < 2 => {
                return Err(HarnessError::config("s-mem must be >= 2"));
            }
            Detector::Schedule if self.pa.is_some() && self.scheme != Scheme::Bmosk => {
                return Err(HarnessError::config(
                    "MAP schedules assume unadjusted emissions; use the empirical detector with PA",
                ));
            }
            _ => {}
        }
        if self.physics == Physics::Particle {
            if self.dt.is_nan() || self.dt <= 0.0 {
                return Err(HarnessError::config("dt must be positive"));
            }
            mcvd_core::particle::SimConfig::new(
                self.dt,
                1,
                self.channel.symbol_duration(),
                self.seed,
            )?
            .validate_for_slots(self.channel.symbol_duration())?;
        }
        let k_check = self
            .i_exact
            .max(self.s_mem)
            .max(self.pa.unwrap_or(2))
            .max(2);
        let profile = self.channel.hitting_probabilities(k_check.max(self.n_bits));
        if !profile.truncated(k_check).is_descending() {
            return Err(HarnessError::config(format!(
                "t_s = {} s leaves the hitting probabilities out of descending order",
                self.channel.symbol_duration()
            )));
        }
        Ok(())
    }
}

/// Raw `key = value` settings, later entries overriding earlier ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings(BTreeMap<String, String>);

pub const KEYS: &[&str] = &[
    "rr",
    "r0",
    "diff-coef",
    "ts",
    "sigma-c2",
    "scheme",
    "pa",
    "pa-rule",
    "k-mem",
    "pbar",
    "m",
    "p1",
    "n-bits",
    "trials",
    "max-trials",
    "min-errors",
    "s-mem",
    "i-exact",
    "strategy",
    "detector",
    "physics",
    "dt",
    "training-bits",
    "seed",
];

impl Settings {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut out = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                HarnessError::config(format!("line {}: expected key = value", n + 1))
            })?;
            out.set(k.trim(), v.trim())?;
        }
        Ok(out)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        if !KEYS.contains(&key.as_str()) {
            return Err(HarnessError::config(format!("unknown setting `{key}`")));
        }
        self.0.insert(key, value.trim().to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn remove(&mut self, key: &str) -> Option<String> {
        self.0.remove(key)
    }

    pub fn merge(&mut self, other: &Settings) {
        for (k, v) in &other.0 {
            self.0.insert(k.clone(), v.clone());
        }
    }

    fn list(&self, key: &str) -> Vec<String> {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Expands comma-separated `scheme`, `pbar`/`m`, `k-mem` and `s-mem`
    /// lists into one config per combination.
    pub fn expand(&self) -> Result<Vec<ExperimentConfig>> {
        let base = self.base()?;
        let schemes: Vec<Scheme> = match self.list("scheme") {
            v if v.is_empty() => vec![base.scheme],
            v => v.iter().map(|s| s.parse()).collect::<Result<_>>()?,
        };
        let powers: Vec<Power> = match (self.list("pbar"), self.list("m")) {
            (p, m) if !p.is_empty() && !m.is_empty() => {
                return Err(HarnessError::config("give exactly one of pbar and m"));
            }
            (p, _) if !p.is_empty() => p
                .iter()
                .map(|v| parse_num::<f64>("pbar", v).map(Power::Pbar))
                .collect::<Result<_>>()?,
            (_, m) if !m.is_empty() => m
                .iter()
                .map(|v| parse_num::<f64>("m", v).map(Power::M))
                .collect::<Result<_>>()?,
            _ => vec![base.power],
        };
        let pa_on = self
            .get("pa")
            .map(|v| parse_bool("pa", v))
            .transpose()?
            .unwrap_or(false);
        let ks: Vec<Option<usize>> = if pa_on {
            match self.list("k-mem") {
                v if v.is_empty() => vec![Some(4)],
                v => v
                    .iter()
                    .map(|k| parse_num("k-mem", k).map(Some))
                    .collect::<Result<_>>()?,
            }
        } else {
            vec![None]
        };
        let ss: Vec<usize> = match self.list("s-mem") {
            v if v.is_empty() => vec![base.s_mem],
            v => v
                .iter()
                .map(|s| parse_num("s-mem", s))
                .collect::<Result<_>>()?,
        };
        let mut out = Vec::new();
        for &scheme in &schemes {
            for &k in &ks {
                for &s_mem in &ss {
                    for &power in &powers {
                        let cfg = ExperimentConfig {
                            scheme,
                            pa: k,
                            s_mem,
                            power,
                            ..base.clone()
                        };
                        cfg.validate()?;
                        out.push(cfg);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Everything except the sweep axes.
    pub fn base(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        let reference = ChannelParams::reference();
        let len = |k: &str, d: f64| self.get(k).map_or(Ok(d), parse_length);
        let time = |k: &str, d: f64| self.get(k).map_or(Ok(d), parse_time);
        let rr = len("rr", reference.receiver_radius())?;
        let r0 = len("r0", reference.distance())?;
        let diff = self
            .get("diff-coef")
            .map_or(Ok(reference.diffusion()), |v| parse_num("diff-coef", v))?;
        let ts = time("ts", reference.symbol_duration())?;
        cfg.channel = ChannelParams::new(rr, r0, diff, ts)?;
        if let Some(v) = self.get("sigma-c2") {
            cfg.noise = NoiseParams::new(parse_num("sigma-c2", v)?)?;
        }
        if let Some(v) = self.get("p1") {
            cfg.prior = Prior::new(parse_num("p1", v)?)?;
        }
        if let Some(v) = self.get("pa-rule") {
            cfg.pa_rule = match v.to_ascii_lowercase().as_str() {
                "normalized" => PaRule::Normalized,
                "literal" => PaRule::Literal,
                _ => {
                    return Err(HarnessError::config(format!(
                        "unknown pa-rule `{v}` (normalized, literal)"
                    )))
                }
            };
        }
        let usize_key = |k: &str, d: usize| self.get(k).map_or(Ok(d), |v| parse_num::<usize>(k, v));
        cfg.n_bits = usize_key("n-bits", cfg.n_bits)?;
        cfg.n_trials = usize_key("trials", cfg.n_trials)?;
        cfg.max_trials = usize_key("max-trials", cfg.max_trials.max(cfg.n_trials))?;
        cfg.min_errors = usize_key("min-errors", cfg.min_errors as usize)? as u64;
        cfg.i_exact = usize_key("i-exact", cfg.i_exact)?;
        cfg.training_bits = usize_key("training-bits", cfg.training_bits)?;
        if let Some(v) = self.get("seed") {
            cfg.seed = parse_num("seed", v)?;
        }
        if let Some(v) = self.get("strategy") {
            cfg.strategy = parse_strategy(v)?;
        }
        if let Some(v) = self.get("detector") {
            cfg.detector = Some(v.parse()?);
        }
        if let Some(v) = self.get("physics") {
            cfg.physics = v.parse()?;
        }
        cfg.dt = time("dt", (ts / 100.0).min(cfg.dt))?;
        Ok(cfg)
    }
}
