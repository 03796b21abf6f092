//! Flat `key = value` configuration files.
//!
//! One assignment per line, `#` starts a comment, blank lines are ignored.
//! Lists are comma separated; complex numbers are written `a+bj`.
//!
//! Experiment keys: `block_size`, `channel_order`, `n_blocks`, `sigma2`,
//! `redundancy` (`cp` | `zp`), `inner` (`identity` | `idft`), `snr_db_grid`,
//! `n_channels`, `n_trials`, `master_seed`, `window_blocks`, `shrinkage`,
//! `compute_zp_reference`.
//!
//! Single-bound keys additionally include `taps`, `symbols`, `symbols_seed`
//! and `known_tap`.

use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::estimator::EstimatorSettings;
use crate::harness::ExperimentPlan;
use crate::linalg::CVector;
use crate::model::{InnerKind, RedundancyKind, SystemConfig};

pub const PLAN_KEYS: &[&str] = &[
    "block_size",
    "channel_order",
    "n_blocks",
    "sigma2",
    "redundancy",
    "inner",
    "snr_db_grid",
    "n_channels",
    "n_trials",
    "master_seed",
    "window_blocks",
    "shrinkage",
    "compute_zp_reference",
];

pub const CRB_KEYS: &[&str] = &[
    "block_size",
    "channel_order",
    "n_blocks",
    "sigma2",
    "redundancy",
    "inner",
    "taps",
    "symbols",
    "symbols_seed",
    "known_tap",
];

/// Ordered `(key, value)` assignments.
pub type Assignments = Vec<(String, String)>;

fn config_err(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}

pub fn parse_assignments(text: &str) -> Result<Assignments> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| config_err(format!("line {}: expected `key = value`", lineno + 1)))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(config_err(format!("line {}: empty key", lineno + 1)));
        }
        out.push((key.to_string(), value.trim().to_string()));
    }
    Ok(out)
}

/// Parses a `key=value` override as given on the command line.
pub fn parse_override(arg: &str) -> Result<(String, String)> {
    let (k, v) = arg
        .split_once('=')
        .ok_or_else(|| config_err(format!("override `{arg}` is not of the form key=value")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

fn check_keys(pairs: &Assignments, allowed: &[&str]) -> Result<()> {
    for (k, _) in pairs {
        if !allowed.contains(&k.as_str()) {
            return Err(config_err(format!("unknown key `{k}`")));
        }
    }
    Ok(())
}

fn lookup<'a>(pairs: &'a Assignments, key: &str) -> Option<&'a str> {
    pairs.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse::<T>()
        .map_err(|_| config_err(format!("`{key}`: cannot parse `{v}`")))
}

fn get<T: std::str::FromStr>(pairs: &Assignments, key: &str, default: T) -> Result<T> {
    match lookup(pairs, key) {
        Some(v) => parse_num(key, v),
        None => Ok(default),
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(config_err(format!("`{key}`: expected true/false, got `{v}`"))),
    }
}

fn parse_redundancy(v: &str) -> Result<RedundancyKind> {
    match v.to_ascii_lowercase().as_str() {
        "cp" => Ok(RedundancyKind::Cp),
        "zp" => Ok(RedundancyKind::Zp),
        _ => Err(config_err(format!("`redundancy`: expected cp or zp, got `{v}`"))),
    }
}

fn parse_inner(v: &str) -> Result<InnerKind> {
    match v.to_ascii_lowercase().as_str() {
        "identity" | "sc" => Ok(InnerKind::Identity),
        "idft" | "ofdm" => Ok(InnerKind::Idft),
        _ => Err(config_err(format!("`inner`: expected identity or idft, got `{v}`"))),
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| parse_num(key, x))
        .collect()
}

/// Parses `a`, `bj`, `a+bj` or `a-bj` (`i` is accepted for `j`).
pub fn parse_complex(text: &str) -> Result<Complex64> {
    let t: String = text.chars().filter(|ch| !ch.is_whitespace()).collect();
    let bad = || config_err(format!("cannot parse complex number `{text}`"));
    if t.is_empty() {
        return Err(bad());
    }
    let Some(body) = t.strip_suffix(['j', 'i']) else {
        return t.parse::<f64>().map(|re| Complex64::new(re, 0.0)).map_err(|_| bad());
    };
    // Split at the last sign that is not a leading sign or an exponent sign.
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E'));
    let imag = |s: &str| -> Result<f64> {
        match s {
            "" | "+" => Ok(1.0),
            "-" => Ok(-1.0),
            _ => s.parse::<f64>().map_err(|_| bad()),
        }
    };
    match split {
        Some(i) => {
            let re = body[..i].parse::<f64>().map_err(|_| bad())?;
            Ok(Complex64::new(re, imag(&body[i..])?))
        }
        None => Ok(Complex64::new(0.0, imag(body)?)),
    }
}

pub fn format_complex(z: Complex64) -> String {
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{}{}{}j", z.re, sign, z.im.abs())
}

fn parse_complex_list(v: &str) -> Result<CVector> {
    let values: Vec<Complex64> = v
        .split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(parse_complex)
        .collect::<Result<_>>()?;
    Ok(CVector::from_vec(values))
}

fn system_from(pairs: &Assignments) -> Result<SystemConfig> {
    let redundancy = match lookup(pairs, "redundancy") {
        Some(v) => parse_redundancy(v)?,
        None => RedundancyKind::Cp,
    };
    let inner = match lookup(pairs, "inner") {
        Some(v) => parse_inner(v)?,
        None => InnerKind::Identity,
    };
    SystemConfig::new(
        get(pairs, "block_size", 12usize)?,
        get(pairs, "channel_order", 4usize)?,
        get(pairs, "n_blocks", 25usize)?,
        get(pairs, "sigma2", 1.0f64)?,
        redundancy,
        inner,
    )
}

/// Builds a validated plan; unspecified keys take the desk-scale defaults.
pub fn plan_from_assignments(pairs: &Assignments) -> Result<ExperimentPlan> {
    check_keys(pairs, PLAN_KEYS)?;
    let config = system_from(pairs)?;
    let mut plan = ExperimentPlan::desk_scale(config);
    if let Some(v) = lookup(pairs, "snr_db_grid") {
        plan.snr_db_grid = parse_list("snr_db_grid", v)?;
    }
    plan.n_channels = get(pairs, "n_channels", plan.n_channels)?;
    plan.n_trials = get(pairs, "n_trials", plan.n_trials)?;
    plan.master_seed = get(pairs, "master_seed", plan.master_seed)?;
    plan.estimator_settings = EstimatorSettings {
        window_blocks: get(pairs, "window_blocks", plan.estimator_settings.window_blocks)?,
        shrinkage: get(pairs, "shrinkage", plan.estimator_settings.shrinkage)?,
    };
    if let Some(v) = lookup(pairs, "compute_zp_reference") {
        plan.compute_zp_reference = parse_bool("compute_zp_reference", v)?;
    }
    plan.validate()?;
    Ok(plan)
}

/// Serializes a plan so that [`plan_from_assignments`] reproduces it exactly.
pub fn plan_to_text(plan: &ExperimentPlan) -> Result<String> {
    let cfg = &plan.config;
    if matches!(cfg.redundancy, RedundancyKind::Custom(_)) || matches!(cfg.inner, InnerKind::Custom(_)) {
        return Err(config_err("custom precoders cannot be written to a config file"));
    }
    let grid: Vec<String> = plan.snr_db_grid.iter().map(|x| x.to_string()).collect();
    let mut s = String::new();
    let _ = writeln!(s, "block_size = {}", cfg.m);
    let _ = writeln!(s, "channel_order = {}", cfg.l);
    let _ = writeln!(s, "n_blocks = {}", cfg.n);
    let _ = writeln!(s, "sigma2 = {}", cfg.sigma2);
    let _ = writeln!(s, "redundancy = {}", cfg.redundancy.name());
    let _ = writeln!(s, "inner = {}", cfg.inner.name());
    let _ = writeln!(s, "snr_db_grid = {}", grid.join(", "));
    let _ = writeln!(s, "n_channels = {}", plan.n_channels);
    let _ = writeln!(s, "n_trials = {}", plan.n_trials);
    let _ = writeln!(s, "master_seed = {}", plan.master_seed);
    let _ = writeln!(s, "window_blocks = {}", plan.estimator_settings.window_blocks);
    let _ = writeln!(s, "shrinkage = {}", plan.estimator_settings.shrinkage);
    let _ = writeln!(s, "compute_zp_reference = {}", plan.compute_zp_reference);
    Ok(s)
}

/// A fully specified single-bound evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct CrbInput {
    pub config: SystemConfig,
    pub taps: CVector,
    pub symbols: SymbolSource,
    /// Known-tap index; the strongest tap when absent.
    pub known_tap: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SymbolSource {
    Explicit(CVector),
    /// QPSK frame drawn from this seed.
    Seeded(u64),
}

pub fn crb_input_from_assignments(pairs: &Assignments) -> Result<CrbInput> {
    check_keys(pairs, CRB_KEYS)?;
    let config = system_from(pairs)?;
    let taps = parse_complex_list(lookup(pairs, "taps").ok_or_else(|| config_err("missing `taps`"))?)?;
    if taps.len() != config.l + 1 {
        return Err(config_err(format!(
            "`taps` has {} entries, channel_order {} needs {}",
            taps.len(),
            config.l,
            config.l + 1
        )));
    }
    let symbols = match (lookup(pairs, "symbols"), lookup(pairs, "symbols_seed")) {
        (Some(_), Some(_)) => return Err(config_err("give either `symbols` or `symbols_seed`, not both")),
        (Some(v), None) => {
            let s = parse_complex_list(v)?;
            if s.len() != config.symbol_count() {
                return Err(config_err(format!(
                    "`symbols` has {} entries, expected n_blocks * block_size = {}",
                    s.len(),
                    config.symbol_count()
                )));
            }
            SymbolSource::Explicit(s)
        }
        (None, Some(v)) => SymbolSource::Seeded(parse_num("symbols_seed", v)?),
        (None, None) => return Err(config_err("missing `symbols` or `symbols_seed`")),
    };
    let known_tap = match lookup(pairs, "known_tap") {
        Some(v) => {
            let d: usize = parse_num("known_tap", v)?;
            if d > config.l {
                return Err(config_err(format!("`known_tap` {d} exceeds channel_order {}", config.l)));
            }
            Some(d)
        }
        None => None,
    };
    Ok(CrbInput { config, taps, symbols, known_tap })
}
