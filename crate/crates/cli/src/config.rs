//! Run configuration shared by the subcommands.
//!
//! Values resolve as command-line flag, then the `--config` JSON file, then
//! built-in defaults. The seed additionally falls back to `LBAMM_SEED`
//! before its default.

use std::path::{Path, PathBuf};

use lbamm::backtest::derivatives::OptionTrade;
use lbamm::backtest::LognormalGrid;
use lbamm::ingest::SynthConfig;
use lbamm::UtilitySpec;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum UtilityField {
    Compact(String),
    Spec(UtilitySpec),
}

impl UtilityField {
    pub fn resolve(&self) -> Result<UtilitySpec, CliError> {
        match self {
            UtilityField::Compact(s) => parse_utility(s),
            UtilityField::Spec(u) => Ok(u.clone()),
        }
    }
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub utility: Option<UtilityField>,
    pub gamma: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub cash: Option<f64>,

    pub weights: Option<Vec<f64>>,
    pub liquidity: Option<Vec<f64>>,
    pub bet: Option<Vec<f64>>,
    pub provision: Option<Vec<f64>>,

    pub mode: Option<String>,
    pub data: Option<PathBuf>,
    pub synth: Option<SynthConfig>,
    pub outcome: Option<String>,
    pub sigmas: Option<Vec<f64>>,
    pub gammas: Option<Vec<f64>>,
    pub paths: Option<usize>,
    pub dt: Option<f64>,

    pub grid: Option<LognormalGrid>,
    pub epsilon: Option<f64>,
    pub strike: Option<f64>,
    pub trades: Option<Vec<OptionTrade>>,
    pub caps: Option<Vec<f64>>,
    pub cap_quantity: Option<f64>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Invalid(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("bad config {}: {e}", path.display())))
    }
}

pub fn parse_utility(s: &str) -> Result<UtilitySpec, CliError> {
    s.parse::<UtilitySpec>().map_err(|e| CliError::Invalid(e.to_string()))
}

pub fn resolve_utility(flag: Option<&str>, file: Option<&UtilityField>, default: UtilitySpec) -> Result<UtilitySpec, CliError> {
    let spec = match (flag, file) {
        (Some(s), _) => parse_utility(s)?,
        (None, Some(f)) => f.resolve()?,
        (None, None) => default,
    };
    spec.validate().map_err(|e| CliError::Invalid(e.to_string()))?;
    Ok(spec)
}

pub fn resolve_seed(flag: Option<u64>, file: Option<u64>, default: u64) -> Result<u64, CliError> {
    if let Some(s) = flag.or(file) {
        return Ok(s);
    }
    match std::env::var("LBAMM_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Invalid(format!("LBAMM_SEED={v:?} is not an unsigned integer"))),
        Err(_) => Ok(default),
    }
}

/// A comma-separated list given on the command line.
#[derive(Debug, Clone)]
pub struct List(pub Vec<f64>);

pub fn list_arg(s: &str) -> Result<List, String> {
    parse_list(s).map(List)
}

/// Comma-separated numbers.
pub fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| format!("{t:?} is not a number")))
        .collect()
}

fn number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
    value.trim().parse().map_err(|_| format!("bad value for {key}: {value:?}"))
}

/// `seed=..,rows=..,spread=..` with optional `cadence`, `anchor`,
/// `reversion` and `volatility`; unspecified keys keep their defaults.
pub fn parse_synth(s: &str) -> Result<SynthConfig, String> {
    let mut cfg = SynthConfig::default();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| format!("expected key=value, got {part:?}"))?;
        match key.trim() {
            "seed" => cfg.seed = number(key, value)?,
            "rows" => cfg.rows = number(key, value)?,
            "spread" | "spread_bps" => cfg.spread_bps = number(key, value)?,
            "cadence" => cfg.cadence = number(key, value)?,
            "anchor" => cfg.anchor = number(key, value)?,
            "reversion" => cfg.reversion = number(key, value)?,
            "volatility" => cfg.volatility = number(key, value)?,
            other => return Err(format!("unknown fixture key {other:?}")),
        }
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists_and_fixture_specs() {
        assert_eq!(parse_list("1, 2.5,-3").unwrap(), vec![1.0, 2.5, -3.0]);
        assert!(parse_list("1,x").is_err());
        let s = parse_synth("seed=3,rows=100,spread=0").unwrap();
        assert_eq!((s.seed, s.rows, s.spread_bps), (3, 100, 0.0));
        assert_eq!(s.cadence, SynthConfig::default().cadence);
        assert!(parse_synth("rows").is_err());
        assert!(parse_synth("colour=red").is_err());
    }

    #[test]
    fn config_accepts_both_utility_forms() {
        let a: FileConfig = serde_json::from_str(r#"{"utility": "stableswap:lambda=2"}"#).unwrap();
        let b: FileConfig = serde_json::from_str(r#"{"utility": {"kind": "stable_swap", "lambda": 2.0}}"#).unwrap();
        assert_eq!(a.utility.unwrap().resolve().unwrap(), b.utility.unwrap().resolve().unwrap());
        assert!(serde_json::from_str::<FileConfig>(r#"{"gama": 0.1}"#).is_err());
    }
}
