//! Output files. Every number is written with ten significant digits.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use super::derivatives::{CapPoint, DerivativesRun};
use super::deterministic::BacktestReport;
use super::stochastic::StochasticTable;
use crate::error::{Error, Result};

pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.9e}").parse().unwrap_or(x)
}

fn fmt(x: f64) -> String {
    let r = round_sig(x);
    if r == r.trunc() && r.abs() < 1e15 {
        format!("{r:.1}")
    } else {
        format!("{r}")
    }
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) => {
            if n.is_f64() {
                if let Some(f) = n.as_f64() {
                    if let Some(r) = serde_json::Number::from_f64(round_sig(f)) {
                        *n = r;
                    }
                }
            }
        }
        Value::Array(a) => a.iter_mut().for_each(round_value),
        Value::Object(o) => o.values_mut().for_each(round_value),
        _ => {}
    }
}

/// JSON value of `v` with floats rounded to ten significant digits.
pub fn to_rounded_json<T: Serialize>(v: &T) -> Result<Value> {
    let mut value = serde_json::to_value(v).map_err(|e| Error::Io(e.to_string()))?;
    round_value(&mut value);
    Ok(value)
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, v: &T) -> Result<()> {
    let value = to_rounded_json(v)?;
    let text = serde_json::to_string_pretty(&value).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn write_lines(path: impl AsRef<Path>, header: &str, lines: impl Iterator<Item = String>) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(f, "{header}")?;
    for l in lines {
        writeln!(f, "{l}")?;
    }
    f.flush()?;
    Ok(())
}

/// `series.csv` of a replication backtest.
pub fn write_series_csv(path: impl AsRef<Path>, report: &BacktestReport) -> Result<()> {
    write_lines(
        path,
        "timestamp,bid,ask,mid,amm_price,liquidity_a,liquidity_b,cumulative_fees",
        report.series.iter().map(|p| {
            format!(
                "{},{},{},{},{},{},{},{}",
                p.timestamp,
                fmt(p.bid),
                fmt(p.ask),
                fmt(p.mid),
                fmt(p.amm_price),
                fmt(p.liquidity[0]),
                fmt(p.liquidity[1]),
                fmt(p.fees)
            )
        }),
    )
}

/// `table.csv` of the fee-level study.
pub fn write_table_csv(path: impl AsRef<Path>, table: &StochasticTable) -> Result<()> {
    write_lines(
        path,
        "sigma,gamma,mean_profit,ci_low,ci_high,mean_fees,fees_ci_low,fees_ci_high,mean_trades,paths_with_trades",
        table.cells.iter().map(|c| {
            format!(
                "{},{},{},{},{},{},{},{},{},{}",
                fmt(c.sigma),
                fmt(c.gamma),
                fmt(c.mean_profit),
                fmt(c.ci_low),
                fmt(c.ci_high),
                fmt(c.mean_fees),
                fmt(c.fees_ci_low),
                fmt(c.fees_ci_high),
                fmt(c.mean_trades),
                c.paths_with_trades
            )
        }),
    )
}

/// One row per price level: the level, its weight, and the density after
/// each trade (`snapshot_0` is before any trade).
pub fn write_density_csv(path: impl AsRef<Path>, run: &DerivativesRun) -> Result<()> {
    let header = std::iter::once("level,weight".to_string())
        .chain((0..run.snapshots.len()).map(|i| format!("snapshot_{i}")))
        .collect::<Vec<_>>()
        .join(",");
    write_lines(
        path,
        &header,
        (0..run.levels.len()).map(|i| {
            let mut cols = vec![fmt(run.levels[i]), fmt(run.weights[i])];
            cols.extend(run.snapshots.iter().map(|s| fmt(s[i])));
            cols.join(",")
        }),
    )
}

/// Two cost curves of the cap study on a shared cap grid.
pub fn write_cap_csv(path: impl AsRef<Path>, fixed: &[CapPoint], proportional: &[CapPoint]) -> Result<()> {
    write_lines(
        path,
        "cap,cost_fixed_cash,cash_proportional,cost_proportional_cash",
        fixed.iter().zip(proportional).map(|(f, p)| {
            format!("{},{},{},{}", fmt(f.cap), fmt(f.cost), fmt(p.cash), fmt(p.cost))
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounds_to_ten_digits() {
        assert_eq!(round_sig(0.123_456_789_012_345), 0.123_456_789_0);
        assert_eq!(round_sig(-98_765.432_109_876), -98_765.432_11);
        assert_eq!(round_sig(0.0), 0.0);
        let v = to_rounded_json(&vec![1.0 / 3.0, 2.0]).unwrap();
        assert_eq!(v.to_string(), "[0.3333333333,2.0]");
    }
}
