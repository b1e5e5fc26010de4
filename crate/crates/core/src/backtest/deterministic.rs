//! Replays a price series: before each quote the market is traded so that
//! its price for team A equals the book's mid, and fees are collected on
//! those trades.

use std::collections::BTreeMap;

use serde::Serialize;

use super::{two_outcome_target, TEAMS};
use crate::engine::MarketState;
use crate::error::{Error, Result};
use crate::fees::check_fee_level;
use crate::ingest::PriceSeries;
use crate::measure::{OutcomeSpace, Payoff};
use crate::utility::UtilitySpec;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesPoint {
    pub timestamp: i64,
    pub bid: f64,
    pub ask: f64,
    pub mid: f64,
    /// Market price of team A after the row's trade.
    pub amm_price: f64,
    /// Liquidity per outcome as a fraction of the initial cash.
    pub liquidity: [f64; 2],
    /// Cumulative fees as a fraction of the initial cash.
    pub fees: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BacktestReport {
    pub utility: UtilitySpec,
    pub fee_level: f64,
    pub initial_cash: f64,
    pub outcomes: Vec<String>,
    pub realized_outcome: String,
    pub series: Vec<SeriesPoint>,
    /// `(Π_final(ω) + fees - L)/L` for each outcome `ω`.
    pub terminal_pnl_per_outcome: BTreeMap<String, f64>,
    pub realized_pnl: f64,
    pub total_fees: f64,
    pub trade_count: usize,
    /// Largest gap, over outcomes and as a fraction of the initial cash,
    /// between the tracked pool plus fees and the value implied by the
    /// trade ledger.
    pub ledger_residual: f64,
}

impl BacktestReport {
    pub fn fee_pnl_series(&self) -> Vec<(i64, f64)> {
        self.series.iter().map(|p| (p.timestamp, p.fees)).collect()
    }

    pub fn liquidity_series(&self) -> Vec<(i64, [f64; 2])> {
        self.series.iter().map(|p| (p.timestamp, p.liquidity)).collect()
    }
}

pub const DEFAULT_CASH: f64 = 100.0;

/// Runs the replication backtest with initial cash [`DEFAULT_CASH`].
pub fn backtest_deterministic(
    prices: &PriceSeries,
    spec: &UtilitySpec,
    gamma: f64,
    outcome: &str,
) -> Result<BacktestReport> {
    backtest_deterministic_with_cash(prices, spec, gamma, outcome, DEFAULT_CASH)
}

/// The market opens with `cash` in both outcomes and reference weights
/// equal to the first mid, so it starts out quoting that mid.
pub fn backtest_deterministic_with_cash(
    prices: &PriceSeries,
    spec: &UtilitySpec,
    gamma: f64,
    outcome: &str,
    cash: f64,
) -> Result<BacktestReport> {
    check_fee_level(gamma)?;
    spec.validate()?;
    if !(cash > 0.0 && cash.is_finite()) {
        return Err(Error::InvalidConfig(format!("cash must be positive, got {cash}")));
    }
    let realized = TEAMS
        .iter()
        .position(|t| *t == outcome)
        .ok_or_else(|| Error::InvalidConfig(format!("unknown outcome {outcome:?}, expected A or B")))?;
    let rows = prices.rows();
    let mid0 = rows[0].mid;
    let space = OutcomeSpace::new(TEAMS.iter().map(|s| s.to_string()).collect(), vec![mid0, 1.0 - mid0])?;
    let mut state = MarketState::with_cash(space.clone(), spec.clone(), cash)?.with_fee_level(gamma)?;

    let mut charged_total = 0.0;
    let mut paid = [0.0f64; 2];
    let mut trades = 0usize;
    let mut series = Vec::with_capacity(rows.len());
    let mut price = price_of_a(&state)?;
    let mut quoted = mid0;

    for row in rows {
        if row.mid != quoted {
            let target = two_outcome_target(spec, &space, state.liquidity(), row.mid)?;
            let pi = state.liquidity();
            // a bet on A alone; the cost is then the gain in B liquidity
            let stake = pi[0] - target[0] + target[1] - pi[1];
            let x = Payoff::new(vec![stake, 0.0])?;
            let fill = state.apply_bet(&x)?;
            charged_total += fill.charged;
            paid[0] += stake;
            state = fill.state;
            trades += 1;
            quoted = row.mid;
            price = price_of_a(&state)?;
        }
        let pi = state.liquidity();
        series.push(SeriesPoint {
            timestamp: row.timestamp,
            bid: row.bid,
            ask: row.ask,
            mid: row.mid,
            amm_price: price,
            liquidity: [pi[0] / cash, pi[1] / cash],
            fees: state.fees_collected() / cash,
        });
    }

    let fees = state.fees_collected();
    let pi = state.liquidity();
    let mut terminal = BTreeMap::new();
    let mut residual = 0.0f64;
    for (i, team) in TEAMS.iter().enumerate() {
        terminal.insert(team.to_string(), (pi[i] + fees - cash) / cash);
        let ledger = cash + charged_total - paid[i];
        residual = residual.max((fees + pi[i] - ledger).abs() / cash);
    }
    Ok(BacktestReport {
        utility: spec.clone(),
        fee_level: gamma,
        initial_cash: cash,
        outcomes: TEAMS.iter().map(|s| s.to_string()).collect(),
        realized_outcome: TEAMS[realized].to_string(),
        realized_pnl: terminal[TEAMS[realized]],
        terminal_pnl_per_outcome: terminal,
        series,
        total_fees: fees / cash,
        trade_count: trades,
        ledger_residual: residual,
    })
}

fn price_of_a(state: &MarketState) -> Result<f64> {
    let q = state.selected_measure()?;
    Ok(q.probabilities(state.space())[0])
}
