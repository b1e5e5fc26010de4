//! Liquidity-based automated market makers for prediction markets.
//!
//! A market maker holds a liquidity vector `Π` (cash available in each
//! outcome) and a utility `u` over it. Bets are priced by indifference:
//! the maker charges whatever keeps `u` unchanged. The crate provides the
//! cost solver and pricing oracles ([`engine`]), liquidity pooling after
//! the market opens ([`pooling`]), explicit fees ([`fees`]), money-line
//! ingestion ([`ingest`]) and the sports-book and options backtests
//! ([`backtest`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backtest;
pub mod checks;
pub mod engine;
pub mod error;
pub mod fees;
pub mod ingest;
pub mod measure;
pub mod pooling;
pub mod solver;
pub mod utility;

pub use engine::{Fill, MarketState, OptimalBet, Quote};
pub use error::{Error, Result};
pub use fees::FeeSchedule;
pub use measure::{DensityVector, OutcomeSpace, Payoff};
pub use pooling::PoolShare;
pub use utility::{Gradient, UtilitySpec};
