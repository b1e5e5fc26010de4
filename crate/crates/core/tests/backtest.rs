use lbamm::backtest::derivatives::{kink_diagnostic, CashMode, OptionKind, OptionTrade};
use lbamm::backtest::{
    backtest_deterministic, backtest_stochastic, black_scholes_call, black_scholes_put, capped_call_study,
    derivatives_market, LognormalGrid, StochasticRunConfig,
};
use lbamm::ingest::{series_to_prices, synth_fixture, PriceSeries, SynthConfig};
use lbamm::{Error, UtilitySpec};

fn mids(values: &[f64]) -> PriceSeries {
    let ts: Vec<i64> = (0..values.len() as i64).map(|i| 600 * i).collect();
    PriceSeries::from_mids(&ts, values).unwrap()
}

fn fixture() -> PriceSeries {
    series_to_prices(&synth_fixture(&SynthConfig::default()).unwrap()).unwrap()
}

/// Terminal log-maker liquidity for reference weight `w` after moving the
/// price of A from `w` to `p`: `a/b = w(1-p)/((1-w)p)` on the level set of
/// `(L, L)`.
fn log_terminal(cash: f64, w: f64, p: f64) -> [f64; 2] {
    let ratio = w * (1.0 - p) / ((1.0 - w) * p);
    let b = (cash.ln() - w * ratio.ln()).exp();
    [ratio * b, b]
}

#[test]
fn flat_series_has_no_activity() {
    for spec in [UtilitySpec::Log, UtilitySpec::stable_swap(3.0)] {
        let r = backtest_deterministic(&mids(&[0.42; 6]), &spec, 0.02, "B").unwrap();
        assert_eq!(r.trade_count, 0);
        assert_eq!(r.total_fees, 0.0);
        assert!(r.terminal_pnl_per_outcome.values().all(|v| *v == 0.0));
    }
}

#[test]
fn without_fees_only_the_endpoints_matter() {
    let a = mids(&[0.5, 0.6, 0.45, 0.7, 0.55]);
    let b = mids(&[0.5, 0.3, 0.55]);
    for spec in [UtilitySpec::Log, UtilitySpec::stable_swap(2.0)] {
        let ra = backtest_deterministic(&a, &spec, 0.0, "A").unwrap();
        let rb = backtest_deterministic(&b, &spec, 0.0, "A").unwrap();
        let la = ra.series.last().unwrap().liquidity;
        let lb = rb.series.last().unwrap().liquidity;
        assert!((la[0] - lb[0]).abs() < 1e-9 && (la[1] - lb[1]).abs() < 1e-9, "{spec}");
        assert_eq!(ra.total_fees, 0.0);
    }
    let r = backtest_deterministic(&a, &UtilitySpec::Log, 0.0, "A").unwrap();
    let oracle = log_terminal(1.0, 0.5, 0.55);
    let last = r.series.last().unwrap().liquidity;
    assert!((last[0] - oracle[0]).abs() < 1e-12 && (last[1] - oracle[1]).abs() < 1e-12);
}

#[test]
fn returning_to_the_opening_price_restores_the_pool() {
    let r = backtest_deterministic(&mids(&[0.35, 0.5, 0.2, 0.35]), &UtilitySpec::stable_swap(1.0), 0.0, "A").unwrap();
    let last = r.series.last().unwrap().liquidity;
    assert!((last[0] - 1.0).abs() < 1e-9 && (last[1] - 1.0).abs() < 1e-9);
    assert_eq!(r.trade_count, 3);
}

#[test]
fn informed_drift_costs_the_pool() {
    let r = backtest_deterministic(&mids(&[0.5, 0.7, 0.9]), &UtilitySpec::Log, 0.0, "A").unwrap();
    assert!(r.realized_pnl < 0.0);
    assert!(r.terminal_pnl_per_outcome["B"] > 0.0);
    let oracle = log_terminal(100.0, 0.5, 0.9);
    assert!((r.realized_pnl - (oracle[0] - 100.0) / 100.0).abs() < 1e-12);
}

#[test]
fn fixture_backtest_reconciles_and_tracks_the_mid() {
    let prices = fixture();
    let log = backtest_deterministic(&prices, &UtilitySpec::Log, 0.01, "A").unwrap();
    let swap = backtest_deterministic(&prices, &UtilitySpec::stable_swap(2.0), 0.01, "A").unwrap();
    for r in [&log, &swap] {
        assert!(r.ledger_residual < 1e-9);
        assert!(r.series.windows(2).all(|w| w[1].fees >= w[0].fees));
        assert!(r.series.iter().all(|p| (p.amm_price - p.mid).abs() < 1e-9));
        assert!(r.series.iter().all(|p| p.liquidity[0] > 0.0 && p.liquidity[1] > 0.0));
        assert!(r.total_fees > 0.0);
    }
    // the flatter curve needs larger trades to move the price
    assert!(swap.total_fees > log.total_fees);
}

fn small_config() -> StochasticRunConfig {
    StochasticRunConfig {
        n_paths: 24,
        ..StochasticRunConfig::default()
    }
}

#[test]
fn stochastic_study_is_reproducible_and_has_the_expected_edges() {
    let prices = fixture();
    let cfg = small_config();
    let t1 = backtest_stochastic(&prices, &cfg).unwrap();
    let t2 = rayon::ThreadPoolBuilder::new()
        .num_threads(3)
        .build()
        .unwrap()
        .install(|| backtest_stochastic(&prices, &cfg).unwrap());
    assert_eq!(t1, t2);
    for &sigma in &cfg.sigmas {
        let zero = t1.cell(sigma, 0.0).unwrap();
        assert_eq!(zero.mean_fees, 0.0);
        assert_eq!((zero.fees_ci_low, zero.fees_ci_high), (0.0, 0.0));
        for c in t1.cells.iter().filter(|c| c.sigma == sigma && c.gamma >= t1.spread_covering_fee) {
            assert_eq!(c.paths_with_trades, 0);
            assert!(c.mean_profit.abs() < 1e-12);
        }
        assert!(t1.cells.iter().any(|c| c.sigma == sigma && c.mean_fees > 0.0));
    }
}

#[test]
fn stochastic_config_is_validated() {
    let prices = fixture();
    let bad = StochasticRunConfig {
        gammas: vec![0.0, 1.5],
        ..small_config()
    };
    assert!(matches!(backtest_stochastic(&prices, &bad), Err(Error::FeeOutOfRange(_))));
    let bad = StochasticRunConfig {
        n_paths: 0,
        ..small_config()
    };
    assert!(backtest_stochastic(&prices, &bad).is_err());
}

fn puts(quantity: f64) -> OptionTrade {
    OptionTrade {
        kind: OptionKind::Put { strike: 1.0 },
        quantity,
    }
}

#[test]
fn zero_size_trade_leaves_the_lognormal() {
    let run = derivatives_market(&LognormalGrid::default(), 100.0, 1e-6, &[puts(0.0)]).unwrap();
    assert_eq!(run.snapshots[0], run.snapshots[1]);
    assert_eq!(run.trades[0].cost, 0.0);
}

#[test]
fn buying_puts_bends_the_density_at_the_strike() {
    let grid = LognormalGrid::default();
    let run = derivatives_market(&grid, 100.0, 1e-6, &[puts(50.0), puts(50.0)]).unwrap();
    let (levels, space) = grid.build().unwrap();
    for s in &run.snapshots {
        let mass: f64 = s.values().iter().zip(space.weights()).map(|(q, w)| q * w).sum();
        assert!((mass - 1.0).abs() < 1e-10);
    }
    let k = kink_diagnostic(&levels, &space, run.snapshots.last().unwrap(), 1.0, 3.0, &grid);
    assert!(k.shows_put_signature(), "{k:?}");
    assert!((k.kink_level - 1.0).abs() < 2e-3);
    // more puts are dearer per contract
    assert!(run.trades[1].per_contract > run.trades[0].per_contract);
}

#[test]
fn per_contract_cost_grows_with_size() {
    let grid = LognormalGrid::default();
    let fifty = derivatives_market(&grid, 100.0, 1e-6, &[puts(50.0)]).unwrap().trades[0].per_contract;
    let hundred = derivatives_market(&grid, 100.0, 1e-6, &[puts(100.0)]).unwrap().trades[0].per_contract;
    let bs = black_scholes_put(1.0, 1.0, 0.25, 0.0, 1.0);
    assert!(hundred >= fifty && fifty > bs, "{fifty} {hundred} {bs}");
}

#[test]
fn capped_call_costs() {
    let grid = LognormalGrid::default();
    let caps: Vec<f64> = (0..=24).map(|i| 0.125 * i as f64).collect();
    let fixed = capped_call_study(&grid, 1.0, &caps, 100.0, 100.0, 1e-6, CashMode::Fixed).unwrap();
    assert_eq!(fixed[0].cost, 0.0);
    assert!(fixed.windows(2).all(|w| w[1].cost >= w[0].cost));

    let prop = capped_call_study(&grid, 1.0, &caps, 100.0, 100.0, 1e-6, CashMode::Proportional).unwrap();
    let peak = (0..prop.len()).max_by(|&i, &j| prop[i].cost.total_cmp(&prop[j].cost)).unwrap();
    assert!(peak > 0 && peak < prop.len() - 1);
    assert!(prop[..=peak].windows(2).all(|w| w[1].cost >= w[0].cost));
    assert!(prop[peak..].windows(2).all(|w| w[1].cost <= w[0].cost));
    assert!(prop.last().unwrap().cost < prop[peak].cost);
}

#[test]
fn uncapped_calls_are_refused() {
    let trade = OptionTrade {
        kind: OptionKind::Call { strike: 1.0 },
        quantity: 1.0,
    };
    assert!(matches!(
        derivatives_market(&LognormalGrid::default(), 100.0, 1e-6, &[trade]),
        Err(Error::Unbounded(_))
    ));
}

#[test]
fn black_scholes_reference_table() {
    // (spot, strike, sigma, rate, tau, call, put), evaluated at 30 digits
    let table = [
        (1.0, 1.0, 0.25, 0.0, 1.0, 0.099_476_449_660_225_8, 0.099_476_449_660_225_8),
        (100.0, 100.0, 0.2, 0.05, 1.0, 10.450_583_572_185_6, 5.573_526_022_256_97),
        (42.0, 40.0, 0.2, 0.1, 0.5, 4.759_422_392_871_53, 0.808_599_372_900_094),
        (50.0, 50.0, 0.3, 0.1, 0.25, 3.610_445_066_084_02, 2.375_940_667_500_65),
        (100.0, 110.0, 0.25, 0.03, 2.0, 12.557_156_179_684_7, 16.151_254_873_952_1),
        (1.0, 0.8, 0.25, 0.0, 1.0, 0.222_655_901_305_318, 0.022_655_901_305_318_3),
    ];
    for (s, k, v, r, t, call, put) in table {
        assert!((black_scholes_call(s, k, v, r, t) - call).abs() < 1e-6);
        assert!((black_scholes_put(s, k, v, r, t) - put).abs() < 1e-6);
        let parity = black_scholes_call(s, k, v, r, t) - black_scholes_put(s, k, v, r, t) - (s - k * (-r * t).exp());
        assert!(parity.abs() < 1e-12 * s.max(1.0));
    }
}
