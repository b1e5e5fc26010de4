//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Set `LBAMM_ACCEPTANCE_CSV` to a money-line CSV to include it in the
//! ledger check alongside the synthetic fixture.

use std::process::ExitCode;
use std::time::Instant;

use lbamm::backtest::derivatives::{kink_diagnostic, CashMode, OptionKind, OptionTrade};
use lbamm::backtest::{
    backtest_deterministic, backtest_stochastic, black_scholes_call, black_scholes_put, capped_call_study,
    derivatives_market, LognormalGrid, StochasticRunConfig,
};
use lbamm::checks::run_theorem_suite;
use lbamm::fees::{cost_with_fees, fee_monotonicity_check};
use lbamm::ingest::{series_to_prices, synth_fixture, MoneyLineSeries, PriceSeries, SynthConfig};
use lbamm::pooling::{cost_with_share, oracle_invariance_check, pool_liquidity};
use lbamm::{DensityVector, MarketState, OutcomeSpace, Payoff, UtilitySpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_space(rng: &mut ChaCha8Rng, n: usize) -> OutcomeSpace {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut w: Vec<f64> = raw.iter().map(|v| v / total).collect();
    let rest: f64 = w[1..].iter().sum();
    w[0] = 1.0 - rest;
    OutcomeSpace::new((0..n).map(|i| format!("w{i}")).collect(), w).unwrap()
}

fn theorem_suite() -> Outcome {
    let r = run_theorem_suite(1000, 2024);
    let pass = r.passed() && r.instances >= 1000 && r.seconds < 60.0;
    let mut detail = format!(
        "{} instances, {} checks ({} on kinks), {} violations, {:.2}s",
        r.instances,
        r.checks,
        r.kinked_instances,
        r.violations.len(),
        r.seconds
    );
    if let Some(v) = r.violations.first() {
        detail += &format!("; first: {v}");
    }
    outcome(pass, detail)
}

fn radical_formula() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let p = [10f64.powf(rng.random_range(-1.0..3.0)), 10f64.powf(rng.random_range(-1.0..3.0))];
        let s = p[0].max(p[1]);
        let x = [s * rng.random_range(-2.0..2.0), s * rng.random_range(-2.0..2.0)];
        let (a, b) = (p[0] - x[0], p[1] - x[1]);
        let oracle = (-p[0] - p[1] + x[0] + x[1]) / 2.0 + ((a - b).powi(2) + 4.0 * p[0] * p[1]).sqrt() / 2.0;
        let m = MarketState::new(OutcomeSpace::uniform(2).unwrap(), UtilitySpec::Log, Payoff::new(p.to_vec()).unwrap())
            .unwrap();
        let c = m.cost(&Payoff::new(x.to_vec()).unwrap()).unwrap();
        worst = worst.max((c - oracle).abs() / oracle.abs().max(f64::MIN_POSITIVE));
    }
    outcome(worst <= 1e-10, format!("1000 instances, max relative error {worst:.2e}"))
}

fn pooling() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let ts = [-0.5, -0.1, 0.1, 1.0, 10.0];
    let mut alpha_err = 0.0f64;
    let mut invariant = true;
    let mut violations = 0;
    let mut grid_checks = 0;
    let specs = [
        UtilitySpec::Log,
        UtilitySpec::stable_swap(2.0),
        UtilitySpec::ess_inf_mix(UtilitySpec::Log, 0.6),
    ];
    for k in 0..30 {
        let n = rng.random_range(2..8);
        let space = random_space(&mut rng, n);
        let pi = Payoff::new((0..n).map(|_| rng.random_range(1.0..500.0)).collect()).unwrap();
        let m = MarketState::new(space, specs[k % 3].clone(), pi).unwrap();
        for &t in &ts {
            let s = pool_liquidity(&m, &m.liquidity().scale(t)).unwrap();
            alpha_err = alpha_err.max((s.alpha - t).abs());
        }
        let bets: Vec<Payoff> = (0..3)
            .map(|_| Payoff::new((0..n).map(|_| rng.random_range(-50.0..50.0)).collect()).unwrap())
            .collect();
        for &t in &ts {
            invariant &= oracle_invariance_check(&m, t, &bets).unwrap();
        }
        let alphas: Vec<f64> = (0..=109).map(|i| -0.9 + 0.1 * i as f64).collect();
        for x in &bets {
            let costs: Vec<f64> = alphas.iter().map(|&a| cost_with_share(&m, a, x).unwrap()).collect();
            grid_checks += costs.len() - 1;
            violations += costs.windows(2).filter(|w| w[1] > w[0] + 1e-12).count();
        }
    }
    outcome(
        alpha_err <= 1e-10 && invariant && violations == 0,
        format!(
            "max |α*-t| {alpha_err:.1e}, oracle invariance {}, {violations} of {grid_checks} α-grid steps increased cost",
            if invariant { "held" } else { "FAILED" }
        ),
    )
}

fn fees() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let gammas = [0.0, 0.005, 0.01, 0.05, 0.2, 0.5, 1.0];
    let mut monotone = true;
    let mut constant_exact = true;
    for _ in 0..200 {
        let n = rng.random_range(2..6);
        let space = random_space(&mut rng, n);
        let m = MarketState::new(
            space,
            UtilitySpec::stable_swap(rng.random_range(0.0..3.0)),
            Payoff::new((0..n).map(|_| rng.random_range(1.0..100.0)).collect()).unwrap(),
        )
        .unwrap();
        let x = Payoff::new((0..n).map(|_| rng.random_range(-20.0..20.0)).collect()).unwrap();
        monotone &= fee_monotonicity_check(&m, &x, &gammas).unwrap();
        let c = rng.random_range(-10.0..10.0);
        for &g in &gammas {
            constant_exact &= cost_with_fees(&m, g, &Payoff::constant(n, c)).unwrap().0 == c;
        }
    }
    let m = MarketState::new(OutcomeSpace::uniform(2).unwrap(), UtilitySpec::Log, Payoff::new(vec![1.0, 0.5]).unwrap())
        .unwrap();
    let x = Payoff::new(vec![0.0, 1.0]).unwrap();
    let (charged, _) = cost_with_fees(&m, 0.5, &x).unwrap();
    let counter = charged > x.ess_sup();
    // with Π₂ = γΠ₁ the charge falls as x(ω₁) rises
    let skew = MarketState::new(OutcomeSpace::uniform(2).unwrap(), UtilitySpec::Log, Payoff::new(vec![10.0, 5.0]).unwrap())
        .unwrap();
    let charges: Vec<f64> = (0..20)
        .map(|i| cost_with_fees(&skew, 0.5, &Payoff::new(vec![i as f64 / 20.0, 1.0]).unwrap()).unwrap().0)
        .collect();
    let falling = charges.windows(2).all(|w| w[1] < w[0]);
    outcome(
        monotone && constant_exact && counter && falling,
        format!(
            "γ-monotone {monotone}, C_γ(c1)=c exact {constant_exact}, counterexample C_γ = {charged:.6} > esssup 1 {counter}, decreasing on Π₂=γΠ₁ {falling}"
        ),
    )
}

fn optimal_bet() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut measure_err = 0.0f64;
    let mut best_gain = f64::NEG_INFINITY;
    for _ in 0..100 {
        let n = rng.random_range(2..=10);
        let space = random_space(&mut rng, n);
        let pi = Payoff::new((0..n).map(|_| rng.random_range(1.0..100.0)).collect()).unwrap();
        let m = MarketState::new(space.clone(), UtilitySpec::Log, pi).unwrap();
        let q = DensityVector::normalized(&space, (0..n).map(|_| rng.random_range(0.01..1.0)).collect()).unwrap();
        let opt = m.optimal_bet(&q).unwrap();
        let after = m.apply_bet(&opt.bet).unwrap().state;
        let post = after.pricing_measure().unwrap();
        for (a, b) in post.values().iter().zip(q.values()) {
            measure_err = measure_err.max((a - b).abs());
        }
        let value = |x: &Payoff| space.expect(x, Some(&q)).unwrap() - m.cost(x).unwrap();
        let base = value(&opt.bet);
        let scale = opt.bet.sup_norm().max(1.0);
        for h in [1e-4, 1e-2, 1e-1] {
            for i in 0..n {
                for sign in [-1.0, 1.0] {
                    let d = Payoff::indicator(n, i).scale(sign * h * scale);
                    best_gain = best_gain.max(value(&opt.bet.add(&d)) - base);
                }
            }
            for _ in 0..10 {
                let d = Payoff::new((0..n).map(|_| h * scale * rng.random_range(-1.0..1.0)).collect()).unwrap();
                best_gain = best_gain.max(value(&opt.bet.add(&d)) - base);
            }
        }
    }
    outcome(
        measure_err <= 1e-8 && best_gain <= 1e-8,
        format!("100 beliefs, max |Q'-q| {measure_err:.1e}, best perturbation gain {best_gain:.1e}"),
    )
}

fn fixture() -> PriceSeries {
    series_to_prices(&synth_fixture(&SynthConfig::default()).unwrap()).unwrap()
}

fn stochastic() -> Outcome {
    let start = Instant::now();
    let prices = fixture();
    let cfg = StochasticRunConfig::default();
    let table = backtest_stochastic(&prices, &cfg).unwrap();
    let seconds = start.elapsed().as_secs_f64();
    let cover = table.spread_covering_fee;
    let mut pass = cfg.n_paths == 500 && cfg.dt == 60.0 && seconds < 600.0;
    let mut parts = Vec::new();
    let mut argmax = Vec::new();
    for &sigma in &cfg.sigmas {
        let column: Vec<_> = table.cells.iter().filter(|c| c.sigma == sigma).collect();
        let zero = column.iter().find(|c| c.gamma == 0.0).unwrap();
        let covered: Vec<_> = column.iter().filter(|c| c.gamma >= cover).collect();
        let zero_at_zero = zero.mean_fees == 0.0;
        let zero_when_covered = !covered.is_empty() && covered.iter().all(|c| c.paths_with_trades == 0 && c.mean_fees == 0.0 && c.mean_profit.abs() < 1e-12);
        let interior_positive = column.iter().any(|c| c.gamma > 0.0 && c.gamma < cover && c.mean_fees > 0.0);
        let best = table.best_fee_by_fees(sigma).unwrap();
        pass &= zero_at_zero && zero_when_covered && interior_positive;
        argmax.push(best);
        parts.push(format!(
            "σ={sigma}: argmax γ {best} (by total {}), total at γ=0 {:+.2e} [{:+.1e},{:+.1e}]",
            table.best_fee(sigma).unwrap(),
            zero.mean_profit,
            zero.ci_low,
            zero.ci_high
        ));
    }
    let nonincreasing = argmax.windows(2).all(|w| w[1] <= w[0]);
    pass &= nonincreasing;
    outcome(
        pass,
        format!(
            "fee profit 0 at γ=0 and at γ≥{cover:.4}, positive in between; argmax nonincreasing {nonincreasing}; {}; {seconds:.1}s",
            parts.join("; ")
        ),
    )
}

fn derivatives() -> Outcome {
    let grid = LognormalGrid::default();
    let put = |q: f64| OptionTrade {
        kind: OptionKind::Put { strike: 1.0 },
        quantity: q,
    };
    let run50 = derivatives_market(&grid, 100.0, 1e-6, &[put(50.0)]).unwrap();
    let run100 = derivatives_market(&grid, 100.0, 1e-6, &[put(100.0)]).unwrap();
    let (levels, space) = grid.build().unwrap();
    let kink = kink_diagnostic(&levels, &space, &run100.snapshots[1], 1.0, 3.0, &grid);
    let per50 = run50.trades[0].per_contract;
    let per100 = run100.trades[0].per_contract;

    let caps: Vec<f64> = (0..=24).map(|i| 0.125 * i as f64).collect();
    let fixed = capped_call_study(&grid, 1.0, &caps, 100.0, 100.0, 1e-6, CashMode::Fixed).unwrap();
    let prop = capped_call_study(&grid, 1.0, &caps, 100.0, 100.0, 1e-6, CashMode::Proportional).unwrap();
    let fixed_monotone = fixed.windows(2).all(|w| w[1].cost >= w[0].cost);
    let peak = (0..prop.len()).max_by(|&i, &j| prop[i].cost.total_cmp(&prop[j].cost)).unwrap();
    let eventually_falls = peak + 1 < prop.len() && prop[peak..].windows(2).all(|w| w[1].cost <= w[0].cost) && prop.last().unwrap().cost < prop[peak].cost;

    let table = [
        (1.0, 1.0, 0.25, 0.0, 1.0, 0.099_476_449_660_225_8, 0.099_476_449_660_225_8),
        (100.0, 100.0, 0.2, 0.05, 1.0, 10.450_583_572_185_6, 5.573_526_022_256_97),
        (42.0, 40.0, 0.2, 0.1, 0.5, 4.759_422_392_871_53, 0.808_599_372_900_094),
        (50.0, 50.0, 0.3, 0.1, 0.25, 3.610_445_066_084_02, 2.375_940_667_500_65),
    ];
    let bs_err = table
        .iter()
        .map(|&(s, k, v, r, t, c, p)| (black_scholes_call(s, k, v, r, t) - c).abs().max((black_scholes_put(s, k, v, r, t) - p).abs()))
        .fold(0.0, f64::max);

    outcome(
        kink.shows_put_signature() && per100 >= per50 && fixed_monotone && eventually_falls && bs_err <= 1e-6,
        format!(
            "mean {:.4}→{:.4}, kink at {:.4} (strike 1), per-contract 50 puts {per50:.6} vs 100 puts {per100:.6} (BS {:.6}), fixed-L caps nondecreasing {fixed_monotone}, L∝T peak at T={} then decreasing {eventually_falls}, BS table error {bs_err:.1e}",
            kink.mean_before,
            kink.mean_after,
            kink.kink_level,
            black_scholes_put(1.0, 1.0, 0.25, 0.0, 1.0),
            prop[peak].cap
        ),
    )
}

fn ledger() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fixture.csv");
    synth_fixture(&SynthConfig::default()).unwrap().write_csv(&path).unwrap();
    let mut sources = vec![("fixture".to_string(), fixture()), (
        "fixture.csv".to_string(),
        series_to_prices(&MoneyLineSeries::read_csv(&path).unwrap()).unwrap(),
    )];
    if let Ok(extra) = std::env::var("LBAMM_ACCEPTANCE_CSV") {
        match MoneyLineSeries::read_csv(&extra).and_then(|s| series_to_prices(&s)) {
            Ok(p) => sources.push((extra, p)),
            Err(e) => return outcome(false, format!("could not load {extra}: {e}")),
        }
    }
    let mut worst = 0.0f64;
    let mut runs = 0;
    for (_, prices) in &sources {
        for spec in [UtilitySpec::Log, UtilitySpec::stable_swap(2.0)] {
            for gamma in [0.0, 0.01, 0.03] {
                for team in ["A", "B"] {
                    let r = backtest_deterministic(prices, &spec, gamma, team).unwrap();
                    worst = worst.max(r.ledger_residual);
                    runs += 1;
                }
            }
        }
    }
    let names: Vec<&str> = sources.iter().map(|(n, _)| n.as_str()).collect();
    outcome(worst <= 1e-9, format!("{runs} runs on {}, max residual {worst:.1e} of initial cash", names.join(", ")))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("theorem suite", theorem_suite),
        ("two-outcome radical formula", radical_formula),
        ("pooling", pooling),
        ("fees", fees),
        ("optimal bet", optimal_bet),
        ("stochastic backtest shape", stochastic),
        ("derivatives", derivatives),
        ("deterministic ledger", ledger),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!("[{}] {}. {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
