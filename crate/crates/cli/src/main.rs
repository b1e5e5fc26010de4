//! `lbamm`: quotes, liquidity provision, backtests and the options-market
//! study from the command line. Results are JSON on stdout plus CSV/JSON
//! files for plotting.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lbamm::backtest::derivatives::{kink_diagnostic, CashMode, OptionKind, OptionTrade};
use lbamm::backtest::report::{
    to_rounded_json, write_cap_csv, write_density_csv, write_json, write_series_csv, write_table_csv,
};
use lbamm::backtest::{
    backtest_deterministic, backtest_stochastic, black_scholes_put, capped_call_study, derivatives_market,
    StochasticRunConfig,
};
use lbamm::backtest::deterministic::{backtest_deterministic_with_cash, DEFAULT_CASH};
use lbamm::checks::run_theorem_suite;
use lbamm::fees::{check_fee_level, oracle_with_fees};
use lbamm::ingest::{series_to_prices, synth_fixture, MoneyLineSeries, PriceSeries, SynthConfig};
use lbamm::pooling::{cost_with_share, pool_liquidity};
use lbamm::{MarketState, OutcomeSpace, Payoff, UtilitySpec};
use serde_json::{json, Value};

use config::{list_arg, parse_synth, resolve_seed, resolve_utility, FileConfig, List};

#[derive(Debug)]
pub enum CliError {
    /// Bad input; exit code 2.
    Invalid(String),
    /// A run that could not complete; exit code 1.
    Failed(String),
}

impl From<lbamm::Error> for CliError {
    fn from(e: lbamm::Error) -> Self {
        match e {
            lbamm::Error::Io(_) | lbamm::Error::RootNotFound(_) => CliError::Failed(e.to_string()),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser)]
#[command(name = "lbamm", version, about = "Liquidity-based automated market makers for prediction markets")]
struct Cli {
    /// JSON file with default values for any flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cost, fee and bid/ask of a bet against a market state.
    Quote(MarketArgs),
    /// Share bought by adding or withdrawing liquidity.
    Pool(PoolArgs),
    /// Replay a money-line series or run the fee-level Monte Carlo study.
    Backtest(BacktestArgs),
    /// Options market on a lognormal grid: put purchases and capped calls.
    Derivatives(DerivativesArgs),
    /// Randomized check of the cost function's properties.
    Selftest(SelftestArgs),
}

#[derive(Args)]
struct MarketArgs {
    /// `log`, `stableswap:lambda=2`, `essinf:eps=0.1,base=log`, `hanson:gamma=0.1` or JSON.
    #[arg(long)]
    utility: Option<String>,
    /// Reference probabilities; uniform when omitted.
    #[arg(long, value_parser = list_arg)]
    weights: Option<List>,
    /// Liquidity per outcome.
    #[arg(long, value_parser = list_arg)]
    liquidity: Option<List>,
    /// Payoff of the bet per outcome.
    #[arg(long, value_parser = list_arg, allow_hyphen_values = true)]
    bet: Option<List>,
    #[arg(long)]
    gamma: Option<f64>,
}

#[derive(Args)]
struct PoolArgs {
    #[command(flatten)]
    market: MarketArgs,
    /// Liquidity added per outcome; negative entries withdraw.
    #[arg(long, value_parser = list_arg, allow_hyphen_values = true)]
    provision: Option<List>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Det,
    Stoch,
}

#[derive(Args)]
struct BacktestArgs {
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long)]
    utility: Option<String>,
    /// Fee level of the replay.
    #[arg(long)]
    gamma: Option<f64>,
    /// Fee levels of the Monte Carlo study.
    #[arg(long, value_parser = list_arg)]
    gammas: Option<List>,
    /// Annualized volatilities of the latent price.
    #[arg(long, value_parser = list_arg)]
    sigma: Option<List>,
    #[arg(long)]
    paths: Option<usize>,
    /// Simulation step in seconds.
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Money-line CSV with header `timestamp,ml_a,ml_b`.
    #[arg(long, conflicts_with = "synth")]
    data: Option<PathBuf>,
    /// Synthetic fixture, e.g. `seed=42,rows=2016,spread=400`.
    #[arg(long, value_parser = parse_synth)]
    synth: Option<SynthConfig>,
    /// Realized outcome of the replay, `A` or `B`.
    #[arg(long)]
    outcome: Option<String>,
    #[arg(long)]
    cash: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DerivativesArgs {
    /// Put quantities bought in sequence at `--strike`.
    #[arg(long, value_parser = list_arg)]
    puts: Option<List>,
    #[arg(long)]
    strike: Option<f64>,
    #[arg(long)]
    cash: Option<f64>,
    /// Essential-infimum weight of the log maker.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Annualized volatility of the lognormal grid.
    #[arg(long)]
    vol: Option<f64>,
    /// Years to expiry.
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    atoms: Option<usize>,
    /// Caps of the capped-call sweep.
    #[arg(long, value_parser = list_arg)]
    caps: Option<List>,
    /// Contracts per point of the capped-call sweep.
    #[arg(long)]
    cap_quantity: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SelftestArgs {
    #[arg(long, default_value_t = 1000)]
    instances: usize,
    #[arg(long)]
    seed: Option<u64>,
}

fn print_json(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("values serialize"));
}

fn rounded<T: serde::Serialize>(v: &T) -> CliResult<Value> {
    Ok(to_rounded_json(v)?)
}

fn market_state(args: &MarketArgs, file: &FileConfig) -> CliResult<MarketState> {
    let spec = resolve_utility(args.utility.as_deref(), file.utility.as_ref(), UtilitySpec::Log)?;
    let liquidity = args
        .liquidity
        .clone()
        .map(|l| l.0)
        .or_else(|| file.liquidity.clone())
        .ok_or_else(|| CliError::Invalid("--liquidity is required".into()))?;
    let n = liquidity.len();
    let space = match args.weights.clone().map(|l| l.0).or_else(|| file.weights.clone()) {
        Some(w) => OutcomeSpace::new((0..w.len()).map(|i| format!("w{i}")).collect(), w)?,
        None => OutcomeSpace::uniform(n)?,
    };
    let gamma = args.gamma.or(file.gamma).unwrap_or(0.0);
    check_fee_level(gamma)?;
    Ok(MarketState::new(space, spec, Payoff::new(liquidity)?)?.with_fee_level(gamma)?)
}

fn bet(args: &MarketArgs, file: &FileConfig) -> CliResult<Option<Payoff>> {
    Ok(match args.bet.clone().map(|l| l.0).or_else(|| file.bet.clone()) {
        Some(b) => Some(Payoff::new(b)?),
        None => None,
    })
}

fn cmd_quote(args: &MarketArgs, file: &FileConfig) -> CliResult<()> {
    let state = market_state(args, file)?;
    let x = bet(args, file)?.ok_or_else(|| CliError::Invalid("--bet is required".into()))?;
    let fill = state.apply_bet(&x)?;
    let q = oracle_with_fees(&state, state.fee_level(), &x)?;
    print_json(&json!({
        "utility": state.utility().to_string(),
        "gamma": state.fee_level(),
        "cost": rounded(&fill.cost)?,
        "charged": rounded(&fill.charged)?,
        "fee": rounded(&fill.fee)?,
        "bid": rounded(&q.bid)?,
        "ask": rounded(&q.ask)?,
        "probabilities": rounded(&q.measure.map(|m| m.probabilities(state.space())))?,
        "liquidity_after": rounded(&fill.state.liquidity().values())?,
    }));
    Ok(())
}

fn cmd_pool(args: &PoolArgs, file: &FileConfig) -> CliResult<()> {
    let state = market_state(&args.market, file)?;
    let ell = args
        .provision
        .clone()
        .map(|l| l.0)
        .or_else(|| file.provision.clone())
        .ok_or_else(|| CliError::Invalid("--provision is required".into()))?;
    let ell = Payoff::new(ell)?;
    let share = pool_liquidity(&state, &ell)?;
    let star = state.with_liquidity(share.liquidity.clone())?;
    let total = state.liquidity().add(&ell);
    let mut out = json!({
        "alpha": rounded(&share.alpha)?,
        "proportional": share.proportional,
        "effective_liquidity": rounded(&share.liquidity.values())?,
        "total_liquidity": rounded(&total.values())?,
    });
    if let Some(x) = bet(&args.market, file)? {
        let pooled = state.with_liquidity(total)?;
        let before = state.quote(&x)?;
        let after = pooled.quote(&x)?;
        out["bet"] = json!({
            "cost_before": rounded(&state.cost(&x)?)?,
            "cost_after": rounded(&cost_with_share(&star, share.alpha, &x)?)?,
            "bid_before": rounded(&before.bid)?,
            "ask_before": rounded(&before.ask)?,
            "bid_after": rounded(&after.bid)?,
            "ask_after": rounded(&after.ask)?,
        });
    }
    print_json(&out);
    Ok(())
}

fn load_prices(args: &BacktestArgs, file: &FileConfig) -> CliResult<(PriceSeries, Value)> {
    let data = args.data.clone().or_else(|| if args.synth.is_some() { None } else { file.data.clone() });
    if let Some(path) = data {
        let series = MoneyLineSeries::read_csv(&path)?;
        return Ok((series_to_prices(&series)?, json!({ "csv": path.display().to_string() })));
    }
    let synth = args.synth.or(file.synth).unwrap_or_default();
    let series = synth_fixture(&synth)?;
    Ok((series_to_prices(&series)?, json!({ "fixture": synth })))
}

fn out_dir(flag: Option<&Path>, file: &FileConfig) -> CliResult<PathBuf> {
    let dir = flag
        .map(Path::to_path_buf)
        .or_else(|| file.out.clone())
        .unwrap_or_else(|| PathBuf::from("lbamm-out"));
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::Failed(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn cmd_backtest(args: &BacktestArgs, file: &FileConfig) -> CliResult<()> {
    let mode = match (args.mode, file.mode.as_deref()) {
        (Some(m), _) => m,
        (None, Some("det")) | (None, None) => Mode::Det,
        (None, Some("stoch")) => Mode::Stoch,
        (None, Some(other)) => return Err(CliError::Invalid(format!("unknown mode {other:?}"))),
    };
    let (prices, source) = load_prices(args, file)?;
    match mode {
        Mode::Det => {
            let spec = resolve_utility(args.utility.as_deref(), file.utility.as_ref(), UtilitySpec::Log)?;
            let gamma = args.gamma.or(file.gamma).unwrap_or(0.0);
            let outcome = args.outcome.clone().or_else(|| file.outcome.clone()).unwrap_or_else(|| "A".into());
            let cash = args.cash.or(file.cash).unwrap_or(DEFAULT_CASH);
            let report = if cash == DEFAULT_CASH {
                backtest_deterministic(&prices, &spec, gamma, &outcome)?
            } else {
                backtest_deterministic_with_cash(&prices, &spec, gamma, &outcome, cash)?
            };
            let dir = out_dir(args.out.as_deref(), file)?;
            write_json(dir.join("report.json"), &report)?;
            write_series_csv(dir.join("series.csv"), &report)?;
            print_json(&json!({
                "mode": "det",
                "source": source,
                "utility": spec.to_string(),
                "gamma": gamma,
                "trades": report.trade_count,
                "total_fees": rounded(&report.total_fees)?,
                "terminal_pnl": rounded(&report.terminal_pnl_per_outcome)?,
                "ledger_residual": rounded(&report.ledger_residual)?,
                "out": dir.display().to_string(),
            }));
        }
        Mode::Stoch => {
            let spec = resolve_utility(args.utility.as_deref(), file.utility.as_ref(), UtilitySpec::stable_swap(2.0))?;
            let lambda = match spec {
                UtilitySpec::Log => 0.0,
                UtilitySpec::StableSwap { lambda } => lambda,
                other => {
                    return Err(CliError::Invalid(format!(
                        "the Monte Carlo study runs log or stableswap makers, not {other}"
                    )))
                }
            };
            let defaults = StochasticRunConfig::default();
            let cfg = StochasticRunConfig {
                sigmas: args.sigma.clone().map(|l| l.0).or_else(|| file.sigmas.clone()).unwrap_or(defaults.sigmas),
                gammas: args.gammas.clone().map(|l| l.0).or_else(|| file.gammas.clone()).unwrap_or(defaults.gammas),
                n_paths: args.paths.or(file.paths).unwrap_or(defaults.n_paths),
                dt: args.dt.or(file.dt).unwrap_or(defaults.dt),
                seed: resolve_seed(args.seed, file.seed, defaults.seed)?,
                lambda,
            };
            cfg.validate()?;
            let table = backtest_stochastic(&prices, &cfg)?;
            let dir = out_dir(args.out.as_deref(), file)?;
            write_json(dir.join("report.json"), &table)?;
            write_table_csv(dir.join("table.csv"), &table)?;
            let best: Vec<Value> = cfg
                .sigmas
                .iter()
                .map(|&s| json!({ "sigma": s, "best_gamma_fees": table.best_fee_by_fees(s), "best_gamma_total": table.best_fee(s) }))
                .collect();
            print_json(&json!({
                "mode": "stoch",
                "source": source,
                "lambda": lambda,
                "seed": cfg.seed,
                "paths": cfg.n_paths,
                "spread_covering_fee": rounded(&table.spread_covering_fee)?,
                "best": best,
                "out": dir.display().to_string(),
            }));
        }
    }
    Ok(())
}

fn cmd_derivatives(args: &DerivativesArgs, file: &FileConfig) -> CliResult<()> {
    let mut grid = file.grid.clone().unwrap_or_default();
    if let Some(v) = args.vol {
        grid.sigma = v;
    }
    if let Some(t) = args.tau {
        grid.tau = t;
    }
    if let Some(a) = args.atoms {
        grid.atoms = a;
    }
    grid.validate()?;
    let strike = args.strike.or(file.strike).unwrap_or(1.0);
    let cash = args.cash.or(file.cash).unwrap_or(100.0);
    let epsilon = args.epsilon.or(file.epsilon).unwrap_or(1e-6);
    let trades: Vec<OptionTrade> = match (&args.puts, &file.trades) {
        (Some(q), _) => q
            .0
            .iter()
            .map(|&quantity| OptionTrade {
                kind: OptionKind::Put { strike },
                quantity,
            })
            .collect(),
        (None, Some(t)) => t.clone(),
        (None, None) => vec![50.0, 50.0]
            .into_iter()
            .map(|quantity| OptionTrade {
                kind: OptionKind::Put { strike },
                quantity,
            })
            .collect(),
    };
    let run = derivatives_market(&grid, cash, epsilon, &trades)?;
    let (levels, space) = grid.build()?;
    let kink = trades
        .iter()
        .rev()
        .find_map(|t| match t.kind {
            OptionKind::Put { strike } if t.quantity != 0.0 => Some(strike),
            _ => None,
        })
        .map(|k| kink_diagnostic(&levels, &space, run.snapshots.last().expect("initial snapshot"), k, 3.0, &grid));

    let caps = args
        .caps
        .clone()
        .map(|l| l.0)
        .or_else(|| file.caps.clone())
        .unwrap_or_else(|| (0..=24).map(|i| 0.125 * i as f64).collect());
    let cap_quantity = args.cap_quantity.or(file.cap_quantity).unwrap_or(100.0);
    let fixed = capped_call_study(&grid, strike, &caps, cap_quantity, cash, epsilon, CashMode::Fixed)?;
    let proportional = capped_call_study(&grid, strike, &caps, cap_quantity, cash, epsilon, CashMode::Proportional)?;

    let dir = out_dir(args.out.as_deref(), file)?;
    write_density_csv(dir.join("density.csv"), &run)?;
    write_cap_csv(dir.join("caps.csv"), &fixed, &proportional)?;
    let bs_put = black_scholes_put(grid.spot, strike, grid.sigma, grid.rate, grid.tau);
    let report = json!({
        "grid": grid,
        "cash": cash,
        "epsilon": epsilon,
        "trades": run.trades,
        "kink": kink,
        "black_scholes_put": bs_put,
        "capped_calls": { "quantity": cap_quantity, "fixed_cash": fixed, "proportional_cash": proportional },
    });
    write_json(dir.join("report.json"), &report)?;
    print_json(&json!({
        "trades": rounded(&run.trades)?,
        "kink": rounded(&kink)?,
        "black_scholes_put": rounded(&bs_put)?,
        "out": dir.display().to_string(),
    }));
    Ok(())
}

fn cmd_selftest(args: &SelftestArgs, file: &FileConfig) -> CliResult<bool> {
    let seed = resolve_seed(args.seed, file.seed, 2024)?;
    let report = run_theorem_suite(args.instances, seed);
    print_json(&json!({
        "seed": seed,
        "instances": report.instances,
        "checks": report.checks,
        "kinked_instances": report.kinked_instances,
        "violations": report.violations,
        "seconds": rounded(&report.seconds)?,
    }));
    Ok(report.passed())
}

fn run(cli: &Cli) -> CliResult<bool> {
    let file = FileConfig::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Quote(a) => cmd_quote(a, &file)?,
        Command::Pool(a) => cmd_pool(a, &file)?,
        Command::Backtest(a) => cmd_backtest(a, &file)?,
        Command::Derivatives(a) => cmd_derivatives(a, &file)?,
        Command::Selftest(a) => return cmd_selftest(a, &file),
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(CliError::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Failed(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
