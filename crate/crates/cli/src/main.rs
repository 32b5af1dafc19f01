//! `ipd`: extract, smooth and recover densities from call chains on the command line.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ipd_core::extract::{nnls_spd_default, reprice_calls_calibrated};
use ipd_core::io::{density_from_csv, density_to_csv, moments_to_json, raw_spd_to_csv, sweep_to_csv, transform_to_csv};
use ipd_core::recovery::{ipd_moments, DEFAULT_END_LEVEL, DEFAULT_STEPS, DEFAULT_X0_LEVEL};
use ipd_core::smooth::{auto_epsilon, default_epsilon_ladder, Smoothed, DEFAULT_RIPPLE};
use ipd_core::{
    bl_raw_spd, butterfly_slopes, clip_rescale, implied_sigma_by_iqr, mu_sweep, normalize_quantiles, parse_chain,
    recover_ipd, reprice_calls, short_rate_from_yield, smooth_spd, solve_slope_spd, trend_from_returns,
    validate_chain, BsmParams, ChainMeta, DensityKind, GridDensity, MomentBasis, OptionChain, RawSpd, RecoveryConfig,
    SmoothingConfig, SweepFamily,
};
use serde::Serialize;
use serde_json::json;

use crate::manifest::{usage, Run, Usage};

const DEFAULT_RATE: f64 = 0.012;
const DEFAULT_MU: f64 = 0.094;
const DEFAULT_EPSILON: f64 = 5e-4;

#[derive(Parser, Debug)]
#[command(name = "ipd", version, about = "State-price and implied physical densities from option chains")]
struct Cli {
    /// Manifest path; defaults to the first output with `.manifest.json` appended.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Raw or clipped SPD estimate from a chain CSV.
    Extract(ExtractArgs),
    /// Smooth an SPD through its transform onto a lognormal benchmark.
    Smooth(SmoothArgs),
    /// Benchmark parameters from market observables.
    Calibrate(CalibrateArgs),
    /// Implied physical density and its moments.
    Recover(RecoverArgs),
    /// Moments of the implied physical density across trends.
    Sweep(SweepArgs),
    /// Call prices implied by an SPD at the strikes of a chain.
    Reprice(RepriceArgs),
    /// Built-in checks of exact recovery and smoothing.
    Selftest(SelftestArgs),
}

#[derive(Args, Debug, Clone)]
struct MarketArgs {
    /// Spot price of the underlying.
    #[arg(long)]
    spot: Option<f64>,
    /// Time to expiry in years.
    #[arg(long)]
    expiry: Option<f64>,
    /// JSON `{"spot": .., "expiry_years": ..}`; a chain's `.json` sidecar is used when present.
    #[arg(long)]
    meta: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Method {
    /// Second differences of call prices.
    Bl,
    /// Butterfly slopes integrated with zero boundary values.
    Butterfly,
    /// Nonnegative least squares fit of the chain.
    Nnls,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Basis {
    Price,
    Returns,
}

impl From<Basis> for MomentBasis {
    fn from(b: Basis) -> Self {
        match b {
            Basis::Price => MomentBasis::Price,
            Basis::Returns => MomentBasis::Returns,
        }
    }
}

#[derive(Args, Debug)]
struct ExtractArgs {
    /// Chain CSV with header `strike,call`.
    #[arg(long)]
    chain: PathBuf,
    #[command(flatten)]
    market: MarketArgs,
    #[arg(long, value_enum, default_value_t = Method::Bl)]
    method: Method,
    /// Zero negative values and rescale to the discount factor.
    #[arg(long)]
    clip: bool,
    /// Discount factor for `--clip`; defaults to `exp(-rate * expiry)`.
    #[arg(long)]
    discount: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_RATE)]
    rate: f64,
    /// Output `state,value` CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct SmoothingArgs {
    /// Kernel width in log-state space.
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    /// Smallest width on a log ladder whose result is unimodal.
    #[arg(long, conflicts_with = "epsilon")]
    auto_epsilon: bool,
    /// Points of the log-uniform output grid.
    #[arg(long)]
    resample: Option<usize>,
}

#[derive(Args, Debug)]
struct SmoothArgs {
    /// Clipped SPD CSV.
    #[arg(long = "in")]
    input: PathBuf,
    /// Smoothed SPD CSV.
    #[arg(long)]
    out: PathBuf,
    /// Smoothed transform CSV `x,y`; defaults to the output path with `.transform.csv` appended.
    #[arg(long)]
    out_transform: Option<PathBuf>,
    #[command(flatten)]
    smoothing: SmoothingArgs,
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    #[command(flatten)]
    market: MarketArgs,
    /// Simple annual bond yield; the rate is `ln(1 + yield)`.
    #[arg(long = "yield")]
    annual_yield: Option<f64>,
    /// Rate used when no yield is given.
    #[arg(long, default_value_t = DEFAULT_RATE)]
    rate: f64,
    /// Spot at the start of the return window; the trend is `ln(spot / spot_then) / window`.
    #[arg(long)]
    spot_then: Option<f64>,
    /// Length of the return window in years.
    #[arg(long, default_value_t = 1.0)]
    window: f64,
    /// Trend override.
    #[arg(long)]
    mu: Option<f64>,
    /// Volatility; otherwise implied from the IQR of `--spd`.
    #[arg(long, conflicts_with = "spd")]
    sigma: Option<f64>,
    /// SPD CSV for IQR calibration of the volatility.
    #[arg(long)]
    spd: Option<PathBuf>,
    /// Output JSON; printed to stdout otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SourceArgs {
    /// Smoothed SPD CSV.
    #[arg(long, conflicts_with = "from_chain", required_unless_present = "from_chain")]
    spd: Option<PathBuf>,
    /// Chain CSV taken through extraction, clipping and smoothing first.
    #[arg(long)]
    from_chain: Option<PathBuf>,
    #[command(flatten)]
    market: MarketArgs,
    /// Extraction method for `--from-chain`.
    #[arg(long, value_enum, default_value_t = Method::Bl)]
    method: Method,
    /// Discount factor for `--from-chain`; defaults to `exp(-rate * expiry)`.
    #[arg(long)]
    discount: Option<f64>,
    #[command(flatten)]
    smoothing: SmoothingArgs,
}

#[derive(Args, Debug)]
struct BenchmarkArgs {
    #[arg(long, default_value_t = DEFAULT_RATE)]
    rate: f64,
    /// Benchmark volatility.
    #[arg(long, conflicts_with = "auto_sigma")]
    sigma: Option<f64>,
    /// Volatility from IQR matching against the SPD (the default).
    #[arg(long)]
    auto_sigma: bool,
    /// Start of the Euler window; defaults to the 0.5% risk-neutral quantile.
    #[arg(long)]
    x0: Option<f64>,
    /// End of the Euler window; defaults to the 99.5% risk-neutral quantile.
    #[arg(long)]
    x_end: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_STEPS)]
    steps: usize,
    /// Place `K(x0)` at this physical probability instead of quantile matching.
    #[arg(long)]
    normalize_quantile: Option<f64>,
    /// State variable of reported moments.
    #[arg(long, value_enum, default_value_t = Basis::Price)]
    basis: Basis,
}

#[derive(Args, Debug)]
struct RecoverArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    benchmark: BenchmarkArgs,
    /// Benchmark trend.
    #[arg(long, default_value_t = DEFAULT_MU)]
    mu: f64,
    /// Recovered density CSV.
    #[arg(long)]
    out_density: Option<PathBuf>,
    /// Moments JSON; printed to stdout when no output is named.
    #[arg(long)]
    out_moments: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    benchmark: BenchmarkArgs,
    /// Trends to sweep.
    #[arg(long, value_delimiter = ',', default_value = "0.0,0.05,0.094,0.15")]
    mus: Vec<f64>,
    /// Base trend fixing the market price of risk for `--equal-lambda`.
    #[arg(long, default_value_t = DEFAULT_MU)]
    mu: f64,
    /// Hold the market price of risk fixed, moving the volatility with the trend.
    #[arg(long)]
    equal_lambda: bool,
    /// Moments table CSV; printed to stdout otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory receiving one `density_mu_<mu>.csv` per trend.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RepriceArgs {
    /// SPD CSV.
    #[arg(long)]
    spd: PathBuf,
    /// Chain CSV supplying strikes and observed prices.
    #[arg(long)]
    chain: PathBuf,
    #[command(flatten)]
    market: MarketArgs,
    /// Scale model prices to match the observed price at this strike.
    #[arg(long)]
    reference_strike: Option<f64>,
    /// Output `strike,call` CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SelftestArgs {
    /// JSON report of every check.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            if err.chain().any(|e| e.is::<Usage>()) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    let target = cli.manifest;
    match cli.command {
        Command::Extract(a) => finish(extract_cmd(Run::new("extract", target), a)),
        Command::Smooth(a) => finish(smooth_cmd(Run::new("smooth", target), a)),
        Command::Calibrate(a) => finish(calibrate_cmd(Run::new("calibrate", target), a)),
        Command::Recover(a) => finish(recover_cmd(Run::new("recover", target), a)),
        Command::Sweep(a) => finish(sweep_cmd(Run::new("sweep", target), a)),
        Command::Reprice(a) => finish(reprice_cmd(Run::new("reprice", target), a)),
        Command::Selftest(a) => selftest_cmd(Run::new("selftest", target), a),
    }
}

fn finish(run: Result<Run>) -> Result<ExitCode> {
    run?.finish()?;
    Ok(ExitCode::SUCCESS)
}

fn sidecar_meta(chain: &Path) -> PathBuf {
    chain.with_extension("json")
}

/// Spot and expiry from flags, an explicit metadata file, or the chain's sidecar.
fn resolve_market(run: &mut Run, market: &MarketArgs, chain: Option<&Path>) -> Result<(f64, f64)> {
    if let (Some(s), Some(t)) = (market.spot, market.expiry) {
        return Ok((s, t));
    }
    let meta_path = market
        .meta
        .clone()
        .or_else(|| chain.map(sidecar_meta).filter(|p| p.exists()));
    let Some(path) = meta_path else {
        return Err(usage("spot and expiry are required: pass --spot and --expiry or --meta"));
    };
    let meta: ChainMeta = serde_json::from_str(&run.read(&path)?)
        .with_context(|| format!("market_data::ChainMeta: parsing {}", path.display()))?;
    Ok((market.spot.unwrap_or(meta.spot), market.expiry.unwrap_or(meta.expiry_years)))
}

fn load_chain(run: &mut Run, path: &Path, market: &MarketArgs) -> Result<OptionChain<f64>> {
    let (spot, expiry) = resolve_market(run, market, Some(path))?;
    let text = run.read(path)?;
    let chain = parse_chain(&text, spot, expiry).with_context(|| format!("market_data::parse_chain: {}", path.display()))?;
    let diag = validate_chain(&chain);
    if !diag.is_clean() {
        eprintln!(
            "warning: {} monotonicity and {} convexity violations in {}",
            diag.monotonicity_violations.len(),
            diag.convexity_violations.len(),
            path.display()
        );
    }
    Ok(chain)
}

fn load_spd(run: &mut Run, path: &Path) -> Result<GridDensity<f64>> {
    let text = run.read(path)?;
    density_from_csv(&text, DensityKind::Spd).with_context(|| format!("io::density_from_csv: {}", path.display()))
}

enum Estimate {
    Raw(RawSpd<f64>),
    Density(GridDensity<f64>),
}

fn estimate(chain: &OptionChain<f64>, method: Method) -> Result<Estimate> {
    Ok(match method {
        Method::Bl => Estimate::Raw(bl_raw_spd(chain).context("extract::bl_raw_spd")?),
        Method::Butterfly => {
            let system = butterfly_slopes(chain).context("extract::butterfly_slopes")?;
            Estimate::Raw(solve_slope_spd(&system).context("extract::solve_slope_spd")?)
        }
        Method::Nnls => Estimate::Density(nnls_spd_default(chain).context("extract::nnls_spd")?.density),
    })
}

fn clipped(est: Estimate, discount: f64) -> Result<GridDensity<f64>> {
    let raw = match est {
        Estimate::Raw(r) => r,
        Estimate::Density(d) => RawSpd::new(d.grid().to_vec(), d.values().to_vec()).context("extract::RawSpd")?,
    };
    clip_rescale(&raw, discount).context("extract::clip_rescale")
}

fn smooth_with(spd: &GridDensity<f64>, args: &SmoothingArgs) -> Result<Smoothed<f64>> {
    let mut cfg = SmoothingConfig::default().with_epsilon(args.epsilon);
    if let Some(n) = args.resample {
        cfg.resample_points = n;
    }
    if args.auto_epsilon {
        auto_epsilon(spd, &cfg, &default_epsilon_ladder(), DEFAULT_RIPPLE).context("smooth::auto_epsilon")
    } else {
        smooth_spd(spd, &cfg).context("smooth::smooth_spd")
    }
}

fn smoothing_config(s: &Smoothed<f64>, args: &SmoothingArgs) -> serde_json::Value {
    json!({
        "epsilon": s.epsilon,
        "auto_epsilon": args.auto_epsilon,
        "resample": s.density.grid().len(),
    })
}

fn extract_cmd(mut run: Run, a: ExtractArgs) -> Result<Run> {
    let chain = load_chain(&mut run, &a.chain, &a.market)?;
    let est = estimate(&chain, a.method)?;
    let discount = a.discount.unwrap_or((-a.rate * chain.expiry()).exp());
    let csv = if a.clip {
        density_to_csv(&clipped(est, discount)?)
    } else {
        match est {
            Estimate::Raw(r) => raw_spd_to_csv(&r),
            Estimate::Density(d) => density_to_csv(&d),
        }
    };
    run.write(&a.out, &csv)?;
    run.configure(json!({
        "chain": a.chain.display().to_string(),
        "spot": chain.spot(),
        "expiry": chain.expiry(),
        "method": a.method,
        "clip": a.clip,
        "discount": a.clip.then_some(discount),
        "rate": a.rate,
    }));
    Ok(run)
}

fn smooth_cmd(mut run: Run, a: SmoothArgs) -> Result<Run> {
    let spd = load_spd(&mut run, &a.input)?;
    let s = smooth_with(&spd, &a.smoothing)?;
    let transform_path = a.out_transform.clone().unwrap_or_else(|| {
        let mut name = a.out.as_os_str().to_owned();
        name.push(".transform.csv");
        PathBuf::from(name)
    });
    run.write(&a.out, &density_to_csv(&s.density))?;
    run.write(&transform_path, &transform_to_csv(&s.transform))?;
    let mut config = smoothing_config(&s, &a.smoothing);
    config["benchmark"] = json!({
        "log_location": s.benchmark.law.log_location,
        "log_scale": s.benchmark.law.log_scale,
        "discount": s.benchmark.discount,
    });
    run.configure(config);
    Ok(run)
}

fn calibrate_cmd(mut run: Run, a: CalibrateArgs) -> Result<Run> {
    let (spot, expiry) = resolve_market(&mut run, &a.market, None)?;
    let rate = match a.annual_yield {
        Some(y) => short_rate_from_yield(y).context("calibration::short_rate_from_yield")?,
        None => a.rate,
    };
    let trend = match (a.mu, a.spot_then) {
        (Some(mu), _) => mu,
        (None, Some(then)) => {
            if !(a.window > 0.0) {
                bail!("calibration: return window must be positive, got {}", a.window);
            }
            trend_from_returns(spot, then).context("calibration::trend_from_returns")? / a.window
        }
        (None, None) => DEFAULT_MU,
    };
    let sigma = match (a.sigma, &a.spd) {
        (Some(s), _) => s,
        (None, Some(path)) => {
            let spd = load_spd(&mut run, path)?;
            implied_sigma_by_iqr(&spd, spot, rate, expiry).context("calibration::implied_sigma_by_iqr")?
        }
        (None, None) => return Err(usage("calibrate needs --sigma or --spd")),
    };
    let params = BsmParams::new(spot, rate, trend, sigma, expiry).context("bsm::BsmParams")?;
    let text = serde_json::to_string_pretty(&params)? + "\n";
    match &a.out {
        Some(path) => run.write(path, &text)?,
        None => print!("{text}"),
    }
    run.configure(json!({
        "yield": a.annual_yield,
        "spot_then": a.spot_then,
        "window": a.window,
        "params": params,
    }));
    Ok(run)
}

/// Smoothed SPD with its spot and expiry, and the configuration that produced it.
struct Source {
    spd: GridDensity<f64>,
    spot: f64,
    expiry: f64,
    config: serde_json::Value,
}

fn load_source(run: &mut Run, src: &SourceArgs, rate: f64) -> Result<Source> {
    if let Some(path) = &src.from_chain {
        let chain = load_chain(run, path, &src.market)?;
        let discount = src.discount.unwrap_or((-rate * chain.expiry()).exp());
        let spd = clipped(estimate(&chain, src.method)?, discount)?;
        let s = smooth_with(&spd, &src.smoothing)?;
        let config = json!({
            "from_chain": path.display().to_string(),
            "method": src.method,
            "discount": discount,
            "smoothing": smoothing_config(&s, &src.smoothing),
        });
        return Ok(Source {
            spd: s.density,
            spot: chain.spot(),
            expiry: chain.expiry(),
            config,
        });
    }
    let path = src.spd.as_ref().expect("clap requires --spd or --from-chain");
    let (spot, expiry) = resolve_market(run, &src.market, None)?;
    Ok(Source {
        spd: load_spd(run, path)?,
        spot,
        expiry,
        config: json!({ "spd": path.display().to_string() }),
    })
}

fn benchmark_and_window(source: &Source, b: &BenchmarkArgs, mu: f64) -> Result<(BsmParams<f64>, RecoveryConfig<f64>)> {
    let sigma = match b.sigma {
        Some(s) => s,
        None => implied_sigma_by_iqr(&source.spd, source.spot, b.rate, source.expiry)
            .context("calibration::implied_sigma_by_iqr")?,
    };
    let params = BsmParams::new(source.spot, b.rate, mu, sigma, source.expiry).context("bsm::BsmParams")?;
    let x0 = match b.x0 {
        Some(x) => x,
        None => source.spd.quantile(DEFAULT_X0_LEVEL).context("density::quantile")?,
    };
    let x_end = match b.x_end {
        Some(x) => x,
        None => source.spd.quantile(DEFAULT_END_LEVEL).context("density::quantile")?,
    };
    if !(x_end > x0) {
        bail!("recovery::RecoveryConfig: window end {x_end} must exceed x0 {x0}");
    }
    if b.steps == 0 {
        return Err(usage("--steps must be at least 1"));
    }
    let mut cfg = RecoveryConfig::new(x0, (x_end - x0) / b.steps as f64, b.steps).context("recovery::RecoveryConfig")?;
    if let Some(p) = b.normalize_quantile {
        cfg = cfg.with_quantile_normalization(p);
        cfg.validate().context("recovery::RecoveryConfig")?;
    }
    Ok((params, cfg))
}

fn recovery_config(params: &BsmParams<f64>, cfg: &RecoveryConfig<f64>, b: &BenchmarkArgs) -> serde_json::Value {
    json!({
        "benchmark": params,
        "sigma_source": if b.sigma.is_some() { "flag" } else { "iqr" },
        "x0": cfg.x0,
        "step": cfg.step_h,
        "steps": cfg.steps_n,
        "normalize_quantile": cfg.quantile_normalization,
        "basis": match b.basis { Basis::Price => "price", Basis::Returns => "returns" },
    })
}

fn recover_cmd(mut run: Run, a: RecoverArgs) -> Result<Run> {
    let source = load_source(&mut run, &a.source, a.benchmark.rate)?;
    let (params, cfg) = benchmark_and_window(&source, &a.benchmark, a.mu)?;
    let rec = recover_ipd(&source.spd, &params, &cfg).context("recovery::recover_ipd")?;
    let moments = ipd_moments(&rec.density, params.spot, a.benchmark.basis.into()).context("recovery::ipd_moments")?;
    let moments_json = moments_to_json(&moments) + "\n";
    if let Some(path) = &a.out_density {
        run.write(path, &density_to_csv(&rec.density))?;
    }
    match &a.out_moments {
        Some(path) => run.write(path, &moments_json)?,
        None if a.out_density.is_none() => print!("{moments_json}"),
        None => {}
    }
    let mut config = recovery_config(&params, &cfg, &a.benchmark);
    config["source"] = source.config;
    run.configure(config);
    Ok(run)
}

fn sweep_cmd(mut run: Run, a: SweepArgs) -> Result<Run> {
    if a.mus.is_empty() {
        return Err(usage("--mus needs at least one value"));
    }
    let source = load_source(&mut run, &a.source, a.benchmark.rate)?;
    let (base, cfg) = benchmark_and_window(&source, &a.benchmark, a.mu)?;
    let family = if a.equal_lambda {
        SweepFamily::EqualMarketPriceOfRisk {
            lambda: base.market_price_of_risk(),
        }
    } else {
        SweepFamily::FixedSigma
    };
    let basis = a.benchmark.basis.into();
    let rows = if cfg.quantile_normalization.is_some() {
        normalize_quantiles(&source.spd, &base, &a.mus, &cfg, family, basis).context("recovery::normalize_quantiles")?
    } else {
        mu_sweep(&source.spd, &base, &a.mus, &cfg, family, basis)
    };
    for row in &rows {
        if let Err(e) = &row.outcome {
            eprintln!("warning: recovery::mu_sweep: mu {} failed: {e}", row.mu);
        }
    }
    if rows.iter().all(|r| r.outcome.is_err()) {
        bail!("recovery::mu_sweep: every trend failed");
    }
    if let Some(dir) = &a.out_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for row in &rows {
            if let Ok((rec, _)) = &row.outcome {
                run.write(&dir.join(format!("density_mu_{}.csv", row.mu)), &density_to_csv(&rec.density))?;
            }
        }
    }
    let table = sweep_to_csv(&rows);
    match &a.out {
        Some(path) => run.write(path, &table)?,
        None => print!("{table}"),
    }
    let mut config = recovery_config(&base, &cfg, &a.benchmark);
    config["source"] = source.config;
    config["mus"] = json!(a.mus);
    config["family"] = json!(family);
    run.configure(config);
    Ok(run)
}

fn reprice_cmd(mut run: Run, a: RepriceArgs) -> Result<Run> {
    let spd = load_spd(&mut run, &a.spd)?;
    let chain = load_chain(&mut run, &a.chain, &a.market)?;
    let strikes = chain.strikes();
    let (prices, factor) = match a.reference_strike {
        Some(k) => {
            let i = strikes
                .iter()
                .position(|&s| s == k)
                .ok_or_else(|| usage(format!("reference strike {k} is not a strike of the chain")))?;
            let c = reprice_calls_calibrated(&spd, strikes, k, chain.calls()[i]).context("extract::reprice_calls")?;
            (c.prices, Some(c.factor))
        }
        None => (reprice_calls(&spd, strikes).context("extract::reprice_calls")?, None),
    };
    let observed = chain.calls();
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let residual = norm(&mut prices.iter().zip(observed).map(|(p, c)| p - c)) / norm(&mut observed.iter().copied());
    eprintln!("relative repricing residual {residual:.6e}");
    let mut csv = String::from("strike,call\n");
    for (k, p) in strikes.iter().zip(&prices) {
        csv.push_str(&format!("{k},{p}\n"));
    }
    run.write(&a.out, &csv)?;
    run.configure(json!({
        "reference_strike": a.reference_strike,
        "factor": factor,
        "relative_residual": residual,
    }));
    Ok(run)
}

fn selftest_cmd(mut run: Run, a: SelftestArgs) -> Result<ExitCode> {
    let checks = ipd_core::selftest::run_all();
    for c in &checks {
        let mark = if c.passed { "PASS" } else { "FAIL" };
        if c.detail.is_empty() {
            println!("{mark} {}", c.name);
        } else {
            println!("{mark} {}: {}", c.name, c.detail);
        }
    }
    if let Some(path) = &a.out {
        run.write(path, &(serde_json::to_string_pretty(&checks)? + "\n"))?;
    }
    let passed = checks.iter().filter(|c| c.passed).count();
    run.configure(json!({ "checks": checks.len(), "passed": passed }));
    run.finish()?;
    Ok(if passed == checks.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}
