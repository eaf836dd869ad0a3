//! `xva` — command-line interface for regime estimation, regime simulation,
//! parameter checks, reference pricing, XVA pricing, and sweeps.
//!
//! Every stochastic quantity derives from the single root seed echoed in
//! the effective configuration, and results are independent of
//! `--threads`.

mod config;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use config::{load_config, RunConfig};
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use xva_core::generators::check_assumptions;
use xva_core::market::bs_price_delta;
use xva_core::regime::simulate_regime_paths;
use xva_core::regime_estimation::{
    estimate_means, load_series, segment_with_initial, RegimeLabel, ThresholdRule,
};
use xva_core::xva::{price_xva, sweep as run_sweep, write_sweep_csv, write_sweep_plot_script};

#[derive(Parser)]
#[command(
    name = "xva",
    version,
    about = "XVA pricing under regime-switching market illiquidity"
)]
struct Cli {
    /// JSON run configuration; omitted sections fall back to the benchmark.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed override for all randomness.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default: $XVA_OUT_DIR or the working directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override a config value by dotted path, e.g. `market.volatility=0.4`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Cap the worker-thread count; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment a stress-index CSV and estimate regime lengths.
    EstimateRegimes(EstimateArgs),
    /// Simulate regime paths and export their switch times.
    SimulateRegime(SimulateArgs),
    /// Evaluate the no-arbitrage and well-posedness parameter checks.
    CheckAssumptions,
    /// Price the reference claim in closed form.
    BsPrice,
    /// Price both XVA sides and write the full report.
    PriceXva,
    /// Run the configured parameter sweep.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct EstimateArgs {
    /// Input CSV with header `date,value` (value in basis points).
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = RuleKind::Single)]
    rule: RuleKind,
    /// Exit threshold (and the single-rule threshold), basis points.
    #[arg(long, default_value_t = 48.0)]
    lower: f64,
    /// Entry threshold for the hysteresis rule, basis points.
    #[arg(long, default_value_t = 80.0)]
    upper: f64,
    /// Force the initial label instead of inferring it from the first
    /// observation.
    #[arg(long, value_enum)]
    initial: Option<InitialLabel>,
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleKind {
    Single,
    Hysteresis,
}

#[derive(Clone, Copy, ValueEnum)]
enum InitialLabel {
    Normal,
    Crisis,
}

#[derive(Args)]
struct SimulateArgs {
    /// Horizon in years.
    #[arg(long, default_value_t = 1.0)]
    horizon: f64,
    /// Number of independent paths.
    #[arg(long = "paths", default_value_t = 1)]
    n_paths: usize,
}

#[derive(Args)]
struct SweepArgs {
    /// Override the sweep axis from the config.
    #[arg(long)]
    axis: Option<String>,
    /// Override the sweep grid, comma-separated.
    #[arg(long)]
    grid: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: configuring {threads} threads: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    let mut config = load_config(cli.config.as_deref(), &cli.sets)?;
    if let Some(seed) = cli.seed {
        config.solver.seed = seed;
    }
    let out_dir = cli
        .out
        .or_else(|| config.io.out_dir.clone().map(PathBuf::from))
        .or_else(|| std::env::var("XVA_OUT_DIR").ok().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;

    println!("effective-config: {}", serde_json::to_string(&config)?);

    match cli.command {
        Command::EstimateRegimes(args) => estimate_regimes(&config, &args, &out_dir),
        Command::SimulateRegime(args) => simulate_regime(&config, &args, &out_dir),
        Command::CheckAssumptions => check_assumptions_cmd(&config, &out_dir),
        Command::BsPrice => bs_price(&config),
        Command::PriceXva => price_xva_cmd(&config, &out_dir),
        Command::Sweep(args) => sweep_cmd(&config, &args, &out_dir),
    }
}

/// Writes a file atomically: to a sibling temp path, then rename.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("out")
    ));
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

fn estimate_regimes(config: &RunConfig, args: &EstimateArgs, out_dir: &Path) -> Result<u8> {
    let input = args
        .input
        .clone()
        .or_else(|| config.io.input.clone().map(PathBuf::from))
        .ok_or_else(|| anyhow!("estimate-regimes needs --input or io.input"))?;
    let file = fs::File::open(&input).with_context(|| format!("opening {}", input.display()))?;
    let loaded = load_series(BufReader::new(file))?;
    if loaded.was_unsorted {
        eprintln!("warning: input rows were out of order; sorted by date");
    }
    if loaded.dropped_rows > 0 {
        eprintln!(
            "note: dropped {} rows with missing values",
            loaded.dropped_rows
        );
    }

    let rule = match args.rule {
        RuleKind::Single => ThresholdRule::Single { lower: args.lower },
        RuleKind::Hysteresis => ThresholdRule::Hysteresis {
            lower: args.lower,
            upper: args.upper,
        },
    };
    let initial = args.initial.map(|i| match i {
        InitialLabel::Normal => RegimeLabel::Normal,
        InitialLabel::Crisis => RegimeLabel::Crisis,
    });
    let segments = segment_with_initial(&loaded.series, &rule, initial)?;
    let estimates = estimate_means(&segments);

    let mut seg_csv = Vec::new();
    xva_core::regime_estimation::write_segments_csv(&segments, &mut seg_csv)?;
    write_atomic(&out_dir.join("segments.csv"), &seg_csv)?;
    let mut est_csv = Vec::new();
    xva_core::regime_estimation::write_estimates_csv(&estimates, &mut est_csv)?;
    write_atomic(&out_dir.join("estimates.csv"), &est_csv)?;

    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.2}")).unwrap_or_else(|| "-".into());
    println!(
        "segments: {} normal / {} crisis; mean lengths {} / {} days ({} / {} years)",
        estimates.count_normal,
        estimates.count_crisis,
        fmt(estimates.mean_normal_days),
        fmt(estimates.mean_crisis_days),
        fmt(estimates.mean_normal_years),
        fmt(estimates.mean_crisis_years),
    );
    println!(
        "wrote {} and {}",
        out_dir.join("segments.csv").display(),
        out_dir.join("estimates.csv").display()
    );
    Ok(0)
}

fn simulate_regime(config: &RunConfig, args: &SimulateArgs, out_dir: &Path) -> Result<u8> {
    if args.n_paths == 0 {
        bail!("--paths must be at least 1");
    }
    let params = config.dynamic_regime_params();
    let paths = simulate_regime_paths(&params, args.horizon, config.solver.seed, args.n_paths)?;
    let mut csv = Vec::new();
    xva_core::regime::write_paths_csv(&paths, &mut csv)?;
    write_atomic(&out_dir.join("regime_paths.csv"), &csv)?;
    let total_jumps: usize = paths.iter().map(|p| p.jump_times.len()).sum();
    println!(
        "simulated {} paths over {} years ({} switches); wrote {}",
        args.n_paths,
        args.horizon,
        total_jumps,
        out_dir.join("regime_paths.csv").display()
    );
    Ok(0)
}

fn check_assumptions_cmd(config: &RunConfig, out_dir: &Path) -> Result<u8> {
    let report = check_assumptions(&config.market, config.claim.maturity);
    print!("{}", report.render_text());
    let json = serde_json::to_string_pretty(&report)?;
    write_atomic(&out_dir.join("check_report.json"), json.as_bytes())?;
    println!("wrote {}", out_dir.join("check_report.json").display());
    Ok(if report.necessary_passed { 0 } else { 1 })
}

fn bs_price(config: &RunConfig) -> Result<u8> {
    let point = bs_price_delta(&config.market, &config.claim, 0.0, config.claim.spot)?;
    println!(
        "reference value {:.6}  delta {:.6}  z_hat {:.6}",
        point.value, point.delta, point.z_hat
    );
    Ok(0)
}

fn price_xva_cmd(config: &RunConfig, out_dir: &Path) -> Result<u8> {
    let report = price_xva(
        &config.market,
        &config.claim,
        &config.regime,
        &config.solver,
    )?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "xva_plus {:.8} (se {:.2e})  xva_minus {:.8} (se {:.2e})  reference {:.6}  [{}]",
        report.xva_plus.value,
        report.xva_plus.std_error,
        report.xva_minus.value,
        report.xva_minus.std_error,
        report.bs_reference,
        report.regime_mode,
    );
    let json = serde_json::to_string_pretty(&report)?;
    write_atomic(&out_dir.join("xva_report.json"), json.as_bytes())?;
    println!("wrote {}", out_dir.join("xva_report.json").display());
    Ok(0)
}

fn sweep_cmd(config: &RunConfig, args: &SweepArgs, out_dir: &Path) -> Result<u8> {
    let mut spec = config
        .sweep
        .clone()
        .unwrap_or_else(|| xva_core::xva::SweepSpec {
            axis: xva_core::xva::SweepAxis::Alpha,
            grid: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            regime_mode: config.regime.clone(),
        });
    if let Some(axis) = &args.axis {
        spec.axis = serde_json::from_value(serde_json::Value::String(axis.clone()))
            .map_err(|_| anyhow!("unknown axis `{axis}`"))?;
    }
    if let Some(grid) = &args.grid {
        spec.grid = grid
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| anyhow!("bad grid value `{s}`: {e}"))
            })
            .collect::<Result<Vec<f64>>>()?;
    }
    let rows = run_sweep(&spec, &config.market, &config.claim, &config.solver)?;
    let mut csv = Vec::new();
    write_sweep_csv(&rows, &mut csv)?;
    write_atomic(&out_dir.join("sweep.csv"), &csv)?;
    let mut plot = Vec::new();
    write_sweep_plot_script("sweep.csv", &mut plot)?;
    write_atomic(&out_dir.join("sweep.gnuplot"), &plot)?;
    let failed = rows.iter().filter(|r| r.status != "ok").count();
    println!(
        "swept {} points ({} failed); wrote {} and {}",
        rows.len(),
        failed,
        out_dir.join("sweep.csv").display(),
        out_dir.join("sweep.gnuplot").display()
    );
    Ok(0)
}
