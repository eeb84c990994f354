use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use collapse_sim::io::{
    parse_config_file, render_reports_text, write_reports_json, write_run_csv, write_run_json,
    write_spectrum_csv, RunOutput,
};
use collapse_sim::{
    absorption_oracle, asymptotic_selection_time, build_stat_matrix, eigen_spectrum,
    relaxation_times, run_checks, run_ensemble, CheckKind, ConformanceConfig, FluctuationParams,
    PhaseDist, RunConfig, TransitionScheme,
};

/// Environment variable that overrides the worker count of every command.
const WORKERS_ENV: &str = "COLLAPSE_SIM_WORKERS";

#[derive(Parser)]
#[command(
    name = "collapse-sim",
    version,
    about = "Monte Carlo simulator for norm-fluctuation collapse dynamics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a trajectory ensemble and write its statistics
    Run(RunArgs),
    /// Eigenvalues and relaxation times of the ensemble matrix
    Spectrum(SpectrumArgs),
    /// Run consistency checks against standard quantum statistics
    Conformance(ConformanceArgs),
    /// Exact absorption probability of the single-packet weight walk
    WalkOracle(WalkOracleArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Comma-separated initial weights, summing to 1
    #[arg(long)]
    weights: Option<String>,
    /// Comma-separated initial phases (default: all zero)
    #[arg(long)]
    phases: Option<String>,
    /// Fluctuation weight step
    #[arg(long)]
    epsilon: Option<f64>,
    /// Tick length (only scales reported times; default 1)
    #[arg(long)]
    tau: Option<f64>,
    /// Number of trajectories
    #[arg(long)]
    trajectories: Option<u64>,
    /// Master seed; trajectory i uses stream (seed, i)
    #[arg(long)]
    seed: Option<u64>,
    /// Per-trajectory step budget (default 1000000)
    #[arg(long)]
    max_steps: Option<u64>,
    /// Time-series sampling stride; 0 disables the series (default 0)
    #[arg(long)]
    record_every: Option<u64>,
    /// Phase-factor distribution: three-point | deterministic-real
    #[arg(long)]
    phase_dist: Option<String>,
    /// Output file
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format: json | csv (default json)
    #[arg(long)]
    format: Option<String>,
    /// Worker threads, 0 = auto; COLLAPSE_SIM_WORKERS overrides
    #[arg(long)]
    workers: Option<usize>,
    /// Key-value config file; explicit flags override its entries
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SpectrumArgs {
    /// Fluctuation weight step; 1/epsilon must be an integer
    #[arg(long)]
    epsilon: f64,
    /// Tick length (default 1)
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    /// Output CSV file
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ConformanceArgs {
    /// Check to run: axiom | nsf-means | psf-means | additivity | walk |
    /// spectral | all
    #[arg(long)]
    check: String,
    /// Fluctuation weight step
    #[arg(long)]
    epsilon: Option<f64>,
    /// Tick length (default 1)
    #[arg(long)]
    tau: Option<f64>,
    /// Samples/trajectories per stochastic check (default 10000)
    #[arg(long)]
    trajectories: Option<u64>,
    /// Master seed (default 0)
    #[arg(long)]
    seed: Option<u64>,
    /// Initial weights for the survival check (default: grid-aligned pair)
    #[arg(long)]
    weights: Option<String>,
    /// Phase-factor distribution (default three-point)
    #[arg(long)]
    phase_dist: Option<String>,
    /// Optional JSON report file
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads, 0 = auto; COLLAPSE_SIM_WORKERS overrides
    #[arg(long)]
    workers: Option<usize>,
    /// Key-value config file; explicit flags override its entries
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct WalkOracleArgs {
    /// Fluctuation weight step; 1/epsilon must be an integer
    #[arg(long)]
    epsilon: f64,
    /// Starting weight; must be a grid point m * epsilon
    #[arg(long)]
    start: f64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Spectrum(args) => cmd_spectrum(args),
        Command::Conformance(args) => cmd_conformance(args),
        Command::WalkOracle(args) => cmd_walk_oracle(args),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

/// File-backed defaults: a flag wins over a file entry, a file entry over
/// the built-in default.
struct FileConfig(BTreeMap<String, String>);

impl FileConfig {
    fn load(path: Option<&PathBuf>) -> Result<Self> {
        match path {
            Some(p) => Ok(Self(
                parse_config_file(p).with_context(|| format!("reading {}", p.display()))?,
            )),
            None => Ok(Self(BTreeMap::new())),
        }
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.0
            .get(key)
            .map(|raw| {
                raw.parse::<T>()
                    .map_err(|e| anyhow!("config key {key} = {raw:?}: {e}"))
            })
            .transpose()
    }
}

fn parse_f64_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|piece| {
            piece
                .trim()
                .parse::<f64>()
                .map_err(|e| anyhow!("invalid number {piece:?}: {e}"))
        })
        .collect()
}

fn resolve_workers(flag: Option<usize>) -> Result<usize> {
    if let Ok(raw) = std::env::var(WORKERS_ENV) {
        return raw
            .parse::<usize>()
            .map_err(|e| anyhow!("{WORKERS_ENV} = {raw:?}: {e}"));
    }
    Ok(flag.unwrap_or(0))
}

fn cmd_run(args: RunArgs) -> Result<ExitCode> {
    let file = FileConfig::load(args.config.as_ref())?;
    let weights_text: String = args
        .weights
        .or(file.get("weights")?)
        .ok_or_else(|| anyhow!("--weights is required"))?;
    let weights = parse_f64_list(&weights_text)?;
    let phases = match args.phases.or(file.get("phases")?) {
        Some(text) => parse_f64_list(&text)?,
        None => vec![0.0; weights.len()],
    };
    let epsilon: f64 = args
        .epsilon
        .or(file.get("epsilon")?)
        .ok_or_else(|| anyhow!("--epsilon is required"))?;
    let tau: f64 = args.tau.or(file.get("tau")?).unwrap_or(1.0);
    let trajectories: u64 = args
        .trajectories
        .or(file.get("trajectories")?)
        .ok_or_else(|| anyhow!("--trajectories is required"))?;
    let seed: u64 = args.seed.or(file.get("seed")?).unwrap_or(0);
    let max_steps: u64 = args
        .max_steps
        .or(file.get("max-steps")?)
        .unwrap_or(1_000_000);
    let record_every: u64 = args.record_every.or(file.get("record-every")?).unwrap_or(0);
    let phase_dist: PhaseDist = match args.phase_dist.or(file.get("phase-dist")?) {
        Some(text) => text.parse()?,
        None => PhaseDist::ThreePoint,
    };
    let out: PathBuf = args
        .out
        .or(file.get("out")?)
        .ok_or_else(|| anyhow!("--out is required"))?;
    let format: String = args
        .format
        .or(file.get("format")?)
        .unwrap_or_else(|| "json".to_string());
    let worker_count = resolve_workers(args.workers.or(file.get("workers")?))?;

    let config = RunConfig {
        params: FluctuationParams::new(epsilon, tau, phase_dist, seed)?,
        weights,
        phases,
        n_trajectories: trajectories,
        max_steps,
        record_every,
        worker_count,
    };
    config.validate()?;
    let stats = run_ensemble(&config)?;
    let output = RunOutput::new(&config, stats);
    match format.as_str() {
        "json" => write_run_json(&out, &output)?,
        "csv" => write_run_csv(&out, &output)?,
        other => bail!("unknown format {other:?}; expected json or csv"),
    }

    let freqs = output.stats.survival_frequencies();
    println!(
        "wrote {}: {} trajectories, {} resolved, survival frequencies {:?}",
        out.display(),
        output.stats.total_trajectories,
        output.stats.resolved,
        freqs
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_spectrum(args: SpectrumArgs) -> Result<ExitCode> {
    if args.tau <= 0.0 || args.tau.is_nan() {
        bail!("--tau must be positive");
    }
    let matrix = build_stat_matrix(args.epsilon)?;
    let spectrum = eigen_spectrum(&matrix)?;
    let times = relaxation_times(&spectrum, args.tau)?;
    write_spectrum_csv(&args.out, args.epsilon, args.tau, &spectrum, &times)?;
    let asymptotic = asymptotic_selection_time(args.epsilon, args.tau);
    println!(
        "wrote {}: {} eigenvalues, selection_time {}, ratio to tau/(2 eps^2) {}",
        args.out.display(),
        spectrum.eigenvalues().len(),
        times.selection_time,
        times.selection_time / asymptotic
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_conformance(args: ConformanceArgs) -> Result<ExitCode> {
    let file = FileConfig::load(args.config.as_ref())?;
    let kinds: Vec<CheckKind> = if args.check == "all" {
        CheckKind::ALL.to_vec()
    } else {
        vec![args.check.parse()?]
    };
    let epsilon: f64 = args
        .epsilon
        .or(file.get("epsilon")?)
        .ok_or_else(|| anyhow!("--epsilon is required"))?;
    let weights = match args.weights.or(file.get("weights")?) {
        Some(text) => Some(parse_f64_list(&text)?),
        None => None,
    };
    let phase_dist: PhaseDist = match args.phase_dist.or(file.get("phase-dist")?) {
        Some(text) => text.parse()?,
        None => PhaseDist::ThreePoint,
    };
    let config = ConformanceConfig {
        epsilon,
        tau: args.tau.or(file.get("tau")?).unwrap_or(1.0),
        trajectories: args
            .trajectories
            .or(file.get("trajectories")?)
            .unwrap_or(10_000),
        seed: args.seed.or(file.get("seed")?).unwrap_or(0),
        weights,
        phase_dist,
        worker_count: resolve_workers(args.workers.or(file.get("workers")?))?,
    };
    let reports = run_checks(&kinds, &config)?;
    print!("{}", render_reports_text(&reports));
    if let Some(out) = &args.out {
        write_reports_json(out, &reports)?;
    }
    if reports.iter().all(|r| r.pass) {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(1))
    }
}

fn cmd_walk_oracle(args: WalkOracleArgs) -> Result<ExitCode> {
    let scheme = TransitionScheme::combined(args.epsilon)?;
    let probability = absorption_oracle(&scheme, args.start)?;
    println!("absorption probability at weight 1: {probability}");
    println!(
        "deviation from start weight: {:e}",
        (probability - args.start).abs()
    );
    Ok(ExitCode::SUCCESS)
}
