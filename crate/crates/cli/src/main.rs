//! pevsim command line: score deployments, search for good ones with the
//! genetic algorithm, verify against the exhaustive oracle, and generate
//! trip demand.
//!
//! Every command loads and validates all inputs before any compute starts,
//! writes its results under `--out`, and is deterministic given identical
//! inputs and seeds. Exit codes: 0 success, 1 runtime failure, 2 input or
//! validation error.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use pevsim::demand::{
    generate_trips, pair_counts, parse_trips, save_trips, DemandConfig, DemandError, Trip,
};
use pevsim::evaluation::{
    fitness, Deployment, EvalError, EvalParams, EvaluationReport,
};
use pevsim::network::{Network, NetworkError};
use pevsim::optimizer::{
    brute_force, run_ga, save_curve_csv, CurvePoint, GaConfig, OptimizerError,
    DEFAULT_BRUTE_FORCE_CAP,
};

#[derive(Parser)]
#[command(
    name = "pevsim",
    about = "Simulate PEV charging demand and site charging stations on road networks",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score a fixed station deployment against a trip set
    Evaluate(EvaluateArgs),
    /// Search for the best k-station deployment with the genetic algorithm
    Optimize(OptimizeArgs),
    /// Enumerate all k-subsets exhaustively and report the exact optimum
    Oracle(OracleArgs),
    /// Generate a seeded OD trip file from a demand config
    GenTrips(GenTripsArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Network JSON file
    #[arg(long, value_name = "PATH")]
    network: PathBuf,
    /// Trips JSON file
    #[arg(long, value_name = "PATH")]
    trips: PathBuf,
}

#[derive(Args)]
struct ParamArgs {
    /// Weight on detour energy when the PEV strands
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Weight on the energy of the unfinished route
    #[arg(long, default_value_t = 2.0)]
    beta: f64,
    /// SOC consumed per distance unit
    #[arg(long, default_value_t = 1.0)]
    rate: f64,
}

impl ParamArgs {
    fn to_params(&self) -> EvalParams {
        EvalParams { alpha: self.alpha, beta: self.beta, rate: self.rate }
    }
}

#[derive(Args)]
struct ThreadArgs {
    /// Worker threads for parallel scoring (default: available parallelism)
    #[arg(long, value_name = "INT")]
    threads: Option<usize>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Station node ids, 1-based, comma separated (e.g. 1,4)
    #[arg(long, value_name = "IDS", value_delimiter = ',', required = true)]
    stations: Vec<usize>,
    #[command(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    threads: ThreadArgs,
    /// Output directory (created if missing)
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct OptimizeArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Number of stations to deploy (must be below the node count)
    #[arg(long, value_name = "INT")]
    k: usize,
    #[command(flatten)]
    params: ParamArgs,
    /// Population size
    #[arg(long, value_name = "INT", default_value_t = 50)]
    pop: usize,
    /// Number of generations (including the initial population)
    #[arg(long, value_name = "INT", default_value_t = 200)]
    generations: usize,
    /// Crossover probability
    #[arg(long, value_name = "F", default_value_t = 0.8)]
    pc: f64,
    /// Mutation probability
    #[arg(long, value_name = "F", default_value_t = 0.1)]
    pm: f64,
    /// Crossover window length (default: max(2, N/5))
    #[arg(long, value_name = "INT")]
    window: Option<usize>,
    /// Disable carrying the best individual into the next generation
    #[arg(long)]
    no_elitism: bool,
    /// RNG seed; all randomness flows from it
    #[arg(long, value_name = "U64", default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    threads: ThreadArgs,
    /// Output directory (created if missing)
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Number of stations to deploy
    #[arg(long, value_name = "INT")]
    k: usize,
    #[command(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    threads: ThreadArgs,
    /// Output directory (created if missing)
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct GenTripsArgs {
    /// Network JSON file
    #[arg(long, value_name = "PATH")]
    network: PathBuf,
    /// Demand config JSON file
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory (created if missing)
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

/// Exit code 2: bad inputs or config. Exit code 1: failure while producing
/// outputs.
enum CliError {
    Input(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Runtime(m) => m,
        }
    }
}

impl From<NetworkError> for CliError {
    fn from(e: NetworkError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<DemandError> for CliError {
    fn from(e: DemandError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<OptimizerError> for CliError {
    fn from(e: OptimizerError) -> Self {
        CliError::Input(e.to_string())
    }
}

fn runtime(e: std::io::Error) -> CliError {
    CliError::Runtime(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Optimize(args) => cmd_optimize(args),
        Command::Oracle(args) => cmd_oracle(args),
        Command::GenTrips(args) => cmd_gen_trips(args),
    }
}

fn init_thread_pool(threads: &ThreadArgs) -> Result<(), CliError> {
    let Some(n) = threads.threads else { return Ok(()) };
    if n == 0 {
        return Err(CliError::Input("--threads must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Runtime(format!("thread pool setup failed: {e}")))
}

fn load_inputs(input: &InputArgs) -> Result<(Network, Vec<Trip>), CliError> {
    let net = Network::load_json(&input.network)?;
    let trips = parse_trips(&input.trips, &net)?;
    Ok((net, trips))
}

fn ensure_out_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(runtime)
}

fn station_list(ids: &[usize]) -> String {
    ids.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(",")
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<(), CliError> {
    init_thread_pool(&args.threads)?;
    let (net, trips) = load_inputs(&args.input)?;
    let params = args.params.to_params();
    params.validate()?;
    let internal_ids = args
        .stations
        .iter()
        .map(|&id| {
            id.checked_sub(1).ok_or_else(|| CliError::Input("station ids are 1-based".into()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let deployment = Deployment::new(internal_ids, &net)?;

    ensure_out_dir(&args.out)?;
    let report = EvaluationReport::build(&net, &trips, &deployment, &params);
    let report_path = args.out.join("evaluation.json");
    report.save_json(&report_path).map_err(runtime)?;

    println!("stations: {}", station_list(&report.stations));
    println!("total unsatisfied SOC: {}", report.total_unsatisfied_soc);
    println!("fit value: {}", report.fit_value);
    println!("report: {}", report_path.display());
    Ok(())
}

/// GA result file: config echo, best deployment (1-based ids), and the
/// fitness curve.
#[derive(Serialize, Deserialize)]
struct GaRunFile {
    config: GaConfig,
    alpha: f64,
    beta: f64,
    rate: f64,
    best_stations: Vec<usize>,
    best_unsatisfied_soc: f64,
    best_fit_value: f64,
    curve: Vec<CurvePoint>,
}

fn cmd_optimize(args: OptimizeArgs) -> Result<(), CliError> {
    init_thread_pool(&args.threads)?;
    let (net, trips) = load_inputs(&args.input)?;
    let params = args.params.to_params();
    params.validate()?;
    if args.k >= net.node_count() {
        return Err(CliError::Input(format!(
            "k must be below the node count ({}), got {}",
            net.node_count(),
            args.k
        )));
    }
    let cfg = GaConfig {
        pop_size: args.pop,
        generations: args.generations,
        pc: args.pc,
        pm: args.pm,
        window_len: args.window.unwrap_or_else(|| GaConfig::default_window_len(net.node_count())),
        k: args.k,
        elitism: !args.no_elitism,
        seed: args.seed,
    };
    cfg.validate(net.node_count())?;

    let result = run_ga(&net, &trips, &params, &cfg)?;

    ensure_out_dir(&args.out)?;
    let file = GaRunFile {
        config: cfg,
        alpha: params.alpha,
        beta: params.beta,
        rate: params.rate,
        best_stations: result.best.file_ids(),
        best_unsatisfied_soc: result.best_u,
        best_fit_value: fitness(result.best_u),
        curve: result.curve.clone(),
    };
    let result_path = args.out.join("ga_result.json");
    write_json(&result_path, &file)?;
    let curve_path = args.out.join("fitness_curve.csv");
    save_curve_csv(&result.curve, &curve_path).map_err(runtime)?;
    let dot_path = args.out.join("network.dot");
    std::fs::write(&dot_path, net.to_dot(result.best.stations())).map_err(runtime)?;

    println!("best stations: {}", station_list(&file.best_stations));
    println!("best unsatisfied SOC: {}", file.best_unsatisfied_soc);
    println!("fit value: {}", file.best_fit_value);
    println!("result: {}", result_path.display());
    println!("curve: {}", curve_path.display());
    println!("network plot: {}", dot_path.display());
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct OracleFile {
    k: usize,
    alpha: f64,
    beta: f64,
    rate: f64,
    stations: Vec<usize>,
    unsatisfied_soc: f64,
    fit_value: f64,
    /// Deployments enumerated, C(N,k).
    evaluated: usize,
}

fn cmd_oracle(args: OracleArgs) -> Result<(), CliError> {
    init_thread_pool(&args.threads)?;
    let (net, trips) = load_inputs(&args.input)?;
    let params = args.params.to_params();
    params.validate()?;

    let result = brute_force(&net, &trips, args.k, &params, DEFAULT_BRUTE_FORCE_CAP)?;

    ensure_out_dir(&args.out)?;
    let file = OracleFile {
        k: args.k,
        alpha: params.alpha,
        beta: params.beta,
        rate: params.rate,
        stations: result.best.file_ids(),
        unsatisfied_soc: result.best_u,
        fit_value: fitness(result.best_u),
        evaluated: result.evaluated,
    };
    let path = args.out.join("oracle.json");
    write_json(&path, &file)?;

    println!("optimal stations: {}", station_list(&file.stations));
    println!("unsatisfied SOC: {}", file.unsatisfied_soc);
    println!("deployments evaluated: {}", file.evaluated);
    println!("result: {}", path.display());
    Ok(())
}

fn cmd_gen_trips(args: GenTripsArgs) -> Result<(), CliError> {
    let net = Network::load_json(&args.network)?;
    let cfg = DemandConfig::load_json(&args.config)?;
    if cfg.trip_count == 0 {
        eprintln!("warning: trip_count is 0, writing an empty trip file");
    }
    let trips = generate_trips(&net, &cfg)?;

    ensure_out_dir(&args.out)?;
    let path = args.out.join("trips.json");
    save_trips(&trips, &path).map_err(|e| CliError::Runtime(e.to_string()))?;

    let counts = pair_counts(&net, &trips);
    let mut summary = String::new();
    for pair in DemandConfig::canonical_pairs() {
        let _ = writeln!(
            summary,
            "{}->{}: {}",
            pair.0.as_str(),
            pair.1.as_str(),
            counts[&pair]
        );
    }
    print!("{summary}");
    println!("wrote {} trips to {}", trips.len(), path.display());
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(runtime)
}
