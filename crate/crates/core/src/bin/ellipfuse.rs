use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use ellipfuse::config::{
    load_config, parse_document, ConfigError, LoadedConfig, MonteCarloConfig, RunMethod,
    ScenarioConfig,
};
use ellipfuse::counterexample::{self, DEFAULT_RESOLUTION};
use ellipfuse::fusion::{fuse, fuse_at, overlap_test, AlphaCriterion, FusionMethod};
use ellipfuse::montecarlo::{run_montecarlo, MonteCarloError};
use ellipfuse::netsim::{run_scenario, SimError, StepRecord};
use ellipfuse::report::{write_csv, write_csv_file};
use ellipfuse::{Ellipsoid, Error};

const EXIT_VALIDATION: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;
const EXIT_PARSE: u8 = 5;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(
    name = "ellipfuse",
    version,
    about = "Ellipsoidal fusion for bearing-only target localization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fuse two ellipsoids given as {"first": E, "second": E}.
    Fuse {
        /// Inline pair JSON; alternative to --config.
        pair: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        method: FusionMethod,
        /// Fixed combination weight; optimized when omitted.
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value = "det")]
        criterion: AlphaCriterion,
    },
    /// Run a scenario once per method and write the per-step CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory for steps.csv; CSV goes to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Run only this method instead of the configured list.
        #[arg(long)]
        method: Option<RunMethod>,
        #[arg(long)]
        criterion: Option<AlphaCriterion>,
    },
    /// Randomized repetitions; writes final_errors.csv, summary.csv and histogram.csv.
    Montecarlo {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        runs: Option<u64>,
        #[arg(long)]
        method: Option<RunMethod>,
        #[arg(long)]
        criterion: Option<AlphaCriterion>,
    },
    /// Search random prior pairs for CI/ICI set-property violations.
    Counterexample {
        /// Number of trials.
        #[arg(long, default_value_t = 10_000)]
        runs: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Grid resolution of the membership checks.
        #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
        resolution: usize,
        /// Directory for counterexample.json; the report is always printed.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug)]
struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
    pointer: Option<String>,
}

impl Failure {
    fn new(code: u8, kind: &'static str, message: impl Into<String>) -> Self {
        Self {
            code,
            kind,
            message: message.into(),
            pointer: None,
        }
    }

    fn io(path: &Path, err: io::Error) -> Self {
        Self::new(EXIT_IO, "io", format!("{}: {err}", path.display()))
    }
}

impl From<ConfigError> for Failure {
    fn from(err: ConfigError) -> Self {
        match err {
            ConfigError::Io { .. } => Self::new(EXIT_IO, "io", err.to_string()),
            ConfigError::Parse(_) => Self::new(EXIT_PARSE, "parse", err.to_string()),
            ConfigError::Validation {
                ref pointer,
                ref message,
            } => Self {
                code: EXIT_VALIDATION,
                kind: "validation",
                message: message.clone(),
                pointer: Some(pointer.clone()),
            },
        }
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        let code = match err {
            Error::InvalidMatrix(_) | Error::Parameter(_) => EXIT_VALIDATION,
            Error::DisjointSets { .. } | Error::DegenerateGeometry(_) => EXIT_NUMERICAL,
        };
        Self::new(code, err.kind(), err.to_string())
    }
}

impl From<SimError> for Failure {
    fn from(err: SimError) -> Self {
        match err {
            SimError::Config(e) => e.into(),
            SimError::Numerical { .. } => Self::new(EXIT_NUMERICAL, "numerical", err.to_string()),
        }
    }
}

impl From<MonteCarloError> for Failure {
    fn from(err: MonteCarloError) -> Self {
        match err {
            MonteCarloError::Config(e) => e.into(),
            MonteCarloError::Simulation { source, .. } => source.into(),
            MonteCarloError::Rejection { .. } => {
                Self::new(EXIT_NUMERICAL, "rejection", err.to_string())
            }
            MonteCarloError::Pool(_) => Self::new(1, "pool", err.to_string()),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Pair {
    first: Ellipsoid,
    second: Ellipsoid,
}

#[derive(Serialize)]
struct FuseReport {
    method: FusionMethod,
    #[serde(flatten)]
    outcome: ellipfuse::FusionOutcome,
    det: f64,
    overlapping: bool,
}

fn threads() -> Result<usize, Failure> {
    match std::env::var("ELLIPFUSE_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(Failure::new(
                EXIT_VALIDATION,
                "validation",
                format!("ELLIPFUSE_THREADS must be a positive integer, got {v:?}"),
            )),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::io(path, e))
}

fn create_dir(path: &Path) -> Result<(), Failure> {
    fs::create_dir_all(path).map_err(|e| Failure::io(path, e))
}

fn print_json(value: &impl Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).expect("report types serialize");
    writeln!(io::stdout(), "{text}").map_err(|e| Failure::io(Path::new("<stdout>"), e))
}

fn scenario(path: &Path) -> Result<ScenarioConfig, Failure> {
    match load_config(path)? {
        LoadedConfig::Scenario(sc) => Ok(sc),
        LoadedConfig::MonteCarlo(_) => Err(ConfigError::validation(
            "/base",
            "expected a scenario, found a Monte Carlo config",
        )
        .into()),
    }
}

fn montecarlo_config(path: &Path) -> Result<MonteCarloConfig, Failure> {
    match load_config(path)? {
        LoadedConfig::MonteCarlo(mc) => Ok(mc),
        LoadedConfig::Scenario(_) => Err(ConfigError::validation(
            "/base",
            "expected a Monte Carlo config with a base scenario",
        )
        .into()),
    }
}

fn cmd_fuse(
    pair: Option<String>,
    config: Option<PathBuf>,
    method: FusionMethod,
    alpha: Option<f64>,
    criterion: AlphaCriterion,
) -> Result<(), Failure> {
    let text = match (pair, config) {
        (Some(inline), None) => inline,
        (None, Some(path)) => read(&path)?,
        _ => {
            return Err(Failure::new(
                EXIT_USAGE,
                "usage",
                "give the pair either inline or with --config",
            ))
        }
    };
    let Pair { first, second } = parse_document(&text)?;
    let outcome = match alpha {
        Some(a) if method == FusionMethod::Kalman => {
            return Err(Error::Parameter(format!("kalman fusion takes no alpha, got {a}")).into());
        }
        Some(a) => fuse_at(method, &first, &second, a)?,
        None => fuse(method, &first, &second, criterion)?,
    };
    print_json(&FuseReport {
        method,
        det: outcome.estimate.shape.det(),
        overlapping: overlap_test(&first, &second).overlapping,
        outcome,
    })
}

fn cmd_simulate(
    config: &Path,
    out: Option<PathBuf>,
    seed: Option<u64>,
    method: Option<RunMethod>,
    criterion: Option<AlphaCriterion>,
) -> Result<(), Failure> {
    let mut sc = scenario(config)?;
    if let Some(c) = criterion {
        sc.alpha_criterion = c;
    }
    let seed = seed.unwrap_or(sc.seed);
    let methods = method.map_or_else(|| sc.methods.clone(), |m| vec![m]);

    let mut records: Vec<StepRecord> = Vec::new();
    let mut runs = Vec::new();
    for m in methods {
        let log = run_scenario(&sc, m, seed, 0)?;
        runs.push(json!({
            "method": m,
            "noise_checksum": log.noise_checksum,
            "final_err_m": log.final_records().map(|r| r.err_m).collect::<Vec<_>>(),
        }));
        records.extend(log.records);
    }

    match out {
        Some(dir) => {
            create_dir(&dir)?;
            let path = dir.join("steps.csv");
            write_csv_file(&path, &records).map_err(|e| Failure::io(&path, e))?;
            print_json(&json!({ "seed": seed, "steps_csv": path, "runs": runs }))
        }
        None => write_csv(io::stdout().lock(), &records)
            .map_err(|e| Failure::io(Path::new("<stdout>"), e)),
    }
}

fn cmd_montecarlo(
    config: &Path,
    out: &Path,
    seed: Option<u64>,
    runs: Option<u64>,
    method: Option<RunMethod>,
    criterion: Option<AlphaCriterion>,
) -> Result<(), Failure> {
    let mut mc = montecarlo_config(config)?;
    if let Some(r) = runs {
        mc.runs = r;
    }
    if let Some(m) = method {
        mc.base.methods = vec![m];
    }
    if let Some(c) = criterion {
        mc.base.alpha_criterion = c;
    }
    let seed = seed.unwrap_or(mc.base.seed);
    let result = run_montecarlo(&mc, seed, threads()?)?;

    create_dir(out)?;
    let summary: Vec<_> = result.summaries.iter().map(|s| s.row()).collect();
    let histogram: Vec<_> = result
        .summaries
        .iter()
        .flat_map(|s| s.histogram_rows())
        .collect();
    for (name, res) in [
        (
            "final_errors.csv",
            write_csv_file(&out.join("final_errors.csv"), &result.finals),
        ),
        (
            "summary.csv",
            write_csv_file(&out.join("summary.csv"), &summary),
        ),
        (
            "histogram.csv",
            write_csv_file(&out.join("histogram.csv"), &histogram),
        ),
    ] {
        res.map_err(|e| Failure::io(&out.join(name), e))?;
    }
    print_json(&json!({ "seed": seed, "runs": mc.runs, "summary": summary }))
}

fn cmd_counterexample(
    runs: u64,
    seed: u64,
    resolution: usize,
    out: Option<PathBuf>,
) -> Result<(), Failure> {
    if runs == 0 {
        return Err(ConfigError::validation("/trials", "must be at least 1").into());
    }
    if resolution < 11 {
        return Err(ConfigError::validation("/resolution", "must be at least 11").into());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads()?)
        .build()
        .map_err(|e| Failure::new(1, "pool", e.to_string()))?;
    let report = pool.install(|| counterexample::search(runs, seed, resolution));
    if let Some(dir) = out {
        create_dir(&dir)?;
        let path = dir.join("counterexample.json");
        let text = serde_json::to_string_pretty(&report).expect("report serializes");
        fs::write(&path, text + "\n").map_err(|e| Failure::io(&path, e))?;
    }
    print_json(&report)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Fuse {
            pair,
            config,
            method,
            alpha,
            criterion,
        } => cmd_fuse(pair, config, method, alpha, criterion),
        Command::Simulate {
            config,
            out,
            seed,
            method,
            criterion,
        } => cmd_simulate(&config, out, seed, method, criterion),
        Command::Montecarlo {
            config,
            out,
            seed,
            runs,
            method,
            criterion,
        } => cmd_montecarlo(&config, &out, seed, runs, method, criterion),
        Command::Counterexample {
            runs,
            seed,
            resolution,
            out,
        } => cmd_counterexample(runs, seed, resolution, out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let mut body = json!({ "error": f.kind, "message": f.message });
            if let Some(p) = f.pointer {
                body["pointer"] = json!(p);
            }
            eprintln!("{body}");
            ExitCode::from(f.code)
        }
    }
}
