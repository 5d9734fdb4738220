use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use consult_match::analytics::{self, EstimateResult, Variation};
use consult_match::harness::{self, ExperimentConfig, HarnessError, OutputFormat};
use consult_match::market_model::{
    generate_random_market, load_market, store_market, validate_market,
};
use consult_match::mechanisms::{run_mechanism, tomhecs};
use consult_match::stability_oracle::{self, OracleError};
use consult_match::{ListLength, Market, Mechanism, Side};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(
    name = "match",
    version,
    about = "Two-sided patient/doctor matching experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment grid from a JSON or TOML config.
    Run(RunArgs),
    /// Check the deferred-acceptance outcome of a market file against the brute-force oracles.
    Check {
        property: Property,
        #[arg(long)]
        market: PathBuf,
        #[arg(long, default_value = "patient")]
        proposer: Side,
        /// Mechanism to check (stability only).
        #[arg(long, default_value = "tomhecs")]
        mechanism: Mechanism,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Monte Carlo estimates for the analytic results.
    Analytics {
        estimate: Estimate,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Rejection probability (lemma6, lemma7).
        #[arg(long, default_value_t = 0.5)]
        p: f64,
    },
    /// Write a random market as JSON.
    Generate {
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long)]
        patients: usize,
        #[arg(long)]
        doctors: usize,
        /// Partial list length; full lists when absent.
        #[arg(long)]
        list_length: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Replaces the configured mechanisms; repeatable.
    #[arg(long)]
    mechanism: Vec<Mechanism>,
    /// Proposing side.
    #[arg(long)]
    side: Option<Side>,
    /// Replaces the configured presets; repeatable.
    #[arg(long)]
    variation: Vec<Variation>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<Format>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Property {
    Stability,
    Optimality,
    Truthfulness,
}

#[derive(Clone, Copy, ValueEnum)]
enum Estimate {
    Lemma4,
    Lemma5,
    Lemma6,
    Lemma7,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

enum Failure {
    Validation(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Io(_) => 2,
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        if e.is_io() {
            Failure::Io(e.to_string())
        } else {
            Failure::Validation(e.to_string())
        }
    }
}

fn invalid(e: impl ToString) -> Failure {
    Failure::Validation(e.to_string())
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn write_out(path: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, bytes).map_err(|e| Failure::Io(format!("{}: {e}", p.display()))),
        None => io::stdout()
            .write_all(bytes)
            .map_err(|e| Failure::Io(e.to_string())),
    }
}

fn print_json(value: &Value) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(invalid)?;
    text.push('\n');
    write_out(None, text.as_bytes())
}

fn load_config(path: &Path) -> Result<ExperimentConfig, Failure> {
    let bytes = read(path)?;
    let text = String::from_utf8(bytes).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    let parsed = if path.extension().is_some_and(|e| e == "toml") {
        toml::from_str(&text).map_err(|e| e.to_string())
    } else {
        serde_json::from_str(&text).map_err(|e| e.to_string())
    };
    parsed.map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn load_market_file(path: &Path) -> Result<Market, Failure> {
    let market =
        load_market(&read(path)?).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    let violations = validate_market(&market);
    if !violations.is_empty() {
        let list: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(invalid(format!("{}: {}", path.display(), list.join("; "))));
    }
    Ok(market)
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let mut config = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if !args.mechanism.is_empty() {
        config.mechanisms = args.mechanism;
    }
    if let Some(side) = args.side {
        config.proposing_side = side;
    }
    if !args.variation.is_empty() {
        config.presets = args.variation;
    }
    if let Some(reps) = args.reps {
        config.repetitions = reps;
    }
    if let Some(out) = args.out {
        config.output = Some(out);
    }
    if let Some(format) = args.format {
        config.format = match format {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        };
    }
    match &config.output {
        Some(_) => {
            let output = harness::run_to_files(&config)?;
            let summary = harness::summarize(&output.rows)?;
            print_json(&serde_json::to_value(summary).map_err(invalid)?)
        }
        None => {
            if config.persist_matchings {
                return Err(invalid("persist_matchings needs an output path"));
            }
            let output = harness::run_experiment(&config)?;
            harness::emit(&output.rows, config.format, io::stdout().lock())?;
            Ok(())
        }
    }
}

fn oracle_failure(e: OracleError) -> Failure {
    invalid(e)
}

fn check(
    property: Property,
    market: &Market,
    proposer: Side,
    mechanism: Mechanism,
    seed: u64,
) -> Result<(), Failure> {
    let mut passed = true;
    let mut categories = Vec::new();
    match property {
        Property::Stability => {
            let (matching, _) =
                run_mechanism(market, mechanism, proposer, seed).map_err(invalid)?;
            for (cm, m) in market.categories.iter().zip(&matching.categories) {
                let blocking =
                    stability_oracle::find_blocking_pairs(cm, m).map_err(oracle_failure)?;
                passed &= blocking.is_empty();
                let pairs: Vec<String> = blocking
                    .iter()
                    .map(|b| format!("({}, {})", b.patient, b.doctor))
                    .collect();
                categories.push(json!({ "category": cm.category, "blocking_pairs": pairs }));
            }
        }
        Property::Optimality => {
            let (matching, _) = tomhecs(market, proposer).map_err(invalid)?;
            for (cm, m) in market.categories.iter().zip(&matching.categories) {
                let optimal = stability_oracle::check_requesting_party_optimal(cm, m, proposer)
                    .map_err(oracle_failure)?;
                passed &= optimal;
                categories.push(json!({ "category": cm.category, "optimal": optimal }));
            }
        }
        Property::Truthfulness => {
            for cm in &market.categories {
                let reports = stability_oracle::check_truthfulness_exhaustive(cm, proposer)
                    .map_err(oracle_failure)?;
                let tried: usize = reports.iter().map(|r| r.misreports_tried).sum();
                let improving: Vec<String> = reports
                    .iter()
                    .filter(|r| !r.is_truthful())
                    .map(|r| r.agent.to_string())
                    .collect();
                passed &= improving.is_empty();
                categories.push(json!({
                    "category": cm.category,
                    "misreports_tried": tried,
                    "improving_agents": improving,
                }));
            }
        }
    }
    print_json(&json!({ "passed": passed, "proposer": proposer, "categories": categories }))?;
    if passed {
        Ok(())
    } else {
        Err(invalid("check failed"))
    }
}

fn estimate(which: Estimate, n: usize, trials: usize, seed: u64, p: f64) -> Result<(), Failure> {
    let (result, reference): (EstimateResult, Value) = match which {
        Estimate::Lemma4 => (
            analytics::estimate_first_pick_distance(n, trials, seed).map_err(invalid)?,
            json!({ "expected": (n as f64 - 1.0) / 2.0 }),
        ),
        Estimate::Lemma5 => (
            analytics::estimate_total_distance(n, trials, seed).map_err(invalid)?,
            json!({ "lower_bound": (n * n) as f64 / 16.0 }),
        ),
        Estimate::Lemma6 => (
            analytics::simulate_geometric_rejections(p, n, trials, seed).map_err(invalid)?,
            json!({ "expected": analytics::geometric_partial_sum(p, n), "limit": 1.0 / (1.0 - p) }),
        ),
        Estimate::Lemma7 => (
            analytics::simulate_total_rejections(p, n, trials, seed).map_err(invalid)?,
            json!({ "expected": n as f64 * analytics::geometric_partial_sum(p, n) }),
        ),
    };
    let mut value = serde_json::to_value(&result).map_err(invalid)?;
    value["reference"] = reference;
    print_json(&value)
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run(args) => run(args),
        Command::Check {
            property,
            market,
            proposer,
            mechanism,
            seed,
        } => {
            let market = load_market_file(&market)?;
            check(property, &market, proposer, mechanism, seed)
        }
        Command::Analytics {
            estimate: which,
            n,
            trials,
            seed,
            p,
        } => estimate(which, n, trials, seed, p),
        Command::Generate {
            k,
            patients,
            doctors,
            list_length,
            seed,
            out,
        } => {
            let length = list_length.map_or(ListLength::Full, ListLength::Partial);
            let market =
                generate_random_market(k, patients, doctors, length, seed).map_err(invalid)?;
            write_out(out.as_deref(), &store_market(&market).map_err(invalid)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            let (Failure::Validation(msg) | Failure::Io(msg)) = &failure;
            eprintln!("error: {msg}");
            ExitCode::from(failure.code())
        }
    }
}
