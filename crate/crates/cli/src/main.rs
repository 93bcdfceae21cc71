//! `mabs`: validate and run scenario files.
//!
//! Exit codes: 0 success, 1 golden-trace mismatch, 2 tick budget exceeded,
//! 3 invalid scenario, 4 I/O failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use mabs::assessment::repository::append_result;
use mabs::scenario::{first_divergence, result_records, Scenario, ScenarioError};
use mabs::sweep::run_batch;
use mabs::{RunUntil, VirtualTime};

const EXIT_OK: u8 = 0;
const EXIT_MISMATCH: u8 = 1;
const EXIT_BUDGET: u8 = 2;
const EXIT_INVALID: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(
    name = "mabs",
    version,
    about = "Deterministic mobile-agent behavior simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the world described by a scenario, run it and write the trace.
    Run(RunArgs),
    /// Check a scenario and print every problem found.
    Validate { scenario: PathBuf },
    /// Run one scenario under a range of seeds and summarize each run.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct RunArgs {
    scenario: PathBuf,
    /// Overrides the seed in the scenario file.
    #[arg(long)]
    seed: Option<u64>,
    /// Trace output path. Defaults to `<name>.trace.jsonl` in the trace
    /// directory.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Directory for default trace paths.
    #[arg(long, env = "MABS_TRACE_DIR", default_value = ".")]
    trace_dir: PathBuf,
    /// A tick number or `quiescent`.
    #[arg(long, default_value = "quiescent")]
    until: Until,
    /// Append exam reports and progress records to this JSONL file.
    #[arg(long)]
    results: Option<PathBuf>,
    /// Overwrite the scenario's golden trace instead of comparing.
    #[arg(long)]
    bless: bool,
}

#[derive(Args)]
struct SweepArgs {
    scenario: PathBuf,
    /// First seed.
    #[arg(long, default_value_t = 0)]
    from: u64,
    /// Number of seeds.
    #[arg(long, default_value_t = 10)]
    count: u64,
}

#[derive(Clone, Copy, Debug)]
struct Until(RunUntil);

impl FromStr for Until {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("quiescent") {
            return Ok(Until(RunUntil::Quiescent));
        }
        s.parse::<u64>()
            .map(|t| Until(RunUntil::Tick(VirtualTime(t))))
            .map_err(|_| format!("expected a tick count or `quiescent`, got `{s}`"))
    }
}

fn load_valid(path: &Path) -> Result<Scenario, u8> {
    let scenario = Scenario::load(path).map_err(|e| report_load_error(&e))?;
    let diags = scenario.validate();
    if !diags.is_empty() {
        for d in &diags {
            eprintln!("{}: {d}", path.display());
        }
        return Err(EXIT_INVALID);
    }
    Ok(scenario)
}

fn report_load_error(e: &ScenarioError) -> u8 {
    eprintln!("error: {e}");
    match e {
        ScenarioError::Io { .. } => EXIT_IO,
        _ => EXIT_INVALID,
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), u8> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| {
            eprintln!("error: {}: {e}", dir.display());
            EXIT_IO
        })?;
    }
    std::fs::write(path, contents).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        EXIT_IO
    })
}

fn run(args: RunArgs) -> Result<u8, u8> {
    let scenario = load_valid(&args.scenario)?;
    let run = scenario
        .run(args.seed, args.until.0)
        .map_err(|e| report_load_error(&e))?;
    let trace = run.trace_jsonl(&scenario);
    let trace_path = args.trace.unwrap_or_else(|| {
        args.trace_dir
            .join(format!("{}.trace.jsonl", scenario.name()))
    });
    write_file(&trace_path, &trace)?;
    eprintln!(
        "trace: {} ({} events)",
        trace_path.display(),
        run.trace.len()
    );

    if let Some(results) = &args.results {
        for record in result_records(&run.persisted) {
            append_result(&record, results).map_err(|e| {
                eprintln!("error: {e}");
                EXIT_IO
            })?;
        }
    }

    if let Err(e) = &run.outcome {
        eprintln!("error: {e}");
        return Ok(EXIT_BUDGET);
    }

    // The golden trace records one seed; other seeds are expected to differ.
    let own_seed = args.seed.is_none() || args.seed == Some(scenario.config(None).seed);
    if let Some(golden) = scenario.expected_path().filter(|_| own_seed || args.bless) {
        if args.bless {
            write_file(&golden, &trace)?;
            eprintln!("golden trace updated: {}", golden.display());
            return Ok(EXIT_OK);
        }
        let expected = std::fs::read_to_string(&golden).map_err(|e| {
            eprintln!("error: golden trace {}: {e}", golden.display());
            EXIT_IO
        })?;
        if let Some(d) = first_divergence(&expected, &trace) {
            eprintln!("trace differs from {}", golden.display());
            eprintln!("{d}");
            return Ok(EXIT_MISMATCH);
        }
        eprintln!("trace matches {}", golden.display());
    }
    Ok(EXIT_OK)
}

fn validate(path: &Path) -> Result<u8, u8> {
    load_valid(path)?;
    println!("{}: ok", path.display());
    Ok(EXIT_OK)
}

fn sweep(args: SweepArgs) -> Result<u8, u8> {
    let scenario = load_valid(&args.scenario)?;
    let scenarios: Vec<Scenario> = (args.from..args.from.saturating_add(args.count))
        .map(|seed| {
            let mut s = scenario.clone();
            s.file.config.seed = Some(seed);
            s
        })
        .collect();
    let mut code = EXIT_OK;
    for result in run_batch(&scenarios, None) {
        match result {
            Ok(r) => {
                let status = if r.budget_exceeded {
                    "budget exceeded"
                } else {
                    "ok"
                };
                println!("seed {:>6}  events {:>7}  {status}", r.seed, r.events);
                if r.budget_exceeded {
                    code = EXIT_BUDGET;
                }
            }
            Err(e) => return Err(report_load_error(&e)),
        }
    }
    Ok(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Validate { scenario } => validate(&scenario),
        Command::Sweep(args) => sweep(args),
    };
    ExitCode::from(result.unwrap_or_else(|code| code))
}
