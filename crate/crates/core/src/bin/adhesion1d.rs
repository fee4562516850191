use std::fs;
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use adhesion1d::harness::{self, Format, ReportRecord};
use adhesion1d::scenario::{LoadedScenario, Scenario};
use adhesion1d::Result;

#[derive(Parser)]
#[command(name = "adhesion1d", version, about = "Sticky particle dynamics in one dimension")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the particle trajectory, collision log and quantile snapshots.
    Run(Common),
    /// Run verification suites; exit 1 if a check fails.
    Verify(Common),
    /// Compare the Hopf formula, particles and a Godunov scheme.
    Entropy(Common),
    /// Gradient-flow integrator and limit-construction tables.
    Gradflow(Common),
    /// Time the projection and a fully merging evolution.
    Bench(Bench),
}

#[derive(Args)]
struct Common {
    /// Scenario file or directory of `*.json` scenarios (repeatable).
    #[arg(long = "scenario", required = true)]
    scenarios: Vec<PathBuf>,
    #[arg(long, env = "ADHESION1D_OUT", default_value = "adhesion1d-out")]
    out: PathBuf,
    /// Override every tolerance.
    #[arg(long, value_parser = parse_tol, allow_hyphen_values = true)]
    tol: Option<f64>,
    /// Restrict `verify` to these suites (repeatable).
    #[arg(long = "suite")]
    suites: Vec<String>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Replace the seed of every scenario.
    #[arg(long)]
    seed: Option<u64>,
    /// Rescale masses that do not sum to 1.
    #[arg(long)]
    renormalize: bool,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
}

#[derive(Args)]
struct Bench {
    /// Largest problem size.
    #[arg(long, default_value_t = 1_000_000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, env = "ADHESION1D_OUT", default_value = "adhesion1d-out")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

impl From<OutputFormat> for Format {
    fn from(f: OutputFormat) -> Self {
        match f {
            OutputFormat::Csv => Format::Csv,
            OutputFormat::Json => Format::Json,
        }
    }
}

fn parse_tol(s: &str) -> std::result::Result<f64, String> {
    let t: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if t >= 0.0 {
        Ok(t)
    } else {
        Err(format!("tolerance must be >= 0, got {s}"))
    }
}

fn load_all(paths: &[PathBuf], seed: Option<u64>) -> Result<Vec<LoadedScenario>> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "json"))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    files
        .iter()
        .map(|f| {
            let mut loaded = Scenario::load(f)?;
            if let Some(s) = seed {
                loaded.scenario.seed = s;
            }
            Ok(loaded)
        })
        .collect()
}

fn run_checks(common: &Common, f: impl Fn(&LoadedScenario, &Path) -> Result<Vec<ReportRecord>> + Sync) -> Result<Vec<ReportRecord>> {
    let scenarios = load_all(&common.scenarios, common.seed)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(common.jobs.max(1))
        .build()
        .expect("thread pool");
    let batches: Vec<Vec<ReportRecord>> =
        pool.install(|| scenarios.par_iter().map(|s| f(s, &common.out)).collect::<Result<_>>())?;
    Ok(batches.into_iter().flatten().collect())
}

fn report(records: &[ReportRecord], format: OutputFormat) -> Result<ExitCode> {
    harness::write_report(records, format.into(), BufWriter::new(io::stdout().lock()))?;
    Ok(if harness::all_passed(records) { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn execute(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run(c) => {
            let scenarios = load_all(&c.scenarios, c.seed)?;
            for s in &scenarios {
                for path in harness::cmd_run(s, &c.out, c.renormalize)? {
                    println!("{}", path.display());
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify(c) => {
            let records = run_checks(&c, |s, out| harness::cmd_verify(s, out, &c.suites, c.tol, c.renormalize))?;
            report(&records, c.format)
        }
        Command::Entropy(c) => {
            let records = run_checks(&c, |s, out| harness::cmd_entropy(s, out, c.tol, c.renormalize))?;
            report(&records, c.format)
        }
        Command::Gradflow(c) => {
            let records = run_checks(&c, |s, out| harness::cmd_gradflow(s, out, c.tol, c.renormalize))?;
            report(&records, c.format)
        }
        Command::Bench(b) => {
            let rows = harness::cmd_bench(b.n, b.seed)?;
            fs::create_dir_all(&b.out)?;
            harness::write_bench_csv(&rows, BufWriter::new(fs::File::create(b.out.join("bench.csv"))?))?;
            report(&harness::bench_records(&rows), b.format)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
