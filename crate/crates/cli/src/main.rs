use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use bai_cli::config::{self, Format};
use bai_cli::oracle::oracle_report;
use bai_cli::report::{rows, write_rows, write_traces};
use bai_cli::{CliError, EXIT_CONFIG, EXIT_OK, EXIT_VALIDATION};
use bai_core::exp_family::{kl, RewardFamily};
use bai_core::harness::run_campaign_traced;
use bai_core::validation::{run_suites, KlFn, SUITES};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "bai",
    version,
    about = "Best-arm identification with minimal regret"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print gaps, I*, regret lower bounds, Gamma* and optimal weights
    Oracle {
        #[arg(long)]
        config: PathBuf,
        /// Confidence levels for the regret lower bound (defaults to the config deltas)
        #[arg(long = "delta", num_args = 1..)]
        deltas: Vec<f64>,
    },
    /// Run a Monte Carlo campaign and write one row per (algorithm, delta)
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        format: Option<Format>,
        /// Output path (defaults to the config's output.path, then stdout)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the first trial of every cell as newline-delimited JSON
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Overrides the configured parallelism
        #[arg(long, env = "BAI_THREADS", hide_env_values = true)]
        threads: Option<usize>,
    },
    /// Run the numerical property suites
    Validate {
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(SUITES))]
        suite: Option<String>,
        #[arg(long, value_enum, hide = true)]
        inject_fault: Option<Fault>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Fault {
    KlSignFlip,
}

fn sign_flipped_kl(family: RewardFamily, a: f64, b: f64) -> bai_core::Result<f64> {
    kl(family, a, b).map(|v| -v)
}

fn create(path: &PathBuf) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn oracle(config: PathBuf, deltas: Vec<f64>) -> Result<u8, CliError> {
    let loaded = config::load(&config)?;
    let instance = loaded.file.instance()?;
    let deltas = if deltas.is_empty() {
        loaded.file.deltas.clone()
    } else {
        deltas
    };
    let report = oracle_report(&instance, &deltas)?;
    print!("{}", report.render(&instance));
    Ok(EXIT_OK)
}

fn run(
    config: PathBuf,
    format: Option<Format>,
    out: Option<PathBuf>,
    trace: Option<PathBuf>,
    threads: Option<usize>,
) -> Result<u8, CliError> {
    let loaded = config::load(&config)?;
    let experiment = loaded.file.experiment(threads)?;
    let format = format.unwrap_or(loaded.file.output.format);
    let out = out.or_else(|| loaded.file.output.path.clone());
    let mut trace_out = trace.as_ref().map(create).transpose()?;
    let mut result_out = out.as_ref().map(create).transpose()?;

    let (stats, traces) = run_campaign_traced(&experiment, trace_out.is_some())?;
    let table = rows(&stats, &experiment.instance, &loaded.hash);
    match result_out.as_mut() {
        Some(w) => write_rows(&table, format, w)?,
        None => write_rows(&table, format, io::stdout().lock())?,
    }
    if let Some(w) = trace_out.as_mut() {
        write_traces(&traces, w)?;
    }
    Ok(EXIT_OK)
}

fn validate(suite: Option<String>, fault: Option<Fault>) -> Result<u8, CliError> {
    let kl_fn: KlFn = match fault {
        Some(Fault::KlSignFlip) => sign_flipped_kl,
        None => kl,
    };
    let reports = run_suites(suite.as_deref(), kl_fn).ok_or_else(|| {
        CliError::Config(format!(
            "unknown suite; expected one of {}",
            SUITES.join(", ")
        ))
    })?;
    let mut stdout = io::stdout().lock();
    let mut failed = Vec::new();
    for r in &reports {
        let status = if r.passed { "PASS" } else { "FAIL" };
        let _ = writeln!(
            stdout,
            "{status} {:<10} {:>9.3}s  {}",
            r.name,
            r.elapsed.as_secs_f64(),
            r.detail
        );
        if !r.passed {
            failed.push(r.name);
        }
    }
    if failed.is_empty() {
        Ok(EXIT_OK)
    } else {
        let _ = writeln!(stdout, "failed suites: {}", failed.join(", "));
        Ok(EXIT_VALIDATION)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK });
        }
    };
    let outcome = match cli.command {
        Command::Oracle { config, deltas } => oracle(config, deltas),
        Command::Run {
            config,
            format,
            out,
            trace,
            threads,
        } => run(config, format, out, trace, threads),
        Command::Validate {
            suite,
            inject_fault,
        } => validate(suite, inject_fault),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("bai: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
