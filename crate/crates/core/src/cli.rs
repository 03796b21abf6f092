//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 numerical
//! failure, 3 selftest failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{
    crb_input_from_assignments, parse_assignments, parse_override, plan_from_assignments, plan_to_text,
    Assignments, SymbolSource,
};
use crate::crb_blind::crb_fast;
use crate::error::Error;
use crate::harness::{run_experiment, write_csv};
use crate::model::{generate_symbols, strongest_tap, Modulation, Precoder};
use crate::rng::rng_from_seed;
use crate::selftest;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_SELFTEST: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "blindcrb", version, about = "Cramér-Rao bounds for blind channel estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment and write one CSV row per SNR point.
    Run(RunArgs),
    /// Evaluate the bound once for a fully specified channel and frame.
    Crb(CrbArgs),
    /// Check the two bound routes and the log-likelihood gradients.
    Selftest(SelftestArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `key=value` applied after the config file (repeatable).
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// CSV destination; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed (same as `--override master_seed=...`).
    #[arg(long)]
    seed: Option<u64>,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    dump_config: bool,
}

#[derive(Debug, Args)]
struct CrbArgs {
    /// Configuration with `taps` and `symbols` or `symbols_seed`.
    #[arg(long, alias = "input")]
    config: PathBuf,
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output destination; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SelftestArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure { code: EXIT_USAGE, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidConfig(_)
            | Error::InvalidDimensions(_)
            | Error::NonPositiveNoise(_)
            | Error::NotZeroPadded(_)
            | Error::UnsupportedModulation(_)
            | Error::ShapeMismatch(_) => EXIT_USAGE,
            _ => EXIT_NUMERICAL,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::usage(e.to_string())
    }
}

/// Entry point for the binary.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(args, &mut stdout.lock(), &mut stderr.lock())
}

/// Parses `args` (including the program name) and dispatches, writing normal
/// output to `out` and diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if code == EXIT_OK {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return code;
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a, out),
        Command::Crb(a) => cmd_crb(a, out),
        Command::Selftest(a) => cmd_selftest(a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn load(path: Option<&PathBuf>, overrides: &[String]) -> Result<Assignments, Failure> {
    let mut pairs = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Failure::usage(format!("cannot read {}: {e}", p.display())))?;
            parse_assignments(&text)?
        }
        None => Vec::new(),
    };
    for o in overrides {
        pairs.push(parse_override(o)?);
    }
    Ok(pairs)
}

fn open_out<'a>(path: &Option<PathBuf>, out: &'a mut dyn Write) -> Result<Box<dyn Write + 'a>, Failure> {
    Ok(match path {
        Some(p) => Box::new(std::io::BufWriter::new(
            std::fs::File::create(p).map_err(|e| Failure::usage(format!("cannot create {}: {e}", p.display())))?,
        )),
        None => Box::new(out),
    })
}

fn cmd_run(a: RunArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let mut pairs = load(a.config.as_ref(), &a.overrides)?;
    if let Some(seed) = a.seed {
        pairs.push(("master_seed".into(), seed.to_string()));
    }
    let plan = plan_from_assignments(&pairs)?;
    if a.dump_config {
        write!(out, "{}", plan_to_text(&plan)?)?;
        return Ok(());
    }
    let records = run_experiment(&plan)?;
    let mut sink = open_out(&a.out, out)?;
    write_csv(&records, &mut sink)?;
    sink.flush()?;
    Ok(())
}

fn cmd_crb(a: CrbArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let pairs = load(Some(&a.config), &a.overrides)?;
    let input = crb_input_from_assignments(&pairs)?;
    let cfg = &input.config;
    let precoder = Precoder::from_config(cfg)?;
    let symbols = match &input.symbols {
        SymbolSource::Explicit(s) => s.clone(),
        SymbolSource::Seeded(seed) => generate_symbols(Modulation::Qpsk, cfg.m, cfg.n, &mut rng_from_seed(*seed))?.s,
    };
    let d = input.known_tap.unwrap_or_else(|| strongest_tap(&input.taps));
    if input.taps[d].norm() == 0.0 {
        return Err(Failure::usage(format!("known tap {d} is zero")));
    }
    let bound = crb_fast(&input.taps, &symbols, &precoder, d, cfg.sigma2, cfg.n)?;
    let mut sink = open_out(&a.out, out)?;
    writeln!(sink, "known_tap = {d}")?;
    writeln!(sink, "trace = {:.15e}", bound.trace)?;
    writeln!(sink, "# bound over taps other than {d}, one row per line")?;
    for row in bound.c.row_iter() {
        let cells: Vec<String> = row
            .iter()
            .map(|z| format!("{:.15e}{}{:.15e}j", z.re, if z.im < 0.0 { "-" } else { "+" }, z.im.abs()))
            .collect();
        writeln!(sink, "{}", cells.join(", "))?;
    }
    sink.flush()?;
    Ok(())
}

fn cmd_selftest(a: SelftestArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let reports = selftest::run_all(a.seed);
    for r in &reports {
        writeln!(out, "{}", r.line())?;
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        return Err(Failure { code: EXIT_SELFTEST, message: format!("{failed} selftest check(s) failed") });
    }
    Ok(())
}
