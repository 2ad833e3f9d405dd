//! The `greenbond` command line.
//!
//! Exit codes: 0 success, 1 a scenario assertion or runtime step failed,
//! 2 invalid arguments or an unparsable scenario.

pub mod runner;
pub mod scenario;

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::greenbond::labels;
use crate::pricing::{curve, write_curve_csv, PricingError, Sweep};
use crate::reports::{list_reports, ContentId, DirStore, ReportError};

pub use runner::{Outcome, RunError, RunReport, Runner};
pub use scenario::{ParseError, Scenario};

#[derive(Parser, Debug)]
#[command(name = "greenbond", about = "Green-bond ledger simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run a scenario and print its transcript.
    Run {
        scenario: PathBuf,
        /// Write the transcript here instead of stdout.
        #[arg(long)]
        transcript: Option<PathBuf>,
        /// Show balance and state changes after each step.
        #[arg(long)]
        deltas: bool,
    },
    /// Run a scenario and print every named account's cost rows.
    Costs { scenario: PathBuf },
    /// Price bonds at every rating over a sweep and write CSV.
    PriceCurve(PriceCurveArgs),
    /// Store, fetch and list report documents.
    Report {
        #[command(subcommand)]
        command: ReportCommand,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SweepKind {
    /// Periods to maturity.
    #[value(name = "T")]
    Periods,
    CouponRate,
}

#[derive(Args, Debug)]
pub struct PriceCurveArgs {
    /// Face value.
    #[arg(long)]
    pub face: f64,
    /// Discount rate per period, as a fraction or percentage (`5%`).
    #[arg(long, value_parser = parse_rate)]
    pub rate: f64,
    /// What the curve varies.
    #[arg(long, value_enum, default_value = "T")]
    pub sweep: SweepKind,
    /// Sweep values, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub values: Vec<String>,
    /// Shorthand for `--sweep coupon-rate --values ...`.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["values", "sweep"])]
    pub coupon_rates: Vec<String>,
    /// Five-star coupon rate when sweeping periods; defaults to `--rate`.
    #[arg(long, value_parser = parse_rate)]
    pub coupon_rate: Option<f64>,
    /// Periods when sweeping coupon rates.
    #[arg(long)]
    pub periods: Option<u32>,
    /// CSV output path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum ReportCommand {
    /// Store a file and print its content id.
    Put {
        file: PathBuf,
        #[arg(long)]
        store: PathBuf,
    },
    /// Print (or write) the document with this content id.
    Get {
        cid: String,
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a scenario and list the content ids an issuer anchored for a bond.
    List { scenario: PathBuf, issuer: String, bond: String },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: ParseError },
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Pricing(#[from] PricingError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("scenario assertion failed")]
    AssertionFailed,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Parse { .. } => 2,
            CliError::Report(ReportError::BadContentId(_)) => 2,
            _ => 1,
        }
    }
}

fn parse_rate(s: &str) -> Result<f64, String> {
    let (num, scale) = match s.strip_suffix('%') {
        Some(n) => (n, 100.0),
        None => (s, 1.0),
    };
    num.trim().parse::<f64>().map(|v| v / scale).map_err(|_| format!("invalid rate {s:?}"))
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_owned(), source })
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|source| CliError::Io { path: path.to_owned(), source })
}

/// Loads a scenario; report paths in it resolve against its directory.
pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = read(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    Scenario::parse(&text, base).map_err(|source| CliError::Parse { path: path.to_owned(), source })
}

fn run_scenario(path: &Path, deltas: bool) -> Result<(Runner, RunReport), CliError> {
    let scenario = load_scenario(path)?;
    let mut runner = Runner::new().with_deltas(deltas);
    let report = runner.run(&scenario)?;
    Ok((runner, report))
}

/// Runs a parsed command, writing normal output to `out`.
pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let io_err = |source| CliError::Io { path: PathBuf::from("<stdout>"), source };
    match cli.command {
        Command::Run { scenario, transcript, deltas } => {
            let (_, report) = run_scenario(&scenario, deltas)?;
            let mut text = report.transcript.join("\n");
            text.push('\n');
            match transcript {
                Some(path) => write(&path, text.as_bytes())?,
                None => out.write_all(text.as_bytes()).map_err(io_err)?,
            }
            if !report.passed {
                return Err(CliError::AssertionFailed);
            }
        }
        Command::Costs { scenario } => {
            let (runner, report) = run_scenario(&scenario, false)?;
            out.write_all(cost_table(&runner).as_bytes()).map_err(io_err)?;
            if !report.passed {
                return Err(CliError::AssertionFailed);
            }
        }
        Command::PriceCurve(args) => {
            let rows = curve(&sweep_of(&args)?, args.face, args.rate)?;
            match &args.out {
                Some(path) => {
                    let f = fs::File::create(path).map_err(|source| CliError::Io { path: path.clone(), source })?;
                    write_curve_csv(&rows, io::BufWriter::new(f))?;
                }
                None => write_curve_csv(&rows, &mut *out)?,
            }
        }
        Command::Report { command } => match command {
            ReportCommand::Put { file, store } => {
                let cid = DirStore::open(store)?.store_file(&file)?;
                writeln!(out, "{cid}").map_err(io_err)?;
            }
            ReportCommand::Get { cid, store, out: dest } => {
                let cid: ContentId = cid.parse()?;
                let bytes = DirStore::open(store)?.fetch(&cid)?;
                match dest {
                    Some(path) => write(&path, &bytes)?,
                    None => out.write_all(&bytes).map_err(io_err)?,
                }
            }
            ReportCommand::List { scenario, issuer, bond } => {
                let (runner, report) = run_scenario(&scenario, false)?;
                let who = runner.account(&issuer).ok_or_else(|| CliError::Usage(format!("unknown account {issuer:?}")))?;
                let d = runner.bond(&bond).ok_or_else(|| CliError::Usage(format!("unknown bond {bond:?}")))?;
                for cid in list_reports(&runner.ledger, &who, d.manage_app) {
                    writeln!(out, "{cid}").map_err(io_err)?;
                }
                if !report.passed {
                    return Err(CliError::AssertionFailed);
                }
            }
        },
    }
    Ok(())
}

fn sweep_of(args: &PriceCurveArgs) -> Result<Sweep, CliError> {
    let usage = |m: &str| CliError::Usage(m.to_owned());
    let (kind, values) = if args.coupon_rates.is_empty() {
        (args.sweep, &args.values)
    } else {
        (SweepKind::CouponRate, &args.coupon_rates)
    };
    if values.is_empty() {
        return Err(usage("no sweep values given"));
    }
    match kind {
        SweepKind::Periods => {
            let values = values
                .iter()
                .map(|v| v.trim().parse::<u32>().map_err(|_| CliError::Usage(format!("invalid period {v:?}"))))
                .collect::<Result<_, _>>()?;
            let coupon_rate = args.coupon_rate.unwrap_or(args.rate);
            Ok(Sweep::Periods { values, coupon_rate })
        }
        SweepKind::CouponRate => {
            let values = values.iter().map(|v| parse_rate(v).map_err(CliError::Usage)).collect::<Result<_, _>>()?;
            let periods = args.periods.ok_or_else(|| usage("--periods is required when sweeping coupon rates"))?;
            Ok(Sweep::CouponRate { values, periods })
        }
    }
}

/// Per-account cost rows in account order, with fee, min-balance and
/// protocol totals.
pub fn cost_table(runner: &Runner) -> String {
    let costs = runner.ledger.costs();
    let mut s = String::new();
    for (name, addr) in runner.accounts() {
        let rows: Vec<_> = costs.rows_for(addr).collect();
        if rows.is_empty() {
            continue;
        }
        s.push_str(&format!("{name} ({})\n", addr.short()));
        s.push_str(&format!("  {:<42} {:>14} {:>12} {:>8} {:>14}\n", "label", "amount", "min_balance", "fee", "total"));
        for r in &rows {
            s.push_str(&format!(
                "  {:<42} {:>14} {:>12} {:>8} {:>14}\n",
                r.label,
                r.amount,
                r.min_balance,
                r.fee,
                r.total()
            ));
        }
        let protocol: i64 = labels::PROTOCOL.iter().filter_map(|l| costs.row(addr, l)).map(|r| r.total()).sum();
        s.push_str(&format!(
            "  fees {}  min_balance {}  protocol total {}\n\n",
            costs.fees_paid(addr).0,
            costs.min_balance_locked(addr).0,
            protocol
        ));
    }
    s
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let stdout = io::stdout();
    let mut lock = stdout.lock();
    match execute(cli, &mut lock) {
        Ok(()) => 0,
        Err(e) => {
            let _ = lock.flush();
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
