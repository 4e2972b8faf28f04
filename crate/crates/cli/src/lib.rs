//! Experiment runner behind the `dissipative` binary.
//!
//! Every subcommand writes CSV tables and a `manifest.toml` into its output directory.
//! Output files depend only on the configuration and seed; the manifest's `[timestamp]`
//! table is the one exception.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod pool;
pub mod presets;

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, FromArgMatches, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use toml::Table;

pub use config::ConfigFile;
pub use error::{CliError, CliResult, Status};
pub use experiments::*;
pub use output::RunContext;

/// Default output root when `--out` is not given.
pub const OUT_ENV: &str = "DISSIPATIVE_OUT";
const DEFAULT_OUT_ROOT: &str = "dissipative-out";

#[derive(Debug, Parser)]
#[command(name = "dissipative", version, about = "Dissipative computation and state-engineering experiments")]
pub struct Cli {
    /// Output directory [default: $DISSIPATIVE_OUT/<command> or ./dissipative-out/<command>]
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// TOML run description; its values override the flags
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Numeric vs closed-form spectral gap over a (T, N) grid
    DqcGap(DqcGap),
    /// Time evolution of a compiled circuit towards its history state
    DqcRun(DqcRun),
    /// Full generator spectrum of a compiled circuit
    DqcSpectrum(DqcSpectrum),
    /// Iterate a state-engineering channel for a frustration-free Hamiltonian
    DseRun(DseRun),
    /// Graph-state Liouvillian spectrum against its predicted multiset
    GraphState(GraphState),
    /// State engineering on a small toric code
    ToricRun(ToricRun),
    /// Matrix product state preparation schedule
    MpsPrepare(MpsPrepare),
    /// Ancilla-mediated dissipation and adiabatic elimination sweep
    ReservoirCheck(ReservoirCheck),
    /// Check an instance file (circuit, Hamiltonian or MPS)
    Validate(Validate),
}

/// A subcommand: flags, serializable parameters and the work itself.
pub trait Experiment: Args + FromArgMatches + Serialize + DeserializeOwned {
    const NAME: &'static str;

    fn run(&self, ctx: &mut RunContext) -> CliResult<()>;
}

/// What a finished run left behind.
#[derive(Debug)]
pub struct RunOutcome {
    pub command: &'static str,
    pub dir: PathBuf,
    pub files: Vec<String>,
    pub summary: Table,
}

/// Parses arguments, runs, reports errors on stderr and returns the exit status.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { Status::InputError as u8 } else { Status::Success as u8 };
        }
    };
    match run(cli) {
        Ok(outcome) => {
            println!("{}: wrote {} file(s) to {}", outcome.command, outcome.files.len() + 1, outcome.dir.display());
            Status::Success as u8
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.status() as u8
        }
    }
}

pub fn run(cli: Cli) -> CliResult<RunOutcome> {
    let config = cli.config.as_deref().map(ConfigFile::read).transpose()?.unwrap_or_default();
    let name = match (&cli.command, &config.command) {
        (Some(c), Some(n)) if command_name(c) != n => {
            return Err(CliError::Config(format!(
                "config is for `{n}` but the command line asks for `{}`",
                command_name(c)
            )))
        }
        (Some(c), _) => command_name(c).to_string(),
        (None, Some(n)) => n.clone(),
        (None, None) => {
            return Err(CliError::Config("no subcommand given (on the command line or as `command`)".into()))
        }
    };
    let out = config.out.clone().or(cli.out);

    macro_rules! dispatch {
        ($($variant:ident),*) => {
            match name.as_str() {
                $(
                    <$variant as Experiment>::NAME => {
                        let args = match cli.command {
                            Some(Command::$variant(a)) => a,
                            _ => defaults::<$variant>(),
                        };
                        execute(args, &config.params, out)
                    }
                )*
                other => Err(CliError::Config(format!("unknown command `{other}`"))),
            }
        };
    }
    dispatch!(DqcGap, DqcRun, DqcSpectrum, DseRun, GraphState, ToricRun, MpsPrepare, ReservoirCheck, Validate)
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::DqcGap(_) => DqcGap::NAME,
        Command::DqcRun(_) => DqcRun::NAME,
        Command::DqcSpectrum(_) => DqcSpectrum::NAME,
        Command::DseRun(_) => DseRun::NAME,
        Command::GraphState(_) => GraphState::NAME,
        Command::ToricRun(_) => ToricRun::NAME,
        Command::MpsPrepare(_) => MpsPrepare::NAME,
        Command::ReservoirCheck(_) => ReservoirCheck::NAME,
        Command::Validate(_) => Validate::NAME,
    }
}

/// The flag defaults of an experiment.
pub fn defaults<E: Experiment>() -> E {
    let cmd = E::augment_args(clap::Command::new(E::NAME));
    let matches = cmd.try_get_matches_from([E::NAME]).expect("every flag has a default");
    E::from_arg_matches(&matches).expect("defaults parse")
}

/// Default output directory of a command.
pub fn default_out_dir(command: &str) -> PathBuf {
    let root = std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_ROOT));
    root.join(command)
}

/// Runs one experiment with config overrides applied and writes its manifest.
///
/// The manifest is written even when the experiment fails, with the error recorded.
pub fn execute<E: Experiment>(args: E, overrides: &Table, out: Option<PathBuf>) -> CliResult<RunOutcome> {
    let (args, params) = config::apply_overrides(&args, overrides)?;
    let dir = out.unwrap_or_else(|| default_out_dir(E::NAME));
    let mut ctx = RunContext::new(&dir)?;
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let clock = Instant::now();
    let result = args.run(&mut ctx);
    match &result {
        Ok(()) => ctx.record("status", "ok"),
        Err(e) => {
            ctx.record("status", "error");
            ctx.record("error", e.to_string());
        }
    }
    ctx.write_manifest(E::NAME, &params, started, clock.elapsed().as_secs_f64())?;
    result?;
    Ok(RunOutcome { command: E::NAME, dir, files: ctx.files().to_vec(), summary: ctx.summary().clone() })
}
