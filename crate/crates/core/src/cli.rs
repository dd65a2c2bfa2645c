//! Command-line entry point.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 bad config or arguments,
//! 3 numerical failure, 4 blow-up where none was expected.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{Action, RunConfig};
use crate::error::Error;
use crate::presets;
use crate::runner;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_BLOWUP: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "nlslab", version, about = "1D NLS lab with combined power-series nonlinearities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Clone, Default)]
struct Common {
    /// Run config (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Start from a preset instead of a config file.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Print the explicit config and stop.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve for a ground state with the Petviashvili iteration.
    Groundstate(Common),
    /// Integrate one initial datum.
    Evolve(Common),
    /// Compare direct and pseudo-conformally transformed integrations.
    ConformalCheck(Common),
    /// Classify a stored trajectory.csv.
    Classify {
        /// trajectory.csv to read.
        #[arg(long)]
        input: PathBuf,
        /// Config supplying classifier thresholds.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run every case of the sweep block.
    Sweep(Common),
    /// Expand a preset and run its pipeline; `list` prints the catalog.
    Preset {
        id: String,
        #[command(flatten)]
        common: Common,
    },
    /// Check the coefficient conditions of a nonlinearity.
    CheckConditions(Common),
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } => EXIT_IO,
        Error::Config { .. }
        | Error::Parse { .. }
        | Error::InvalidArgument(_)
        | Error::InvalidGrid(_)
        | Error::InadmissibleOmega { .. }
        | Error::TermPrecondition { .. } => EXIT_CONFIG,
        Error::BlowupDetected { .. } => EXIT_BLOWUP,
        Error::NonFinite { .. }
        | Error::GridMismatch
        | Error::Diverged { .. }
        | Error::MaxIter { .. }
        | Error::StepRejected { .. } => EXIT_NUMERICAL,
    }
}

fn load(common: &Common, preset_id: Option<&str>) -> Result<RunConfig, Error> {
    let id = preset_id.or(common.preset.as_deref());
    let mut cfg = match (&common.config, id) {
        (Some(_), Some(_)) => return Err(Error::config("--config", "give a config file or a preset, not both")),
        (Some(path), None) => RunConfig::read(path)?,
        (None, Some(id)) => presets::preset(id)?,
        (None, None) => return Err(Error::config("--config", "a config file or --preset is required")),
    };
    if let Some(out) = &common.out {
        cfg.output = Some(out.clone());
    }
    Ok(cfg)
}

fn with_action(mut cfg: RunConfig, action: Action) -> Result<RunConfig, Error> {
    cfg.action = action;
    cfg.validate()?;
    Ok(cfg)
}

/// Writes a line to stdout; a closed pipe is not an error worth a panic.
fn emit(line: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}

fn print_json(v: &impl serde::Serialize) {
    emit(&serde_json::to_string_pretty(v).expect("serializes"));
}

fn execute(cfg: &RunConfig, workers: usize) -> Result<i32, Error> {
    let out = cfg.output_dir();
    let out = out.as_path();
    match cfg.action {
        Action::Evolve => {
            let r = runner::run_evolve(cfg, out)?;
            eprintln!(
                "[evolve] {} t = {} mass drift {:e} -> {}",
                r.summary.verdict,
                r.summary.t_end_reached,
                r.summary.mass_drift_rel,
                out.display()
            );
            Ok(blowup_status(cfg, r.blowup.is_some()))
        }
        Action::Sweep => {
            let rows = runner::run_sweep(cfg, out, workers)?;
            for r in &rows {
                eprintln!(
                    "[sweep] A = {} b = {} -> {} ({})",
                    r.case.amplitude, r.case.b, r.classification.verdict, r.classification.t_blowup_or_horizon
                );
            }
            eprintln!("[sweep] {} cases -> {}", rows.len(), out.join("verdicts.csv").display());
            Ok(blowup_status(cfg, rows.iter().any(|r| r.blowup.is_some())))
        }
        Action::Groundstate => {
            let reps = runner::run_groundstate(cfg, out)?;
            print_json(&reps);
            Ok(EXIT_OK)
        }
        Action::ConformalCheck => {
            let rep = runner::run_conformal_check(cfg, out)?;
            for (t, d) in &rep.deviations {
                emit(&format!("t = {t}: relative L2 deviation {d:e}"));
            }
            emit(&format!("max deviation {:e}", rep.max_deviation));
            Ok(EXIT_OK)
        }
        Action::CheckConditions => {
            let rows = runner::run_check_conditions(cfg, out)?;
            print_json(&rows);
            Ok(EXIT_OK)
        }
    }
}

fn blowup_status(cfg: &RunConfig, blew_up: bool) -> i32 {
    if blew_up && cfg.expect_blowup == Some(false) {
        EXIT_BLOWUP
    } else {
        EXIT_OK
    }
}

fn run_common(common: &Common, preset_id: Option<&str>, action: Option<Action>) -> Result<i32, Error> {
    let cfg = load(common, preset_id)?;
    let cfg = match action {
        Some(a) => with_action(cfg, a)?,
        None => {
            cfg.validate()?;
            cfg
        }
    };
    if common.dry_run {
        emit(&cfg.to_json());
        return Ok(EXIT_OK);
    }
    execute(&cfg, common.workers)
}

fn classify(input: &Path, config: Option<&Path>) -> Result<i32, Error> {
    let params = match config {
        Some(p) => RunConfig::load(p)?.classify,
        None => Default::default(),
    };
    let cl = runner::classify_file(input, &params)?;
    print_json(&cl);
    Ok(EXIT_OK)
}

/// Parses `argv` (program name first) and runs; returns the exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let res = match &cli.command {
        Command::Groundstate(c) => run_common(c, None, Some(Action::Groundstate)),
        Command::Evolve(c) => run_common(c, None, Some(Action::Evolve)),
        Command::ConformalCheck(c) => run_common(c, None, Some(Action::ConformalCheck)),
        Command::Sweep(c) => run_common(c, None, Some(Action::Sweep)),
        Command::CheckConditions(c) => run_common(c, None, Some(Action::CheckConditions)),
        Command::Classify { input, config } => classify(input, config.as_deref()),
        Command::Preset { id, .. } if id == "list" => {
            for (id, what) in presets::CATALOG {
                emit(&format!("{id:<16}{what}"));
            }
            Ok(EXIT_OK)
        }
        Command::Preset { id, common } => run_common(common, Some(id), None),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
