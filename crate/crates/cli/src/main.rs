//! Command-line front end: loads configuration, dispatches simulation and
//! analysis commands, writes CSV/JSON artifacts.
//!
//! Exit codes: 0 success, 1 usage or invalid values, 2 I/O or malformed
//! input files, 3 numerical or fit failures.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use recoil_lase::config::{self, SystemParams};
use recoil_lase::Error;

/// Environment variable supplying the default config path.
pub const CONFIG_ENV: &str = "RECOIL_LASE_CONFIG";

#[derive(Parser, Debug)]
#[command(
    name = "recoil-lase",
    about = "Simulator and analysis toolkit for continuous recoil lasing in a ring cavity",
    version
)]
struct Cli {
    /// Config file (TOML); falls back to $RECOIL_LASE_CONFIG, then to the
    /// built-in reference parameters.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory for output artifacts.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,

    /// Seed for stochastic generators.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,

    /// Worker threads for parallel sweeps and estimators (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample the recoil gain curve and locate its peak.
    GainCurve(commands::gain_curve::Args),
    /// Sweep the cavity detuning: branches, hysteresis, zones, pulling.
    Sweep(commands::sweep::Args),
    /// Integrate the atom-number transient for a sudden detuning step.
    Dynamics(commands::dynamics::Args),
    /// Estimate the intensity correlation of a photon stream.
    G2(commands::g2::Args),
    /// Estimate the beatnote spectrum and fit its linewidth.
    Spectrum(commands::spectrum::Args),
    /// Evaluate the transport Doppler relations.
    Doppler(commands::doppler::Args),
}

/// Shared state every command receives.
pub struct Context {
    pub params: SystemParams,
    pub sweep_from_config: Option<config::SweepSpec>,
    pub out_dir: PathBuf,
    pub seed: u64,
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Io(_) | Error::Parse { .. } => 2,
        Error::Numerical(_) | Error::Fit(_) => 3,
        Error::Domain(_)
        | Error::Validation { .. }
        | Error::MissingField(_)
        | Error::Inconsistent(_) => 1,
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    if let Some(n) = cli.threads {
        // a second build_global in the same process is harmless for tests
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }

    let config_path = cli
        .config
        .or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
    let parsed = match config_path {
        Some(path) => config::load_config_full(path)?,
        None => config::ParsedConfig {
            params: SystemParams::default_params(),
            sweep: None,
        },
    };

    std::fs::create_dir_all(&cli.out_dir)?;
    let ctx = Context {
        params: parsed.params,
        sweep_from_config: parsed.sweep,
        out_dir: cli.out_dir,
        seed: cli.seed,
    };

    match cli.command {
        Command::GainCurve(args) => commands::gain_curve::run(&ctx, &args),
        Command::Sweep(args) => commands::sweep::run(&ctx, &args),
        Command::Dynamics(args) => commands::dynamics::run(&ctx, &args),
        Command::G2(args) => commands::g2::run(&ctx, &args),
        Command::Spectrum(args) => commands::spectrum::run(&ctx, &args),
        Command::Doppler(args) => commands::doppler::run(&ctx, &args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.exit_code() == 0 { 0 } else { 1 };
            let _ = err.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
