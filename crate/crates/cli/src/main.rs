//! Command-line front end for sliding-mode converter analysis and simulation.

mod commands;
mod config;
mod report;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use smconv_core::cuk::{CukParams, Realization};

use commands::{cmd_analyze, cmd_sector_check, cmd_simulate, cmd_sweep, CliError};
use config::Circuit;

#[derive(Parser)]
#[command(
    name = "smconv",
    version,
    about = "Analysis and simulation of sliding-mode-controlled DC/DC converters"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Equilibria, linearization, sector certificate and ripple predictions
    Analyze(RunArgs),
    /// Hybrid switching simulation with waveform and phase-plane output
    Simulate(RunArgs),
    /// Steady-state remainder measured against the certified sector bounds
    SectorCheck(RunArgs),
    /// Predicted against measured metrics across hysteresis widths
    Sweep(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration file
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Hysteresis half-width override; repeatable for sector-check and sweep
    /// (values take engineering suffixes, e.g. 10m)
    #[arg(long = "delta", value_name = "V")]
    delta: Vec<String>,
    /// Output directory (default: the [output] dir, then the working directory)
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Switching-cell realization override
    #[arg(long, value_enum, value_name = "uni|bi")]
    realization: Option<RealizationArg>,
    /// Use the nanofarad capacitor variant of the converter preset
    /// (c1 = 1 nF, c2 = 20 nF)
    #[arg(long)]
    paper_literal_capacitors: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum RealizationArg {
    Uni,
    Bi,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let args = match &cli.command {
        Command::Analyze(a)
        | Command::Simulate(a)
        | Command::SectorCheck(a)
        | Command::Sweep(a) => a,
    };

    let text = fs::read_to_string(&args.config)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", args.config.display())))?;
    let mut cfg = config::parse(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", args.config.display())))?;

    if args.paper_literal_capacitors {
        match &mut cfg.circuit {
            Circuit::Converter(p) => {
                let literal = CukParams::preset_literal_nanofarad();
                p.c1 = literal.c1;
                p.c2 = literal.c2;
            }
            Circuit::Generic { .. } => {
                return Err(CliError::Config(
                    "--paper-literal-capacitors applies only to converter-parameter configs".into(),
                ))
            }
        }
    }
    if let Some(r) = args.realization {
        cfg.realization = match r {
            RealizationArg::Uni => Realization::Unidirectional,
            RealizationArg::Bi => Realization::Bidirectional,
        };
    }

    let deltas: Vec<f64> = args
        .delta
        .iter()
        .map(|s| config::parse_number(s).map_err(|e| CliError::Config(format!("--delta {s}: {e}"))))
        .collect::<Result<_, _>>()?;

    let single_delta = matches!(&cli.command, Command::Analyze(_) | Command::Simulate(_));
    let mut delta_list = deltas;
    if single_delta {
        if delta_list.len() > 1 {
            return Err(CliError::Config(
                "this command takes at most one --delta".into(),
            ));
        }
        if let Some(&d) = delta_list.first() {
            if d <= 0.0 {
                return Err(CliError::Config("--delta must be positive".into()));
            }
            cfg.delta = d;
        }
    } else if delta_list.is_empty() {
        delta_list = vec![cfg.delta];
    }

    let out_dir = args
        .out
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", out_dir.display())))?;
    let resolved = out_dir.join("resolved.conf");
    fs::write(&resolved, config::to_text(&cfg))
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", resolved.display())))?;

    match &cli.command {
        Command::Analyze(_) => cmd_analyze(&cfg, &out_dir),
        Command::Simulate(_) => cmd_simulate(&cfg, &out_dir),
        Command::SectorCheck(_) => cmd_sector_check(&cfg, &delta_list, &out_dir),
        Command::Sweep(_) => cmd_sweep(&cfg, &delta_list, &out_dir),
    }
}
