use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spinebk_cli::{run_angles, run_orbit, run_spectrum, run_verify, write_output, CliError, RunConfig};

/// Semiclassical spectra and integrability checks for particles with spin.
#[derive(Parser, Debug)]
#[command(name = "spinebk", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output CSV path; a JSON summary is written next to it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Integration tolerance (overrides `tol`).
    #[arg(long, global = true, allow_negative_numbers = true)]
    tol: Option<f64>,
    /// Sample sequence offset (overrides `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Quantised energy levels.
    Spectrum,
    /// Involution residuals and skew commutators on sampled points.
    Verify,
    /// Trajectory dump of the combined flow.
    Orbit,
    /// Radial action, frequencies and spin rotation angle on an (E, L) grid.
    Angles,
}

fn run(cli: &Cli) -> Result<Option<String>, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(t) = cli.tol {
        cfg.tol = t;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let out = match cli.command {
        Command::Spectrum => run_spectrum(&cfg)?,
        Command::Verify => run_verify(&cfg)?,
        Command::Orbit => run_orbit(&cfg)?,
        Command::Angles => run_angles(&cfg)?,
    };
    if let Some((csv, js)) = write_output(&out, cli.out.as_deref())? {
        eprintln!("wrote {} and {}", csv.display(), js.display());
    }
    Ok(out.failure)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(msg)) => {
            eprintln!("numeric failure: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
