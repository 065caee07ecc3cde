use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use sblimp::commands::{self, CommandError, ExitStatus};
use sblimp::config::Overrides;
use sblimp::core::sim::Integrator;

#[derive(Parser)]
#[command(name = "sblimp", version, about = "Swing-blimp simulation, sweeps and verification")]
struct Cli {
    /// TOML run configuration; defaults apply to every missing key.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default: $SBLIMP_OUT/<command>, else sblimp-out/<command>).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Keep every n-th log record.
    #[arg(long, global = true)]
    decimate: Option<usize>,
    /// Worker threads for sweeps.
    #[arg(long, global = true)]
    parallel: Option<usize>,
    #[arg(long, global = true, value_enum)]
    integrator: Option<IntegratorArg>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trajectory and write log.csv, summary.txt and resolved_config.toml.
    Simulate,
    /// Sweep l_b, mass or speed and write sweep.csv plus plot data.
    Sweep,
    /// Check allocation, closed-loop and pendulum properties of the configured design.
    Verify,
}

#[derive(Clone, Copy, ValueEnum)]
enum IntegratorArg {
    Rk4,
    Euler,
}

fn run(cli: Cli) -> Result<ExitStatus, CommandError> {
    let overrides = Overrides {
        out: cli.out,
        decimate: cli.decimate,
        parallel: cli.parallel,
        integrator: cli.integrator.map(|i| match i {
            IntegratorArg::Rk4 => Integrator::Rk4,
            IntegratorArg::Euler => Integrator::Euler,
        }),
    };
    let cfg = commands::load_config(cli.config.as_deref(), &overrides)?;
    match cli.command {
        Command::Simulate => {
            let outcome = commands::simulate(&cfg)?;
            print!("{}", outcome.summary);
            println!("output = {}", outcome.dir.display());
            if outcome.status() == ExitStatus::Diverged {
                eprintln!("error: run diverged");
            }
            Ok(outcome.status())
        }
        Command::Sweep => {
            let outcome = commands::sweep(&cfg)?;
            print!("{}", outcome.summary);
            println!("output = {}", outcome.dir.display());
            Ok(ExitStatus::Success)
        }
        Command::Verify => {
            let checks = commands::verify(&cfg);
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            Ok(commands::verify_status(&checks))
        }
    }
}

fn main() -> ExitCode {
    let status = match run(Cli::parse()) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            e.status()
        }
    };
    ExitCode::from(status.code() as u8)
}
