use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dispcancel::cli::{parse_scenario, preset, run, PRESETS};
use dispcancel::Error;

/// Dispersion-cancellation simulator.
#[derive(Parser)]
#[command(name = "sim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file or a built-in preset.
    Run {
        /// Scenario TOML file.
        file: Option<PathBuf>,
        /// Output directory, overriding the scenario's.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Built-in scenario to run instead of a file.
        #[arg(long, conflicts_with = "file")]
        preset: Option<String>,
        /// Worker threads (defaults to all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// List the built-in presets.
    Presets,
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Presets => {
            for (name, about, _) in PRESETS {
                println!("{name:<16} {about}");
            }
            Ok(())
        }
        Command::Run {
            file,
            out,
            preset: name,
            threads,
        } => {
            if let Some(n) = threads {
                if n == 0 {
                    return Err(Error::Config("--threads must be at least 1".into()));
                }
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                    .map_err(|e| Error::Config(format!("cannot start thread pool: {e}")))?;
            }
            let scenario = match (file, name) {
                (Some(path), None) => parse_scenario(&path)?,
                (None, Some(name)) => preset(&name)?,
                _ => return Err(Error::Config("give a scenario file or --preset NAME".into())),
            };
            let report = run(&scenario, out.as_deref())?;
            for f in &report.files {
                println!("{}", f.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
