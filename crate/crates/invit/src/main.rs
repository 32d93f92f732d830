use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use invit::bundled::{resolve, BUNDLED};
use invit::output::write_outputs;
use invit::{init_threads, run, CliResult, ExperimentConfig};

/// Quantum inverse iteration experiments.
#[derive(Parser)]
#[command(name = "invit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a config file or a bundled config by name.
    Run {
        config: String,
        /// Overrides the CSV path from the config.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Check a config without running it.
    Validate { config: String },
    /// List the bundled figure configs.
    ListBundled,
}

fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::ListBundled => {
            let mut out = std::io::stdout().lock();
            for (name, text) in BUNDLED {
                let description = ExperimentConfig::from_toml_str(text)
                    .map(|c| c.description)
                    .unwrap_or_default();
                // A closed pipe (e.g. `| head`) is not an error.
                if writeln!(out, "{name:10} {description}").is_err() {
                    break;
                }
            }
            Ok(())
        }
        Command::Validate { config } => {
            let cfg = resolve(&config)
                .and_then(|c| c.validate().map(|_| c))
                .map_err(|e| e.context(&config))?;
            println!("{config}: ok ({:?}, hash {})", cfg.kind, cfg.hash());
            Ok(())
        }
        Command::Run { config, output } => {
            init_threads()?;
            let cfg = resolve(&config).map_err(|e| e.context(&config))?;
            let start = Instant::now();
            let table = run(&cfg).map_err(|e| e.context(&config))?;
            let csv_path = output.unwrap_or_else(|| cfg.output.path.clone());
            let sidecar = write_outputs(&cfg, &table, &csv_path).map_err(|e| e.context(&config))?;
            for w in &table.warnings {
                eprintln!("warning: {w}");
            }
            println!(
                "{}: {} rows in {:.1} s -> {} (+ {})",
                cfg.name,
                table.rows.len(),
                start.elapsed().as_secs_f64(),
                csv_path.display(),
                sidecar.display()
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    // Usage errors count as validation errors; clap's own exit code would be 2.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
