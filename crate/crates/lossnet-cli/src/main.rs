//! `lossnet`: run exact, approximate, fluid and simulation analyses of loss
//! networks from scenario files, and compare methods side by side.
//!
//! Exit codes: 0 success; 2 validation error (bad file, violated method
//! precondition); 3 method failure (no convergence and similar).

mod compare;
mod methods;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use lossnet::scenario::{self, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    /// JSON results plus CSV tables.
    Csv,
    /// JSON results only.
    Json,
}

#[derive(Parser)]
#[command(name = "lossnet", version, about = "Loss-network analysis toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one analysis method on a scenario.
    Run {
        /// exact | kdr | efpa | reduced-load | kelly | lp | fluid | simulate
        #[arg(long)]
        method: String,
        /// Directory for result files.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Master seed (required for simulate unless the scenario has one).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
        format: OutputFormat,
        /// Scenario file path, or `builtin:<name>` for a library scenario.
        scenario: String,
    },
    /// Run several methods and tabulate per-class acceptance probabilities.
    Compare {
        /// Comma-separated list of methods.
        #[arg(long, value_delimiter = ',')]
        methods: Vec<String>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        scenario: String,
    },
    /// List or write the built-in scenario library.
    Scenarios {
        #[command(subcommand)]
        action: ScenarioAction,
    },
}

#[derive(Subcommand)]
enum ScenarioAction {
    /// Print the names of the built-in scenarios.
    List,
    /// Write library scenarios as JSON files.
    Write {
        #[arg(long, default_value = ".")]
        dir: PathBuf,
        /// Single scenario to write; all of them when omitted.
        name: Option<String>,
    },
}

/// Failure modes mapped to exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Invalid inputs or violated preconditions: exit 2.
    Validation(String),
    /// Method-level failures (no convergence and similar): exit 3.
    Method(String),
}

impl CliError {
    fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Validation(_) => ExitCode::from(2),
            CliError::Method(_) => ExitCode::from(3),
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Method(m) => m,
        }
    }
}

fn load_scenario(arg: &str) -> Result<Scenario, CliError> {
    if let Some(name) = arg.strip_prefix("builtin:") {
        return scenario::builtin(name).ok_or_else(|| {
            CliError::Validation(format!("unknown builtin scenario '{name}'"))
        });
    }
    let text = std::fs::read_to_string(arg)
        .map_err(|e| CliError::Validation(format!("cannot read scenario '{arg}': {e}")))?;
    Scenario::from_json(&text).map_err(|e| CliError::Validation(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            method,
            out,
            seed,
            format,
            scenario,
        } => load_scenario(&scenario).and_then(|s| {
            let resolved = s
                .resolve()
                .map_err(|e| CliError::Validation(e.to_string()))?;
            let written = methods::run_method(&resolved, &method, seed, &out, format)?;
            for path in written {
                println!("wrote {}", path.display());
            }
            Ok(())
        }),
        Command::Compare {
            methods,
            out,
            seed,
            scenario,
        } => load_scenario(&scenario).and_then(|s| {
            let resolved = s
                .resolve()
                .map_err(|e| CliError::Validation(e.to_string()))?;
            let requested = if methods.is_empty() {
                resolved.methods.clone()
            } else {
                methods
            };
            let (table, path) = compare::run_compare(&resolved, &requested, seed, &out)?;
            println!("{table}");
            println!("wrote {}", path.display());
            Ok(())
        }),
        Command::Scenarios { action } => match action {
            ScenarioAction::List => {
                for s in scenario::library() {
                    println!("{}", s.name);
                }
                Ok(())
            }
            ScenarioAction::Write { dir, name } => {
                let all = scenario::library();
                let chosen: Vec<_> = match &name {
                    Some(n) => all.into_iter().filter(|s| &s.name == n).collect(),
                    None => all,
                };
                if chosen.is_empty() {
                    Err(CliError::Validation(format!(
                        "unknown builtin scenario '{}'",
                        name.unwrap_or_default()
                    )))
                } else {
                    (|| {
                        std::fs::create_dir_all(&dir).map_err(|e| {
                            CliError::Validation(format!("cannot create {}: {e}", dir.display()))
                        })?;
                        for s in chosen {
                            let path = dir.join(format!("{}.json", s.name));
                            std::fs::write(&path, s.to_json()).map_err(|e| {
                                CliError::Validation(format!(
                                    "cannot write {}: {e}",
                                    path.display()
                                ))
                            })?;
                            println!("wrote {}", path.display());
                        }
                        Ok(())
                    })()
                }
            }
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message());
            err.exit_code()
        }
    }
}
