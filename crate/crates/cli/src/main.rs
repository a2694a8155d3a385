use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use dbar_cli::config::RunConfig;
use dbar_cli::presets::{preset, PRESET_NAMES};
use dbar_cli::run::{run, RunError, RunOptions, Task};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TaskArg {
    CheckWeights,
    DeltaTest,
    Convergence,
    Solve,
    MlSolve,
    VecSolve,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::CheckWeights => Task::CheckWeights,
            TaskArg::DeltaTest => Task::DeltaTest,
            TaskArg::Convergence => Task::Convergence,
            TaskArg::Solve => Task::Solve,
            TaskArg::MlSolve => Task::MlSolve,
            TaskArg::VecSolve => Task::VecSolve,
        }
    }
}

/// Weighted ∂̄-equation toolkit.
#[derive(Debug, Parser)]
#[command(version, about)]
struct Cli {
    task: TaskArg,
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Shipped configuration instead of --config.
    #[arg(long)]
    preset: Option<String>,
    /// Artifact root directory.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    /// Halve h this many times (convergence: number of halvings studied).
    #[arg(long)]
    refine: Option<u32>,
}

fn load(cli: &Cli) -> Result<RunConfig, String> {
    match (&cli.config, &cli.preset) {
        (Some(_), Some(_)) => Err("--config and --preset are mutually exclusive".into()),
        (None, None) => Err("one of --config or --preset is required".into()),
        (None, Some(name)) => preset(name).ok_or_else(|| format!("unknown preset {name:?}; known: {PRESET_NAMES:?}")),
        (Some(path), None) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            RunConfig::from_json(&text).map_err(|errs| {
                errs.iter()
                    .map(|e| format!("{}: {}", e.path, e.message))
                    .collect::<Vec<_>>()
                    .join("\n")
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load(&cli) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let opts = RunOptions { refine: cli.refine };
    match run(cli.task.into(), &cfg, &cli.out, &opts) {
        Ok(outcome) => {
            println!("{}", outcome.report.display());
            if !outcome.pass {
                eprintln!("one or more checks failed; see the report");
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            if let RunError::Config(errs) = &e {
                for fe in errs {
                    eprintln!("error: {}: {}", fe.path, fe.message);
                }
            } else {
                eprintln!("error: {e}");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
