use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use caplab::config::{load_config_for, parse_config, Task};
use caplab::{run, Error, RunOutput};

/// Hyperbolicity verdicts and capacity bounds for warped-product constellations.
#[derive(Debug, Parser)]
#[command(name = "caplab", version)]
struct Cli {
    /// Task to run.
    #[arg(value_enum)]
    task: Task,
    /// JSON job description (optional for `verify`).
    config: Option<PathBuf>,
    /// Write the CSV or JSON artifact here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of grid points for `table`.
    #[arg(long)]
    grid: Option<usize>,
    /// Seed for the randomised verification tuples.
    #[arg(long)]
    seed: Option<u64>,
}

fn execute(cli: &Cli) -> Result<RunOutput, Error> {
    let mut job = match &cli.config {
        Some(path) => load_config_for(path, Some(cli.task))?,
        None if cli.task == Task::Verify => parse_config("{}", Some(Task::Verify))?,
        None => return Err(Error::Config {
            pointer: String::new(),
            message: format!("task {} needs a config file", cli.task.name()),
        }),
    };
    if let Some(grid) = cli.grid {
        if grid < 2 {
            return Err(Error::Config {
                pointer: "/grid".into(),
                message: "needs at least 2 points".into(),
            });
        }
        job.grid = grid;
    }
    if let Some(seed) = cli.seed {
        job.seed = seed;
    }
    if cli.out.is_some() {
        job.output = cli.out.clone();
    }
    for warning in &job.warnings {
        eprintln!("warning: {warning}");
    }
    let output = run(&job)?;
    let artifact = output.csv.as_ref().or(output.json.as_ref());
    match (&job.output, artifact) {
        (Some(path), Some(artifact)) => {
            std::fs::write(path, artifact).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?
        }
        // tabular tasks print their table when no output path is given
        (None, Some(csv)) if matches!(job.task, Task::Table | Task::Sweep) => print!("{csv}"),
        _ => {}
    }
    if !(job.output.is_none() && matches!(job.task, Task::Table | Task::Sweep)) {
        print!("{}", output.text);
    }
    Ok(output)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(output) if output.verification_failed => ExitCode::from(3),
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
