use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use khessian_cli::commands::{cmd_fit_decay, cmd_ring, cmd_solve, cmd_verify, Options};
use khessian_cli::CliError;

#[derive(Parser)]
#[command(name = "khessian", version, about = "Exterior k-Hessian solver and verification harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Checkpoint file [default: <out>/solution.ckpt].
    #[arg(long, global = true, value_name = "PATH")]
    checkpoint: Option<PathBuf>,
    /// Report directory.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    /// Overwrite existing reports; `solve` also ignores an existing checkpoint.
    #[arg(long, global = true)]
    force: bool,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Comma-separated probe radii, overriding analysis.probe_radii.
    #[arg(long, global = true, value_name = "LIST", value_delimiter = ',')]
    probe_radii: Option<Vec<f64>>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the continuation schedule, checkpointing after every stage.
    Solve {
        /// Stop after this many stages; rerunning resumes from the checkpoint.
        #[arg(long, value_name = "N")]
        max_stages: Option<usize>,
    },
    /// Boundary inequality, monotone quantity, area and capacity checks.
    Verify,
    /// Log-log decay fits of a converged field.
    FitDecay,
    /// Bounded-ring problems for the listed right-hand sides.
    Ring,
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let c = cli.common;
    if let Some(n) = c.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let mut opts = Options {
        config: c.config,
        checkpoint: c.checkpoint,
        out: c.out,
        force: c.force,
        probe_radii: c.probe_radii,
        max_stages: None,
    };
    let (pass, msg) = match cli.command {
        Command::Solve { max_stages } => {
            opts.max_stages = max_stages;
            (true, cmd_solve(&opts)?)
        }
        Command::Verify => cmd_verify(&opts)?,
        Command::FitDecay => cmd_fit_decay(&opts)?,
        Command::Ring => cmd_ring(&opts)?,
    };
    println!("{msg}");
    Ok(pass)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(64);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
