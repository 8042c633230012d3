use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use qcc_core::config::parse_spec;
use qcc_core::report::{emit, OutputFormat};
use qcc_core::run::{run_command, Command, RunFlags, INPUT_ERROR_EXIT, SEED_ENV};

#[derive(Parser)]
#[command(name = "qcc", version, about = "Quantum computation correctness verifier")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Spec document (JSON)
    #[arg(long, global = true)]
    spec: Option<PathBuf>,
    /// RNG seed; overrides the seed in the spec file and QCC_SEED
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Optimizer restarts per norm evaluation
    #[arg(long, global = true)]
    restarts: Option<usize>,
    /// Ascent iterations per restart
    #[arg(long, global = true)]
    iters: Option<usize>,
    /// Output format: text or csv
    #[arg(long, global = true, default_value = "text")]
    out: OutputFormat,
}

#[derive(Subcommand)]
enum Sub {
    /// Distance between the implementation and a reference channel
    Norm {
        /// so, diamond or trace
        #[arg(long)]
        kind: Option<String>,
    },
    /// Verify a device against its alpha budget
    Qcc,
    /// Sweep a generator parameter and certify the transfer bounds
    Sweep {
        /// gamma, flip_rate, dephasing_rate or omega
        #[arg(long)]
        param: Option<String>,
        /// `start:stop:count` or a comma-separated list
        #[arg(long)]
        grid: Option<String>,
    },
    /// Evaluate a classical pipeline and optionally simulate majority voting
    Pipeline {
        /// Odd number of runs per majority vote
        #[arg(long)]
        trials: Option<usize>,
        /// Seeded majority-vote experiments per input
        #[arg(long)]
        repeats: Option<usize>,
    },
}

fn input_error(message: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(INPUT_ERROR_EXIT as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { INPUT_ERROR_EXIT } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let start = Instant::now();
    let text = match &cli.common.spec {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(text) => text,
            Err(e) => return input_error(format!("{}: {e}", path.display())),
        },
        None => "{}".to_string(),
    };
    let spec = match parse_spec(&text) {
        Ok(spec) => spec,
        Err(e) => return input_error(e),
    };
    let mut flags = RunFlags {
        spec_path: cli.common.spec.as_ref().map(|p| p.display().to_string()),
        seed: cli.common.seed,
        env_seed: std::env::var(SEED_ENV).ok(),
        restarts: cli.common.restarts,
        iters: cli.common.iters,
        ..Default::default()
    };
    let command = match cli.command {
        Sub::Norm { kind } => {
            flags.kind = kind;
            Command::Norm
        }
        Sub::Qcc => Command::Qcc,
        Sub::Sweep { param, grid } => {
            flags.param = param;
            flags.grid = grid;
            Command::Sweep
        }
        Sub::Pipeline { trials, repeats } => {
            flags.trials = trials;
            flags.repeats = repeats;
            Command::Pipeline
        }
    };
    match run_command(command, &spec, &flags) {
        Ok(report) => {
            print!("{}", emit(&report, cli.common.out));
            eprintln!("wall time: {:.3} s", start.elapsed().as_secs_f64());
            ExitCode::from(report.status.exit_code() as u8)
        }
        Err(e) => input_error(e),
    }
}
