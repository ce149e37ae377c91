use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fbvp_cli::run::{run, Command, Invocation, EXIT_INPUT};
use fbvp_cli::Overrides;

/// Fractional three-point boundary value problems at resonance.
#[derive(Parser, Debug)]
#[command(name = "fbvp", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Resonance data, structure checks and the solvability condition.
    Analyze(Common),
    /// Solve by damped fixed-point iteration.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Extra solves from random initial kernel components.
        #[arg(long, default_value_t = 0)]
        sweep: usize,
        /// Scale of the random initial kernel components.
        #[arg(long, default_value_t = 1.0)]
        sweep_scale: f64,
    },
    /// Growth bound, solvability and sign probes.
    CheckHypotheses(Common),
    /// Check a builtin problem against its known values.
    VerifyExample(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// Problem description (TOML).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Builtin problem name.
    #[arg(long, value_name = "NAME")]
    builtin: Option<String>,
    /// Number of blocks for the builtin problem.
    #[arg(long, value_name = "INT")]
    k: Option<usize>,
    /// Number of grid subintervals.
    #[arg(long, value_name = "N")]
    grid: Option<usize>,
    #[arg(long, value_name = "X")]
    damping: Option<f64>,
    #[arg(long, value_name = "M")]
    max_iter: Option<usize>,
    #[arg(long, value_name = "S")]
    seed: Option<u64>,
    /// Output directory for report.txt and solution.csv.
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
}

fn invocation(command: Command, c: Common, sweep: usize, sweep_scale: f64) -> Invocation {
    Invocation {
        command,
        config: c.config,
        overrides: Overrides {
            builtin: c.builtin,
            k: c.k,
            grid: c.grid,
            damping: c.damping,
            max_iter: c.max_iter,
            seed: c.seed,
        },
        out: c.out,
        sweep,
        sweep_scale,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT as u8 } else { 0 });
        }
    };
    let inv = match cli.command {
        Cmd::Analyze(c) => invocation(Command::Analyze, c, 0, 1.0),
        Cmd::Solve { common, sweep, sweep_scale } => invocation(Command::Solve, common, sweep, sweep_scale),
        Cmd::CheckHypotheses(c) => invocation(Command::CheckHypotheses, c, 0, 1.0),
        Cmd::VerifyExample(c) => invocation(Command::VerifyExample, c, 0, 1.0),
    };
    let code = run(&inv);
    println!("{}: exit {code}, report in {}", inv.command.name(), inv.out.join("report.txt").display());
    ExitCode::from(code as u8)
}
