use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use pretest_lab::report::{run, Command, Overrides};
use pretest_lab::EstimatorPair;

#[derive(Parser)]
#[command(
    name = "pretest-lab",
    version,
    about = "Coverage and expected length of the two-stage interval after a Hausman pretest"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Flat TOML config, or the manifest of an earlier run
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo replicates M
    #[arg(long, global = true)]
    replicates: Option<usize>,
    /// Worker threads (results do not depend on this)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum)]
    estimator: Option<Estimator>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Coverage against λ for each α̃
    Figure1,
    /// Minimum coverage over τ against ρ
    Figure2,
    /// Minimum coverage over τ against ψ
    Figure3,
    /// Min and max scaled expected length
    Table1,
    /// Control-variate efficiency report
    Efficiency,
    /// Coverage estimators for a single scenario
    Coverage,
    /// Scaled expected length for a single scenario
    Sel,
}

#[derive(ValueEnum, Clone, Copy)]
enum Estimator {
    Unbiased,
    Ml,
    Wooldridge0,
    Wooldridge2,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = match cli.command {
        Cmd::Figure1 => Command::Figure1,
        Cmd::Figure2 => Command::Figure2,
        Cmd::Figure3 => Command::Figure3,
        Cmd::Table1 => Command::Table1,
        Cmd::Efficiency => Command::Efficiency,
        Cmd::Coverage => Command::Coverage,
        Cmd::Sel => Command::Sel,
    };
    let overrides = Overrides {
        config: cli.config,
        out: cli.out,
        seed: cli.seed,
        replicates: cli.replicates,
        threads: cli.threads,
        estimator: cli.estimator.map(|e| match e {
            Estimator::Unbiased => EstimatorPair::Unbiased,
            Estimator::Ml => EstimatorPair::HsiaoMl,
            Estimator::Wooldridge0 => EstimatorPair::Wooldridge { k: 0 },
            Estimator::Wooldridge2 => EstimatorPair::Wooldridge { k: 2 },
        }),
    };
    match run(command, &overrides) {
        Ok(outcome) => {
            print!("{}", outcome.stdout);
            for (path, _) in &outcome.outputs {
                eprintln!("wrote {}", path.display());
            }
            if let Some(m) = outcome.manifest {
                eprintln!("wrote {}", m.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
