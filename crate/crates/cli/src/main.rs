use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nhlab_core::acceptance;
use nhlab_core::scenario::{parse_scenario, run_pipeline, Pipeline, ScenarioError};

/// Run non-Hermitian Hamiltonian scenarios and the acceptance checks.
#[derive(Parser)]
#[command(name = "nhlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Diagonalize H and certify the metric Q.
    Qmetric(RunArgs),
    /// Find the amplitude-maximizing boundary states and check reality of weak values.
    Maximize(RunArgs),
    /// Track survival weights and the decay of the non-top components.
    Emerge(RunArgs),
    /// Optimize the initial point of a classical path and measure saddle dwell.
    Classical(RunArgs),
    /// Run the N-mode inflaton toy.
    Inflaton(RunArgs),
    /// Run the acceptance criteria and print one line per criterion.
    Selftest {
        /// Run only these criterion ids.
        #[arg(long = "criterion", value_name = "ID")]
        criteria: Vec<u32>,
        #[arg(long)]
        quiet: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (JSON).
    #[arg(long, value_name = "FILE")]
    scenario: PathBuf,
    /// Directory for summary.json and CSV tables; the summary goes to stdout otherwise.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Top-level seed; overrides every seed in the scenario.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (pipeline, args) = match cli.command {
        Command::Qmetric(a) => (Pipeline::Qmetric, a),
        Command::Maximize(a) => (Pipeline::Maximize, a),
        Command::Emerge(a) => (Pipeline::Emerge, a),
        Command::Classical(a) => (Pipeline::Classical, a),
        Command::Inflaton(a) => (Pipeline::Inflaton, a),
        Command::Selftest { criteria, quiet } => return selftest(&criteria, quiet),
    };
    match run(pipeline, &args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nhlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn read(path: &Path) -> Result<String, ScenarioError> {
    std::fs::read_to_string(path).map_err(|e| ScenarioError::Io(format!("{}: {e}", path.display())))
}

fn run(pipeline: Pipeline, args: &RunArgs) -> Result<(), ScenarioError> {
    let mut scenario = parse_scenario(&read(&args.scenario)?)?;
    if args.seed.is_some() {
        scenario.seed = args.seed;
    }
    let bundle = run_pipeline(&scenario, pipeline)?;
    match &args.out {
        Some(dir) => {
            let written = bundle.write_to(dir)?;
            if !args.quiet {
                for p in written {
                    println!("{}", p.display());
                }
            }
        }
        None if !args.quiet => print!("{}", bundle.summary_json()),
        None => {}
    }
    Ok(())
}

fn selftest(criteria: &[u32], quiet: bool) -> ExitCode {
    let ids: Vec<u32> = if criteria.is_empty() {
        acceptance::CRITERIA.iter().map(|(id, _)| *id).collect()
    } else {
        criteria.to_vec()
    };
    let mut all_passed = true;
    for id in ids {
        let Some(report) = acceptance::run(id) else {
            eprintln!("nhlab: no criterion {id}");
            return ExitCode::from(2);
        };
        all_passed &= report.passed;
        if !quiet || !report.passed {
            println!("{report}");
        }
    }
    if all_passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(4)
    }
}
