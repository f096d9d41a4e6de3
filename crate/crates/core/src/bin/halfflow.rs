use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use halfflow::checks::Suite;
use halfflow::config::ExperimentConfig;
use halfflow::error::Error;
use halfflow::exec::set_parallel;
use halfflow::runner::{exit_code, resolve_output_dir, run_calibrate, run_check, run_evolve};

/// Half-harmonic gradient flow from the circle into closed manifolds.
///
/// Set HALFFLOW_OUTPUT_DIR to redirect every output directory.
#[derive(Parser)]
#[command(name = "halfflow", version)]
struct Cli {
    /// Disable the data-parallel kernels.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the flow described by a config file.
    Evolve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a named check suite; exits with 4 if any check fails.
    Check {
        #[arg(long)]
        suite: Suite,
        #[arg(long = "M")]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the JSON report to this file.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Write calibration.json for every (s, M) pair.
    Calibrate {
        #[arg(long, value_delimiter = ',', required = true)]
        s: Vec<f64>,
        #[arg(long = "M", value_delimiter = ',', required = true)]
        m: Vec<usize>,
    },
}

fn fail(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(exit_code(&e) as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.sequential {
        set_parallel(false);
    }
    match cli.command {
        Command::Evolve { config } => {
            let cfg = match ExperimentConfig::from_file(&config) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            match run_evolve(&cfg) {
                Ok(s) => {
                    eprintln!(
                        "{} records written to {} in {:.2} s",
                        s.records.len(),
                        s.output_dir.display(),
                        s.wall_time
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::Check { suite, m, seed, report } => match run_check(suite, m, seed, report.as_deref()) {
            Ok(r) => {
                println!("{}", serde_json::to_string_pretty(&r).expect("report serializes"));
                if r.passed {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(4)
                }
            }
            Err(e) => fail(e),
        },
        Command::Calibrate { s, m } => {
            let dir = resolve_output_dir(&PathBuf::from("."));
            match run_calibrate(&s, &m, &dir) {
                Ok(t) => {
                    for c in &t.entries {
                        println!("s={} M={} c_disc={:.16e} c_dual={:.16e}", c.s, c.m, c.c_disc, c.c_dual);
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
    }
}
