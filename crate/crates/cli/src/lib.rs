//! Scenario-driven front end for `geomech`: parse and validate a scenario
//! file, integrate it, and write trajectory, reaction and report files.

pub mod run;
pub mod scenario;
pub mod verify;

use std::path::{Path, PathBuf};

use clap::Parser;

pub use run::{run, RunError, RunOptions, RunReport};
pub use scenario::{parse_scenario, Scenario, ScenarioError, System};
pub use verify::{verify, VerifyReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Clone, Parser)]
#[command(name = "simulate", version, about = "Integrate particle-system scenarios")]
pub struct Args {
    /// Scenario files; several are run in parallel.
    #[arg(required = true)]
    pub scenarios: Vec<PathBuf>,
    /// Directory for outputs with relative paths.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Also run the constrained reference integrator and report deviations.
    #[arg(long)]
    pub compare_oracle: bool,
    /// Seed for the randomized invariant checks of `--verify`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Run the invariant suite on each scenario's system instead of integrating.
    #[arg(long)]
    pub verify: bool,
}

/// Result of processing one file: exit code and human-readable lines for
/// stdout and stderr.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub code: i32,
    pub stdout: Vec<String>,
    pub stderr: Vec<String>,
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".into())
}

pub fn process_file(path: &Path, args: &Args) -> Outcome {
    let label = path.display().to_string();
    let mut out = Outcome::default();
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            out.code = EXIT_IO;
            out.stderr.push(format!("{label}: {e}"));
            return out;
        }
    };
    let scenario = match parse_scenario(&text) {
        Ok(s) => s,
        Err(e) => {
            out.code = EXIT_VALIDATION;
            out.stderr.push(format!("{label}: {e}"));
            return out;
        }
    };
    if args.verify {
        match verify(&scenario, args.seed) {
            Ok(report) => {
                for c in &report.checks {
                    out.stdout.push(format!(
                        "{label}: {} {} (worst {:.3e}, tolerance {:.0e})",
                        if c.pass { "PASS" } else { "FAIL" },
                        c.name,
                        c.worst,
                        c.tolerance
                    ));
                }
                if !report.passed() {
                    out.code = EXIT_NUMERICAL;
                }
            }
            Err(e) => {
                out.code = EXIT_NUMERICAL;
                out.stderr.push(format!("{label}: {e}"));
            }
        }
        return out;
    }
    let opts = RunOptions {
        out_dir: args.out_dir.clone(),
        stem: stem(path),
        compare_oracle: args.compare_oracle,
    };
    match run(&scenario, &opts) {
        Ok(report) => out.stdout.push(format!(
            "{label}: {} records -> {}, {}, {}",
            report.records, report.files.trajectory, report.files.reactions, report.files.report
        )),
        Err(RunError::Io(e)) => {
            out.code = EXIT_IO;
            out.stderr.push(format!("{label}: {e}"));
        }
        Err(e @ RunError::Numerical { .. }) => {
            out.code = EXIT_NUMERICAL;
            out.stderr.push(format!("{label}: {e}"));
        }
    }
    out
}

/// Process every scenario (in parallel when there are several) and return
/// the outcomes in argument order.
pub fn process_all(args: &Args) -> Vec<Outcome> {
    if args.scenarios.len() == 1 {
        return vec![process_file(&args.scenarios[0], args)];
    }
    std::thread::scope(|s| {
        let handles: Vec<_> = args
            .scenarios
            .iter()
            .map(|p| s.spawn(move || process_file(p, args)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("scenario worker panicked"))
            .collect()
    })
}

/// Overall exit code: the most severe outcome.
pub fn exit_code(outcomes: &[Outcome]) -> i32 {
    outcomes.iter().map(|o| o.code).max().unwrap_or(EXIT_OK)
}
