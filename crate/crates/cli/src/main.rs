use std::path::PathBuf;
use std::process::ExitCode;

use atriv_cli::{run_experiment, run_grid_dir, CliError, ExperimentConfig};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bench", about = "Run trivialization optimizer experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a `key = value` config file.
    Run {
        config: PathBuf,
        #[arg(long)]
        algo: Option<String>,
        #[arg(long)]
        k: Option<String>,
        #[arg(long)]
        opt: Option<String>,
        #[arg(long)]
        lr: Option<String>,
        #[arg(long)]
        iters: Option<String>,
        #[arg(long)]
        seed: Option<String>,
        #[arg(long)]
        n: Option<String>,
        #[arg(long)]
        problem: Option<String>,
        #[arg(long)]
        out: Option<String>,
        /// Further `key=value` overrides.
        overrides: Vec<String>,
    },
    /// Run every `*.cfg` file in a directory, in parallel.
    Grid {
        dir: PathBuf,
        /// Aggregated summary path (default: `<dir>/summary.csv`).
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Run the invariant self-checks.
    Selftest,
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("bench: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, algo, k, opt, lr, iters, seed, n, problem, out, overrides } => {
            let flags = [
                ("algo", algo),
                ("k", k),
                ("opt", opt),
                ("lr", lr),
                ("iters", iters),
                ("seed", seed),
                ("n", n),
                ("problem", problem),
                ("out", out),
            ];
            let mut all: Vec<String> = flags
                .into_iter()
                .filter_map(|(key, value)| value.map(|v| format!("{key}={v}")))
                .collect();
            all.extend(overrides);
            let config = match ExperimentConfig::from_file(&config, &all) {
                Ok(c) => c,
                Err(e) => return fail(&e),
            };
            match run_experiment(&config) {
                Ok((_, summary)) => {
                    println!("{}", atriv_cli::SUMMARY_HEADER);
                    println!("{}", summary.to_csv_line());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
        Command::Grid { dir, summary } => {
            let summary = summary.unwrap_or_else(|| dir.join("summary.csv"));
            match run_grid_dir(&dir, &summary) {
                Ok(outcome) => {
                    print!("{}", atriv_cli::summary_csv(&outcome.rows));
                    for (label, e) in &outcome.failures {
                        eprintln!("bench: {label}: {e}");
                    }
                    if outcome.failures.is_empty() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    }
                }
                Err(e) => fail(&e),
            }
        }
        Command::Selftest => {
            let outcomes = atriv_core::selftest::run_selftest();
            for o in &outcomes {
                println!("{} {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
            }
            if outcomes.iter().all(|o| o.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
    }
}
