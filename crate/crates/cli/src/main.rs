mod commands;
mod config;
mod error;
mod report;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use rayon::prelude::*;
use serde_json::Value;

use commands::Command;
use error::CliError;

const AFTER_HELP: &str = "\
Solver defaults (volatility preset): lambda0 = 10, batch 100, 4000 iterations,
martingale penalty weight xi = 100, eta = 1e-6, test-function clamp [-50, 50],
entropic regularizer 0.01*lambda + 1e-5. The prediction preset uses lambda0 = 1,
batch 32, 2000 iterations and clamps h in [-1, 1], M in [-0.5, 0.5].

Errors are printed as {\"error\": {\"class\", \"message\"}} with exit codes:
config 3, dimension 10, domain 11, parameter 12, measure 13, coupling 14,
missing_cell 15, infeasible 16, unbounded 17, convergence 18, numeric 19,
divergence 20, csv 21, json 22, io 23.";

/// Worst-case expectations over causal transport balls.
#[derive(Debug, Parser)]
#[command(name = "cotdre", version, after_help = AFTER_HELP)]
struct Cli {
    #[arg(value_enum)]
    command: Command,

    /// JSON run configuration
    #[arg(long)]
    config: Option<PathBuf>,

    /// Seed; overrides the one in the config
    #[arg(long)]
    seed: Option<u64>,

    /// Report file (for `gen`: output directory; for `quantize`: CSV file)
    #[arg(long)]
    out: Option<PathBuf>,

    /// Independent runs with seeds seed, seed+1, ...
    #[arg(long, default_value_t = 1)]
    repeats: usize,

    /// Cap on parallel repeats
    #[arg(long, env = "COTDRE_THREADS")]
    threads: Option<usize>,
}

fn execute(cli: &Cli) -> Result<(Value, Option<PathBuf>), CliError> {
    let start = Instant::now();
    let base = config::load(cli.config.as_deref(), cli.seed)?;
    if cli.repeats == 0 {
        return Err(CliError::config("--repeats must be positive"));
    }
    let (result, report_path) = if cli.repeats == 1 {
        let report_path = match cli.command {
            Command::Gen | Command::Quantize => None,
            _ => cli.out.clone(),
        };
        (commands::run(cli.command, &base, cli.out.as_deref())?, report_path)
    } else {
        if !cli.command.repeatable() {
            return Err(CliError::config(format!(
                "{} does not support --repeats",
                cli.command.name()
            )));
        }
        let seeds: Vec<u64> = (0..cli.repeats as u64).map(|i| base.seed.wrapping_add(i)).collect();
        let mut pool = rayon::ThreadPoolBuilder::new();
        if let Some(t) = cli.threads {
            pool = pool.num_threads(t.max(1));
        }
        let pool = pool
            .build()
            .map_err(|e| CliError::config(format!("thread pool: {e}")))?;
        let runs: Vec<Value> = pool.install(|| {
            seeds
                .par_iter()
                .map(|&s| {
                    let inputs = config::load(cli.config.as_deref(), Some(s))?;
                    commands::run(cli.command, &inputs, None)
                })
                .collect::<Result<_, CliError>>()
        })?;
        (report::aggregate(&seeds, runs), cli.out.clone())
    };
    let report = report::envelope(
        cli.command,
        base.seed,
        &base.digest,
        &base.raw_config,
        result,
        start.elapsed().as_secs_f64(),
    );
    Ok((report, report_path))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = execute(&cli).and_then(|(report, path)| {
        let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
        text.push('\n');
        match path {
            Some(p) => fs::write(&p, &text).map_err(|e| CliError::new("io", format!("{}: {e}", p.display()))),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            println!("{}", e.to_json());
            eprintln!("cotdre: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
