use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use irs_direct::harness::{emit_csv, load_config, run_experiment, run_trial, self_check, ExperimentSpec};
use irs_direct::schemes::{run_scheme, SchemeId};
use irs_direct::Error;

/// Multi-cell IRS training and optimization benchmarks.
#[derive(Parser)]
#[command(name = "irsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Overrides `system.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Runs the full sweep and writes the CSV table.
    Run {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Overrides `experiment.output`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runs one trial of one scheme and prints diagnostics.
    Single {
        config: PathBuf,
        #[arg(long)]
        scheme: SchemeId,
        #[arg(long, default_value_t = 0)]
        trial: u64,
        /// Sweep value to use (default: the first one).
        #[arg(long)]
        value: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Runs the built-in invariant self-tests.
    Check,
}

enum Failure {
    Config(Error),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn load(path: &PathBuf, common: &Common) -> Result<ExperimentSpec, Failure> {
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Runtime(format!("thread pool: {e}")))?;
    }
    let mut spec = load_config(path).map_err(Failure::Config)?;
    if let Some(seed) = common.seed {
        spec.base.rng_seed = seed;
    }
    Ok(spec)
}

fn run(config: PathBuf, common: Common, out: Option<PathBuf>) -> Result<(), Failure> {
    let mut spec = load(&config, &common)?;
    if let Some(out) = out {
        spec.output_path = out;
    }
    let start = Instant::now();
    let table = run_experiment(&spec)?;
    for row in &table.rows {
        let failed: usize = row.failures.iter().sum();
        if failed > 0 {
            eprintln!("{} = {}: {failed} failed scheme runs excluded", spec.sweep.variable.column(), row.value);
            for (id, n) in spec.schemes.iter().zip(&row.failures).filter(|(_, n)| **n > 0) {
                eprintln!("  {id}: {n}");
            }
        }
    }
    emit_csv(&table, &spec.output_path)?;
    eprintln!(
        "wrote {} ({} rows, {} trials each, {:.1} s)",
        spec.output_path.display(),
        table.rows.len(),
        spec.n_trials,
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

fn single(config: PathBuf, scheme: SchemeId, trial: u64, value: Option<f64>, common: Common) -> Result<(), Failure> {
    let mut spec = load(&config, &common)?;
    let value = value.unwrap_or(spec.sweep.values[0]);
    let cfg = spec.config_at(value).map_err(Failure::Config)?;
    spec.schemes = vec![scheme];
    let start = Instant::now();
    let result = run_trial(&spec, &cfg, trial, &run_scheme).remove(0)?;
    println!("scheme            {scheme} ({})", scheme.csv_label());
    println!("{:<18}{value}", spec.sweep.variable.column());
    println!("trial             {trial} (base seed {})", spec.base.rng_seed);
    println!("dl sum rate       {:.6}", result.dl_sum_rate);
    println!("dl per user       {:?}", result.per_user_dl_rate);
    println!("ul sum rate       {:.6}", result.ul_sum_rate);
    println!("ul per user       {:?}", result.per_user_ul_rate);
    println!("training symbols  {}", result.training_symbols_used);
    println!("ascent iterations {}", result.iterations);
    println!(
        "flags             stalled={} pinv_used={} ls_clamped={}",
        result.flags.stalled, result.flags.pinv_used, result.flags.ls_clamped
    );
    println!("elapsed           {:.3} s", start.elapsed().as_secs_f64());
    Ok(())
}

fn check() -> Result<(), Failure> {
    let outcomes = self_check();
    let mut failed = 0;
    for c in &outcomes {
        println!("{} {:<28} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        failed += usize::from(!c.passed);
    }
    if failed > 0 {
        return Err(Failure::Runtime(format!("{failed} of {} checks failed", outcomes.len())));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Run { config, common, out } => run(config, common, out),
        Command::Single {
            config,
            scheme,
            trial,
            value,
            common,
        } => single(config, scheme, trial, value, common),
        Command::Check => check(),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
