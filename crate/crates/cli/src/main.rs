use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use fedmdp::checks::{run_suite, Suite};
use fedmdp::harness::{
    format_summary_table, output_paths, parse_config, parse_e, parse_kappa, read_results,
    run_experiment, summarize, write_experiment,
};

#[derive(Parser)]
#[command(name = "fedmdp", version, about = "Federated tabular RL experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Replace a config key, e.g. `num_task_seeds=5` or `family.gamma=0.8`.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Parallel task seeds (default: all cores).
        #[arg(long)]
        workers: Option<usize>,
        /// Output directory [default: config `output`, then $FEDMDP_OUT, then ./results].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a numerical property suite.
    Verify {
        /// lemmas, qavg_bound, counterexample, gradients or all
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Summarize a results CSV.
    Show {
        csv: PathBuf,
        #[arg(long)]
        algo: Option<String>,
        #[arg(long = "E", value_name = "E")]
        e: Option<String>,
        #[arg(long)]
        kappa: Option<String>,
    },
}

/// Exit status 2: the request itself is malformed.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn cmd_run(
    config: &Path,
    overrides: &[String],
    workers: Option<usize>,
    out: Option<PathBuf>,
) -> Result<()> {
    let text = std::fs::read_to_string(config)
        .map_err(|e| usage(format!("cannot read config {}: {e}", config.display())))?;
    let cfg =
        parse_config(&text, overrides).map_err(|e| usage(format!("{}: {e}", config.display())))?;
    let dir = out
        .or(cfg.output.clone())
        .or_else(|| std::env::var_os("FEDMDP_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results"));
    let workers = workers.or(cfg.workers).unwrap_or(0);
    if cfg.verbose {
        eprintln!(
            "running {} ({} task seeds, workers {}) into {}",
            cfg.spec.experiment_name(),
            cfg.spec.num_task_seeds,
            if workers == 0 {
                "auto".to_string()
            } else {
                workers.to_string()
            },
            dir.display()
        );
    }
    let rows = run_experiment(&cfg.spec, workers)?;
    let summaries = write_experiment(&cfg.spec, &rows, &dir)?;
    let (rows_path, summary_path) = output_paths(&cfg.spec, &dir);
    print!("{}", format_summary_table(&summaries));
    println!(
        "wrote {} and {}",
        rows_path.display(),
        summary_path.display()
    );
    Ok(())
}

fn cmd_verify(suite: &str, seed: u64) -> Result<()> {
    let suite: Suite = suite
        .parse()
        .map_err(|e: fedmdp::Error| usage(e.to_string()))?;
    let results = run_suite(suite, seed)?;
    for r in &results {
        println!("{r}");
    }
    if let Some(first) = results.iter().find(|r| !r.passed) {
        bail!(
            "property `{}` failed (worst slack {:e})",
            first.name,
            first.worst_slack
        );
    }
    Ok(())
}

fn cmd_show(csv: &Path, algo: Option<&str>, e: Option<&str>, kappa: Option<&str>) -> Result<()> {
    let e = e
        .map(parse_e)
        .transpose()
        .map_err(|err| usage(format!("--E: {err}")))?;
    let kappa = kappa
        .map(parse_kappa)
        .transpose()
        .map_err(|err| usage(format!("--kappa: {err}")))?;
    let rows: Vec<_> = read_results(csv)?
        .into_iter()
        .filter(|r| algo.is_none_or(|a| r.algorithm == a))
        .filter(|r| e.is_none_or(|e| r.e == e))
        .filter(|r| kappa.is_none_or(|k| r.kappa == k))
        .collect();
    if rows.is_empty() {
        println!("no rows");
        return Ok(());
    }
    print!(
        "{}",
        format_summary_table(&summarize(&rows).context("summarizing rows")?)
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run {
            config,
            overrides,
            workers,
            out,
        } => cmd_run(&config, &overrides, workers, out),
        Command::Verify { suite, seed } => cmd_verify(&suite, seed),
        Command::Show {
            csv,
            algo,
            e,
            kappa,
        } => cmd_show(&csv, algo.as_deref(), e.as_deref(), kappa.as_deref()),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if err.is::<UsageError>() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
