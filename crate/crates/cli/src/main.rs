//! Batch command-line front end: train value-function weights, run a single
//! closed-loop scenario, or run the full controller-comparison suite. All
//! numeric artifacts are deterministic under a fixed seed; every output file
//! lands inside the directory given by `--out`.

mod manifest;
mod tables;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use adptrack::config::{ScenarioFile, SuiteFile, TrainFile};
use adptrack::sim::{
    compute_metrics, metrics_csv, run_closed_loop, scenario_suite, trajectory_csv, RunOutcome,
};
use adptrack::train::{average_weights, train_runs};

use manifest::Manifest;

const EXIT_CONFIG: u8 = 2;
const EXIT_NO_CONVERGENCE: u8 = 3;
const EXIT_RUN_ABORT: u8 = 4;

#[derive(Parser)]
#[command(
    name = "adptrack",
    version,
    about = "Train and evaluate near-optimal tracking controllers in batch"
)]
struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured number of trainings, average the weights and write
    /// the weight file plus a JSON report.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed from the config file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run one closed-loop scenario and write trajectory and metrics CSVs.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Weight file for the ADP controller (overrides the config).
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the controller × scenario × payload comparison suite and emit
    /// aligned tables plus per-run metrics.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Error carrying a process exit code.
struct CliFailure {
    code: u8,
    error: anyhow::Error,
}

impl CliFailure {
    fn config(error: anyhow::Error) -> Self {
        Self {
            code: EXIT_CONFIG,
            error,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(err) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            eprintln!("warning: could not size the thread pool: {err}");
        }
    }
    let outcome = match cli.command {
        Command::Train { config, out, seed } => cmd_train(&config, &out, seed),
        Command::Simulate {
            config,
            weights,
            out,
        } => cmd_simulate(&config, weights.as_deref(), &out),
        Command::Compare { config, out } => cmd_compare(&config, &out),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {:#}", failure.error);
            ExitCode::from(failure.code)
        }
    }
}

fn read_config(path: &Path) -> Result<(String, String), CliFailure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))
        .map_err(CliFailure::config)?;
    let hash = manifest::sha256_hex(text.as_bytes());
    Ok((text, hash))
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

fn write_out(out_dir: &Path, name: &str, contents: &str, manifest: &mut Manifest) -> Result<()> {
    let path = out_dir.join(name);
    std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    manifest.record(name);
    Ok(())
}

fn cmd_train(config_path: &Path, out_dir: &Path, seed: Option<u64>) -> Result<(), CliFailure> {
    let (text, config_hash) = read_config(config_path)?;
    let file = TrainFile::parse(&text)
        .context("parsing training config")
        .map_err(CliFailure::config)?;
    let (plant, mut config) = file.build().map_err(|e| CliFailure::config(e.into()))?;
    if let Some(seed) = seed {
        config.rng_seed = seed;
    }

    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))
        .map_err(CliFailure::config)?;
    let mut manifest = Manifest::new("train", config_path, &config_hash, config.rng_seed);

    let runs = train_runs(&plant, &config).map_err(|e| CliFailure {
        code: EXIT_RUN_ABORT,
        error: anyhow::Error::from(e).context("training aborted"),
    })?;
    let stats = average_weights(&runs).map_err(|e| CliFailure {
        code: EXIT_RUN_ABORT,
        error: e.into(),
    })?;
    let averaged = stats.value_function(&runs[0]);

    let io_fail = |e: anyhow::Error| CliFailure {
        code: EXIT_RUN_ABORT,
        error: e,
    };
    write_out(out_dir, "weights.txt", &averaged.to_text(), &mut manifest).map_err(io_fail)?;
    let report = serde_json::json!({
        "config_sha256": config_hash,
        "seed": config.rng_seed,
        "runs": runs,
        "averaged_weights": stats.mean,
        "weight_std": stats.std,
    });
    write_out(
        out_dir,
        "report.json",
        &format!("{:#}\n", report),
        &mut manifest,
    )
    .map_err(io_fail)?;
    manifest.write(out_dir).map_err(io_fail)?;

    let unconverged: Vec<u64> = runs
        .iter()
        .filter(|r| !r.converged)
        .map(|r| r.seed)
        .collect();
    for run in &runs {
        println!(
            "run seed={} iterations={} converged={} hjb_mean={:.3e}",
            run.seed, run.iterations, run.converged, run.hjb_mean_abs_residual
        );
    }
    if !unconverged.is_empty() {
        return Err(CliFailure {
            code: EXIT_NO_CONVERGENCE,
            error: anyhow::anyhow!(
                "{} of {} runs hit the iteration cap before convergence (seeds {:?}); artifacts were still written",
                unconverged.len(),
                runs.len(),
                unconverged
            ),
        });
    }
    println!(
        "wrote {} and {}",
        out_dir.join("weights.txt").display(),
        out_dir.join("report.json").display()
    );
    Ok(())
}

fn cmd_simulate(
    config_path: &Path,
    weights: Option<&Path>,
    out_dir: &Path,
) -> Result<(), CliFailure> {
    let (text, config_hash) = read_config(config_path)?;
    let file = ScenarioFile::parse(&text)
        .context("parsing scenario config")
        .map_err(CliFailure::config)?;
    let scenario = file
        .build(weights, &base_dir(config_path))
        .map_err(|e| CliFailure::config(e.into()))?;

    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))
        .map_err(CliFailure::config)?;
    let mut manifest = Manifest::new("simulate", config_path, &config_hash, 0);

    let result = run_closed_loop(&scenario).map_err(|e| CliFailure {
        code: EXIT_RUN_ABORT,
        error: e.into(),
    })?;
    let io_fail = |e: anyhow::Error| CliFailure {
        code: EXIT_RUN_ABORT,
        error: e,
    };
    write_out(
        out_dir,
        "trajectory.csv",
        &trajectory_csv(&result.log),
        &mut manifest,
    )
    .map_err(io_fail)?;

    match &result.outcome {
        RunOutcome::Completed => {
            let metrics = compute_metrics(
                &result.log,
                &scenario.cost,
                &scenario.steady_windows,
                scenario.cost_window,
            )
            .map_err(|e| CliFailure {
                code: EXIT_RUN_ABORT,
                error: e.into(),
            })?;
            write_out(
                out_dir,
                "metrics.csv",
                &metrics_csv(&scenario.label, &metrics),
                &mut manifest,
            )
            .map_err(io_fail)?;
            write_out(
                out_dir,
                "metrics.txt",
                &tables::metrics_text(&scenario.label, &metrics),
                &mut manifest,
            )
            .map_err(io_fail)?;
            manifest.write(out_dir).map_err(io_fail)?;
            println!(
                "completed {} ticks; steady-state mean |e| = {:?} mm",
                result.log.len(),
                metrics.mean_abs_e_mm
            );
            Ok(())
        }
        RunOutcome::Aborted { reason, time } => {
            manifest.write(out_dir).map_err(io_fail)?;
            Err(CliFailure {
                code: EXIT_RUN_ABORT,
                error: anyhow::anyhow!(
                    "run aborted at t = {time:.3}s: {reason}; partial trajectory written"
                ),
            })
        }
    }
}

fn cmd_compare(config_path: &Path, out_dir: &Path) -> Result<(), CliFailure> {
    let (text, config_hash) = read_config(config_path)?;
    let file = SuiteFile::parse(&text)
        .context("parsing suite config")
        .map_err(CliFailure::config)?;
    let cases = file
        .build(&base_dir(config_path))
        .map_err(|e| CliFailure::config(e.into()))?;

    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))
        .map_err(CliFailure::config)?;
    let mut manifest = Manifest::new("compare", config_path, &config_hash, 0);

    let scenarios: Vec<_> = cases.iter().map(|c| c.run.clone()).collect();
    let entries = scenario_suite(&scenarios);

    let io_fail = |e: anyhow::Error| CliFailure {
        code: EXIT_RUN_ABORT,
        error: e,
    };
    write_out(
        out_dir,
        "suite_metrics.csv",
        &tables::suite_csv(&cases, &entries),
        &mut manifest,
    )
    .map_err(io_fail)?;
    for (name, contents) in tables::steady_state_tables(&cases, &entries) {
        write_out(out_dir, &name, &contents, &mut manifest).map_err(io_fail)?;
    }
    let (cost_csv, cost_txt) = tables::total_cost_tables(&cases, &entries);
    write_out(out_dir, "table_total_cost.csv", &cost_csv, &mut manifest).map_err(io_fail)?;
    write_out(out_dir, "table_total_cost.txt", &cost_txt, &mut manifest).map_err(io_fail)?;
    manifest.write(out_dir).map_err(io_fail)?;

    let failures: Vec<&str> = entries
        .iter()
        .filter(|e| !e.outcome.is_completed())
        .map(|e| e.label.as_str())
        .collect();
    println!(
        "suite finished: {} runs, {} failures",
        entries.len(),
        failures.len()
    );
    if !failures.is_empty() {
        println!("failed runs (annotated in tables): {failures:?}");
    }
    Ok(())
}
