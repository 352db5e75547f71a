use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Result};
use clap::{Args, Parser, Subcommand};

use gemss_cli::plan::BenchmarkPlan;
use gemss_cli::settings::{generator_from_settings, Settings, GENERATOR_KEYS, RUN_KEYS};
use gemss_cli::{cmd_benchmark, cmd_evaluate, cmd_extract, cmd_fit, cmd_generate, RunConfig};

/// Find several diverse sparse feature subsets that each explain a target.
#[derive(Parser)]
#[command(name = "gemss", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Key-value configuration file (`KEY = value` per line).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set LAMBDA_JACCARD=200`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn settings(&self, allowed: &[&[&str]]) -> Result<Settings> {
        let mut s = match &self.config {
            Some(path) => Settings::from_file(path)?,
            None => Settings::default(),
        };
        for o in &self.overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| anyhow!("--set expects KEY=VALUE, got '{o}'"))?;
            s.set(k, v);
        }
        s.check_keys(allowed)?;
        Ok(s)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with planted alternative supports.
    ///
    /// Keys: N_SAMPLES, N_FEATURES, N_GENERATING_SOLUTIONS, SPARSITY, NOISE_STD,
    /// NAN_RATIO, CLASS_BALANCE, WEIGHT_MIN, WEIGHT_MAX, TASK, SEED.
    Generate {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Output directory for data.csv and ground_truth.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a CSV dataset; writes state, trace, solutions and the resolved config.
    Fit {
        /// CSV file with a header row; empty cells and NaN are missing values.
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Output directory (overrides OUTPUT_DIR).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Extract candidate solutions from a saved state.
    Extract {
        #[arg(long)]
        state: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Solutions CSV to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score solutions against a ground-truth file and append a results row.
    Evaluate {
        #[arg(long)]
        solutions: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Results CSV (created with a header when absent).
        #[arg(long)]
        out: PathBuf,
        /// Case label for the row.
        #[arg(long, default_value = "run")]
        case: String,
    },
    /// Run a benchmark plan: per-run artifacts, results.csv and summary.csv.
    Benchmark {
        /// Built-in plan (desk, baseline, smoke) or a JSON plan file.
        #[arg(long, default_value = "desk")]
        plan: String,
        #[arg(long, default_value = "gemss_benchmark")]
        out: PathBuf,
        /// Worker threads; results do not depend on this.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Override the seed count of every cell.
        #[arg(long)]
        seeds: Option<usize>,
        /// Write the plan as JSON to this file and exit.
        #[arg(long)]
        dump_plan: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Generate { cfg, out } => {
            let s = cfg.settings(&[GENERATOR_KEYS])?;
            cmd_generate(&generator_from_settings(&s)?, &out)
        }
        Command::Fit { data, cfg, out } => {
            let mut rc = RunConfig::from_settings(&cfg.settings(&[RUN_KEYS])?)?;
            if let Some(out) = out {
                rc.output_dir = out;
            }
            cmd_fit(&data, &rc)
        }
        Command::Extract { state, cfg, out } => {
            let rc = RunConfig::from_settings(&cfg.settings(&[RUN_KEYS])?)?;
            cmd_extract(&state, &rc.resolved_extraction(), &out)
        }
        Command::Evaluate {
            solutions,
            truth,
            out,
            case,
        } => cmd_evaluate(&solutions, &truth, &out, &case),
        Command::Benchmark {
            plan,
            out,
            jobs,
            seeds,
            dump_plan,
        } => {
            let path = PathBuf::from(&plan);
            let mut plan = if path.is_file() {
                BenchmarkPlan::read(&path)?
            } else {
                BenchmarkPlan::named(&plan)?
            };
            if let Some(n) = seeds {
                for e in &mut plan.entries {
                    e.n_seeds = n;
                }
            }
            if let Some(dump) = dump_plan {
                plan.write(&dump)?;
                return Ok(format!("plan '{}' written to {}", plan.name, dump.display()));
            }
            cmd_benchmark(&plan, &out, jobs)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
