//! The subcommands as library functions; each returns a one-line summary.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;

use gemss::extract::{read_solutions_csv, solution_union, write_solutions_csv};
use gemss::synthgen::GroundTruthFile;
use gemss::{
    extract, fit, generate, scale_features, score, Dataset, ExtractionSpec, GeneratorSpec,
    VariationalState,
};

use crate::plan::{BenchmarkPlan, PlanEntry};
use crate::report::{aggregate, append_rows, write_rows, ResultRow};
use crate::settings::RunConfig;

pub const DATA_FILE: &str = "data.csv";
pub const TRUTH_FILE: &str = "ground_truth.json";
pub const STATE_FILE: &str = "state.csv";
pub const TRACE_FILE: &str = "trace.csv";
pub const CONFIG_FILE: &str = "config.txt";
pub const SOLUTIONS_FILE: &str = "solutions.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const RUNS_DIR: &str = "runs";
/// Target column name used for generated datasets.
pub const TARGET: &str = "target";

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

/// Writes `data.csv` and `ground_truth.json` into `out_dir`.
pub fn cmd_generate(spec: &GeneratorSpec, out_dir: &Path) -> Result<String> {
    ensure_dir(out_dir)?;
    let (ds, gt) = generate(spec)?;
    ds.write_csv(&out_dir.join(DATA_FILE), TARGET)?;
    let truth = GroundTruthFile {
        spec: spec.clone(),
        feature_names: ds.feature_names().to_vec(),
        ground_truth: gt,
    };
    truth.write(&out_dir.join(TRUTH_FILE))?;
    Ok(format!(
        "generated {} × {} {} dataset with {} supports of size {} in {}",
        spec.n_samples,
        spec.n_features,
        spec.task,
        spec.n_solutions,
        spec.sparsity,
        out_dir.display()
    ))
}

/// Reads and scales a dataset as `run` prescribes.
pub fn load_dataset(path: &Path, run: &RunConfig) -> Result<Dataset> {
    let ds = Dataset::read_csv(path, &run.target_column, run.task)
        .with_context(|| format!("cannot load dataset {}", path.display()))?;
    Ok(scale_features(&ds, run.scaling).0)
}

/// Fits an in-memory dataset and writes state, trace, solutions and the resolved config.
pub fn fit_and_write(ds: &Dataset, run: &RunConfig, out_dir: &Path) -> Result<Vec<gemss::CandidateSolution>> {
    ensure_dir(out_dir)?;
    let result = fit(ds, &run.fit)?;
    result.state.write_csv(&out_dir.join(STATE_FILE), ds.feature_names())?;
    result.trace.write_csv(&out_dir.join(TRACE_FILE))?;
    std::fs::write(out_dir.join(CONFIG_FILE), run.to_kv_string())?;
    let sols = extract(&result.state, &run.resolved_extraction())?;
    write_solutions_csv(&out_dir.join(SOLUTIONS_FILE), &sols, ds.feature_names())?;
    Ok(sols)
}

pub fn cmd_fit(data: &Path, run: &RunConfig) -> Result<String> {
    let ds = load_dataset(data, run)?;
    let sols = fit_and_write(&ds, run, &run.output_dir)?;
    Ok(format!(
        "fitted {} components on {} × {} ({}); {} distinct features selected; artifacts in {}",
        run.fit.n_components,
        ds.n_samples(),
        ds.n_features(),
        ds.task(),
        solution_union(&sols).len(),
        run.output_dir.display()
    ))
}

pub fn cmd_extract(state_path: &Path, spec: &ExtractionSpec, out: &Path) -> Result<String> {
    let (state, names) = VariationalState::read_csv(state_path)
        .with_context(|| format!("cannot read state {}", state_path.display()))?;
    let sols = extract(&state, spec)?;
    write_solutions_csv(out, &sols, &names)?;
    Ok(format!(
        "{} candidate solutions ({} mode), {} distinct features, written to {}",
        sols.len(),
        spec.mode,
        solution_union(&sols).len(),
        out.display()
    ))
}

/// Scores the union of the solutions against the ground truth and appends a results row.
pub fn evaluate_files(solutions: &Path, truth: &Path, case: &str, seed: &str) -> Result<ResultRow> {
    let sols = read_solutions_csv(solutions)
        .with_context(|| format!("cannot read solutions {}", solutions.display()))?;
    let gt = GroundTruthFile::read(truth)?;
    let p = gt.spec.n_features;
    let found = solution_union(&sols);
    if let Some(&j) = found.iter().find(|&&j| j >= p) {
        bail!("solution feature {j} is out of range for p = {p} in {}", truth.display());
    }
    let m = score(&found, &gt.ground_truth.generating_features(), p)?;
    ResultRow::new(case, gt.spec.n_samples, p, seed, &m)
}

pub fn cmd_evaluate(solutions: &Path, truth: &Path, out: &Path, case: &str) -> Result<String> {
    let seed = GroundTruthFile::read(truth)?.spec.seed.to_string();
    let row = evaluate_files(solutions, truth, case, &seed)?;
    append_rows(out, std::slice::from_ref(&row))?;
    Ok(format!(
        "{case}: F1 {:.3} (recall {:.3}, precision {:.3}, ASI {:.3}) {}; row appended to {}",
        row.f1,
        row.recall,
        row.precision,
        row.asi,
        row.category,
        out.display()
    ))
}

pub fn run_dir(out_dir: &Path, entry: &PlanEntry, s: usize) -> PathBuf {
    out_dir
        .join(RUNS_DIR)
        .join(format!("{}_seed{}", entry.name, entry.data_seed(s)))
}

/// Generate, fit, extract and score one seed of one cell, leaving every artifact on disk.
pub fn run_cell(entry: &PlanEntry, s: usize, out_dir: &Path) -> Result<ResultRow> {
    let dir = run_dir(out_dir, entry, s);
    let spec = GeneratorSpec {
        seed: entry.data_seed(s),
        ..entry.generator.clone()
    };
    cmd_generate(&spec, &dir)?;
    let mut run = entry.run.clone();
    run.fit.seed = entry.fit_seed(s);
    run.target_column = TARGET.into();
    run.task = Some(spec.task);
    run.output_dir = dir.clone();
    let ds = load_dataset(&dir.join(DATA_FILE), &run)?;
    fit_and_write(&ds, &run, &dir)?;
    let row = evaluate_files(
        &dir.join(SOLUTIONS_FILE),
        &dir.join(TRUTH_FILE),
        &entry.name,
        &spec.seed.to_string(),
    )?;
    write_rows(&dir.join(METRICS_FILE), std::slice::from_ref(&row))?;
    log::info!("{} seed {}: F1 {:.3}", entry.name, spec.seed, row.f1);
    Ok(row)
}

/// Runs every (cell, seed) pair on `jobs` threads. Output does not depend on `jobs`.
pub fn run_plan(plan: &BenchmarkPlan, out_dir: &Path, jobs: usize) -> Result<Vec<ResultRow>> {
    plan.validate()?;
    ensure_dir(out_dir)?;
    let tasks: Vec<(&PlanEntry, usize)> = plan
        .entries
        .iter()
        .flat_map(|e| (0..e.n_seeds).map(move |s| (e, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .context("cannot start worker threads")?;
    pool.install(|| {
        tasks
            .par_iter()
            .map(|&(e, s)| {
                run_cell(e, s, out_dir).with_context(|| format!("cell {} seed index {s}", e.name))
            })
            .collect()
    })
}

/// Writes `results.csv` (per run) and `summary.csv` (per run plus per-case means).
pub fn cmd_benchmark(plan: &BenchmarkPlan, out_dir: &Path, jobs: usize) -> Result<String> {
    let rows = run_plan(plan, out_dir, jobs)?;
    write_rows(&out_dir.join(RESULTS_FILE), &rows)?;
    let means = aggregate(&rows)?;
    let mut summary = rows.clone();
    summary.extend(means.iter().cloned());
    write_rows(&out_dir.join(SUMMARY_FILE), &summary)?;
    let overall = means.iter().map(|r| r.f1).sum::<f64>() / means.len() as f64;
    Ok(format!(
        "benchmark '{}': {} runs over {} cells, mean cell F1 {:.3}; summary in {}",
        plan.name,
        rows.len(),
        means.len(),
        overall,
        out_dir.join(SUMMARY_FILE).display()
    ))
}
