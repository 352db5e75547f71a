//! Benchmark plans: named cells of generator spec, run configuration and seed count.
//!
//! Seed `s` of a cell generates data with `generator.seed + s` and fits with
//! `run.fit.seed + s`.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use gemss::{GeneratorSpec, Task};

use crate::settings::RunConfig;

/// Generating solutions planted in every desk cell.
pub const DESK_SOLUTIONS: usize = 3;
pub const DESK_SEEDS: usize = 3;
pub const DESK_FIT_SEED: u64 = 1000;
pub const LAMBDA_CLASSIFICATION: f64 = 200.0;
pub const LAMBDA_REGRESSION: f64 = 5000.0;
/// Credibility cut applied after top-D extraction.
pub const DESK_MIN_Z: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub name: String,
    pub generator: GeneratorSpec,
    pub run: RunConfig,
    pub n_seeds: usize,
}

impl PlanEntry {
    pub fn data_seed(&self, s: usize) -> u64 {
        self.generator.seed + s as u64
    }

    pub fn fit_seed(&self, s: usize) -> u64 {
        self.run.fit.seed + s as u64
    }

    pub fn with_seeds(mut self, n_seeds: usize) -> Self {
        self.n_seeds = n_seeds;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkPlan {
    pub name: String,
    pub entries: Vec<PlanEntry>,
}

impl BenchmarkPlan {
    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            bail!("benchmark plan '{}' has no entries", self.name);
        }
        let mut names: Vec<&str> = self.entries.iter().map(|e| e.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            bail!("duplicate plan entry name '{}'", w[0]);
        }
        for e in &self.entries {
            if e.n_seeds == 0 {
                bail!("plan entry '{}' has zero seeds", e.name);
            }
            if e.name.is_empty() || e.name.contains(['/', '\\', ',']) {
                bail!("plan entry name '{}' is not usable as a directory name", e.name);
            }
            e.generator
                .validate()
                .with_context(|| format!("plan entry '{}'", e.name))?;
        }
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read plan {}", path.display()))?;
        let plan: Self = serde_json::from_str(&text)
            .with_context(|| format!("cannot parse plan {}", path.display()))?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)
            .with_context(|| format!("cannot write plan {}", path.display()))
    }

    /// A built-in plan by name.
    pub fn named(name: &str) -> Result<Self> {
        Ok(match name {
            "desk" => desk_plan(),
            "baseline" => baseline_plan(),
            "smoke" => smoke_plan(),
            other => bail!("unknown built-in plan '{other}' (desk, baseline, smoke)"),
        })
    }
}

/// Desk defaults for one cell: `m = 3·N_sol`, top-D extraction with the credibility cut,
/// standardized features, and a task-specific penalty weight.
pub fn desk_run(task: Task, sparsity: usize) -> RunConfig {
    let mut run = RunConfig::default();
    run.fit.n_components = 3 * DESK_SOLUTIONS;
    run.fit.prior.sparsity = sparsity;
    run.fit.lambda_jaccard = match task {
        Task::Classification => LAMBDA_CLASSIFICATION,
        Task::Regression => LAMBDA_REGRESSION,
    };
    run.fit.seed = DESK_FIT_SEED;
    run.extraction.min_z = Some(DESK_MIN_Z);
    run.task = Some(task);
    run
}

pub fn cell(name: &str, n: usize, p: usize, sparsity: usize, task: Task) -> PlanEntry {
    PlanEntry {
        name: name.to_string(),
        generator: GeneratorSpec {
            n_samples: n,
            n_features: p,
            n_solutions: DESK_SOLUTIONS,
            sparsity,
            task,
            ..GeneratorSpec::default()
        },
        run: desk_run(task, sparsity),
        n_seeds: DESK_SEEDS,
    }
}

pub const TIER1_SIZES: [(usize, usize); 3] = [(50, 100), (100, 200), (200, 500)];
pub const TIER1_SPARSITY: [usize; 2] = [3, 5];
pub const TIER4_NOISE: [f64; 3] = [0.1, 0.5, 1.0];
pub const TIER4_NAN: [f64; 3] = [0.0, 0.1, 0.3];
pub const TIER7_PREVALENCE: [f64; 2] = [0.1, 0.5];

pub fn tier1_name(task: Task, n: usize, p: usize, s: usize) -> String {
    let tier = match task {
        Task::Classification => "t1",
        Task::Regression => "t6",
    };
    format!("{tier}_n{n}_p{p}_s{s}")
}

pub fn tier1(task: Task) -> Vec<PlanEntry> {
    let mut out = Vec::new();
    for (n, p) in TIER1_SIZES {
        for s in TIER1_SPARSITY {
            out.push(cell(&tier1_name(task, n, p, s), n, p, s, task));
        }
    }
    out
}

pub fn tier2() -> PlanEntry {
    cell("t2_n100_p1000_s5", 100, 1000, 5, Task::Classification)
}

pub fn tier4_name(noise: f64, nan: f64) -> String {
    format!("t4_noise{noise}_nan{nan}")
}

pub fn tier4() -> Vec<PlanEntry> {
    let mut out = Vec::new();
    for noise in TIER4_NOISE {
        for nan in TIER4_NAN {
            let mut e = cell(&tier4_name(noise, nan), 100, 200, 5, Task::Classification);
            e.generator.noise_std = noise;
            e.generator.nan_ratio = nan;
            out.push(e);
        }
    }
    out
}

pub fn tier7_name(prevalence: f64) -> String {
    format!("t7_prev{prevalence}")
}

pub fn tier7() -> Vec<PlanEntry> {
    TIER7_PREVALENCE
        .iter()
        .map(|&q| {
            let mut e = cell(&tier7_name(q), 200, 500, 5, Task::Classification);
            e.generator.class_balance = q;
            e
        })
        .collect()
}

/// Tier 1 only.
pub fn baseline_plan() -> BenchmarkPlan {
    BenchmarkPlan {
        name: "baseline".into(),
        entries: tier1(Task::Classification),
    }
}

/// Tiers 1, 2, 4, 7 and the regression mirrors of tier 1.
pub fn desk_plan() -> BenchmarkPlan {
    let mut entries = tier1(Task::Classification);
    entries.push(tier2());
    entries.extend(tier4());
    entries.extend(tier7());
    entries.extend(tier1(Task::Regression));
    BenchmarkPlan {
        name: "desk".into(),
        entries,
    }
}

/// Two tiny cells that finish in about a second.
pub fn smoke_plan() -> BenchmarkPlan {
    let small = |name: &str, task: Task| {
        let mut e = cell(name, 40, 30, 2, task).with_seeds(2);
        e.run.fit.n_iterations = 800;
        e.run.fit.batch_size = 40;
        e
    };
    BenchmarkPlan {
        name: "smoke".into(),
        entries: vec![
            small("smoke_cls", Task::Classification),
            small("smoke_reg", Task::Regression),
        ],
    }
}
