//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! Criteria 8 to 12 are exact or property checks and take seconds. Criteria 1 to 7
//! fit desk-scale benchmark cells (a few minutes on one core).

use std::collections::BTreeSet;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gemss::metrics::{categorize, score, PerformanceCategory};
use gemss::objective::Objective;
use gemss::posterior::{InitSpec, VariationalState};
use gemss::priors::{sss_dp, sss_enumerate, PriorKind, PriorSpec, SupportMode};
use gemss::{generate, Dataset, FitConfig, GeneratorSpec, Task};
use gemss_cli::commands::{cmd_benchmark, cmd_fit, cmd_generate, run_cell, DATA_FILE};
use gemss_cli::plan::{self, smoke_plan, PlanEntry};
use gemss_cli::{ResultRow, RunConfig};

const C1_MIN_F1: f64 = 0.85;
const C1_MAX_FIT_SECS: f64 = 300.0;
const C2_MIN_F1: f64 = 0.55;
const C2_MIN_SI: f64 = 5.0;
const C3_MIN_PRECISION: f64 = 0.95;
const C3_MIN_RECALL: f64 = 0.85;
const C3_MAX_FIT_SECS: f64 = 900.0;
const C4_MAX_GAP: f64 = 0.1;
const C6_MAX_GAP: f64 = 0.1;
const C7_SEEDS: usize = 5;
const C8_MAX_REL_ERR: f64 = 1e-4;
const C9_TOL: f64 = 1e-9;
const C9_MAX_SUPPORTS: u64 = 10_000;
const C10_MAX_RESIDUAL: f64 = 1e-8;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

struct CellRun {
    rows: Vec<ResultRow>,
    secs: Vec<f64>,
}

impl CellRun {
    fn col(&self, f: fn(&ResultRow) -> f64) -> Vec<f64> {
        self.rows.iter().map(f).collect()
    }

    fn max_secs(&self) -> f64 {
        self.secs.iter().copied().fold(0.0, f64::max)
    }
}

fn run_entry(entry: &PlanEntry, root: &Path) -> CellRun {
    let mut rows = Vec::new();
    let mut secs = Vec::new();
    for s in 0..entry.n_seeds {
        let t = Instant::now();
        let row = run_cell(entry, s, root).unwrap_or_else(|e| panic!("{}: {e:#}", entry.name));
        secs.push(t.elapsed().as_secs_f64());
        eprintln!("  {} seed {}: F1 {:.3} ({:.1} s)", entry.name, row.seed, row.f1, secs[s]);
        rows.push(row);
    }
    CellRun { rows, secs }
}

fn random_dataset(rng: &mut ChaCha8Rng, n: usize, p: usize, task: Task, missing: bool) -> Dataset {
    let mut vals: Vec<f64> = (0..n * p).map(|_| rng.random_range(-1.5..1.5)).collect();
    if missing {
        for i in 0..n {
            // at most p - 1 missing cells per row, never the first column
            for j in 1..p {
                if rng.random_bool(0.25) {
                    vals[i * p + j] = f64::NAN;
                }
            }
        }
    }
    let y: Vec<f64> = match task {
        Task::Regression => (0..n).map(|_| rng.random_range(-2.0..2.0)).collect(),
        Task::Classification => (0..n).map(|i| if i % 3 == 0 { 1.0 } else { 0.0 }).collect(),
    };
    Dataset::new(vals, n, p, y, task, None).unwrap()
}

fn c8_gradients() -> Outcome {
    let (n, p, m) = (10, 5, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    let priors = [
        (PriorKind::Sss, SupportMode::Auto),
        (PriorKind::Sss, SupportMode::DpExact),
        (PriorKind::Ss, SupportMode::Auto),
        (PriorKind::Student, SupportMode::Auto),
    ];
    for (kind, mode) in priors {
        for task in [Task::Regression, Task::Classification] {
            for missing in [false, true] {
                let ds = random_dataset(&mut rng, n, p, task, missing);
                let config = FitConfig {
                    prior: PriorSpec {
                        kind,
                        support_mode: mode,
                        sparsity: 2,
                        var_spike: 0.05,
                        var_slab: 2.0,
                        ..PriorSpec::default()
                    },
                    n_components: m,
                    lambda_jaccard: 2.0,
                    jaccard_tau: 0.5,
                    noise_var: 0.7,
                    ..FitConfig::default()
                };
                let init = InitSpec { init_mu_std: 0.6, init_sigma: 0.3 };
                let mut state = VariationalState::init(p, m, &mut rng, &init).unwrap();
                state.weight_logits_mut().copy_from_slice(&[0.4, -0.3]);
                let obj = Objective::new(&ds, &config, &mut rng).unwrap();
                let noise = obj.draw_noise(m, &mut rng);
                let batch: Vec<usize> = (0..n).collect();
                let eval = obj.evaluate(&state, &batch, &noise).unwrap();
                let h = 1e-6;
                let (mut num, mut den) = (0.0, 0.0);
                for i in 0..state.params().len() {
                    let mut a = state.clone();
                    a.params_mut()[i] += h;
                    let mut b = state.clone();
                    b.params_mut()[i] -= h;
                    let fa = obj.evaluate(&a, &batch, &noise).unwrap().value;
                    let fb = obj.evaluate(&b, &batch, &noise).unwrap().value;
                    let fd = (fa - fb) / (2.0 * h);
                    num += (fd - eval.grad.params()[i]).powi(2);
                    den += fd * fd;
                }
                worst = worst.max((num / den).sqrt());
                cases += 1;
            }
        }
    }
    outcome(
        worst <= C8_MAX_REL_ERR,
        format!("{cases} prior/task/missing cases, worst relative error {worst:.2e} (limit {C8_MAX_REL_ERR:e})"),
    )
}

fn binom(p: u64, d: u64) -> u64 {
    (0..d).fold(1u64, |acc, i| acc * (p - i) / (i + 1))
}

fn c9_dp_vs_enumeration() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < 100 {
        let p = rng.random_range(1..=16usize);
        let d = rng.random_range(0..=p);
        if binom(p as u64, d as u64) > C9_MAX_SUPPORTS {
            continue;
        }
        let spike = 10f64.powf(rng.random_range(-4.0..-1.0));
        let slab = spike * 10f64.powf(rng.random_range(0.5..3.0));
        let beta: Vec<f64> = (0..p).map(|_| rng.random_range(-3.0..3.0)).collect();
        let a = sss_dp(&beta, spike, slab, d, None);
        let b = sss_enumerate(&beta, spike, slab, d, None);
        worst = worst.max((a - b).abs());
        done += 1;
    }
    outcome(
        worst <= C9_TOL,
        format!("100 instances, worst |dp - enumerate| {worst:.2e} (limit {C9_TOL:e})"),
    )
}

fn c10_generator_residuals() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst: f64 = 0.0;
    let mut supports = 0;
    for i in 0..100 {
        let n_solutions = rng.random_range(1..=4usize);
        let sparsity = rng.random_range(1..=6usize);
        let n = rng.random_range(sparsity.max(10)..=60);
        let p = n_solutions * sparsity + rng.random_range(0..=40usize);
        let spec = GeneratorSpec {
            n_samples: n,
            n_features: p,
            n_solutions,
            sparsity,
            noise_std: 0.0,
            nan_ratio: 0.0,
            task: if i % 2 == 0 { Task::Regression } else { Task::Classification },
            class_balance: rng.random_range(0.2..0.8),
            seed: i,
            ..GeneratorSpec::default()
        };
        let (ds, gt) = generate(&spec).unwrap();
        let norm = gt.y_latent.iter().map(|v| v * v).sum::<f64>().sqrt();
        for (sup, w) in gt.supports.iter().zip(&gt.weights) {
            let mut r2 = 0.0;
            for (row, yl) in gt.y_latent.iter().enumerate() {
                let fit: f64 = sup.iter().zip(w).map(|(&j, wj)| ds.get(row, j).unwrap() * wj).sum();
                r2 += (fit - yl).powi(2);
            }
            worst = worst.max(r2.sqrt() / norm);
            supports += 1;
        }
    }
    outcome(
        worst <= C10_MAX_RESIDUAL,
        format!("100 specs, {supports} supports, worst relative residual {worst:.2e} (limit {C10_MAX_RESIDUAL:e})"),
    )
}

fn c11_metric_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let p = rng.random_range(1..=60usize);
        let gen: BTreeSet<usize> = loop {
            let s: BTreeSet<usize> = (0..p).filter(|_| rng.random_bool(0.3)).collect();
            if !s.is_empty() {
                break s;
            }
        };
        let found: Vec<usize> = (0..p).filter(|_| rng.random_bool(0.3)).collect();
        let m = score(&found, &gen.iter().copied().collect::<Vec<_>>(), p).unwrap();
        let f: BTreeSet<usize> = found.iter().copied().collect();
        let inter = f.iter().filter(|j| gen.contains(j)).count();
        let union = f.union(&gen).count();
        let recall = inter as f64 / gen.len() as f64;
        let precision = if f.is_empty() { 0.0 } else { inter as f64 / f.len() as f64 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        let jaccard = inter as f64 / union as f64;
        let si = (p * inter) as f64 / (gen.len() * gen.len()) as f64;
        let ok = m.recall == recall
            && m.precision == precision
            && m.f1 == f1
            && m.jaccard == jaccard
            && m.si == si
            && m.asi == precision * si
            && m.n_intersection == inter;
        if !ok {
            mismatches += 1;
        }
    }
    use PerformanceCategory::*;
    let boundaries = [
        (0.85, Excellent),
        (0.849_999_999, Good),
        (0.71, Good),
        (0.709_999_999, Moderate),
        (0.565, Moderate),
        (0.564_999_999, Poor),
        (0.0, Poor),
        (1.0, Excellent),
    ];
    let bad_cat = boundaries
        .iter()
        .filter(|(f, c)| categorize(*f).unwrap() != *c)
        .count();
    outcome(
        mismatches == 0 && bad_cat == 0,
        format!("1000 random triples, {mismatches} mismatches; {bad_cat} category boundary errors"),
    )
}

fn files_under(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().display().to_string();
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn c12_determinism(root: &Path) -> Outcome {
    let data_dir = root.join("c12_data");
    let spec = GeneratorSpec { n_samples: 60, n_features: 40, sparsity: 3, ..GeneratorSpec::default() };
    cmd_generate(&spec, &data_dir).unwrap();
    // config.txt records the output directory, so every run reuses one path
    let fit_dir = root.join("c12_fit");
    let fit_once = || {
        let _ = std::fs::remove_dir_all(&fit_dir);
        let mut rc = RunConfig::default();
        rc.fit.n_iterations = 300;
        rc.fit.prior.sparsity = 3;
        rc.output_dir = fit_dir.clone();
        cmd_fit(&data_dir.join(DATA_FILE), &rc).unwrap();
        files_under(&fit_dir)
    };
    let fit_same = fit_once() == fit_once();
    let plan = smoke_plan();
    let bench_dir = root.join("c12_bench");
    let bench = |jobs: usize| {
        let _ = std::fs::remove_dir_all(&bench_dir);
        cmd_benchmark(&plan, &bench_dir, jobs).unwrap();
        files_under(&bench_dir)
    };
    let serial = bench(1);
    let repeat = bench(1);
    let parallel = bench(3);
    let n_files = serial.len();
    let bench_same = serial == repeat && serial == parallel;
    outcome(
        fit_same && bench_same,
        format!(
            "fit artifacts identical across runs: {fit_same}; {n_files} benchmark files identical across runs and jobs 1/3: {bench_same}"
        ),
    )
}

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let mut results: Vec<(u8, &str, Outcome)> = Vec::new();

    results.push((8, "gradient correctness", c8_gradients()));
    results.push((9, "prior oracle equivalence", c9_dp_vs_enumeration()));
    results.push((10, "generator multiplicity guarantee", c10_generator_residuals()));
    results.push((11, "metric oracle", c11_metric_oracle()));
    results.push((12, "determinism", c12_determinism(root)));

    let bench = root.join("bench");
    let cls: Vec<CellRun> = plan::tier1(Task::Classification).iter().map(|e| run_entry(e, &bench)).collect();
    let reg: Vec<CellRun> = plan::tier1(Task::Regression).iter().map(|e| run_entry(e, &bench)).collect();

    // tier1 order: (50,100)x{3,5}, (100,200)x{3,5}, (200,500)x{3,5}
    let c1 = &cls[3];
    let c1_f1 = median(c1.col(|r| r.f1));
    results.push((
        1,
        "baseline recovery",
        outcome(
            c1_f1 >= C1_MIN_F1 && c1.max_secs() <= C1_MAX_FIT_SECS,
            format!(
                "(100,200,S=5) median F1 {c1_f1:.3} (need >= {C1_MIN_F1}); slowest fit {:.1} s (limit {C1_MAX_FIT_SECS} s)",
                c1.max_secs()
            ),
        ),
    ));

    let c2 = run_entry(&plan::cell("c2_n25_p500_s5", 25, 500, 5, Task::Classification), &bench);
    let (c2_f1, c2_si) = (median(c2.col(|r| r.f1)), median(c2.col(|r| r.si)));
    results.push((
        2,
        "hard-undersampling floor",
        outcome(
            c2_f1 >= C2_MIN_F1 && c2_si >= C2_MIN_SI,
            format!("(25,500,S=5) median F1 {c2_f1:.3} (need >= {C2_MIN_F1}); median SI {c2_si:.2} (need >= {C2_MIN_SI})"),
        ),
    ));

    let c3 = run_entry(&plan::tier2(), &bench);
    let (c3_p, c3_r) = (median(c3.col(|r| r.precision)), median(c3.col(|r| r.recall)));
    results.push((
        3,
        "high-dimensional precision",
        outcome(
            c3_p >= C3_MIN_PRECISION && c3_r >= C3_MIN_RECALL && c3.max_secs() <= C3_MAX_FIT_SECS,
            format!(
                "(100,1000,S=5) median precision {c3_p:.3} (need >= {C3_MIN_PRECISION}), median recall {c3_r:.3} (need >= {C3_MIN_RECALL}); slowest fit {:.1} s (limit {C3_MAX_FIT_SECS} s)",
                c3.max_secs()
            ),
        ),
    ));

    let c4: Vec<CellRun> = plan::tier7().iter().map(|e| run_entry(e, &bench)).collect();
    let (low, high) = (median(c4[0].col(|r| r.f1)), median(c4[1].col(|r| r.f1)));
    results.push((
        4,
        "imbalance robustness",
        outcome(
            (low - high).abs() <= C4_MAX_GAP,
            format!("(200,500) median F1 at prevalence 0.1 {low:.3} vs 0.5 {high:.3}, gap {:.3} (limit {C4_MAX_GAP})", (low - high).abs()),
        ),
    ));

    let t4 = plan::tier4();
    let pick = |noise: f64, nan: f64| {
        t4.iter().find(|e| e.name == plan::tier4_name(noise, nan)).expect("tier-4 cell").clone()
    };
    let noisy = mean(&run_entry(&pick(0.5, 0.0), &bench).col(|r| r.f1));
    let holes = mean(&run_entry(&pick(0.1, 0.3), &bench).col(|r| r.f1));
    results.push((
        5,
        "stressor hierarchy",
        outcome(
            noisy > holes,
            format!("(100,200) mean F1 noise 0.5/nan 0 {noisy:.3} vs noise 0.1/nan 0.3 {holes:.3}"),
        ),
    ));

    let all = |runs: &[CellRun]| mean(&runs.iter().flat_map(|c| c.col(|r| r.f1)).collect::<Vec<_>>());
    let (f_cls, f_reg) = (all(&cls), all(&reg));
    results.push((
        6,
        "regression parity",
        outcome(
            (f_cls - f_reg).abs() <= C6_MAX_GAP,
            format!("tier-1 mean F1 classification {f_cls:.3} vs regression {f_reg:.3}, gap {:.3} (limit {C6_MAX_GAP})", (f_cls - f_reg).abs()),
        ),
    ));

    let jaccard_cell = |name: &str, lambda: f64| {
        let mut e = plan::cell(name, 100, 200, 3, Task::Classification).with_seeds(C7_SEEDS);
        e.run.fit.n_components = 3;
        e.run.fit.lambda_jaccard = lambda;
        e
    };
    let r0 = mean(&run_entry(&jaccard_cell("c7_lambda0", 0.0), &bench).col(|r| r.recall));
    let r500 = mean(&run_entry(&jaccard_cell("c7_lambda500", 500.0), &bench).col(|r| r.recall));
    results.push((
        7,
        "Jaccard-penalty benefit",
        outcome(
            r500 > r0,
            format!("m=3, S=3, (100,200), {C7_SEEDS} seeds: mean recall lambda 500 {r500:.3} vs lambda 0 {r0:.3}"),
        ),
    ));

    results.sort_by_key(|r| r.0);
    let mut failed = 0;
    for (id, name, o) in &results {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        if !o.pass {
            failed += 1;
        }
        println!("criterion {id:>2} {tag} {name}: {}", o.detail);
    }
    println!("{} of {} criteria pass", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
