//! End-to-end fits on small planted problems.

use gemss::extract::solution_union;
use gemss::{
    extract, fit, generate, scale_features, score, ExtractionSpec, FitConfig, GeneratorSpec,
    PriorSpec, ScalingMode, Task,
};

fn small(task: Task, seed: u64) -> GeneratorSpec {
    GeneratorSpec {
        n_samples: 80,
        n_features: 40,
        n_solutions: 2,
        sparsity: 3,
        task,
        seed,
        ..GeneratorSpec::default()
    }
}

fn config(seed: u64) -> FitConfig {
    FitConfig {
        prior: PriorSpec { sparsity: 3, ..PriorSpec::default() },
        n_components: 6,
        lambda_jaccard: 200.0,
        n_iterations: 1500,
        seed,
        ..FitConfig::default()
    }
}

fn recovered_f1(task: Task, seed: u64) -> f64 {
    let (raw, gt) = generate(&small(task, seed)).unwrap();
    let ds = scale_features(&raw, ScalingMode::Standard).0;
    let result = fit(&ds, &config(seed)).unwrap();
    let sols = extract(
        &result.state,
        &ExtractionSpec { top_d: 3, min_z: Some(4.0), ..ExtractionSpec::default() },
    )
    .unwrap();
    score(&solution_union(&sols), &gt.generating_features(), 40).unwrap().f1
}

#[test]
fn regression_supports_are_recovered() {
    assert!(recovered_f1(Task::Regression, 3) >= 0.8);
}

#[test]
fn classification_finds_most_planted_features() {
    assert!(recovered_f1(Task::Classification, 3) >= 0.5);
}

#[test]
fn fits_are_reproducible_and_trace_is_finite() {
    let (raw, _) = generate(&small(Task::Regression, 9)).unwrap();
    let ds = scale_features(&raw, ScalingMode::Standard).0;
    let mut c = config(5);
    c.n_iterations = 200;
    let a = fit(&ds, &c).unwrap();
    let b = fit(&ds, &c).unwrap();
    assert_eq!(a.state.params(), b.state.params());
    assert!(a.trace.last().is_some());
    assert!(a.state.params().iter().all(|v| v.is_finite()));
    c.seed = 6;
    assert_ne!(fit(&ds, &c).unwrap().state.params(), a.state.params());
}

#[test]
fn missing_values_do_not_break_fitting() {
    let spec = GeneratorSpec { nan_ratio: 0.3, ..small(Task::Classification, 4) };
    let (raw, _) = generate(&spec).unwrap();
    assert!(raw.n_missing() > 0);
    let ds = scale_features(&raw, ScalingMode::Standard).0;
    let mut c = config(1);
    c.n_iterations = 300;
    let r = fit(&ds, &c).unwrap();
    assert!(r.state.params().iter().all(|v| v.is_finite()));
}
