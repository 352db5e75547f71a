//! The subcommands end to end on small temporary datasets.

use gemss::extract::{write_solutions_csv, CandidateSolution};
use gemss::synthgen::GroundTruthFile;
use gemss::{score, GeneratorSpec, Task};
use gemss_cli::commands::{
    cmd_benchmark, cmd_evaluate, cmd_extract, cmd_fit, cmd_generate, load_dataset, run_dir,
    DATA_FILE, METRICS_FILE, SOLUTIONS_FILE, STATE_FILE, SUMMARY_FILE, TRUTH_FILE,
};
use gemss_cli::plan::smoke_plan;
use gemss_cli::report::{aggregate, read_rows, MEAN_SEED};
use gemss_cli::RunConfig;

fn spec() -> GeneratorSpec {
    GeneratorSpec {
        n_samples: 40,
        n_features: 25,
        n_solutions: 2,
        sparsity: 2,
        task: Task::Regression,
        seed: 3,
        ..GeneratorSpec::default()
    }
}

#[test]
fn evaluating_the_planted_supports_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    cmd_generate(&spec(), dir.path()).unwrap();
    let truth = GroundTruthFile::read(&dir.path().join(TRUTH_FILE)).unwrap();
    let sols: Vec<CandidateSolution> = truth
        .ground_truth
        .supports
        .iter()
        .enumerate()
        .map(|(k, s)| CandidateSolution {
            component_index: k,
            features: s.iter().map(|&j| (j, 1.0)).collect(),
            weight: 0.5,
            low_weight: false,
            zero_spread: false,
        })
        .collect();
    let sol_path = dir.path().join(SOLUTIONS_FILE);
    write_solutions_csv(&sol_path, &sols, &truth.feature_names).unwrap();
    let out = dir.path().join("results.csv");
    cmd_evaluate(&sol_path, &dir.path().join(TRUTH_FILE), &out, "oracle").unwrap();
    cmd_evaluate(&sol_path, &dir.path().join(TRUTH_FILE), &out, "oracle").unwrap();
    let rows = read_rows(&out).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].f1, 1.0);
    assert_eq!(rows[0].category, "Excellent");
    assert_eq!(rows[0].seed, "3");
}

#[test]
fn fit_then_extract_reproduces_the_fit_solutions() {
    let dir = tempfile::tempdir().unwrap();
    cmd_generate(&spec(), dir.path()).unwrap();
    let mut rc = RunConfig::default();
    rc.fit.n_iterations = 300;
    rc.fit.n_components = 4;
    rc.fit.prior.sparsity = 2;
    rc.output_dir = dir.path().join("fit");
    cmd_fit(&dir.path().join(DATA_FILE), &rc).unwrap();
    let again = dir.path().join("again.csv");
    cmd_extract(&rc.output_dir.join(STATE_FILE), &rc.resolved_extraction(), &again).unwrap();
    assert_eq!(
        std::fs::read(&again).unwrap(),
        std::fs::read(rc.output_dir.join(SOLUTIONS_FILE)).unwrap()
    );
    let ds = load_dataset(&dir.path().join(DATA_FILE), &rc).unwrap();
    assert_eq!((ds.n_samples(), ds.n_features()), (40, 25));
}

#[test]
fn summary_means_are_recomputable_from_run_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let plan = smoke_plan();
    cmd_benchmark(&plan, dir.path(), 2).unwrap();
    let summary = read_rows(&dir.path().join(SUMMARY_FILE)).unwrap();
    let mut per_run = Vec::new();
    for e in &plan.entries {
        for s in 0..e.n_seeds {
            let rd = run_dir(dir.path(), e, s);
            let row = read_rows(&rd.join(METRICS_FILE)).unwrap().remove(0);
            let truth = GroundTruthFile::read(&rd.join(TRUTH_FILE)).unwrap();
            let sols = gemss::extract::read_solutions_csv(&rd.join(SOLUTIONS_FILE)).unwrap();
            let m = score(
                &gemss::extract::solution_union(&sols),
                &truth.ground_truth.generating_features(),
                truth.spec.n_features,
            )
            .unwrap();
            assert_eq!(row.f1, m.f1);
            per_run.push(row);
        }
    }
    let means: Vec<_> = summary.iter().filter(|r| r.seed == MEAN_SEED).cloned().collect();
    assert_eq!(means, aggregate(&per_run).unwrap());
    assert_eq!(summary.len(), per_run.len() + plan.entries.len());
}

#[test]
fn bad_inputs_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bad.csv");
    std::fs::write(&csv, "a,b,target\n1,2,0\n3,x,1\n").unwrap();
    let mut rc = RunConfig::default();
    rc.output_dir = dir.path().join("out");
    assert!(cmd_fit(&csv, &rc).is_err());
    std::fs::write(&csv, "a,b\n1,2\n").unwrap();
    assert!(cmd_fit(&csv, &rc).is_err());
    assert!(cmd_fit(&dir.path().join("missing.csv"), &rc).is_err());
}
