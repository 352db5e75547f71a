//! Results tables: one metrics row per run plus per-case mean rows.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use gemss::{categorize, metrics::mean_metrics, RecoveryMetrics};

pub const RESULT_HEADER: [&str; 11] = [
    "case",
    "n",
    "p",
    "seed",
    "F1 Score",
    "ASI",
    "Recall",
    "Jaccard",
    "Precision",
    "SI",
    "category",
];

/// Seed column value of an aggregate row.
pub const MEAN_SEED: &str = "mean";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub case: String,
    pub n: usize,
    pub p: usize,
    /// A data seed, or [`MEAN_SEED`] for aggregates.
    pub seed: String,
    pub f1: f64,
    pub asi: f64,
    pub recall: f64,
    pub jaccard: f64,
    pub precision: f64,
    pub si: f64,
    pub category: String,
}

impl ResultRow {
    pub fn new(case: &str, n: usize, p: usize, seed: &str, m: &RecoveryMetrics) -> Result<Self> {
        Ok(Self {
            case: case.to_string(),
            n,
            p,
            seed: seed.to_string(),
            f1: m.f1,
            asi: m.asi,
            recall: m.recall,
            jaccard: m.jaccard,
            precision: m.precision,
            si: m.si,
            category: categorize(m.f1)?.to_string(),
        })
    }

    fn fields(&self) -> [String; 11] {
        [
            self.case.clone(),
            self.n.to_string(),
            self.p.to_string(),
            self.seed.clone(),
            self.f1.to_string(),
            self.asi.to_string(),
            self.recall.to_string(),
            self.jaccard.to_string(),
            self.precision.to_string(),
            self.si.to_string(),
            self.category.clone(),
        ]
    }
}

/// Mean rows, one per case in order of first appearance.
pub fn aggregate(rows: &[ResultRow]) -> Result<Vec<ResultRow>> {
    let mut cases: Vec<&str> = Vec::new();
    for r in rows {
        if r.seed != MEAN_SEED && !cases.contains(&r.case.as_str()) {
            cases.push(&r.case);
        }
    }
    cases
        .into_iter()
        .map(|case| {
            let group: Vec<&ResultRow> =
                rows.iter().filter(|r| r.case == case && r.seed != MEAN_SEED).collect();
            let metrics: Vec<RecoveryMetrics> = group.iter().map(|r| as_metrics(r)).collect();
            let mean = mean_metrics(&metrics).expect("every case has at least one row");
            ResultRow::new(case, group[0].n, group[0].p, MEAN_SEED, &mean)
        })
        .collect()
}

fn as_metrics(r: &ResultRow) -> RecoveryMetrics {
    RecoveryMetrics {
        recall: r.recall,
        precision: r.precision,
        f1: r.f1,
        jaccard: r.jaccard,
        si: r.si,
        asi: r.asi,
        n_found: 0,
        n_generating: 0,
        n_intersection: 0,
        p: r.p,
    }
}

pub fn write_rows(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    w.write_record(RESULT_HEADER)?;
    for r in rows {
        w.write_record(r.fields())?;
    }
    w.flush()?;
    Ok(())
}

/// Appends rows, writing the header first when the file is new or empty.
pub fn append_rows(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    let mut w = csv::Writer::from_writer(file);
    if fresh {
        w.write_record(RESULT_HEADER)?;
    }
    for r in rows {
        w.write_record(r.fields())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows(path: &Path) -> Result<Vec<ResultRow>> {
    let mut rdr = csv::Reader::from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    if rdr.headers()?.iter().collect::<Vec<_>>() != RESULT_HEADER {
        bail!("{} does not have the results header", path.display());
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let num = |c: usize| -> Result<f64> {
            rec[c].parse().with_context(|| {
                format!("{} row {}: bad value in column '{}'", path.display(), i + 2, RESULT_HEADER[c])
            })
        };
        out.push(ResultRow {
            case: rec[0].to_string(),
            n: rec[1].parse()?,
            p: rec[2].parse()?,
            seed: rec[3].to_string(),
            f1: num(4)?,
            asi: num(5)?,
            recall: num(6)?,
            jaccard: num(7)?,
            precision: num(8)?,
            si: num(9)?,
            category: rec[10].to_string(),
        });
    }
    Ok(out)
}
