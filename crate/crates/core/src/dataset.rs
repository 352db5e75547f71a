//! Tabular datasets with per-cell missingness, CSV exchange and feature scaling.
//!
//! Missing cells are stored as `NaN` in the raw value buffer. A zero-filled copy is
//! kept alongside: under a linear predictor, summing over observed features only is
//! the same as treating missing cells as zero, so the likelihood code reads the
//! filled buffer directly.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{GemssError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Regression,
    Classification,
}

impl std::str::FromStr for Task {
    type Err = GemssError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "regression" => Ok(Self::Regression),
            "classification" => Ok(Self::Classification),
            other => Err(GemssError::Config(format!("unknown task '{other}'"))),
        }
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Regression => "regression",
            Self::Classification => "classification",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n: usize,
    p: usize,
    values: Vec<f64>,
    filled: Vec<f64>,
    y: Vec<f64>,
    task: Task,
    feature_names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset from a row-major `n×p` buffer where `NaN` marks a missing cell.
    pub fn new(
        values: Vec<f64>,
        n: usize,
        p: usize,
        y: Vec<f64>,
        task: Task,
        feature_names: Option<Vec<String>>,
    ) -> Result<Self> {
        if values.len() != n * p {
            return Err(GemssError::Input(format!(
                "feature buffer has {} cells, expected {n}×{p}",
                values.len()
            )));
        }
        if y.len() != n {
            return Err(GemssError::Input(format!(
                "target has {} entries, expected {n}",
                y.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| v.is_infinite()) {
            return Err(GemssError::Input(format!(
                "infinite feature value at row {}, column {}",
                i / p.max(1),
                i % p.max(1)
            )));
        }
        let feature_names = match feature_names {
            Some(names) if names.len() == p => names,
            Some(names) => {
                return Err(GemssError::Input(format!(
                    "{} feature names for {p} features",
                    names.len()
                )))
            }
            None => (0..p).map(|j| format!("f{j}")).collect(),
        };
        let filled = values
            .iter()
            .map(|&v| if v.is_nan() { 0.0 } else { v })
            .collect();
        let ds = Self {
            n,
            p,
            values,
            filled,
            y,
            task,
            feature_names,
        };
        ds.validate()?;
        Ok(ds)
    }

    /// Target consistency and at least one observed feature per sample.
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 {
            return Err(GemssError::Validation("dataset is empty".into()));
        }
        if let Some(i) = self.y.iter().position(|v| !v.is_finite()) {
            return Err(GemssError::Validation(format!(
                "target value at row {i} is missing or non-finite"
            )));
        }
        if self.task == Task::Classification {
            if let Some(i) = self.y.iter().position(|&v| v != 0.0 && v != 1.0) {
                return Err(GemssError::Validation(format!(
                    "classification target must be 0/1, row {i} holds {}",
                    self.y[i]
                )));
            }
        }
        for i in 0..self.n {
            if self.values[i * self.p..(i + 1) * self.p]
                .iter()
                .all(|v| v.is_nan())
            {
                return Err(GemssError::Validation(format!(
                    "sample {i} has no observed features"
                )));
            }
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        self.n
    }

    pub fn n_features(&self) -> usize {
        self.p
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Raw values, `NaN` where missing.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Row `i` with missing cells replaced by zero.
    pub fn filled_row(&self, i: usize) -> &[f64] {
        &self.filled[i * self.p..(i + 1) * self.p]
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let v = self.values[i * self.p + j];
        (!v.is_nan()).then_some(v)
    }

    pub fn is_missing(&self, i: usize, j: usize) -> bool {
        self.values[i * self.p + j].is_nan()
    }

    pub fn n_missing(&self) -> usize {
        self.values.iter().filter(|v| v.is_nan()).count()
    }

    /// Copy with the given feature marked missing in every row.
    pub fn with_feature_masked(&self, j: usize) -> Result<Self> {
        let mut values = self.values.clone();
        for i in 0..self.n {
            values[i * self.p + j] = f64::NAN;
        }
        Self::new(
            values,
            self.n,
            self.p,
            self.y.clone(),
            self.task,
            Some(self.feature_names.clone()),
        )
    }

    /// Copy without feature `j`.
    pub fn without_feature(&self, j: usize) -> Result<Self> {
        let p = self.p - 1;
        let values = (0..self.n)
            .flat_map(|i| {
                let row = &self.values[i * self.p..(i + 1) * self.p];
                row.iter()
                    .enumerate()
                    .filter(move |(c, _)| *c != j)
                    .map(|(_, v)| *v)
            })
            .collect();
        let mut names = self.feature_names.clone();
        names.remove(j);
        Self::new(values, self.n, p, self.y.clone(), self.task, Some(names))
    }

    /// Header row of feature names plus `target_name`; empty cell for missing values.
    pub fn write_csv(&self, path: &Path, target_name: &str) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        let mut header: Vec<String> = self.feature_names.iter().map(|s| csv_field(s)).collect();
        header.push(csv_field(target_name));
        writeln!(w, "{}", header.join(","))?;
        let mut line = String::new();
        for i in 0..self.n {
            line.clear();
            for j in 0..self.p {
                if let Some(v) = self.get(i, j) {
                    line.push_str(&format!("{v}"));
                }
                line.push(',');
            }
            line.push_str(&format!("{}", self.y[i]));
            writeln!(w, "{line}")?;
        }
        w.flush()?;
        Ok(())
    }

    /// Parses a headed CSV. Empty cells and `NaN` become missing. The task is
    /// inferred as classification when every target value is 0 or 1, unless given.
    pub fn read_csv(path: &Path, target_column: &str, task: Option<Task>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)?;
        let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let target_idx = headers
            .iter()
            .position(|h| h == target_column)
            .ok_or_else(|| {
                GemssError::Input(format!(
                    "target column '{target_column}' not found in {}",
                    path.display()
                ))
            })?;
        let feature_names: Vec<String> = headers
            .iter()
            .enumerate()
            .filter(|(c, _)| *c != target_idx)
            .map(|(_, h)| h.clone())
            .collect();
        let p = feature_names.len();
        let mut values = Vec::new();
        let mut y = Vec::new();
        let mut n = 0;
        for (r, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = r + 2;
            if rec.len() != headers.len() {
                return Err(GemssError::Parse {
                    row,
                    column: String::new(),
                    message: format!("expected {} fields, found {}", headers.len(), rec.len()),
                });
            }
            for (c, cell) in rec.iter().enumerate() {
                let parsed = parse_cell(cell).map_err(|message| GemssError::Parse {
                    row,
                    column: headers[c].clone(),
                    message,
                })?;
                if c == target_idx {
                    match parsed {
                        Some(v) => y.push(v),
                        None => {
                            return Err(GemssError::Parse {
                                row,
                                column: headers[c].clone(),
                                message: "target value is missing".into(),
                            })
                        }
                    }
                } else {
                    values.push(parsed.unwrap_or(f64::NAN));
                }
            }
            n += 1;
        }
        let task = task.unwrap_or_else(|| {
            if y.iter().all(|&v| v == 0.0 || v == 1.0) {
                Task::Classification
            } else {
                Task::Regression
            }
        });
        Self::new(values, n, p, y, task, Some(feature_names))
    }
}

fn parse_cell(cell: &str) -> std::result::Result<Option<f64>, String> {
    let t = cell.trim();
    if t.is_empty() || t == "NaN" || t == "nan" {
        return Ok(None);
    }
    match t.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        Ok(v) => Err(format!("non-finite value {v}")),
        Err(_) => Err(format!("cannot parse '{t}' as a number")),
    }
}

/// Quotes a CSV field when needed.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalingMode {
    Minmax,
    Standard,
    None,
}

impl std::str::FromStr for ScalingMode {
    type Err = GemssError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "minmax" => Ok(Self::Minmax),
            "standard" => Ok(Self::Standard),
            "none" => Ok(Self::None),
            other => Err(GemssError::Config(format!("unknown scaling '{other}'"))),
        }
    }
}

impl std::fmt::Display for ScalingMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Minmax => "minmax",
            Self::Standard => "standard",
            Self::None => "none",
        })
    }
}

/// Per-column affine map `x ↦ (x − offset) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mode: ScalingMode,
    pub offsets: Vec<f64>,
    pub scales: Vec<f64>,
    /// Columns left untouched because they have no spread (or no observed cells).
    pub constant_columns: Vec<usize>,
}

/// Scales each column using statistics over its observed cells only.
///
/// `standard` uses the population standard deviation.
pub fn scale_features(dataset: &Dataset, mode: ScalingMode) -> (Dataset, Scaler) {
    let (n, p) = (dataset.n, dataset.p);
    let mut offsets = vec![0.0; p];
    let mut scales = vec![1.0; p];
    let mut constant_columns = Vec::new();
    if mode != ScalingMode::None {
        for j in 0..p {
            let col: Vec<f64> = (0..n).filter_map(|i| dataset.get(i, j)).collect();
            let (offset, scale) = match mode {
                ScalingMode::Minmax => {
                    let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    (lo, hi - lo)
                }
                ScalingMode::Standard => {
                    let mean = col.iter().sum::<f64>() / col.len() as f64;
                    let var =
                        col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / col.len() as f64;
                    (mean, var.sqrt())
                }
                ScalingMode::None => unreachable!(),
            };
            if col.is_empty() || !(scale > 0.0) || !scale.is_finite() {
                log::warn!(
                    "feature '{}' has no spread; left unscaled",
                    dataset.feature_names[j]
                );
                constant_columns.push(j);
            } else {
                offsets[j] = offset;
                scales[j] = scale;
            }
        }
    }
    let values = dataset
        .values
        .iter()
        .enumerate()
        .map(|(idx, &v)| {
            let j = idx % p;
            if v.is_nan() {
                v
            } else {
                (v - offsets[j]) / scales[j]
            }
        })
        .collect();
    let scaled = Dataset::new(
        values,
        n,
        p,
        dataset.y.clone(),
        dataset.task,
        Some(dataset.feature_names.clone()),
    )
    .expect("scaling preserves dataset validity");
    (
        scaled,
        Scaler {
            mode,
            offsets,
            scales,
            constant_columns,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &tempfile::TempDir, body: &str) -> std::path::PathBuf {
        let path = dir.path().join("data.csv");
        std::fs::write(&path, body).unwrap();
        path
    }

    #[test]
    fn one_empty_cell_is_one_missing_flag() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(&dir, "a,b,y\n1.5,,0.3\n2,3,1.7\n");
        let ds = Dataset::read_csv(&path, "y", None).unwrap();
        assert_eq!(ds.n_missing(), 1);
        assert!(ds.is_missing(0, 1));
        assert_eq!(ds.task(), Task::Regression);
        assert_eq!(ds.filled_row(0), &[1.5, 0.0]);
    }

    #[test]
    fn binary_target_inferred_as_classification() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(&dir, "y,a,b\n0,1,1\n1,NaN,4\n1,2,0\n");
        let ds = Dataset::read_csv(&path, "y", None).unwrap();
        assert_eq!(ds.task(), Task::Classification);
        assert_eq!(ds.n_missing(), 1);
        let ds = Dataset::read_csv(&path, "y", Some(Task::Regression)).unwrap();
        assert_eq!(ds.task(), Task::Regression);
    }

    #[test]
    fn parse_errors_name_row_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(&dir, "a,b,y\n1,x,0\n");
        match Dataset::read_csv(&path, "y", None) {
            Err(GemssError::Parse { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "b");
            }
            other => panic!("{other:?}"),
        }
        let path = write(&dir, "a,b,y\n1,2,\n");
        assert!(matches!(
            Dataset::read_csv(&path, "y", None),
            Err(GemssError::Parse { .. })
        ));
        let path = write(&dir, "a,b,y\n,,1\n");
        assert!(matches!(
            Dataset::read_csv(&path, "y", None),
            Err(GemssError::Validation(_))
        ));
        let path = write(&dir, "a,b,y\n1,2,1\n");
        assert!(matches!(
            Dataset::read_csv(&path, "target", None),
            Err(GemssError::Input(_))
        ));
    }

    #[test]
    fn minmax_endpoints_and_constant_column() {
        let ds = Dataset::new(
            vec![0.0, 1.0, 10.0, 1.0, 5.0, 1.0],
            3,
            2,
            vec![0.0; 3],
            Task::Regression,
            None,
        )
        .unwrap();
        let (scaled, scaler) = scale_features(&ds, ScalingMode::Minmax);
        assert_eq!(scaled.get(0, 0), Some(0.0));
        assert_eq!(scaled.get(1, 0), Some(1.0));
        assert_eq!(scaled.get(2, 0), Some(0.5));
        assert_eq!(scaler.constant_columns, vec![1]);
        for i in 0..3 {
            assert_eq!(scaled.get(i, 1), Some(1.0));
        }
        let (st, sc) = scale_features(&ds, ScalingMode::Standard);
        assert_eq!(sc.constant_columns, vec![1]);
        assert_eq!(st.get(1, 1), Some(1.0));
    }

    #[test]
    fn statistics_use_observed_cells_only() {
        let col = [3.0, f64::NAN, -1.0, 4.0, f64::NAN];
        let ds = Dataset::new(
            col.iter().flat_map(|&v| [v, 1.0 + v.abs().min(9.0)]).collect(),
            5,
            2,
            vec![0.0; 5],
            Task::Regression,
            None,
        )
        .unwrap();
        let (scaled, _) = scale_features(&ds, ScalingMode::Standard);
        let observed = [3.0, -1.0, 4.0];
        let mean = observed.iter().sum::<f64>() / 3.0;
        let sd = (observed.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 3.0).sqrt();
        assert!(scaled.is_missing(1, 0) && scaled.is_missing(4, 0));
        for &(i, v) in &[(0usize, 3.0), (2, -1.0), (3, 4.0)] {
            assert!((scaled.get(i, 0).unwrap() - (v - mean) / sd).abs() < 1e-14);
        }
    }

    #[test]
    fn csv_roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let vals = vec![0.1 + 0.2, f64::NAN, -1e-300, 123456.789e10, 1.0 / 3.0, -0.0];
        let ds = Dataset::new(vals, 3, 2, vec![0.5, -2.25, 1e-17], Task::Regression, None).unwrap();
        let path = dir.path().join("rt.csv");
        ds.write_csv(&path, "target").unwrap();
        let back = Dataset::read_csv(&path, "target", None).unwrap();
        assert_eq!(back.feature_names(), ds.feature_names());
        for (a, b) in ds.values().iter().zip(back.values()) {
            assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()));
        }
        assert_eq!(back.y(), ds.y());
    }
}
