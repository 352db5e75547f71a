//! Turning a fitted state into discrete candidate solutions.
//!
//! Three strategies: `full` keeps every feature with `|μ|` above a threshold, `top`
//! keeps the `D` largest `|μ|` per component, and `outlier` keeps features whose
//! `|μ|` stands out from the component's profile (mean + k·STD, or median + k·MAD).
//! Ties in `|μ|` are broken by the lower feature index.
//!
//! Any mode can be followed by a credibility filter that drops features whose
//! posterior mean lies fewer than `min_z` posterior standard deviations from zero.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::csv_field;
use crate::error::{GemssError, Result};
use crate::posterior::VariationalState;

/// Components whose mixture weight falls below this are flagged as low weight.
pub const LOW_WEIGHT: f64 = 1e-3;
/// Normal-consistency factor for the median absolute deviation.
pub const MAD_SCALE: f64 = 1.4826;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtractionMode {
    Full,
    Top,
    Outlier,
}

impl std::str::FromStr for ExtractionMode {
    type Err = GemssError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "full" => Ok(Self::Full),
            "top" => Ok(Self::Top),
            "outlier" => Ok(Self::Outlier),
            other => Err(GemssError::Config(format!("unknown extraction mode '{other}'"))),
        }
    }
}

impl std::fmt::Display for ExtractionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Full => "full",
            Self::Top => "top",
            Self::Outlier => "outlier",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutlierCenter {
    Mean,
    Median,
}

impl std::str::FromStr for OutlierCenter {
    type Err = GemssError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mean" => Ok(Self::Mean),
            "median" => Ok(Self::Median),
            other => Err(GemssError::Config(format!("unknown outlier center '{other}'"))),
        }
    }
}

impl std::fmt::Display for OutlierCenter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Mean => "mean",
            Self::Median => "median",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionSpec {
    pub mode: ExtractionMode,
    /// Minimum `|μ|` (full mode; optional pre-filter in top mode).
    pub mu_threshold: Option<f64>,
    pub top_d: usize,
    pub outlier_multiplier: f64,
    pub outlier_center: OutlierCenter,
    /// Minimum `|μ| / σ` for a selected feature to be kept.
    pub min_z: Option<f64>,
}

impl Default for ExtractionSpec {
    fn default() -> Self {
        Self {
            mode: ExtractionMode::Top,
            mu_threshold: None,
            top_d: 5,
            outlier_multiplier: 3.0,
            outlier_center: OutlierCenter::Mean,
            min_z: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSolution {
    pub component_index: usize,
    /// `(feature index, μ)` sorted by `|μ|` descending.
    pub features: Vec<(usize, f64)>,
    /// Mixture weight of the component.
    pub weight: f64,
    pub low_weight: bool,
    /// Outlier mode found no spread in `|μ|`; the solution is empty.
    pub zero_spread: bool,
}

impl CandidateSolution {
    pub fn indices(&self) -> Vec<usize> {
        self.features.iter().map(|f| f.0).collect()
    }
}

fn ranked(mu: &[f64], keep: impl Fn(f64) -> bool) -> Vec<(usize, f64)> {
    let mut out: Vec<(usize, f64)> = mu
        .iter()
        .enumerate()
        .filter(|(_, m)| keep(m.abs()))
        .map(|(j, &m)| (j, m))
        .collect();
    out.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then(a.0.cmp(&b.0)));
    out
}

fn per_component(
    state: &VariationalState,
    mut pick: impl FnMut(&[f64]) -> (Vec<(usize, f64)>, bool),
) -> Vec<CandidateSolution> {
    let weights = state.weights();
    (0..state.n_components())
        .map(|k| {
            let (features, zero_spread) = pick(state.mu_row(k));
            CandidateSolution {
                component_index: k,
                features,
                weight: weights[k],
                low_weight: weights[k] < LOW_WEIGHT,
                zero_spread,
            }
        })
        .collect()
}

/// Every feature with `|μ| > mu_threshold`.
pub fn extract_full(state: &VariationalState, mu_threshold: f64) -> Vec<CandidateSolution> {
    per_component(state, |mu| (ranked(mu, |a| a > mu_threshold), false))
}

/// The `top_d` largest `|μ|` per component, optionally among those above a threshold.
pub fn extract_top(
    state: &VariationalState,
    top_d: usize,
    mu_threshold: Option<f64>,
) -> Result<Vec<CandidateSolution>> {
    if top_d == 0 || top_d > state.n_features() {
        return Err(GemssError::Input(format!(
            "top_d = {top_d} outside [1, p = {}]",
            state.n_features()
        )));
    }
    Ok(per_component(state, |mu| {
        let mut r = match mu_threshold {
            Some(t) => ranked(mu, |a| a > t),
            None => ranked(mu, |_| true),
        };
        r.truncate(top_d);
        (r, false)
    }))
}

/// `(center, spread)` of the values: mean/STD or median/scaled MAD.
pub fn profile_statistics(values: &[f64], center: OutlierCenter) -> (f64, f64) {
    let n = values.len() as f64;
    match center {
        OutlierCenter::Mean => {
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            (mean, var.sqrt())
        }
        OutlierCenter::Median => {
            let med = median(values.to_vec());
            let mad = median(values.iter().map(|v| (v - med).abs()).collect());
            (med, MAD_SCALE * mad)
        }
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Features whose `|μ|` exceeds `center + multiplier · spread` over the component's `|μ|` profile.
pub fn extract_outlier(
    state: &VariationalState,
    multiplier: f64,
    center: OutlierCenter,
) -> Result<Vec<CandidateSolution>> {
    if !(multiplier > 0.0) {
        return Err(GemssError::Input(format!(
            "outlier multiplier must be positive, got {multiplier}"
        )));
    }
    Ok(per_component(state, |mu| {
        let abs: Vec<f64> = mu.iter().map(|m| m.abs()).collect();
        let (c, spread) = profile_statistics(&abs, center);
        if !(spread > 0.0) {
            return (Vec::new(), true);
        }
        let cutoff = c + multiplier * spread;
        (ranked(mu, |a| a > cutoff), false)
    }))
}

/// Drops every selected feature with `|μ| / σ < min_z` in its component.
pub fn filter_credible(
    state: &VariationalState,
    solutions: &mut [CandidateSolution],
    min_z: f64,
) -> Result<()> {
    if !(min_z >= 0.0) || !min_z.is_finite() {
        return Err(GemssError::Input(format!("min_z must be a nonnegative number, got {min_z}")));
    }
    let sigma = state.sigma();
    let p = state.n_features();
    for sol in solutions.iter_mut() {
        let k = sol.component_index;
        sol.features.retain(|&(j, mu)| mu.abs() >= min_z * sigma[k * p + j]);
    }
    Ok(())
}

pub fn extract(state: &VariationalState, spec: &ExtractionSpec) -> Result<Vec<CandidateSolution>> {
    let mut sols = match spec.mode {
        ExtractionMode::Full => extract_full(state, spec.mu_threshold.unwrap_or(0.0)),
        ExtractionMode::Top => extract_top(state, spec.top_d, spec.mu_threshold)?,
        ExtractionMode::Outlier => {
            extract_outlier(state, spec.outlier_multiplier, spec.outlier_center)?
        }
    };
    if let Some(z) = spec.min_z {
        filter_credible(state, &mut sols, z)?;
    }
    Ok(sols)
}

/// Sorted, deduplicated union of all solution features.
pub fn solution_union(solutions: &[CandidateSolution]) -> Vec<usize> {
    let mut all: Vec<usize> = solutions.iter().flat_map(|s| s.indices()).collect();
    all.sort_unstable();
    all.dedup();
    all
}

/// Columns: component, rank, feature_index, feature, mu, alpha, low_weight, zero_spread.
/// A component with no selected features is written as one row with empty feature fields.
pub fn write_solutions_csv(
    path: &Path,
    solutions: &[CandidateSolution],
    feature_names: &[String],
) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "component,rank,feature_index,feature,mu,alpha,low_weight,zero_spread")?;
    for s in solutions {
        if s.features.is_empty() {
            writeln!(
                w,
                "{},,,,,{},{},{}",
                s.component_index, s.weight, s.low_weight, s.zero_spread
            )?;
        }
        for (rank, &(j, mu)) in s.features.iter().enumerate() {
            let name = feature_names
                .get(j)
                .map(|n| csv_field(n))
                .unwrap_or_else(|| format!("f{j}"));
            writeln!(
                w,
                "{},{},{j},{name},{mu},{},{},{}",
                s.component_index,
                rank + 1,
                s.weight,
                s.low_weight,
                s.zero_spread
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_solutions_csv(path: &Path) -> Result<Vec<CandidateSolution>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out: Vec<CandidateSolution> = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = r + 2;
        let get = |c: usize, name: &str| -> Result<String> {
            rec.get(c).map(|s| s.trim().to_string()).ok_or_else(|| GemssError::Parse {
                row,
                column: name.into(),
                message: "missing field".into(),
            })
        };
        let perr = |name: &str, e: String| GemssError::Parse {
            row,
            column: name.into(),
            message: e,
        };
        let component: usize = get(0, "component")?
            .parse()
            .map_err(|e: std::num::ParseIntError| perr("component", e.to_string()))?;
        let alpha: f64 = get(5, "alpha")?
            .parse()
            .map_err(|e: std::num::ParseFloatError| perr("alpha", e.to_string()))?;
        let low_weight = get(6, "low_weight")? == "true";
        let zero_spread = get(7, "zero_spread")? == "true";
        if out.last().map(|s| s.component_index) != Some(component) {
            out.push(CandidateSolution {
                component_index: component,
                features: Vec::new(),
                weight: alpha,
                low_weight,
                zero_spread,
            });
        }
        let idx = get(2, "feature_index")?;
        if idx.is_empty() {
            continue;
        }
        let j: usize = idx
            .parse()
            .map_err(|e: std::num::ParseIntError| perr("feature_index", e.to_string()))?;
        let mu: f64 = get(4, "mu")?
            .parse()
            .map_err(|e: std::num::ParseFloatError| perr("mu", e.to_string()))?;
        out.last_mut().expect("pushed above").features.push((j, mu));
    }
    Ok(out)
}
