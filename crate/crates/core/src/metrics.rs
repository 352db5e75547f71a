//! Support-recovery scores of a found feature set against the generating features.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{GemssError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryMetrics {
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    pub jaccard: f64,
    /// Success index: recall relative to the sparsity ratio `|P| / p`.
    pub si: f64,
    /// Success index scaled by precision.
    pub asi: f64,
    pub n_found: usize,
    pub n_generating: usize,
    pub n_intersection: usize,
    pub p: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PerformanceCategory {
    Excellent,
    Good,
    Moderate,
    Poor,
}

impl std::fmt::Display for PerformanceCategory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Excellent => "Excellent",
            Self::Good => "Good",
            Self::Moderate => "Moderate",
            Self::Poor => "Poor",
        })
    }
}

pub const EXCELLENT_F1: f64 = 0.85;
pub const GOOD_F1: f64 = 0.71;
pub const MODERATE_F1: f64 = 0.565;

/// F1 thresholds, inclusive from below.
pub fn categorize(f1: f64) -> Result<PerformanceCategory> {
    if !(0.0..=1.0).contains(&f1) {
        return Err(GemssError::Input(format!("F1 score {f1} outside [0, 1]")));
    }
    Ok(if f1 >= EXCELLENT_F1 {
        PerformanceCategory::Excellent
    } else if f1 >= GOOD_F1 {
        PerformanceCategory::Good
    } else if f1 >= MODERATE_F1 {
        PerformanceCategory::Moderate
    } else {
        PerformanceCategory::Poor
    })
}

/// Scores `found` against `generating` in a space of `p` features. Duplicates are ignored.
pub fn score(found: &[usize], generating: &[usize], p: usize) -> Result<RecoveryMetrics> {
    let f: BTreeSet<usize> = found.iter().copied().collect();
    let g: BTreeSet<usize> = generating.iter().copied().collect();
    if g.is_empty() {
        return Err(GemssError::Input("generating feature set is empty".into()));
    }
    if let Some(&j) = f.iter().chain(g.iter()).find(|&&j| j >= p) {
        return Err(GemssError::Input(format!("feature index {j} outside [0, {p})")));
    }
    let inter = f.intersection(&g).count();
    let union = f.len() + g.len() - inter;
    Ok(from_counts(f.len(), g.len(), inter, union, p))
}

fn from_counts(n_found: usize, n_gen: usize, inter: usize, union: usize, p: usize) -> RecoveryMetrics {
    let recall = inter as f64 / n_gen as f64;
    let precision = if n_found == 0 {
        0.0
    } else {
        inter as f64 / n_found as f64
    };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    let jaccard = if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    };
    let si = (p * inter) as f64 / (n_gen * n_gen) as f64;
    RecoveryMetrics {
        recall,
        precision,
        f1,
        jaccard,
        si,
        asi: precision * si,
        n_found,
        n_generating: n_gen,
        n_intersection: inter,
        p,
    }
}

/// Component-wise mean of several metric rows (counts averaged and rounded down).
pub fn mean_metrics(rows: &[RecoveryMetrics]) -> Option<RecoveryMetrics> {
    if rows.is_empty() {
        return None;
    }
    let n = rows.len() as f64;
    let avg = |f: fn(&RecoveryMetrics) -> f64| rows.iter().map(f).sum::<f64>() / n;
    let avg_n = |f: fn(&RecoveryMetrics) -> usize| rows.iter().map(f).sum::<usize>() / rows.len();
    Some(RecoveryMetrics {
        recall: avg(|r| r.recall),
        precision: avg(|r| r.precision),
        f1: avg(|r| r.f1),
        jaccard: avg(|r| r.jaccard),
        si: avg(|r| r.si),
        asi: avg(|r| r.asi),
        n_found: avg_n(|r| r.n_found),
        n_generating: avg_n(|r| r.n_generating),
        n_intersection: avg_n(|r| r.n_intersection),
        p: avg_n(|r| r.p),
    })
}
