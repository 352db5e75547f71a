//! Synthetic benchmark data with several equally valid, disjoint sparse supports.
//!
//! Support 0 carries standard-normal features and uniform-magnitude weights that
//! define the latent response. Every further support is a random linear mix of
//! support 0's columns, and its weights are solved by pseudo-inverse so that each
//! support reproduces the latent response exactly before noise is injected.

use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Task};
use crate::error::{GemssError, Result};

const MAX_PINV_RETRIES: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub n_samples: usize,
    pub n_features: usize,
    pub n_solutions: usize,
    pub sparsity: usize,
    pub noise_std: f64,
    pub nan_ratio: f64,
    pub task: Task,
    /// Fraction of positive labels (classification only).
    pub class_balance: f64,
    pub weight_range: (f64, f64),
    /// Multiply each primary weight by an independent random sign.
    pub random_signs: bool,
    pub seed: u64,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        Self {
            n_samples: 100,
            n_features: 200,
            n_solutions: 3,
            sparsity: 5,
            noise_std: 0.1,
            nan_ratio: 0.0,
            task: Task::Classification,
            class_balance: 0.5,
            weight_range: (2.0, 10.0),
            random_signs: true,
            seed: 0,
        }
    }
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(GemssError::Config(m));
        if self.n_samples == 0 || self.n_features == 0 {
            return err("n_samples and n_features must be positive".into());
        }
        if self.n_solutions == 0 || self.sparsity == 0 {
            return err("n_solutions and sparsity must be positive".into());
        }
        if self.n_solutions * self.sparsity > self.n_features {
            return err(format!(
                "{} disjoint supports of size {} do not fit in {} features",
                self.n_solutions, self.sparsity, self.n_features
            ));
        }
        if !(self.noise_std >= 0.0) || !self.noise_std.is_finite() {
            return err("noise_std must be a nonnegative number".into());
        }
        if !(0.0..1.0).contains(&self.nan_ratio) {
            return err(format!("nan_ratio {} outside [0, 1)", self.nan_ratio));
        }
        if self.task == Task::Classification && !(self.class_balance > 0.0 && self.class_balance < 1.0) {
            return err(format!("class_balance {} outside (0, 1)", self.class_balance));
        }
        let (lo, hi) = self.weight_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return err("weight_range must be a finite interval".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Disjoint generating supports, each sorted ascending.
    pub supports: Vec<Vec<usize>>,
    /// Weights aligned with `supports`.
    pub weights: Vec<Vec<f64>>,
    pub y_latent: Vec<f64>,
    /// Mixing matrices `C_k` (row-major `S×S`) for supports `k ≥ 1`.
    pub mixing_matrices: Vec<Vec<f64>>,
    pub mixing_distribution: String,
}

impl GroundTruth {
    /// Union of all generating supports, sorted.
    pub fn generating_features(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.supports.iter().flatten().copied().collect();
        all.sort_unstable();
        all.dedup();
        all
    }
}

/// Ground truth plus the spec that produced it, as stored next to a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthFile {
    pub spec: GeneratorSpec,
    pub feature_names: Vec<String>,
    pub ground_truth: GroundTruth,
}

impl GroundTruthFile {
    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| GemssError::Input(format!("cannot serialize ground truth: {e}")))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| {
            GemssError::Input(format!("cannot parse ground truth {}: {e}", path.display()))
        })
    }
}

pub fn generate(spec: &GeneratorSpec) -> Result<(Dataset, GroundTruth)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (n, p, s, n_sol) = (spec.n_samples, spec.n_features, spec.sparsity, spec.n_solutions);

    let picked = sample(&mut rng, p, n_sol * s).into_vec();
    let supports: Vec<Vec<usize>> = picked
        .chunks(s)
        .map(|c| {
            let mut v = c.to_vec();
            v.sort_unstable();
            v
        })
        .collect();

    let base = DMatrix::<f64>::from_fn(n, s, |_, _| StandardNormal.sample(&mut rng));
    let (lo, hi) = spec.weight_range;
    let w0: Vec<f64> = (0..s)
        .map(|_| {
            let mag = if hi > lo { rng.random_range(lo..hi) } else { lo };
            if spec.random_signs && rng.random_bool(0.5) {
                -mag
            } else {
                mag
            }
        })
        .collect();
    let y_latent = &base * nalgebra::DVector::from_column_slice(&w0);

    let mut blocks = vec![base.clone()];
    let mut weights = vec![w0];
    let mut mixing = Vec::new();
    for k in 1..n_sol {
        let mut solved = None;
        for _ in 0..MAX_PINV_RETRIES {
            let c = DMatrix::<f64>::from_fn(s, s, |_, _| StandardNormal.sample(&mut rng));
            let xk = &base * &c;
            if let Some(w) = solve_pinv(&xk, &y_latent) {
                solved = Some((c, xk, w));
                break;
            }
        }
        let (c, xk, w) = solved.ok_or_else(|| {
            GemssError::Generation(format!(
                "support {k}: mixed design stayed rank-deficient after {MAX_PINV_RETRIES} draws \
                 (n = {n}, sparsity = {s})"
            ))
        })?;
        mixing.push(c.transpose().as_slice().to_vec());
        blocks.push(xk);
        weights.push(w);
    }

    let mut values = vec![0.0; n * p];
    let in_support: Vec<Option<(usize, usize)>> = {
        let mut v = vec![None; p];
        for (k, sup) in supports.iter().enumerate() {
            for (c, &j) in sup.iter().enumerate() {
                v[j] = Some((k, c));
            }
        }
        v
    };
    let noise = Normal::new(0.0, spec.noise_std).expect("validated noise_std");
    for i in 0..n {
        for j in 0..p {
            values[i * p + j] = match in_support[j] {
                Some((k, c)) => blocks[k][(i, c)],
                None => noise.sample(&mut rng),
            };
        }
    }
    for v in values.iter_mut() {
        *v += noise.sample(&mut rng);
    }

    let y_latent: Vec<f64> = y_latent.iter().copied().collect();
    let y = match spec.task {
        Task::Regression => y_latent.clone(),
        Task::Classification => threshold_labels(&y_latent, spec.class_balance),
    };

    if spec.nan_ratio > 0.0 {
        for i in 0..n {
            let row = &mut values[i * p..(i + 1) * p];
            let mut any_observed = false;
            for v in row.iter_mut() {
                if rng.random_bool(spec.nan_ratio) {
                    *v = f64::NAN;
                } else {
                    any_observed = true;
                }
            }
            if !any_observed {
                // keep one cell so the sample remains usable
                let j = rng.random_range(0..p);
                row[j] = values_backup(&blocks, &in_support, i, j, &mut rng, &noise);
            }
        }
    }

    let dataset = Dataset::new(values, n, p, y, spec.task, None)?;
    Ok((
        dataset,
        GroundTruth {
            supports,
            weights,
            y_latent,
            mixing_matrices: mixing,
            mixing_distribution: "standard_normal".into(),
        },
    ))
}

fn values_backup<R: Rng + ?Sized>(
    blocks: &[DMatrix<f64>],
    in_support: &[Option<(usize, usize)>],
    i: usize,
    j: usize,
    rng: &mut R,
    noise: &Normal<f64>,
) -> f64 {
    let clean = match in_support[j] {
        Some((k, c)) => blocks[k][(i, c)],
        None => noise.sample(rng),
    };
    clean + noise.sample(rng)
}

/// Labels `1[sigmoid(y) > q]` with `q` the `(1 − balance)` empirical quantile.
///
/// Sigmoid is monotone, so the cut is placed on the ranks of `y_latent` directly,
/// giving exactly `round(balance · n)` positives.
pub fn threshold_labels(y_latent: &[f64], balance: f64) -> Vec<f64> {
    let n = y_latent.len();
    let n_pos = ((balance * n as f64).round() as usize).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| y_latent[b].total_cmp(&y_latent[a]).then(a.cmp(&b)));
    let mut y = vec![0.0; n];
    for &i in &order[..n_pos] {
        y[i] = 1.0;
    }
    y
}

/// `pinv(x) · y` when `x` has full column rank.
fn solve_pinv(x: &DMatrix<f64>, y: &nalgebra::DVector<f64>) -> Option<Vec<f64>> {
    if x.nrows() < x.ncols() {
        return None;
    }
    let svd = x.clone().svd(true, true);
    let max_sv = svd.singular_values.max();
    let min_sv = svd.singular_values.min();
    if !(max_sv > 0.0) || min_sv <= max_sv * 1e-10 {
        return None;
    }
    let pinv = svd.pseudo_inverse(max_sv * 1e-12).ok()?;
    Some((pinv * y).iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clean_spec(seed: u64) -> GeneratorSpec {
        GeneratorSpec {
            n_samples: 40,
            n_features: 30,
            n_solutions: 3,
            sparsity: 4,
            noise_std: 0.0,
            task: Task::Regression,
            seed,
            ..GeneratorSpec::default()
        }
    }

    #[test]
    fn alternative_supports_reproduce_latent_response() {
        let (ds, gt) = generate(&clean_spec(7)).unwrap();
        let norm = gt.y_latent.iter().map(|v| v * v).sum::<f64>().sqrt();
        for (sup, w) in gt.supports.iter().zip(&gt.weights) {
            let res: f64 = (0..ds.n_samples())
                .map(|i| {
                    let pred: f64 = sup.iter().zip(w).map(|(&j, wj)| ds.get(i, j).unwrap() * wj).sum();
                    (pred - gt.y_latent[i]).powi(2)
                })
                .sum::<f64>()
                .sqrt();
            assert!(res / norm <= 1e-8, "{}", res / norm);
        }
    }

    #[test]
    fn supports_disjoint_and_sized() {
        let (_, gt) = generate(&clean_spec(3)).unwrap();
        assert_eq!(gt.supports.len(), 3);
        assert!(gt.supports.iter().all(|s| s.len() == 4));
        assert_eq!(gt.generating_features().len(), 12);
    }

    #[test]
    fn class_balance_is_hit() {
        let spec = GeneratorSpec {
            n_samples: 1000,
            n_features: 20,
            class_balance: 0.2,
            ..GeneratorSpec::default()
        };
        let (ds, _) = generate(&spec).unwrap();
        let frac = ds.y().iter().sum::<f64>() / 1000.0;
        assert!((frac - 0.2).abs() <= 1.0 / 1000.0);
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate(&clean_spec(11)).unwrap();
        let b = generate(&clean_spec(11)).unwrap();
        assert_eq!(a.1, b.1);
        assert_eq!(a.0.values(), b.0.values());
        let c = generate(&clean_spec(12)).unwrap();
        assert_ne!(a.1.supports, c.1.supports);
    }

    #[test]
    fn missing_fraction() {
        let spec = GeneratorSpec {
            n_samples: 100,
            n_features: 100,
            nan_ratio: 0.3,
            ..GeneratorSpec::default()
        };
        let (ds, _) = generate(&spec).unwrap();
        let frac = ds.n_missing() as f64 / 1e4;
        assert!((frac - 0.3).abs() <= 0.02, "{frac}");
    }

    #[test]
    fn infeasible_layouts() {
        let too_many = GeneratorSpec {
            n_features: 10,
            n_solutions: 3,
            sparsity: 4,
            ..GeneratorSpec::default()
        };
        assert!(matches!(generate(&too_many), Err(GemssError::Config(_))));
        let underdetermined = GeneratorSpec {
            n_samples: 3,
            n_features: 30,
            sparsity: 5,
            ..GeneratorSpec::default()
        };
        assert!(matches!(generate(&underdetermined), Err(GemssError::Generation(_))));
    }

    #[test]
    fn dense_nan_ratio_keeps_rows_usable() {
        let spec = GeneratorSpec {
            n_samples: 50,
            n_features: 4,
            n_solutions: 1,
            sparsity: 2,
            nan_ratio: 0.95,
            ..GeneratorSpec::default()
        };
        let (ds, _) = generate(&spec).unwrap();
        assert!(ds.validate().is_ok());
    }
}
