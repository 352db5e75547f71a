use serde::{Deserialize, Serialize};

use crate::error::{GemssError, Result};
use crate::posterior::InitSpec;
use crate::priors::PriorSpec;

/// Hyperparameters of a single fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub prior: PriorSpec,
    /// Number of mixture components (candidate solutions).
    pub n_components: usize,
    pub lambda_jaccard: f64,
    /// Gaussian likelihood variance (regression only).
    pub noise_var: f64,
    /// Adds a fixed, unpenalized intercept to the linear predictor: the target mean for
    /// regression, the empirical log-odds for classification.
    pub fit_offset: bool,
    pub n_iterations: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Adam step size for the mixture-weight logits; 0 keeps the weights uniform.
    pub weight_learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Temperature of the soft support used by the diversity penalty.
    pub jaccard_tau: f64,
    pub samples_per_component: usize,
    pub init_mu_std: f64,
    pub init_sigma: f64,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            prior: PriorSpec::default(),
            n_components: 9,
            lambda_jaccard: 500.0,
            noise_var: 1.0,
            fit_offset: true,
            n_iterations: 4000,
            batch_size: 32,
            learning_rate: 0.05,
            weight_learning_rate: 0.0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            jaccard_tau: 0.1,
            samples_per_component: 1,
            init_mu_std: 0.01,
            init_sigma: 0.1,
            seed: 42,
        }
    }
}

impl FitConfig {
    pub fn init_spec(&self) -> InitSpec {
        InitSpec {
            init_mu_std: self.init_mu_std,
            init_sigma: self.init_sigma,
        }
    }

    /// Batch size actually used for `n` samples.
    pub fn effective_batch(&self, n: usize) -> usize {
        self.batch_size.min(n)
    }

    pub fn validate(&self, n: usize, p: usize) -> Result<()> {
        let err = |m: String| Err(GemssError::Config(m));
        if self.n_components == 0 {
            return err("N_CANDIDATE_SOLUTIONS must be at least 1".into());
        }
        if self.n_iterations == 0 {
            return err("N_ITERATIONS must be at least 1".into());
        }
        if self.batch_size == 0 {
            return err("BATCH_SIZE must be at least 1".into());
        }
        if self.batch_size > n {
            log::warn!(
                "batch size {} exceeds the {n} available samples; using full batches",
                self.batch_size
            );
        }
        if !(self.lambda_jaccard >= 0.0) || !self.lambda_jaccard.is_finite() {
            return err("LAMBDA_JACCARD must be a nonnegative number".into());
        }
        if !(self.noise_var > 0.0) {
            return err("NOISE_VAR must be positive".into());
        }
        if !(self.learning_rate > 0.0) {
            return err("LEARNING_RATE must be positive".into());
        }
        if !(self.weight_learning_rate >= 0.0) || !self.weight_learning_rate.is_finite() {
            return err("WEIGHT_LEARNING_RATE must be a nonnegative number".into());
        }
        if !(self.jaccard_tau > 0.0) {
            return err("JACCARD_TAU must be positive".into());
        }
        if self.samples_per_component == 0 {
            return err("SAMPLES_PER_COMPONENT must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return err("Adam decay rates must lie in [0, 1)".into());
        }
        self.prior.validate(p)
    }
}
