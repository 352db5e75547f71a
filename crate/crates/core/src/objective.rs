//! Masked likelihoods, the stratified ELBO estimator and the Jaccard diversity penalty.
//!
//! For every component `k` one reparameterized draw `β_k = μ_k + σ_k ⊙ ε_k` is taken
//! and the estimator is
//!
//! ```text
//! L̂ = Σ_k α_k [ log p(y | X, β_k) + log p(β_k) − log q(β_k) ]
//! value = L̂ − λ_J · J_avg(μ)
//! ```
//!
//! Gradients are exact derivatives of this estimator: pathwise through each draw,
//! direct through `log q`'s own parameters, and through the softmax weights.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::FitConfig;
use crate::dataset::{Dataset, Task};
use crate::error::{GemssError, Result};
use crate::math::{sigmoid, softplus, LN_2PI};
use crate::posterior::{accumulate_log_q, StateGradient, VariationalState};
use crate::priors::Prior;

/// Minibatch estimate of the full-data log likelihood, rescaled by `n / |batch|`.
pub fn log_likelihood(
    dataset: &Dataset,
    beta: &[f64],
    batch: &[usize],
    noise_var: f64,
) -> Result<f64> {
    check_batch(dataset, batch)?;
    if beta.len() != dataset.n_features() {
        return Err(GemssError::Input("coefficient length must equal p".into()));
    }
    Ok(likelihood_and_grad(dataset, beta, batch, noise_var, 0.0, None))
}

/// Fixed intercept: mean target for regression, clamped log-odds of the positive rate
/// for classification.
pub fn target_offset(dataset: &Dataset) -> f64 {
    let y = dataset.y();
    let mean = y.iter().sum::<f64>() / y.len().max(1) as f64;
    match dataset.task() {
        Task::Regression => mean,
        Task::Classification => {
            let q = mean.clamp(1e-3, 1.0 - 1e-3);
            (q / (1.0 - q)).ln()
        }
    }
}

fn check_batch(dataset: &Dataset, batch: &[usize]) -> Result<()> {
    if batch.is_empty() {
        return Err(GemssError::Config("empty batch".into()));
    }
    if let Some(&i) = batch.iter().find(|&&i| i >= dataset.n_samples()) {
        return Err(GemssError::Input(format!("batch index {i} out of range")));
    }
    Ok(())
}

/// Log likelihood over `batch`; when `grad` is given, `scale · ∇_β` is added to it.
fn likelihood_and_grad(
    dataset: &Dataset,
    beta: &[f64],
    batch: &[usize],
    noise_var: f64,
    offset: f64,
    grad: Option<(&mut [f64], f64)>,
) -> f64 {
    let y = dataset.y();
    let rescale = dataset.n_samples() as f64 / batch.len() as f64;
    let task = dataset.task();
    let mut total = 0.0;
    let mut grad = grad;
    for &i in batch {
        let x = dataset.filled_row(i);
        let eta: f64 = offset + x.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>();
        let (ll, dl) = match task {
            Task::Regression => {
                let r = y[i] - eta;
                (
                    -0.5 * (LN_2PI + noise_var.ln() + r * r / noise_var),
                    r / noise_var,
                )
            }
            // y·η − log(1 + e^η)
            Task::Classification => (y[i] * eta - softplus(eta), y[i] - sigmoid(eta)),
        };
        total += ll;
        if let Some((g, scale)) = grad.as_mut() {
            let c = *scale * rescale * dl;
            if c != 0.0 {
                for (gj, xj) in g.iter_mut().zip(x) {
                    *gj += c * xj;
                }
            }
        }
    }
    total * rescale
}

/// `s_j = tanh(|μ_j| / τ)`.
pub fn soft_support(mu_row: &[f64], tau: f64) -> Vec<f64> {
    mu_row.iter().map(|m| (m.abs() / tau).tanh()).collect()
}

/// Average pairwise soft Jaccard similarity between component supports.
pub fn jaccard_penalty(state: &VariationalState, tau: f64) -> f64 {
    jaccard_penalty_and_grad(state, tau, None)
}

/// Penalty value; `d J / d μ` is added into `grad_mu` (length `m·p`) when given.
///
/// Within a pair, a tie is resolved by treating the lower component index as the minimum.
pub fn jaccard_penalty_and_grad(
    state: &VariationalState,
    tau: f64,
    grad_mu: Option<&mut [f64]>,
) -> f64 {
    let (m, p) = (state.n_components(), state.n_features());
    if m < 2 {
        return 0.0;
    }
    let supports: Vec<Vec<f64>> = (0..m).map(|k| soft_support(state.mu_row(k), tau)).collect();
    let n_pairs = (m * (m - 1) / 2) as f64;
    let mut total = 0.0;
    let mut ds = grad_mu.as_ref().map(|_| vec![0.0; m * p]);
    for k in 0..m {
        for l in k + 1..m {
            let (sk, sl) = (&supports[k], &supports[l]);
            let (mut inter, mut union) = (0.0, 0.0);
            for j in 0..p {
                inter += sk[j].min(sl[j]);
                union += sk[j].max(sl[j]);
            }
            if union <= 0.0 {
                continue;
            }
            total += inter / union;
            if let Some(ds) = ds.as_mut() {
                let d_min = 1.0 / union / n_pairs;
                let d_max = -inter / (union * union) / n_pairs;
                for j in 0..p {
                    if sk[j] <= sl[j] {
                        ds[k * p + j] += d_min;
                        ds[l * p + j] += d_max;
                    } else {
                        ds[l * p + j] += d_min;
                        ds[k * p + j] += d_max;
                    }
                }
            }
        }
    }
    if let (Some(g), Some(ds)) = (grad_mu, ds) {
        let mu = state.mu();
        for i in 0..m * p {
            let s = supports[i / p][i % p];
            let dsdmu = mu[i].signum() * (1.0 - s * s) / tau;
            if mu[i] != 0.0 {
                g[i] += ds[i] * dsdmu;
            }
        }
    }
    total / n_pairs
}

/// Objective value, its parts, and the gradient with respect to all parameters.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub value: f64,
    pub elbo: f64,
    pub penalty: f64,
    pub grad: StateGradient,
}

/// The regularized objective bound to a dataset, prior and configuration.
#[derive(Debug, Clone)]
pub struct Objective<'a> {
    dataset: &'a Dataset,
    prior: Prior,
    config: FitConfig,
    offset: f64,
}

impl<'a> Objective<'a> {
    /// Binds the prior to the dataset dimension; sampled supports are drawn from `rng`.
    pub fn new<R: Rng + ?Sized>(dataset: &'a Dataset, config: &FitConfig, rng: &mut R) -> Result<Self> {
        dataset.validate()?;
        config.validate(dataset.n_samples(), dataset.n_features())?;
        let prior = Prior::new(&config.prior, dataset.n_features(), rng)?;
        Ok(Self {
            dataset,
            prior,
            config: config.clone(),
            offset: if config.fit_offset { target_offset(dataset) } else { 0.0 },
        })
    }

    pub fn with_prior(dataset: &'a Dataset, config: &FitConfig, prior: Prior) -> Result<Self> {
        dataset.validate()?;
        config.validate(dataset.n_samples(), dataset.n_features())?;
        if prior.dim() != dataset.n_features() {
            return Err(GemssError::Config("prior dimension does not match p".into()));
        }
        Ok(Self {
            dataset,
            prior,
            config: config.clone(),
            offset: if config.fit_offset { target_offset(dataset) } else { 0.0 },
        })
    }

    pub fn prior(&self) -> &Prior {
        &self.prior
    }

    pub fn config(&self) -> &FitConfig {
        &self.config
    }

    pub fn dataset(&self) -> &Dataset {
        self.dataset
    }

    /// Intercept added to every linear predictor.
    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Draws standard-normal noise for every (component, sample) slot.
    pub fn draw_noise<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> Vec<Vec<f64>> {
        let p = self.dataset.n_features();
        (0..m * self.config.samples_per_component)
            .map(|_| (0..p).map(|_| StandardNormal.sample(rng)).collect())
            .collect()
    }

    pub fn evaluate_sampled<R: Rng + ?Sized>(
        &self,
        state: &VariationalState,
        batch: &[usize],
        rng: &mut R,
    ) -> Result<Evaluation> {
        let noise = self.draw_noise(state.n_components(), rng);
        self.evaluate(state, batch, &noise)
    }

    /// Evaluates with fixed noise; slot `k·S + s` holds draw `s` of component `k`.
    pub fn evaluate(
        &self,
        state: &VariationalState,
        batch: &[usize],
        noise: &[Vec<f64>],
    ) -> Result<Evaluation> {
        let (m, p) = (state.n_components(), state.n_features());
        let spc = self.config.samples_per_component;
        if p != self.dataset.n_features() {
            return Err(GemssError::Config(format!(
                "state has {p} features, dataset has {}",
                self.dataset.n_features()
            )));
        }
        if noise.len() != m * spc || noise.iter().any(|e| e.len() != p) {
            return Err(GemssError::Input("noise shape does not match state".into()));
        }
        check_batch(self.dataset, batch)?;

        let sigma = state.sigma();
        let log_alpha = state.log_weights();
        let alpha: Vec<f64> = log_alpha.iter().map(|l| l.exp()).collect();
        let mut g = StateGradient::zeros(m, p);
        let mut terms = vec![0.0; m];
        let mut beta = vec![0.0; p];
        let mut dbeta = vec![0.0; p];
        let mut gprior = vec![0.0; p];

        for k in 0..m {
            let w = alpha[k] / spc as f64;
            let mu = state.mu_row(k);
            let sig = &sigma[k * p..(k + 1) * p];
            for s in 0..spc {
                let eps = &noise[k * spc + s];
                for j in 0..p {
                    beta[j] = mu[j] + sig[j] * eps[j];
                }
                dbeta.fill(0.0);
                let ll = likelihood_and_grad(
                    self.dataset,
                    &beta,
                    batch,
                    self.config.noise_var,
                    self.offset,
                    Some((&mut dbeta, w)),
                );
                let lp = self.prior.log_density_and_grad(&beta, &mut gprior)?;
                for j in 0..p {
                    dbeta[j] += w * gprior[j];
                }
                let lq = accumulate_log_q(state, &beta, &sigma, &log_alpha, -w, &mut g, &mut dbeta);
                terms[k] += (ll + lp - lq) / spc as f64;
                let params = g.params_mut();
                for j in 0..p {
                    params[k * p + j] += dbeta[j];
                    params[m * p + k * p + j] += dbeta[j] * eps[j];
                }
            }
        }

        let elbo: f64 = alpha.iter().zip(&terms).map(|(a, t)| a * t).sum();
        for k in 0..m {
            g.weight_logits_mut()[k] += alpha[k] * (terms[k] - elbo);
        }

        let lambda = self.config.lambda_jaccard;
        let penalty = if m > 1 {
            let mut gpen = vec![0.0; m * p];
            let pen = jaccard_penalty_and_grad(state, self.config.jaccard_tau, Some(&mut gpen));
            if lambda != 0.0 {
                for (gi, pi) in g.mu_mut().iter_mut().zip(&gpen) {
                    *gi -= lambda * pi;
                }
            }
            pen
        } else {
            0.0
        };

        // σ-space to ρ-space
        let rho = state.rho();
        let params = g.params_mut();
        for i in 0..m * p {
            params[m * p + i] *= sigmoid(rho[i]);
        }

        Ok(Evaluation {
            value: elbo - lambda * penalty,
            elbo,
            penalty,
            grad: g,
        })
    }
}

/// One-shot evaluation: binds the prior and draws fresh noise from `rng`.
pub fn objective_and_gradients<R: Rng + ?Sized>(
    dataset: &Dataset,
    state: &VariationalState,
    config: &FitConfig,
    batch: &[usize],
    rng: &mut R,
) -> Result<Evaluation> {
    let objective = Objective::new(dataset, config, rng)?;
    objective.evaluate_sampled(state, batch, rng)
}
