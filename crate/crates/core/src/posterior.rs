//! Mixture of diagonal Gaussians used as the variational family.
//!
//! Parameters are kept unconstrained: `σ = softplus(ρ)` and `α = softmax(logits)`.
//! All parameters live in one flat buffer laid out as `[μ (m×p) | ρ (m×p) | logits (m)]`,
//! which the optimizer and gradient checks treat as a single vector.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{GemssError, Result};
use crate::math::{inv_softplus, log_sum_exp, softplus, LN_2PI};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitSpec {
    /// Standard deviation of the initial component means.
    pub init_mu_std: f64,
    /// Initial value of every component scale.
    pub init_sigma: f64,
}

impl Default for InitSpec {
    fn default() -> Self {
        Self {
            init_mu_std: 0.01,
            init_sigma: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariationalState {
    m: usize,
    p: usize,
    params: Vec<f64>,
}

/// Derivatives of a scalar with respect to every unconstrained parameter.
pub type StateGradient = VariationalState;

/// One reparameterized draw `β = μ_k + σ_k ⊙ ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentSample {
    pub component_index: usize,
    pub beta: Vec<f64>,
    pub noise: Vec<f64>,
}

impl VariationalState {
    pub fn zeros(m: usize, p: usize) -> Self {
        Self {
            m,
            p,
            params: vec![0.0; 2 * m * p + m],
        }
    }

    /// Means `~ N(0, init_mu_std²)`, all scales equal to `init_sigma`, uniform weights.
    pub fn init<R: Rng + ?Sized>(p: usize, m: usize, rng: &mut R, init: &InitSpec) -> Result<Self> {
        if p == 0 || m == 0 {
            return Err(GemssError::Config(format!(
                "state needs p ≥ 1 and m ≥ 1 (got p = {p}, m = {m})"
            )));
        }
        if !(init.init_sigma > 0.0) || !(init.init_mu_std >= 0.0) {
            return Err(GemssError::Config("initial scales must be positive".into()));
        }
        let mut s = Self::zeros(m, p);
        for v in s.mu_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *v = init.init_mu_std * z;
        }
        let rho0 = inv_softplus(init.init_sigma);
        s.rho_mut().fill(rho0);
        Ok(s)
    }

    pub fn from_parts(m: usize, p: usize, mu: &[f64], rho: &[f64], logits: &[f64]) -> Result<Self> {
        if mu.len() != m * p || rho.len() != m * p || logits.len() != m {
            return Err(GemssError::Input("state part lengths do not match m×p".into()));
        }
        let mut params = Vec::with_capacity(2 * m * p + m);
        params.extend_from_slice(mu);
        params.extend_from_slice(rho);
        params.extend_from_slice(logits);
        Ok(Self { m, p, params })
    }

    pub fn n_components(&self) -> usize {
        self.m
    }

    pub fn n_features(&self) -> usize {
        self.p
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn mu(&self) -> &[f64] {
        &self.params[..self.m * self.p]
    }

    pub fn mu_mut(&mut self) -> &mut [f64] {
        let n = self.m * self.p;
        &mut self.params[..n]
    }

    pub fn mu_row(&self, k: usize) -> &[f64] {
        &self.params[k * self.p..(k + 1) * self.p]
    }

    pub fn mu_row_mut(&mut self, k: usize) -> &mut [f64] {
        let p = self.p;
        &mut self.params[k * p..(k + 1) * p]
    }

    pub fn rho(&self) -> &[f64] {
        let n = self.m * self.p;
        &self.params[n..2 * n]
    }

    pub fn rho_mut(&mut self) -> &mut [f64] {
        let n = self.m * self.p;
        &mut self.params[n..2 * n]
    }

    pub fn rho_row(&self, k: usize) -> &[f64] {
        let off = self.m * self.p + k * self.p;
        &self.params[off..off + self.p]
    }

    pub fn weight_logits(&self) -> &[f64] {
        &self.params[2 * self.m * self.p..]
    }

    pub fn weight_logits_mut(&mut self) -> &mut [f64] {
        let n = 2 * self.m * self.p;
        &mut self.params[n..]
    }

    /// Component scales `softplus(ρ)` as an `m×p` row-major buffer.
    pub fn sigma(&self) -> Vec<f64> {
        self.rho().iter().map(|&r| softplus(r)).collect()
    }

    /// Mixture weights `softmax(logits)`.
    pub fn weights(&self) -> Vec<f64> {
        let logits = self.weight_logits();
        let lse = log_sum_exp(logits);
        logits.iter().map(|l| (l - lse).exp()).collect()
    }

    pub fn log_weights(&self) -> Vec<f64> {
        let logits = self.weight_logits();
        let lse = log_sum_exp(logits);
        logits.iter().map(|l| l - lse).collect()
    }

    fn check_component(&self, k: usize) -> Result<()> {
        if k >= self.m {
            return Err(GemssError::Input(format!(
                "component {k} out of range (m = {})",
                self.m
            )));
        }
        Ok(())
    }

    pub fn sample_component<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Result<ComponentSample> {
        self.check_component(k)?;
        let noise: Vec<f64> = (0..self.p).map(|_| StandardNormal.sample(rng)).collect();
        self.sample_with_noise(k, noise)
    }

    /// Reparameterized draw with caller-supplied standard-normal noise.
    pub fn sample_with_noise(&self, k: usize, noise: Vec<f64>) -> Result<ComponentSample> {
        self.check_component(k)?;
        if noise.len() != self.p {
            return Err(GemssError::Input("noise length must equal p".into()));
        }
        let beta = self
            .mu_row(k)
            .iter()
            .zip(self.rho_row(k))
            .zip(&noise)
            .map(|((&mu, &rho), &e)| mu + softplus(rho) * e)
            .collect();
        Ok(ComponentSample {
            component_index: k,
            beta,
            noise,
        })
    }

    /// Per-component log densities `log α_l + log N(β; μ_l, diag σ_l²)`.
    pub(crate) fn weighted_component_log_densities(
        &self,
        beta: &[f64],
        sigma: &[f64],
        log_alpha: &[f64],
        out: &mut [f64],
    ) {
        let p = self.p;
        for l in 0..self.m {
            let mu = self.mu_row(l);
            let sig = &sigma[l * p..(l + 1) * p];
            let mut acc = 0.0;
            for j in 0..p {
                let z = (beta[j] - mu[j]) / sig[j];
                acc += sig[j].ln() + 0.5 * z * z;
            }
            out[l] = log_alpha[l] - 0.5 * LN_2PI * p as f64 - acc;
        }
    }

    /// `log q(β)`, the mixture log density.
    pub fn log_q(&self, beta: &[f64]) -> f64 {
        let sigma = self.sigma();
        let log_alpha = self.log_weights();
        let mut terms = vec![0.0; self.m];
        self.weighted_component_log_densities(beta, &sigma, &log_alpha, &mut terms);
        log_sum_exp(&terms)
    }

    /// Gradient of `log q(β)` with respect to the state parameters at fixed `β`.
    pub fn grad_log_q(&self, beta: &[f64]) -> StateGradient {
        let sigma = self.sigma();
        let log_alpha = self.log_weights();
        let mut g = Self::zeros(self.m, self.p);
        let mut dbeta = vec![0.0; self.p];
        accumulate_log_q(self, beta, &sigma, &log_alpha, 1.0, &mut g, &mut dbeta);
        let n = self.m * self.p;
        for i in 0..n {
            g.params[n + i] *= crate::math::sigmoid(self.params[n + i]);
        }
        g
    }

    /// Writes one row per (component, feature) with the weight columns repeated.
    pub fn write_csv(&self, path: &Path, feature_names: &[String]) -> Result<()> {
        if feature_names.len() != self.p {
            return Err(GemssError::Input("feature name count must equal p".into()));
        }
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "component,feature_index,feature,mu,rho,sigma,weight_logit,alpha")?;
        let alpha = self.weights();
        let logits = self.weight_logits();
        for k in 0..self.m {
            for j in 0..self.p {
                let rho = self.rho_row(k)[j];
                writeln!(
                    w,
                    "{k},{j},{},{},{rho},{},{},{}",
                    crate::dataset::csv_field(&feature_names[j]),
                    self.mu_row(k)[j],
                    softplus(rho),
                    logits[k],
                    alpha[k]
                )?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a file produced by [`write_csv`](Self::write_csv); values round-trip exactly.
    pub fn read_csv(path: &Path) -> Result<(Self, Vec<String>)> {
        let mut rdr = csv::Reader::from_path(path)?;
        let mut rows: Vec<(usize, usize, String, f64, f64, f64)> = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let field = |c: usize, name: &str| -> Result<&str> {
                rec.get(c).ok_or_else(|| GemssError::Parse {
                    row: i + 2,
                    column: name.into(),
                    message: "missing field".into(),
                })
            };
            let num = |c: usize, name: &str| -> Result<f64> {
                field(c, name)?.trim().parse::<f64>().map_err(|e| GemssError::Parse {
                    row: i + 2,
                    column: name.into(),
                    message: e.to_string(),
                })
            };
            let int = |c: usize, name: &str| -> Result<usize> {
                field(c, name)?.trim().parse::<usize>().map_err(|e| GemssError::Parse {
                    row: i + 2,
                    column: name.into(),
                    message: e.to_string(),
                })
            };
            rows.push((
                int(0, "component")?,
                int(1, "feature_index")?,
                field(2, "feature")?.to_string(),
                num(3, "mu")?,
                num(4, "rho")?,
                num(6, "weight_logit")?,
            ));
        }
        let m = rows.iter().map(|r| r.0 + 1).max().unwrap_or(0);
        let p = rows.iter().map(|r| r.1 + 1).max().unwrap_or(0);
        if m == 0 || p == 0 || rows.len() != m * p {
            return Err(GemssError::Input(format!(
                "state file {} does not hold a complete m×p table",
                path.display()
            )));
        }
        let mut s = Self::zeros(m, p);
        let mut names = vec![String::new(); p];
        for (k, j, name, mu, rho, logit) in rows {
            s.mu_row_mut(k)[j] = mu;
            let off = m * p + k * p + j;
            s.params[off] = rho;
            s.weight_logits_mut()[k] = logit;
            names[j] = name;
        }
        Ok((s, names))
    }
}

/// Adds `coef · ∂ log q(β)/∂θ` (direct dependence, σ-space for scales) into `g`
/// and `coef · ∇_β log q(β)` into `dbeta`. Returns `log q(β)`.
pub(crate) fn accumulate_log_q(
    state: &VariationalState,
    beta: &[f64],
    sigma: &[f64],
    log_alpha: &[f64],
    coef: f64,
    g: &mut StateGradient,
    dbeta: &mut [f64],
) -> f64 {
    let (m, p) = (state.m, state.p);
    let mut terms = vec![0.0; m];
    state.weighted_component_log_densities(beta, sigma, log_alpha, &mut terms);
    let lq = log_sum_exp(&terms);
    for l in 0..m {
        let r = (terms[l] - lq).exp();
        let alpha = log_alpha[l].exp();
        g.weight_logits_mut()[l] += coef * (r - alpha);
        if r == 0.0 {
            continue;
        }
        let c = coef * r;
        let mu = state.mu_row(l);
        let sig = &sigma[l * p..(l + 1) * p];
        for j in 0..p {
            let inv_var = 1.0 / (sig[j] * sig[j]);
            let d = beta[j] - mu[j];
            g.params[l * p + j] += c * d * inv_var;
            g.params[m * p + l * p + j] += c * (d * d * inv_var - 1.0) / sig[j];
            dbeta[j] -= c * d * inv_var;
        }
    }
    lq
}
