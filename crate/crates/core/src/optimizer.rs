//! Adam-driven stochastic maximization of the regularized objective.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::FitConfig;
use crate::dataset::Dataset;
use crate::error::{GemssError, Result};
use crate::objective::Objective;
use crate::posterior::{StateGradient, VariationalState};

/// Consecutive bad iterations tolerated before a fit is declared divergent.
pub const DIVERGENCE_PATIENCE: usize = 50;
/// Objective magnitude treated as a sign of divergence.
pub const DIVERGENCE_MAGNITUDE: f64 = 1e7;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamMoments {
    pub first: Vec<f64>,
    pub second: Vec<f64>,
    pub step: u64,
}

impl AdamMoments {
    pub fn zeros(len: usize) -> Self {
        Self {
            first: vec![0.0; len],
            second: vec![0.0; len],
            step: 0,
        }
    }

    pub fn for_state(state: &VariationalState) -> Self {
        Self::zeros(state.params().len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamParams {
    pub fn from_config(c: &FitConfig) -> Self {
        Self {
            lr: c.learning_rate,
            beta1: c.adam_beta1,
            beta2: c.adam_beta2,
            eps: c.adam_eps,
        }
    }
}

/// Bias-corrected Adam ascent step on a flat parameter buffer.
pub fn adam_step_params(params: &mut [f64], grads: &[f64], moments: &mut AdamMoments, hp: AdamParams) {
    adam_update(params, grads, moments, hp, |_| hp.lr);
}

fn adam_update(
    params: &mut [f64],
    grads: &[f64],
    moments: &mut AdamMoments,
    hp: AdamParams,
    lr_at: impl Fn(usize) -> f64,
) {
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), moments.first.len());
    moments.step += 1;
    let t = moments.step as i32;
    let c1 = 1.0 - hp.beta1.powi(t);
    let c2 = 1.0 - hp.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        let m = hp.beta1 * moments.first[i] + (1.0 - hp.beta1) * g;
        let v = hp.beta2 * moments.second[i] + (1.0 - hp.beta2) * g * g;
        moments.first[i] = m;
        moments.second[i] = v;
        params[i] += lr_at(i) * (m / c1) / ((v / c2).sqrt() + hp.eps);
    }
}

/// Adam step on a whole state; the mixture-weight logits use `weight_lr` instead of `hp.lr`.
pub fn adam_step(
    state: &mut VariationalState,
    grads: &StateGradient,
    moments: &mut AdamMoments,
    hp: AdamParams,
    weight_lr: f64,
) {
    let split = 2 * state.n_components() * state.n_features();
    adam_update(state.params_mut(), grads.params(), moments, hp, |i| {
        if i < split {
            hp.lr
        } else {
            weight_lr
        }
    });
}

/// One snapshot of the optimization history.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub objective: f64,
    pub elbo: f64,
    pub penalty: f64,
    /// Per component, the indices of the largest `|μ|` entries (descending).
    pub top_features: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OptimizationTrace {
    pub records: Vec<TraceRecord>,
}

impl OptimizationTrace {
    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    /// Columns: iteration, objective, elbo, penalty, top_features
    /// (components separated by `|`, indices by spaces).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "iteration,objective,elbo,penalty,top_features")?;
        for r in &self.records {
            let tops: Vec<String> = r
                .top_features
                .iter()
                .map(|c| c.iter().map(|j| j.to_string()).collect::<Vec<_>>().join(" "))
                .collect();
            writeln!(
                w,
                "{},{},{},{},{}",
                r.iteration,
                r.objective,
                r.elbo,
                r.penalty,
                tops.join("|")
            )?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Indices of the `k` largest `|v|`, ties broken by lower index.
pub fn top_abs_indices(v: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].abs().total_cmp(&v[a].abs()).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Uniform minibatches without replacement, reshuffled at each epoch.
#[derive(Debug, Clone)]
pub struct Batcher {
    order: Vec<usize>,
    cursor: usize,
    batch_size: usize,
}

impl Batcher {
    pub fn new(n: usize, batch_size: usize) -> Self {
        let order = (0..n).collect();
        Self {
            order,
            cursor: n,
            batch_size: batch_size.clamp(1, n.max(1)),
        }
    }

    pub fn next_batch<R: Rng + ?Sized>(&mut self, rng: &mut R) -> &[usize] {
        if self.cursor + self.batch_size > self.order.len() {
            self.order.shuffle(rng);
            self.cursor = 0;
        }
        let start = self.cursor;
        self.cursor += self.batch_size;
        &self.order[start..self.cursor]
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub state: VariationalState,
    pub trace: OptimizationTrace,
}

/// Recording interval: every `max(1, T/200)` iterations.
pub fn trace_interval(n_iterations: usize) -> usize {
    (n_iterations / 200).max(1)
}

/// Runs `config.n_iterations` Adam iterations from a seeded initial state.
pub fn fit(dataset: &Dataset, config: &FitConfig) -> Result<FitResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let objective = Objective::new(dataset, config, &mut rng)?;
    let state = VariationalState::init(
        dataset.n_features(),
        config.n_components,
        &mut rng,
        &config.init_spec(),
    )?;
    fit_from(&objective, state, &mut rng)
}

/// Continues optimization of `state` under `objective` for the configured number of iterations.
pub fn fit_from<R: Rng + ?Sized>(
    objective: &Objective<'_>,
    mut state: VariationalState,
    rng: &mut R,
) -> Result<FitResult> {
    let config = objective.config();
    let n = objective.dataset().n_samples();
    let hp = AdamParams::from_config(config);
    let mut moments = AdamMoments::for_state(&state);
    let mut batcher = Batcher::new(n, config.effective_batch(n));
    let every = trace_interval(config.n_iterations);
    let top_k = config.prior.sparsity.min(state.n_features());
    let mut trace = OptimizationTrace::default();
    let mut bad_streak = 0usize;

    for t in 1..=config.n_iterations {
        let batch = batcher.next_batch(rng).to_vec();
        let eval = objective.evaluate_sampled(&state, &batch, rng)?;
        let finite_grad = eval.grad.params().iter().all(|g| g.is_finite());
        let bad = !eval.value.is_finite() || eval.value.abs() > DIVERGENCE_MAGNITUDE;
        bad_streak = if bad { bad_streak + 1 } else { 0 };
        if bad_streak >= DIVERGENCE_PATIENCE {
            return Err(GemssError::Divergence(format!(
                "objective was non-finite or exceeded {DIVERGENCE_MAGNITUDE:e} in magnitude for \
                 {DIVERGENCE_PATIENCE} consecutive iterations (last value {} at iteration {t}); \
                 check feature scaling or increase VAR_SPIKE",
                eval.value
            )));
        }
        if finite_grad {
            adam_step(&mut state, &eval.grad, &mut moments, hp, config.weight_learning_rate);
        }
        if t % every == 0 || t == config.n_iterations {
            trace.records.push(TraceRecord {
                iteration: t,
                objective: eval.value,
                elbo: eval.elbo,
                penalty: eval.penalty,
                top_features: (0..state.n_components())
                    .map(|k| top_abs_indices(state.mu_row(k), top_k))
                    .collect(),
            });
        }
    }
    Ok(FitResult { state, trace })
}
