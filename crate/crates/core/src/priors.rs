//! Sparsity-inducing priors over the coefficient vector.
//!
//! Three families are supported:
//!
//! * `sss`: structured spike-and-slab, a uniform mixture over supports of exactly
//!   `D` active coordinates. Active coordinates follow the wide (slab) Gaussian,
//!   the rest the narrow (spike) Gaussian.
//! * `ss`: independent per-coordinate spike/slab mixture with inclusion probability.
//! * `student`: independent Student-t coordinates.
//!
//! The `sss` density factors as
//! `Σ_j log spike_j + log e_D(r) − log |𝒜|` with `r_j = slab_j / spike_j` and
//! `e_D` the elementary symmetric polynomial of degree `D`, which is what the
//! `dp_exact` mode evaluates in `O(p·D)` log-space operations. The gradient is a
//! per-coordinate blend of slab and spike scores weighted by the posterior
//! probability that the coordinate sits in the active support.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{GemssError, Result};
use crate::math::{binomial, ln_binomial, log_add_exp, log_normal, log_sum_exp};

/// Largest support count evaluated by explicit enumeration in automatic mode.
pub const ENUMERATE_LIMIT: f64 = 1e4;
/// Largest `p·D` handled by the exact recurrence in automatic mode.
pub const DP_LIMIT: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorKind {
    Sss,
    Ss,
    Student,
}

impl std::str::FromStr for PriorKind {
    type Err = GemssError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sss" => Ok(Self::Sss),
            "ss" => Ok(Self::Ss),
            "student" => Ok(Self::Student),
            other => Err(GemssError::Config(format!("unknown prior '{other}'"))),
        }
    }
}

impl std::fmt::Display for PriorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Sss => "sss",
            Self::Ss => "ss",
            Self::Student => "student",
        })
    }
}

/// How the `sss` support mixture is summed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportMode {
    /// Pick `Enumerate`, `DpExact` or `Sampled` from the problem size.
    Auto,
    Enumerate,
    DpExact,
    Sampled,
}

impl std::str::FromStr for SupportMode {
    type Err = GemssError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "auto" => Ok(Self::Auto),
            "enumerate" => Ok(Self::Enumerate),
            "dp_exact" | "dp" => Ok(Self::DpExact),
            "sampled" => Ok(Self::Sampled),
            other => Err(GemssError::Config(format!("unknown support mode '{other}'"))),
        }
    }
}

impl std::fmt::Display for SupportMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Auto => "auto",
            Self::Enumerate => "enumerate",
            Self::DpExact => "dp_exact",
            Self::Sampled => "sampled",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub kind: PriorKind,
    /// Variance of the narrow Gaussian.
    pub var_spike: f64,
    /// Variance of the wide Gaussian.
    pub var_slab: f64,
    /// Exact number of active coordinates (`sss`).
    pub sparsity: usize,
    /// Per-coordinate slab probability (`ss`); `None` means `sparsity / p`.
    pub inclusion_prob: Option<f64>,
    pub student_dof: f64,
    pub student_scale: f64,
    pub support_mode: SupportMode,
    pub n_sampled_supports: usize,
}

impl Default for PriorSpec {
    fn default() -> Self {
        Self {
            kind: PriorKind::Sss,
            var_spike: 1e-3,
            var_slab: 3.0,
            sparsity: 5,
            inclusion_prob: None,
            student_dof: 3.0,
            student_scale: 1.0,
            support_mode: SupportMode::Auto,
            n_sampled_supports: 256,
        }
    }
}

impl PriorSpec {
    pub fn validate(&self, p: usize) -> Result<()> {
        let cfg = |m: String| Err(GemssError::Config(m));
        match self.kind {
            PriorKind::Sss | PriorKind::Ss => {
                if !(self.var_spike > 0.0 && self.var_slab > 0.0) {
                    return cfg("spike and slab variances must be positive".into());
                }
                if self.var_spike > self.var_slab {
                    return cfg(format!(
                        "var_spike ({}) must not exceed var_slab ({})",
                        self.var_spike, self.var_slab
                    ));
                }
            }
            PriorKind::Student => {
                if !(self.student_dof > 0.0 && self.student_scale > 0.0) {
                    return cfg("student dof and scale must be positive".into());
                }
            }
        }
        if self.kind == PriorKind::Sss {
            if self.sparsity == 0 || self.sparsity > p {
                return cfg(format!(
                    "sparsity D = {} must lie in [1, p = {p}]",
                    self.sparsity
                ));
            }
            if self.support_mode == SupportMode::Sampled && self.n_sampled_supports == 0 {
                return cfg("n_sampled_supports must be positive".into());
            }
        }
        if self.kind == PriorKind::Ss {
            let pi = self.inclusion_prob_for(p);
            if !(pi > 0.0 && pi < 1.0) {
                return cfg(format!("inclusion probability {pi} outside (0, 1)"));
            }
        }
        Ok(())
    }

    pub fn inclusion_prob_for(&self, p: usize) -> f64 {
        self.inclusion_prob
            .unwrap_or(self.sparsity as f64 / p.max(1) as f64)
    }

    /// The concrete support-summation mode used for dimension `p`.
    pub fn resolve_mode(&self, p: usize) -> SupportMode {
        match self.support_mode {
            SupportMode::Auto => {
                if binomial(p, self.sparsity) <= ENUMERATE_LIMIT {
                    SupportMode::Enumerate
                } else if p.saturating_mul(self.sparsity) <= DP_LIMIT {
                    SupportMode::DpExact
                } else {
                    SupportMode::Sampled
                }
            }
            m => m,
        }
    }
}

/// A prior bound to a dimension, with any sampled support set fixed.
#[derive(Debug, Clone)]
pub struct Prior {
    spec: PriorSpec,
    p: usize,
    mode: SupportMode,
    /// Fixed support sample (sampled mode only).
    supports: Vec<Vec<usize>>,
    student_const: f64,
}

impl Prior {
    /// Binds `spec` to dimension `p`. Sampled supports are drawn once from `rng`.
    pub fn new<R: Rng + ?Sized>(spec: &PriorSpec, p: usize, rng: &mut R) -> Result<Self> {
        spec.validate(p)?;
        let mode = if spec.kind == PriorKind::Sss {
            spec.resolve_mode(p)
        } else {
            SupportMode::Auto
        };
        let supports = if spec.kind == PriorKind::Sss && mode == SupportMode::Sampled {
            (0..spec.n_sampled_supports)
                .map(|_| {
                    let mut s = sample(rng, p, spec.sparsity).into_vec();
                    s.sort_unstable();
                    s
                })
                .collect()
        } else {
            Vec::new()
        };
        let nu = spec.student_dof;
        let student_const = libm::lgamma(0.5 * (nu + 1.0))
            - libm::lgamma(0.5 * nu)
            - 0.5 * (nu * std::f64::consts::PI).ln()
            - spec.student_scale.ln();
        Ok(Self {
            spec: spec.clone(),
            p,
            mode,
            supports,
            student_const,
        })
    }

    /// Binds a prior that needs no randomness (anything except sampled `sss`).
    pub fn deterministic(spec: &PriorSpec, p: usize) -> Result<Self> {
        if spec.kind == PriorKind::Sss && spec.resolve_mode(p) == SupportMode::Sampled {
            return Err(GemssError::Config(
                "sampled support mode needs a random source".into(),
            ));
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        Self::new(spec, p, &mut rng)
    }

    pub fn spec(&self) -> &PriorSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn mode(&self) -> SupportMode {
        self.mode
    }

    pub fn sampled_supports(&self) -> &[Vec<usize>] {
        &self.supports
    }

    pub fn log_density(&self, beta: &[f64]) -> Result<f64> {
        self.check(beta)?;
        Ok(self.eval(beta, None))
    }

    pub fn grad(&self, beta: &[f64]) -> Result<Vec<f64>> {
        let mut g = vec![0.0; beta.len()];
        self.log_density_and_grad(beta, &mut g)?;
        Ok(g)
    }

    /// Log density; the gradient is written into `grad` (overwritten).
    pub fn log_density_and_grad(&self, beta: &[f64], grad: &mut [f64]) -> Result<f64> {
        self.check(beta)?;
        assert_eq!(grad.len(), beta.len());
        Ok(self.eval(beta, Some(grad)))
    }

    fn check(&self, beta: &[f64]) -> Result<()> {
        if beta.len() != self.p {
            return Err(GemssError::Input(format!(
                "coefficient vector has length {}, prior expects {}",
                beta.len(),
                self.p
            )));
        }
        if let Some(j) = beta.iter().position(|b| !b.is_finite()) {
            return Err(GemssError::Input(format!(
                "non-finite coefficient at index {j}"
            )));
        }
        Ok(())
    }

    fn eval(&self, beta: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let s = &self.spec;
        match s.kind {
            PriorKind::Sss => {
                let d = s.sparsity;
                match self.mode {
                    SupportMode::Enumerate => {
                        sss_enumerate(beta, s.var_spike, s.var_slab, d, grad)
                    }
                    SupportMode::DpExact | SupportMode::Auto => {
                        sss_dp(beta, s.var_spike, s.var_slab, d, grad)
                    }
                    SupportMode::Sampled => sss_over_supports(
                        beta,
                        s.var_spike,
                        s.var_slab,
                        &self.supports,
                        grad,
                    ),
                }
            }
            PriorKind::Ss => ss_log_density(
                beta,
                s.var_spike,
                s.var_slab,
                s.inclusion_prob_for(self.p),
                grad,
            ),
            PriorKind::Student => {
                let nu = s.student_dof;
                let scale = s.student_scale;
                let mut total = 0.0;
                let mut grad = grad;
                for (j, &b) in beta.iter().enumerate() {
                    let z = b / scale;
                    total += self.student_const - 0.5 * (nu + 1.0) * (z * z / nu).ln_1p();
                    if let Some(g) = grad.as_deref_mut() {
                        g[j] = -(nu + 1.0) * b / (nu * scale * scale + b * b);
                    }
                }
                total
            }
        }
    }
}

/// Per-coordinate log spike densities and log slab/spike ratios.
fn log_ratios(beta: &[f64], var_spike: f64, var_slab: f64) -> (f64, Vec<f64>) {
    let mut base = 0.0;
    let ratios = beta
        .iter()
        .map(|&b| {
            let ls = log_normal(b, 0.0, var_spike);
            base += ls;
            log_normal(b, 0.0, var_slab) - ls
        })
        .collect();
    (base, ratios)
}

/// Writes `π_j·slab_score + (1-π_j)·spike_score` into `grad`.
fn blend_scores(beta: &[f64], incl: &[f64], var_spike: f64, var_slab: f64, grad: &mut [f64]) {
    for ((g, &b), &pi) in grad.iter_mut().zip(beta).zip(incl) {
        *g = -b * (pi / var_slab + (1.0 - pi) / var_spike);
    }
}

/// Exact `sss` log density by the elementary-symmetric-polynomial recurrence.
///
/// `forward[i][d] = log e_d(r_0..r_{i-1})`; inclusion probabilities come from
/// combining forward and backward tables around each coordinate.
pub fn sss_dp(
    beta: &[f64],
    var_spike: f64,
    var_slab: f64,
    d: usize,
    grad: Option<&mut [f64]>,
) -> f64 {
    let p = beta.len();
    let (base, lr) = log_ratios(beta, var_spike, var_slab);
    let w = d + 1;
    let ninf = f64::NEG_INFINITY;

    let mut fwd = vec![ninf; (p + 1) * w];
    fwd[0] = 0.0;
    for i in 0..p {
        let (prev, cur) = fwd.split_at_mut((i + 1) * w);
        let prev = &prev[i * w..];
        let cur = &mut cur[..w];
        cur[0] = 0.0;
        for k in 1..w {
            cur[k] = log_add_exp(prev[k], prev[k - 1] + lr[i]);
        }
    }
    let log_ed = fwd[p * w + d];
    let value = base + log_ed - ln_binomial(p, d);

    if let Some(grad) = grad {
        // bwd[i][d] = log e_d(r_i..r_{p-1})
        let mut bwd = vec![ninf; (p + 1) * w];
        bwd[p * w] = 0.0;
        for i in (0..p).rev() {
            let (cur, next) = bwd.split_at_mut((i + 1) * w);
            let cur = &mut cur[i * w..];
            let next = &next[..w];
            cur[0] = 0.0;
            for k in 1..w {
                cur[k] = log_add_exp(next[k], next[k - 1] + lr[i]);
            }
        }
        let mut incl = vec![0.0; p];
        let mut terms = vec![ninf; d];
        for j in 0..p {
            let f = &fwd[j * w..(j + 1) * w];
            let b = &bwd[(j + 1) * w..(j + 2) * w];
            for a in 0..d {
                terms[a] = f[a] + b[d - 1 - a];
            }
            let log_without = log_sum_exp(&terms);
            incl[j] = (lr[j] + log_without - log_ed).exp().min(1.0);
        }
        blend_scores(beta, &incl, var_spike, var_slab, grad);
    }
    value
}

/// Sum over an explicit support list (uniform weights).
pub fn sss_over_supports(
    beta: &[f64],
    var_spike: f64,
    var_slab: f64,
    supports: &[Vec<usize>],
    grad: Option<&mut [f64]>,
) -> f64 {
    let (base, lr) = log_ratios(beta, var_spike, var_slab);
    let scores: Vec<f64> = supports
        .iter()
        .map(|a| a.iter().map(|&j| lr[j]).sum())
        .collect();
    let lse = log_sum_exp(&scores);
    if let Some(grad) = grad {
        let mut incl = vec![0.0; beta.len()];
        for (a, s) in supports.iter().zip(&scores) {
            let w = (s - lse).exp();
            for &j in a {
                incl[j] += w;
            }
        }
        blend_scores(beta, &incl, var_spike, var_slab, grad);
    }
    base + lse - (supports.len() as f64).ln()
}

/// Exact `sss` log density by visiting every size-`d` support.
pub fn sss_enumerate(
    beta: &[f64],
    var_spike: f64,
    var_slab: f64,
    d: usize,
    grad: Option<&mut [f64]>,
) -> f64 {
    let supports = all_supports(beta.len(), d);
    sss_over_supports(beta, var_spike, var_slab, &supports, grad)
}

/// All size-`d` subsets of `0..p` in lexicographic order.
pub fn all_supports(p: usize, d: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if d > p {
        return out;
    }
    let mut idx: Vec<usize> = (0..d).collect();
    loop {
        out.push(idx.clone());
        let mut i = d;
        while i > 0 && idx[i - 1] == p - d + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        i -= 1;
        idx[i] += 1;
        for k in i + 1..d {
            idx[k] = idx[k - 1] + 1;
        }
    }
}

/// Independent per-coordinate spike/slab mixture.
pub fn ss_log_density(
    beta: &[f64],
    var_spike: f64,
    var_slab: f64,
    pi: f64,
    grad: Option<&mut [f64]>,
) -> f64 {
    let (lpi, l1pi) = (pi.ln(), (-pi).ln_1p());
    let mut total = 0.0;
    let mut grad = grad;
    for (j, &b) in beta.iter().enumerate() {
        let a = lpi + log_normal(b, 0.0, var_slab);
        let c = l1pi + log_normal(b, 0.0, var_spike);
        let lse = log_add_exp(a, c);
        total += lse;
        if let Some(g) = grad.as_deref_mut() {
            let r = (a - lse).exp();
            g[j] = -b * (r / var_slab + (1.0 - r) / var_spike);
        }
    }
    total
}
