//! Flat `KEY = value` configuration files and the resolved run configuration.
//!
//! Blank lines and `#` comments are ignored. Keys are case-insensitive and use the
//! upper-case names listed in [`RUN_KEYS`] and [`GENERATOR_KEYS`].

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use gemss::{ExtractionSpec, FitConfig, GeneratorSpec, ScalingMode, Task};

pub const RUN_KEYS: &[&str] = &[
    "N_CANDIDATE_SOLUTIONS",
    "SPARSITY",
    "LAMBDA_JACCARD",
    "VAR_SPIKE",
    "VAR_SLAB",
    "BATCH_SIZE",
    "N_ITERATIONS",
    "PRIOR",
    "TASK",
    "SCALING",
    "SEED",
    "LEARNING_RATE",
    "WEIGHT_LEARNING_RATE",
    "ADAM_BETA1",
    "ADAM_BETA2",
    "ADAM_EPS",
    "JACCARD_TAU",
    "NOISE_VAR",
    "FIT_OFFSET",
    "INCLUSION_PROB",
    "STUDENT_DOF",
    "STUDENT_SCALE",
    "SUPPORT_MODE",
    "N_SAMPLED_SUPPORTS",
    "SAMPLES_PER_COMPONENT",
    "INIT_MU_STD",
    "INIT_SIGMA",
    "EXTRACTION",
    "TOP_D",
    "MU_THRESHOLD",
    "MIN_Z",
    "OUTLIER_MULTIPLIER",
    "OUTLIER_CENTER",
    "TARGET_COLUMN",
    "OUTPUT_DIR",
];

pub const GENERATOR_KEYS: &[&str] = &[
    "N_SAMPLES",
    "N_FEATURES",
    "N_GENERATING_SOLUTIONS",
    "SPARSITY",
    "NOISE_STD",
    "NAN_RATIO",
    "CLASS_BALANCE",
    "WEIGHT_MIN",
    "WEIGHT_MAX",
    "TASK",
    "SEED",
];

/// Parsed key-value pairs, keys upper-cased.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected KEY = value, got '{line}'", i + 1))?;
            let key = k.trim().to_ascii_uppercase();
            if key.is_empty() {
                bail!("line {}: empty key", i + 1);
            }
            if values.insert(key.clone(), v.trim().to_string()).is_some() {
                bail!("line {}: duplicate key {key}", i + 1);
            }
        }
        Ok(Self { values })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config file {}", path.display()))
    }

    /// Later pairs win; used for `--set KEY=value` overrides.
    pub fn set(&mut self, key: &str, value: &str) {
        self.values.insert(key.trim().to_ascii_uppercase(), value.trim().to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }

    /// Fails on any key outside `allowed`.
    pub fn check_keys(&self, allowed: &[&[&str]]) -> Result<()> {
        for k in self.keys() {
            if !allowed.iter().any(|set| set.contains(&k)) {
                bail!("unknown configuration key {k}");
            }
        }
        Ok(())
    }

    fn parsed<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: std::str::FromStr,
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|e| anyhow!("invalid value '{v}' for {key}: {e}")),
        }
    }

    fn assign<T>(&self, key: &str, slot: &mut T) -> Result<()>
    where
        T: std::str::FromStr,
        T::Err: std::fmt::Display,
    {
        if let Some(v) = self.parsed(key)? {
            *slot = v;
        }
        Ok(())
    }
}

/// Everything needed to fit one dataset and extract its solutions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub fit: FitConfig,
    pub extraction: ExtractionSpec,
    /// `None` takes the prior sparsity.
    pub top_d: Option<usize>,
    pub scaling: ScalingMode,
    pub target_column: String,
    /// `None` infers the task from the target values.
    pub task: Option<Task>,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            fit: FitConfig::default(),
            extraction: ExtractionSpec::default(),
            top_d: None,
            scaling: ScalingMode::Standard,
            target_column: "target".into(),
            task: None,
            output_dir: PathBuf::from("gemss_out"),
        }
    }
}

impl RunConfig {
    pub fn from_settings(s: &Settings) -> Result<Self> {
        let mut rc = Self::default();
        rc.apply(s)?;
        Ok(rc)
    }

    /// Overrides the fields named in `s`.
    pub fn apply(&mut self, s: &Settings) -> Result<()> {
        let f = &mut self.fit;
        s.assign("N_CANDIDATE_SOLUTIONS", &mut f.n_components)?;
        s.assign("SPARSITY", &mut f.prior.sparsity)?;
        s.assign("LAMBDA_JACCARD", &mut f.lambda_jaccard)?;
        s.assign("VAR_SPIKE", &mut f.prior.var_spike)?;
        s.assign("VAR_SLAB", &mut f.prior.var_slab)?;
        s.assign("BATCH_SIZE", &mut f.batch_size)?;
        s.assign("N_ITERATIONS", &mut f.n_iterations)?;
        s.assign("PRIOR", &mut f.prior.kind)?;
        s.assign("SEED", &mut f.seed)?;
        s.assign("LEARNING_RATE", &mut f.learning_rate)?;
        s.assign("WEIGHT_LEARNING_RATE", &mut f.weight_learning_rate)?;
        s.assign("ADAM_BETA1", &mut f.adam_beta1)?;
        s.assign("ADAM_BETA2", &mut f.adam_beta2)?;
        s.assign("ADAM_EPS", &mut f.adam_eps)?;
        s.assign("JACCARD_TAU", &mut f.jaccard_tau)?;
        s.assign("NOISE_VAR", &mut f.noise_var)?;
        s.assign("FIT_OFFSET", &mut f.fit_offset)?;
        s.assign("STUDENT_DOF", &mut f.prior.student_dof)?;
        s.assign("STUDENT_SCALE", &mut f.prior.student_scale)?;
        s.assign("SUPPORT_MODE", &mut f.prior.support_mode)?;
        s.assign("N_SAMPLED_SUPPORTS", &mut f.prior.n_sampled_supports)?;
        s.assign("SAMPLES_PER_COMPONENT", &mut f.samples_per_component)?;
        s.assign("INIT_MU_STD", &mut f.init_mu_std)?;
        s.assign("INIT_SIGMA", &mut f.init_sigma)?;
        if let Some(v) = optional(s, "INCLUSION_PROB")? {
            f.prior.inclusion_prob = v;
        }
        let e = &mut self.extraction;
        s.assign("EXTRACTION", &mut e.mode)?;
        s.assign("OUTLIER_MULTIPLIER", &mut e.outlier_multiplier)?;
        s.assign("OUTLIER_CENTER", &mut e.outlier_center)?;
        if let Some(v) = optional(s, "MU_THRESHOLD")? {
            e.mu_threshold = v;
        }
        if let Some(v) = optional(s, "MIN_Z")? {
            e.min_z = v;
        }
        if let Some(v) = optional(s, "TOP_D")? {
            self.top_d = v;
        }
        s.assign("SCALING", &mut self.scaling)?;
        if let Some(v) = s.get("TASK") {
            self.task = match v.to_ascii_lowercase().as_str() {
                "auto" | "none" => None,
                other => Some(other.parse()?),
            };
        }
        if let Some(v) = s.get("TARGET_COLUMN") {
            self.target_column = v.to_string();
        }
        if let Some(v) = s.get("OUTPUT_DIR") {
            self.output_dir = PathBuf::from(v);
        }
        Ok(())
    }

    /// Extraction spec with `top_d` resolved against the prior sparsity.
    pub fn resolved_extraction(&self) -> ExtractionSpec {
        ExtractionSpec {
            top_d: self.top_d.unwrap_or(self.fit.prior.sparsity),
            ..self.extraction.clone()
        }
    }

    /// Key-value text that parses back to the same configuration.
    pub fn to_kv_string(&self) -> String {
        let f = &self.fit;
        let e = &self.extraction;
        let opt = |v: Option<f64>| v.map_or("none".to_string(), |x| x.to_string());
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("N_CANDIDATE_SOLUTIONS", f.n_components.to_string());
        put("SPARSITY", f.prior.sparsity.to_string());
        put("LAMBDA_JACCARD", f.lambda_jaccard.to_string());
        put("VAR_SPIKE", f.prior.var_spike.to_string());
        put("VAR_SLAB", f.prior.var_slab.to_string());
        put("BATCH_SIZE", f.batch_size.to_string());
        put("N_ITERATIONS", f.n_iterations.to_string());
        put("PRIOR", f.prior.kind.to_string());
        put("TASK", self.task.map_or("auto".to_string(), |t| t.to_string()));
        put("SCALING", self.scaling.to_string());
        put("SEED", f.seed.to_string());
        put("LEARNING_RATE", f.learning_rate.to_string());
        put("WEIGHT_LEARNING_RATE", f.weight_learning_rate.to_string());
        put("ADAM_BETA1", f.adam_beta1.to_string());
        put("ADAM_BETA2", f.adam_beta2.to_string());
        put("ADAM_EPS", f.adam_eps.to_string());
        put("JACCARD_TAU", f.jaccard_tau.to_string());
        put("NOISE_VAR", f.noise_var.to_string());
        put("FIT_OFFSET", f.fit_offset.to_string());
        put("INCLUSION_PROB", opt(f.prior.inclusion_prob));
        put("STUDENT_DOF", f.prior.student_dof.to_string());
        put("STUDENT_SCALE", f.prior.student_scale.to_string());
        put("SUPPORT_MODE", f.prior.support_mode.to_string());
        put("N_SAMPLED_SUPPORTS", f.prior.n_sampled_supports.to_string());
        put("SAMPLES_PER_COMPONENT", f.samples_per_component.to_string());
        put("INIT_MU_STD", f.init_mu_std.to_string());
        put("INIT_SIGMA", f.init_sigma.to_string());
        put("EXTRACTION", e.mode.to_string());
        put("TOP_D", self.top_d.map_or("none".to_string(), |d| d.to_string()));
        put("MU_THRESHOLD", opt(e.mu_threshold));
        put("MIN_Z", opt(e.min_z));
        put("OUTLIER_MULTIPLIER", e.outlier_multiplier.to_string());
        put("OUTLIER_CENTER", e.outlier_center.to_string());
        put("TARGET_COLUMN", self.target_column.clone());
        put("OUTPUT_DIR", self.output_dir.display().to_string());
        out
    }
}

/// `Some(None)` for the literal `none`, `Some(Some(v))` for a value, `None` if absent.
fn optional<T>(s: &Settings, key: &str) -> Result<Option<Option<T>>>
where
    T: std::str::FromStr,
    T::Err: std::fmt::Display,
{
    match s.get(key) {
        None => Ok(None),
        Some(v) if v.eq_ignore_ascii_case("none") => Ok(Some(None)),
        Some(_) => Ok(Some(s.parsed(key)?)),
    }
}

/// Generator spec from the generator keys, starting at the defaults.
pub fn generator_from_settings(s: &Settings) -> Result<GeneratorSpec> {
    let mut g = GeneratorSpec::default();
    s.assign("N_SAMPLES", &mut g.n_samples)?;
    s.assign("N_FEATURES", &mut g.n_features)?;
    s.assign("N_GENERATING_SOLUTIONS", &mut g.n_solutions)?;
    s.assign("SPARSITY", &mut g.sparsity)?;
    s.assign("NOISE_STD", &mut g.noise_std)?;
    s.assign("NAN_RATIO", &mut g.nan_ratio)?;
    s.assign("CLASS_BALANCE", &mut g.class_balance)?;
    s.assign("WEIGHT_MIN", &mut g.weight_range.0)?;
    s.assign("WEIGHT_MAX", &mut g.weight_range.1)?;
    s.assign("TASK", &mut g.task)?;
    s.assign("SEED", &mut g.seed)?;
    g.validate()?;
    Ok(g)
}
