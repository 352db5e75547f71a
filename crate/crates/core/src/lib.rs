//! Simultaneous discovery of several diverse sparse feature subsets.
//!
//! A linear (regression) or logistic (classification) model is fitted with a
//! sparsity-inducing prior and a mixture-of-Gaussians variational posterior. Each
//! mixture component settles on one sparse explanation of the target; a Jaccard
//! penalty on the component supports keeps the explanations apart. The crate also
//! contains a synthetic data generator with planted alternative supports and the
//! support-recovery metrics used to score fits against it.

pub mod config;
pub mod dataset;
pub mod error;
pub mod extract;
pub mod math;
pub mod metrics;
pub mod objective;
pub mod optimizer;
pub mod posterior;
pub mod priors;
pub mod synthgen;

pub use config::FitConfig;
pub use dataset::{scale_features, Dataset, ScalingMode, Task};
pub use error::{GemssError, Result};
pub use extract::{extract, CandidateSolution, ExtractionMode, ExtractionSpec, OutlierCenter};
pub use metrics::{categorize, score, PerformanceCategory, RecoveryMetrics};
pub use optimizer::{fit, FitResult, OptimizationTrace};
pub use posterior::VariationalState;
pub use priors::{PriorKind, PriorSpec, SupportMode};
pub use synthgen::{generate, GeneratorSpec, GroundTruth};
