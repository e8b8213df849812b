//! Run configuration: one TOML-parseable structure with documented defaults,
//! overridable by CLI flags, echoed verbatim into every output directory so a
//! run can be reproduced from its artifacts alone.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use treeseg_core::marginals::{Backend, MeanMode, PriorSpec};
use treeseg_core::matrix::Mat;
use treeseg_core::segment::SegmentPrior;
use treeseg_core::tree::EdgeWeightMatrix;
use treeseg_core::KPrior;

use crate::{AppError, AppResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum BackendChoice {
    Tree,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PriorChoice {
    /// alpha = p + 10, phi = (alpha - p - 1) I.
    Naive,
    /// phi = (alpha - p - 1) * sample covariance of the centered data.
    DataDriven,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum MeanChoice {
    ZeroMean,
    UnknownMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum KPriorChoice {
    Uniform,
    Poisson,
}

/// The full run configuration. Every field has a default; `None` means
/// "derive from the data" where that is the documented behavior.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    pub backend: BackendChoice,
    pub prior: PriorChoice,
    /// Wishart degrees of freedom; default p + 10 when absent.
    pub alpha: Option<f64>,
    pub mean_mode: MeanChoice,
    pub kappa0: f64,
    /// Prior mean; zero vector when absent (unknown-mean mode only).
    pub mu0: Option<Vec<f64>>,
    /// Tempering exponent; default 1 for one series, the number of replicates
    /// in replicate mode.
    pub temper_alpha: Option<f64>,
    pub k_max: usize,
    pub k_prior: KPriorChoice,
    /// Poisson rate for the truncated-Poisson K prior.
    pub k_gamma: f64,
    /// Minimum admissible segment length.
    pub l_min: usize,
    /// Edge-status prior triple (always absent, changed, always present).
    pub lambda: [f64; 3],
    /// Structure-comparison prior probability of a shared tree.
    pub pi: f64,
    /// Posterior-mass floor below which per-segment edge posteriors are
    /// skipped in the edge-time sweep.
    pub mass_floor: f64,
    /// Emit the instant edge-probability tensor (tree backend only).
    pub edge_time: bool,
    /// Center and scale every column before analysis.
    pub standardize: bool,
    pub seed: u64,
    pub threads: usize,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            backend: BackendChoice::Tree,
            prior: PriorChoice::Naive,
            alpha: None,
            mean_mode: MeanChoice::ZeroMean,
            kappa0: 1.0,
            mu0: None,
            temper_alpha: None,
            k_max: 10,
            k_prior: KPriorChoice::Poisson,
            k_gamma: 4.0,
            l_min: 1,
            lambda: [0.25, 0.5, 0.25],
            pi: 0.5,
            mass_floor: 1e-12,
            edge_time: true,
            standardize: false,
            seed: 0,
            threads: 0, // 0: let the runtime pick
            output_dir: PathBuf::from("treeseg-out"),
        }
    }
}

/// Output-directory override, the only environment-variable knob.
pub const OUTPUT_DIR_ENV: &str = "TREESEG_OUTPUT_DIR";

impl RunConfig {
    pub fn load(path: &Path) -> AppResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AppError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| AppError::Config(format!("{}: {e}", path.display())))
    }

    /// Apply the environment override (called after flag overrides).
    pub fn apply_env(&mut self) {
        if let Ok(dir) = std::env::var(OUTPUT_DIR_ENV) {
            if !dir.is_empty() {
                self.output_dir = PathBuf::from(dir);
            }
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialization is infallible")
    }

    pub fn validate(&self) -> AppResult<()> {
        if self.k_max < 1 {
            return Err(AppError::Config("k_max must be >= 1".into()));
        }
        if self.l_min < 1 {
            return Err(AppError::Config("l_min must be >= 1".into()));
        }
        if !(self.k_gamma > 0.0) {
            return Err(AppError::Config("k_gamma must be > 0".into()));
        }
        let total: f64 = self.lambda.iter().sum();
        if self.lambda.iter().any(|&l| !(l > 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(AppError::Config(format!(
                "lambda must be three positive components summing to 1, got {:?}",
                self.lambda
            )));
        }
        if !(self.pi > 0.0 && self.pi < 1.0) {
            return Err(AppError::Config(format!("pi must lie in (0, 1), got {}", self.pi)));
        }
        if let Some(a) = self.temper_alpha {
            if !(a >= 1.0) {
                return Err(AppError::Config(format!("temper_alpha must be >= 1, got {a}")));
            }
        }
        Ok(())
    }

    pub fn core_backend(&self) -> Backend {
        match self.backend {
            BackendChoice::Tree => Backend::Tree,
            BackendChoice::Full => Backend::Full,
        }
    }

    /// Effective tempering exponent for `u` replicates.
    pub fn effective_temper(&self, replicates: usize) -> f64 {
        self.temper_alpha.unwrap_or(if replicates > 1 { replicates as f64 } else { 1.0 })
    }

    /// Concrete prior for dimension `p` (the data-driven variant is resolved
    /// in the pipeline, which owns the data).
    pub fn naive_prior(&self, p: usize, replicates: usize) -> AppResult<PriorSpec> {
        let mut prior = PriorSpec::naive(p, self.core_backend());
        if let Some(alpha) = self.alpha {
            let scale = alpha - p as f64 - 1.0;
            if !(scale > 0.0) {
                return Err(AppError::Config(format!(
                    "the naive prior requires alpha > p + 1, got alpha = {alpha}, p = {p}"
                )));
            }
            prior.alpha = alpha;
            prior.phi = Mat::identity(p);
            for i in 0..p {
                prior.phi.set(i, i, scale);
            }
        }
        self.finish_prior(&mut prior, p, replicates)?;
        Ok(prior)
    }

    pub fn finish_prior(&self, prior: &mut PriorSpec, p: usize, replicates: usize) -> AppResult<()> {
        prior.mean_mode = match self.mean_mode {
            MeanChoice::ZeroMean => MeanMode::ZeroMean,
            MeanChoice::UnknownMean => MeanMode::UnknownMean,
        };
        prior.kappa0 = self.kappa0;
        if let Some(mu0) = &self.mu0 {
            if mu0.len() != p {
                return Err(AppError::Config(format!(
                    "mu0 has {} entries, data has p = {p}",
                    mu0.len()
                )));
            }
            prior.mu0 = mu0.clone();
        }
        prior.temper_alpha = self.effective_temper(replicates);
        prior.validate().map_err(AppError::from_core)
    }

    pub fn segment_prior(&self) -> AppResult<SegmentPrior> {
        SegmentPrior::uniform_with_min_length(self.l_min).map_err(AppError::from_core)
    }

    pub fn k_prior(&self, n: usize) -> AppResult<KPrior> {
        let k_max = self.k_max.min(n);
        match self.k_prior {
            KPriorChoice::Uniform => KPrior::uniform(k_max),
            KPriorChoice::Poisson => KPrior::truncated_poisson(self.k_gamma, k_max),
        }
        .map_err(AppError::from_core)
    }

    pub fn edge_prior(&self, p: usize) -> EdgeWeightMatrix {
        EdgeWeightMatrix::uniform(p)
    }
}
