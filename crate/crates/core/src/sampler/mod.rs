//! Base-posterior samplers for the built-in models.
//!
//! Positive hyperparameters are sampled on the log scale by adaptive
//! random-walk Metropolis, with the Jacobian folded into the target. Latent
//! variables are then drawn exactly from their conditional posterior given
//! each retained hyperparameter draw.
//!
//! All randomness comes from ChaCha20 streams keyed by `(seed, stream)`: the
//! same model, config and seed always reproduce the same draws bit for bit.

mod binomial_beta;
mod conjugate;
mod draws;
mod gp;
mod rwm;

pub use binomial_beta::{draw_binomial_beta_latents, sample_binomial_beta};
pub use conjugate::sample_conjugate_normal;
pub use draws::DrawMatrix;
pub(crate) use draws::format_17;
pub use gp::{gp_conditional, sample_gp_regression, synth_gp_data};
pub use rwm::{adaptive_rwm, RawChain};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, ModelKind, ModelSpec, Result};

pub(crate) const STREAM_MCMC: u64 = 0;
pub(crate) const STREAM_EXACT: u64 = 1;
pub(crate) const STREAM_DATA: u64 = 2;

/// ChaCha20 generator for one `(seed, stream)` pair.
pub fn chain_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McmcConfig {
    /// Retained draws `S`.
    pub draws: usize,
    #[serde(default)]
    pub burn_in: usize,
    #[serde(default = "default_thin")]
    pub thin: usize,
    #[serde(default)]
    pub seed: u64,
    /// Acceptance rate the burn-in adaptation aims for. Defaults to 0.44 in
    /// one dimension and 0.234 otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_accept: Option<f64>,
}

fn default_thin() -> usize {
    1
}

impl McmcConfig {
    pub fn new(draws: usize, burn_in: usize, seed: u64) -> Self {
        McmcConfig { draws, burn_in, thin: 1, seed, target_accept: None }
    }

    /// 1000 exact draws for the conjugate model, 4000 after 4000 burn-in for
    /// binomial-beta, 1000 after 1000 for the GP.
    pub fn for_kind(kind: ModelKind, seed: u64) -> Self {
        match kind {
            ModelKind::ConjugateNormal => McmcConfig::new(1000, 0, seed),
            ModelKind::BinomialBetaP1 | ModelKind::BinomialBetaP2 => McmcConfig::new(4000, 4000, seed),
            ModelKind::GpRegression => McmcConfig::new(1000, 1000, seed),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.draws == 0 {
            return Err(Error::invalid("draws must be at least 1"));
        }
        if self.thin == 0 {
            return Err(Error::invalid("thin must be at least 1"));
        }
        if let Some(t) = self.target_accept {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::invalid(format!("target_accept must lie in (0, 1), got {t}")));
            }
        }
        Ok(())
    }
}

/// Draws plus sampler diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOutput {
    pub draws: DrawMatrix,
    /// Post-burn-in acceptance rate; `None` for exact samplers.
    pub acceptance_rate: Option<f64>,
    /// Closed-form posterior `(mean, variance)` when one exists.
    pub analytic_posterior: Option<(f64, f64)>,
    pub warnings: Vec<String>,
}

/// Sample the base posterior of any built-in model.
pub fn fit(model: &ModelSpec, cfg: &McmcConfig) -> Result<FitOutput> {
    match model.kind() {
        ModelKind::ConjugateNormal => sample_conjugate_normal(model, cfg),
        ModelKind::BinomialBetaP1 | ModelKind::BinomialBetaP2 => sample_binomial_beta(model, cfg),
        ModelKind::GpRegression => sample_gp_regression(model, cfg),
    }
}
