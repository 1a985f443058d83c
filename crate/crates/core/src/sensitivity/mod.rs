//! No-refit estimators of posterior sensitivity to the prior.
//!
//! Everything here works from the per-draw log prior ratios
//! `lrₛ = ln π*(θ⁽ˢ⁾) - ln π(θ⁽ˢ⁾)` at base-posterior draws. Writing
//! `b = ln mean(exp lr)` for the log marginal-likelihood ratio and
//! `dₛ = lrₛ - b`,
//!
//! * `H² = 1 - mean(exp(d/2))` and `KL = -mean(d)` for a plain posterior or
//!   for the joint posterior of latents and parameters;
//! * for the marginal posterior of latent variables, `dₛ` is replaced by
//!   `uₛ = cₛ - ln mean(exp c)`, where `cₛ` is the log mean ratio over the
//!   draws whose latents lie near draw `s`. The normalizer is the mean of
//!   the neighbourhood averages rather than of the raw ratios, so the
//!   estimated marginal ratio averages to one over the draws and both
//!   divergences stay within their bounds.
//!
//! Working with `d` (or `u`) keeps all exponentials bounded and makes the
//! estimates exactly invariant to the identities the estimators must
//! satisfy: equal priors, a single draw, and one neighbourhood spanning
//! every draw all give exactly zero.

mod bootstrap;
mod neighbors;

pub use bootstrap::Bootstrap;
pub(crate) use bootstrap::ResamplePlan;
pub use neighbors::{neighbor_index, NeighborIndex, NeighborMode, NeighborSpec};

use serde::{Deserialize, Serialize};

use crate::distributions::log_mean_exp_iter;
use crate::model::PriorRatio;
use crate::sampler::DrawMatrix;
use crate::{Error, PriorSpec, Result};

/// Clamping tolerance for floating-point overshoot of the divergence bounds.
pub const BOUND_DUST: f64 = 1e-12;
/// ESS fraction below which a result carries the unstable-ratio warning.
pub const DEFAULT_UNSTABLE_FRACTION: f64 = 0.3;
/// Median neighbourhood size below which the latent estimator warns.
pub const SPARSE_NEIGHBORHOOD: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityResult {
    /// Squared Hellinger distance, in `[0, 1]`.
    pub h2: f64,
    /// `KL(base ‖ alternative)`, non-negative.
    pub kl: f64,
    /// Estimate of `ln m*(x)/m(x)`.
    pub log_mlr: f64,
    /// `(Σr)² / Σr²` over the prior ratios `r`.
    pub ess_ratio: f64,
    pub n_draws: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h2_se: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kl_se: Option<f64>,
    pub warnings: Vec<String>,
}

impl SensitivityResult {
    /// ESS as a fraction of the number of draws.
    pub fn ess_fraction(&self) -> f64 {
        self.ess_ratio / self.n_draws as f64
    }

    pub fn is_unstable(&self) -> bool {
        self.warnings.iter().any(|w| w.starts_with("unstable ratio"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorOptions {
    /// Warn when `ess_ratio / S` falls below this.
    pub unstable_fraction: f64,
    /// Bootstrap standard errors; skipped when `None`.
    pub bootstrap: Option<Bootstrap>,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        EstimatorOptions { unstable_fraction: DEFAULT_UNSTABLE_FRACTION, bootstrap: Some(Bootstrap::default()) }
    }
}

impl EstimatorOptions {
    pub fn without_bootstrap() -> Self {
        EstimatorOptions { bootstrap: None, ..Default::default() }
    }
}

/// Per-draw log prior ratios over the parameter columns of `draws`.
pub fn log_ratio_vector(draws: &DrawMatrix, base: &PriorSpec, alt: &PriorSpec) -> Result<Vec<f64>> {
    let ratio = PriorRatio::new(base, alt, draws.param_names())?;
    Ok(ratio_vector(draws, &ratio))
}

pub(crate) fn ratio_vector(draws: &DrawMatrix, ratio: &PriorRatio) -> Vec<f64> {
    if ratio.is_identity() {
        return vec![0.0; draws.n_draws()];
    }
    (0..draws.n_draws()).map(|s| ratio.eval(draws.params(s))).collect()
}

fn check_log_ratios(lr: &[f64]) -> Result<()> {
    if lr.is_empty() {
        return Err(Error::invalid("need at least one draw"));
    }
    if let Some(s) = lr.iter().position(|v| v.is_nan()) {
        return Err(Error::DegenerateSupport(format!("log ratio at draw {} is NaN", s + 1)));
    }
    if let Some(s) = lr.iter().position(|v| *v == f64::INFINITY) {
        return Err(Error::DegenerateSupport(format!(
            "alternative prior is positive where the base prior vanishes (draw {}); \
             choose a base prior with wider support",
            s + 1
        )));
    }
    if lr.iter().all(|v| *v == f64::NEG_INFINITY) {
        return Err(Error::DegenerateSupport(
            "alternative prior vanishes at every draw".into(),
        ));
    }
    Ok(())
}

/// Plug-in estimates from log ratios of a plain posterior (or from the
/// parameter part of a joint latent posterior).
pub fn estimate_from_log_ratios(lr: &[f64], opts: &EstimatorOptions) -> Result<SensitivityResult> {
    plain_with_plan(lr, opts, None)
}

pub(crate) fn plain_with_plan(lr: &[f64], opts: &EstimatorOptions, plan: Option<&ResamplePlan>) -> Result<SensitivityResult> {
    check_log_ratios(lr)?;
    let b = log_mean_exp_iter(lr.iter().copied());
    let d: Vec<f64> = lr.iter().map(|v| v - b).collect();
    finish(&d, &d, &d, b, opts, plan)
}

/// Joint latent-and-parameter posterior: the latent columns drop out and
/// only the parameter draws matter.
pub fn estimate_joint(
    draws: &DrawMatrix,
    base: &PriorSpec,
    alt: &PriorSpec,
    opts: &EstimatorOptions,
) -> Result<SensitivityResult> {
    estimate_from_log_ratios(&log_ratio_vector(draws, base, alt)?, opts)
}

/// Marginal posterior of the latent variables, with the conditional
/// expectation of the prior ratio given the latents replaced by an average
/// over each draw's latent-space neighbourhood.
pub fn estimate_latent_marginal(
    draws: &DrawMatrix,
    base: &PriorSpec,
    alt: &PriorSpec,
    spec: &NeighborSpec,
    opts: &EstimatorOptions,
) -> Result<SensitivityResult> {
    if draws.latent_names().is_empty() {
        return Err(Error::invalid("the latent-marginal estimator needs latent columns in the draws"));
    }
    let lr = log_ratio_vector(draws, base, alt)?;
    let index = NeighborIndex::build(draws, spec)?;
    estimate_latent_marginal_with_index(&lr, &index, opts)
}

/// [`estimate_latent_marginal`] with a prebuilt neighbour index.
pub fn estimate_latent_marginal_with_index(
    lr: &[f64],
    index: &NeighborIndex,
    opts: &EstimatorOptions,
) -> Result<SensitivityResult> {
    latent_with_plan(lr, index, opts, None)
}

pub(crate) fn latent_with_plan(
    lr: &[f64],
    index: &NeighborIndex,
    opts: &EstimatorOptions,
    plan: Option<&ResamplePlan>,
) -> Result<SensitivityResult> {
    check_log_ratios(lr)?;
    if index.n_draws() != lr.len() {
        return Err(Error::invalid(format!(
            "neighbor index covers {} draws, log ratios {}",
            index.n_draws(),
            lr.len()
        )));
    }
    let (b, c) = neighborhood_terms(lr, index);
    let norm = log_mean_exp_iter(c.iter().copied());
    let u: Vec<f64> = c.iter().map(|v| v - norm).collect();
    let d: Vec<f64> = lr.iter().map(|v| v - b).collect();
    let mut res = finish(&u, &u, &d, b, opts, plan)?;
    let median = index.median_size();
    if median < SPARSE_NEIGHBORHOOD {
        res.warnings.push(format!("sparse neighborhoods: median size {median}"));
    }
    Ok(res)
}

/// `b` and the per-draw `cₛ - b`.
///
/// Ratios are shifted by the global maximum once, so each neighbourhood
/// mean is a plain sum; it is summed in index order exactly as the global
/// mean, which makes a neighbourhood covering every draw give `cₛ = b`
/// bitwise. Neighbourhoods whose shifted ratios all underflow fall back to
/// an exact log-sum-exp.
fn neighborhood_terms(lr: &[f64], index: &NeighborIndex) -> (f64, Vec<f64>) {
    let b = log_mean_exp_iter(lr.iter().copied());
    let max = lr.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = lr.iter().map(|v| (v - max).exp()).collect();
    let u = (0..lr.len())
        .map(|s| {
            let set = index.neighbors(s);
            let mut sum = 0.0;
            for &r in set {
                sum += e[r as usize];
            }
            let c = if sum > f64::MIN_POSITIVE {
                max + (sum / set.len() as f64).ln()
            } else {
                log_mean_exp_iter(set.iter().map(|&r| lr[r as usize]))
            };
            c - b
        })
        .collect();
    (b, u)
}

/// Assemble a result from per-draw terms `u`, their normalizer terms `norm`
/// (`mean(exp norm) = 1`) and `d = lr - b`.
fn finish(
    u: &[f64],
    norm: &[f64],
    d: &[f64],
    b: f64,
    opts: &EstimatorOptions,
    plan: Option<&ResamplePlan>,
) -> Result<SensitivityResult> {
    let n = d.len();
    let mut warnings = Vec::new();
    let raw_h2 = 1.0 - log_mean_exp_iter(u.iter().map(|v| 0.5 * v)).exp();
    let raw_kl = -(u.iter().sum::<f64>() / n as f64);
    let h2 = clamp_bound(raw_h2, 0.0, 1.0, "h2", &mut warnings);
    let kl = clamp_bound(raw_kl, 0.0, f64::INFINITY, "kl", &mut warnings);
    let ess_ratio = n as f64 * (-log_mean_exp_iter(d.iter().map(|v| 2.0 * v))).exp();

    let frac = ess_ratio / n as f64;
    if frac < opts.unstable_fraction {
        warnings.push(format!(
            "unstable ratio: prior-ratio ESS {ess_ratio:.1} is {frac:.3} of {n} draws (threshold {})",
            opts.unstable_fraction
        ));
    }
    let (h2_se, kl_se) = match &opts.bootstrap {
        Some(bs) => bs.standard_errors(u, norm, plan),
        None => (None, None),
    };
    Ok(SensitivityResult { h2, kl, log_mlr: b, ess_ratio: ess_ratio.min(n as f64), n_draws: n, h2_se, kl_se, warnings })
}

fn clamp_bound(v: f64, lo: f64, hi: f64, what: &str, warnings: &mut Vec<String>) -> f64 {
    if v < lo {
        if lo - v >= BOUND_DUST {
            warnings.push(format!("negative {what} estimate {v:e} clamped to {lo}"));
        }
        lo
    } else if v > hi {
        hi
    } else {
        v
    }
}

/// Self-normalized estimate of an expectation under the alternative
/// posterior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedMean {
    pub value: f64,
    pub se: Option<f64>,
    pub ess_ratio: f64,
    pub warnings: Vec<String>,
}

/// `E_{π*}[g] ≈ Σ gₛ rₛ / Σ rₛ` over base-posterior draws, where `g` sees the
/// full draw row (parameters then latents).
pub fn alt_posterior_expectation<G>(
    draws: &DrawMatrix,
    base: &PriorSpec,
    alt: &PriorSpec,
    g: G,
    opts: &EstimatorOptions,
) -> Result<WeightedMean>
where
    G: Fn(&[f64]) -> f64,
{
    let lr = log_ratio_vector(draws, base, alt)?;
    check_log_ratios(&lr)?;
    let gv: Vec<f64> = draws.rows().map(g).collect();
    let max = lr.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = lr.iter().map(|v| (v - max).exp()).collect();
    let sw: f64 = w.iter().sum();
    if !(sw > 0.0) {
        return Err(Error::DegenerateSupport("all importance weights are zero".into()));
    }
    let value = gv.iter().zip(&w).map(|(g, w)| g * w).sum::<f64>() / sw;
    let sw2: f64 = w.iter().map(|w| w * w).sum();
    let n = lr.len();
    let ess_ratio = (sw * sw / sw2).min(n as f64);
    let mut warnings = Vec::new();
    let frac = ess_ratio / n as f64;
    if frac < opts.unstable_fraction {
        warnings.push(format!(
            "unstable ratio: prior-ratio ESS {ess_ratio:.1} is {frac:.3} of {n} draws (threshold {})",
            opts.unstable_fraction
        ));
    }
    let se = opts.bootstrap.as_ref().and_then(|bs| bs.weighted_mean_se(&gv, &w));
    Ok(WeightedMean { value, se, ess_ratio, warnings })
}
