use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::Beta;

use super::{adaptive_rwm, chain_rng, DrawMatrix, FitOutput, McmcConfig, STREAM_EXACT};
use crate::distributions::ln_beta_ratio;
use crate::model::{mean_scale_to_shapes, BinomialGroup};
use crate::{DataSet, Error, Family, ModelKind, ModelSpec, Result};

/// Group counts deduplicated with multiplicities.
struct GroupTable {
    unique: Vec<(u64, u64, f64)>,
}

impl GroupTable {
    fn new(groups: &[BinomialGroup]) -> Self {
        let mut counts: BTreeMap<(u64, u64), usize> = BTreeMap::new();
        for g in groups {
            *counts.entry((g.y, g.n)).or_default() += 1;
        }
        let unique = counts
            .into_iter()
            .map(|((y, n), c)| (y, n - y, c as f64))
            .collect();
        GroupTable { unique }
    }

    /// `Σᵢ ln p(yᵢ | α, β)` with `θᵢ` integrated out, up to the binomial
    /// coefficients.
    fn log_lik(&self, a: f64, b: f64) -> f64 {
        self.unique.iter().map(|&(y, f, c)| c * ln_beta_ratio(a, b, y, f)).sum()
    }
}

/// Maps a hyperparameter pair to beta shapes for the model's
/// parameterization.
pub(crate) fn shapes(kind: ModelKind, p1: f64, p2: f64) -> Option<(f64, f64)> {
    let (a, b) = match kind {
        ModelKind::BinomialBetaP1 => mean_scale_to_shapes(p1, p2).ok()?,
        ModelKind::BinomialBetaP2 => (p1, p2),
        _ => return None,
    };
    (a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()).then_some((a, b))
}

/// Log posterior of the unconstrained pair `(ln p₁, ln p₂)`, with `θ`
/// marginalized and the log-scale Jacobian included.
pub(crate) fn log_target_fn(model: &ModelSpec) -> Result<impl Fn(&[f64]) -> f64 + '_> {
    let DataSet::Binomial(groups) = model.data() else {
        return Err(Error::invalid("binomial-beta model needs binomial data"));
    };
    let kind = model.kind();
    let table = GroupTable::new(groups);
    let priors: Vec<Family> = model.base_prior().blocks().iter().map(|b| b.family).collect();
    Ok(move |u: &[f64]| {
        let (p1, p2) = (u[0].exp(), u[1].exp());
        let Some((a, b)) = shapes(kind, p1, p2) else {
            return f64::NEG_INFINITY;
        };
        let lp = priors[0].log_density(p1).unwrap_or(f64::NEG_INFINITY)
            + priors[1].log_density(p2).unwrap_or(f64::NEG_INFINITY);
        table.log_lik(a, b) + lp + u[0] + u[1]
    })
}

/// One exact draw of every `θᵢ ~ Beta(α + yᵢ, β + nᵢ - yᵢ)`.
pub fn draw_binomial_beta_latents<R: Rng + ?Sized>(
    groups: &[BinomialGroup],
    alpha: f64,
    beta: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    groups
        .iter()
        .map(|g| {
            let dist = Beta::new(alpha + g.y as f64, beta + (g.n - g.y) as f64)
                .map_err(|e| Error::invalid(format!("beta conditional: {e}")))?;
            Ok(rng.sample(dist))
        })
        .collect()
}

/// Hyperparameters by adaptive RWM on the log scale, then latent success
/// probabilities drawn exactly per retained draw (columns `eta.1..eta.m`).
pub fn sample_binomial_beta(model: &ModelSpec, cfg: &McmcConfig) -> Result<FitOutput> {
    cfg.validate()?;
    let kind = model.kind();
    if !matches!(kind, ModelKind::BinomialBetaP1 | ModelKind::BinomialBetaP2) {
        return Err(Error::invalid("sample_binomial_beta needs a binomial-beta model"));
    }
    let DataSet::Binomial(groups) = model.data() else {
        return Err(Error::invalid("binomial-beta model needs binomial data"));
    };
    let target = log_target_fn(model)?;
    let chain = adaptive_rwm(&target, 2, cfg)?;

    let mut rng = chain_rng(cfg.seed, STREAM_EXACT);
    let ncols = 2 + groups.len();
    let mut values = Vec::with_capacity(chain.len() * ncols);
    for u in chain.rows() {
        let (p1, p2) = (u[0].exp(), u[1].exp());
        let (a, b) = shapes(kind, p1, p2)
            .ok_or_else(|| Error::invalid(format!("retained draw ({p1}, {p2}) maps to invalid beta shapes")))?;
        values.push(p1);
        values.push(p2);
        values.extend(draw_binomial_beta_latents(groups, a, b, &mut rng)?);
    }
    let draws = DrawMatrix::new(
        kind.param_names().iter().map(|s| s.to_string()).collect(),
        model.latent_names(),
        values,
        cfg.seed,
        kind.tag(),
    )?;
    Ok(FitOutput {
        draws,
        acceptance_rate: Some(chain.acceptance_rate),
        analytic_posterior: None,
        warnings: chain.warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::log_beta_binomial_pmf;
    use crate::fixtures;

    #[test]
    fn marginal_likelihood_matches_pmf_sum() {
        let groups = fixtures::rat_tumor();
        let table = GroupTable::new(&groups);
        for &(a, b) in &[(1.0, 1.0), (2.3, 14.1), (0.2, 7.0)] {
            let direct: f64 = groups.iter().map(|g| log_beta_binomial_pmf(g.y, g.n, a, b).unwrap()).sum();
            let consts: f64 = groups.iter().map(|g| crate::distributions::ln_choose(g.n, g.y)).sum();
            assert!((table.log_lik(a, b) + consts - direct).abs() < 1e-9);
        }
    }

    #[test]
    fn empty_trials_give_prior_draws() {
        let groups = [BinomialGroup { y: 0, n: 0 }];
        let mut rng = chain_rng(4, 9);
        let s = 40_000;
        let draws: Vec<f64> = (0..s)
            .map(|_| draw_binomial_beta_latents(&groups, 2.0, 5.0, &mut rng).unwrap()[0])
            .collect();
        let mean = draws.iter().sum::<f64>() / s as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / s as f64;
        // Beta(2, 5): mean 2/7, variance 10/392.
        assert!((mean - 2.0 / 7.0).abs() < 0.005);
        assert!((var - 10.0 / 392.0).abs() < 0.001);
    }

    #[test]
    fn single_success_conditional_mean() {
        let groups = [BinomialGroup { y: 1, n: 1 }];
        let mut rng = chain_rng(8, 9);
        let s = 40_000;
        let mean = (0..s)
            .map(|_| draw_binomial_beta_latents(&groups, 1.0, 1.0, &mut rng).unwrap()[0])
            .sum::<f64>()
            / s as f64;
        assert!((mean - 2.0 / 3.0).abs() < 0.01, "{mean}");
    }

    #[test]
    fn rat_tumor_mean_rate() {
        let model = ModelSpec::with_default_prior(
            ModelKind::BinomialBetaP1,
            DataSet::Binomial(fixtures::rat_tumor()),
        )
        .unwrap();
        let out = sample_binomial_beta(&model, &McmcConfig::for_kind(ModelKind::BinomialBetaP1, 1)).unwrap();
        let d = &out.draws;
        assert_eq!(d.n_draws(), 4000);
        assert_eq!(d.latent_names().len(), 71);
        assert_eq!(d.latent_names()[70], "eta.71");
        let mean_rate = d.column(0).map(|delta| (-delta).exp()).sum::<f64>() / d.n_draws() as f64;
        assert!(mean_rate > 0.10 && mean_rate < 0.25, "{mean_rate}");
        assert!(out.warnings.is_empty(), "{:?}", out.warnings);
    }
}
