use rand::Rng;
use rand_distr::StandardNormal;

use super::{chain_rng, DrawMatrix, FitOutput, McmcConfig, STREAM_EXACT};
use crate::{DataSet, Error, Family, ModelKind, ModelSpec, Result};

/// Closed-form posterior `(mean, variance)` of `μ` for unit-variance normal
/// data under `μ ~ N(μ₀, 1/τ₀)`.
pub(crate) fn conjugate_moments(xs: &[f64], mu0: f64, tau0: f64) -> (f64, f64) {
    let n = xs.len() as f64;
    let sum: f64 = xs.iter().sum();
    let prec = n + tau0;
    ((sum + tau0 * mu0) / prec, 1.0 / prec)
}

/// I.i.d. draws from the exact posterior; `burn_in` and `thin` are ignored.
pub fn sample_conjugate_normal(model: &ModelSpec, cfg: &McmcConfig) -> Result<FitOutput> {
    cfg.validate()?;
    let (ModelKind::ConjugateNormal, DataSet::Normal(xs)) = (model.kind(), model.data()) else {
        return Err(Error::invalid("sample_conjugate_normal needs a conjugate_normal model"));
    };
    let Family::Normal { mean: mu0, precision: tau0 } = model.base_prior().blocks()[0].family else {
        return Err(Error::invalid("conjugate normal model needs a normal prior on mu"));
    };
    let (mean, var) = conjugate_moments(xs, mu0, tau0);
    let sd = var.sqrt();
    let mut rng = chain_rng(cfg.seed, STREAM_EXACT);
    let values: Vec<f64> = (0..cfg.draws)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            mean + sd * z
        })
        .collect();
    let draws = DrawMatrix::new(vec!["mu".into()], vec![], values, cfg.seed, ModelKind::ConjugateNormal.tag())?;
    Ok(FitOutput {
        draws,
        acceptance_rate: None,
        analytic_posterior: Some((mean, var)),
        warnings: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn seven_point_posterior() {
        let model = fixtures::normal_seven_model();
        let out = sample_conjugate_normal(&model, &McmcConfig::new(10, 0, 1)).unwrap();
        let (mean, var) = out.analytic_posterior.unwrap();
        assert_eq!(mean, 0.0);
        assert!((var - 1.0 / 7.0001).abs() < 1e-15);
        assert_eq!(out.draws.param_names(), &["mu"]);
    }

    #[test]
    fn no_data_returns_prior() {
        let (m, v) = conjugate_moments(&[], 1.5, 4.0);
        assert_eq!((m, v), (1.5, 0.25));
    }

    #[test]
    fn large_sample_mean_within_four_standard_errors() {
        let model = fixtures::normal_seven_model()
            .with_prior(crate::PriorSpec::new(vec![crate::PriorBlock::new("mu", Family::normal(1.0, 1.0))]).unwrap())
            .unwrap();
        let s = 1_000_000;
        let out = sample_conjugate_normal(&model, &McmcConfig::new(s, 0, 3)).unwrap();
        let (mean, var) = out.analytic_posterior.unwrap();
        assert!((mean - 0.125).abs() < 1e-15 && (var - 0.125).abs() < 1e-15);
        let got = out.draws.column_mean(0);
        let se = (var / s as f64).sqrt();
        assert!((got - mean).abs() < 4.0 * se, "{got} vs {mean} (se {se})");
    }
}
