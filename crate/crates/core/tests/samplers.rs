use prisens::oracle::{batch_means_se, quadrature_refit_bb, refit_mean_check, QuadratureSpec};
use prisens::sampler::{fit, gp_conditional};
use prisens::sensitivity::alt_posterior_expectation;
use prisens::{fixtures, DataSet, EstimatorOptions, Family, McmcConfig, ModelKind};

fn weighted_mean(xs: &[f64], ws: &[f64]) -> f64 {
    xs.iter().zip(ws).map(|(x, w)| x * w).sum::<f64>() / ws.iter().sum::<f64>()
}

#[test]
fn binomial_beta_latent_mean_matches_quadrature() {
    for kind in [ModelKind::BinomialBetaP1, ModelKind::BinomialBetaP2] {
        let model = fixtures::small_binomial_model(kind);
        let q = quadrature_refit_bb(&model, model.base_prior(), &QuadratureSpec::default()).unwrap();
        let want = weighted_mean(&q.theta, &q.base_marginal);

        let draws = fit(&model, &McmcConfig::new(20_000, 4000, 21)).unwrap().draws;
        let j = draws.column_index("eta.1").unwrap();
        let col: Vec<f64> = draws.column(j).collect();
        let got = col.iter().sum::<f64>() / col.len() as f64;
        let se = batch_means_se(&col, 40).unwrap();
        assert!((got - want).abs() < 4.0 * se, "{kind}: {got} vs {want} (se {se})");
    }
}

#[test]
fn reweighted_means_agree_with_refits() {
    let model = fixtures::small_binomial_model(ModelKind::BinomialBetaP2);
    let alt = model
        .base_prior()
        .with_family("alpha", Family::gamma(3.0, 1.5))
        .unwrap()
        .with_family("beta", Family::gamma(3.0, 1.5))
        .unwrap();
    let cfg = McmcConfig::new(20_000, 4000, 22);
    let base = fit(&model, &cfg).unwrap().draws;
    let refit = refit_mean_check(&model, &alt, &McmcConfig { seed: 23, ..cfg }).unwrap();
    let opts = EstimatorOptions::default();
    for col in ["alpha", "eta.1", "eta.3"] {
        let j = base.column_index(col).unwrap();
        let m = alt_posterior_expectation(&base, model.base_prior(), &alt, |r| r[j], &opts).unwrap();
        let k = refit.fit.draws.column_index(col).unwrap();
        let xs: Vec<f64> = refit.fit.draws.column(k).collect();
        let se = (m.se.unwrap().powi(2) + batch_means_se(&xs, 40).unwrap().powi(2)).sqrt();
        let want = refit.mean(col).unwrap();
        assert!((m.value - want).abs() < 4.0 * se, "{col}: reweighted {} vs refit {want} (se {se})", m.value);
    }
}

#[test]
fn gp_posterior_mean_recovers_the_signal() {
    let model = fixtures::gp_model();
    let draws = fit(&model, &McmcConfig::for_kind(ModelKind::GpRegression, 24)).unwrap().draws;
    let DataSet::Regression(pts) = model.data() else { panic!("regression data") };
    let n = pts.len();
    let f0 = draws.column_index("f.1").unwrap();
    let mut sq = 0.0;
    for (i, (x, _)) in pts.iter().enumerate() {
        let mean = draws.column_mean(f0 + i);
        sq += (mean - ((std::f64::consts::PI * x).sin() + x)).powi(2);
    }
    let rmse = (sq / n as f64).sqrt();
    assert!(rmse < 0.5, "rmse {rmse}");
}

#[test]
fn gp_latents_follow_their_conditional() {
    let model = fixtures::gp_model();
    let draws = fit(&model, &McmcConfig::new(400, 400, 25)).unwrap().draws;
    let DataSet::Regression(pts) = model.data() else { panic!("regression data") };
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let f0 = draws.column_index("f.1").unwrap();
    // Standardized residuals of f.1 against its exact conditional law.
    let z: Vec<f64> = draws
        .rows()
        .map(|r| {
            let (mean, cov) = gp_conditional(&xs, &ys, r[0], r[1], r[2]).unwrap();
            (r[f0] - mean[0]) / cov.matrix()[(0, 0)].sqrt()
        })
        .collect();
    let m = z.iter().sum::<f64>() / z.len() as f64;
    let v = z.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (z.len() - 1) as f64;
    assert!(m.abs() < 0.2, "mean {m}");
    assert!((v - 1.0).abs() < 0.2, "variance {v}");
}
