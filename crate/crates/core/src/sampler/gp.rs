use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::{adaptive_rwm, chain_rng, DrawMatrix, FitOutput, McmcConfig, STREAM_DATA, STREAM_EXACT};
use crate::distributions::linalg::log_mvn_from_cholesky;
use crate::distributions::{cholesky_with_jitter, exp_correlation_matrix, CovMatrix};
use crate::{DataSet, Error, Family, ModelKind, ModelSpec, Result};

/// Synthetic regression data `y = sin(πx) + x + ε`, `x ~ U(0, 3)`,
/// `ε ~ N(0, 0.5²)`.
pub fn synth_gp_data(n: usize, seed: u64) -> Result<DataSet> {
    if n == 0 {
        return Err(Error::invalid("need at least one point"));
    }
    let mut rng = chain_rng(seed, STREAM_DATA);
    let pts = (0..n)
        .map(|_| {
            let x = 3.0 * rng.random::<f64>();
            let eps: f64 = rng.sample(StandardNormal);
            (x, (std::f64::consts::PI * x).sin() + x + 0.5 * eps)
        })
        .collect();
    Ok(DataSet::Regression(pts))
}

/// Mean and covariance of `f | y` for
/// `y = f + ε`, `f ~ N(0, τ²R(ψ))`, `ε ~ N(0, σ²I)`.
pub fn gp_conditional(
    xs: &[f64],
    ys: &[f64],
    sigma2: f64,
    tau2: f64,
    psi: f64,
) -> Result<(DVector<f64>, CovMatrix)> {
    let k = exp_correlation_matrix(xs, psi)?.scale_shift(tau2, 0.0);
    let a = k.scale_shift(1.0, sigma2);
    let (ch, _) = cholesky_with_jitter(&a)?;
    let y = DVector::from_column_slice(ys);
    let km = k.matrix();
    let mean = km * ch.solve(&y);
    // K - K A⁻¹ K = K - VᵀV with V = L⁻¹K.
    let v = ch
        .l()
        .solve_lower_triangular(km)
        .ok_or(Error::Factorization { jitter: 0.0, context: Some("triangular solve".into()) })?;
    let cov = km - v.transpose() * &v;
    Ok((mean, CovMatrix::from_matrix(cov)?))
}

fn regression_columns(model: &ModelSpec) -> Result<(Vec<f64>, Vec<f64>)> {
    let DataSet::Regression(pts) = model.data() else {
        return Err(Error::invalid("GP regression needs (x, y) data"));
    };
    Ok(pts.iter().copied().unzip())
}

/// Log posterior of `(ln σ², ln τ², ln ψ)` with `f` marginalized.
pub(crate) fn log_target_fn(model: &ModelSpec) -> Result<impl Fn(&[f64]) -> f64 + '_> {
    let (xs, ys) = regression_columns(model)?;
    let priors: Vec<Family> = model.base_prior().blocks().iter().map(|b| b.family).collect();
    Ok(move |u: &[f64]| {
        let (sigma2, tau2, psi) = (u[0].exp(), u[1].exp(), u[2].exp());
        if !(sigma2 > 0.0 && tau2 > 0.0 && psi > 0.0) || !(sigma2 * tau2 * psi).is_finite() {
            return f64::NEG_INFINITY;
        }
        let lp: f64 = priors
            .iter()
            .zip([sigma2, tau2, psi])
            .map(|(f, v)| f.log_density(v).unwrap_or(f64::NEG_INFINITY))
            .sum();
        if lp == f64::NEG_INFINITY {
            return lp;
        }
        let Ok(r) = exp_correlation_matrix(&xs, psi) else {
            return f64::NEG_INFINITY;
        };
        let cov = r.scale_shift(tau2, sigma2);
        match cholesky_with_jitter(&cov) {
            Ok((ch, _)) => log_mvn_from_cholesky(&ys, &ch) + lp + u.iter().sum::<f64>(),
            Err(_) => f64::NEG_INFINITY,
        }
    })
}

/// Hyperparameters by adaptive RWM, then `f` drawn exactly from its
/// Gaussian conditional per retained draw (columns `f.1..f.n`).
pub fn sample_gp_regression(model: &ModelSpec, cfg: &McmcConfig) -> Result<FitOutput> {
    cfg.validate()?;
    if model.kind() != ModelKind::GpRegression {
        return Err(Error::invalid("sample_gp_regression needs a gp_regression model"));
    }
    let (xs, ys) = regression_columns(model)?;
    let n = xs.len();
    let target = log_target_fn(model)?;
    let chain = adaptive_rwm(&target, 3, cfg)?;

    let mut rng = chain_rng(cfg.seed, STREAM_EXACT);
    let mut values = Vec::with_capacity(chain.len() * (3 + n));
    let mut z = DVector::<f64>::zeros(n);
    for (s, u) in chain.rows().enumerate() {
        let (sigma2, tau2, psi) = (u[0].exp(), u[1].exp(), u[2].exp());
        let ctx = || format!("draw {} (sigma2={sigma2}, tau2={tau2}, psi={psi})", s + 1);
        let (mean, cov) = gp_conditional(&xs, &ys, sigma2, tau2, psi).map_err(|e| e.with_context(ctx()))?;
        let (ch, _) = cholesky_with_jitter(&cov).map_err(|e| e.with_context(ctx()))?;
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        let f = mean + lower_mul(ch.l_dirty(), &z);
        values.extend([sigma2, tau2, psi]);
        values.extend(f.iter());
    }
    let draws = DrawMatrix::new(
        ModelKind::GpRegression.param_names().iter().map(|s| s.to_string()).collect(),
        model.latent_names(),
        values,
        cfg.seed,
        ModelKind::GpRegression.tag(),
    )?;
    Ok(FitOutput {
        draws,
        acceptance_rate: Some(chain.acceptance_rate),
        analytic_posterior: None,
        warnings: chain.warnings,
    })
}

/// `L z` reading only the lower triangle of `l`.
fn lower_mul(l: &DMatrix<f64>, z: &DVector<f64>) -> DVector<f64> {
    let n = z.len();
    DVector::from_iterator(n, (0..n).map(|i| (0..=i).map(|k| l[(i, k)] * z[k]).sum()))
}
