//! Browser bindings for the demo page in `www/`.
//!
//! Each export has a plain Rust twin returning `Result<String, String>` so
//! the demo logic is testable natively.

use std::cell::RefCell;
use std::collections::HashMap;

use prisens::oracle::{conjugate_posterior, gaussian_h2, gaussian_kl};
use prisens::sampler::fit;
use prisens::sensitivity::{estimate_from_log_ratios, log_ratio_vector};
use prisens::sweep::{run_sweep, surface_to_svg, AxisParam, Channel};
use prisens::{
    fixtures, DrawMatrix, Estimator, EstimatorOptions, Family, McmcConfig, ModelKind, ModelSpec, SweepAxis, SweepGrid,
};
use serde_json::json;
use wasm_bindgen::prelude::*;

const CONJUGATE_DRAWS: usize = 20_000;

thread_local! {
    static DRAWS: RefCell<HashMap<(ModelKind, u64), DrawMatrix>> = RefCell::new(HashMap::new());
}

fn cached_draws(model: &ModelSpec, cfg: &McmcConfig) -> Result<DrawMatrix, String> {
    let key = (model.kind(), cfg.seed);
    if let Some(d) = DRAWS.with(|c| c.borrow().get(&key).cloned()) {
        return Ok(d);
    }
    let draws = fit(model, cfg).map_err(|e| e.to_string())?.draws;
    DRAWS.with(|c| c.borrow_mut().insert(key, draws.clone()));
    Ok(draws)
}

fn channel(name: &str) -> Result<Channel, String> {
    name.parse().map_err(|_| format!("unknown channel {name:?}; use h2 or kl"))
}

fn err<T>(r: prisens::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

/// Estimated and closed-form divergences for the seven-point normal model
/// under the alternative prior `N(mean, 1/precision)`, as JSON.
pub fn conjugate_point(mean: f64, precision: f64, seed: u64) -> Result<String, String> {
    let model = fixtures::normal_seven_model();
    let draws = cached_draws(&model, &McmcConfig::new(CONJUGATE_DRAWS, 0, seed))?;
    let alt = err(model.base_prior().with_family("mu", Family::normal(mean, precision)))?;
    let lr = err(log_ratio_vector(&draws, model.base_prior(), &alt))?;
    let est = err(estimate_from_log_ratios(&lr, &EstimatorOptions::default()))?;
    let p = err(conjugate_posterior(model.data(), 0.0, 1e-4))?;
    let q = err(conjugate_posterior(model.data(), mean, precision))?;
    let out = json!({
        "estimate": est,
        "exact": {"h2": gaussian_h2(p, q), "kl": gaussian_kl(p, q)},
    });
    Ok(out.to_string())
}

/// SVG heatmap of the seven-point normal model over prior mean and
/// precision.
pub fn conjugate_heatmap(channel_name: &str, seed: u64) -> Result<String, String> {
    let model = fixtures::normal_seven_model();
    let draws = cached_draws(&model, &McmcConfig::new(CONJUGATE_DRAWS, 0, seed))?;
    let means: Vec<f64> = (0..=16).map(|i| -2.0 + 0.25 * i as f64).collect();
    let precisions: Vec<f64> = (0..=12).map(|i| 10f64.powf(-2.0 + i as f64 / 4.0)).collect();
    let grid = err(SweepGrid::new(vec![
        SweepAxis::new("mu", AxisParam::NormalMean, means),
        SweepAxis::new("mu", AxisParam::NormalPrecision, precisions),
    ]))?;
    let opts = EstimatorOptions::without_bootstrap();
    let surface = err(run_sweep(&draws, model.base_prior(), &grid, Estimator::Plain, None, &opts))?;
    err(surface_to_svg(&surface, channel(channel_name)?))
}

/// SVG heatmap of the rat-tumor hyperprior sweep `Ga(ν, ν)` per block for
/// `"p1"` (mean-scale) or `"p2"` (shape) parameterization.
pub fn rat_tumor_heatmap(parameterization: &str, channel_name: &str, seed: u64) -> Result<String, String> {
    let kind = match parameterization {
        "p1" => ModelKind::BinomialBetaP1,
        "p2" => ModelKind::BinomialBetaP2,
        other => return Err(format!("unknown parameterization {other:?}; use p1 or p2")),
    };
    let model = fixtures::rat_tumor_model(kind);
    let draws = cached_draws(&model, &McmcConfig::for_kind(kind, seed))?;
    let nu: Vec<f64> = (1..=20).map(|i| 0.5 * i as f64).collect();
    let [a, b] = kind.param_names() else { unreachable!("two hyperparameters") };
    let grid = err(SweepGrid::new(vec![
        SweepAxis::new(*a, AxisParam::GammaShapeRate, nu.clone()),
        SweepAxis::new(*b, AxisParam::GammaShapeRate, nu),
    ]))?;
    let opts = EstimatorOptions::without_bootstrap();
    let surface = err(run_sweep(&draws, model.base_prior(), &grid, Estimator::Joint, None, &opts))?;
    err(surface_to_svg(&surface, channel(channel_name)?))
}

#[wasm_bindgen(js_name = conjugatePoint)]
pub fn conjugate_point_js(mean: f64, precision: f64, seed: u32) -> Result<String, JsError> {
    conjugate_point(mean, precision, seed.into()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = conjugateHeatmap)]
pub fn conjugate_heatmap_js(channel: &str, seed: u32) -> Result<String, JsError> {
    conjugate_heatmap(channel, seed.into()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = ratTumorHeatmap)]
pub fn rat_tumor_heatmap_js(parameterization: &str, channel: &str, seed: u32) -> Result<String, JsError> {
    rat_tumor_heatmap(parameterization, channel, seed.into()).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_reports_estimate_and_exact_values() {
        let v: serde_json::Value = serde_json::from_str(&conjugate_point(1.0, 1.0, 3).unwrap()).unwrap();
        let (est, exact) = (v["estimate"]["h2"].as_f64().unwrap(), v["exact"]["h2"].as_f64().unwrap());
        assert!((est - exact).abs() < 0.01, "{est} vs {exact}");
        let v: serde_json::Value = serde_json::from_str(&conjugate_point(0.0, 1e-4, 3).unwrap()).unwrap();
        assert_eq!(v["estimate"]["h2"], 0.0);
    }

    #[test]
    fn heatmaps_are_svg() {
        let svg = conjugate_heatmap("kl", 1).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        let svg = rat_tumor_heatmap("p2", "h2", 1).unwrap();
        assert!(svg.contains("base-marker"));
    }

    #[test]
    fn bad_arguments_are_reported() {
        assert!(conjugate_heatmap("tv", 1).unwrap_err().contains("h2 or kl"));
        assert!(rat_tumor_heatmap("p3", "h2", 1).is_err());
        assert!(conjugate_point(0.0, -1.0, 1).is_err());
    }
}
