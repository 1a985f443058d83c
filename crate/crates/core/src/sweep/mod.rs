//! Sensitivity surfaces over grids of alternative-prior hyperparameters,
//! all computed from one cached set of base-posterior draws.

mod export;

pub use export::{mean_shift_to_csv, mean_shift_to_svg, surface_to_csv, surface_to_svg, Channel, CSV_HEADER};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::PriorRatio;
use crate::sensitivity::{
    alt_posterior_expectation, latent_with_plan, plain_with_plan, ratio_vector, EstimatorOptions, NeighborIndex,
    NeighborSpec, ResamplePlan, SensitivityResult,
};
use crate::{DrawMatrix, Error, Family, PriorSpec, Result};

/// Which no-refit estimator a sweep applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Estimator {
    /// Posterior of the parameters of a model without latents.
    #[serde(rename = "t1")]
    Plain,
    /// Joint posterior of latents and parameters.
    #[serde(rename = "t2")]
    Joint,
    /// Marginal posterior of the latents.
    #[serde(rename = "t3")]
    LatentMarginal,
}

impl Estimator {
    pub fn tag(&self) -> &'static str {
        match self {
            Estimator::Plain => "t1",
            Estimator::Joint => "t2",
            Estimator::LatentMarginal => "t3",
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "t1" | "plain" => Ok(Estimator::Plain),
            "t2" | "joint" => Ok(Estimator::Joint),
            "t3" | "latent" | "latent_marginal" => Ok(Estimator::LatentMarginal),
            other => Err(Error::invalid(format!("unknown estimator {other:?}; expected t1, t2 or t3"))),
        }
    }
}

/// Hyperparameter an axis value sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisParam {
    /// `Ga(v, v)`.
    GammaShapeRate,
    GammaShape,
    GammaRate,
    NormalMean,
    NormalPrecision,
    /// Sets the precision to `1/v`.
    NormalVariance,
}

impl AxisParam {
    fn apply(&self, family: Family, v: f64) -> Result<Family> {
        use AxisParam::*;
        let out = match (*self, family) {
            (GammaShapeRate, Family::Gamma { .. }) => Family::gamma(v, v),
            (GammaShape, Family::Gamma { rate, .. }) => Family::gamma(v, rate),
            (GammaRate, Family::Gamma { shape, .. }) => Family::gamma(shape, v),
            (NormalMean, Family::Normal { precision, .. }) => Family::normal(v, precision),
            (NormalPrecision, Family::Normal { mean, .. }) => Family::normal(mean, v),
            (NormalVariance, Family::Normal { mean, .. }) => Family::normal(mean, 1.0 / v),
            (p, f) => return Err(Error::invalid(format!("axis parameter {p:?} does not apply to {f}"))),
        };
        out.validate()?;
        Ok(out)
    }

    pub fn label(&self) -> &'static str {
        match self {
            AxisParam::GammaShapeRate => "nu",
            AxisParam::GammaShape => "shape",
            AxisParam::GammaRate => "rate",
            AxisParam::NormalMean => "mean",
            AxisParam::NormalPrecision => "precision",
            AxisParam::NormalVariance => "variance",
        }
    }
}

/// One grid axis: a hyperparameter of one or more prior blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub blocks: Vec<String>,
    pub param: AxisParam,
    pub values: Vec<f64>,
}

impl SweepAxis {
    pub fn new(block: impl Into<String>, param: AxisParam, values: Vec<f64>) -> Self {
        SweepAxis { blocks: vec![block.into()], param, values }
    }

    /// Applies the axis to several blocks at once.
    pub fn over_blocks(blocks: &[&str], param: AxisParam, values: Vec<f64>) -> Self {
        SweepAxis { blocks: blocks.iter().map(|b| b.to_string()).collect(), param, values }
    }

    pub fn label(&self) -> String {
        format!("{} ({})", self.param.label(), self.blocks.join(", "))
    }
}

/// `start, start + step, …` up to and including `end`.
pub fn regular_values(start: f64, end: f64, step: f64) -> Vec<f64> {
    let n = ((end - start) / step + 1e-9).floor() as usize + 1;
    (0..n).map(|i| start + step * i as f64).collect()
}

/// The 40-point grid `0.25, 0.5, …, 10`.
pub fn default_nu_values() -> Vec<f64> {
    regular_values(0.25, 10.0, 0.25)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<SweepAxis>", into = "Vec<SweepAxis>")]
pub struct SweepGrid {
    axes: Vec<SweepAxis>,
}

impl TryFrom<Vec<SweepAxis>> for SweepGrid {
    type Error = Error;

    fn try_from(axes: Vec<SweepAxis>) -> Result<Self> {
        SweepGrid::new(axes)
    }
}

impl From<SweepGrid> for Vec<SweepAxis> {
    fn from(g: SweepGrid) -> Self {
        g.axes
    }
}

impl SweepGrid {
    pub fn new(axes: Vec<SweepAxis>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(Error::invalid(format!("a sweep needs 1 or 2 axes, got {}", axes.len())));
        }
        for (k, a) in axes.iter().enumerate() {
            if a.blocks.is_empty() {
                return Err(Error::invalid(format!("axis {} names no prior block", k + 1)));
            }
            if a.values.is_empty() {
                return Err(Error::invalid(format!("axis {} has no values", k + 1)));
            }
            if a.values.iter().any(|v| !v.is_finite()) || a.values.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::invalid(format!("axis {} values must be finite and strictly increasing", k + 1)));
            }
        }
        Ok(SweepGrid { axes })
    }

    pub fn axes(&self) -> &[SweepAxis] {
        &self.axes
    }

    /// `(n₁, n₂)`, with `n₂ = 1` for a one-axis grid.
    pub fn shape(&self) -> (usize, usize) {
        (self.axes[0].values.len(), self.axes.get(1).map_or(1, |a| a.values.len()))
    }

    pub fn n_cells(&self) -> usize {
        let (a, b) = self.shape();
        a * b
    }

    /// Axis coordinates of cell `c` (axis 1 varies slowest).
    pub fn coords(&self, c: usize) -> (usize, usize) {
        let n2 = self.shape().1;
        (c / n2, c % n2)
    }

    pub fn values_at(&self, c: usize) -> (f64, Option<f64>) {
        let (i, j) = self.coords(c);
        (self.axes[0].values[i], self.axes.get(1).map(|a| a.values[j]))
    }

    /// Alternative prior of cell `c`: `base` with the axis values applied in
    /// axis order.
    pub fn cell_prior(&self, base: &PriorSpec, c: usize) -> Result<PriorSpec> {
        let (i, j) = self.coords(c);
        let mut prior = base.clone();
        for (axis, idx) in self.axes.iter().zip([i, j]) {
            for block in &axis.blocks {
                let fam = prior
                    .block(block)
                    .ok_or_else(|| Error::invalid(format!("no prior block named {block:?}")))?
                    .family;
                prior = prior.with_family(block, axis.param.apply(fam, axis.values[idx])?)?;
            }
        }
        Ok(prior)
    }

    /// Grid coordinates whose alternative coincides with `base`.
    pub fn base_marker(&self, base: &PriorSpec) -> Option<(usize, usize)> {
        (0..self.n_cells()).find(|&c| self.cell_prior(base, c).is_ok_and(|p| &p == base)).map(|c| self.coords(c))
    }
}

pub type CellResult<T> = std::result::Result<T, String>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSurface {
    pub grid: SweepGrid,
    pub estimator: Estimator,
    /// Row-major over `(axis 1, axis 2)`; failed cells keep their error.
    pub cells: Vec<CellResult<SensitivityResult>>,
    pub base_marker: Option<(usize, usize)>,
}

impl SweepSurface {
    pub fn cell(&self, i: usize, j: usize) -> &CellResult<SensitivityResult> {
        &self.cells[i * self.grid.shape().1 + j]
    }

    /// Mean of `h2` over cells that succeeded.
    pub fn mean_h2(&self) -> f64 {
        let ok: Vec<f64> = self.cells.iter().filter_map(|c| c.as_ref().ok().map(|r| r.h2)).collect();
        ok.iter().sum::<f64>() / ok.len() as f64
    }
}

#[cfg(feature = "parallel")]
fn map_cells<T: Send, F: Fn(usize) -> T + Sync + Send>(n: usize, f: F) -> Vec<T> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_cells<T, F: Fn(usize) -> T>(n: usize, f: F) -> Vec<T> {
    (0..n).map(f).collect()
}

struct Prepared {
    priors: Vec<CellResult<PriorRatio>>,
    plan: Option<ResamplePlan>,
}

fn prepare(draws: &DrawMatrix, base: &PriorSpec, grid: &SweepGrid, opts: &EstimatorOptions) -> Result<Prepared> {
    base.resolve(draws.param_names())?;
    let priors = (0..grid.n_cells())
        .map(|c| {
            grid.cell_prior(base, c)
                .and_then(|alt| PriorRatio::new(base, &alt, draws.param_names()))
                .map_err(|e| e.to_string())
        })
        .collect();
    let plan = opts.bootstrap.and_then(|b| b.plan(draws.n_draws()));
    Ok(Prepared { priors, plan })
}

/// Evaluates `estimator` at every cell of `grid`.
///
/// The neighbour index and the bootstrap resamples are built once and
/// shared by every cell; each cell is an independent pure computation.
pub fn run_sweep(
    draws: &DrawMatrix,
    base: &PriorSpec,
    grid: &SweepGrid,
    estimator: Estimator,
    spec: Option<&NeighborSpec>,
    opts: &EstimatorOptions,
) -> Result<SweepSurface> {
    let index = match estimator {
        Estimator::LatentMarginal => {
            if draws.latent_names().is_empty() {
                return Err(Error::invalid("the latent-marginal estimator needs latent columns in the draws"));
            }
            let spec = spec.ok_or_else(|| Error::invalid("the latent-marginal estimator needs a neighbor spec"))?;
            Some(NeighborIndex::build(draws, spec)?)
        }
        _ => None,
    };
    let prep = prepare(draws, base, grid, opts)?;
    let cells = map_cells(grid.n_cells(), |c| {
        let ratio = prep.priors[c].as_ref().map_err(Clone::clone)?;
        let lr = ratio_vector(draws, ratio);
        let res = match &index {
            Some(idx) => latent_with_plan(&lr, idx, opts, prep.plan.as_ref()),
            None => plain_with_plan(&lr, opts, prep.plan.as_ref()),
        };
        res.map_err(|e| e.to_string())
    });
    Ok(SweepSurface { grid: grid.clone(), estimator, cells, base_marker: grid.base_marker(base) })
}

/// Shift of a posterior mean between alternative and base, per cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanShift {
    pub shift: f64,
    pub se: Option<f64>,
    pub ess_ratio: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanShiftSurface {
    pub grid: SweepGrid,
    pub column: String,
    pub base_mean: f64,
    pub cells: Vec<CellResult<MeanShift>>,
    pub base_marker: Option<(usize, usize)>,
}

/// Reweighted posterior mean of `column` at every cell, relative to its
/// base-posterior mean.
pub fn run_mean_shift(
    draws: &DrawMatrix,
    base: &PriorSpec,
    grid: &SweepGrid,
    column: &str,
    opts: &EstimatorOptions,
) -> Result<MeanShiftSurface> {
    let j = draws
        .column_index(column)
        .ok_or_else(|| Error::invalid(format!("no draw column named {column:?}")))?;
    base.resolve(draws.param_names())?;
    let base_mean = draws.column_mean(j);
    let cells = map_cells(grid.n_cells(), |c| {
        let alt = grid.cell_prior(base, c).map_err(|e| e.to_string())?;
        let m = alt_posterior_expectation(draws, base, &alt, |row| row[j], opts).map_err(|e| e.to_string())?;
        Ok(MeanShift { shift: m.value - base_mean, se: m.se, ess_ratio: m.ess_ratio, warnings: m.warnings })
    });
    Ok(MeanShiftSurface {
        grid: grid.clone(),
        column: column.to_string(),
        base_mean,
        cells,
        base_marker: grid.base_marker(base),
    })
}
