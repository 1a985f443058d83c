//! Factorized priors, prior-ratio evaluation and the built-in models.
//!
//! A [`PriorSpec`] is an ordered list of independent [`PriorBlock`]s. Each
//! block applies one [`Family`] independently to each of its coordinates. A
//! block of dimension 1 owns the column named after the block; a block of
//! dimension `d > 1` owns columns `name.1 ..= name.d`.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::distributions::{log_gamma_pdf, log_normal_pdf, ln_gamma, LogDensity};
use crate::{Error, Result};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Prior family applied to each coordinate of a block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Family {
    /// `N(mean, 1/precision)`.
    Normal { mean: f64, precision: f64 },
    /// `Ga(shape, rate)`.
    Gamma { shape: f64, rate: f64 },
}

impl Family {
    pub fn gamma(shape: f64, rate: f64) -> Self {
        Family::Gamma { shape, rate }
    }

    pub fn normal(mean: f64, precision: f64) -> Self {
        Family::Normal { mean, precision }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        match *self {
            Family::Normal { mean, precision } => {
                if !mean.is_finite() || !ok(precision) {
                    return Err(Error::invalid(format!(
                        "normal prior needs finite mean and positive precision, got ({mean}, {precision})"
                    )));
                }
            }
            Family::Gamma { shape, rate } => {
                if !ok(shape) || !ok(rate) {
                    return Err(Error::invalid(format!(
                        "gamma prior needs positive shape and rate, got ({shape}, {rate})"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn log_density(&self, x: f64) -> Result<LogDensity> {
        match *self {
            Family::Normal { mean, precision } => log_normal_pdf(x, mean, 1.0 / precision),
            Family::Gamma { shape, rate } => log_gamma_pdf(x, shape, rate),
        }
    }

    /// Whether the family's support is the positive half-line.
    pub fn is_positive(&self) -> bool {
        matches!(self, Family::Gamma { .. })
    }

    fn prepare(&self) -> PreparedFamily {
        match *self {
            Family::Normal { mean, precision } => PreparedFamily {
                gamma: false,
                a: mean,
                b: precision,
                log_norm: 0.5 * precision.ln() - HALF_LN_2PI,
            },
            Family::Gamma { shape, rate } => PreparedFamily {
                gamma: true,
                a: shape,
                b: rate,
                log_norm: shape * rate.ln() - ln_gamma(shape),
            },
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Normal { mean, precision } => write!(f, "N({mean}, 1/{precision})"),
            Family::Gamma { shape, rate } => write!(f, "Ga({shape}, {rate})"),
        }
    }
}

/// Family with its normalizing constant hoisted out of the per-draw loop.
#[derive(Debug, Clone, Copy)]
struct PreparedFamily {
    gamma: bool,
    a: f64,
    b: f64,
    log_norm: f64,
}

impl PreparedFamily {
    #[inline]
    fn eval(&self, x: f64) -> f64 {
        if self.gamma {
            if x <= 0.0 || !x.is_finite() {
                return f64::NEG_INFINITY;
            }
            self.log_norm + (self.a - 1.0) * x.ln() - self.b * x
        } else {
            if !x.is_finite() {
                return f64::NEG_INFINITY;
            }
            let d = x - self.a;
            self.log_norm - 0.5 * self.b * d * d
        }
    }
}

fn one() -> usize {
    1
}

/// Named block of parameters sharing one prior family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorBlock {
    pub name: String,
    #[serde(flatten)]
    pub family: Family,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub dim: usize,
}

fn is_one(d: &usize) -> bool {
    *d == 1
}

impl PriorBlock {
    pub fn new(name: impl Into<String>, family: Family) -> Self {
        PriorBlock { name: name.into(), family, dim: 1 }
    }

    pub fn with_dim(mut self, dim: usize) -> Self {
        self.dim = dim;
        self
    }

    pub fn column_names(&self) -> Vec<String> {
        if self.dim == 1 {
            vec![self.name.clone()]
        } else {
            (1..=self.dim).map(|i| format!("{}.{i}", self.name)).collect()
        }
    }
}

/// Independent product prior over named blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<PriorBlock>", into = "Vec<PriorBlock>")]
pub struct PriorSpec {
    blocks: Vec<PriorBlock>,
}

impl TryFrom<Vec<PriorBlock>> for PriorSpec {
    type Error = Error;

    fn try_from(blocks: Vec<PriorBlock>) -> Result<Self> {
        PriorSpec::new(blocks)
    }
}

impl From<PriorSpec> for Vec<PriorBlock> {
    fn from(spec: PriorSpec) -> Self {
        spec.blocks
    }
}

impl PriorSpec {
    pub fn new(blocks: Vec<PriorBlock>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::invalid("prior needs at least one block"));
        }
        let mut seen = HashSet::new();
        for b in &blocks {
            if b.name.is_empty() {
                return Err(Error::invalid("prior block name is empty"));
            }
            if b.dim == 0 {
                return Err(Error::invalid(format!("block {:?} has dimension 0", b.name)));
            }
            if !seen.insert(b.name.as_str()) {
                return Err(Error::invalid(format!("duplicate prior block {:?}", b.name)));
            }
            b.family.validate()?;
        }
        Ok(PriorSpec { blocks })
    }

    pub fn blocks(&self) -> &[PriorBlock] {
        &self.blocks
    }

    pub fn block(&self, name: &str) -> Option<&PriorBlock> {
        self.blocks.iter().find(|b| b.name == name)
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.dim).sum()
    }

    pub fn column_names(&self) -> Vec<String> {
        self.blocks.iter().flat_map(|b| b.column_names()).collect()
    }

    /// Copy of this spec with one block's family replaced.
    pub fn with_family(&self, block: &str, family: Family) -> Result<PriorSpec> {
        family.validate()?;
        let mut out = self.clone();
        let b = out
            .blocks
            .iter_mut()
            .find(|b| b.name == block)
            .ok_or_else(|| Error::invalid(format!("no prior block named {block:?}")))?;
        b.family = family;
        Ok(out)
    }

    /// Errors unless `other` has the same block names, order and dimensions.
    pub fn check_same_structure(&self, other: &PriorSpec) -> Result<()> {
        let same = self.blocks.len() == other.blocks.len()
            && self
                .blocks
                .iter()
                .zip(&other.blocks)
                .all(|(a, b)| a.name == b.name && a.dim == b.dim);
        if same {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "prior structures differ: [{}] vs [{}]",
                describe(self),
                describe(other)
            )))
        }
    }

    /// Column indices for each block, resolved against `names`. Every block
    /// column must be present and every name must belong to some block.
    pub fn resolve<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<Vec<usize>>> {
        let mut claimed = vec![false; names.len()];
        let mut out = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let mut cols = Vec::with_capacity(b.dim);
            for col in b.column_names() {
                let idx = names
                    .iter()
                    .position(|n| n.as_ref() == col)
                    .ok_or_else(|| Error::invalid(format!("parameter column {col:?} is missing")))?;
                claimed[idx] = true;
                cols.push(idx);
            }
            out.push(cols);
        }
        if let Some(i) = claimed.iter().position(|c| !c) {
            return Err(Error::invalid(format!(
                "parameter column {:?} is not covered by any prior block",
                names[i].as_ref()
            )));
        }
        Ok(out)
    }

    /// Joint log prior density at named coordinates.
    pub fn log_prior<S: AsRef<str>>(&self, names: &[S], values: &[f64]) -> Result<LogDensity> {
        if names.len() != values.len() {
            return Err(Error::invalid("names and values differ in length"));
        }
        let cols = self.resolve(names)?;
        let mut total = 0.0;
        for (b, idx) in self.blocks.iter().zip(&cols) {
            for &i in idx {
                total += b.family.log_density(values[i])?;
            }
        }
        Ok(total)
    }
}

fn describe(spec: &PriorSpec) -> String {
    spec.blocks
        .iter()
        .map(|b| format!("{}:{}", b.name, b.dim))
        .collect::<Vec<_>>()
        .join(", ")
}

/// `ln π*(θ) - ln π(θ)` evaluated over only the blocks whose family differs.
///
/// Blocks with exactly equal hyperparameters are skipped outright, so the
/// ratio is independent of those columns. If the base density vanishes at a
/// point the ratio is `+∞`.
#[derive(Debug, Clone)]
pub struct PriorRatio {
    terms: Vec<RatioTerm>,
}

#[derive(Debug, Clone)]
struct RatioTerm {
    cols: Vec<usize>,
    base: PreparedFamily,
    alt: PreparedFamily,
}

impl PriorRatio {
    pub fn new<S: AsRef<str>>(base: &PriorSpec, alt: &PriorSpec, names: &[S]) -> Result<Self> {
        base.check_same_structure(alt)?;
        let cols = base.resolve(names)?;
        let terms = base
            .blocks
            .iter()
            .zip(&alt.blocks)
            .zip(cols)
            .filter(|((b, a), _)| b.family != a.family)
            .map(|((b, a), cols)| RatioTerm {
                cols,
                base: b.family.prepare(),
                alt: a.family.prepare(),
            })
            .collect();
        Ok(PriorRatio { terms })
    }

    /// True when no block changed and every ratio is identically zero.
    pub fn is_identity(&self) -> bool {
        self.terms.is_empty()
    }

    /// Column indices the ratio reads.
    pub fn columns(&self) -> impl Iterator<Item = usize> + '_ {
        self.terms.iter().flat_map(|t| t.cols.iter().copied())
    }

    #[inline]
    pub fn eval(&self, row: &[f64]) -> f64 {
        let mut total = 0.0;
        for t in &self.terms {
            for &c in &t.cols {
                let x = row[c];
                let lb = t.base.eval(x);
                if lb == f64::NEG_INFINITY {
                    return f64::INFINITY;
                }
                total += t.alt.eval(x) - lb;
            }
        }
        total
    }
}

/// Log prior ratio `ln π*(θ)/π(θ)` at a single point.
pub fn log_prior_ratio<S: AsRef<str>>(
    base: &PriorSpec,
    alt: &PriorSpec,
    names: &[S],
    values: &[f64],
) -> Result<f64> {
    if names.len() != values.len() {
        return Err(Error::invalid("names and values differ in length"));
    }
    Ok(PriorRatio::new(base, alt, names)?.eval(values))
}

/// `(δ, γ) ↦ (α, β)` where `E[θ] = e^{-δ}` and `γ = 1/√(α+β)`.
pub fn mean_scale_to_shapes(delta: f64, gamma: f64) -> Result<(f64, f64)> {
    if !(delta > 0.0 && gamma > 0.0) || !delta.is_finite() || !gamma.is_finite() {
        return Err(Error::invalid(format!(
            "delta and gamma must be positive, got ({delta}, {gamma})"
        )));
    }
    let total = 1.0 / (gamma * gamma);
    Ok(((-delta).exp() * total, -(-delta).exp_m1() * total))
}

/// Inverse of [`mean_scale_to_shapes`].
pub fn shapes_to_mean_scale(alpha: f64, beta: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && beta > 0.0) || !alpha.is_finite() || !beta.is_finite() {
        return Err(Error::invalid(format!(
            "alpha and beta must be positive, got ({alpha}, {beta})"
        )));
    }
    Ok(((beta / alpha).ln_1p(), 1.0 / (alpha + beta).sqrt()))
}

/// Built-in model families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// `xᵢ ~ N(μ, 1)`, `μ ~ N(μ₀, 1/τ₀)`.
    ConjugateNormal,
    /// Binomial-beta with the hyperprior on the mean/scale pair `(δ, γ)`.
    BinomialBetaP1,
    /// Binomial-beta with the hyperprior on the shapes `(α, β)`.
    BinomialBetaP2,
    /// GP regression, exponential kernel, hyperparameters `(σ², τ², ψ)`.
    GpRegression,
}

impl ModelKind {
    pub fn param_names(&self) -> &'static [&'static str] {
        match self {
            ModelKind::ConjugateNormal => &["mu"],
            ModelKind::BinomialBetaP1 => &["delta", "gamma"],
            ModelKind::BinomialBetaP2 => &["alpha", "beta"],
            ModelKind::GpRegression => &["sigma2", "tau2", "psi"],
        }
    }

    /// Column prefix of the latent block, if the model has one.
    pub fn latent_prefix(&self) -> Option<&'static str> {
        match self {
            ModelKind::ConjugateNormal => None,
            ModelKind::BinomialBetaP1 | ModelKind::BinomialBetaP2 => Some("eta"),
            ModelKind::GpRegression => Some("f"),
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            ModelKind::ConjugateNormal => "conjugate_normal",
            ModelKind::BinomialBetaP1 => "binomial_beta_p1",
            ModelKind::BinomialBetaP2 => "binomial_beta_p2",
            ModelKind::GpRegression => "gp_regression",
        }
    }

    /// Base priors used for the bundled illustrations.
    pub fn default_prior(&self) -> PriorSpec {
        let blocks = match self {
            ModelKind::ConjugateNormal => vec![PriorBlock::new("mu", Family::normal(0.0, 1e-4))],
            _ => self
                .param_names()
                .iter()
                .map(|n| PriorBlock::new(*n, Family::gamma(1.0, 1.0)))
                .collect(),
        };
        PriorSpec::new(blocks).expect("built-in priors are valid")
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Observed successes out of trials for one group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinomialGroup {
    pub y: u64,
    pub n: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSet {
    /// Unit-variance normal observations.
    Normal(Vec<f64>),
    /// One binomial count per group.
    Binomial(Vec<BinomialGroup>),
    /// Scalar-input regression pairs `(x, y)`.
    Regression(Vec<(f64, f64)>),
}

impl DataSet {
    pub fn len(&self) -> usize {
        match self {
            DataSet::Normal(v) => v.len(),
            DataSet::Binomial(v) => v.len(),
            DataSet::Regression(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn validate_for(&self, kind: ModelKind) -> Result<()> {
        match (kind, self) {
            (ModelKind::ConjugateNormal, DataSet::Normal(xs)) => {
                if xs.iter().any(|x| !x.is_finite()) {
                    return Err(Error::invalid("normal data must be finite"));
                }
            }
            (ModelKind::BinomialBetaP1 | ModelKind::BinomialBetaP2, DataSet::Binomial(gs)) => {
                if gs.is_empty() {
                    return Err(Error::invalid("binomial-beta data needs at least one group"));
                }
                if let Some((i, g)) = gs.iter().enumerate().find(|(_, g)| g.y > g.n) {
                    return Err(Error::invalid(format!(
                        "group {}: successes {} exceed trials {}",
                        i + 1,
                        g.y,
                        g.n
                    )));
                }
            }
            (ModelKind::GpRegression, DataSet::Regression(pts)) => {
                if pts.is_empty() {
                    return Err(Error::invalid("regression data needs at least one point"));
                }
                if pts.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
                    return Err(Error::invalid("regression data must be finite"));
                }
            }
            _ => {
                return Err(Error::invalid(format!("data set does not match model kind {kind}")));
            }
        }
        Ok(())
    }
}

/// A built-in model bound to data and a base prior.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    kind: ModelKind,
    data: DataSet,
    base_prior: PriorSpec,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, data: DataSet, base_prior: PriorSpec) -> Result<Self> {
        data.validate_for(kind)?;
        let expected = kind.param_names();
        let blocks = base_prior.blocks();
        let matches = blocks.len() == expected.len()
            && blocks.iter().zip(expected).all(|(b, n)| b.name == *n && b.dim == 1);
        if !matches {
            return Err(Error::invalid(format!(
                "{kind} expects prior blocks {expected:?}, got [{}]",
                describe(&base_prior)
            )));
        }
        if kind != ModelKind::ConjugateNormal {
            if let Some(b) = blocks.iter().find(|b| !b.family.is_positive()) {
                return Err(Error::invalid(format!(
                    "parameter {:?} is positive; its prior must be a gamma family",
                    b.name
                )));
            }
        } else if !matches!(blocks[0].family, Family::Normal { .. }) {
            return Err(Error::invalid("conjugate normal model needs a normal prior on mu"));
        }
        Ok(ModelSpec { kind, data, base_prior })
    }

    /// Model with the kind's default base prior.
    pub fn with_default_prior(kind: ModelKind, data: DataSet) -> Result<Self> {
        ModelSpec::new(kind, data, kind.default_prior())
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn data(&self) -> &DataSet {
        &self.data
    }

    pub fn base_prior(&self) -> &PriorSpec {
        &self.base_prior
    }

    /// Same model and data under a different prior.
    pub fn with_prior(&self, prior: PriorSpec) -> Result<Self> {
        ModelSpec::new(self.kind, self.data.clone(), prior)
    }

    pub fn latent_names(&self) -> Vec<String> {
        match self.kind.latent_prefix() {
            None => Vec::new(),
            Some(p) => (1..=self.data.len()).map(|i| format!("{p}.{i}")).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn spec(blocks: &[(&str, Family)]) -> PriorSpec {
        PriorSpec::new(blocks.iter().map(|(n, f)| PriorBlock::new(*n, *f)).collect()).unwrap()
    }

    #[test]
    fn log_prior_examples() {
        let g = spec(&[("a", Family::gamma(1.0, 1.0))]);
        assert_relative_eq!(g.log_prior(&["a"], &[1.0]).unwrap(), -1.0, epsilon = 1e-14);

        let gg = spec(&[("a", Family::gamma(1.0, 1.0)), ("b", Family::gamma(1.0, 1.0))]);
        assert_relative_eq!(gg.log_prior(&["a", "b"], &[1.0, 1.0]).unwrap(), -2.0, epsilon = 1e-14);

        let n = spec(&[("mu", Family::normal(0.0, 1e-4))]);
        assert_relative_eq!(
            n.log_prior(&["mu"], &[0.0]).unwrap(),
            -5.524_108_719_192_764,
            epsilon = 1e-13
        );
        assert!(n.log_prior(&["nu"], &[0.0]).is_err());
        assert!(gg.log_prior(&["a"], &[1.0]).is_err());
    }

    #[test]
    fn prior_ratio_examples() {
        let base = spec(&[("x", Family::gamma(1.0, 1.0))]);
        assert_eq!(log_prior_ratio(&base, &base, &["x"], &[3.2]).unwrap(), 0.0);

        let alt = spec(&[("x", Family::gamma(2.0, 2.0))]);
        assert_relative_eq!(
            log_prior_ratio(&base, &alt, &["x"], &[1.0]).unwrap(),
            0.386_294_361_119_890_6,
            epsilon = 1e-14
        );
    }

    #[test]
    fn prior_ratio_skips_unchanged_blocks() {
        let base = spec(&[("a", Family::normal(0.0, 1e-4)), ("b", Family::gamma(1.0, 1.0))]);
        let alt = base.with_family("b", Family::gamma(3.0, 0.5)).unwrap();
        let names = ["a", "b"];
        let r1 = log_prior_ratio(&base, &alt, &names, &[-40.0, 1.7]).unwrap();
        let r2 = log_prior_ratio(&base, &alt, &names, &[1e6, 1.7]).unwrap();
        let r3 = log_prior_ratio(&base, &alt, &names, &[f64::NAN, 1.7]).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(r1, r3);
        let ratio = PriorRatio::new(&base, &alt, &names).unwrap();
        assert_eq!(ratio.columns().collect::<Vec<_>>(), vec![1]);
    }

    #[test]
    fn prior_ratio_structure_mismatch() {
        let base = spec(&[("a", Family::gamma(1.0, 1.0))]);
        let other = spec(&[("b", Family::gamma(1.0, 1.0))]);
        assert!(log_prior_ratio(&base, &other, &["a"], &[1.0]).is_err());
        let wide = PriorSpec::new(vec![PriorBlock::new("a", Family::gamma(1.0, 1.0)).with_dim(2)]).unwrap();
        assert!(log_prior_ratio(&base, &wide, &["a"], &[1.0]).is_err());
    }

    #[test]
    fn base_support_violation_is_positive_infinity() {
        let base = spec(&[("x", Family::gamma(1.0, 1.0))]);
        let alt = spec(&[("x", Family::normal(0.0, 1.0))]);
        assert_eq!(log_prior_ratio(&base, &alt, &["x"], &[-1.0]).unwrap(), f64::INFINITY);
    }

    #[test]
    fn multi_dim_blocks_use_indexed_columns() {
        let s = PriorSpec::new(vec![PriorBlock::new("w", Family::normal(0.0, 1.0)).with_dim(3)]).unwrap();
        assert_eq!(s.column_names(), vec!["w.1", "w.2", "w.3"]);
        let lp = s.log_prior(&["w.3", "w.1", "w.2"], &[0.0, 0.0, 0.0]).unwrap();
        assert_relative_eq!(lp, -3.0 * HALF_LN_2PI, epsilon = 1e-14);
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(PriorSpec::new(vec![]).is_err());
        assert!(PriorSpec::new(vec![
            PriorBlock::new("a", Family::gamma(1.0, 1.0)),
            PriorBlock::new("a", Family::gamma(1.0, 1.0)),
        ])
        .is_err());
        assert!(PriorSpec::new(vec![PriorBlock::new("a", Family::gamma(0.0, 1.0))]).is_err());
        assert!(PriorSpec::new(vec![PriorBlock::new("a", Family::normal(0.0, -1.0))]).is_err());
    }

    #[test]
    fn reparameterization_examples() {
        let (a, b) = mean_scale_to_shapes(2f64.ln(), 1.0).unwrap();
        assert_relative_eq!(a, 0.5, epsilon = 1e-15);
        assert_relative_eq!(b, 0.5, epsilon = 1e-15);
        assert_relative_eq!(a / (a + b), (-(2f64.ln())).exp(), epsilon = 1e-15);

        let (d, g) = shapes_to_mean_scale(3.0, 7.0).unwrap();
        let (a, b) = mean_scale_to_shapes(d, g).unwrap();
        assert_relative_eq!(a, 3.0, max_relative = 1e-12);
        assert_relative_eq!(b, 7.0, max_relative = 1e-12);
        assert!(mean_scale_to_shapes(0.0, 1.0).is_err());
        assert!(shapes_to_mean_scale(1.0, -1.0).is_err());
    }

    #[test]
    fn model_spec_validation() {
        let data = DataSet::Binomial(vec![BinomialGroup { y: 1, n: 4 }]);
        assert!(ModelSpec::with_default_prior(ModelKind::BinomialBetaP2, data.clone()).is_ok());
        assert!(ModelSpec::with_default_prior(ModelKind::GpRegression, data.clone()).is_err());
        let bad = DataSet::Binomial(vec![BinomialGroup { y: 5, n: 4 }]);
        assert!(ModelSpec::with_default_prior(ModelKind::BinomialBetaP1, bad).is_err());
        let wrong_names = ModelKind::BinomialBetaP1.default_prior();
        assert!(ModelSpec::new(ModelKind::BinomialBetaP2, data, wrong_names).is_err());
    }

    proptest! {
        #[test]
        fn ratio_equals_difference_of_log_priors(
            a in 0.05f64..8.0, b in 0.05f64..8.0, mu in -3.0f64..3.0,
            shape in 0.2f64..10.0, rate in 0.2f64..10.0, prec in 0.01f64..20.0,
        ) {
            let base = spec(&[("m", Family::normal(0.0, 1e-4)), ("s", Family::gamma(1.0, 1.0))]);
            let alt = spec(&[("m", Family::normal(0.5, prec)), ("s", Family::gamma(shape, rate))]);
            let names = ["m", "s"];
            let vals = [mu, a * b];
            let direct = alt.log_prior(&names, &vals).unwrap() - base.log_prior(&names, &vals).unwrap();
            let ratio = log_prior_ratio(&base, &alt, &names, &vals).unwrap();
            prop_assert!((direct - ratio).abs() < 1e-9 * (1.0 + direct.abs()));
        }

        #[test]
        fn ratio_invariant_to_shared_extra_block(x in 0.01f64..20.0, extra in -5.0f64..5.0, nu in 0.1f64..10.0) {
            let base = spec(&[("x", Family::gamma(1.0, 1.0))]);
            let alt = spec(&[("x", Family::gamma(nu, nu))]);
            let base2 = spec(&[("x", Family::gamma(1.0, 1.0)), ("e", Family::normal(1.0, 2.0))]);
            let alt2 = spec(&[("x", Family::gamma(nu, nu)), ("e", Family::normal(1.0, 2.0))]);
            let r1 = log_prior_ratio(&base, &alt, &["x"], &[x]).unwrap();
            let r2 = log_prior_ratio(&base2, &alt2, &["x", "e"], &[x, extra]).unwrap();
            prop_assert_eq!(r1, r2);
        }

        #[test]
        fn reparameterization_round_trips(alpha in 1e-3f64..1e3, beta in 1e-3f64..1e3) {
            let (d, g) = shapes_to_mean_scale(alpha, beta).unwrap();
            prop_assert!(d > 0.0 && g > 0.0);
            let (a2, b2) = mean_scale_to_shapes(d, g).unwrap();
            prop_assert!((a2 - alpha).abs() <= 1e-10 * alpha);
            prop_assert!((b2 - beta).abs() <= 1e-10 * beta);
        }
    }
}
