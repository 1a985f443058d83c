//! Independent ground truth for the estimators: closed-form Gaussian
//! divergences, conjugate posterior algebra, brute-force quadrature re-fits
//! of small binomial-beta models, and sampler re-fits.

use serde::Serialize;

use crate::distributions::{ln_beta, log_beta_binomial_pmf, logsumexp_iter};
use crate::model::mean_scale_to_shapes;
use crate::sampler::{fit, FitOutput};
use crate::{DataSet, Error, Family, McmcConfig, ModelKind, ModelSpec, PriorSpec, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianPosterior {
    pub mean: f64,
    pub var: f64,
}

impl GaussianPosterior {
    pub fn new(mean: f64, var: f64) -> Result<Self> {
        if !mean.is_finite() || !(var > 0.0 && var.is_finite()) {
            return Err(Error::invalid(format!("invalid gaussian ({mean}, {var})")));
        }
        Ok(GaussianPosterior { mean, var })
    }
}

/// Posterior of `μ` for unit-variance normal data under `N(μ₀, 1/τ₀)`.
pub fn conjugate_posterior(data: &DataSet, mu0: f64, tau0: f64) -> Result<GaussianPosterior> {
    let DataSet::Normal(xs) = data else {
        return Err(Error::invalid("conjugate posterior needs normal data"));
    };
    if !(tau0 > 0.0 && tau0.is_finite()) || !mu0.is_finite() {
        return Err(Error::invalid(format!("prior N({mu0}, 1/{tau0}) is invalid")));
    }
    let n = xs.len() as f64;
    let sum: f64 = xs.iter().sum();
    GaussianPosterior::new((sum + tau0 * mu0) / (n + tau0), 1.0 / (n + tau0))
}

pub fn gaussian_h2(p: GaussianPosterior, q: GaussianPosterior) -> f64 {
    let s = p.var + q.var;
    let d = p.mean - q.mean;
    let h2 = 1.0 - (2.0 * (p.var * q.var).sqrt() / s).sqrt() * (-d * d / (4.0 * s)).exp();
    h2.clamp(0.0, 1.0)
}

/// `KL(p ‖ q)`.
pub fn gaussian_kl(p: GaussianPosterior, q: GaussianPosterior) -> f64 {
    let d = p.mean - q.mean;
    let kl = 0.5 * (q.var / p.var).ln() + (p.var + d * d) / (2.0 * q.var) - 0.5;
    kl.max(0.0)
}

/// `ln m*(x)/m(x)` for unit-variance normal data, base prior `N(μ₀, 1/τ₀)`
/// and alternative `N(μ₀*, 1/τ₀*)`.
pub fn conjugate_log_mlr(data: &DataSet, base: (f64, f64), alt: (f64, f64)) -> Result<f64> {
    let DataSet::Normal(xs) = data else {
        return Err(Error::invalid("conjugate marginal likelihood needs normal data"));
    };
    conjugate_posterior(data, base.0, base.1)?;
    conjugate_posterior(data, alt.0, alt.1)?;
    let n = xs.len() as f64;
    let sum: f64 = xs.iter().sum();
    let quad = |(m, t): (f64, f64)| 0.5 * t.ln() - 0.5 * (n + t).ln() - 0.5 * (t * m * m - (sum + t * m).powi(2) / (n + t));
    Ok(quad(alt) - quad(base))
}

/// Closed-form prior `(μ₀, τ₀)` of a conjugate-normal prior spec.
pub fn normal_hyperparameters(prior: &PriorSpec) -> Result<(f64, f64)> {
    match prior.block("mu").map(|b| b.family) {
        Some(Family::Normal { mean, precision }) => Ok((mean, precision)),
        _ => Err(Error::invalid("expected a normal prior block named \"mu\"")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Divergences {
    pub h2: f64,
    pub kl: f64,
}

/// Grid sizes for [`quadrature_refit_bb`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    /// Trapezoid nodes per log-hyperparameter axis.
    pub hyper_points: usize,
    /// Midpoint nodes for the latent probability on `(0, 1)`.
    pub theta_points: usize,
    /// Group whose latent marginal is computed.
    pub group: usize,
    /// Largest posterior mass tolerated on the box boundary.
    pub boundary_limit: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec { hyper_points: 200, theta_points: 500, group: 0, boundary_limit: 1e-4 }
    }
}

impl QuadratureSpec {
    /// Both grids twice as fine.
    pub fn refined(&self) -> Self {
        QuadratureSpec { hyper_points: 2 * self.hyper_points, theta_points: 2 * self.theta_points, ..*self }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadratureResult {
    /// Divergence between the joint posteriors of latents and parameters.
    pub joint: Divergences,
    /// Divergence between the marginal posteriors of the chosen `θ`.
    pub marginal: Divergences,
    /// `ln m*(y)/m(y)`.
    pub log_mlr: f64,
    /// Box in `(ln p₁, ln p₂)`.
    pub bounds: [(f64, f64); 2],
    /// Largest boundary mass of the two posteriors.
    pub boundary_mass: f64,
    pub theta: Vec<f64>,
    pub base_marginal: Vec<f64>,
    pub alt_marginal: Vec<f64>,
}

const PILOT_BOX: (f64, f64) = (-30.0, 14.0);
const PILOT_POINTS: usize = 177;
const PILOT_TAIL: f64 = 1e-12;

struct BbPoint {
    alpha: f64,
    beta: f64,
}

fn bb_point(kind: ModelKind, u1: f64, u2: f64) -> Option<BbPoint> {
    let (p1, p2) = (u1.exp(), u2.exp());
    let (alpha, beta) = match kind {
        ModelKind::BinomialBetaP1 => mean_scale_to_shapes(p1, p2).ok()?,
        _ => (p1, p2),
    };
    (alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()).then_some(BbPoint { alpha, beta })
}

/// Unnormalized log posterior of `(ln p₁, ln p₂)` with every `θ`
/// integrated out.
fn bb_log_post(kind: ModelKind, data: &[crate::model::BinomialGroup], prior: &[Family; 2], u1: f64, u2: f64) -> f64 {
    let Some(pt) = bb_point(kind, u1, u2) else {
        return f64::NEG_INFINITY;
    };
    let lp = prior[0].log_density(u1.exp()).unwrap_or(f64::NEG_INFINITY)
        + prior[1].log_density(u2.exp()).unwrap_or(f64::NEG_INFINITY);
    if lp == f64::NEG_INFINITY {
        return lp;
    }
    let ll: f64 = data
        .iter()
        .map(|g| log_beta_binomial_pmf(g.y, g.n, pt.alpha, pt.beta).unwrap_or(f64::NEG_INFINITY))
        .sum();
    ll + lp + u1 + u2
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn trapezoid_log_weight(i: usize, n: usize, h: f64) -> f64 {
    if i == 0 || i == n - 1 {
        (0.5 * h).ln()
    } else {
        h.ln()
    }
}

struct Grid {
    u1: Vec<f64>,
    u2: Vec<f64>,
    /// Log of quadrature weight times unnormalized density, row-major.
    base: Vec<f64>,
    alt: Vec<f64>,
}

impl Grid {
    fn evaluate(
        kind: ModelKind,
        data: &[crate::model::BinomialGroup],
        priors: [&[Family; 2]; 2],
        b1: (f64, f64),
        b2: (f64, f64),
        n: usize,
    ) -> Grid {
        let u1 = linspace(b1.0, b1.1, n);
        let u2 = linspace(b2.0, b2.1, n);
        let (h1, h2) = (u1[1] - u1[0], u2[1] - u2[0]);
        let mut base = Vec::with_capacity(n * n);
        let mut alt = Vec::with_capacity(n * n);
        for (i, &a) in u1.iter().enumerate() {
            for (j, &b) in u2.iter().enumerate() {
                let lw = trapezoid_log_weight(i, n, h1) + trapezoid_log_weight(j, n, h2);
                base.push(lw + bb_log_post(kind, data, priors[0], a, b));
                alt.push(lw + bb_log_post(kind, data, priors[1], a, b));
            }
        }
        Grid { u1, u2, base, alt }
    }

    /// Normalizes both weight vectors in place and returns their log
    /// normalizers.
    fn normalize(&mut self) -> Result<(f64, f64)> {
        let zb = logsumexp_iter(self.base.iter().copied());
        let za = logsumexp_iter(self.alt.iter().copied());
        if !zb.is_finite() || !za.is_finite() {
            return Err(Error::DegenerateSupport("posterior has no mass on the quadrature box".into()));
        }
        self.base.iter_mut().for_each(|v| *v -= zb);
        self.alt.iter_mut().for_each(|v| *v -= za);
        Ok((zb, za))
    }

    fn boundary_mass(&self) -> f64 {
        let n = self.u1.len();
        let edge = |w: &[f64]| {
            let mut m = 0.0;
            for i in 0..n {
                for j in 0..n {
                    if i == 0 || j == 0 || i == n - 1 || j == n - 1 {
                        m += w[i * n + j].exp();
                    }
                }
            }
            m
        };
        edge(&self.base).max(edge(&self.alt))
    }

    /// Index range per axis holding all but `tail` of both posteriors.
    fn support(&self, tail: f64) -> [(usize, usize); 2] {
        let n = self.u1.len();
        let mut out = [(0, n - 1); 2];
        for (axis, slot) in out.iter_mut().enumerate() {
            let mut marg = vec![0.0f64; n];
            for w in [&self.base, &self.alt] {
                let mut m = vec![0.0; n];
                for i in 0..n {
                    for j in 0..n {
                        m[if axis == 0 { i } else { j }] += w[i * n + j].exp();
                    }
                }
                for (a, b) in marg.iter_mut().zip(m) {
                    *a = a.max(b);
                }
            }
            let mut lo = 0;
            let mut acc = 0.0;
            while lo < n - 1 && acc + marg[lo] < tail {
                acc += marg[lo];
                lo += 1;
            }
            let mut hi = n - 1;
            acc = 0.0;
            while hi > lo && acc + marg[hi] < tail {
                acc += marg[hi];
                hi -= 1;
            }
            *slot = (lo.saturating_sub(1), (hi + 1).min(n - 1));
        }
        out
    }
}

/// Re-fit a small binomial-beta model under both priors by brute-force
/// quadrature.
///
/// The hyperparameter posteriors (with every `θ` integrated out exactly)
/// are evaluated by the trapezoid rule on a box in log space located by a
/// coarse pilot grid. Because both priors share the likelihood, the joint
/// divergence over `(θ, p₁, p₂)` equals the divergence of the
/// hyperparameter posteriors. The marginal posterior of `θ_g` is the
/// hyperparameter-weighted mixture of its beta conditionals, tabulated on a
/// midpoint grid.
pub fn quadrature_refit_bb(model: &ModelSpec, alt: &PriorSpec, spec: &QuadratureSpec) -> Result<QuadratureResult> {
    let kind = model.kind();
    if !matches!(kind, ModelKind::BinomialBetaP1 | ModelKind::BinomialBetaP2) {
        return Err(Error::invalid("quadrature re-fit needs a binomial-beta model"));
    }
    let DataSet::Binomial(groups) = model.data() else {
        return Err(Error::invalid("quadrature re-fit needs binomial data"));
    };
    if groups.len() > 4 {
        return Err(Error::invalid(format!("quadrature re-fit supports at most 4 groups, got {}", groups.len())));
    }
    if spec.hyper_points < 200 || spec.theta_points < 500 {
        return Err(Error::invalid("quadrature needs at least 200 nodes per axis and 500 latent nodes"));
    }
    if spec.group >= groups.len() {
        return Err(Error::invalid(format!("group {} out of range", spec.group + 1)));
    }
    let alt_model = model.with_prior(alt.clone())?;
    let families = |p: &PriorSpec| [p.blocks()[0].family, p.blocks()[1].family];
    let (fb, fa) = (families(model.base_prior()), families(alt_model.base_prior()));

    let mut pilot = Grid::evaluate(kind, groups, [&fb, &fa], PILOT_BOX, PILOT_BOX, PILOT_POINTS);
    pilot.normalize()?;
    let pilot_edge = pilot.boundary_mass();
    if pilot_edge > spec.boundary_limit {
        return Err(Error::BoxTooSmall { mass: pilot_edge, limit: spec.boundary_limit });
    }
    let [(l1, h1), (l2, h2)] = pilot.support(PILOT_TAIL);
    let bounds = [(pilot.u1[l1], pilot.u1[h1]), (pilot.u2[l2], pilot.u2[h2])];

    let mut grid = Grid::evaluate(kind, groups, [&fb, &fa], bounds[0], bounds[1], spec.hyper_points);
    let (zb, za) = grid.normalize()?;
    let boundary_mass = grid.boundary_mass();
    if boundary_mass > spec.boundary_limit {
        return Err(Error::BoxTooSmall { mass: boundary_mass, limit: spec.boundary_limit });
    }
    let joint = divergences(&grid.base, &grid.alt);

    let g = groups[spec.group];
    let n = spec.hyper_points;
    let m = spec.theta_points;
    let theta: Vec<f64> = (0..m).map(|j| (j as f64 + 0.5) / m as f64).collect();
    let log_theta: Vec<(f64, f64)> = theta.iter().map(|t| (t.ln(), (-t).ln_1p())).collect();
    let lh = -(m as f64).ln();
    let marginal_of = |w: &[f64]| -> Vec<f64> {
        let comps: Vec<BetaComponent> = (0..n * n)
            .filter(|&k| w[k] > -40.0)
            .filter_map(|k| {
                let pt = bb_point(kind, grid.u1[k / n], grid.u2[k % n])?;
                Some(BetaComponent::new(w[k], pt.alpha + g.y as f64, pt.beta + (g.n - g.y) as f64))
            })
            .collect();
        let mut lq: Vec<f64> = log_theta
            .iter()
            .map(|&lt| logsumexp_iter(comps.iter().map(|c| c.eval(lt))) + lh)
            .collect();
        let z = logsumexp_iter(lq.iter().copied());
        lq.iter_mut().for_each(|v| *v -= z);
        lq
    };
    let qb = marginal_of(&grid.base);
    let qa = marginal_of(&grid.alt);
    let marginal = divergences(&qb, &qa);
    let density = |lq: &[f64]| lq.iter().map(|v| (v - lh).exp()).collect::<Vec<f64>>();

    Ok(QuadratureResult {
        joint,
        marginal,
        log_mlr: za - zb,
        bounds,
        boundary_mass,
        base_marginal: density(&qb),
        alt_marginal: density(&qa),
        theta,
    })
}

/// Shape total above which the beta density switches to its Stirling form.
const STIRLING_SHAPES: f64 = 1e7;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Weighted beta density `c + a(ln θ - lm) + b(ln(1-θ) - l1m) - ln θ - ln(1-θ)`.
///
/// For very large `a + b` the log-gamma normalizer cancels catastrophically
/// against the kernel, so the Stirling form centres the kernel at the mean
/// (`lm`, `l1m`); otherwise `lm = l1m = 0` and `c` holds `-ln B(a, b)`.
struct BetaComponent {
    c: f64,
    a: f64,
    b: f64,
    lm: f64,
    l1m: f64,
}

impl BetaComponent {
    fn new(log_weight: f64, a: f64, b: f64) -> Self {
        let n = a + b;
        if n < STIRLING_SHAPES {
            return BetaComponent { c: log_weight - ln_beta(a, b), a, b, lm: 0.0, l1m: 0.0 };
        }
        let corr = (1.0 / a + 1.0 / b - 1.0 / n) / 12.0;
        let c = log_weight + 0.5 * (a * b / n).ln() - HALF_LN_2PI - corr;
        BetaComponent { c, a, b, lm: (a / n).ln(), l1m: (b / n).ln() }
    }

    #[inline]
    fn eval(&self, (lt, l1t): (f64, f64)) -> f64 {
        self.c + self.a * (lt - self.lm) + self.b * (l1t - self.l1m) - lt - l1t
    }
}

/// Divergences between two discrete distributions given as log masses.
fn divergences(lp: &[f64], lq: &[f64]) -> Divergences {
    let mut bc = 0.0;
    let mut kl = 0.0;
    for (&a, &b) in lp.iter().zip(lq) {
        bc += (0.5 * (a + b)).exp();
        let pa = a.exp();
        if pa > 0.0 {
            kl += pa * (a - b);
        }
    }
    Divergences { h2: (1.0 - bc).clamp(0.0, 1.0), kl: kl.max(0.0) }
}

/// Posterior means of every draw column after re-running the sampler
/// under `alt`.
#[derive(Debug, Clone, PartialEq)]
pub struct RefitMeans {
    pub columns: Vec<String>,
    pub means: Vec<f64>,
    pub fit: FitOutput,
}

impl RefitMeans {
    pub fn mean(&self, column: &str) -> Option<f64> {
        self.columns.iter().position(|c| c == column).map(|i| self.means[i])
    }
}

pub fn refit_mean_check(model: &ModelSpec, alt: &PriorSpec, cfg: &McmcConfig) -> Result<RefitMeans> {
    let out = fit(&model.with_prior(alt.clone())?, cfg)?;
    let columns: Vec<String> = out.draws.column_names().map(str::to_string).collect();
    let means = (0..columns.len()).map(|j| out.draws.column_mean(j)).collect();
    Ok(RefitMeans { columns, means, fit: out })
}

/// Monte Carlo standard error of a mean by non-overlapping batch means.
pub fn batch_means_se(xs: &[f64], batches: usize) -> Option<f64> {
    if batches < 2 || xs.len() < 2 * batches {
        return None;
    }
    let size = xs.len() / batches;
    let means: Vec<f64> = xs.chunks_exact(size).take(batches).map(|c| c.iter().sum::<f64>() / size as f64).collect();
    let grand = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (batches - 1) as f64;
    Some((var / batches as f64).sqrt())
}
