//! The `oracle` command: estimator output against closed forms and
//! quadrature, plus integrity checks of the bundled fixture files.

use std::path::Path;

use prisens::oracle::{
    conjugate_log_mlr, conjugate_posterior, gaussian_h2, gaussian_kl, quadrature_refit_bb, GaussianPosterior,
    QuadratureSpec,
};
use prisens::sampler::fit;
use prisens::sensitivity::{
    alt_posterior_expectation, estimate_from_log_ratios, estimate_joint, estimate_latent_marginal, log_ratio_vector,
};
use prisens::{fixtures, DataSet, EstimatorOptions, Family, McmcConfig, ModelKind, NeighborSpec, Result};

use crate::config::parse_data;
use crate::CliError;

const BUNDLED: [(&str, &str, ModelKind); 3] = [
    ("normal_seven.csv", include_str!("../fixtures/normal_seven.csv"), ModelKind::ConjugateNormal),
    ("rat_tumor.csv", include_str!("../fixtures/rat_tumor.csv"), ModelKind::BinomialBetaP2),
    ("small_binomial.csv", include_str!("../fixtures/small_binomial.csv"), ModelKind::BinomialBetaP2),
];

#[derive(Debug, Clone, Copy)]
pub enum Rule {
    /// `|value - reference| <= tol`.
    Abs(f64),
    /// `|value / reference - 1| <= tol`.
    Rel(f64),
    /// `value <= reference + slack`.
    AtMost(f64),
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub reference: f64,
    pub rule: Rule,
    pub note: Option<String>,
}

impl Check {
    fn new(name: impl Into<String>, value: f64, reference: f64, rule: Rule) -> Self {
        Check { name: name.into(), value, reference, rule, note: None }
    }

    fn failed(name: impl Into<String>, note: impl Into<String>) -> Self {
        Check { name: name.into(), value: f64::NAN, reference: f64::NAN, rule: Rule::Abs(0.0), note: Some(note.into()) }
    }

    pub fn passed(&self) -> bool {
        if self.note.is_some() {
            return false;
        }
        match self.rule {
            Rule::Abs(t) => (self.value - self.reference).abs() <= t,
            Rule::Rel(t) => (self.value / self.reference - 1.0).abs() <= t,
            Rule::AtMost(s) => self.value <= self.reference + s,
        }
    }

    fn tolerance(&self) -> String {
        match self.rule {
            Rule::Abs(t) => format!("abs {t:.0e}"),
            Rule::Rel(t) => format!("rel {t:.0e}"),
            Rule::AtMost(s) => format!("<= ref + {s:.2e}"),
        }
    }
}

fn conjugate_checks(out: &mut Vec<Check>) -> Result<()> {
    let model = fixtures::normal_seven_model();
    let data = model.data().clone();
    let p = conjugate_posterior(&data, 0.0, 1e-4)?;
    out.push(Check::new("conjugate posterior mean, base prior", p.mean, 0.0, Rule::Abs(1e-15)));
    out.push(Check::new("conjugate posterior variance, base prior", p.var, 1.0 / 7.0001, Rule::Rel(1e-14)));
    let q = conjugate_posterior(&data, 1.0, 1.0)?;
    out.push(Check::new("conjugate posterior mean, N(1, 1) prior", q.mean, 0.125, Rule::Abs(1e-15)));
    let (a, b) = (GaussianPosterior::new(0.0, 1.0)?, GaussianPosterior::new(1.0, 1.0)?);
    out.push(Check::new("gaussian h2, N(0,1) vs N(1,1)", gaussian_h2(a, b), 1.0 - (-0.125f64).exp(), Rule::Abs(1e-15)));
    out.push(Check::new("gaussian kl, N(0,1) vs N(1,1)", gaussian_kl(a, b), 0.5, Rule::Abs(1e-15)));

    let draws = fit(&model, &McmcConfig::new(100_000, 0, 1))?.draws;
    let alt = model.base_prior().with_family("mu", Family::normal(1.0, 1.0))?;
    let opts = EstimatorOptions::default();
    let r = estimate_from_log_ratios(&log_ratio_vector(&draws, model.base_prior(), &alt)?, &opts)?;
    out.push(Check::new("plain h2 vs closed form, S=100000", r.h2, gaussian_h2(p, q), Rule::Abs(0.01)));
    out.push(Check::new("plain kl vs closed form, S=100000", r.kl, gaussian_kl(p, q), Rule::Abs(0.01)));
    let want = conjugate_log_mlr(&data, (0.0, 1e-4), (1.0, 1.0))?;
    out.push(Check::new("marginal likelihood ratio, S=100000", r.log_mlr.exp(), want.exp(), Rule::Rel(0.01)));
    let m = alt_posterior_expectation(&draws, model.base_prior(), &alt, |row| row[0], &opts)?;
    let se = m.se.unwrap_or(f64::NAN);
    out.push(Check::new("reweighted posterior mean, N(1, 1) prior", m.value, q.mean, Rule::Abs(3.0 * se)));
    Ok(())
}

fn quadrature_checks(out: &mut Vec<Check>) -> Result<()> {
    let model = fixtures::small_binomial_model(ModelKind::BinomialBetaP1);
    let alt = model
        .base_prior()
        .with_family("delta", Family::gamma(2.0, 2.0))?
        .with_family("gamma", Family::gamma(2.0, 2.0))?;
    let spec = QuadratureSpec::default();
    let q = quadrature_refit_bb(&model, &alt, &spec)?;
    let fine = quadrature_refit_bb(&model, &alt, &spec.refined())?;
    let (jd, md) = ((fine.joint.h2 - q.joint.h2).abs(), (fine.marginal.h2 - q.marginal.h2).abs());
    let kd = (fine.joint.kl - q.joint.kl).abs().max((fine.marginal.kl - q.marginal.kl).abs());
    out.push(Check::new("quadrature self-convergence, max change", jd.max(md).max(kd), 0.0, Rule::Abs(1e-3)));
    out.push(Check::new("quadrature data processing, h2", q.marginal.h2, q.joint.h2, Rule::AtMost(0.0)));
    out.push(Check::new("quadrature data processing, kl", q.marginal.kl, q.joint.kl, Rule::AtMost(0.0)));

    let draws = fit(&model, &McmcConfig::new(20_000, 4000, 1))?.draws;
    let opts = EstimatorOptions::without_bootstrap();
    let j = estimate_joint(&draws, model.base_prior(), &alt, &opts)?;
    out.push(Check::new("joint h2 vs quadrature, m=3", j.h2, q.joint.h2, Rule::Abs(0.05)));
    out.push(Check::new("joint kl vs quadrature, m=3", j.kl, q.joint.kl, Rule::Abs(0.05)));
    let nb = NeighborSpec::default().with_columns(vec!["eta.1".into()]);
    let l = estimate_latent_marginal(&draws, model.base_prior(), &alt, &nb, &opts)?;
    out.push(Check::new("latent-marginal h2 vs quadrature, m=3", l.h2, q.marginal.h2, Rule::Abs(0.05)));
    out.push(Check::new("latent-marginal kl vs quadrature, m=3", l.kl, q.marginal.kl, Rule::Abs(0.05)));
    Ok(())
}

fn gp_checks(out: &mut Vec<Check>) -> Result<()> {
    let model = fixtures::gp_model();
    let draws = fit(&model, &McmcConfig::for_kind(ModelKind::GpRegression, 1))?.draws;
    let opts = EstimatorOptions::default();
    for (dt, dp) in [(0.5, 0.5), (10.0, 1.0), (5.0, 5.0)] {
        let alt = model
            .base_prior()
            .with_family("tau2", Family::gamma(dt, dt))?
            .with_family("psi", Family::gamma(dp, dp))?;
        let j = estimate_joint(&draws, model.base_prior(), &alt, &opts)?;
        let m = estimate_latent_marginal(&draws, model.base_prior(), &alt, &NeighborSpec::default(), &opts)?;
        let se = (j.h2_se.unwrap_or(0.0).powi(2) + m.h2_se.unwrap_or(0.0).powi(2)).sqrt();
        out.push(Check::new(format!("gp data processing h2, ({dt}, {dp})"), m.h2, j.h2, Rule::AtMost(3.0 * se)));
    }
    Ok(())
}

fn fixture_checks(dir: Option<&Path>, out: &mut Vec<Check>) {
    for (file, bundled, kind) in BUNDLED {
        let name = format!("fixture {file}");
        let parsed = match dir {
            Some(d) => match std::fs::read_to_string(d.join(file)) {
                Ok(text) => parse_data(text.as_bytes(), file, kind),
                Err(e) => Err(CliError::Io(e.to_string())),
            },
            None => parse_data(bundled.as_bytes(), file, kind),
        };
        let data = match parsed {
            Ok(d) => d,
            Err(e) => {
                out.push(Check::failed(name, e.to_string()));
                continue;
            }
        };
        match (file, &data) {
            ("normal_seven.csv", DataSet::Normal(xs)) => {
                out.push(Check::new(format!("{name}: rows"), xs.len() as f64, 7.0, Rule::Abs(0.0)));
                out.push(Check::new(format!("{name}: mean"), xs.iter().sum::<f64>() / xs.len() as f64, 0.0, Rule::Abs(0.0)));
                let same = xs.as_slice() == fixtures::NORMAL_SEVEN;
                out.push(Check::new(format!("{name}: matches built-in"), same as u8 as f64, 1.0, Rule::Abs(0.0)));
            }
            (_, DataSet::Binomial(gs)) => {
                let builtin = if file == "rat_tumor.csv" { fixtures::rat_tumor() } else { fixtures::small_binomial() };
                let (ys, ns) = (gs.iter().map(|g| g.y).sum::<u64>(), gs.iter().map(|g| g.n).sum::<u64>());
                let (wy, wn) = (builtin.iter().map(|g| g.y).sum::<u64>(), builtin.iter().map(|g| g.n).sum::<u64>());
                out.push(Check::new(format!("{name}: groups"), gs.len() as f64, builtin.len() as f64, Rule::Abs(0.0)));
                out.push(Check::new(format!("{name}: total successes"), ys as f64, wy as f64, Rule::Abs(0.0)));
                out.push(Check::new(format!("{name}: total trials"), ns as f64, wn as f64, Rule::Abs(0.0)));
                let same = gs == &builtin;
                out.push(Check::new(format!("{name}: matches built-in"), same as u8 as f64, 1.0, Rule::Abs(0.0)));
            }
            _ => out.push(Check::failed(name, "unexpected data layout")),
        }
    }
}

/// Every check, in report order.
pub fn checks(fixture_dir: Option<&Path>) -> Vec<Check> {
    let mut out = Vec::new();
    fixture_checks(fixture_dir, &mut out);
    let groups: [(&str, fn(&mut Vec<Check>) -> Result<()>); 3] =
        [("conjugate", conjugate_checks), ("quadrature", quadrature_checks), ("gp", gp_checks)];
    for (label, f) in groups {
        if let Err(e) = f(&mut out) {
            out.push(Check::failed(format!("{label} checks"), e.to_string()));
        }
    }
    out
}

pub fn format_table(checks: &[Check]) -> String {
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(5).max(5);
    let mut s = format!("{:<width$}  {:>14}  {:>14}  {:<18}  result\n", "check", "value", "reference", "tolerance");
    for c in checks {
        let result = if c.passed() { "PASS" } else { "FAIL" };
        match &c.note {
            Some(n) => s.push_str(&format!("{:<width$}  {:>14}  {:>14}  {:<18}  {result} ({n})\n", c.name, "-", "-", "-")),
            None => s.push_str(&format!(
                "{:<width$}  {:>14.6e}  {:>14.6e}  {:<18}  {result}\n",
                c.name,
                c.value,
                c.reference,
                c.tolerance()
            )),
        }
    }
    s
}

pub fn run(fixture_dir: Option<&Path>) -> std::result::Result<(), CliError> {
    let checks = checks(fixture_dir);
    print!("{}", format_table(&checks));
    let failed = checks.iter().filter(|c| !c.passed()).count();
    println!("{} of {} checks passed", checks.len() - failed, checks.len());
    if failed > 0 {
        return Err(CliError::OracleFailed(failed));
    }
    Ok(())
}
