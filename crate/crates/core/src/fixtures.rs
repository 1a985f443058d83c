//! Bundled data sets.
//!
//! The rat-tumor counts are the 71 historical control groups from Tarone
//! (1982), as tabulated in Gelman et al., *Bayesian Data Analysis* (Table 5.1).

use crate::model::BinomialGroup;
use crate::sampler::synth_gp_data;
use crate::{DataSet, ModelKind, ModelSpec};

/// Seven unit-variance normal observations, symmetric about zero.
pub const NORMAL_SEVEN: [f64; 7] = [-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0];

const RAT_TUMOR: [(u64, u64); 71] = [
    (0, 20), (0, 20), (0, 20), (0, 20), (0, 20), (0, 20), (0, 20), (0, 19), (0, 19), (0, 19),
    (0, 19), (0, 18), (0, 18), (0, 17), (1, 20), (1, 20), (1, 20), (1, 20), (1, 19), (1, 19),
    (1, 18), (1, 18), (2, 25), (2, 24), (2, 23), (2, 20), (2, 20), (2, 20), (2, 20), (2, 20),
    (2, 20), (1, 10), (5, 49), (2, 19), (5, 46), (3, 27), (2, 17), (7, 49), (7, 47), (3, 20),
    (3, 20), (2, 13), (9, 48), (10, 50), (4, 20), (4, 20), (4, 20), (4, 20), (4, 20), (4, 20),
    (4, 20), (10, 48), (4, 19), (4, 19), (4, 19), (5, 22), (11, 46), (12, 49), (5, 20), (5, 20),
    (6, 23), (5, 19), (6, 22), (6, 20), (6, 20), (6, 20), (16, 52), (15, 46), (15, 47), (9, 24),
    (4, 14),
];

/// Small three-group data set used for quadrature cross-checks.
const SMALL_BINOMIAL: [(u64, u64); 3] = [(1, 10), (4, 20), (7, 15)];

/// Seed of the bundled synthetic GP data set.
pub const GP_SEED: u64 = 20_240_611;
pub const GP_POINTS: usize = 50;

fn groups(raw: &[(u64, u64)]) -> Vec<BinomialGroup> {
    raw.iter().map(|&(y, n)| BinomialGroup { y, n }).collect()
}

pub fn rat_tumor() -> Vec<BinomialGroup> {
    groups(&RAT_TUMOR)
}

pub fn small_binomial() -> Vec<BinomialGroup> {
    groups(&SMALL_BINOMIAL)
}

pub fn normal_seven_model() -> ModelSpec {
    ModelSpec::with_default_prior(ModelKind::ConjugateNormal, DataSet::Normal(NORMAL_SEVEN.to_vec()))
        .expect("bundled fixture is valid")
}

pub fn rat_tumor_model(kind: ModelKind) -> ModelSpec {
    ModelSpec::with_default_prior(kind, DataSet::Binomial(rat_tumor())).expect("bundled fixture is valid")
}

pub fn small_binomial_model(kind: ModelKind) -> ModelSpec {
    ModelSpec::with_default_prior(kind, DataSet::Binomial(small_binomial())).expect("bundled fixture is valid")
}

pub fn gp_model() -> ModelSpec {
    let data = synth_gp_data(GP_POINTS, GP_SEED).expect("n > 0");
    ModelSpec::with_default_prior(ModelKind::GpRegression, data).expect("bundled fixture is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rat_tumor_totals() {
        let g = rat_tumor();
        assert_eq!(g.len(), 71);
        assert_eq!(g.iter().map(|g| g.y).sum::<u64>(), 267);
        assert_eq!(g.iter().map(|g| g.n).sum::<u64>(), 1739);
    }

    #[test]
    fn normal_seven_mean_is_zero() {
        assert_eq!(NORMAL_SEVEN.iter().sum::<f64>(), 0.0);
    }
}
