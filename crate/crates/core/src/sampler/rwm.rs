use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use super::{chain_rng, McmcConfig, STREAM_MCMC};
use crate::{Error, Result};

const MIN_ACCEPT: f64 = 0.05;
const MAX_ACCEPT: f64 = 0.95;

/// Output of [`adaptive_rwm`]: retained states in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct RawChain {
    pub dim: usize,
    pub samples: Vec<f64>,
    pub acceptance_rate: f64,
    /// Frozen global proposal scale.
    pub scale: f64,
    pub warnings: Vec<String>,
}

impl RawChain {
    pub fn len(&self) -> usize {
        self.samples.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.samples[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.samples.chunks_exact(self.dim)
    }
}

/// Random-walk Metropolis with a Gaussian proposal, started at the origin.
///
/// During burn-in the global scale follows a Robbins-Monro recursion toward
/// the target acceptance rate and the proposal shape tracks the running
/// covariance of the chain. Both are frozen once burn-in ends.
pub fn adaptive_rwm<F>(mut log_target: F, dim: usize, cfg: &McmcConfig) -> Result<RawChain>
where
    F: FnMut(&[f64]) -> f64,
{
    cfg.validate()?;
    if dim == 0 {
        return Err(Error::invalid("chain dimension must be at least 1"));
    }
    let mut rng = chain_rng(cfg.seed, STREAM_MCMC);
    let target = cfg
        .target_accept
        .unwrap_or(if dim == 1 { 0.44 } else { 0.234 });

    let mut x = vec![0.0; dim];
    let mut lp = log_target(&x);
    if !lp.is_finite() {
        return Err(Error::Initialization(format!(
            "log target is {lp} at the starting point (origin of the unconstrained scale)"
        )));
    }

    let mut log_scale = (2.38 / (dim as f64).sqrt()).ln();
    let mut shape = DMatrix::<f64>::identity(dim, dim);
    let mut welford = Welford::new(dim);
    let shape_start = (cfg.burn_in / 4).max(20 * dim);

    let mut z = DVector::<f64>::zeros(dim);
    let mut proposal = vec![0.0; dim];

    let mut step = |x: &mut Vec<f64>, lp: &mut f64, scale: f64, shape: &DMatrix<f64>, rng: &mut ChaCha20Rng| {
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        let dz = shape * &z;
        for i in 0..dim {
            proposal[i] = x[i] + scale * dz[i];
        }
        let lp_new = log_target(&proposal);
        let log_alpha = if lp_new.is_nan() { f64::NEG_INFINITY } else { lp_new - *lp };
        let accept_prob = log_alpha.min(0.0).exp();
        let u: f64 = rng.random();
        let accepted = u < accept_prob;
        if accepted {
            x.copy_from_slice(&proposal);
            *lp = lp_new;
        }
        (accept_prob, accepted)
    };

    for t in 0..cfg.burn_in {
        let (prob, _) = step(&mut x, &mut lp, log_scale.exp(), &shape, &mut rng);
        let gain = ((t + 1) as f64).powf(-0.6);
        log_scale += gain * (prob - target);
        welford.push(&x);
        if t + 1 >= shape_start && (t + 1) % 50 == 0 {
            if let Some(l) = welford.cholesky() {
                shape = l;
            }
        }
    }

    let scale = log_scale.exp();
    let total = cfg.draws * cfg.thin;
    let mut samples = Vec::with_capacity(cfg.draws * dim);
    let mut accepted = 0usize;
    for t in 0..total {
        let (_, acc) = step(&mut x, &mut lp, scale, &shape, &mut rng);
        accepted += acc as usize;
        if (t + 1) % cfg.thin == 0 {
            samples.extend_from_slice(&x);
        }
    }
    let acceptance_rate = accepted as f64 / total as f64;
    let mut warnings = Vec::new();
    if !(MIN_ACCEPT..=MAX_ACCEPT).contains(&acceptance_rate) {
        warnings.push(format!(
            "acceptance rate {acceptance_rate:.3} outside [{MIN_ACCEPT}, {MAX_ACCEPT}]"
        ));
    }
    Ok(RawChain { dim, samples, acceptance_rate, scale, warnings })
}

/// Running mean and covariance.
struct Welford {
    n: usize,
    mean: Vec<f64>,
    m2: DMatrix<f64>,
}

impl Welford {
    fn new(dim: usize) -> Self {
        Welford { n: 0, mean: vec![0.0; dim], m2: DMatrix::zeros(dim, dim) }
    }

    fn push(&mut self, x: &[f64]) {
        self.n += 1;
        let d = x.len();
        let delta: Vec<f64> = (0..d).map(|i| x[i] - self.mean[i]).collect();
        for i in 0..d {
            self.mean[i] += delta[i] / self.n as f64;
        }
        for i in 0..d {
            for j in 0..d {
                self.m2[(i, j)] += delta[i] * (x[j] - self.mean[j]);
            }
        }
    }

    /// Lower Cholesky factor of the regularized sample covariance.
    fn cholesky(&self) -> Option<DMatrix<f64>> {
        if self.n < 2 {
            return None;
        }
        let d = self.mean.len();
        let mut cov = &self.m2 / (self.n - 1) as f64;
        cov = (&cov + cov.transpose()) * 0.5;
        for i in 0..d {
            cov[(i, i)] += 1e-8;
        }
        nalgebra::Cholesky::new(cov).map(|c| c.l())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn std_normal(x: &[f64]) -> f64 {
        -0.5 * x.iter().map(|v| v * v).sum::<f64>()
    }

    #[test]
    fn one_dimensional_acceptance_near_optimal() {
        let cfg = McmcConfig::new(20_000, 2_000, 11);
        let chain = adaptive_rwm(std_normal, 1, &cfg).unwrap();
        assert!(
            (0.35..=0.55).contains(&chain.acceptance_rate),
            "acceptance {}",
            chain.acceptance_rate
        );
        assert!(chain.warnings.is_empty());
    }

    #[test]
    fn one_dimensional_variance() {
        let cfg = McmcConfig::new(50_000, 2_000, 5);
        let chain = adaptive_rwm(std_normal, 1, &cfg).unwrap();
        let n = chain.len() as f64;
        let mean = chain.samples.iter().sum::<f64>() / n;
        let var = chain.samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((var - 1.0).abs() < 0.1, "variance {var}");
    }

    #[test]
    fn same_seed_same_chain() {
        let cfg = McmcConfig::new(500, 300, 99);
        let a = adaptive_rwm(std_normal, 3, &cfg).unwrap();
        let b = adaptive_rwm(std_normal, 3, &cfg).unwrap();
        assert_eq!(a, b);
        let other = adaptive_rwm(std_normal, 3, &McmcConfig { seed: 100, ..cfg }).unwrap();
        assert_ne!(a.samples, other.samples);
    }

    #[test]
    fn correlated_target_adapts_shape() {
        // Strongly correlated bivariate normal, rho = 0.95.
        let rho: f64 = 0.95;
        let target = |x: &[f64]| {
            let q = (x[0] * x[0] - 2.0 * rho * x[0] * x[1] + x[1] * x[1]) / (1.0 - rho * rho);
            -0.5 * q
        };
        let chain = adaptive_rwm(target, 2, &McmcConfig::new(20_000, 5_000, 3)).unwrap();
        let n = chain.len() as f64;
        let (mut sx, mut sy, mut sxy) = (0.0, 0.0, 0.0);
        for r in chain.rows() {
            sx += r[0] * r[0];
            sy += r[1] * r[1];
            sxy += r[0] * r[1];
        }
        let corr = sxy / (sx * sy).sqrt();
        assert!((corr - rho).abs() < 0.03, "corr {corr}");
        assert!((sx / n - 1.0).abs() < 0.25);
        assert!((0.15..=0.4).contains(&chain.acceptance_rate));
    }

    #[test]
    fn infinite_start_is_an_initialization_error() {
        let cfg = McmcConfig::new(10, 0, 0);
        let err = adaptive_rwm(|_| f64::NEG_INFINITY, 2, &cfg).unwrap_err();
        assert!(matches!(err, Error::Initialization(_)));
    }

    #[test]
    fn pathological_acceptance_warns() {
        // A target that rejects every move away from the origin.
        let target = |x: &[f64]| if x.iter().all(|v| *v == 0.0) { 0.0 } else { f64::NEG_INFINITY };
        let chain = adaptive_rwm(target, 1, &McmcConfig::new(200, 0, 1)).unwrap();
        assert_eq!(chain.acceptance_rate, 0.0);
        assert_eq!(chain.warnings.len(), 1);
    }
}
