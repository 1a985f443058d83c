use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::sampler::chain_rng;

const STREAM_BOOTSTRAP: u64 = 3;
/// Largest resample-count block held in memory at once, in entries.
const BLOCK_ENTRIES: usize = 1 << 22;

/// Nonparametric bootstrap over draws for standard errors.
///
/// Resampling is over the per-draw estimator terms with neighbourhoods held
/// fixed. Every call with the same seed and draw count uses the same
/// resamples, giving common random numbers across sweep cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bootstrap {
    pub resamples: usize,
    pub seed: u64,
}

impl Default for Bootstrap {
    fn default() -> Self {
        Bootstrap { resamples: 200, seed: 0 }
    }
}

/// Resample counts `R × S`: entry `(r, i)` is how often draw `i` appears in
/// replicate `r`.
pub(crate) struct ResamplePlan {
    counts: DMatrix<f64>,
}

fn fill_counts(rng: &mut ChaCha20Rng, rows: usize, n: usize) -> DMatrix<f64> {
    let mut c = DMatrix::zeros(rows, n);
    for r in 0..rows {
        for _ in 0..n {
            c[(r, rng.random_range(0..n as u32) as usize)] += 1.0;
        }
    }
    c
}

impl Bootstrap {
    /// Full count matrix, if it fits the block budget.
    pub(crate) fn plan(&self, n: usize) -> Option<ResamplePlan> {
        (self.resamples >= 2 && self.resamples * n <= BLOCK_ENTRIES).then(|| ResamplePlan {
            counts: fill_counts(&mut chain_rng(self.seed, STREAM_BOOTSTRAP), self.resamples, n),
        })
    }

    /// Per-replicate sums `counts · x`, generating counts block by block.
    fn replicate_sums(&self, x: &DMatrix<f64>, plan: Option<&ResamplePlan>) -> DMatrix<f64> {
        if let Some(p) = plan {
            return &p.counts * x;
        }
        let n = x.nrows();
        let block = (BLOCK_ENTRIES / n).max(1);
        let mut rng = chain_rng(self.seed, STREAM_BOOTSTRAP);
        let mut out = DMatrix::zeros(self.resamples, x.ncols());
        let mut r0 = 0;
        while r0 < self.resamples {
            let rows = block.min(self.resamples - r0);
            let sums = fill_counts(&mut rng, rows, n) * x;
            out.rows_mut(r0, rows).copy_from(&sums);
            r0 += rows;
        }
        out
    }

    /// Standard errors of `(h2, kl)` from terms `u` and normalizer terms
    /// `norm` (see [`crate::sensitivity`]).
    pub(crate) fn standard_errors(&self, u: &[f64], norm: &[f64], plan: Option<&ResamplePlan>) -> (Option<f64>, Option<f64>) {
        if self.resamples < 2 {
            return (None, None);
        }
        let n = u.len();
        let x = DMatrix::from_fn(n, 3, |i, j| match j {
            0 => (0.5 * u[i]).exp(),
            1 => norm[i].exp(),
            _ => u[i],
        });
        let sums = self.replicate_sums(&x, plan);
        let nf = n as f64;
        let mut h2s = Vec::with_capacity(self.resamples);
        let mut kls = Vec::with_capacity(self.resamples);
        for r in 0..self.resamples {
            let m1 = sums[(r, 1)] / nf;
            h2s.push(1.0 - (sums[(r, 0)] / nf) / m1.sqrt());
            kls.push(m1.ln() - sums[(r, 2)] / nf);
        }
        (sample_sd(&h2s), sample_sd(&kls))
    }

    pub(crate) fn weighted_mean_se(&self, g: &[f64], w: &[f64]) -> Option<f64> {
        if self.resamples < 2 {
            return None;
        }
        let x = DMatrix::from_fn(g.len(), 2, |i, j| if j == 0 { g[i] * w[i] } else { w[i] });
        let sums = self.replicate_sums(&x, None);
        let reps: Vec<f64> = (0..self.resamples).map(|r| sums[(r, 0)] / sums[(r, 1)]).collect();
        sample_sd(&reps)
    }
}

fn sample_sd(xs: &[f64]) -> Option<f64> {
    if xs.iter().any(|x| !x.is_finite()) {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some(var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planned_and_blocked_resamples_agree() {
        let n = 300;
        let u: Vec<f64> = (0..n).map(|i| (i as f64 * 0.11).sin()).collect();
        let bs = Bootstrap { resamples: 50, seed: 9 };
        let plan = bs.plan(n).unwrap();
        let (a, b) = bs.standard_errors(&u, &u, Some(&plan));
        let (c, d) = bs.standard_errors(&u, &u, None);
        approx::assert_relative_eq!(a.unwrap(), c.unwrap(), max_relative = 1e-12);
        approx::assert_relative_eq!(b.unwrap(), d.unwrap(), max_relative = 1e-12);
    }

    #[test]
    fn every_replicate_has_n_draws() {
        let plan = Bootstrap { resamples: 7, seed: 1 }.plan(40).unwrap();
        for r in 0..7 {
            assert_eq!(plan.counts.row(r).sum(), 40.0);
        }
    }
}
