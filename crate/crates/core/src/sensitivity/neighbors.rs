use serde::{Deserialize, Serialize};

use crate::sampler::DrawMatrix;
use crate::{Error, Result};

/// How neighbourhoods in latent space are formed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborMode {
    /// All draws strictly closer than `ε`.
    EpsilonBall(f64),
    /// The draw itself plus its `k - 1` nearest others.
    Knn(usize),
    /// `Knn` with `k = ⌈√S⌉`.
    KnnSqrt,
}

/// Neighbourhood rule for the latent-marginal estimator.
///
/// Distances are Euclidean over the selected latent columns; with
/// `standardize` each column is first centered and scaled by its sample
/// mean and standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborSpec {
    pub mode: NeighborMode,
    #[serde(default = "yes")]
    pub standardize: bool,
    /// Latent columns spanning the space; all latent columns when `None`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub columns: Option<Vec<String>>,
}

fn yes() -> bool {
    true
}

impl Default for NeighborSpec {
    fn default() -> Self {
        NeighborSpec { mode: NeighborMode::KnnSqrt, standardize: true, columns: None }
    }
}

impl NeighborSpec {
    pub fn knn(k: usize) -> Self {
        NeighborSpec { mode: NeighborMode::Knn(k), ..Default::default() }
    }

    pub fn epsilon(eps: f64) -> Self {
        NeighborSpec { mode: NeighborMode::EpsilonBall(eps), ..Default::default() }
    }

    pub fn with_columns(mut self, columns: Vec<String>) -> Self {
        self.columns = Some(columns);
        self
    }

    pub fn unstandardized(mut self) -> Self {
        self.standardize = false;
        self
    }

    fn validate(&self, n_draws: usize) -> Result<()> {
        match self.mode {
            NeighborMode::EpsilonBall(e) if !(e > 0.0 && e.is_finite()) => {
                Err(Error::invalid(format!("epsilon must be positive, got {e}")))
            }
            NeighborMode::Knn(k) if k == 0 || k > n_draws => Err(Error::invalid(format!(
                "k must lie in [1, {n_draws}], got {k}"
            ))),
            _ => Ok(()),
        }
    }
}

/// Neighbour sets for every draw, each sorted by draw index.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborIndex {
    offsets: Vec<usize>,
    members: Vec<u32>,
}

impl NeighborIndex {
    /// Neighbour sets over the latent columns of `draws`.
    pub fn build(draws: &DrawMatrix, spec: &NeighborSpec) -> Result<Self> {
        let (latents, dim) = draws.latent_matrix(spec.columns.as_deref())?;
        NeighborIndex::from_latents(&latents, dim, spec)
    }

    /// Neighbour sets over a row-major `S × dim` matrix.
    pub fn from_latents(latents: &[f64], dim: usize, spec: &NeighborSpec) -> Result<Self> {
        if dim == 0 || latents.is_empty() || latents.len() % dim != 0 {
            return Err(Error::invalid("latent matrix must be non-empty S x L with L >= 1"));
        }
        let s_total = latents.len() / dim;
        if s_total > u32::MAX as usize {
            return Err(Error::invalid("too many draws for a neighbor index"));
        }
        spec.validate(s_total)?;
        let points = if spec.standardize { standardize(latents, dim) } else { latents.to_vec() };
        let mode = match spec.mode {
            NeighborMode::KnnSqrt => NeighborMode::Knn(((s_total as f64).sqrt().ceil() as usize).clamp(1, s_total)),
            m => m,
        };

        let sets = map_rows(s_total, |s| neighbors_of(&points, dim, s, mode));
        let mut offsets = Vec::with_capacity(s_total + 1);
        offsets.push(0);
        let mut members = Vec::with_capacity(sets.iter().map(Vec::len).sum());
        for set in sets {
            members.extend(set);
            offsets.push(members.len());
        }
        Ok(NeighborIndex { offsets, members })
    }

    pub fn n_draws(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn neighbors(&self, s: usize) -> &[u32] {
        &self.members[self.offsets[s]..self.offsets[s + 1]]
    }

    pub fn median_size(&self) -> f64 {
        let mut sizes: Vec<usize> = self.offsets.windows(2).map(|w| w[1] - w[0]).collect();
        sizes.sort_unstable();
        let n = sizes.len();
        if n % 2 == 1 {
            sizes[n / 2] as f64
        } else {
            0.5 * (sizes[n / 2 - 1] + sizes[n / 2]) as f64
        }
    }
}

/// Neighbour set of a single draw `s`, sorted by index.
pub fn neighbor_index(latents: &[f64], dim: usize, s: usize, spec: &NeighborSpec) -> Result<Vec<usize>> {
    if dim == 0 || latents.len() % dim != 0 || s >= latents.len() / dim {
        return Err(Error::invalid("draw index out of range or malformed latent matrix"));
    }
    let s_total = latents.len() / dim;
    spec.validate(s_total)?;
    let points = if spec.standardize { standardize(latents, dim) } else { latents.to_vec() };
    let mode = match spec.mode {
        NeighborMode::KnnSqrt => NeighborMode::Knn(((s_total as f64).sqrt().ceil() as usize).clamp(1, s_total)),
        m => m,
    };
    Ok(neighbors_of(&points, dim, s, mode).into_iter().map(|i| i as usize).collect())
}

fn standardize(latents: &[f64], dim: usize) -> Vec<f64> {
    let n = (latents.len() / dim) as f64;
    let mut mean = vec![0.0; dim];
    for row in latents.chunks_exact(dim) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; dim];
    for row in latents.chunks_exact(dim) {
        for j in 0..dim {
            var[j] += (row[j] - mean[j]).powi(2);
        }
    }
    let scale: Vec<f64> = var
        .iter()
        .map(|v| {
            let sd = if n > 1.0 { (v / (n - 1.0)).sqrt() } else { 0.0 };
            if sd > 0.0 { 1.0 / sd } else { 1.0 }
        })
        .collect();
    latents
        .chunks_exact(dim)
        .flat_map(|row| (0..dim).map(|j| (row[j] - mean[j]) * scale[j]).collect::<Vec<_>>())
        .collect()
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn neighbors_of(points: &[f64], dim: usize, s: usize, mode: NeighborMode) -> Vec<u32> {
    let n = points.len() / dim;
    let me = &points[s * dim..(s + 1) * dim];
    match mode {
        NeighborMode::EpsilonBall(eps) => {
            let e2 = eps * eps;
            (0..n)
                .filter(|&r| r == s || sq_dist(me, &points[r * dim..(r + 1) * dim]) < e2)
                .map(|r| r as u32)
                .collect()
        }
        NeighborMode::Knn(k) => {
            let mut out = Vec::with_capacity(k);
            out.push(s as u32);
            if k > 1 {
                let mut cand: Vec<(f64, u32)> = (0..n)
                    .filter(|&r| r != s)
                    .map(|r| (sq_dist(me, &points[r * dim..(r + 1) * dim]), r as u32))
                    .collect();
                let take = k - 1;
                let cmp = |a: &(f64, u32), b: &(f64, u32)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
                if take < cand.len() {
                    cand.select_nth_unstable_by(take - 1, cmp);
                    cand.truncate(take);
                }
                out.extend(cand.into_iter().map(|(_, r)| r));
            }
            out.sort_unstable();
            out
        }
        NeighborMode::KnnSqrt => unreachable!("resolved before search"),
    }
}

#[cfg(feature = "parallel")]
fn map_rows<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_rows<T>(n: usize, f: impl Fn(usize) -> T) -> Vec<T> {
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epsilon_ball_membership() {
        let lat = [0.0, 0.05, 1.0];
        let spec = NeighborSpec::epsilon(0.1).unstandardized();
        assert_eq!(neighbor_index(&lat, 1, 0, &spec).unwrap(), vec![0, 1]);
        assert_eq!(neighbor_index(&lat, 1, 2, &spec).unwrap(), vec![2]);
    }

    #[test]
    fn knn_extremes() {
        let lat: Vec<f64> = (0..9).map(|i| ((i * 7) % 9) as f64 * 0.3).collect();
        let one = NeighborIndex::from_latents(&lat, 1, &NeighborSpec::knn(1)).unwrap();
        for s in 0..9 {
            assert_eq!(one.neighbors(s), &[s as u32]);
        }
        let all = NeighborIndex::from_latents(&lat, 1, &NeighborSpec::knn(9)).unwrap();
        for s in 0..9 {
            assert_eq!(all.neighbors(s), (0..9).collect::<Vec<u32>>().as_slice());
        }
    }

    #[test]
    fn knn_ties_prefer_lower_index_and_keep_self() {
        // Draws 0, 1, 3 coincide; 2 and 4 are equidistant from draw 3.
        let lat = [0.0, 0.0, 1.0, 0.0, -1.0];
        let spec = NeighborSpec::knn(2).unstandardized();
        assert_eq!(neighbor_index(&lat, 1, 3, &spec).unwrap(), vec![0, 3]);
        let spec = NeighborSpec::knn(4).unstandardized();
        assert_eq!(neighbor_index(&lat, 1, 3, &spec).unwrap(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn standardized_neighbors_ignore_column_scale() {
        let base: Vec<f64> = (0..40)
            .flat_map(|i| {
                let t = i as f64;
                [(t * 0.37).sin(), (t * 1.91).cos()]
            })
            .collect();
        let mut stretched = base.clone();
        stretched.iter_mut().skip(1).step_by(2).for_each(|v| *v *= 1000.0);
        let spec = NeighborSpec::knn(5);
        let a = NeighborIndex::from_latents(&base, 2, &spec).unwrap();
        let b = NeighborIndex::from_latents(&stretched, 2, &spec).unwrap();
        assert_eq!(a, b);
        let raw = spec.unstandardized();
        let a = NeighborIndex::from_latents(&base, 2, &raw).unwrap();
        let b = NeighborIndex::from_latents(&stretched, 2, &raw).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn sqrt_rule_and_median() {
        let lat: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let idx = NeighborIndex::from_latents(&lat, 1, &NeighborSpec::default()).unwrap();
        assert_eq!(idx.neighbors(10).len(), 8);
        assert_eq!(idx.median_size(), 8.0);
    }

    #[test]
    fn invalid_specs() {
        let lat = [0.0, 1.0];
        assert!(NeighborIndex::from_latents(&lat, 1, &NeighborSpec::knn(0)).is_err());
        assert!(NeighborIndex::from_latents(&lat, 1, &NeighborSpec::knn(3)).is_err());
        assert!(NeighborIndex::from_latents(&lat, 1, &NeighborSpec::epsilon(0.0)).is_err());
    }
}
