use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::{LogDensity, LN_2PI};
use crate::{Error, Result};

/// Diagonal jitter tried in order before a factorization is declared failed.
pub const JITTER_LADDER: [f64; 4] = [0.0, 1e-10, 1e-8, 1e-6];

/// Symmetric positive-semidefinite covariance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CovMatrix(DMatrix<f64>);

impl CovMatrix {
    /// Wraps a square matrix, symmetrizing it as `(A + Aᵀ)/2`.
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::invalid(format!(
                "covariance must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("covariance has non-finite entries"));
        }
        let sym = (&m + m.transpose()) * 0.5;
        Ok(CovMatrix(sym))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    /// `scale * self + shift * I`.
    pub fn scale_shift(&self, scale: f64, shift: f64) -> CovMatrix {
        let mut m = &self.0 * scale;
        for i in 0..m.nrows() {
            m[(i, i)] += shift;
        }
        CovMatrix(m)
    }
}

/// Exponential correlation `exp(-|xᵢ - xⱼ| / ψ)`.
pub fn exp_correlation_matrix(xs: &[f64], psi: f64) -> Result<CovMatrix> {
    if !(psi > 0.0 && psi.is_finite()) {
        return Err(Error::invalid(format!("range parameter must be positive, got {psi}")));
    }
    let n = xs.len();
    let mut m = DMatrix::from_element(n, n, 1.0);
    for i in 0..n {
        for j in 0..i {
            let r = (-(xs[i] - xs[j]).abs() / psi).exp();
            m[(i, j)] = r;
            m[(j, i)] = r;
        }
    }
    Ok(CovMatrix(m))
}

/// Cholesky factor of `cov + jitter * I` for the first jitter on the ladder
/// that succeeds. Returns the factor together with the jitter used.
pub fn cholesky_with_jitter(cov: &CovMatrix) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let mut last = 0.0;
    for &jitter in &JITTER_LADDER {
        last = jitter;
        let m = if jitter == 0.0 {
            cov.0.clone()
        } else {
            cov.scale_shift(1.0, jitter).0
        };
        if let Some(ch) = Cholesky::new(m) {
            // Require a strictly positive, finite diagonal.
            let l = ch.l_dirty();
            if (0..l.nrows()).all(|i| l[(i, i)] > 0.0 && l[(i, i)].is_finite()) {
                return Ok((ch, jitter));
            }
        }
    }
    Err(Error::Factorization { jitter: last, context: None })
}

/// Zero-mean multivariate normal log density computed from a triangular
/// factorization.
pub fn log_mvn_zero_mean_pdf(y: &[f64], cov: &CovMatrix) -> Result<LogDensity> {
    if y.len() != cov.dim() {
        return Err(Error::invalid(format!(
            "vector length {} does not match covariance dimension {}",
            y.len(),
            cov.dim()
        )));
    }
    let (ch, _) = cholesky_with_jitter(cov)?;
    Ok(log_mvn_from_cholesky(y, &ch))
}

pub(crate) fn log_mvn_from_cholesky(y: &[f64], ch: &Cholesky<f64, Dyn>) -> LogDensity {
    let l = ch.l_dirty();
    let n = y.len();
    let log_det: f64 = 2.0 * (0..n).map(|i| l[(i, i)].ln()).sum::<f64>();
    let mut z = DVector::from_column_slice(y);
    // Forward substitution against the lower factor only.
    for i in 0..n {
        let mut acc = z[i];
        for k in 0..i {
            acc -= l[(i, k)] * z[k];
        }
        z[i] = acc / l[(i, i)];
    }
    -0.5 * (n as f64 * LN_2PI + log_det + z.norm_squared())
}
