use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Multivariate normal distribution with a positive definite covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian {
    mu: DVector<f64>,
    sigma: DMatrix<f64>,
}

impl Gaussian {
    /// Builds a Gaussian, symmetrizing `sigma` and checking it is positive definite.
    pub fn new(mu: DVector<f64>, sigma: DMatrix<f64>) -> Result<Self> {
        let d = mu.len();
        if d == 0 || sigma.shape() != (d, d) {
            return Err(Error::invalid(format!(
                "mean of length {d} does not match covariance {:?}",
                sigma.shape()
            )));
        }
        if !mu.iter().chain(sigma.iter()).all(|v| v.is_finite()) {
            return Err(Error::invalid("Gaussian parameters must be finite"));
        }
        let asym = (&sigma - sigma.transpose()).amax();
        if asym > 1e-12 * sigma.amax().max(1.0) {
            return Err(Error::invalid(format!(
                "covariance not symmetric (|S - S^T| = {asym:e})"
            )));
        }
        let sigma = (&sigma + sigma.transpose()) * 0.5;
        if Cholesky::new(sigma.clone()).is_none() {
            return Err(Error::Fit("covariance is not positive definite".into()));
        }
        Ok(Self { mu, sigma })
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.sigma.clone().symmetric_eigenvalues().min()
    }

    /// Precomputed factorization for repeated density evaluation.
    pub fn density(&self) -> Density {
        let chol = Cholesky::new(self.sigma.clone()).expect("covariance checked at construction");
        let log_det = 2.0
            * chol
                .l_dirty()
                .diagonal()
                .iter()
                .map(|v| v.ln())
                .sum::<f64>();
        Density {
            mu: self.mu.clone(),
            chol,
            log_norm: -0.5 * (self.dim() as f64 * LN_2PI + log_det),
        }
    }

    pub fn log_pdf(&self, x: &DVector<f64>) -> f64 {
        self.density().log_pdf(x)
    }

    /// Image under `x -> A x + b`.
    pub fn transform(&self, a: &DMatrix<f64>, b: &DVector<f64>) -> Result<Self> {
        let sigma = a * &self.sigma * a.transpose();
        Self::new(a * &self.mu + b, (&sigma + sigma.transpose()) * 0.5)
    }

    /// Normalized product of Gaussians: precisions add, means are
    /// precision-weighted.
    pub fn product(parts: &[Gaussian]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::invalid("product of zero Gaussians"))?;
        let d = first.dim();
        let mut precision = DMatrix::zeros(d, d);
        let mut info = DVector::zeros(d);
        for g in parts {
            let p = g
                .sigma
                .clone()
                .cholesky()
                .ok_or_else(|| Error::Combination("covariance not invertible".into()))?
                .inverse();
            info += &p * &g.mu;
            precision += p;
        }
        let precision = (&precision + precision.transpose()) * 0.5;
        let chol = precision
            .cholesky()
            .ok_or_else(|| Error::Combination("combined precision not invertible".into()))?;
        let sigma = chol.inverse();
        let mu = chol.solve(&info);
        Self::new(mu, (&sigma + sigma.transpose()) * 0.5)
            .map_err(|e| Error::Combination(e.to_string()))
    }
}

/// Cholesky-factored Gaussian for fast log-density evaluation.
#[derive(Debug, Clone)]
pub struct Density {
    mu: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    log_norm: f64,
}

impl Density {
    pub fn log_pdf(&self, x: &DVector<f64>) -> f64 {
        let diff = x - &self.mu;
        let z = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&diff)
            .expect("Cholesky factor has a positive diagonal");
        self.log_norm - 0.5 * z.norm_squared()
    }
}

#[derive(Serialize, Deserialize)]
pub(crate) struct GaussianJson {
    pub mu: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
}

impl From<&Gaussian> for GaussianJson {
    fn from(g: &Gaussian) -> Self {
        Self {
            mu: g.mu.iter().copied().collect(),
            sigma: g
                .sigma
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect(),
        }
    }
}

impl TryFrom<GaussianJson> for Gaussian {
    type Error = Error;

    fn try_from(j: GaussianJson) -> Result<Self> {
        let d = j.mu.len();
        if j.sigma.len() != d || j.sigma.iter().any(|r| r.len() != d) {
            return Err(Error::invalid("covariance must be D x D"));
        }
        let sigma = DMatrix::from_fn(d, d, |r, c| j.sigma[r][c]);
        Gaussian::new(DVector::from_vec(j.mu), sigma)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_normal_density_at_zero() {
        let g = Gaussian::new(DVector::zeros(2), DMatrix::identity(2, 2)).unwrap();
        assert!((g.log_pdf(&DVector::zeros(2)) + LN_2PI).abs() < 1e-14);
    }

    #[test]
    fn rejects_indefinite() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(Gaussian::new(DVector::zeros(2), s).is_err());
    }

    #[test]
    fn product_of_equal_halves_covariance() {
        let s = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let g = Gaussian::new(DVector::from_vec(vec![0.5, -1.0]), s.clone()).unwrap();
        let p = Gaussian::product(&[g.clone(), g.clone()]).unwrap();
        assert!((p.sigma() - s * 0.5).amax() < 1e-12);
        assert!((p.mu() - g.mu()).amax() < 1e-12);
    }
}
