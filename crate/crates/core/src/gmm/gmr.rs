//! Gaussian mixture regression.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::mixture::{log_sum_exp, Gmm};
use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

struct Conditional {
    log_weight: f64,
    mu_in: DVector<f64>,
    chol_in: Cholesky<f64, Dyn>,
    log_norm: f64,
    mu_out: DVector<f64>,
    /// `Sigma_OI Sigma_II^-1`
    gain: DMatrix<f64>,
    sigma_out: DMatrix<f64>,
}

/// Per-component conditioning terms, precomputed for repeated queries.
pub struct Conditioner {
    parts: Vec<Conditional>,
    in_dims: Vec<usize>,
    out_dim: usize,
}

fn block(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |r, c| m[(rows[r], cols[c])])
}

fn pick(v: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_fn(idx.len(), |i, _| v[idx[i]])
}

impl Conditioner {
    pub fn new(gmm: &Gmm, in_dims: &[usize], out_dims: &[usize]) -> Result<Self> {
        let d = gmm.dim();
        if in_dims.is_empty() || out_dims.is_empty() {
            return Err(Error::invalid(
                "input and output dimensions must be nonempty",
            ));
        }
        let mut seen = vec![false; d];
        for &i in in_dims.iter().chain(out_dims) {
            if i >= d || seen[i] {
                return Err(Error::invalid(
                    "dimensions must be distinct and within the model",
                ));
            }
            seen[i] = true;
        }
        let mut parts = Vec::with_capacity(gmm.k());
        for (w, g) in gmm.weights().iter().zip(gmm.components()) {
            let s = g.sigma();
            let s_ii = block(s, in_dims, in_dims);
            let s_oi = block(s, out_dims, in_dims);
            let s_oo = block(s, out_dims, out_dims);
            let chol_in = Cholesky::new(s_ii)
                .ok_or_else(|| Error::Conditioning("input covariance block is singular".into()))?;
            let log_det = 2.0
                * chol_in
                    .l_dirty()
                    .diagonal()
                    .iter()
                    .map(|v| v.ln())
                    .sum::<f64>();
            let gain = chol_in.solve(&s_oi.transpose()).transpose();
            let sigma_out = &s_oo - &gain * s_oi.transpose();
            parts.push(Conditional {
                log_weight: w.ln(),
                mu_in: pick(g.mu(), in_dims),
                log_norm: -0.5 * (in_dims.len() as f64 * LN_2PI + log_det),
                chol_in,
                mu_out: pick(g.mu(), out_dims),
                gain,
                sigma_out: (&sigma_out + sigma_out.transpose()) * 0.5,
            });
        }
        Ok(Self {
            parts,
            in_dims: in_dims.to_vec(),
            out_dim: out_dims.len(),
        })
    }

    /// Moment-matched Gaussian approximation of `p(out | in = x)`.
    pub fn condition(&self, x: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        if x.len() != self.in_dims.len() {
            return Err(Error::invalid("input has the wrong dimension"));
        }
        let mut log_h = Vec::with_capacity(self.parts.len());
        let mut means = Vec::with_capacity(self.parts.len());
        for p in &self.parts {
            let diff = x - &p.mu_in;
            let z = p
                .chol_in
                .l_dirty()
                .solve_lower_triangular(&diff)
                .ok_or_else(|| Error::Conditioning("triangular solve failed".into()))?;
            log_h.push(p.log_weight + p.log_norm - 0.5 * z.norm_squared());
            means.push(&p.mu_out + &p.gain * diff);
        }
        let lse = log_sum_exp(log_h.iter().copied());
        if !lse.is_finite() {
            return Err(Error::Conditioning(
                "input has zero density under every component".into(),
            ));
        }
        let mut mean = DVector::zeros(self.out_dim);
        let mut second = DMatrix::zeros(self.out_dim, self.out_dim);
        for ((lh, m), p) in log_h.iter().zip(&means).zip(&self.parts) {
            let h = (lh - lse).exp();
            mean.axpy(h, m, 1.0);
            second += (&p.sigma_out + m * m.transpose()) * h;
        }
        let cov = second - &mean * mean.transpose();
        Ok((mean, (&cov + cov.transpose()) * 0.5))
    }
}

/// Conditions the mixture on `x_in` at `in_dims`, returning mean and
/// covariance over `out_dims`.
pub fn gmr_condition(
    gmm: &Gmm,
    in_dims: &[usize],
    out_dims: &[usize],
    x_in: &DVector<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    Conditioner::new(gmm, in_dims, out_dims)?.condition(x_in)
}
