//! Expectation-maximization for single- and multi-frame mixtures.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gaussian::Gaussian;
use super::mixture::{log_sum_exp, Gmm};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmInit {
    /// Equal-count bins along dimension 0, for data whose first column is time.
    TimeBins,
    /// Seeded k-means++ followed by a few Lloyd iterations.
    KMeansPlusPlus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmOptions {
    pub k: usize,
    /// Added to every covariance diagonal after each M-step.
    pub epsilon: f64,
    pub max_iter: usize,
    /// Stop once the mean per-sample log-likelihood improves by less than this.
    pub tol: f64,
    pub seed: u64,
    pub init: EmInit,
}

impl EmOptions {
    pub fn new(k: usize, epsilon: f64) -> Self {
        Self {
            k,
            epsilon,
            max_iter: 200,
            tol: 1e-8,
            seed: 0,
            init: EmInit::KMeansPlusPlus,
        }
    }

    pub fn with_init(mut self, init: EmInit) -> Self {
        self.init = init;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmFit {
    pub gmm: Gmm,
    /// Total log-likelihood after every E-step.
    pub log_likelihood: Vec<f64>,
    pub converged: bool,
}

/// Fits a `K`-component mixture to the samples.
pub fn em_fit(data: &[DVector<f64>], opts: &EmOptions) -> Result<EmFit> {
    let fit = em_multi(std::slice::from_ref(&data.to_vec()), opts)?;
    let mut frames = fit.frames;
    Ok(EmFit {
        gmm: Gmm::new(fit.weights, frames.remove(0))?,
        log_likelihood: fit.log_likelihood,
        converged: fit.converged,
    })
}

pub(crate) struct MultiFit {
    pub weights: Vec<f64>,
    pub frames: Vec<Vec<Gaussian>>,
    pub log_likelihood: Vec<f64>,
    pub converged: bool,
}

/// EM over `P` views of the same samples: `frames[j][n]` is sample `n` in
/// frame `j`. Responsibilities use the product of the per-frame likelihoods;
/// each frame's components are re-estimated from its own view.
pub(crate) fn em_multi(frames: &[Vec<DVector<f64>>], opts: &EmOptions) -> Result<MultiFit> {
    let k = opts.k;
    let n = frames.first().map(Vec::len).unwrap_or(0);
    if k == 0 {
        return Err(Error::invalid("K must be >= 1"));
    }
    if n <= k {
        return Err(Error::Fit(format!(
            "need more samples than components (N = {n}, K = {k})"
        )));
    }
    if !(opts.epsilon >= 0.0 && opts.epsilon.is_finite()) {
        return Err(Error::invalid("epsilon must be >= 0"));
    }
    for f in frames {
        if f.len() != n {
            return Err(Error::invalid("every frame must hold the same samples"));
        }
        let d = f[0].len();
        if f.iter()
            .any(|x| x.len() != d || !x.iter().all(|v| v.is_finite()))
        {
            return Err(Error::invalid(
                "samples must be finite and of equal dimension",
            ));
        }
    }

    let mut resp = match opts.init {
        EmInit::TimeBins => time_bin_assignment(&frames[0], k),
        EmInit::KMeansPlusPlus => kmeans_assignment(&frames[0], k, opts.seed)?,
    };
    let mut trace = Vec::new();
    let mut converged = false;
    let (mut weights, mut comps) = m_step(frames, &resp, opts.epsilon)?;
    for _ in 0..opts.max_iter {
        let (r, ll) = e_step(frames, &weights, &comps);
        resp = r;
        let improved = trace.last().map(|prev: &f64| (ll - prev) / n as f64);
        trace.push(ll);
        if matches!(improved, Some(d) if d < opts.tol) {
            converged = true;
            break;
        }
        (weights, comps) = m_step(frames, &resp, opts.epsilon)?;
    }
    Ok(MultiFit {
        weights,
        frames: comps,
        log_likelihood: trace,
        converged,
    })
}

/// Row-major `N x K` responsibility matrix.
type Resp = DMatrix<f64>;

fn time_bin_assignment(data: &[DVector<f64>], k: usize) -> Resp {
    let n = data.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| data[a][0].total_cmp(&data[b][0]));
    let mut r = DMatrix::zeros(n, k);
    for (rank, &i) in order.iter().enumerate() {
        r[(i, (rank * k / n).min(k - 1))] = 1.0;
    }
    r
}

fn kmeans_assignment(data: &[DVector<f64>], k: usize, seed: u64) -> Result<Resp> {
    let n = data.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = vec![data[rng.random_range(0..n)].clone()];
    while centers.len() < k {
        let d2: Vec<f64> = data
            .iter()
            .map(|x| {
                centers
                    .iter()
                    .map(|c| (x - c).norm_squared())
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let total: f64 = d2.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Fit("fewer distinct samples than components".into()));
        }
        let mut u = rng.random::<f64>() * total;
        let mut pick = n - 1;
        for (i, w) in d2.iter().enumerate() {
            if u < *w {
                pick = i;
                break;
            }
            u -= w;
        }
        centers.push(data[pick].clone());
    }
    let nearest = |x: &DVector<f64>, centers: &[DVector<f64>]| {
        (0..k)
            .min_by(|&a, &b| {
                (x - &centers[a])
                    .norm_squared()
                    .total_cmp(&(x - &centers[b]).norm_squared())
            })
            .unwrap()
    };
    let mut labels: Vec<usize> = data.iter().map(|x| nearest(x, &centers)).collect();
    for _ in 0..10 {
        for (c, center) in centers.iter_mut().enumerate() {
            let members: Vec<&DVector<f64>> = data
                .iter()
                .zip(&labels)
                .filter(|(_, &l)| l == c)
                .map(|(x, _)| x)
                .collect();
            if !members.is_empty() {
                *center = members
                    .iter()
                    .fold(DVector::zeros(data[0].len()), |acc, x| acc + *x)
                    / members.len() as f64;
            }
        }
        let next: Vec<usize> = data.iter().map(|x| nearest(x, &centers)).collect();
        if next == labels {
            break;
        }
        labels = next;
    }
    let mut r = DMatrix::zeros(n, k);
    for (i, &l) in labels.iter().enumerate() {
        r[(i, l)] = 1.0;
    }
    Ok(r)
}

fn m_step(
    frames: &[Vec<DVector<f64>>],
    resp: &Resp,
    epsilon: f64,
) -> Result<(Vec<f64>, Vec<Vec<Gaussian>>)> {
    let (n, k) = resp.shape();
    let counts: Vec<f64> = (0..k).map(|c| resp.column(c).sum()).collect();
    if let Some(c) = counts.iter().position(|&nk| !(nk > 1e-10)) {
        return Err(Error::Fit(format!("component {c} lost all support")));
    }
    let total: f64 = counts.iter().sum();
    let weights: Vec<f64> = counts.iter().map(|nk| nk / total).collect();
    let mut out = Vec::with_capacity(frames.len());
    for data in frames {
        let d = data[0].len();
        let mut comps = Vec::with_capacity(k);
        for c in 0..k {
            let mut mu = DVector::zeros(d);
            for i in 0..n {
                mu.axpy(resp[(i, c)], &data[i], 1.0);
            }
            mu /= counts[c];
            let mut sigma = DMatrix::zeros(d, d);
            for i in 0..n {
                let diff = &data[i] - &mu;
                sigma.ger(resp[(i, c)], &diff, &diff, 1.0);
            }
            sigma /= counts[c];
            for j in 0..d {
                sigma[(j, j)] += epsilon;
            }
            let sigma = (&sigma + sigma.transpose()) * 0.5;
            let g = Gaussian::new(mu, sigma).map_err(|_| {
                Error::Fit(format!(
                    "covariance of component {c} is not positive definite"
                ))
            })?;
            comps.push(g);
        }
        out.push(comps);
    }
    Ok((weights, out))
}

fn e_step(frames: &[Vec<DVector<f64>>], weights: &[f64], comps: &[Vec<Gaussian>]) -> (Resp, f64) {
    let n = frames[0].len();
    let k = weights.len();
    let dens: Vec<Vec<_>> = comps
        .iter()
        .map(|f| f.iter().map(Gaussian::density).collect())
        .collect();
    let mut r = DMatrix::zeros(n, k);
    let mut ll = 0.0;
    let mut row = vec![0.0; k];
    for i in 0..n {
        for (c, v) in row.iter_mut().enumerate() {
            *v = weights[c].ln()
                + dens
                    .iter()
                    .zip(frames)
                    .map(|(fd, data)| fd[c].log_pdf(&data[i]))
                    .sum::<f64>();
        }
        let lse = log_sum_exp(row.iter().copied());
        ll += lse;
        for c in 0..k {
            r[(i, c)] = (row[c] - lse).exp();
        }
    }
    (r, ll)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn time_bins_are_contiguous() {
        let data: Vec<DVector<f64>> = (0..10)
            .rev()
            .map(|i| DVector::from_vec(vec![i as f64]))
            .collect();
        let r = time_bin_assignment(&data, 3);
        // data[9] has the smallest time and lands in bin 0
        assert_eq!(r[(9, 0)], 1.0);
        assert_eq!(r[(0, 2)], 1.0);
        assert_eq!(r.sum(), 10.0);
    }

    #[test]
    fn too_few_samples_rejected() {
        let data = vec![DVector::from_vec(vec![0.0]), DVector::from_vec(vec![1.0])];
        assert!(matches!(
            em_fit(&data, &EmOptions::new(2, 1e-3)),
            Err(Error::Fit(_))
        ));
    }
}
