//! Dynamic movement primitives.
//!
//! Each spatial dimension is an independent critically damped attractor
//!
//! ```text
//! tau z' = alpha_z (beta_z (r - y) - z) + f
//! tau y' = z
//! tau r' = (g - s) / M
//! ```
//!
//! driven by a goal `r` that ramps linearly from the start `s` to the goal
//! `g` over the `M = T / dt` samples of the movement. System time is counted
//! in samples, so the Euler step is one sample. The forcing term `f` is a
//! normalized mixture of `K` Gaussian kernels over the phase `t / T`, whose
//! weights are learned with the delta rule at the kernel centers.

mod generalize;

pub use generalize::{dmp_generalize, minimal_norm_coefficients, AxisMask, DmpGeneralization};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::traj::Trajectory;

/// Kernel width constant that minimized reconstruction error on human data.
pub fn default_kappa(kernels: usize) -> f64 {
    if kernels <= 10 {
        0.7
    } else {
        1.1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmpConfig {
    pub alpha_z: f64,
    pub beta_z: f64,
    /// Carried for completeness; the attractor equations do not use it.
    pub alpha_g: f64,
    pub tau: f64,
    pub kernels: usize,
    /// Total kernel width; each kernel has `sigma = kappa / K`.
    pub kappa: f64,
    pub learn_iters: usize,
    pub learning_rate: f64,
}

impl DmpConfig {
    pub fn new(kernels: usize) -> Self {
        Self {
            alpha_z: 0.75,
            beta_z: 0.1875,
            alpha_g: 1.0,
            tau: 1.0,
            kernels,
            kappa: default_kappa(kernels),
            learn_iters: 200,
            learning_rate: 0.1,
        }
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        self
    }

    pub fn with_learn_iters(mut self, iters: usize) -> Self {
        self.learn_iters = iters;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernels < 2 {
            return Err(Error::invalid(format!(
                "DMP needs K >= 2 kernels, got {}",
                self.kernels
            )));
        }
        if !(self.kappa > 0.0) || !(self.learning_rate > 0.0) {
            return Err(Error::invalid("kappa and learning rate must be positive"));
        }
        if !(self.alpha_z > 0.0 && self.beta_z > 0.0 && self.tau > 0.0) {
            return Err(Error::invalid("attractor gains and tau must be positive"));
        }
        Ok(())
    }
}

/// An encoded movement: per-dimension kernel weights plus the attractor setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmpModel {
    pub alpha_z: f64,
    pub beta_z: f64,
    pub tau: f64,
    #[serde(rename = "K")]
    pub kernels: usize,
    pub kappa: f64,
    pub centers: Vec<f64>,
    pub sigma: f64,
    /// One weight vector of length `K` per spatial dimension.
    pub weights: [Vec<f64>; 3],
    pub start: [f64; 3],
    pub goal: [f64; 3],
    #[serde(rename = "T")]
    pub duration: f64,
    pub dt: f64,
}

/// Equally spaced kernel centers spanning `[0, 1]`.
fn kernel_centers(k: usize) -> Vec<f64> {
    (0..k).map(|i| i as f64 / (k - 1) as f64).collect()
}

impl DmpModel {
    /// A model with all weights zero: a pure critically damped reach.
    pub fn zero(
        cfg: &DmpConfig,
        start: Vector3<f64>,
        goal: Vector3<f64>,
        duration: f64,
        dt: f64,
    ) -> Result<Self> {
        cfg.validate()?;
        if !(duration > 0.0 && dt > 0.0) {
            return Err(Error::invalid("duration and dt must be positive"));
        }
        Ok(Self {
            alpha_z: cfg.alpha_z,
            beta_z: cfg.beta_z,
            tau: cfg.tau,
            kernels: cfg.kernels,
            kappa: cfg.kappa,
            centers: kernel_centers(cfg.kernels),
            sigma: cfg.kappa / cfg.kernels as f64,
            weights: [
                vec![0.0; cfg.kernels],
                vec![0.0; cfg.kernels],
                vec![0.0; cfg.kernels],
            ],
            start: start.into(),
            goal: goal.into(),
            duration,
            dt,
        })
    }

    /// Number of learned parameters, `3 K`.
    pub fn param_count(&self) -> usize {
        3 * self.kernels
    }

    pub fn start(&self) -> Vector3<f64> {
        Vector3::from(self.start)
    }

    pub fn goal(&self) -> Vector3<f64> {
        Vector3::from(self.goal)
    }

    /// Samples in the goal ramp.
    fn ramp_steps(&self) -> usize {
        ((self.duration / self.dt).round() as usize).max(1)
    }

    /// Normalized kernel activations for each of `n_steps` integration steps.
    fn basis(&self, n_steps: usize) -> Vec<Vec<f64>> {
        let ramp = self.ramp_steps() as f64;
        let denom = 2.0 * self.sigma * self.sigma;
        (0..n_steps)
            .map(|k| {
                let phase = (k as f64 / ramp).min(1.0);
                let mut psi: Vec<f64> = self
                    .centers
                    .iter()
                    .map(|c| (-(phase - c) * (phase - c) / denom).exp())
                    .collect();
                let total: f64 = psi.iter().sum();
                psi.iter_mut().for_each(|p| *p /= total);
                psi
            })
            .collect()
    }

    /// Euler rollout of `n_steps` samples from `start` toward `goal`.
    pub fn integrate(
        &self,
        start: Vector3<f64>,
        goal: Vector3<f64>,
        n_steps: usize,
    ) -> Result<Trajectory> {
        if n_steps < 2 {
            return Err(Error::invalid(format!(
                "integration needs n_steps >= 2, got {n_steps}"
            )));
        }
        let basis = self.basis(n_steps);
        Trajectory::new(self.rollout(&basis, start, goal), self.dt)
    }

    fn rollout(
        &self,
        basis: &[Vec<f64>],
        start: Vector3<f64>,
        goal: Vector3<f64>,
    ) -> Vec<Vector3<f64>> {
        let ramp = self.ramp_steps() as f64;
        let mut out = Vec::with_capacity(basis.len());
        let mut y = start;
        let mut z = Vector3::zeros();
        for (k, psi) in basis.iter().enumerate() {
            out.push(y);
            let r = start + (goal - start) * (k as f64 / ramp).min(1.0);
            let f = Vector3::from_fn(|d, _| {
                psi.iter()
                    .zip(&self.weights[d])
                    .map(|(p, w)| p * w)
                    .sum::<f64>()
            });
            let dz = (self.alpha_z * (self.beta_z * (r - y) - z) + f) / self.tau;
            let dy = z / self.tau;
            z += dz;
            y += dy;
        }
        out
    }

    /// Rollout between the model's own start and goal.
    pub fn reproduce(&self, n_steps: usize) -> Result<Trajectory> {
        self.integrate(self.start(), self.goal(), n_steps)
    }
}

/// Encodes a demonstration with the delta rule.
///
/// Weights start at zero; each round integrates the current model and moves
/// every weight by `mu (gamma(c_i) - y(c_i))`, with both trajectories read at
/// the sample nearest to the kernel center.
pub fn dmp_encode(traj: &Trajectory, cfg: &DmpConfig) -> Result<DmpModel> {
    cfg.validate()?;
    let mut model = DmpModel::zero(cfg, traj.start(), traj.end(), traj.duration(), traj.dt())?;
    let n = traj.len();
    let basis = model.basis(n);
    let center_idx: Vec<usize> = model
        .centers
        .iter()
        .map(|c| ((c * (n - 1) as f64).round() as usize).min(n - 1))
        .collect();
    let demo = traj.positions();
    for _ in 0..cfg.learn_iters {
        let y = model.rollout(&basis, traj.start(), traj.end());
        for (i, &idx) in center_idx.iter().enumerate() {
            let err = demo[idx] - y[idx];
            for d in 0..3 {
                model.weights[d][i] += cfg.learning_rate * err[d];
            }
        }
    }
    Ok(model)
}
