use std::collections::BTreeMap;

use nalgebra::{DVector, Matrix6, Vector3, Vector6};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::model::{seds_integrate, IntegrationMode, SedsModel, SedsRollout};
use super::optim::{Lbfgs, OptimStatus, Optimizer};
use crate::error::{Error, Result};
use crate::gmm::{em_fit, EmOptions};
use crate::traj::{lowpass_filter, Trajectory};

/// Parameters per component: logit, mean, covariance factor, `L`, `W`.
const PER: usize = 1 + 6 + 21 + 21 + 15;
const OFF_MU: usize = 1;
const OFF_C: usize = 7;
const OFF_L: usize = 28;
const OFF_W: usize = 49;

/// Demos must end this close to the goal.
const GOAL_TOLERANCE: f64 = 0.05;
/// Cutoff of the filter applied before differentiating demonstrations.
const VELOCITY_FILTER_HZ: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SedsFitOptions {
    pub k: usize,
    /// Failed trials at one regularization level before it is raised.
    pub max_retries: usize,
    /// Total trials before giving up.
    pub retry_budget: usize,
    /// Relative scale of the perturbation applied to the initialization on retries.
    pub noise: f64,
    /// Initial covariance diagonal bias.
    pub mat_bias: f64,
    /// Multiplier applied to the bias after `max_retries` failures.
    pub bias_factor: f64,
    pub path_gate: f64,
    pub end_gate: f64,
    /// Lower bound of `-(A + A^T)/2` eigenvalues in the initial guess, 1/s.
    pub init_contraction: f64,
    /// Floor of `-(A + A^T)/2` eigenvalues during optimization.
    pub margin: f64,
    /// Velocities are divided by this in the state, 1/s.
    pub velocity_scale: f64,
    pub seed: u64,
}

impl SedsFitOptions {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            max_retries: 5,
            retry_budget: 15,
            noise: 0.1,
            mat_bias: 1e-6,
            bias_factor: 10.0,
            path_gate: 0.02,
            end_gate: 0.005,
            init_contraction: 1.0,
            margin: 1e-6,
            velocity_scale: 10.0,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("K must be at least 1"));
        }
        if self.retry_budget == 0 || self.max_retries == 0 {
            return Err(Error::invalid(
                "retry budget and retries per level must be positive",
            ));
        }
        let positive = [
            self.mat_bias,
            self.bias_factor,
            self.path_gate,
            self.end_gate,
            self.margin,
            self.velocity_scale,
        ];
        if positive.iter().any(|v| !(*v > 0.0))
            || !(self.noise >= 0.0)
            || !(self.init_contraction >= 0.0)
        {
            return Err(Error::invalid("gates, biases and scales must be positive"));
        }
        Ok(())
    }

    /// Bias used after `failures` failed trials.
    pub fn bias_for(&self, failures: usize) -> f64 {
        self.mat_bias * self.bias_factor.powi((failures / self.max_retries) as i32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gate {
    /// EM could not produce a starting point.
    Initialization,
    /// The optimizer hit a non-finite value.
    Solver,
    /// The rollout strayed too far from the first demonstration.
    Path,
    /// The rollout ended too far from the first demonstration's end.
    EndPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateResiduals {
    pub path: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureReport {
    pub trials: usize,
    pub last_gate: Gate,
    pub last_residuals: Option<GateResiduals>,
    pub mat_bias_schedule: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SedsFit {
    pub model: SedsModel,
    pub trials: usize,
    pub residuals: GateResiduals,
    pub mat_bias_schedule: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SedsOutcome {
    Fitted(SedsFit),
    Failed(FailureReport),
}

impl SedsOutcome {
    pub fn model(&self) -> Option<&SedsModel> {
        match self {
            SedsOutcome::Fitted(f) => Some(&f.model),
            SedsOutcome::Failed(_) => None,
        }
    }
}

/// Fits with the default optimizer.
pub fn seds_fit(
    demos: &[Trajectory],
    goal: Vector3<f64>,
    opts: &SedsFitOptions,
) -> Result<SedsOutcome> {
    seds_fit_with(demos, goal, opts, &Lbfgs::default())
}

/// Fits a stable system whose attractor is `goal` at rest.
///
/// Invalid inputs are errors; running out of trials is a [`SedsOutcome::Failed`].
pub fn seds_fit_with(
    demos: &[Trajectory],
    goal: Vector3<f64>,
    opts: &SedsFitOptions,
    optimizer: &dyn Optimizer,
) -> Result<SedsOutcome> {
    opts.validate()?;
    if demos.is_empty() {
        return Err(Error::invalid("SEDS needs at least one demonstration"));
    }
    for d in demos {
        if d.len() < 4 {
            return Err(Error::invalid(
                "SEDS demonstrations need at least 4 samples",
            ));
        }
        if (d.end() - goal).norm() > GOAL_TOLERANCE {
            return Err(Error::invalid(format!(
                "demonstration ends {:.3} m from the goal",
                (d.end() - goal).norm()
            )));
        }
    }
    let data = Samples::build(demos, goal, opts.velocity_scale)?;
    let reference = &demos[0];
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut inits: BTreeMap<u64, Option<Vec<f64>>> = BTreeMap::new();
    let mut schedule = Vec::with_capacity(opts.retry_budget);
    let mut last_gate = Gate::Initialization;
    let mut last_residuals = None;

    for trial in 0..opts.retry_budget {
        let bias = opts.bias_for(trial);
        schedule.push(bias);
        let base = inits
            .entry(bias.to_bits())
            .or_insert_with(|| initial_guess(&data, opts, bias).ok())
            .clone();
        let Some(mut theta) = base else {
            last_gate = Gate::Initialization;
            last_residuals = None;
            continue;
        };
        if trial > 0 && opts.noise > 0.0 {
            for v in theta.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v += opts.noise * z * (v.abs() + 0.01);
            }
        }
        let mut f = |x: &[f64], g: &mut [f64]| objective(x, g, &data, opts.k, bias, opts.margin);
        let result = optimizer.minimize(&mut f, theta);
        if result.status == OptimStatus::NumericalFailure || result.x.iter().any(|v| !v.is_finite())
        {
            last_gate = Gate::Solver;
            last_residuals = None;
            continue;
        }
        let model = match to_model(&result.x, opts, bias, goal) {
            Ok(m) => m,
            Err(_) => {
                last_gate = Gate::Solver;
                last_residuals = None;
                continue;
            }
        };
        let residuals = match seds_integrate(
            &model,
            reference.start(),
            IntegrationMode::until_converged(reference.duration()),
        ) {
            Ok(r) => gate_residuals(&r, reference),
            Err(_) => GateResiduals {
                path: f64::INFINITY,
                end: f64::INFINITY,
            },
        };
        if residuals.path >= opts.path_gate {
            last_gate = Gate::Path;
            last_residuals = Some(residuals);
            continue;
        }
        if residuals.end >= opts.end_gate {
            last_gate = Gate::EndPoint;
            last_residuals = Some(residuals);
            continue;
        }
        return Ok(SedsOutcome::Fitted(SedsFit {
            model,
            trials: trial + 1,
            residuals,
            mat_bias_schedule: schedule,
            objective: result.value,
        }));
    }
    Ok(SedsOutcome::Failed(FailureReport {
        trials: opts.retry_budget,
        last_gate,
        last_residuals,
        mat_bias_schedule: schedule,
    }))
}

/// Largest distance from either path to the other (Hausdorff distance of the
/// polylines) and the end-point distance.
pub fn gate_residuals(rollout: &SedsRollout, reference: &Trajectory) -> GateResiduals {
    let a = rollout.trajectory.positions();
    let b = reference.positions();
    let path = directed_distance(a, b).max(directed_distance(b, a));
    GateResiduals {
        path,
        end: (rollout.trajectory.end() - reference.end()).norm(),
    }
}

fn point_segment(p: &Vector3<f64>, a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 {
        ((p - a).dot(&ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p - (a + ab * t)).norm()
}

/// Largest distance from a sample of `from` to the polyline `to`.
fn directed_distance(from: &[Vector3<f64>], to: &[Vector3<f64>]) -> f64 {
    from.iter()
        .map(|p| {
            if to.len() == 1 {
                return (p - to[0]).norm();
            }
            to.windows(2)
                .map(|w| point_segment(p, &w[0], &w[1]))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// Training pairs in goal-shifted state coordinates.
struct Samples {
    x: Vec<Vector6<f64>>,
    y: Vec<Vector6<f64>>,
}

impl Samples {
    fn build(demos: &[Trajectory], goal: Vector3<f64>, scale: f64) -> Result<Self> {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for d in demos {
            let smooth = lowpass_filter(d, VELOCITY_FILTER_HZ)?;
            let vel = smooth.differentiate();
            let acc = Trajectory::new(vel.clone(), d.dt())?.differentiate();
            for ((p, v), a) in smooth.positions().iter().zip(&vel).zip(&acc) {
                let mut s = Vector6::zeros();
                s.fixed_rows_mut::<3>(0).copy_from(&(p - goal));
                s.fixed_rows_mut::<3>(3).copy_from(&(v / scale));
                let mut ds = Vector6::zeros();
                ds.fixed_rows_mut::<3>(0).copy_from(v);
                ds.fixed_rows_mut::<3>(3).copy_from(&(a / scale));
                x.push(s);
                y.push(ds);
            }
        }
        Ok(Self { x, y })
    }
}

fn lower_get(theta: &[f64], exp_diag: bool) -> Matrix6<f64> {
    let mut m = Matrix6::zeros();
    let mut idx = 0;
    for i in 0..6 {
        for j in 0..=i {
            m[(i, j)] = if exp_diag && i == j {
                theta[idx].exp()
            } else {
                theta[idx]
            };
            idx += 1;
        }
    }
    m
}

fn lower_put(m: &Matrix6<f64>, out: &mut [f64], log_diag: bool) {
    let mut idx = 0;
    for i in 0..6 {
        for j in 0..=i {
            out[idx] = if log_diag && i == j {
                m[(i, j)].ln()
            } else {
                m[(i, j)]
            };
            idx += 1;
        }
    }
}

fn strict_get(theta: &[f64]) -> Matrix6<f64> {
    let mut m = Matrix6::zeros();
    let mut idx = 0;
    for i in 1..6 {
        for j in 0..i {
            m[(i, j)] = theta[idx];
            idx += 1;
        }
    }
    m
}

fn strict_put(m: &Matrix6<f64>, out: &mut [f64]) {
    let mut idx = 0;
    for i in 1..6 {
        for j in 0..i {
            out[idx] = m[(i, j)];
            idx += 1;
        }
    }
}

struct Unpacked {
    logit: f64,
    mu: Vector6<f64>,
    c: Matrix6<f64>,
    l: Matrix6<f64>,
    a: Matrix6<f64>,
    precision: Matrix6<f64>,
    half_log_det: f64,
}

fn unpack(theta: &[f64], bias: f64, margin: f64) -> Option<Unpacked> {
    let c = lower_get(&theta[OFF_C..OFF_L], true);
    let l = lower_get(&theta[OFF_L..OFF_W], false);
    let w = strict_get(&theta[OFF_W..PER]);
    let sigma = c * c.transpose() + Matrix6::identity() * bias;
    let chol = sigma.cholesky()?;
    let half_log_det = chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let a = -(l * l.transpose() + Matrix6::identity() * margin) + (w - w.transpose());
    Some(Unpacked {
        logit: theta[0],
        mu: Vector6::from_column_slice(&theta[OFF_MU..OFF_C]),
        c,
        l,
        a,
        precision: chol.inverse(),
        half_log_det,
    })
}

/// Mean squared velocity error and its gradient.
fn objective(
    theta: &[f64],
    grad: &mut [f64],
    data: &Samples,
    k: usize,
    bias: f64,
    margin: f64,
) -> f64 {
    grad.iter_mut().for_each(|g| *g = 0.0);
    let comps: Option<Vec<Unpacked>> = (0..k)
        .map(|i| unpack(&theta[i * PER..(i + 1) * PER], bias, margin))
        .collect();
    let Some(comps) = comps else {
        return f64::NAN;
    };
    let n = data.x.len() as f64;
    let scale = 2.0 / n;
    let mut big_g = vec![Matrix6::<f64>::zeros(); k];
    let mut outer = vec![Matrix6::<f64>::zeros(); k];
    let mut q_sum = vec![0.0; k];
    let mut d_mu = vec![Vector6::<f64>::zeros(); k];
    let mut ell = vec![0.0; k];
    let mut h = vec![0.0; k];
    let mut u = vec![Vector6::<f64>::zeros(); k];
    let mut z = vec![Vector6::<f64>::zeros(); k];
    let mut g = vec![0.0; k];
    let mut total = 0.0;
    for (x, y) in data.x.iter().zip(&data.y) {
        for (i, c) in comps.iter().enumerate() {
            let d = x - c.mu;
            z[i] = c.precision * d;
            ell[i] = c.logit - c.half_log_det - 0.5 * d.dot(&z[i]);
            u[i] = c.a * x;
        }
        let m = ell.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut norm = 0.0;
        for i in 0..k {
            h[i] = (ell[i] - m).exp();
            norm += h[i];
        }
        let mut f = Vector6::zeros();
        for i in 0..k {
            h[i] /= norm;
            f += u[i] * h[i];
        }
        let e = f - y;
        total += e.norm_squared();
        let mut g_bar = 0.0;
        for i in 0..k {
            g[i] = scale * e.dot(&u[i]);
            g_bar += h[i] * g[i];
        }
        for i in 0..k {
            big_g[i] += (e * x.transpose()) * (scale * h[i]);
            let q = h[i] * (g[i] - g_bar);
            q_sum[i] += q;
            d_mu[i] += z[i] * q;
            outer[i] += (z[i] * z[i].transpose()) * q;
        }
    }
    for (i, c) in comps.iter().enumerate() {
        let out = &mut grad[i * PER..(i + 1) * PER];
        out[0] = q_sum[i];
        out[OFF_MU..OFF_C].copy_from_slice(d_mu[i].as_slice());
        let s = (outer[i] - c.precision * q_sum[i]) * 0.5;
        let mut dc = s * c.c * 2.0;
        for j in 0..6 {
            dc[(j, j)] *= c.c[(j, j)];
        }
        lower_put(&dc, &mut out[OFF_C..OFF_L], false);
        let gi = big_g[i];
        let dl = -(gi + gi.transpose()) * c.l;
        lower_put(&dl, &mut out[OFF_L..OFF_W], false);
        strict_put(&(gi - gi.transpose()), &mut out[OFF_W..PER]);
    }
    total / n
}

/// EM on the joint samples, then each local linear map is pulled inside the
/// stable set.
fn initial_guess(data: &Samples, opts: &SedsFitOptions, bias: f64) -> Result<Vec<f64>> {
    let joint: Vec<DVector<f64>> = data
        .x
        .iter()
        .zip(&data.y)
        .map(|(x, y)| DVector::from_iterator(12, x.iter().chain(y.iter()).copied()))
        .collect();
    let em_opts = EmOptions::new(opts.k, 1e-6 + bias).with_seed(opts.seed ^ 0x5eed5);
    let fit = em_fit(&joint, &em_opts)?;
    let mut theta = vec![0.0; opts.k * PER];
    for (i, (w, g)) in fit
        .gmm
        .weights()
        .iter()
        .zip(fit.gmm.components())
        .enumerate()
    {
        let out = &mut theta[i * PER..(i + 1) * PER];
        out[0] = w.max(1e-300).ln();
        out[OFF_MU..OFF_C].copy_from_slice(g.mu().rows(0, 6).as_slice());
        let s = g.sigma();
        let sxx = Matrix6::from_fn(|r, c| s[(r, c)]);
        let sdx = Matrix6::from_fn(|r, c| s[(r + 6, c)]);
        let c = (sxx - Matrix6::identity() * bias)
            .cholesky()
            .ok_or_else(|| Error::Fit("input covariance is not positive definite".into()))?;
        lower_put(&c.l(), &mut out[OFF_C..OFF_L], true);
        let inv = sxx
            .try_inverse()
            .ok_or_else(|| Error::Fit("input covariance is singular".into()))?;
        let a0 = sdx * inv;
        let mut eig = ((a0 + a0.transpose()) * 0.5).symmetric_eigen();
        for v in eig.eigenvalues.iter_mut() {
            *v = v.min(-opts.init_contraction.max(2.0 * opts.margin));
        }
        let neg_sym = -eig.recompose() - Matrix6::identity() * opts.margin;
        let l = ((neg_sym + neg_sym.transpose()) * 0.5)
            .cholesky()
            .ok_or_else(|| Error::Fit("projected map is not stable".into()))?;
        lower_put(&l.l(), &mut out[OFF_L..OFF_W], false);
        strict_put(&((a0 - a0.transpose()) * 0.5), &mut out[OFF_W..PER]);
    }
    Ok(theta)
}

fn to_model(
    theta: &[f64],
    opts: &SedsFitOptions,
    bias: f64,
    goal: Vector3<f64>,
) -> Result<SedsModel> {
    let mut attractor = Vector6::zeros();
    attractor.fixed_rows_mut::<3>(0).copy_from(&goal);
    let mut logits = Vec::with_capacity(opts.k);
    let mut mu = Vec::with_capacity(opts.k);
    let mut sigma = Vec::with_capacity(opts.k);
    let mut a = Vec::with_capacity(opts.k);
    for i in 0..opts.k {
        let u = unpack(&theta[i * PER..(i + 1) * PER], bias, opts.margin)
            .ok_or_else(|| Error::Fit("covariance lost definiteness".into()))?;
        logits.push(u.logit);
        mu.push(u.mu + attractor);
        sigma.push(u.c * u.c.transpose() + Matrix6::identity() * bias);
        a.push(u.a);
    }
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut priors: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let total: f64 = priors.iter().sum();
    priors.iter_mut().for_each(|p| *p /= total);
    SedsModel::new(attractor, opts.velocity_scale, priors, mu, sigma, a)
}
