use nalgebra::{Matrix6, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmm::Gaussian;
use crate::traj::{Trajectory, DEFAULT_DT};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Radius around the attractor that counts as arrival, in meters.
pub const ARRIVAL_RADIUS: f64 = 0.005;
/// Default integration cap as a multiple of the reference duration.
pub const CAP_FACTOR: f64 = 10.0;
/// Euler sub-steps per output sample.
const SUBSTEPS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
struct Component {
    prior: f64,
    mu: Vector6<f64>,
    sigma: Matrix6<f64>,
    a: Matrix6<f64>,
    b: Vector6<f64>,
    precision: Matrix6<f64>,
    log_norm: f64,
}

/// Autonomous system `xi' = sum_k h_k(xi) (A_k xi + b_k)` over the state
/// `xi = (position, velocity / velocity_scale)`, with `b_k = -A_k xi*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "SedsJson", try_from = "SedsJson")]
pub struct SedsModel {
    attractor: Vector6<f64>,
    velocity_scale: f64,
    components: Vec<Component>,
}

impl SedsModel {
    pub fn new(
        attractor: Vector6<f64>,
        velocity_scale: f64,
        priors: Vec<f64>,
        mu: Vec<Vector6<f64>>,
        sigma: Vec<Matrix6<f64>>,
        a: Vec<Matrix6<f64>>,
    ) -> Result<Self> {
        let k = priors.len();
        if k == 0 || mu.len() != k || sigma.len() != k || a.len() != k {
            return Err(Error::invalid(
                "SEDS model needs K >= 1 and matching component arrays",
            ));
        }
        if !(velocity_scale > 0.0) {
            return Err(Error::invalid("velocity scale must be positive"));
        }
        let total: f64 = priors.iter().sum();
        if priors.iter().any(|p| !(*p >= 0.0)) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("priors must lie on the simplex"));
        }
        let mut components = Vec::with_capacity(k);
        for i in 0..k {
            let s = (sigma[i] + sigma[i].transpose()) * 0.5;
            let chol = s.cholesky().ok_or_else(|| {
                Error::Fit(format!("input covariance {i} is not positive definite"))
            })?;
            let log_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
            if !a[i].iter().chain(mu[i].iter()).all(|v| v.is_finite()) {
                return Err(Error::invalid("SEDS parameters must be finite"));
            }
            components.push(Component {
                prior: priors[i],
                mu: mu[i],
                sigma: s,
                a: a[i],
                b: -(a[i] * attractor),
                precision: chol.inverse(),
                log_norm: -0.5 * (6.0 * LN_2PI + log_det),
            });
        }
        Ok(Self {
            attractor,
            velocity_scale,
            components,
        })
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn attractor(&self) -> &Vector6<f64> {
        &self.attractor
    }

    pub fn goal(&self) -> Vector3<f64> {
        self.attractor.fixed_rows::<3>(0).into()
    }

    pub fn velocity_scale(&self) -> f64 {
        self.velocity_scale
    }

    pub fn priors(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.prior).collect()
    }

    pub fn a(&self, k: usize) -> &Matrix6<f64> {
        &self.components[k].a
    }

    pub fn b(&self, k: usize) -> &Vector6<f64> {
        &self.components[k].b
    }

    pub fn mu(&self, k: usize) -> &Vector6<f64> {
        &self.components[k].mu
    }

    pub fn sigma(&self, k: usize) -> &Matrix6<f64> {
        &self.components[k].sigma
    }

    /// Input-marginal Gaussian of component `k`.
    pub fn input_gaussian(&self, k: usize) -> Gaussian {
        let c = &self.components[k];
        Gaussian::new(
            nalgebra::DVector::from_column_slice(c.mu.as_slice()),
            nalgebra::DMatrix::from_column_slice(6, 6, c.sigma.as_slice()),
        )
        .expect("checked at construction")
    }

    pub fn param_count(&self) -> usize {
        seds_param_count(self.k())
    }

    /// The same system with attractor and component means moved by `offset`.
    pub fn translated(&self, offset: &Vector3<f64>) -> Self {
        let mut shift = Vector6::zeros();
        shift.fixed_rows_mut::<3>(0).copy_from(offset);
        let attractor = self.attractor + shift;
        let components = self
            .components
            .iter()
            .map(|c| Component {
                mu: c.mu + shift,
                b: -(c.a * attractor),
                ..c.clone()
            })
            .collect();
        Self {
            attractor,
            velocity_scale: self.velocity_scale,
            components,
        }
    }

    /// State for a position and velocity.
    pub fn state(&self, position: &Vector3<f64>, velocity: &Vector3<f64>) -> Vector6<f64> {
        let mut s = Vector6::zeros();
        s.fixed_rows_mut::<3>(0).copy_from(position);
        s.fixed_rows_mut::<3>(3)
            .copy_from(&(velocity / self.velocity_scale));
        s
    }

    /// Component responsibilities at a state; they sum to one.
    pub fn responsibilities(&self, state: &Vector6<f64>) -> Vec<f64> {
        let logs: Vec<f64> = self
            .components
            .iter()
            .map(|c| {
                let d = state - c.mu;
                c.prior.ln() + c.log_norm - 0.5 * d.dot(&(c.precision * d))
            })
            .collect();
        let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut h: Vec<f64> = logs.iter().map(|l| (l - m).exp()).collect();
        let total: f64 = h.iter().sum();
        h.iter_mut().for_each(|v| *v /= total);
        h
    }
}

/// State derivative at `state`; exactly zero at the attractor.
pub fn seds_predict(model: &SedsModel, state: &Vector6<f64>) -> Vector6<f64> {
    let x = state - model.attractor;
    let h = model.responsibilities(state);
    model
        .components
        .iter()
        .zip(h)
        .fold(Vector6::zeros(), |acc, (c, hk)| acc + (c.a * x) * hk)
}

/// Free parameters of a `K`-component model over the 6-D state, `K (1 + 2/3 D (D + 1))`.
pub fn seds_param_count(k: usize) -> usize {
    let d = 6;
    k * (1 + 2 * d * (d + 1) / 3)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum IntegrationMode {
    /// Exactly `n_steps` samples.
    Fixed { n_steps: usize },
    /// Until the position is within `radius` of the attractor, or `max_steps` samples.
    UntilConverged { radius: f64, max_steps: usize },
}

impl IntegrationMode {
    /// Arrival within 5 mm, capped at ten times the reference duration.
    pub fn until_converged(reference_duration: f64) -> Self {
        IntegrationMode::UntilConverged {
            radius: ARRIVAL_RADIUS,
            max_steps: (CAP_FACTOR * reference_duration / DEFAULT_DT).ceil() as usize + 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SedsRollout {
    pub trajectory: Trajectory,
    /// Full state at every sample.
    pub states: Vec<Vector6<f64>>,
    /// Whether the rollout came within the arrival radius of the attractor.
    pub converged: bool,
    /// Time of the first sample within the arrival radius.
    pub arrival_time: Option<f64>,
}

/// Euler integration from rest at `start`, sampled every 0.01 s.
pub fn seds_integrate(
    model: &SedsModel,
    start: Vector3<f64>,
    mode: IntegrationMode,
) -> Result<SedsRollout> {
    let (max_steps, radius, stop_on_arrival) = match mode {
        IntegrationMode::Fixed { n_steps } => (n_steps, ARRIVAL_RADIUS, false),
        IntegrationMode::UntilConverged { radius, max_steps } => (max_steps, radius, true),
    };
    if max_steps < 2 {
        return Err(Error::invalid("integration needs at least 2 samples"));
    }
    if !start.iter().all(|v| v.is_finite()) {
        return Err(Error::invalid("start must be finite"));
    }
    let goal = model.goal();
    let h = DEFAULT_DT / SUBSTEPS as f64;
    let mut state = model.state(&start, &Vector3::zeros());
    let mut positions = Vec::with_capacity(max_steps.min(4096));
    let mut states = Vec::with_capacity(max_steps.min(4096));
    let mut arrival = None;
    for i in 0..max_steps {
        let p: Vector3<f64> = state.fixed_rows::<3>(0).into();
        positions.push(p);
        states.push(state);
        if arrival.is_none() && (p - goal).norm() <= radius {
            arrival = Some(i as f64 * DEFAULT_DT);
            if stop_on_arrival && positions.len() >= 2 {
                break;
            }
        }
        if i + 1 == max_steps {
            break;
        }
        for _ in 0..SUBSTEPS {
            state += seds_predict(model, &state) * h;
        }
        if !state.iter().all(|v| v.is_finite()) {
            return Err(Error::Fit("rollout diverged".into()));
        }
    }
    Ok(SedsRollout {
        trajectory: Trajectory::new(positions, DEFAULT_DT)?,
        states,
        converged: arrival.is_some(),
        arrival_time: arrival,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// Largest eigenvalue of `A_k + A_k^T` per component.
    pub max_eigenvalues: Vec<f64>,
    /// `|b_k + A_k xi*|` per component.
    pub b_residuals: Vec<f64>,
}

impl StabilityReport {
    pub fn passes(&self) -> bool {
        self.max_eigenvalues.iter().all(|&e| e < -1e-8)
            && self.b_residuals.iter().all(|&r| r < 1e-10)
    }
}

/// Checks the sufficient conditions for a single global attractor.
pub fn seds_stability_check(model: &SedsModel) -> StabilityReport {
    let mut max_eigenvalues = Vec::with_capacity(model.k());
    let mut b_residuals = Vec::with_capacity(model.k());
    for c in &model.components {
        let sym = c.a + c.a.transpose();
        max_eigenvalues.push(sym.symmetric_eigenvalues().max());
        b_residuals.push((c.b + c.a * model.attractor).norm());
    }
    StabilityReport {
        max_eigenvalues,
        b_residuals,
    }
}

#[derive(Serialize, Deserialize)]
struct SedsJson {
    #[serde(rename = "K")]
    k: usize,
    attractor: Vec<f64>,
    velocity_scale: f64,
    pi: Vec<f64>,
    mu_in: Vec<Vec<f64>>,
    sigma_in: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "A")]
    a: Vec<Vec<Vec<f64>>>,
}

fn rows(m: &Matrix6<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(r: &[Vec<f64>]) -> Result<Matrix6<f64>> {
    if r.len() != 6 || r.iter().any(|row| row.len() != 6) {
        return Err(Error::invalid("expected a 6 x 6 matrix"));
    }
    Ok(Matrix6::from_fn(|i, j| r[i][j]))
}

fn vec6(v: &[f64]) -> Result<Vector6<f64>> {
    if v.len() != 6 {
        return Err(Error::invalid("expected a 6-vector"));
    }
    Ok(Vector6::from_column_slice(v))
}

impl From<SedsModel> for SedsJson {
    fn from(m: SedsModel) -> Self {
        Self {
            k: m.k(),
            attractor: m.attractor.iter().copied().collect(),
            velocity_scale: m.velocity_scale,
            pi: m.priors(),
            mu_in: m
                .components
                .iter()
                .map(|c| c.mu.iter().copied().collect())
                .collect(),
            sigma_in: m.components.iter().map(|c| rows(&c.sigma)).collect(),
            a: m.components.iter().map(|c| rows(&c.a)).collect(),
        }
    }
}

impl TryFrom<SedsJson> for SedsModel {
    type Error = Error;

    fn try_from(j: SedsJson) -> Result<Self> {
        if j.pi.len() != j.k {
            return Err(Error::invalid("K does not match the stored priors"));
        }
        SedsModel::new(
            vec6(&j.attractor)?,
            j.velocity_scale,
            j.pi,
            j.mu_in.iter().map(|v| vec6(v)).collect::<Result<_>>()?,
            j.sigma_in
                .iter()
                .map(|m| from_rows(m))
                .collect::<Result<_>>()?,
            j.a.iter().map(|m| from_rows(m)).collect::<Result<_>>()?,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear(a: Matrix6<f64>) -> SedsModel {
        SedsModel::new(
            Vector6::zeros(),
            1.0,
            vec![1.0],
            vec![Vector6::zeros()],
            vec![Matrix6::identity()],
            vec![a],
        )
        .unwrap()
    }

    #[test]
    fn param_counts() {
        assert_eq!(seds_param_count(1), 29);
        assert_eq!(seds_param_count(3), 87);
        assert_eq!(seds_param_count(6), 174);
    }

    #[test]
    fn linear_system_prediction() {
        let m = linear(-Matrix6::identity());
        let s = Vector6::new(1.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        assert_eq!(seds_predict(&m, &s), -s);
        assert_eq!(seds_predict(&m, &Vector6::zeros()), Vector6::zeros());
    }

    #[test]
    fn unstable_model_fails_certificate() {
        let r = seds_stability_check(&linear(Matrix6::identity()));
        assert!(!r.passes());
        assert!((r.max_eigenvalues[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn stable_linear_rollout_contracts() {
        let m = linear(-Matrix6::identity() * 3.0);
        let r = seds_integrate(
            &m,
            Vector3::new(0.2, -0.1, 0.05),
            IntegrationMode::Fixed { n_steps: 200 },
        )
        .unwrap();
        let d: Vec<f64> = r.trajectory.positions().iter().map(|p| p.norm()).collect();
        assert!(d.windows(2).all(|w| w[1] < w[0]));
        assert_eq!(r.trajectory.len(), 200);
    }

    #[test]
    fn until_converged_stops_inside_radius() {
        let m = linear(-Matrix6::identity() * 3.0);
        let r = seds_integrate(
            &m,
            Vector3::new(0.2, 0.0, 0.0),
            IntegrationMode::until_converged(1.0),
        )
        .unwrap();
        assert!(r.converged);
        assert!(r.trajectory.end().norm() <= ARRIVAL_RADIUS);
        let t = r.arrival_time.unwrap();
        assert!((t - r.trajectory.duration()).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let m = linear(-Matrix6::identity());
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.contains("\"A\"") && s.contains("\"sigma_in\""));
        let back: SedsModel = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }
}
