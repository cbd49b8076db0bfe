//! Time-based GMR: a mixture over `(t, x, y, z)` queried along time.

use nalgebra::{DVector, Matrix3, Vector3};

use super::em::{em_fit, EmInit, EmOptions};
use super::gmr::Conditioner;
use super::mixture::Gmm;
use crate::error::{Error, Result};
use crate::traj::Trajectory;

/// A regressed trajectory with the conditional covariance at every sample.
#[derive(Debug, Clone, PartialEq)]
pub struct GmrTrajectory {
    pub trajectory: Trajectory,
    pub covariances: Vec<Matrix3<f64>>,
}

/// `(t, x, y, z)` samples with `t` in seconds from the first sample.
pub fn time_position_samples(traj: &Trajectory, times: &[f64]) -> Vec<DVector<f64>> {
    traj.positions()
        .iter()
        .zip(times)
        .map(|(p, &t)| DVector::from_vec(vec![t, p.x, p.y, p.z]))
        .collect()
}

/// Fits a 4-D mixture to one demonstration.
pub fn tbgmr_encode(traj: &Trajectory, k: usize, epsilon: f64) -> Result<Gmm> {
    let data = time_position_samples(traj, &traj.timestamps());
    let opts = EmOptions::new(k, epsilon).with_init(EmInit::TimeBins);
    Ok(em_fit(&data, &opts)?.gmm)
}

/// Conditions the model on each timestamp; timestamps must be increasing and
/// evenly spaced.
pub fn tbgmr_reconstruct(gmm: &Gmm, timestamps: &[f64]) -> Result<GmrTrajectory> {
    if gmm.dim() != 4 {
        return Err(Error::invalid(format!(
            "time-based GMR needs D = 4, got {}",
            gmm.dim()
        )));
    }
    let n = timestamps.len();
    if n < 2 {
        return Err(Error::invalid("need at least two timestamps"));
    }
    let dt = (timestamps[n - 1] - timestamps[0]) / (n - 1) as f64;
    if !(dt > 0.0) || timestamps.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("timestamps must be strictly increasing"));
    }
    let cond = Conditioner::new(gmm, &[0], &[1, 2, 3])?;
    let mut positions = Vec::with_capacity(n);
    let mut covariances = Vec::with_capacity(n);
    for &t in timestamps {
        let (mean, cov) = cond.condition(&DVector::from_vec(vec![t]))?;
        positions.push(Vector3::new(mean[0], mean[1], mean[2]));
        covariances.push(Matrix3::from_fn(|r, c| cov[(r, c)]));
    }
    Ok(GmrTrajectory {
        trajectory: Trajectory::new(positions, dt)?,
        covariances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_samples_cannot_fit_two_components() {
        let t = Trajectory::new(vec![Vector3::zeros(), Vector3::x()], 0.01).unwrap();
        assert!(matches!(tbgmr_encode(&t, 2, 1e-4), Err(Error::Fit(_))));
    }

    #[test]
    fn constant_demo_reconstructs_constant() {
        let p = Vector3::new(0.1, 0.2, 0.3);
        let t = Trajectory::new(vec![p; 50], 0.01).unwrap();
        let g = tbgmr_encode(&t, 3, 1e-6).unwrap();
        let r = tbgmr_reconstruct(&g, &t.timestamps()).unwrap();
        assert_eq!(r.trajectory.len(), 50);
        assert!(r
            .trajectory
            .positions()
            .iter()
            .all(|q| (q - p).norm() < 1e-6));
    }
}
