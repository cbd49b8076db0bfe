use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default sampling interval of the recordings (100 Hz).
pub const DEFAULT_DT: f64 = 0.01;

/// A uniformly sampled 3D position time series.
///
/// Positions are in meters, the sampling interval in seconds. A trajectory
/// always holds at least two finite samples, so its duration `(N - 1) * dt`
/// is strictly positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    positions: Vec<Vector3<f64>>,
    dt: f64,
}

impl Trajectory {
    pub fn new(positions: Vec<Vector3<f64>>, dt: f64) -> Result<Self> {
        if positions.len() < 2 {
            return Err(Error::invalid(format!(
                "trajectory needs at least 2 samples, got {}",
                positions.len()
            )));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid(format!(
                "sampling interval must be > 0, got {dt}"
            )));
        }
        if let Some(i) = positions
            .iter()
            .position(|p| !p.iter().all(|c| c.is_finite()))
        {
            return Err(Error::invalid(format!(
                "non-finite coordinate at sample {i}"
            )));
        }
        Ok(Self { positions, dt })
    }

    /// Builds a trajectory by evaluating `f` at `n` evenly spaced times `i * dt`.
    pub fn from_fn(n: usize, dt: f64, mut f: impl FnMut(f64) -> Vector3<f64>) -> Result<Self> {
        let positions = (0..n).map(|i| f(i as f64 * dt)).collect();
        Self::new(positions, dt)
    }

    pub fn positions(&self) -> &[Vector3<f64>] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    /// Always false; kept for API symmetry with slices.
    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn duration(&self) -> f64 {
        (self.positions.len() - 1) as f64 * self.dt
    }

    pub fn start(&self) -> Vector3<f64> {
        self.positions[0]
    }

    pub fn end(&self) -> Vector3<f64> {
        self.positions[self.positions.len() - 1]
    }

    /// Sample times `0, dt, 2 dt, ...`.
    pub fn timestamps(&self) -> Vec<f64> {
        (0..self.len()).map(|i| i as f64 * self.dt).collect()
    }

    /// Sample nearest to time `t` (clamped to the trajectory).
    pub fn nearest(&self, t: f64) -> Vector3<f64> {
        let idx = (t / self.dt).round().clamp(0.0, (self.len() - 1) as f64) as usize;
        self.positions[idx]
    }

    /// Same trajectory shifted by a constant offset.
    pub fn translated(&self, offset: Vector3<f64>) -> Self {
        Self {
            positions: self.positions.iter().map(|p| p + offset).collect(),
            dt: self.dt,
        }
    }

    /// Linear resampling to `n` samples over the same duration.
    ///
    /// Endpoints are preserved exactly and the sampling interval is rescaled.
    pub fn resample(&self, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid(format!("resample needs n >= 2, got {n}")));
        }
        if n == self.len() {
            return Ok(self.clone());
        }
        let last = self.len() - 1;
        let scale = last as f64 / (n - 1) as f64;
        let positions = (0..n)
            .map(|i| {
                if i == n - 1 {
                    return self.positions[last];
                }
                let u = i as f64 * scale;
                let lo = (u.floor() as usize).min(last);
                let frac = u - lo as f64;
                if lo == last || frac == 0.0 {
                    self.positions[lo]
                } else {
                    self.positions[lo] + (self.positions[lo + 1] - self.positions[lo]) * frac
                }
            })
            .collect();
        Ok(Self {
            positions,
            dt: self.duration() / (n - 1) as f64,
        })
    }

    /// Finite-difference velocity: central differences inside, one-sided at the ends.
    pub fn differentiate(&self) -> Vec<Vector3<f64>> {
        let p = &self.positions;
        let n = p.len();
        let mut v = Vec::with_capacity(n);
        v.push((p[1] - p[0]) / self.dt);
        for i in 1..n - 1 {
            v.push((p[i + 1] - p[i - 1]) / (2.0 * self.dt));
        }
        v.push((p[n - 1] - p[n - 2]) / self.dt);
        v
    }

    /// Applies `p -> A p + b` to every sample.
    pub fn transform(&self, f: &FrameTransform) -> Self {
        Self {
            positions: self.positions.iter().map(|p| f.apply(p)).collect(),
            dt: self.dt,
        }
    }
}

/// A rigid transform `p -> A p + b` with `A` a proper rotation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl FrameTransform {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let ortho = (rotation.transpose() * rotation - Matrix3::identity())
            .abs()
            .max();
        let det = rotation.determinant();
        if ortho > 1e-9 || (det - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "rotation must be orthonormal with det +1 (orthogonality error {ortho:.2e}, det {det})"
            )));
        }
        if !translation.iter().all(|c| c.is_finite()) {
            return Err(Error::invalid("translation must be finite"));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn translation_only(b: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: b,
        }
    }

    /// Rotation by `angle` radians about the vertical axis, followed by `b`.
    pub fn about_z(angle: f64, b: Vector3<f64>) -> Self {
        Self {
            rotation: rotation_z(angle),
            translation: b,
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// `self ∘ inner`: first `inner`, then `self`.
    pub fn compose(&self, inner: &FrameTransform) -> FrameTransform {
        FrameTransform {
            rotation: self.rotation * inner.rotation,
            translation: self.rotation * inner.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> FrameTransform {
        let rt = self.rotation.transpose();
        FrameTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }
}

fn rotation_z(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize, to: Vector3<f64>) -> Trajectory {
        Trajectory::from_fn(n, 0.01, |t| to * (t / ((n - 1) as f64 * 0.01))).unwrap()
    }

    #[test]
    fn rejects_short_and_bad_dt() {
        assert!(Trajectory::new(vec![Vector3::zeros()], 0.01).is_err());
        assert!(Trajectory::new(vec![Vector3::zeros(); 3], 0.0).is_err());
        assert!(Trajectory::new(vec![Vector3::new(f64::NAN, 0.0, 0.0); 3], 0.01).is_err());
    }

    #[test]
    fn resample_line_midpoint() {
        let t = line(10, Vector3::new(1.0, 0.0, 0.0));
        let r = t.resample(5).unwrap();
        assert_eq!(r.len(), 5);
        assert_eq!(r.start(), t.start());
        assert_eq!(r.end(), t.end());
        assert!((r.positions()[2] - Vector3::new(0.5, 0.0, 0.0)).norm() < 1e-12);
        assert!((r.duration() - t.duration()).abs() < 1e-12);
        assert!(t.resample(1).is_err());
    }

    #[test]
    fn resample_same_n_is_identity() {
        let t = line(17, Vector3::new(0.3, -0.2, 0.1));
        assert_eq!(t.resample(17).unwrap(), t);
    }

    #[test]
    fn differentiate_constant_and_linear() {
        let c = Trajectory::new(vec![Vector3::new(0.1, 0.2, 0.3); 20], 0.01).unwrap();
        assert!(c.differentiate().iter().all(|v| v.norm() == 0.0));
        let l = Trajectory::from_fn(50, 0.01, |t| Vector3::new(0.2 * t, 0.0, 0.0)).unwrap();
        for v in l.differentiate() {
            assert!((v - Vector3::new(0.2, 0.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn transform_basics() {
        let t = line(11, Vector3::new(1.0, 0.0, 0.0));
        assert_eq!(t.transform(&FrameTransform::identity()), t);
        let shifted = t.transform(&FrameTransform::translation_only(Vector3::new(
            1.0, 0.0, 0.0,
        )));
        assert_eq!(shifted.start(), Vector3::new(1.0, 0.0, 0.0));
        let rotated = t.transform(&FrameTransform::about_z(
            std::f64::consts::FRAC_PI_2,
            Vector3::zeros(),
        ));
        for (p, q) in rotated.positions().iter().zip(t.positions()) {
            assert!((p - Vector3::new(0.0, q.x, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn frame_transform_validation() {
        let mut m = Matrix3::identity();
        m[(0, 0)] = -1.0;
        assert!(FrameTransform::new(m, Vector3::zeros()).is_err());
        assert!(FrameTransform::new(Matrix3::identity() * 2.0, Vector3::zeros()).is_err());
        assert!(FrameTransform::new(rotation_z(0.3), Vector3::new(1.0, 2.0, 3.0)).is_ok());
    }
}
