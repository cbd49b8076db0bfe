//! Zero-phase low-pass filtering of trajectories.

use nalgebra::Vector3;

use super::Trajectory;
use crate::error::{Error, Result};

/// Second-order Butterworth section in transposed direct form II.
#[derive(Debug, Clone, Copy)]
struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

impl Biquad {
    fn butterworth_lowpass(cutoff_hz: f64, sample_rate: f64) -> Self {
        let k = (std::f64::consts::PI * cutoff_hz / sample_rate).tan();
        let sqrt2 = std::f64::consts::SQRT_2;
        let norm = 1.0 / (1.0 + sqrt2 * k + k * k);
        let b0 = k * k * norm;
        Self {
            b: [b0, 2.0 * b0, b0],
            a: [2.0 * (k * k - 1.0) * norm, (1.0 - sqrt2 * k + k * k) * norm],
        }
    }

    /// Runs the section over `x`, starting from the steady state for `x[0]`.
    fn run(&self, x: &[f64]) -> Vec<f64> {
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        let mut s1 = (b1 + b2 - a1 - a2) * x[0];
        let mut s2 = (b2 - a2) * x[0];
        x.iter()
            .map(|&xi| {
                let y = b0 * xi + s1;
                s1 = b1 * xi - a1 * y + s2;
                s2 = b2 * xi - a2 * y;
                y
            })
            .collect()
    }

    /// Forward-backward pass over an odd-reflected extension of `x`.
    fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let pad = (3 * 3).min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        for i in (1..=pad).rev() {
            ext.push(2.0 * x[0] - x[i]);
        }
        ext.extend_from_slice(x);
        for i in 1..=pad {
            ext.push(2.0 * x[n - 1] - x[n - 1 - i]);
        }
        let mut y = self.run(&ext);
        y.reverse();
        let mut y = self.run(&y);
        y.reverse();
        y[pad..pad + n].to_vec()
    }
}

/// Zero-phase second-order low-pass filter with endpoint pinning.
///
/// The first and last samples of the result equal those of the input.
pub fn lowpass_filter(traj: &Trajectory, cutoff_hz: f64) -> Result<Trajectory> {
    let nyquist = 0.5 / traj.dt();
    if !(cutoff_hz > 0.0 && cutoff_hz < nyquist) {
        return Err(Error::invalid(format!(
            "cutoff {cutoff_hz} Hz must lie in (0, {nyquist}) Hz"
        )));
    }
    let section = Biquad::butterworth_lowpass(cutoff_hz, 1.0 / traj.dt());
    let n = traj.len();
    let mut out = vec![Vector3::zeros(); n];
    for axis in 0..3 {
        let column: Vec<f64> = traj.positions().iter().map(|p| p[axis]).collect();
        for (o, v) in out.iter_mut().zip(section.filtfilt(&column)) {
            o[axis] = v;
        }
    }
    out[0] = traj.start();
    out[n - 1] = traj.end();
    Trajectory::new(out, traj.dt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_is_unchanged() {
        let t = Trajectory::new(vec![Vector3::new(0.1, -0.2, 0.05); 64], 0.01).unwrap();
        let f = lowpass_filter(&t, 3.0).unwrap();
        for p in f.positions() {
            assert!((p - t.start()).norm() < 1e-12);
        }
    }

    #[test]
    fn rejects_cutoff_at_nyquist() {
        let t = Trajectory::new(vec![Vector3::zeros(); 10], 0.01).unwrap();
        assert!(lowpass_filter(&t, 50.0).is_err());
        assert!(lowpass_filter(&t, 0.0).is_err());
        assert!(lowpass_filter(&t, 49.0).is_ok());
    }

    #[test]
    fn preserves_length_and_endpoints() {
        let t =
            Trajectory::from_fn(37, 0.01, |t| Vector3::new(t.sin(), (7.0 * t).cos(), t)).unwrap();
        let f = lowpass_filter(&t, 3.0).unwrap();
        assert_eq!(f.len(), t.len());
        assert_eq!(f.start(), t.start());
        assert_eq!(f.end(), t.end());
    }

    #[test]
    fn dc_gain_is_one() {
        let s = Biquad::butterworth_lowpass(3.0, 100.0);
        let sum_b: f64 = s.b.iter().sum();
        assert!((sum_b / (1.0 + s.a[0] + s.a[1]) - 1.0).abs() < 1e-12);
    }
}
