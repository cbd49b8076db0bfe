use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::traj::Trajectory;

/// Lower bound of the relaxed time window, as a fraction of the demo duration.
pub const RELAXED_TIME_MIN: f64 = 0.725;
/// Upper bound of the relaxed time window.
pub const RELAXED_TIME_MAX: f64 = 1.38;
/// Oscillation ratios below this count as smooth.
pub const SMOOTH_RATIO: f64 = 0.2;

/// Root-mean-square point distance. The longer trajectory is resampled to
/// the length of the shorter one first.
pub fn rms_distance(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    let (a, b) = match a.len().cmp(&b.len()) {
        std::cmp::Ordering::Greater => (a.resample(b.len())?, b.clone()),
        std::cmp::Ordering::Less => (a.clone(), b.resample(a.len())?),
        std::cmp::Ordering::Equal => (a.clone(), b.clone()),
    };
    let sum: f64 = a
        .positions()
        .iter()
        .zip(b.positions())
        .map(|(p, q)| (p - q).norm_squared())
        .sum();
    Ok((sum / a.len() as f64).sqrt())
}

/// Mean RMS distance over all unordered pairs of repetitions.
pub fn inter_human_variance(reps: &[Trajectory]) -> Result<f64> {
    if reps.len() < 2 {
        return Err(Error::invalid(
            "inter-human variance needs at least two repetitions",
        ));
    }
    let mut total = 0.0;
    let mut pairs = 0usize;
    for j in 0..reps.len() {
        for k in j + 1..reps.len() {
            total += rms_distance(&reps[j], &reps[k])?;
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}

/// Distance between the final samples.
pub fn endpoint_distance(pred: &Trajectory, reference: &Trajectory) -> f64 {
    (pred.end() - reference.end()).norm()
}

/// Whether a duration lies in the closed window `[0.725, 1.38]` times the
/// demonstration's.
pub fn relaxed_time_success(pred_duration: f64, demo_duration: f64) -> bool {
    pred_duration >= RELAXED_TIME_MIN * demo_duration
        && pred_duration <= RELAXED_TIME_MAX * demo_duration
}

/// Magnitude of the Fourier coefficient at `cycles` periods over the
/// samples, treating them as one period.
fn dft_magnitude(signal: &[f64], cycles: usize) -> f64 {
    let n = signal.len() as f64;
    let (mut re, mut im) = (0.0, 0.0);
    for (i, s) in signal.iter().enumerate() {
        let phase = -2.0 * std::f64::consts::PI * cycles as f64 * i as f64 / n;
        re += s * phase.cos();
        im += s * phase.sin();
    }
    re.hypot(im)
}

fn ratio(signal: &[f64], k: usize) -> Result<f64> {
    let n = signal.len();
    if k == 0 {
        return Err(Error::invalid("K must be at least 1"));
    }
    if n < 3 || 2 * k > n - 1 {
        return Err(Error::UndefinedMetric(format!(
            "{n} samples cannot resolve {k} cycles"
        )));
    }
    let base = dft_magnitude(signal, 1);
    let peak = signal.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(base > 1e-12 * peak * n as f64) {
        return Err(Error::UndefinedMetric(
            "no energy at the base frequency".into(),
        ));
    }
    Ok(dft_magnitude(signal, k) / base)
}

/// Ratio of the speed profile's Fourier magnitude at `K / duration` to that
/// at `1 / duration`, where `duration` is the time covered by the samples
/// (`n * dt`).
pub fn oscillation_metric(velocity: &[Vector3<f64>], k: usize, duration: f64) -> Result<f64> {
    if velocity.is_empty() || !(duration > 0.0) {
        return Err(Error::invalid(
            "oscillation metric needs samples and a positive duration",
        ));
    }
    let speed: Vec<f64> = velocity.iter().map(|v| v.norm()).collect();
    ratio(&speed, k)
}

/// The same ratio per axis, for diagnostics. Axes without motion give `None`.
pub fn oscillation_per_axis(velocity: &[Vector3<f64>], k: usize) -> [Option<f64>; 3] {
    std::array::from_fn(|axis| {
        let s: Vec<f64> = velocity.iter().map(|v| v[axis]).collect();
        ratio(&s, k).ok()
    })
}

/// Oscillation ratio of a trajectory's finite-difference speed.
pub fn trajectory_oscillation(traj: &Trajectory, k: usize) -> Result<f64> {
    oscillation_metric(&traj.differentiate(), k, traj.len() as f64 * traj.dt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "DMP")]
    Dmp,
    #[serde(rename = "tbGMR")]
    TbGmr,
    #[serde(rename = "TP-GMM")]
    TpGmm,
    #[serde(rename = "SEDS")]
    Seds,
    /// SEDS judged under the relaxed time condition.
    #[serde(rename = "SEDS*")]
    SedsRelaxed,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Dmp => "DMP",
            ModelKind::TbGmr => "tbGMR",
            ModelKind::TpGmm => "TP-GMM",
            ModelKind::Seds => "SEDS",
            ModelKind::SedsRelaxed => "SEDS*",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Free parameters of a model with `k` components or kernels. `n_demos` only
/// matters for DMP, where generalizing keeps one weight set per demonstration.
pub fn param_count(kind: ModelKind, k: usize, n_demos: usize) -> usize {
    match kind {
        ModelKind::Dmp => 3 * n_demos.max(1) * k,
        ModelKind::TbGmr => 15 * k - 1,
        ModelKind::TpGmm => 29 * k - 1,
        ModelKind::Seds | ModelKind::SedsRelaxed => 29 * k,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub median: f64,
    /// Median absolute deviation from the median.
    pub mad: f64,
    pub q1: f64,
    pub q3: f64,
    pub n: usize,
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

/// Linearly interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Middle value, or the midpoint of the two middle values for even counts.
fn median_sorted(s: &[f64]) -> f64 {
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid("median of no values"));
    }
    Ok(median_sorted(&sorted(values)))
}

/// Median, MAD and interpolated quartiles.
pub fn aggregate(values: &[f64]) -> Result<Aggregate> {
    if values.is_empty() {
        return Err(Error::invalid("cannot aggregate an empty sample"));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::invalid("cannot aggregate NaN"));
    }
    let s = sorted(values);
    let median = median_sorted(&s);
    let deviations: Vec<f64> = values.iter().map(|v| (v - median).abs()).collect();
    Ok(Aggregate {
        median,
        mad: median_sorted(&sorted(&deviations)),
        q1: quantile(&s, 0.25),
        q3: quantile(&s, 0.75),
        n: values.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize, offset: f64) -> Trajectory {
        Trajectory::from_fn(n, 0.01, |t| Vector3::new(t + offset, 0.0, 0.0)).unwrap()
    }

    #[test]
    fn constant_offset_distance() {
        let d = rms_distance(&line(50, 0.0), &line(50, 0.01)).unwrap();
        assert!((d - 0.01).abs() < 1e-12);
    }

    #[test]
    fn three_four_five_endpoint() {
        let a = Trajectory::new(vec![Vector3::zeros(), Vector3::zeros()], 0.01).unwrap();
        let b = Trajectory::new(
            vec![Vector3::zeros(), Vector3::new(0.0, 0.003, 0.004)],
            0.01,
        )
        .unwrap();
        assert!((endpoint_distance(&a, &b) - 0.005).abs() < 1e-15);
    }

    #[test]
    fn relaxed_window_bounds() {
        assert!(!relaxed_time_success(1.28, 0.74));
        assert!(relaxed_time_success(0.74, 0.74));
        assert!(relaxed_time_success(1.38 * 2.0, 2.0));
        assert!(relaxed_time_success(0.725 * 2.0, 2.0));
        assert!(!relaxed_time_success(0.72 * 2.0, 2.0));
    }

    #[test]
    fn param_count_table() {
        assert_eq!(param_count(ModelKind::Dmp, 11, 1), 33);
        assert_eq!(param_count(ModelKind::TbGmr, 3, 1), 44);
        assert_eq!(param_count(ModelKind::Seds, 3, 1), 87);
        assert_eq!(param_count(ModelKind::Dmp, 6, 36), 648);
    }

    #[test]
    fn small_aggregates() {
        let a = aggregate(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((a.median, a.mad), (2.0, 1.0));
        assert_eq!(aggregate(&[1.0, 2.0, 3.0, 4.0]).unwrap().median, 2.5);
        assert!(aggregate(&[]).is_err());
    }

    #[test]
    fn too_few_samples_is_undefined() {
        let v = vec![Vector3::new(1.0, 0.0, 0.0); 6];
        assert!(matches!(
            oscillation_metric(&v, 3, 1.0),
            Err(Error::UndefinedMetric(_))
        ));
    }
}
