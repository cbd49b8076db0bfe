//! Task-parameterized mixtures with start- and end-point frames.

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use super::em::{em_multi, EmInit, EmOptions};
use super::gaussian::Gaussian;
use super::mixture::{Gmm, TpGmm};
use super::tbgmr::tbgmr_reconstruct;
use crate::error::{Error, Result};
use crate::traj::{lowpass_filter, FrameTransform, Trajectory};

/// Cutoff of the low-pass filter applied to generalized trajectories.
pub const POST_FILTER_HZ: f64 = 3.0;

/// Per-frame local-to-world transforms of one movement. Time passes through
/// every frame unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskParams {
    frames: Vec<FrameTransform>,
}

impl TaskParams {
    pub fn new(frames: Vec<FrameTransform>) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::invalid("task parameters need at least one frame"));
        }
        Ok(Self { frames })
    }

    pub fn frames(&self) -> &[FrameTransform] {
        &self.frames
    }

    pub fn p(&self) -> usize {
        self.frames.len()
    }

    /// The 4x4 block matrix and offset of frame `j`, with time in row/column 0.
    pub fn block(&self, j: usize) -> (DMatrix<f64>, DVector<f64>) {
        let f = &self.frames[j];
        let mut a = DMatrix::zeros(4, 4);
        a[(0, 0)] = 1.0;
        a.view_mut((1, 1), (3, 3)).copy_from(f.rotation());
        let mut b = DVector::zeros(4);
        b.rows_mut(1, 3).copy_from(f.translation());
        (a, b)
    }

    /// World point expressed in frame `j`.
    pub fn to_local(&self, j: usize, p: &Vector3<f64>) -> Vector3<f64> {
        self.frames[j].inverse().apply(p)
    }
}

/// Rotation about the vertical axis taking the horizontal part of `d` onto `+y`.
fn yz_plane_frame(origin: Vector3<f64>, toward: Vector3<f64>) -> FrameTransform {
    let d = toward - origin;
    let horizontal = d.x.hypot(d.y);
    if horizontal < 1e-9 {
        return FrameTransform::translation_only(origin);
    }
    FrameTransform::about_z((-d.x).atan2(d.y), origin)
}

/// Two frames: one at the start looking at the end, one at the end looking
/// back at the start. In either, the other endpoint has zero `x`.
pub fn frame_params_from_endpoints(start: Vector3<f64>, end: Vector3<f64>) -> Result<TaskParams> {
    if (end - start).norm() < 1e-6 {
        return Err(Error::DegenerateGeometry("start and end coincide".into()));
    }
    TaskParams::new(vec![yz_plane_frame(start, end), yz_plane_frame(end, start)])
}

/// Phase in `[0, 1]` for each sample of a trajectory.
fn phases(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TpGmmFit {
    pub model: TpGmm,
    pub log_likelihood: Vec<f64>,
}

/// Fits one mixture to all demonstrations in every frame at once.
///
/// Time is normalized to `[0, 1]` per demonstration.
pub fn tpgmm_fit(
    demos: &[Trajectory],
    params: &[TaskParams],
    k: usize,
    epsilon: f64,
) -> Result<TpGmmFit> {
    if demos.is_empty() || demos.len() != params.len() {
        return Err(Error::invalid(
            "need one set of task parameters per demonstration",
        ));
    }
    let p = params[0].p();
    if params.iter().any(|tp| tp.p() != p) {
        return Err(Error::invalid(
            "all demonstrations need the same number of frames",
        ));
    }
    let mut frames: Vec<Vec<DVector<f64>>> = vec![Vec::new(); p];
    for (demo, tp) in demos.iter().zip(params) {
        let phase = phases(demo.len());
        for (j, frame) in frames.iter_mut().enumerate() {
            for (pos, &s) in demo.positions().iter().zip(&phase) {
                let local = tp.to_local(j, pos);
                frame.push(DVector::from_vec(vec![s, local.x, local.y, local.z]));
            }
        }
    }
    let opts = EmOptions::new(k, epsilon).with_init(EmInit::TimeBins);
    let fit = em_multi(&frames, &opts)?;
    Ok(TpGmmFit {
        model: TpGmm::new(fit.weights, fit.frames)?,
        log_likelihood: fit.log_likelihood,
    })
}

/// Maps every frame into the world with `params` and multiplies the frames'
/// Gaussians component by component.
pub fn tpgmm_combine(model: &TpGmm, params: &TaskParams) -> Result<Gmm> {
    if params.p() != model.p() {
        return Err(Error::invalid(format!(
            "model has {} frames, task parameters {}",
            model.p(),
            params.p()
        )));
    }
    if model.dim() != 4 {
        return Err(Error::invalid(
            "task-parameterized models here are (t, x, y, z)",
        ));
    }
    let blocks: Vec<_> = (0..model.p()).map(|j| params.block(j)).collect();
    let mut comps = Vec::with_capacity(model.k());
    for i in 0..model.k() {
        let parts = model
            .frames()
            .iter()
            .zip(&blocks)
            .map(|(f, (a, b))| f[i].transform(a, b))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::Combination(e.to_string()))?;
        comps.push(Gaussian::product(&parts)?);
    }
    Gmm::new(model.weights().to_vec(), comps)
}

/// Trajectory for new endpoints at the given timestamps, low-pass filtered.
pub fn tpgmm_generalize(
    model: &TpGmm,
    start: Vector3<f64>,
    end: Vector3<f64>,
    timestamps: &[f64],
) -> Result<Trajectory> {
    let n = timestamps.len();
    if n < 2 {
        return Err(Error::invalid("need at least two timestamps"));
    }
    let gmm = tpgmm_combine(model, &frame_params_from_endpoints(start, end)?)?;
    let span = timestamps[n - 1] - timestamps[0];
    if !(span > 0.0) {
        return Err(Error::invalid("timestamps must be strictly increasing"));
    }
    let phase: Vec<f64> = timestamps
        .iter()
        .map(|t| (t - timestamps[0]) / span)
        .collect();
    let raw = tbgmr_reconstruct(&gmm, &phase)?;
    let traj = Trajectory::new(raw.trajectory.positions().to_vec(), span / (n - 1) as f64)?;
    if n < 4 {
        return Ok(traj);
    }
    lowpass_filter(&traj, POST_FILTER_HZ)
}
