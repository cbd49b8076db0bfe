use std::time::Instant;

use nalgebra::Vector3;

use super::access::TargetQuery;
use crate::eval::{
    endpoint_distance, relaxed_time_success, rms_distance, CaseRecord, ModelKind, Scenario,
};
use crate::seds::{seds_integrate, IntegrationMode, SedsModel, SedsOutcome};
use crate::traj::{Action, Trajectory};

/// Fields shared by every record of one case.
#[derive(Debug, Clone)]
pub(crate) struct CaseInfo {
    pub scenario: Scenario,
    pub action: Action,
    pub participant: String,
    pub case: String,
    pub d_h: Option<f64>,
}

#[derive(Debug, Clone)]
pub(crate) enum Prediction {
    Ok {
        traj: Trajectory,
        dur_ratio: Option<f64>,
        success: bool,
        note: Option<String>,
    },
    Failed {
        fitted: bool,
        note: String,
    },
}

impl Prediction {
    pub fn fixed(traj: crate::Result<Trajectory>) -> Self {
        match traj {
            Ok(traj) => Prediction::Ok {
                traj,
                dur_ratio: Some(1.0),
                success: true,
                note: None,
            },
            Err(e) => Prediction::Failed {
                fitted: false,
                note: e.to_string(),
            },
        }
    }
}

pub(crate) fn score(
    info: &CaseInfo,
    model: ModelKind,
    k: usize,
    params: usize,
    pred: Prediction,
    reference: &Trajectory,
) -> CaseRecord {
    let mut rec = CaseRecord {
        model,
        k,
        scenario: info.scenario,
        action: info.action,
        participant: info.participant.clone(),
        case: info.case.clone(),
        fitted: false,
        success: false,
        d: None,
        d_e: None,
        d_h: info.d_h,
        dur_ratio: None,
        params,
        note: None,
    };
    match pred {
        Prediction::Ok {
            traj,
            dur_ratio,
            success,
            note,
        } => match rms_distance(&traj, reference) {
            Ok(d) => {
                rec.fitted = true;
                rec.success = success;
                rec.d = Some(d);
                rec.d_e = Some(endpoint_distance(&traj, reference));
                rec.dur_ratio = dur_ratio;
                rec.note = note;
            }
            Err(e) => {
                rec.fitted = true;
                rec.note = Some(e.to_string());
            }
        },
        Prediction::Failed { fitted, note } => {
            rec.fitted = fitted;
            rec.note = Some(note);
        }
    }
    rec
}

pub(crate) fn seds_failure_note(outcome: &crate::Result<SedsOutcome>) -> Option<String> {
    match outcome {
        Ok(SedsOutcome::Fitted(_)) => None,
        Ok(SedsOutcome::Failed(r)) => Some(format!(
            "fit failed at the {:?} gate after {} trials",
            r.last_gate, r.trials
        )),
        Err(e) => Some(e.to_string()),
    }
}

/// Fixed-duration and relaxed-duration predictions from one fitted system,
/// already placed at the query goal.
pub(crate) fn seds_predictions(model: &SedsModel, query: &TargetQuery) -> (Prediction, Prediction) {
    let fixed = seds_integrate(
        model,
        query.start,
        IntegrationMode::Fixed {
            n_steps: query.len(),
        },
    )
    .map(|r| r.trajectory);
    let fixed = match fixed {
        Ok(traj) => Prediction::Ok {
            traj,
            dur_ratio: Some(1.0),
            success: true,
            note: None,
        },
        Err(e) => Prediction::Failed {
            fitted: true,
            note: e.to_string(),
        },
    };
    let relaxed = match seds_integrate(
        model,
        query.start,
        IntegrationMode::until_converged(query.duration),
    ) {
        Ok(r) => {
            let ratio = r.arrival_time.map(|t| t / query.duration);
            let (success, note) = match r.arrival_time {
                Some(t) if relaxed_time_success(t, query.duration) => (true, None),
                Some(_) => (false, Some("arrival outside the time window".to_string())),
                None => (false, Some("did not reach the goal".to_string())),
            };
            Prediction::Ok {
                traj: r.trajectory,
                dur_ratio: ratio,
                success,
                note,
            }
        }
        Err(e) => Prediction::Failed {
            fitted: true,
            note: e.to_string(),
        },
    };
    (fixed, relaxed)
}

pub(crate) fn failed_pair(note: &str) -> (Prediction, Prediction) {
    let f = || Prediction::Failed {
        fitted: false,
        note: note.to_string(),
    };
    (f(), f())
}

/// Seconds spent in `f`.
pub(crate) fn timed<T>(acc: &mut f64, f: impl FnOnce() -> T) -> T {
    let t0 = Instant::now();
    let out = f();
    *acc += t0.elapsed().as_secs_f64();
    out
}

/// Demonstrations shifted so that each ends at the origin.
pub(crate) fn goal_aligned(demos: &[&Trajectory]) -> Vec<Trajectory> {
    demos.iter().map(|d| d.translated(-d.end())).collect()
}

pub(crate) fn metric(points: impl IntoIterator<Item = crate::traj::GridPos>) -> Vec<Vector3<f64>> {
    points.into_iter().map(|p| p.to_metric()).collect()
}
