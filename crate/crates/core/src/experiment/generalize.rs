use std::collections::BTreeSet;

use nalgebra::Vector3;
use rayon::prelude::*;

use super::access::{AccessLog, DemoView, TargetQuery};
use super::cases::{
    failed_pair, goal_aligned, metric, score, seds_failure_note, seds_predictions, timed, CaseInfo,
    Prediction,
};
use super::triplets::enumerate_triplets;
use super::{
    group_index, stable_seed, worker_pool, CaseTiming, ExperimentOutput, ExperimentSpec,
    ModelFamily,
};
use crate::dmp::{dmp_encode, dmp_generalize, AxisMask, DmpConfig, DmpModel};
use crate::error::Result;
use crate::eval::{inter_human_variance, param_count, CaseRecord, EvalReport, ModelKind, Scenario};
use crate::gmm::{frame_params_from_endpoints, tpgmm_fit, tpgmm_generalize};
use crate::seds::{seds_fit, SedsOutcome};
use crate::traj::{Action, DemoSet, GridPos, Trajectory, GRID_TARGETS};

/// Demonstrations whose placement lies closer than this to the target's are
/// left out of many-demonstration fits.
pub const EXCLUSION_RADIUS: f64 = 0.03;

/// One group of targets sharing a fit set.
#[derive(Debug, Clone)]
struct Unit {
    scenario: Scenario,
    action: Action,
    participant: String,
    key: String,
    fit: Vec<usize>,
    /// Overrides `fit` for TP-GMM.
    fit_tpgmm: Option<Vec<usize>>,
    /// Placements of the fit set, for the DMP axis mask.
    fit_places: Vec<GridPos>,
    targets: Vec<usize>,
}

/// Fits on two placements of a triplet and predicts the third.
pub fn run_fewdemo(spec: &ExperimentSpec, set: &DemoSet) -> Result<ExperimentOutput> {
    spec.validate()?;
    let tasks = enumerate_triplets(&GRID_TARGETS);
    let mut units = Vec::new();
    for ((action, participant), places) in group_index(set) {
        for task in &tasks {
            let (Some(a), Some(b), Some(t)) = (
                places.get(&task.demos[0]),
                places.get(&task.demos[1]),
                places.get(&task.target),
            ) else {
                continue;
            };
            units.push(Unit {
                scenario: task.scenario(),
                action,
                participant: participant.clone(),
                key: format!("{action}/{participant}/{}", task.key()),
                fit: a.iter().chain(b).copied().collect(),
                fit_tpgmm: None,
                fit_places: task.demos.to_vec(),
                targets: t.clone(),
            });
        }
    }
    run_units(spec, set, &units)
}

/// Placement point: where the object is put down or picked up.
fn placement_point(action: Action, q: &TargetQuery) -> Vector3<f64> {
    if action.is_reverse() {
        q.start
    } else {
        q.end
    }
}

/// Movement end expressed in the frame attached to its start.
fn frame_local_end(q: &TargetQuery) -> Option<Vector3<f64>> {
    frame_params_from_endpoints(q.start, q.end)
        .ok()
        .map(|tp| tp.to_local(0, &q.end))
}

fn mean(points: &[Vector3<f64>]) -> Vector3<f64> {
    points.iter().sum::<Vector3<f64>>() / points.len() as f64
}

/// Fits on all other placements of the same action and predicts each
/// placement in turn.
pub fn run_manydemo(spec: &ExperimentSpec, set: &DemoSet) -> Result<ExperimentOutput> {
    spec.validate()?;
    // Exclusion uses endpoints only; the log is not kept.
    let log = AccessLog::default();
    let view = DemoView::new(set, &log);
    let mut units = Vec::new();
    for ((action, participant), places) in group_index(set) {
        for (&target, target_idx) in &places {
            let tq: Vec<TargetQuery> = target_idx.iter().map(|&i| view.query(i)).collect();
            let t_place = mean(
                &tq.iter()
                    .map(|q| placement_point(action, q))
                    .collect::<Vec<_>>(),
            );
            let t_local: Vec<Vector3<f64>> = tq.iter().filter_map(frame_local_end).collect();
            let t_local = (!t_local.is_empty()).then(|| mean(&t_local));
            let mut fit = Vec::new();
            let mut fit_tpgmm = Vec::new();
            let mut fit_places = BTreeSet::new();
            for (&place, idx) in &places {
                if place == target {
                    continue;
                }
                for &i in idx {
                    let q = view.query(i);
                    if (placement_point(action, &q) - t_place).norm() < EXCLUSION_RADIUS {
                        continue;
                    }
                    fit.push(i);
                    fit_places.insert(place);
                    let far_in_frame = match (frame_local_end(&q), t_local) {
                        (Some(l), Some(t)) => (l - t).norm() >= EXCLUSION_RADIUS,
                        _ => false,
                    };
                    if far_in_frame {
                        fit_tpgmm.push(i);
                    }
                }
            }
            units.push(Unit {
                scenario: Scenario::Manydemo,
                action,
                participant: participant.clone(),
                key: format!("{action}/{participant}/all->{target}"),
                fit,
                fit_tpgmm: Some(fit_tpgmm),
                fit_places: fit_places.into_iter().collect(),
                targets: target_idx.clone(),
            });
        }
    }
    run_units(spec, set, &units)
}

fn run_units(spec: &ExperimentSpec, set: &DemoSet, units: &[Unit]) -> Result<ExperimentOutput> {
    let items: Vec<(&Unit, ModelFamily, usize)> = units
        .iter()
        .flat_map(|u| spec.model_ks().into_iter().map(move |(m, k)| (u, m, k)))
        .collect();
    let pool = worker_pool(spec.workers)?;
    let results: Vec<Result<(Vec<CaseRecord>, CaseTiming)>> = pool.install(|| {
        items
            .par_iter()
            .map(|&(u, m, k)| run_unit(spec, set, u, m, k))
            .collect()
    });
    let mut records = Vec::new();
    let mut timing = Vec::new();
    for r in results {
        let (recs, t) = r?;
        records.extend(recs);
        timing.push(t);
    }
    Ok(ExperimentOutput {
        report: EvalReport::new(records),
        timing,
    })
}

enum Fitted {
    Dmp(Vec<DmpModel>, AxisMask),
    TpGmm(crate::gmm::TpGmm),
    Seds(crate::seds::SedsModel),
    Failed(String),
}

fn fit_unit(
    spec: &ExperimentSpec,
    demos: &[&Trajectory],
    unit: &Unit,
    model: ModelFamily,
    k: usize,
) -> Fitted {
    if demos.is_empty() {
        return Fitted::Failed("skipped: no demonstrations left after exclusion".into());
    }
    match model {
        ModelFamily::Dmp => {
            let cfg = DmpConfig::new(k).with_kappa(spec.hyper.kappa(k));
            match demos
                .iter()
                .map(|d| dmp_encode(d, &cfg))
                .collect::<Result<Vec<_>>>()
            {
                Ok(models) => Fitted::Dmp(
                    models,
                    AxisMask::varying(&metric(unit.fit_places.clone()), 1e-9),
                ),
                Err(e) => Fitted::Failed(e.to_string()),
            }
        }
        ModelFamily::Gmm => {
            let fit = demos
                .iter()
                .map(|d| frame_params_from_endpoints(d.start(), d.end()))
                .collect::<Result<Vec<_>>>()
                .and_then(|params| {
                    let owned: Vec<Trajectory> = demos.iter().map(|d| (*d).clone()).collect();
                    tpgmm_fit(&owned, &params, k, spec.hyper.epsilon(k))
                });
            match fit {
                Ok(f) => Fitted::TpGmm(f.model),
                Err(e) => Fitted::Failed(e.to_string()),
            }
        }
        ModelFamily::Seds => {
            let opts = spec
                .hyper
                .seds_options(k, stable_seed(spec.seed, &[&unit.key, &k.to_string()]));
            let aligned = goal_aligned(demos);
            let outcome = seds_fit(&aligned, Vector3::zeros(), &opts);
            match outcome {
                Ok(SedsOutcome::Fitted(f)) => Fitted::Seds(f.model),
                other => Fitted::Failed(seds_failure_note(&other).unwrap_or_default()),
            }
        }
    }
}

fn run_unit(
    spec: &ExperimentSpec,
    set: &DemoSet,
    unit: &Unit,
    model: ModelFamily,
    k: usize,
) -> Result<(Vec<CaseRecord>, CaseTiming)> {
    let log = AccessLog::default();
    let view = DemoView::new(set, &log);
    let fit_idx = match (model, &unit.fit_tpgmm) {
        (ModelFamily::Gmm, Some(f)) => f,
        _ => &unit.fit,
    };
    let (mut encode_s, mut rollout_s) = (0.0, 0.0);
    let demos: Vec<&Trajectory> = fit_idx.iter().map(|&i| view.fit(i)).collect();
    let fitted = timed(&mut encode_s, || fit_unit(spec, &demos, unit, model, k));

    let kind = match model {
        ModelFamily::Dmp => ModelKind::Dmp,
        ModelFamily::Gmm => ModelKind::TpGmm,
        ModelFamily::Seds => ModelKind::Seds,
    };
    let params = param_count(kind, k, fit_idx.len());
    let references: Vec<Trajectory> = unit
        .targets
        .iter()
        .map(|&i| view.evaluate(i).clone())
        .collect();
    let d_h = inter_human_variance(&references).ok();

    let mut records = Vec::new();
    for (&t, reference) in unit.targets.iter().zip(&references) {
        let info = CaseInfo {
            scenario: unit.scenario,
            action: unit.action,
            participant: unit.participant.clone(),
            case: format!("{}/r{}", unit.key, view.record_meta(t).repetition),
            d_h,
        };
        let q = view.query(t);
        let preds = timed(&mut rollout_s, || {
            predict(&fitted, &q, model == ModelFamily::Seds)
        });
        match preds {
            (fixed, Some(relaxed)) => {
                records.push(score(&info, ModelKind::Seds, k, params, fixed, reference));
                records.push(score(
                    &info,
                    ModelKind::SedsRelaxed,
                    k,
                    params,
                    relaxed,
                    reference,
                ));
            }
            (pred, None) => records.push(score(&info, kind, k, params, pred, reference)),
        }
    }
    let targets: BTreeSet<String> = unit
        .targets
        .iter()
        .map(|&i| view.record_meta(i).key())
        .collect();
    log.check(&targets)?;
    Ok((
        records,
        CaseTiming {
            case: unit.key.clone(),
            model,
            k,
            encode_s,
            rollout_s,
        },
    ))
}

/// The prediction for one query; SEDS adds the relaxed-duration variant.
fn predict(fitted: &Fitted, q: &TargetQuery, seds: bool) -> (Prediction, Option<Prediction>) {
    match fitted {
        Fitted::Dmp(models, mask) => {
            let traj = dmp_generalize(models, q.start, q.end, *mask).and_then(|g| {
                let mut m = g.model;
                m.duration = q.duration;
                m.integrate(q.start, q.end, q.len())
            });
            (Prediction::fixed(traj), None)
        }
        Fitted::TpGmm(model) => (
            Prediction::fixed(tpgmm_generalize(model, q.start, q.end, &q.timestamps)),
            None,
        ),
        Fitted::Seds(model) => {
            let (fixed, relaxed) = seds_predictions(&model.translated(&q.end), q);
            (fixed, Some(relaxed))
        }
        Fitted::Failed(note) => {
            let (a, b) = failed_pair(note);
            (a, seds.then_some(b))
        }
    }
}
