use std::collections::BTreeMap;

use rayon::prelude::*;

use super::access::{AccessLog, DemoView};
use super::cases::{
    failed_pair, score, seds_failure_note, seds_predictions, timed, CaseInfo, Prediction,
};
use super::{
    group_index, stable_seed, worker_pool, CaseTiming, ExperimentOutput, ExperimentSpec,
    ModelFamily,
};
use crate::dmp::{dmp_encode, DmpConfig};
use crate::error::Result;
use crate::eval::{inter_human_variance, param_count, CaseRecord, EvalReport, ModelKind, Scenario};
use crate::gmm::{tbgmr_encode, tbgmr_reconstruct};
use crate::seds::{seds_fit, SedsOutcome};
use crate::traj::{DemoSet, Trajectory};

/// Encodes every demonstration on its own and reproduces it.
pub fn run_reconstruction(spec: &ExperimentSpec, set: &DemoSet) -> Result<ExperimentOutput> {
    spec.validate()?;
    let d_h = repetition_variance(set);
    let items: Vec<(usize, ModelFamily, usize)> = (0..set.len())
        .flat_map(|i| spec.model_ks().into_iter().map(move |(m, k)| (i, m, k)))
        .collect();
    let pool = worker_pool(spec.workers)?;
    let results: Vec<(Vec<CaseRecord>, CaseTiming)> = pool.install(|| {
        items
            .par_iter()
            .map(|&(i, model, k)| reconstruct_one(spec, set, i, model, k, d_h.get(&i).copied()))
            .collect()
    });
    let (records, timing): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    Ok(ExperimentOutput {
        report: EvalReport::new(records.into_iter().flatten().collect()),
        timing,
    })
}

/// Mean pairwise distance among the repetitions of each record's movement.
fn repetition_variance(set: &DemoSet) -> BTreeMap<usize, f64> {
    let mut out = BTreeMap::new();
    for places in group_index(set).values() {
        for reps in places.values() {
            let trajs: Vec<Trajectory> = reps
                .iter()
                .map(|&i| set.records[i].trajectory.clone())
                .collect();
            if let Ok(v) = inter_human_variance(&trajs) {
                out.extend(reps.iter().map(|&i| (i, v)));
            }
        }
    }
    out
}

fn reconstruct_one(
    spec: &ExperimentSpec,
    set: &DemoSet,
    i: usize,
    model: ModelFamily,
    k: usize,
    d_h: Option<f64>,
) -> (Vec<CaseRecord>, CaseTiming) {
    let log = AccessLog::default();
    let view = DemoView::new(set, &log);
    let meta = view.record_meta(i);
    let info = CaseInfo {
        scenario: Scenario::Reconstruction,
        action: meta.action,
        participant: meta.participant.clone(),
        case: meta.key(),
        d_h,
    };
    let (mut encode_s, mut rollout_s) = (0.0, 0.0);
    let demo = view.fit(i);
    let query = view.query(i);
    let records = match model {
        ModelFamily::Dmp => {
            let cfg = DmpConfig::new(k).with_kappa(spec.hyper.kappa(k));
            let enc = timed(&mut encode_s, || dmp_encode(demo, &cfg));
            let pred = timed(&mut rollout_s, || {
                enc.and_then(|m| m.reproduce(query.len()))
            });
            let params = param_count(ModelKind::Dmp, k, 1);
            vec![score(
                &info,
                ModelKind::Dmp,
                k,
                params,
                Prediction::fixed(pred),
                view.evaluate(i),
            )]
        }
        ModelFamily::Gmm => {
            let enc = timed(&mut encode_s, || {
                tbgmr_encode(demo, k, spec.hyper.epsilon(k))
            });
            let pred = timed(&mut rollout_s, || {
                enc.and_then(|g| tbgmr_reconstruct(&g, &query.timestamps))
                    .map(|r| r.trajectory)
            });
            let params = param_count(ModelKind::TbGmr, k, 1);
            vec![score(
                &info,
                ModelKind::TbGmr,
                k,
                params,
                Prediction::fixed(pred),
                view.evaluate(i),
            )]
        }
        ModelFamily::Seds => {
            let opts = spec
                .hyper
                .seds_options(k, stable_seed(spec.seed, &[&info.case, &k.to_string()]));
            let outcome = timed(&mut encode_s, || {
                seds_fit(std::slice::from_ref(demo), demo.end(), &opts)
            });
            let (fixed, relaxed) = match &outcome {
                Ok(SedsOutcome::Fitted(fit)) => {
                    timed(&mut rollout_s, || seds_predictions(&fit.model, &query))
                }
                _ => failed_pair(&seds_failure_note(&outcome).unwrap_or_default()),
            };
            let params = param_count(ModelKind::Seds, k, 1);
            let reference = view.evaluate(i);
            vec![
                score(&info, ModelKind::Seds, k, params, fixed, reference),
                score(&info, ModelKind::SedsRelaxed, k, params, relaxed, reference),
            ]
        }
    };
    let timing = CaseTiming {
        case: info.case,
        model,
        k,
        encode_s,
        rollout_s,
    };
    (records, timing)
}
