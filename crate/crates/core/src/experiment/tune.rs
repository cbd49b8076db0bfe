use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::worker_pool;
use crate::dmp::{dmp_encode, DmpConfig};
use crate::error::{Error, Result};
use crate::eval::{endpoint_distance, median, rms_distance, trajectory_oscillation, SMOOTH_RATIO};
use crate::gmm::{tbgmr_encode, tbgmr_reconstruct};
use crate::traj::{DemoSet, Trajectory};

/// Kernel widths tried per `K`: 0.6 to 1.2 in steps of 0.1.
pub const KAPPA_GRID: [f64; 7] = [0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2];
/// Covariance regularization values tried per `K`.
pub const EPSILON_GRID: [f64; 6] = [1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2];
/// Largest median end-point error accepted when choosing `epsilon`.
const ENDPOINT_LIMIT: f64 = 0.005;

/// Up to `n` trajectories drawn without replacement.
pub fn tuning_sample(set: &DemoSet, n: usize, seed: u64) -> Vec<Trajectory> {
    let mut idx: Vec<usize> = (0..set.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    idx.truncate(n);
    idx.sort_unstable();
    idx.into_iter()
        .map(|i| set.records[i].trajectory.clone())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaPoint {
    pub kappa: f64,
    pub median_d: Option<f64>,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaRow {
    #[serde(rename = "K")]
    pub k: usize,
    pub kappa: f64,
    pub median_d: f64,
    pub grid: Vec<KappaPoint>,
}

/// For each `K`, the grid value with the smallest median reconstruction
/// error; ties go to the smaller width.
pub fn hyperparam_search_dmp(
    sample: &[Trajectory],
    ks: &[usize],
    workers: Option<usize>,
) -> Result<Vec<KappaRow>> {
    if sample.is_empty() {
        return Err(Error::invalid("tuning sample is empty"));
    }
    let pool = worker_pool(workers)?;
    ks.iter()
        .map(|&k| {
            let grid: Vec<KappaPoint> = KAPPA_GRID
                .iter()
                .map(|&kappa| {
                    let cfg = DmpConfig::new(k).with_kappa(kappa);
                    let errs: Vec<Option<f64>> = pool.install(|| {
                        sample
                            .par_iter()
                            .map(|t| {
                                dmp_encode(t, &cfg)
                                    .and_then(|m| m.reproduce(t.len()))
                                    .and_then(|p| rms_distance(&p, t))
                                    .ok()
                            })
                            .collect()
                    });
                    summarize_kappa(kappa, &errs)
                })
                .collect();
            let best = grid
                .iter()
                .filter_map(|p| p.median_d.map(|m| (p.kappa, m)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .ok_or_else(|| Error::invalid(format!("no kernel width works for K = {k}")))?;
            Ok(KappaRow {
                k,
                kappa: best.0,
                median_d: best.1,
                grid,
            })
        })
        .collect()
}

fn summarize_kappa(kappa: f64, errs: &[Option<f64>]) -> KappaPoint {
    let ok: Vec<f64> = errs.iter().flatten().copied().collect();
    KappaPoint {
        kappa,
        median_d: median(&ok).ok(),
        failures: errs.len() - ok.len(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonPoint {
    pub epsilon: f64,
    pub median_d: Option<f64>,
    pub median_de: Option<f64>,
    pub median_osc: Option<f64>,
    pub failures: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonRule {
    /// End-point and smoothness limits both met.
    Both,
    /// Only the end-point limit met.
    EndpointOnly,
    /// No value meets the end-point limit; smallest end-point error among
    /// the smooth values.
    SmoothOnly,
    /// Neither met; smallest end-point error.
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonRow {
    #[serde(rename = "K")]
    pub k: usize,
    pub epsilon: f64,
    pub rule: EpsilonRule,
    pub grid: Vec<EpsilonPoint>,
}

/// For each `K`, the largest grid value whose median end-point error stays
/// below 5 mm and whose median oscillation ratio stays below 0.2. Without
/// such a value the oscillation limit is dropped. If no value meets the
/// end-point limit, the smooth value with the smallest end-point error is
/// taken, and failing that the value with the smallest end-point error.
pub fn hyperparam_search_tbgmr(
    sample: &[Trajectory],
    ks: &[usize],
    workers: Option<usize>,
) -> Result<Vec<EpsilonRow>> {
    if sample.is_empty() {
        return Err(Error::invalid("tuning sample is empty"));
    }
    let pool = worker_pool(workers)?;
    ks.iter()
        .map(|&k| {
            let grid: Vec<EpsilonPoint> = EPSILON_GRID
                .iter()
                .map(|&epsilon| {
                    let rows: Vec<Option<(f64, f64, Option<f64>)>> = pool.install(|| {
                        sample
                            .par_iter()
                            .map(|t| {
                                let g = tbgmr_encode(t, k, epsilon).ok()?;
                                let r = tbgmr_reconstruct(&g, &t.timestamps()).ok()?.trajectory;
                                let d = rms_distance(&r, t).ok()?;
                                Some((
                                    d,
                                    endpoint_distance(&r, t),
                                    trajectory_oscillation(&r, k).ok(),
                                ))
                            })
                            .collect()
                    });
                    let ok: Vec<_> = rows.iter().flatten().collect();
                    let d: Vec<f64> = ok.iter().map(|r| r.0).collect();
                    let de: Vec<f64> = ok.iter().map(|r| r.1).collect();
                    let osc: Vec<f64> = ok.iter().filter_map(|r| r.2).collect();
                    EpsilonPoint {
                        epsilon,
                        median_d: median(&d).ok(),
                        median_de: median(&de).ok(),
                        median_osc: median(&osc).ok(),
                        failures: rows.len() - ok.len(),
                    }
                })
                .collect();
            let (epsilon, rule) = select_epsilon(&grid).ok_or_else(|| {
                Error::invalid(format!("no regularization value works for K = {k}"))
            })?;
            Ok(EpsilonRow {
                k,
                epsilon,
                rule,
                grid,
            })
        })
        .collect()
}

fn select_epsilon(grid: &[EpsilonPoint]) -> Option<(f64, EpsilonRule)> {
    let end_ok = |p: &&EpsilonPoint| p.median_de.is_some_and(|v| v < ENDPOINT_LIMIT);
    let smooth = |p: &&EpsilonPoint| p.median_osc.is_some_and(|v| v < SMOOTH_RATIO);
    let largest = |it: Vec<&EpsilonPoint>| it.into_iter().map(|p| p.epsilon).reduce(f64::max);
    if let Some(e) = largest(grid.iter().filter(end_ok).filter(smooth).collect()) {
        return Some((e, EpsilonRule::Both));
    }
    if let Some(e) = largest(grid.iter().filter(end_ok).collect()) {
        return Some((e, EpsilonRule::EndpointOnly));
    }
    let closest = |it: Vec<&EpsilonPoint>| {
        it.into_iter()
            .filter_map(|p| p.median_de.map(|v| (p.epsilon, v)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(e, _)| e)
    };
    if let Some(e) = closest(grid.iter().filter(smooth).collect()) {
        return Some((e, EpsilonRule::SmoothOnly));
    }
    closest(grid.iter().collect()).map(|e| (e, EpsilonRule::Fallback))
}
