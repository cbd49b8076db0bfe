//! The reconstruction and generalization studies, hyperparameter searches and
//! report output.

mod access;
mod cases;
mod generalize;
mod output;
mod recon;
mod triplets;
mod tune;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dmp::default_kappa;
use crate::error::{Error, Result};
use crate::eval::EvalReport;
use crate::seds::SedsFitOptions;
use crate::traj::{load_dataset, synth_generate, Action, DemoSet, GridPos, SynthConfig};

pub use access::{Access, AccessLog, DemoView, TargetQuery};
pub use generalize::{run_fewdemo, run_manydemo, EXCLUSION_RADIUS};
pub use output::{
    emit_report, render_error_plot, render_seds_table, seds_success_table, SedsSuccessRow,
};
pub use recon::run_reconstruction;
pub use triplets::{enumerate_triplets, Direction, TripletTask};
pub use tune::{
    hyperparam_search_dmp, hyperparam_search_tbgmr, tuning_sample, EpsilonPoint, EpsilonRow,
    EpsilonRule, KappaPoint, KappaRow, EPSILON_GRID, KAPPA_GRID,
};

/// Environment variable capping the number of worker threads.
pub const WORKERS_ENV: &str = "BENCH_WORKERS";
/// Default upper bound on SEDS components.
pub const SEDS_K_MAX: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    Dmp,
    /// tbGMR for reconstruction, TP-GMM for generalization.
    Gmm,
    /// Evaluated with fixed and relaxed duration from one fit.
    Seds,
}

impl FromStr for ModelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dmp" => Ok(ModelFamily::Dmp),
            "tpgmm" | "tp-gmm" | "tbgmr" | "gmm" => Ok(ModelFamily::Gmm),
            "seds" => Ok(ModelFamily::Seds),
            other => Err(Error::invalid(format!("unknown model '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Reconstruction,
    /// Interpolation and extrapolation from triplets.
    Fewdemo,
    Manydemo,
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "recon" | "reconstruction" => Ok(ScenarioKind::Reconstruction),
            "fewdemo" => Ok(ScenarioKind::Fewdemo),
            "manydemo" => Ok(ScenarioKind::Manydemo),
            other => Err(Error::invalid(format!("unknown scenario '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    Synth(SynthConfig),
    Path(PathBuf),
}

impl DatasetSource {
    pub fn load(&self) -> Result<DemoSet> {
        match self {
            DatasetSource::Synth(cfg) => synth_generate(cfg),
            DatasetSource::Path(p) => load_dataset(p),
        }
    }
}

/// Selected `epsilon` per `K` on the synthetic set when no search result is supplied.
pub fn default_epsilon(k: usize) -> f64 {
    match k {
        0..=3 => 1e-2,
        _ => 1e-3,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Kernel width per `K`; missing entries use the default.
    pub dmp_kappa: BTreeMap<usize, f64>,
    /// Covariance regularization per `K` for tbGMR and TP-GMM.
    pub gmm_epsilon: BTreeMap<usize, f64>,
    /// Template for SEDS fits; `k` and `seed` are set per case.
    pub seds: SedsFitOptions,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            dmp_kappa: BTreeMap::new(),
            gmm_epsilon: BTreeMap::new(),
            seds: SedsFitOptions::new(1),
        }
    }
}

impl Hyperparams {
    pub fn kappa(&self, k: usize) -> f64 {
        self.dmp_kappa
            .get(&k)
            .copied()
            .unwrap_or_else(|| default_kappa(k))
    }

    pub fn epsilon(&self, k: usize) -> f64 {
        self.gmm_epsilon
            .get(&k)
            .copied()
            .unwrap_or_else(|| default_epsilon(k))
    }

    pub(crate) fn seds_options(&self, k: usize, seed: u64) -> SedsFitOptions {
        SedsFitOptions {
            k,
            seed,
            ..self.seds.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub scenario: ScenarioKind,
    pub models: Vec<ModelFamily>,
    pub ks: Vec<usize>,
    pub seds_k_max: usize,
    pub hyper: Hyperparams,
    pub seed: u64,
    /// Worker threads; further capped by `BENCH_WORKERS`.
    pub workers: Option<usize>,
}

impl ExperimentSpec {
    pub fn new(scenario: ScenarioKind, models: Vec<ModelFamily>, ks: Vec<usize>) -> Self {
        Self {
            scenario,
            models,
            ks,
            seds_k_max: SEDS_K_MAX,
            hyper: Hyperparams::default(),
            seed: 0,
            workers: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() {
            return Err(Error::invalid("no models selected"));
        }
        if self.ks.is_empty() || self.ks.iter().any(|k| !(2..=20).contains(k)) {
            return Err(Error::invalid("K values must lie in [2, 20]"));
        }
        if self.seds_k_max == 0 {
            return Err(Error::invalid("SEDS K cap must be positive"));
        }
        self.hyper.seds.validate()
    }

    /// `(model, K)` pairs to evaluate, honoring the SEDS cap.
    pub(crate) fn model_ks(&self) -> Vec<(ModelFamily, usize)> {
        let mut models = self.models.clone();
        models.sort();
        models.dedup();
        let mut ks = self.ks.clone();
        ks.sort();
        ks.dedup();
        let mut out = Vec::new();
        for m in models {
            for &k in &ks {
                if m == ModelFamily::Seds && k > self.seds_k_max {
                    continue;
                }
                out.push((m, k));
            }
        }
        out
    }
}

/// Wall-clock cost of one work item; kept apart from the report because it
/// varies between runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseTiming {
    pub case: String,
    pub model: ModelFamily,
    #[serde(rename = "K")]
    pub k: usize,
    pub encode_s: f64,
    pub rollout_s: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentOutput {
    pub report: EvalReport,
    pub timing: Vec<CaseTiming>,
}

/// Runs the scenario named in `spec`.
pub fn run_experiment(spec: &ExperimentSpec, set: &DemoSet) -> Result<ExperimentOutput> {
    match spec.scenario {
        ScenarioKind::Reconstruction => run_reconstruction(spec, set),
        ScenarioKind::Fewdemo => run_fewdemo(spec, set),
        ScenarioKind::Manydemo => run_manydemo(spec, set),
    }
}

/// Worker pool sized by the request, `BENCH_WORKERS` and the machine.
pub(crate) fn worker_pool(requested: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut n = requested.unwrap_or_else(|| {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    });
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let cap: usize = v.trim().parse().map_err(|_| {
            Error::invalid(format!(
                "{WORKERS_ENV} must be a positive integer, got '{v}'"
            ))
        })?;
        if cap == 0 {
            return Err(Error::invalid(format!("{WORKERS_ENV} must be positive")));
        }
        n = n.min(cap);
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))
}

/// FNV-1a over the parts; stable across platforms and releases.
pub(crate) fn stable_seed(base: u64, parts: &[&str]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ base;
    for p in parts {
        for b in p.bytes().chain(std::iter::once(0xff)) {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

/// Record indices grouped by action and participant, then by placement,
/// with repetitions in order.
pub(crate) type GroupIndex = BTreeMap<(Action, String), BTreeMap<GridPos, Vec<usize>>>;

pub(crate) fn group_index(set: &DemoSet) -> GroupIndex {
    let mut idx: GroupIndex = BTreeMap::new();
    for (i, r) in set.records.iter().enumerate() {
        idx.entry((r.action, r.participant.clone()))
            .or_default()
            .entry(r.placement())
            .or_default()
            .push(i);
    }
    for places in idx.values_mut() {
        for reps in places.values_mut() {
            reps.sort_by_key(|&i| (set.records[i].repetition, set.records[i].key()));
        }
    }
    idx
}
