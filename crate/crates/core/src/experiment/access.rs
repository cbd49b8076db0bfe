use std::collections::BTreeSet;
use std::sync::Mutex;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::traj::{DemoRecord, DemoSet, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Access {
    /// Full trajectory handed to a fitting routine.
    Fit,
    /// Only the endpoints and timing of a target.
    Query,
    /// Full trajectory used to score a prediction.
    Evaluate,
}

/// Everything a model may know about a generalization target.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetQuery {
    pub start: Vector3<f64>,
    pub end: Vector3<f64>,
    pub timestamps: Vec<f64>,
    pub duration: f64,
}

impl TargetQuery {
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }
}

#[derive(Debug, Default)]
pub struct AccessLog {
    entries: Mutex<Vec<(Access, String)>>,
}

impl AccessLog {
    fn push(&self, access: Access, key: String) {
        self.entries
            .lock()
            .expect("access log poisoned")
            .push((access, key));
    }

    pub fn entries(&self) -> Vec<(Access, String)> {
        self.entries.lock().expect("access log poisoned").clone()
    }

    /// Keys that were read for fitting and also appear in `targets`.
    pub fn fit_reads_of(&self, targets: &BTreeSet<String>) -> Vec<String> {
        self.entries()
            .into_iter()
            .filter(|(a, k)| *a == Access::Fit && targets.contains(k))
            .map(|(_, k)| k)
            .collect()
    }

    /// Errors if any target was read for fitting.
    pub fn check(&self, targets: &BTreeSet<String>) -> Result<()> {
        let leaked = self.fit_reads_of(targets);
        if leaked.is_empty() {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "target trajectories read during fitting: {}",
                leaked.join(", ")
            )))
        }
    }
}

/// Read access to a dataset that records what was read and why.
#[derive(Clone, Copy)]
pub struct DemoView<'a> {
    set: &'a DemoSet,
    log: &'a AccessLog,
}

impl<'a> DemoView<'a> {
    pub fn new(set: &'a DemoSet, log: &'a AccessLog) -> Self {
        Self { set, log }
    }

    /// Metadata only; no trajectory data.
    pub fn record_meta(&self, i: usize) -> &'a DemoRecord {
        &self.set.records[i]
    }

    pub fn fit(&self, i: usize) -> &'a Trajectory {
        let r = &self.set.records[i];
        self.log.push(Access::Fit, r.key());
        &r.trajectory
    }

    pub fn query(&self, i: usize) -> TargetQuery {
        let r = &self.set.records[i];
        self.log.push(Access::Query, r.key());
        let t = &r.trajectory;
        TargetQuery {
            start: t.start(),
            end: t.end(),
            timestamps: t.timestamps(),
            duration: t.duration(),
        }
    }

    pub fn evaluate(&self, i: usize) -> &'a Trajectory {
        let r = &self.set.records[i];
        self.log.push(Access::Evaluate, r.key());
        &r.trajectory
    }
}
