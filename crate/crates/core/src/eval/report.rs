use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::metrics::{aggregate, Aggregate, ModelKind};
use crate::traj::Action;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Reconstruction,
    FewdemoInterp,
    FewdemoExtrap,
    Manydemo,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Reconstruction => "reconstruction",
            Scenario::FewdemoInterp => "fewdemo_interp",
            Scenario::FewdemoExtrap => "fewdemo_extrap",
            Scenario::Manydemo => "manydemo",
        }
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One model evaluated on one case. Distances are in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub model: ModelKind,
    #[serde(rename = "K")]
    pub k: usize,
    pub scenario: Scenario,
    pub action: Action,
    pub participant: String,
    /// Identifies the case within the scenario.
    pub case: String,
    /// Whether the model was fitted (for SEDS: solver and gates passed).
    pub fitted: bool,
    /// Whether the case counts as a success: fitted, and for SEDS* also
    /// arrived within the relaxed time window.
    pub success: bool,
    pub d: Option<f64>,
    pub d_e: Option<f64>,
    /// Inter-repetition variance of the reference repetitions, if available.
    pub d_h: Option<f64>,
    /// Predicted over demonstrated duration.
    pub dur_ratio: Option<f64>,
    pub params: usize,
    pub note: Option<String>,
}

impl CaseRecord {
    fn sort_key(&self) -> (Scenario, ModelKind, usize, &str) {
        (self.scenario, self.model, self.k, &self.case)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub scenario: Scenario,
    pub model: ModelKind,
    #[serde(rename = "K")]
    pub k: usize,
    pub cases: usize,
    pub successes: usize,
    pub fitted: usize,
    pub d: Option<Aggregate>,
    pub d_e: Option<Aggregate>,
}

impl GroupSummary {
    pub fn success_rate(&self) -> f64 {
        self.successes as f64 / self.cases as f64
    }
}

/// Case records in canonical order plus per-group summaries.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub records: Vec<CaseRecord>,
}

impl EvalReport {
    pub fn new(mut records: Vec<CaseRecord>) -> Self {
        records.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        Self { records }
    }

    pub fn merge(reports: impl IntoIterator<Item = EvalReport>) -> Self {
        Self::new(reports.into_iter().flat_map(|r| r.records).collect())
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn filter<'a>(
        &'a self,
        scenario: Scenario,
        model: ModelKind,
        k: Option<usize>,
    ) -> impl Iterator<Item = &'a CaseRecord> + 'a {
        self.records.iter().filter(move |r| {
            r.scenario == scenario && r.model == model && k.is_none_or(|k| r.k == k)
        })
    }

    /// Distances of successful cases for one group.
    pub fn errors(&self, scenario: Scenario, model: ModelKind, k: Option<usize>) -> Vec<f64> {
        self.filter(scenario, model, k)
            .filter(|r| r.success)
            .filter_map(|r| r.d)
            .collect()
    }

    pub fn endpoint_errors(
        &self,
        scenario: Scenario,
        model: ModelKind,
        k: Option<usize>,
    ) -> Vec<f64> {
        self.filter(scenario, model, k)
            .filter(|r| r.success)
            .filter_map(|r| r.d_e)
            .collect()
    }

    /// Summaries per (scenario, model, K), recomputed from the records.
    pub fn summaries(&self) -> Vec<GroupSummary> {
        let mut groups: BTreeMap<(Scenario, ModelKind, usize), Vec<&CaseRecord>> = BTreeMap::new();
        for r in &self.records {
            groups
                .entry((r.scenario, r.model, r.k))
                .or_default()
                .push(r);
        }
        groups
            .into_iter()
            .map(|((scenario, model, k), recs)| {
                let ok: Vec<&&CaseRecord> = recs.iter().filter(|r| r.success).collect();
                let d: Vec<f64> = ok.iter().filter_map(|r| r.d).collect();
                let de: Vec<f64> = ok.iter().filter_map(|r| r.d_e).collect();
                GroupSummary {
                    scenario,
                    model,
                    k,
                    cases: recs.len(),
                    successes: ok.len(),
                    fitted: recs.iter().filter(|r| r.fitted).count(),
                    d: aggregate(&d).ok(),
                    d_e: aggregate(&de).ok(),
                }
            })
            .collect()
    }

    /// One row per case: `model,K,scenario,action,d_mm,de_mm,dur_ratio,success`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,K,scenario,action,d_mm,de_mm,dur_ratio,success\n");
        let num =
            |v: Option<f64>, scale: f64| v.map(|x| format!("{:.6}", x * scale)).unwrap_or_default();
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.model,
                r.k,
                r.scenario,
                r.action,
                num(r.d, 1e3),
                num(r.d_e, 1e3),
                num(r.dur_ratio, 1.0),
                r.success
            );
        }
        out
    }

    pub fn to_json(&self) -> crate::error::Result<String> {
        #[derive(Serialize)]
        struct Out<'a> {
            records: &'a [CaseRecord],
            summaries: Vec<GroupSummary>,
        }
        Ok(serde_json::to_string_pretty(&Out {
            records: &self.records,
            summaries: self.summaries(),
        })?)
    }

    pub fn from_json(s: &str) -> crate::error::Result<Self> {
        #[derive(Deserialize)]
        struct In {
            records: Vec<CaseRecord>,
        }
        let parsed: In = serde_json::from_str(s)?;
        Ok(Self::new(parsed.records))
    }
}
