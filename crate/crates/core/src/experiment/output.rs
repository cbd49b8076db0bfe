use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{aggregate, EvalReport, ModelKind, Scenario};

const COLORS: [(ModelKind, &str); 5] = [
    (ModelKind::Dmp, "#1f77b4"),
    (ModelKind::TbGmr, "#2ca02c"),
    (ModelKind::TpGmm, "#2ca02c"),
    (ModelKind::Seds, "#d62728"),
    (ModelKind::SedsRelaxed, "#ff7f0e"),
];

fn color(model: ModelKind) -> &'static str {
    COLORS
        .iter()
        .find(|(m, _)| *m == model)
        .map(|(_, c)| *c)
        .unwrap_or("#000000")
}

/// SEDS success rates for one scenario and `K`, or over all `K` when `k` is
/// `None` (a case counts once if any `K` succeeded).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SedsSuccessRow {
    pub scenario: Scenario,
    #[serde(rename = "K")]
    pub k: Option<usize>,
    pub cases: usize,
    /// Fraction fitted with the solver and gates passing.
    pub optim_success: f64,
    /// Fraction that reached the goal within the relaxed time window.
    pub endpoint_success: f64,
}

pub fn seds_success_table(report: &EvalReport) -> Vec<SedsSuccessRow> {
    let scenarios: BTreeSet<Scenario> = report
        .records
        .iter()
        .filter(|r| r.model == ModelKind::Seds)
        .map(|r| r.scenario)
        .collect();
    let mut rows = Vec::new();
    for scenario in scenarios {
        // case -> K -> (fitted, relaxed success)
        let mut by_case: BTreeMap<&str, BTreeMap<usize, (bool, bool)>> = BTreeMap::new();
        for r in report.filter(scenario, ModelKind::Seds, None) {
            by_case
                .entry(&r.case)
                .or_default()
                .entry(r.k)
                .or_default()
                .0 = r.fitted;
        }
        for r in report.filter(scenario, ModelKind::SedsRelaxed, None) {
            by_case
                .entry(&r.case)
                .or_default()
                .entry(r.k)
                .or_default()
                .1 = r.success;
        }
        let ks: BTreeSet<usize> = by_case.values().flat_map(|m| m.keys().copied()).collect();
        let rate = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
        for &k in &ks {
            let cells: Vec<(bool, bool)> = by_case
                .values()
                .filter_map(|m| m.get(&k).copied())
                .collect();
            rows.push(SedsSuccessRow {
                scenario,
                k: Some(k),
                cases: cells.len(),
                optim_success: rate(cells.iter().filter(|c| c.0).count(), cells.len()),
                endpoint_success: rate(cells.iter().filter(|c| c.1).count(), cells.len()),
            });
        }
        let n = by_case.len();
        rows.push(SedsSuccessRow {
            scenario,
            k: None,
            cases: n,
            optim_success: rate(
                by_case.values().filter(|m| m.values().any(|c| c.0)).count(),
                n,
            ),
            endpoint_success: rate(
                by_case.values().filter(|m| m.values().any(|c| c.1)).count(),
                n,
            ),
        });
    }
    rows
}

fn seds_table_csv(rows: &[SedsSuccessRow]) -> String {
    let mut out = String::from("scenario,K,cases,optim_success,endpoint_success\n");
    for r in rows {
        let k = r.k.map(|k| k.to_string()).unwrap_or_else(|| "all".into());
        let _ = writeln!(
            out,
            "{},{},{},{:.4},{:.4}",
            r.scenario, k, r.cases, r.optim_success, r.endpoint_success
        );
    }
    out
}

pub fn render_seds_table(rows: &[SedsSuccessRow]) -> String {
    let row_h = 22.0;
    let height = 40.0 + row_h * (rows.len() as f64 + 1.0);
    let mut s = svg_open(560.0, height);
    let cols = [
        (10.0, "Scenario"),
        (170.0, "K"),
        (230.0, "Cases"),
        (310.0, "Optim. success"),
        (440.0, "End-point conv."),
    ];
    for (x, h) in cols {
        let _ = writeln!(s, r#"<text x="{x}" y="30" font-weight="bold">{h}</text>"#);
    }
    for (i, r) in rows.iter().enumerate() {
        let y = 30.0 + row_h * (i as f64 + 1.0);
        let k = r.k.map(|k| k.to_string()).unwrap_or_else(|| "all".into());
        let cells = [
            r.scenario.to_string(),
            k,
            r.cases.to_string(),
            format!("{:.1}%", 100.0 * r.optim_success),
            format!("{:.1}%", 100.0 * r.endpoint_success),
        ];
        for ((x, _), c) in cols.iter().zip(cells) {
            let _ = writeln!(s, r#"<text x="{x}" y="{y}">{c}</text>"#);
        }
    }
    s.push_str("</svg>\n");
    s
}

fn svg_open(w: f64, h: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"
    )
}

/// Median error against `K` per model with quartile whiskers, one panel per
/// scenario, on a log axis in millimeters.
pub fn render_error_plot(report: &EvalReport) -> String {
    // (K, median, q1, q3) per model
    type Series = BTreeMap<ModelKind, Vec<(usize, f64, f64, f64)>>;
    let mut series: BTreeMap<Scenario, Series> = BTreeMap::new();
    for g in report.summaries() {
        if let Some(a) = g.d {
            series
                .entry(g.scenario)
                .or_default()
                .entry(g.model)
                .or_default()
                .push((g.k, a.q1 * 1e3, a.median * 1e3, a.q3 * 1e3));
        }
    }
    let (pw, ph, left, top) = (520.0, 240.0, 60.0, 30.0);
    let height = (series.len().max(1) as f64) * (ph + 60.0);
    let mut s = svg_open(pw + left + 140.0, height);
    for (pi, (scenario, models)) in series.iter().enumerate() {
        let y0 = pi as f64 * (ph + 60.0) + top;
        let pts = models.values().flatten();
        let kmin = pts.clone().map(|p| p.0).min().unwrap_or(1) as f64;
        let kmax = pts.clone().map(|p| p.0).max().unwrap_or(2) as f64;
        let lo = pts
            .clone()
            .map(|p| p.1)
            .fold(f64::INFINITY, f64::min)
            .max(1e-3)
            .log10()
            .floor();
        let hi = pts
            .map(|p| p.3)
            .fold(0.0f64, f64::max)
            .max(1e-2)
            .log10()
            .ceil()
            .max(lo + 1.0);
        let x = |k: f64| {
            left + if kmax > kmin {
                (k - kmin) / (kmax - kmin) * pw
            } else {
                pw / 2.0
            }
        };
        let y = |v: f64| y0 + ph - (v.max(1e-3).log10() - lo) / (hi - lo) * ph;
        let _ = writeln!(
            s,
            r#"<text x="{left}" y="{}" font-weight="bold">{scenario}</text>"#,
            y0 - 10.0
        );
        let _ = writeln!(
            s,
            r#"<rect x="{left}" y="{y0}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        );
        for e in (lo as i32)..=(hi as i32) {
            let v = 10f64.powi(e);
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{:.2}" text-anchor="end">{v} mm</text>"#,
                left - 5.0,
                y(v) + 4.0
            );
        }
        for kk in (kmin as usize)..=(kmax as usize) {
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{}" text-anchor="middle">{kk}</text>"#,
                x(kk as f64),
                y0 + ph + 15.0
            );
        }
        for (mi, (model, pts)) in models.iter().enumerate() {
            let c = color(*model);
            let path: Vec<String> = pts
                .iter()
                .map(|p| format!("{:.2},{:.2}", x(p.0 as f64), y(p.2)))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{c}"/>"#,
                path.join(" ")
            );
            for p in pts {
                let px = x(p.0 as f64);
                let _ = writeln!(
                    s,
                    r#"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="{c}"/><circle cx="{px:.2}" cy="{:.2}" r="3" fill="{c}"/>"#,
                    y(p.1),
                    y(p.3),
                    y(p.2)
                );
            }
            let ly = y0 + 15.0 + 18.0 * mi as f64;
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{ly}" fill="{c}">{model}</text>"#,
                left + pw + 15.0
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Median end-point error per model over all `K`, with MAD bars.
fn render_endpoint_plot(report: &EvalReport) -> String {
    let mut bars: Vec<(Scenario, ModelKind, f64, f64)> = Vec::new();
    let groups: BTreeSet<(Scenario, ModelKind)> = report
        .records
        .iter()
        .map(|r| (r.scenario, r.model))
        .collect();
    for (scenario, model) in groups {
        if let Ok(a) = aggregate(&report.endpoint_errors(scenario, model, None)) {
            bars.push((scenario, model, a.median * 1e3, a.mad * 1e3));
        }
    }
    let (left, bw, ph, top) = (60.0, 40.0, 240.0, 30.0);
    let width = left + (bars.len().max(1) as f64) * (bw + 20.0) + 20.0;
    let mut s = svg_open(width, ph + top + 110.0);
    let max = bars.iter().map(|b| b.2 + b.3).fold(1e-3f64, f64::max);
    let y = |v: f64| top + ph - v / max * ph;
    let _ = writeln!(
        s,
        r#"<text x="{left}" y="20" font-weight="bold">end-point error (mm)</text>"#
    );
    let _ = writeln!(
        s,
        r#"<line x1="{left}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        top + ph,
        width - 10.0,
        top + ph
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{:.2}" text-anchor="end">{max:.2}</text>"#,
        left - 5.0,
        top + 4.0
    );
    for (i, (scenario, model, med, mad)) in bars.iter().enumerate() {
        let x = left + 10.0 + i as f64 * (bw + 20.0);
        let c = color(*model);
        let _ = writeln!(
            s,
            r#"<rect x="{x:.2}" y="{:.2}" width="{bw}" height="{:.2}" fill="{c}"/>"#,
            y(*med),
            top + ph - y(*med)
        );
        let cx = x + bw / 2.0;
        let _ = writeln!(
            s,
            r#"<line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="black"/>"#,
            y(med + mad),
            y((med - mad).max(0.0))
        );
        let _ = writeln!(
            s,
            r#"<text transform="translate({cx:.2},{}) rotate(60)">{model} {scenario}</text>"#,
            top + ph + 12.0
        );
    }
    s.push_str("</svg>\n");
    s
}

fn write(dir: &Path, name: &str, contents: &str, out: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    out.push(path);
    Ok(())
}

/// Writes the report as CSV and JSON plus the figures. Output depends only
/// on the records.
pub fn emit_report(report: &EvalReport, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    write(dir, "report.csv", &report.to_csv(), &mut out)?;
    write(dir, "report.json", &report.to_json()?, &mut out)?;
    write(dir, "error_vs_k.svg", &render_error_plot(report), &mut out)?;
    write(
        dir,
        "endpoint_error.svg",
        &render_endpoint_plot(report),
        &mut out,
    )?;
    let rows = seds_success_table(report);
    if !rows.is_empty() {
        write(dir, "seds_success.csv", &seds_table_csv(&rows), &mut out)?;
        write(dir, "seds_success.svg", &render_seds_table(&rows), &mut out)?;
    }
    Ok(out)
}
