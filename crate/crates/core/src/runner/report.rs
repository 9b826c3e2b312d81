//! Machine-readable (JSON) and plain-text renderings. Floats are rounded to
//! 15 significant digits so reports are byte-stable.

use std::fmt::Write as _;

use serde::Serialize;

use crate::audit::AuditReport;
use crate::ledger::{KnowledgeEvent, LedgerSet};
use crate::{EQ_TOL, STRUCT_TOL};

use super::compare::CompareTable;
use super::sampling::FrequencyTable;
use super::tree::OutcomeTree;

pub fn sig15(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { 0.0 } else { x };
    }
    format!("{x:.14e}").parse().unwrap_or(x)
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("reports always serialize")
}

#[derive(Serialize)]
pub struct TreeRow {
    pub path: Vec<String>,
    pub p_cond: f64,
    pub p_cum: f64,
}

pub fn tree_rows(tree: &OutcomeTree) -> Vec<TreeRow> {
    tree.nodes
        .iter()
        .map(|n| TreeRow { path: n.path.clone(), p_cond: sig15(n.p_cond), p_cum: sig15(n.p_cum) })
        .collect()
}

#[derive(Serialize)]
pub struct AmplitudeRow {
    pub labels: Vec<String>,
    pub re: f64,
    pub im: f64,
}

#[derive(Serialize)]
pub struct EventRow {
    pub kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measurement: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probability: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub from: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

#[derive(Serialize)]
pub struct LedgerRow {
    pub agent: String,
    pub time: String,
    pub event: EventRow,
    pub state_norm_check: bool,
    pub amplitudes: Vec<AmplitudeRow>,
}

pub fn ledger_rows(ledgers: &LedgerSet) -> Vec<LedgerRow> {
    let mut rows = Vec::new();
    for l in ledgers.iter() {
        for e in l.history() {
            let mut event = EventRow {
                kind: e.event.kind(),
                measurement: None,
                label: None,
                probability: None,
                from: None,
                name: None,
            };
            match &e.event {
                KnowledgeEvent::Prepared => {}
                KnowledgeEvent::ModeledUnitary { name } => event.name = Some(name.clone()),
                KnowledgeEvent::OwnOutcome(r) | KnowledgeEvent::ReceivedOutcome { record: r, .. } => {
                    event.measurement = Some(r.measurement.clone());
                    event.label = Some(r.label.clone());
                    event.probability = Some(sig15(r.probability));
                    if let KnowledgeEvent::ReceivedOutcome { from, .. } = &e.event {
                        event.from = Some(from.clone());
                    }
                }
            }
            rows.push(LedgerRow {
                agent: l.agent().to_string(),
                time: e.time.to_string(),
                event,
                state_norm_check: (e.state.norm_sqr() - 1.0).abs() <= STRUCT_TOL,
                amplitudes: e
                    .state
                    .terms(EQ_TOL)
                    .into_iter()
                    .map(|(labels, a)| AmplitudeRow {
                        labels: labels.into_iter().map(String::from).collect(),
                        re: sig15(a.re),
                        im: sig15(a.im),
                    })
                    .collect(),
            });
        }
    }
    rows
}

#[derive(Serialize)]
struct TreeReport<'a> {
    mode: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    external_agents: Option<&'a [String]>,
    measurements: &'a [String],
    tree: Vec<TreeRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    record_probability: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ledgers: Option<Vec<LedgerRow>>,
}

/// Report for an exact run, optionally with the ledgers of one recorded path.
pub fn tree_json(
    mode: &str,
    external: Option<&[String]>,
    tree: &OutcomeTree,
    trace: Option<&super::engine::Trace>,
) -> String {
    to_json(&TreeReport {
        mode: mode.to_string(),
        external_agents: external,
        measurements: &tree.measurements,
        tree: tree_rows(tree),
        record_probability: trace.map(|t| sig15(t.probability)),
        ledgers: trace.map(|t| ledger_rows(&t.ledgers)),
    })
}

pub fn tree_table(tree: &OutcomeTree) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<40} {:>18} {:>18}", format!("path ({})", tree.measurements.join(", ")), "p_cond", "p_cum");
    for row in tree_rows(tree) {
        let indent = "  ".repeat(row.path.len());
        let label = if row.path.is_empty() { "(root)".to_string() } else { format!("{indent}{}", row.path.join(" > ")) };
        let _ = writeln!(out, "{label:<40} {:>18} {:>18}", row.p_cond, row.p_cum);
    }
    out
}

#[derive(Serialize)]
struct FrequencyJsonRow<'a> {
    path: &'a [String],
    count: u64,
    frequency: f64,
}

#[derive(Serialize)]
struct SampleReport<'a> {
    mode: &'static str,
    trials: u64,
    seed: u64,
    measurements: &'a [String],
    frequencies: Vec<FrequencyJsonRow<'a>>,
}

pub fn frequency_json(table: &FrequencyTable) -> String {
    to_json(&SampleReport {
        mode: "sample",
        trials: table.trials,
        seed: table.seed,
        measurements: &table.measurements,
        frequencies: table
            .rows
            .iter()
            .map(|r| FrequencyJsonRow { path: &r.path, count: r.count, frequency: sig15(r.frequency) })
            .collect(),
    })
}

pub fn frequency_table(table: &FrequencyTable) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "trials {}  seed {}", table.trials, table.seed);
    let _ = writeln!(out, "{:<40} {:>10} {:>18}", format!("path ({})", table.measurements.join(", ")), "count", "frequency");
    for r in &table.rows {
        let _ = writeln!(out, "{:<40} {:>10} {:>18}", r.path.join(" > "), r.count, sig15(r.frequency));
    }
    out
}

#[derive(Serialize)]
struct SyncedPath<'a> {
    path: &'a [String],
    p: f64,
}

#[derive(Serialize)]
struct CompareJsonRow<'a> {
    labels: &'a [String],
    external: f64,
    collapse_total: f64,
    synced_path: f64,
    synced_paths: Vec<SyncedPath<'a>>,
    diff_collapse: f64,
    diff_synced: f64,
}

#[derive(Serialize)]
struct CompareReport<'a> {
    measurements: &'a [String],
    rows: Vec<CompareJsonRow<'a>>,
}

pub fn compare_json(table: &CompareTable) -> String {
    to_json(&CompareReport {
        measurements: &table.measurements,
        rows: table
            .rows
            .iter()
            .map(|r| CompareJsonRow {
                labels: &r.labels,
                external: sig15(r.external),
                collapse_total: sig15(r.collapse_total),
                synced_path: sig15(r.synced_path),
                synced_paths: r.synced_paths.iter().map(|(path, p)| SyncedPath { path, p: sig15(*p) }).collect(),
                diff_collapse: sig15(r.diff_collapse),
                diff_synced: sig15(r.diff_synced),
            })
            .collect(),
    })
}

pub fn compare_text(table: &CompareTable) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<24} {:>18} {:>18} {:>18}",
        format!("({})", table.measurements.join(", ")),
        "external",
        "collapse total",
        "synced path"
    );
    for r in &table.rows {
        let _ = writeln!(
            out,
            "{:<24} {:>18} {:>18} {:>18}",
            r.labels.join(", "),
            sig15(r.external),
            sig15(r.collapse_total),
            sig15(r.synced_path)
        );
    }
    out
}

#[derive(Serialize)]
struct AuditJsonRow<'a> {
    statement_id: &'a str,
    agent: &'a str,
    verdict: String,
    used_time: String,
    latest_time: String,
    p_used: f64,
    p_latest: f64,
    asserted: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    inherited_from: Option<&'a str>,
    #[serde(skip_serializing_if = "<[String]>::is_empty")]
    missing: &'a [String],
}

pub fn audit_json(report: &AuditReport) -> String {
    let rows: Vec<AuditJsonRow<'_>> = report
        .rows
        .iter()
        .map(|r| AuditJsonRow {
            statement_id: &r.statement_id,
            agent: &r.agent,
            verdict: r.verdict.to_string(),
            used_time: r.used_time.to_string(),
            latest_time: r.latest_time.to_string(),
            p_used: sig15(r.p_used),
            p_latest: sig15(r.p_latest),
            asserted: sig15(r.asserted),
            inherited_from: r.inherited_from.as_deref(),
            missing: &r.missing,
        })
        .collect();
    to_json(&rows)
}

pub fn audit_table(report: &AuditReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<12} {:<6} {:<7} {:>6} {:>6} {:>18} {:>18}  note",
        "statement", "agent", "verdict", "used", "latest", "p_used", "p_latest"
    );
    for r in &report.rows {
        let note = match (&r.inherited_from, r.missing.is_empty()) {
            (Some(id), _) => format!("adopts {id}"),
            (None, false) => format!("not held: {}", r.missing.join(", ")),
            _ => String::new(),
        };
        let _ = writeln!(
            out,
            "{:<12} {:<6} {:<7} {:>6} {:>6} {:>18} {:>18}  {note}",
            r.statement_id,
            r.agent,
            r.verdict.to_string(),
            r.used_time.to_string(),
            r.latest_time.to_string(),
            sig15(r.p_used),
            sig15(r.p_latest)
        );
    }
    let _ = writeln!(out, "{} violation(s)", report.violations().len());
    out
}
