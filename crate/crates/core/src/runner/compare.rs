//! Side-by-side probabilities of the externally read outcomes under the
//! external (unitary) view and per-step collapse, with and without
//! synchronisation.

use crate::error::Result;
use crate::protocol::Protocol;

use super::engine::Semantics;
use super::tree::{run_exact, OutcomeTree};

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    /// One label per externally read measurement.
    pub labels: Vec<String>,
    pub external: f64,
    /// No-sync protocol, collapse at every step, summed over all other outcomes.
    pub collapse_total: f64,
    /// Synchronised protocol: every full collapse path ending in `labels`
    /// with nonzero probability.
    pub synced_paths: Vec<(Vec<String>, f64)>,
    /// Largest of `synced_paths`.
    pub synced_path: f64,
    pub diff_collapse: f64,
    pub diff_synced: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareTable {
    pub measurements: Vec<String>,
    pub rows: Vec<CompareRow>,
}

pub fn compare_modes(p: &Protocol, external: Option<&[String]>) -> Result<CompareTable> {
    let compiled = p.compile().map_err(invalid)?;
    let ext = run_exact(&compiled, Semantics::External, external)?;
    if ext.measurements.is_empty() {
        return Ok(CompareTable { measurements: vec![], rows: vec![] });
    }
    let collapse = run_exact(&compiled, Semantics::Collapse, None)?;
    let synced = run_exact(&p.synchronized(1).compile().map_err(invalid)?, Semantics::Collapse, None)?;

    let label_sets: Vec<Vec<String>> = ext
        .measurements
        .iter()
        .map(|m| {
            let (_, cm) = compiled.measure(m).expect("branching measurement exists");
            cm.measurement.outcomes().iter().map(|o| o.label.clone()).collect()
        })
        .collect();
    let mut rows = Vec::new();
    for labels in cartesian(&label_sets) {
        let constraints: Vec<(&str, &str)> =
            ext.measurements.iter().map(String::as_str).zip(labels.iter().map(String::as_str)).collect();
        let external = ext.probability(&labels).unwrap_or(0.0);
        let collapse_total = collapse.marginal(&constraints);
        let synced_paths = matching_leaves(&synced, &constraints);
        let synced_path = synced_paths.iter().map(|(_, p)| *p).fold(0.0, f64::max);
        rows.push(CompareRow {
            diff_collapse: collapse_total - external,
            diff_synced: synced_path - external,
            labels,
            external,
            collapse_total,
            synced_paths,
            synced_path,
        });
    }
    Ok(CompareTable { measurements: ext.measurements, rows })
}

fn invalid(diags: Vec<crate::protocol::Diagnostic>) -> crate::Error {
    crate::Error::Invalid(diags.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))
}

fn matching_leaves(tree: &OutcomeTree, constraints: &[(&str, &str)]) -> Vec<(Vec<String>, f64)> {
    let positions: Vec<(usize, &str)> = constraints
        .iter()
        .filter_map(|(m, l)| tree.measurements.iter().position(|x| x == m).map(|i| (i, *l)))
        .collect();
    tree.leaves()
        .filter(|n| n.p_cum > 0.0 && positions.iter().all(|(i, l)| n.path.get(*i).is_some_and(|x| x == l)))
        .map(|n| (n.path.clone(), n.p_cum))
        .collect()
}

fn cartesian(sets: &[Vec<String>]) -> Vec<Vec<String>> {
    sets.iter().fold(vec![vec![]], |acc, set| {
        acc.iter()
            .flat_map(|prefix| {
                set.iter().map(move |x| {
                    let mut v = prefix.clone();
                    v.push(x.clone());
                    v
                })
            })
            .collect()
    })
}
