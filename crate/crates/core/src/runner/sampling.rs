//! Seeded Monte-Carlo runs. Trial `i` draws from stream `i` of a ChaCha8
//! generator keyed by the seed, so results do not depend on scheduling.
//!
//! The state after a given outcome prefix is deterministic, so Born weights
//! are computed once per prefix (the exact tree) and each trial only walks
//! it, drawing by inverse CDF in declared outcome order.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::protocol::CompiledProtocol;

use super::engine::Semantics;
use super::tree::{run_exact, OutcomeTree};

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyRow {
    pub path: Vec<String>,
    pub count: u64,
    pub frequency: f64,
}

/// Observed leaves ordered by declared outcome index along the path.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyTable {
    pub measurements: Vec<String>,
    pub trials: u64,
    pub seed: u64,
    pub rows: Vec<FrequencyRow>,
}

impl FrequencyTable {
    pub fn frequency<S: AsRef<str>>(&self, path: &[S]) -> f64 {
        self.rows
            .iter()
            .find(|r| r.path.len() == path.len() && r.path.iter().zip(path).all(|(a, b)| a == b.as_ref()))
            .map_or(0.0, |r| r.frequency)
    }
}

pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

pub fn run_sampled(
    p: &CompiledProtocol,
    semantics: Semantics,
    external: Option<&[String]>,
    trials: u64,
    seed: u64,
) -> Result<FrequencyTable> {
    if trials == 0 {
        return Err(Error::Invalid("trials must be positive".into()));
    }
    let tree = run_exact(p, semantics, external)?;
    let children = child_lists(&tree);
    let paths: Vec<Vec<usize>> = (0..trials)
        .into_par_iter()
        .map(|trial| walk(&tree, &children, &mut trial_rng(seed, trial)))
        .collect();
    let mut counts: BTreeMap<Vec<usize>, u64> = BTreeMap::new();
    for path in paths {
        *counts.entry(path).or_default() += 1;
    }
    let rows = counts
        .into_iter()
        .map(|(idx, count)| {
            let mut node = 0;
            for i in &idx {
                node = children[node][*i];
            }
            FrequencyRow { path: tree.nodes[node].path.clone(), count, frequency: count as f64 / trials as f64 }
        })
        .collect();
    Ok(FrequencyTable { measurements: tree.measurements, trials, seed, rows })
}

/// Children of every node, in declared outcome order.
fn child_lists(tree: &OutcomeTree) -> Vec<Vec<usize>> {
    let index: HashMap<&[String], usize> = tree.nodes.iter().enumerate().map(|(i, n)| (n.path.as_slice(), i)).collect();
    let mut children = vec![Vec::new(); tree.nodes.len()];
    for (i, n) in tree.nodes.iter().enumerate().skip(1) {
        children[index[&n.path[..n.path.len() - 1]]].push(i);
    }
    children
}

fn walk(tree: &OutcomeTree, children: &[Vec<usize>], rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut node = 0;
    let mut path = Vec::new();
    while !tree.nodes[node].leaf {
        let kids = &children[node];
        let total: f64 = kids.iter().map(|k| tree.nodes[*k].p_cond).sum();
        let u: f64 = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut chosen = None;
        for (i, k) in kids.iter().enumerate() {
            let p = tree.nodes[*k].p_cond;
            acc += p;
            if u < acc && p > 0.0 {
                chosen = Some(i);
                break;
            }
        }
        // Rounding can leave u just past the last partial sum.
        let i = chosen.unwrap_or_else(|| kids.iter().rposition(|k| tree.nodes[*k].p_cond > 0.0).unwrap_or(0));
        path.push(i);
        node = kids[i];
    }
    path
}
