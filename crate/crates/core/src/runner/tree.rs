//! Exact enumeration of outcome trees.

use crate::error::Result;
use crate::hilbert::{apply, normalize, StateVector};
use crate::measurement::born_probability;
use crate::protocol::CompiledProtocol;
use crate::IMPOSSIBLE_TOL;

use super::engine::{Engine, Semantics};

#[derive(Debug, Clone)]
pub struct TreeNode {
    /// Outcome labels from the root, one per branching measurement.
    pub path: Vec<String>,
    pub p_cond: f64,
    pub p_cum: f64,
    /// State after this node's outcome, evolved up to the next branching
    /// measurement (or the end). `None` for vanishing branches.
    pub state: Option<StateVector>,
    pub leaf: bool,
}

/// Nodes in depth-first preorder, root first. Vanishing branches are kept
/// as zero-probability leaves.
#[derive(Debug, Clone)]
pub struct OutcomeTree {
    pub measurements: Vec<String>,
    pub nodes: Vec<TreeNode>,
}

impl OutcomeTree {
    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn leaves(&self) -> impl Iterator<Item = &TreeNode> {
        self.nodes.iter().filter(|n| n.leaf)
    }

    pub fn node<S: AsRef<str>>(&self, path: &[S]) -> Option<&TreeNode> {
        self.nodes
            .iter()
            .find(|n| n.path.len() == path.len() && n.path.iter().zip(path).all(|(a, b)| a == b.as_ref()))
    }

    /// Cumulative probability of `path`; paths through a vanishing branch
    /// have probability 0.
    pub fn probability<S: AsRef<str>>(&self, path: &[S]) -> Option<f64> {
        if let Some(n) = self.node(path) {
            return Some(n.p_cum);
        }
        (0..path.len()).rev().find_map(|k| self.node(&path[..k]).filter(|n| n.leaf && n.p_cum == 0.0).map(|_| 0.0))
    }

    /// Sum of leaf probabilities whose label at each constrained measurement
    /// matches; measurements not listed are summed over.
    pub fn marginal(&self, constraints: &[(&str, &str)]) -> f64 {
        let positions: Vec<(usize, &str)> = constraints
            .iter()
            .filter_map(|(m, l)| self.measurements.iter().position(|x| x == m).map(|i| (i, *l)))
            .collect();
        if positions.len() < constraints.len() {
            return 0.0;
        }
        self.leaves()
            .filter(|n| positions.iter().all(|(i, l)| n.path.get(*i).is_some_and(|x| x == l)))
            .map(|n| n.p_cum)
            .sum()
    }
}

pub fn run_exact(p: &CompiledProtocol, semantics: Semantics, external: Option<&[String]>) -> Result<OutcomeTree> {
    let engine = Engine::new(p, semantics, external)?;
    let mut nodes = vec![TreeNode { path: vec![], p_cond: 1.0, p_cum: 1.0, state: None, leaf: false }];
    expand(&engine, &mut nodes, 0, 0, p.initial.clone())?;
    Ok(OutcomeTree { measurements: engine.branching_measurements(), nodes })
}

fn expand(engine: &Engine<'_>, nodes: &mut Vec<TreeNode>, idx: usize, from: usize, state: StateVector) -> Result<()> {
    let (k, state) = engine.advance(from, state)?;
    nodes[idx].state = Some(state.clone());
    if k == engine.protocol().steps.len() {
        nodes[idx].leaf = true;
        return Ok(());
    }
    let m = &engine.measure_at(k).measurement;
    let pre = m.premeasure(&state)?;
    for o in m.outcomes() {
        let mut p = born_probability(&pre, &o.projector)?;
        let vanishing = p <= IMPOSSIBLE_TOL;
        if vanishing {
            p = 0.0;
        }
        let mut path = nodes[idx].path.clone();
        path.push(o.label.clone());
        let child = nodes.len();
        nodes.push(TreeNode { path, p_cond: p, p_cum: nodes[idx].p_cum * p, state: None, leaf: vanishing });
        if !vanishing {
            let post = normalize(&apply(&o.projector, &pre)?)?;
            expand(engine, nodes, child, k + 1, post)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{builtin_epr, builtin_wfr, builtin_wfr_synced};

    fn check_completeness(tree: &OutcomeTree) {
        assert_eq!(tree.root().p_cum, 1.0);
        for (i, n) in tree.nodes.iter().enumerate() {
            if n.leaf {
                continue;
            }
            let depth = n.path.len();
            let sum: f64 = tree.nodes[i + 1..]
                .iter()
                .filter(|c| c.path.len() == depth + 1 && c.path[..depth] == n.path[..])
                .map(|c| c.p_cond)
                .sum();
            assert!((sum - 1.0).abs() < 1e-10, "{:?}", n.path);
        }
        let total: f64 = tree.leaves().map(|n| n.p_cum).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn wfr_external_leaf() {
        let p = builtin_wfr().compile().unwrap();
        let tree = run_exact(&p, Semantics::External, None).unwrap();
        check_completeness(&tree);
        assert_eq!(tree.measurements, vec!["wbar", "w"]);
        assert!((tree.probability(&["okbar", "ok"]).unwrap() - 1.0 / 12.0).abs() < 1e-12);
        assert!((tree.probability(&["okbar"]).unwrap() - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn wfr_synced_collapse_leaf() {
        let p = builtin_wfr_synced().compile().unwrap();
        let tree = run_exact(&p, Semantics::Collapse, None).unwrap();
        check_completeness(&tree);
        let leaf = tree.probability(&["tail", "up", "okbar", "ok"]).unwrap();
        assert!((leaf - 1.0 / 12.0).abs() < 1e-12);
        assert_eq!(tree.probability(&["head", "up", "okbar", "ok"]), Some(0.0));
        assert!(tree.leaves().any(|n| n.p_cum == 0.0));
    }

    #[test]
    fn epr_marginals() {
        let p = builtin_epr().compile().unwrap();
        let tree = run_exact(&p, Semantics::Collapse, None).unwrap();
        check_completeness(&tree);
        assert!((tree.marginal(&[("a", "up")]) - 0.5).abs() < 1e-12);
        assert!((tree.marginal(&[("b", "up")]) - 0.5).abs() < 1e-12);
        assert_eq!(tree.probability(&["up", "up"]), Some(0.0));
    }
}
