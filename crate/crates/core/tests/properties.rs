//! Randomized invariants. Each property runs at least 128 generated cases.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use qledger::audit::{builtin_table1_chain, run_audit, Basis, Claim, Asserted, Auditor, InferenceStep, Verdict};
use qledger::hilbert::{
    apply, apply_local, embed_op, normalize, reduced_purity, schmidt_rank, tensor_state, Bipartition, CompositeSpace,
    LinearOp, OpKind, StateVector, SubsystemSpec,
};
use qledger::ledger::ObserverLedger;
use qledger::measurement::{
    born_probability, chain_operator, collapse, event_probability, verify_equivalence, Outcome, OutcomeRecord,
    ProjectiveMeasurement,
};
use qledger::protocol::{
    builtin, builtin_wfr, parse, Amp, MapPair, MeasureSpec, OutcomeSpec, Protocol, ProtocolStep, StateSpec, StepBody,
    SubsystemDecl, UnitarySpec, BUILTIN_NAMES,
};
use qledger::runner::{run_exact, Engine, OutcomeTree, Semantics};
use qledger::TimeStamp;

const CASES: u32 = 128;

const LABELS: [&str; 3] = ["up", "down", "mid"];

fn space(dims: &[usize]) -> Arc<CompositeSpace> {
    let subs = dims
        .iter()
        .enumerate()
        .map(|(i, d)| SubsystemSpec::new(format!("Q{i}"), LABELS[..*d].iter().copied()).unwrap())
        .collect();
    CompositeSpace::new(subs).unwrap()
}

fn dims() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(2usize..=3, 1..=3)
}

fn raw(n: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0).prop_map(|(re, im)| Complex64::new(re, im)), n)
}

fn state_in(space: Arc<CompositeSpace>, amps: Vec<Complex64>) -> Option<StateVector> {
    let v = StateVector::new(space, amps).ok()?;
    (v.norm_sqr() > 1e-3).then(|| normalize(&v).unwrap())
}

/// Haar-ish unitary from the QR factor of a random complex matrix.
fn unitary_from(n: usize, entries: Vec<Complex64>) -> DMatrix<Complex64> {
    DMatrix::from_vec(n, n, entries).qr().q()
}

fn unitary_op(space: &Arc<CompositeSpace>, entries: Vec<Complex64>) -> Option<LinearOp> {
    let n = space.total_dim();
    let q = unitary_from(n, entries);
    LinearOp::new(space.clone(), q, OpKind::Unitary).ok()
}

/// Projector onto the first `rank` columns of a random unitary.
fn projector_op(space: &Arc<CompositeSpace>, entries: Vec<Complex64>, rank: usize) -> Option<LinearOp> {
    let n = space.total_dim();
    let q = unitary_from(n, entries);
    let vectors: Vec<StateVector> = (0..rank.clamp(1, n))
        .map(|k| StateVector::new(space.clone(), q.column(k).iter().copied().collect()).unwrap())
        .collect();
    LinearOp::projector_onto(space.clone(), &vectors).ok()
}

/// A random state on a random space together with a random square matrix
/// and a random rank.
fn scene() -> impl Strategy<Value = (Arc<CompositeSpace>, StateVector, Vec<Complex64>, usize)> {
    dims()
        .prop_flat_map(|d| {
            let s = space(&d);
            let n = s.total_dim();
            (Just(s), raw(n), raw(n * n), 1..n)
        })
        .prop_filter_map("degenerate state", |(s, amps, m, rank)| Some((s.clone(), state_in(s, amps)?, m, rank)))
}

fn leaf_sum(tree: &OutcomeTree) -> f64 {
    tree.leaves().map(|n| n.p_cum).sum()
}

fn children_complete(tree: &OutcomeTree) -> Result<(), TestCaseError> {
    for parent in tree.nodes.iter().filter(|n| !n.leaf && n.p_cum > 0.0) {
        let total: f64 = tree
            .nodes
            .iter()
            .filter(|c| c.path.len() == parent.path.len() + 1 && c.path.starts_with(&parent.path))
            .map(|c| c.p_cond)
            .sum();
        prop_assert!((total - 1.0).abs() <= 1e-10, "children of {:?} sum to {}", parent.path, total);
    }
    Ok(())
}

fn labels_of(dims: &[usize], mut index: usize) -> Vec<String> {
    let mut out = vec![String::new(); dims.len()];
    for (i, d) in dims.iter().enumerate().rev() {
        out[i] = LABELS[index % d].to_string();
        index /= d;
    }
    out
}

/// Raw ingredients of one generated step.
type StepSeed = (u8, usize, usize, bool, Vec<usize>);

fn build_protocol(
    dims: &[usize],
    n_agents: usize,
    terms: &[(usize, Complex64)],
    seeds: &[StepSeed],
) -> Option<Protocol> {
    let mut picked: Vec<(usize, Complex64)> = Vec::new();
    for (i, a) in terms {
        if !picked.iter().any(|(j, _)| j == i) {
            picked.push((*i, *a));
        }
    }
    let norm: f64 = picked.iter().map(|(_, a)| a.norm_sqr()).sum::<f64>().sqrt();
    if norm < 0.1 {
        return None;
    }
    let mut initial = StateSpec::default();
    for (i, a) in &picked {
        initial = initial.term(Amp::Complex { re: a.re / norm, im: a.im / norm }, labels_of(dims, *i));
    }
    let agents: Vec<String> = (0..n_agents).map(|i| format!("A{i}")).collect();
    let subsystem = |t: usize| format!("Q{}", t % dims.len());
    let mut steps = Vec::new();
    for (k, (kind, target, agent, flag, to)) in seeds.iter().enumerate() {
        let time = TimeStamp::new(1, k as u32 + 1, 0);
        let name = format!("s{k}");
        let t = target % dims.len();
        let d = dims[t];
        let body = match kind % 3 {
            0 => {
                let outcomes = if *flag {
                    vec![
                        OutcomeSpec { label: "yes".into(), vectors: vec![StateSpec::basis([LABELS[0]])], complement: false },
                        OutcomeSpec { label: "no".into(), vectors: vec![], complement: true },
                    ]
                } else {
                    LABELS[..d]
                        .iter()
                        .map(|l| OutcomeSpec { label: l.to_string(), vectors: vec![StateSpec::basis([*l])], complement: false })
                        .collect()
                };
                let me = agent % n_agents;
                let mut broadcast_to: Vec<String> = Vec::new();
                for a in to.iter().map(|a| a % n_agents).filter(|a| *a != me) {
                    if !broadcast_to.contains(&agents[a]) {
                        broadcast_to.push(agents[a].clone());
                    }
                }
                let broadcast_delay = u32::from(!broadcast_to.is_empty());
                StepBody::Measure(MeasureSpec {
                    agent: agents[me].clone(),
                    targets: vec![subsystem(t)],
                    outcomes,
                    premeasurement: None,
                    broadcast_to,
                    broadcast_delay,
                })
            }
            1 => {
                let map = if *flag {
                    (0..d)
                        .map(|j| MapPair { from: StateSpec::basis([LABELS[j]]), to: StateSpec::basis([LABELS[(j + 1) % d]]) })
                        .collect()
                } else {
                    let h = Amp::sqrt(1, 2);
                    vec![
                        MapPair {
                            from: StateSpec::basis([LABELS[0]]),
                            to: StateSpec::default().term(h, [LABELS[0]]).term(h, [LABELS[1]]),
                        },
                        MapPair {
                            from: StateSpec::basis([LABELS[1]]),
                            to: StateSpec::default().term(h, [LABELS[0]]).term(Amp::neg_sqrt(1, 2), [LABELS[1]]),
                        },
                    ]
                };
                StepBody::Unitary(UnitarySpec { targets: vec![subsystem(t)], map })
            }
            _ => StepBody::Infer { agent: agents[agent % n_agents].clone() },
        };
        steps.push(ProtocolStep { time, name, body });
    }
    Some(Protocol {
        subsystems: dims.iter().enumerate().map(|(i, d)| SubsystemDecl::new(format!("Q{i}"), LABELS[..*d].iter().copied())).collect(),
        agents,
        initial,
        steps,
    })
}

fn arb_protocol() -> impl Strategy<Value = Protocol> {
    (dims(), 1usize..=3)
        .prop_flat_map(|(d, n_agents)| {
            let total: usize = d.iter().product();
            let terms = prop::collection::vec((0..total, (-1.0f64..1.0, -1.0f64..1.0)), 1..=3);
            let seeds = prop::collection::vec(
                (0u8..3, 0usize..3, 0usize..3, any::<bool>(), prop::collection::vec(0usize..3, 0..=2)),
                1..=5,
            );
            (Just(d), Just(n_agents), terms, seeds)
        })
        .prop_filter_map("vanishing initial state", |(d, n_agents, terms, seeds)| {
            let terms: Vec<(usize, Complex64)> = terms.into_iter().map(|(i, (re, im))| (i, Complex64::new(re, im))).collect();
            build_protocol(&d, n_agents, &terms, &seeds)
        })
}

fn with_global_phase(p: &Protocol, theta: f64) -> Protocol {
    let phase = Complex64::from_polar(1.0, theta);
    let mut q = p.clone();
    for t in &mut q.initial.terms {
        let v = t.amp.value() * phase;
        t.amp = Amp::Complex { re: v.re, im: v.im };
    }
    q
}

proptest! {
    #![proptest_config(ProptestConfig { cases: CASES, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn projectors_are_idempotent((s, _, m, rank) in scene()) {
        let p = projector_op(&s, m, rank).unwrap();
        let twice = p.compose(&p).unwrap();
        prop_assert!(twice.max_abs_diff(&p).unwrap() <= 1e-10);
        let c = p.complement().unwrap();
        prop_assert!(c.compose(&c).unwrap().max_abs_diff(&c).unwrap() <= 1e-10);
    }

    #[test]
    fn measurements_are_complete((s, psi, m, rank) in scene()) {
        let p = projector_op(&s, m, rank).unwrap();
        let binary = ProjectiveMeasurement::binary("m", "in", p, "out").unwrap();
        let total: f64 = binary.probabilities(&psi).unwrap().iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-10);
        let basis: Vec<Outcome> = (0..s.total_dim())
            .map(|i| {
                let labels: Vec<String> = s.labels_of(i).into_iter().map(String::from).collect();
                let v = StateVector::basis_state(s.clone(), &labels).unwrap();
                Outcome { label: labels.join(","), projector: LinearOp::projector_onto(s.clone(), &[v]).unwrap() }
            })
            .collect();
        let full = ProjectiveMeasurement::new("b", basis, None).unwrap();
        let total: f64 = full.probabilities(&psi).unwrap().iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn unitaries_preserve_norm((s, psi, m, _) in scene(), scale in 0.1f64..3.0) {
        let u = unitary_op(&s, m).unwrap();
        let scaled = psi.scaled(Complex64::new(scale, 0.0)).unwrap();
        prop_assert!((apply(&u, &scaled).unwrap().norm() - scaled.norm()).abs() <= 1e-10);
    }

    #[test]
    fn probabilities_ignore_global_phase((s, psi, m, rank) in scene(), theta in 0.0..std::f64::consts::TAU) {
        let p = projector_op(&s, m, rank).unwrap();
        let shifted = psi.with_global_phase(theta);
        let a = born_probability(&psi, &p).unwrap();
        let b = born_probability(&shifted, &p).unwrap();
        prop_assert!((a - b).abs() <= 1e-10);
        let names: Vec<&str> = s.names().take(1).collect();
        if s.subsystems().len() > 1 {
            let cut = Bipartition::new(&s, &names).unwrap();
            prop_assert_eq!(
                schmidt_rank(&psi, &cut, 1e-9).unwrap().0,
                schmidt_rank(&shifted, &cut, 1e-9).unwrap().0
            );
        }
    }

    #[test]
    fn protocol_probabilities_ignore_global_phase(p in arb_protocol(), theta in 0.0..std::f64::consts::TAU) {
        let a = run_exact(&p.compile().unwrap(), Semantics::Collapse, None).unwrap();
        let b = run_exact(&with_global_phase(&p, theta).compile().unwrap(), Semantics::Collapse, None).unwrap();
        prop_assert_eq!(a.nodes.len(), b.nodes.len());
        for (x, y) in a.nodes.iter().zip(&b.nodes) {
            prop_assert_eq!(&x.path, &y.path);
            prop_assert!((x.p_cum - y.p_cum).abs() <= 1e-10);
        }
    }

    #[test]
    fn audit_verdicts_ignore_global_phase(theta in 0.0..std::f64::consts::TAU) {
        let chain = builtin_table1_chain();
        let base = run_audit(&builtin_wfr(), &chain).unwrap();
        let shifted = run_audit(&with_global_phase(&builtin_wfr(), theta), &chain).unwrap();
        prop_assert_eq!(base.rows.len(), shifted.rows.len());
        for (x, y) in base.rows.iter().zip(&shifted.rows) {
            prop_assert_eq!(x.verdict, y.verdict);
            prop_assert!((x.p_used - y.p_used).abs() <= 1e-10 && (x.p_latest - y.p_latest).abs() <= 1e-10);
        }
    }

    #[test]
    fn protocols_round_trip(p in arb_protocol()) {
        let text = p.to_json();
        let back = parse(text.as_bytes()).unwrap();
        prop_assert_eq!(&back, &p);
        prop_assert_eq!(back.to_json(), text);
    }

    #[test]
    fn chain_matches_sequential_product(
        (s, psi, m1, r1) in scene(),
        m2 in raw(729), m3 in raw(729), m4 in raw(729),
    ) {
        let n = s.total_dim();
        let u = unitary_op(&s, m2[..n * n].to_vec()).unwrap();
        let p1 = projector_op(&s, m1, r1).unwrap();
        let p2 = projector_op(&s, m3[..n * n].to_vec(), (r1 % n).max(1)).unwrap();
        let v = unitary_op(&s, m4[..n * n].to_vec()).unwrap();
        let steps = [(None, &p1), (Some(&u), &p2), (Some(&v), &p1)];
        prop_assert!(verify_equivalence(&psi, &steps).unwrap() <= 1e-10);
    }

    #[test]
    fn disjoint_factors_commute(
        (d0, d1) in (2usize..=3, 2usize..=3),
        a in raw(9), b in raw(9), c in raw(81), amps in raw(9), rank in 1usize..=2,
    ) {
        let s = space(&[d0, d1]);
        let left = space(&[d0]);
        let right = CompositeSpace::new(vec![SubsystemSpec::new("Q1", LABELS[..d1].iter().copied()).unwrap()]).unwrap();
        let psi = state_in(s.clone(), amps[..d0 * d1].to_vec());
        prop_assume!(psi.is_some());
        let psi = psi.unwrap();
        let p = embed_op(&projector_op(&left, a[..d0 * d0].to_vec(), rank).unwrap(), &s).unwrap();
        let u = embed_op(&unitary_op(&right, b[..d1 * d1].to_vec()).unwrap(), &s).unwrap();
        let n = d0 * d1;
        let q = projector_op(&s, c[..n * n].to_vec(), rank).unwrap();
        let one = event_probability(&chain_operator(&[&p, &u, &q]).unwrap(), &psi).unwrap();
        let two = event_probability(&chain_operator(&[&u, &p, &q]).unwrap(), &psi).unwrap();
        prop_assert!((one - two).abs() <= 1e-12);
    }

    #[test]
    fn local_application_matches_embedding(
        (d0, d1) in (2usize..=3, 2usize..=3), a in raw(9), amps in raw(9), rank in 1usize..=2,
    ) {
        let s = space(&[d0, d1]);
        let right = CompositeSpace::new(vec![SubsystemSpec::new("Q1", LABELS[..d1].iter().copied()).unwrap()]).unwrap();
        let psi = state_in(s.clone(), amps[..d0 * d1].to_vec());
        prop_assume!(psi.is_some());
        let psi = psi.unwrap();
        let p = projector_op(&right, a[..d1 * d1].to_vec(), rank).unwrap();
        let slow = apply(&embed_op(&p, &s).unwrap(), &psi).unwrap();
        let fast = apply_local(&p, &psi).unwrap();
        prop_assert!(slow.max_abs_diff(&fast).unwrap() <= 1e-12);
    }

    #[test]
    fn product_states_are_pure((d0, d1) in (2usize..=3, 2usize..=3), a in raw(3), b in raw(3)) {
        let x = state_in(space(&[d0]), a[..d0].to_vec());
        let right = CompositeSpace::new(vec![SubsystemSpec::new("Q1", LABELS[..d1].iter().copied()).unwrap()]).unwrap();
        let y = state_in(right, b[..d1].to_vec());
        prop_assume!(x.is_some() && y.is_some());
        let joint = tensor_state(&[x.unwrap(), y.unwrap()]).unwrap();
        prop_assert!((reduced_purity(&joint, &["Q0"]).unwrap() - 1.0).abs() <= 1e-10);
        prop_assert!((reduced_purity(&joint, &["Q1"]).unwrap() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn repeated_receipt_is_idempotent((s, psi, m, rank) in scene()) {
        let p = projector_op(&s, m, rank).unwrap();
        prop_assume!(born_probability(&psi, &p).unwrap() > 1e-6);
        let rec = OutcomeRecord { measurement: "m".into(), label: "in".into(), probability: 1.0, time: TimeStamp::new(1, 1, 0) };
        let mut ledger = ObserverLedger::new("X", psi).unwrap();
        ledger.receive(&rec, &p, "Y", TimeStamp::new(1, 1, 1)).unwrap();
        let once = ledger.current().clone();
        ledger.receive(&rec, &p, "Y", TimeStamp::new(1, 1, 2)).unwrap();
        prop_assert!(ledger.current().max_abs_diff(&once).unwrap() <= 1e-12);
        prop_assert_eq!(ledger.history().len(), 3);
        prop_assert!(ledger.history().iter().all(|e| (e.state.norm_sqr() - 1.0).abs() <= 1e-10));
    }

    #[test]
    fn disjoint_receipts_commute(
        (d0, d1) in (2usize..=3, 2usize..=3), a in raw(9), b in raw(9), amps in raw(9), rank in 1usize..=2,
    ) {
        let s = space(&[d0, d1]);
        let left = space(&[d0]);
        let right = CompositeSpace::new(vec![SubsystemSpec::new("Q1", LABELS[..d1].iter().copied()).unwrap()]).unwrap();
        let psi = state_in(s.clone(), amps[..d0 * d1].to_vec());
        prop_assume!(psi.is_some());
        let psi = psi.unwrap();
        let p = embed_op(&projector_op(&left, a[..d0 * d0].to_vec(), rank).unwrap(), &s).unwrap();
        let q = embed_op(&projector_op(&right, b[..d1 * d1].to_vec(), rank).unwrap(), &s).unwrap();
        let both = LinearOp::new(s.clone(), q.compose(&p).unwrap().matrix().clone(), OpKind::Projector).unwrap();
        prop_assume!(born_probability(&psi, &both).unwrap() > 1e-6);
        let rec = |m: &str| OutcomeRecord { measurement: m.into(), label: "in".into(), probability: 1.0, time: TimeStamp::new(1, 1, 0) };
        let run = |first: &LinearOp, second: &LinearOp| {
            let mut l = ObserverLedger::new("X", psi.clone()).unwrap();
            l.receive(&rec("a"), first, "Y", TimeStamp::new(1, 1, 1)).unwrap();
            l.receive(&rec("b"), second, "Z", TimeStamp::new(1, 1, 2)).unwrap();
            l.current().clone()
        };
        prop_assert!(run(&p, &q).max_abs_diff(&run(&q, &p)).unwrap() <= 1e-12);
        let direct = collapse(&psi, &both).unwrap();
        prop_assert!(run(&p, &q).max_abs_diff(&direct).unwrap() <= 1e-12);
    }

    #[test]
    fn synchronisation_is_idempotent(p in arb_protocol()) {
        let once = p.synchronized(1);
        prop_assert_eq!(once.synchronized(1), once);
    }

    #[test]
    fn outcome_trees_are_complete(p in arb_protocol()) {
        let compiled = p.compile().unwrap();
        for semantics in [Semantics::Collapse, Semantics::External] {
            let tree = run_exact(&compiled, semantics, None).unwrap();
            prop_assert!((leaf_sum(&tree) - 1.0).abs() <= 1e-9);
            children_complete(&tree)?;
        }
        let synced = run_exact(&p.synchronized(1).compile().unwrap(), Semantics::Collapse, None).unwrap();
        prop_assert!((leaf_sum(&synced) - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn latest_own_entry_never_breaks_rule2(
        leaf in 0usize..16, agent in 0usize..4, at in 0usize..4, target in 0usize..4, label in 0usize..2, asserted in 0.0f64..=1.0,
    ) {
        let p = builtin_wfr().compile().unwrap();
        let tree = run_exact(&p, Semantics::Collapse, None).unwrap();
        let live: Vec<_> = tree.leaves().filter(|n| n.p_cum > 0.0).collect();
        let path = &live[leaf % live.len()].path;
        let record = tree.measurements.iter().cloned().zip(path.iter().cloned()).collect();
        let ledgers = Engine::new(&p, Semantics::Collapse, None).unwrap().run_path(&record).unwrap().ledgers;
        let who = &p.agents[agent];
        let stated_at: TimeStamp = ["1:02", "1:12", "1:22", "1:32"][at].parse().unwrap();
        let latest = ledgers.get(who).unwrap().entry_at(stated_at).unwrap().time;
        let (_, m) = p.measures().nth(target).unwrap();
        let outcome = m.measurement.outcomes()[label].label.clone();
        let step = InferenceStep {
            id: "probe".into(),
            agent: who.clone(),
            holder: None,
            stated_at,
            basis: Basis::Entry { agent: who.clone(), time: latest },
            claim: Claim { measurement: p.measures().nth(target).unwrap().0.name.clone(), outcome, asserted: Asserted(asserted) },
            future_ops: vec![],
            provenance: vec![],
        };
        let steps = [step];
        let auditor = Auditor::new(&p, &ledgers, &steps);
        if let Ok(report) = auditor.audit() {
            prop_assert!(report.rows.iter().all(|r| r.verdict != Verdict::Rule2), "{:?}", report.rows);
        }
    }
}

#[test]
fn builtins_round_trip() {
    for name in BUILTIN_NAMES {
        let p = builtin(name).unwrap();
        assert_eq!(parse(p.to_json().as_bytes()).unwrap(), p, "{name}");
    }
}
