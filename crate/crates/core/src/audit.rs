//! Inference chains and the two information rules.
//!
//! A statement claims a probability for a future (or past) outcome,
//! evaluated from some ledger entry through a list of bridging operations.
//! Rule 1: the entry may only carry outcomes the stater actually holds (or
//! that its own state makes certain). Rule 2: if the stater's own ledger
//! has a newer entry that changes the probability, the statement is stale.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::hilbert::{LinearOp, StateVector};
use crate::ledger::{LedgerSet, ObserverLedger};
use crate::measurement::{born_probability, sequential_joint};
use crate::protocol::{Action, CompiledProtocol, Protocol};
use crate::runner::engine::{Engine, Semantics};
use crate::time::TimeStamp;
use crate::{IMPOSSIBLE_TOL, STRUCT_TOL};

/// Where a statement's probability comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Basis {
    /// The state held by `agent` at `time` (its latest entry at or before).
    Entry { agent: String, time: TimeStamp },
    /// Adopt another statement's basis and bridge.
    Statement(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum BridgeOp {
    /// A unitary step of the protocol, by name.
    Unitary(String),
    /// Condition on an outcome (its premeasurement is applied first).
    Outcome { measurement: String, label: String },
}

/// Probability in `[0, 1]`; documents may write `"certain"` or `"impossible"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Asserted(pub f64);

impl Serialize for Asserted {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.0)
    }
}

impl<'de> Deserialize<'de> for Asserted {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Word(String),
        }
        let p = match Raw::deserialize(d)? {
            Raw::Number(x) => x,
            Raw::Word(w) if w == "certain" => 1.0,
            Raw::Word(w) if w == "impossible" => 0.0,
            Raw::Word(w) => return Err(serde::de::Error::custom(format!("unknown probability word `{w}`"))),
        };
        if !(0.0..=1.0).contains(&p) {
            return Err(serde::de::Error::custom(format!("asserted probability {p} outside [0, 1]")));
        }
        Ok(Asserted(p))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Claim {
    pub measurement: String,
    pub outcome: String,
    pub asserted: Asserted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferenceStep {
    pub id: String,
    /// The agent making the statement.
    pub agent: String,
    /// Whose belief the statement reports, when nested ("F is certain that
    /// Fbar is certain"). Defaults to `agent`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holder: Option<String>,
    pub stated_at: TimeStamp,
    pub basis: Basis,
    pub claim: Claim,
    #[serde(default)]
    pub future_ops: Vec<BridgeOp>,
    /// Statement ids this one was derived through, innermost last.
    #[serde(default)]
    pub provenance: Vec<String>,
}

impl InferenceStep {
    pub fn holder(&self) -> &str {
        self.holder.as_deref().unwrap_or(&self.agent)
    }
}

/// Statements plus the outcome record whose ledgers they are checked against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct InferenceChain {
    pub record: BTreeMap<String, String>,
    pub steps: Vec<InferenceStep>,
}

impl InferenceChain {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Invalid(format!("chain document: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("chains always serialize")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Ok,
    Rule1,
    Rule2,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Ok => "ok",
            Verdict::Rule1 => "rule1",
            Verdict::Rule2 => "rule2",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditRow {
    pub statement_id: String,
    pub agent: String,
    pub verdict: Verdict,
    /// Time of the ledger entry the statement rests on.
    pub used_time: TimeStamp,
    /// Time of the holder's latest entry when the statement is made.
    pub latest_time: TimeStamp,
    pub p_used: f64,
    pub p_latest: f64,
    pub asserted: f64,
    /// Set when the statement adopts one already flagged under rule 2.
    pub inherited_from: Option<String>,
    /// Outcomes the basis carries that the stater does not hold (rule 1).
    pub missing: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub rule: u8,
    pub statement_id: String,
    pub used_time: TimeStamp,
    pub latest_time: TimeStamp,
    pub p_used: f64,
    pub p_latest: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AuditReport {
    pub rows: Vec<AuditRow>,
}

impl AuditReport {
    pub fn violations(&self) -> Vec<Violation> {
        self.rows
            .iter()
            .filter_map(|r| {
                let rule = match r.verdict {
                    Verdict::Ok => return None,
                    Verdict::Rule1 => 1,
                    Verdict::Rule2 => 2,
                };
                Some(Violation {
                    rule,
                    statement_id: r.statement_id.clone(),
                    used_time: r.used_time,
                    latest_time: r.latest_time,
                    p_used: r.p_used,
                    p_latest: r.p_latest,
                })
            })
            .collect()
    }

    pub fn is_clean(&self) -> bool {
        self.rows.iter().all(|r| r.verdict == Verdict::Ok)
    }
}

/// A statement's basis followed through statement references.
#[derive(Debug, Clone)]
struct Resolved {
    agent: String,
    time: TimeStamp,
    bridge: Vec<BridgeOp>,
}

/// Checks statements against the ledgers produced by one protocol run.
pub struct Auditor<'a> {
    protocol: &'a CompiledProtocol,
    ledgers: &'a LedgerSet,
    chain: &'a [InferenceStep],
}

impl<'a> Auditor<'a> {
    pub fn new(protocol: &'a CompiledProtocol, ledgers: &'a LedgerSet, chain: &'a [InferenceStep]) -> Self {
        Auditor { protocol, ledgers, chain }
    }

    fn statement(&self, id: &str) -> Result<&'a InferenceStep> {
        self.chain
            .iter()
            .find(|s| s.id == id)
            .ok_or_else(|| Error::Unresolved(format!("unknown statement `{id}`")))
    }

    fn resolve(&self, step: &InferenceStep) -> Result<Resolved> {
        let mut seen = vec![step.id.as_str()];
        let mut extra: Vec<&[BridgeOp]> = vec![&step.future_ops];
        let mut basis = &step.basis;
        loop {
            match basis {
                Basis::Entry { agent, time } => {
                    if *time > step.stated_at {
                        return Err(Error::Unresolved(format!("`{}` rests on a later entry ({time})", step.id)));
                    }
                    let bridge = extra.iter().rev().flat_map(|ops| ops.iter().cloned()).collect();
                    return Ok(Resolved { agent: agent.clone(), time: *time, bridge });
                }
                Basis::Statement(id) => {
                    if seen.contains(&id.as_str()) {
                        return Err(Error::Unresolved(format!("statement `{id}` references itself")));
                    }
                    seen.push(id);
                    let s = self.statement(id)?;
                    extra.push(&s.future_ops);
                    basis = &s.basis;
                }
            }
        }
    }

    fn measurement_time(&self, name: &str) -> Result<TimeStamp> {
        self.protocol
            .measure(name)
            .map(|(t, _)| t)
            .ok_or_else(|| Error::Unresolved(format!("unknown measurement `{name}`")))
    }

    /// The bridge plus the claim as sequential steps, dropping whatever the
    /// entry already accounts for.
    fn steps_from(
        &self,
        ledger: &ObserverLedger,
        entry_time: TimeStamp,
        bridge: &[BridgeOp],
        claim: Option<&Claim>,
    ) -> Result<Vec<(Option<LinearOp>, LinearOp)>> {
        let space = &self.protocol.space;
        let mut out = Vec::new();
        let claim_op = claim.map(|c| BridgeOp::Outcome { measurement: c.measurement.clone(), label: c.outcome.clone() });
        let n = bridge.len();
        for (i, op) in bridge.iter().chain(claim_op.iter()).enumerate() {
            match op {
                BridgeOp::Unitary(name) => {
                    let step = self
                        .protocol
                        .step(name)
                        .ok_or_else(|| Error::Unresolved(format!("unknown unitary step `{name}`")))?;
                    let Action::Unitary(u) = &step.action else {
                        return Err(Error::Unresolved(format!("step `{name}` is not a unitary")));
                    };
                    if step.time > entry_time {
                        out.push((Some(u.clone()), LinearOp::identity_projector(space.clone())));
                    }
                }
                BridgeOp::Outcome { measurement, label } => {
                    let (time, m) = self
                        .protocol
                        .measure(measurement)
                        .ok_or_else(|| Error::Unresolved(format!("unknown measurement `{measurement}`")))?;
                    let projector = m
                        .measurement
                        .outcome(label)
                        .ok_or_else(|| Error::UnknownLabel { subsystem: measurement.clone(), label: label.clone() })?
                        .projector
                        .clone();
                    let pre = if time > entry_time { m.measurement.premeasurement().cloned() } else { None };
                    let is_claim = i == n;
                    if !is_claim && ledger.knows(measurement, label, entry_time) {
                        if let Some(u) = pre {
                            out.push((Some(u), LinearOp::identity_projector(space.clone())));
                        }
                        continue;
                    }
                    out.push((pre, projector));
                }
            }
        }
        Ok(out)
    }

    /// Conditional probability of the claim given the bridge outcomes,
    /// evaluated from `agent`'s entry at `time`. Returns the entry's time too.
    fn evaluate_from(
        &self,
        agent: &str,
        time: TimeStamp,
        bridge: &[BridgeOp],
        claim: &Claim,
    ) -> Result<(TimeStamp, f64)> {
        let ledger = self.ledgers.get(agent)?;
        let entry = ledger
            .entry_at(time)
            .ok_or_else(|| Error::EmptyLedger { agent: agent.to_string(), time })?;
        let steps = self.steps_from(ledger, entry.time, bridge, Some(claim))?;
        let refs: Vec<(Option<&LinearOp>, &LinearOp)> = steps.iter().map(|(u, p)| (u.as_ref(), p)).collect();
        let (joint, _) = sequential_joint(&entry.state, &refs)?;
        let (given, _) = sequential_joint(&entry.state, &refs[..refs.len() - 1])?;
        if given <= IMPOSSIBLE_TOL {
            return Err(Error::Unresolved(format!(
                "bridge outcomes are impossible from the entry of `{agent}` at {}",
                entry.time
            )));
        }
        Ok((entry.time, (joint / given).clamp(0.0, 1.0)))
    }

    pub fn evaluate_claim(&self, step: &InferenceStep) -> Result<f64> {
        let r = self.resolve(step)?;
        Ok(self.evaluate_from(&r.agent, r.time, &r.bridge, &step.claim)?.1)
    }

    /// Who the statement's information came from, and as of when, if that
    /// is not the stater.
    fn source(&self, step: &InferenceStep) -> Result<Option<(String, TimeStamp)>> {
        Ok(match &step.basis {
            Basis::Entry { agent, time } if *agent != step.agent => Some((agent.clone(), *time)),
            Basis::Statement(id) => {
                let s = self.statement(id)?;
                (s.agent != step.agent).then(|| (s.agent.clone(), s.stated_at))
            }
            _ => None,
        })
    }

    /// Outcomes carried by the basis that the stater neither holds nor can
    /// be certain of from its own state. Empty means rule 1 holds.
    pub fn check_rule1(&self, step: &InferenceStep) -> Result<Vec<String>> {
        let Some((source, at)) = self.source(step)? else { return Ok(vec![]) };
        let source = self.ledgers.get(&source)?;
        let stater = self.ledgers.get(&step.agent)?;
        let state: &StateVector = &stater
            .entry_at(step.stated_at)
            .ok_or_else(|| Error::EmptyLedger { agent: step.agent.clone(), time: step.stated_at })?
            .state;
        let mut missing = Vec::new();
        for rec in source.known_outcomes(at) {
            if stater.knows(&rec.measurement, &rec.label, step.stated_at) {
                continue;
            }
            let (_, m) = self
                .protocol
                .measure(&rec.measurement)
                .ok_or_else(|| Error::Unresolved(format!("unknown measurement `{}`", rec.measurement)))?;
            let projector = &m.measurement.outcome(&rec.label).expect("recorded label is declared").projector;
            let projector = match self.protocol.evolution_between(rec.time, step.stated_at)? {
                Some(v) => projector.conjugated_by(&v)?,
                None => projector.clone(),
            };
            if born_probability(state, &projector)? < 1.0 - STRUCT_TOL {
                let item = format!("{}={}", rec.measurement, rec.label);
                if !missing.contains(&item) {
                    missing.push(item);
                }
            }
        }
        Ok(missing)
    }

    /// `(used_time, latest_time, p_used, p_latest)`; a violation iff the
    /// latest entry is newer and the probabilities differ by more than `1e-10`.
    pub fn check_rule2(&self, step: &InferenceStep) -> Result<(TimeStamp, TimeStamp, f64, f64, bool)> {
        let r = self.resolve(step)?;
        let (used, p_used) = self.evaluate_from(&r.agent, r.time, &r.bridge, &step.claim)?;
        let (latest, p_latest) = self.evaluate_from(step.holder(), step.stated_at, &r.bridge, &step.claim)?;
        let violated = latest > used && (p_latest - p_used).abs() > STRUCT_TOL;
        Ok((used, latest, p_used, p_latest, violated))
    }

    /// First statement flagged under rule 2 that `step` adopts through its
    /// statement references.
    fn inherited(&self, step: &InferenceStep, flagged: &[String]) -> Result<Option<String>> {
        let mut basis = &step.basis;
        while let Basis::Statement(id) = basis {
            if flagged.contains(id) {
                return Ok(Some(id.clone()));
            }
            basis = &self.statement(id)?.basis;
        }
        Ok(None)
    }

    pub fn audit(&self) -> Result<AuditReport> {
        let mut rows = Vec::new();
        let mut flagged: Vec<String> = Vec::new();
        for (i, step) in self.chain.iter().enumerate() {
            if self.chain[..i].iter().any(|s| s.id == step.id) {
                return Err(Error::Invalid(format!("duplicate statement id `{}`", step.id)));
            }
            if let Basis::Statement(id) = &step.basis {
                if !self.chain[..i].iter().any(|s| s.id == *id) {
                    return Err(Error::Unresolved(format!("`{}` references `{id}`, which is not stated before it", step.id)));
                }
            }
            self.measurement_time(&step.claim.measurement)?;
            let missing = self.check_rule1(step)?;
            let (used_time, latest_time, p_used, p_latest, stale) = self.check_rule2(step)?;
            let inherited_from = self.inherited(step, &flagged)?;
            let verdict = if !missing.is_empty() {
                Verdict::Rule1
            } else if inherited_from.is_some() || !stale {
                Verdict::Ok
            } else {
                flagged.push(step.id.clone());
                Verdict::Rule2
            };
            rows.push(AuditRow {
                statement_id: step.id.clone(),
                agent: step.agent.clone(),
                verdict,
                used_time,
                latest_time,
                p_used,
                p_latest,
                asserted: step.claim.asserted.0,
                inherited_from,
                missing,
            });
        }
        Ok(AuditReport { rows })
    }

    /// The chain with every statement re-based on its holder's latest
    /// entry, its bridge trimmed to what that entry still needs, and its
    /// asserted probability re-evaluated.
    pub fn rebase(&self) -> Result<Vec<InferenceStep>> {
        self.chain
            .iter()
            .map(|step| {
                let r = self.resolve(step)?;
                let holder = step.holder().to_string();
                let ledger = self.ledgers.get(&holder)?;
                let entry_time = ledger
                    .entry_at(step.stated_at)
                    .ok_or_else(|| Error::EmptyLedger { agent: holder.clone(), time: step.stated_at })?
                    .time;
                let bridge = self.trim(ledger, entry_time, &r.bridge)?;
                let (_, p) = self.evaluate_from(&holder, step.stated_at, &bridge, &step.claim)?;
                let mut claim = step.claim.clone();
                claim.asserted = Asserted(p);
                Ok(InferenceStep {
                    id: step.id.clone(),
                    agent: step.agent.clone(),
                    holder: step.holder.clone(),
                    stated_at: step.stated_at,
                    basis: Basis::Entry { agent: holder, time: step.stated_at },
                    claim,
                    future_ops: bridge,
                    provenance: step.provenance.clone(),
                })
            })
            .collect()
    }

    fn trim(&self, ledger: &ObserverLedger, entry_time: TimeStamp, bridge: &[BridgeOp]) -> Result<Vec<BridgeOp>> {
        let mut out = Vec::new();
        for op in bridge {
            let keep = match op {
                BridgeOp::Unitary(name) => {
                    let s = self.protocol.step(name).ok_or_else(|| Error::Unresolved(format!("unknown unitary step `{name}`")))?;
                    s.time > entry_time
                }
                BridgeOp::Outcome { measurement, label } => {
                    self.measurement_time(measurement)? > entry_time || !ledger.knows(measurement, label, entry_time)
                }
            };
            if keep {
                out.push(op.clone());
            }
        }
        Ok(out)
    }
}

/// Ledgers of the chain's record under per-step collapse.
pub fn chain_ledgers(p: &CompiledProtocol, chain: &InferenceChain) -> Result<LedgerSet> {
    Ok(Engine::new(p, Semantics::Collapse, None)?.run_path(&chain.record)?.ledgers)
}

/// Check that statements named after inference steps of the protocol are
/// made at those steps' times by those steps' agents.
fn check_schedule(p: &CompiledProtocol, chain: &InferenceChain) -> Result<()> {
    for step in &chain.steps {
        if let Some(s) = p.step(&step.id) {
            match &s.action {
                Action::Infer { agent } if *agent == step.agent && s.time == step.stated_at => {}
                Action::Infer { agent } => {
                    return Err(Error::Invalid(format!(
                        "statement `{}` is scheduled for {agent} at {}, not {} at {}",
                        step.id, s.time, step.agent, step.stated_at
                    )))
                }
                _ => return Err(Error::Invalid(format!("statement id `{}` names a non-inference step", step.id))),
            }
        }
    }
    Ok(())
}

fn compile(p: &Protocol) -> Result<CompiledProtocol> {
    p.compile()
        .map_err(|d| Error::Invalid(d.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")))
}

pub fn run_audit(p: &Protocol, chain: &InferenceChain) -> Result<AuditReport> {
    if chain.steps.is_empty() {
        return Ok(AuditReport::default());
    }
    let compiled = compile(p)?;
    check_schedule(&compiled, chain)?;
    let ledgers = chain_ledgers(&compiled, chain)?;
    Auditor::new(&compiled, &ledgers, &chain.steps).audit()
}

/// Rebase `chain` on the ledgers of `p` and audit the result.
pub fn run_rebased_audit(p: &Protocol, chain: &InferenceChain) -> Result<(InferenceChain, AuditReport)> {
    if chain.steps.is_empty() {
        return Ok((chain.clone(), AuditReport::default()));
    }
    let compiled = compile(p)?;
    check_schedule(&compiled, chain)?;
    let ledgers = chain_ledgers(&compiled, chain)?;
    let steps = Auditor::new(&compiled, &ledgers, &chain.steps).rebase()?;
    let report = Auditor::new(&compiled, &ledgers, &steps).audit()?;
    Ok((InferenceChain { record: chain.record.clone(), steps }, report))
}

fn t(s: &str) -> TimeStamp {
    s.parse().expect("literal time stamp")
}

fn entry(agent: &str, time: &str) -> Basis {
    Basis::Entry { agent: agent.into(), time: t(time) }
}

fn claim(measurement: &str, outcome: &str, p: f64) -> Claim {
    Claim { measurement: measurement.into(), outcome: outcome.into(), asserted: Asserted(p) }
}

fn outcome(measurement: &str, label: &str) -> BridgeOp {
    BridgeOp::Outcome { measurement: measurement.into(), label: label.into() }
}

#[allow(clippy::too_many_arguments)]
fn statement(
    id: &str,
    agent: &str,
    holder: Option<&str>,
    at: &str,
    basis: Basis,
    claim: Claim,
    future_ops: Vec<BridgeOp>,
    provenance: &[&str],
) -> InferenceStep {
    InferenceStep {
        id: id.into(),
        agent: agent.into(),
        holder: holder.map(Into::into),
        stated_at: t(at),
        basis,
        claim,
        future_ops,
        provenance: provenance.iter().map(|s| s.to_string()).collect(),
    }
}

/// The reasoning of the four agents in the two-lab experiment for the
/// record `r = tail, z = up, wbar = okbar, w = ok`. Each "w = fail is
/// certain" is encoded as `P(w = ok) = 0`.
pub fn builtin_table1_chain() -> InferenceChain {
    let spin_readout = || BridgeOp::Unitary("U_10_20".into());
    InferenceChain {
        record: [("r", "tail"), ("z", "up"), ("wbar", "okbar"), ("w", "ok")]
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect(),
        steps: vec![
            statement("Fbar^n:02", "Fbar", None, "1:02", entry("Fbar", "1:02"), claim("w", "ok", 0.0), vec![spin_readout()], &[]),
            statement("F^n:12", "F", None, "1:12", entry("F", "1:12"), claim("r", "tail", 1.0), vec![], &[]),
            statement(
                "F^n:13",
                "F",
                Some("Fbar"),
                "1:13",
                Basis::Statement("Fbar^n:02".into()),
                claim("w", "ok", 0.0),
                vec![],
                &["F^n:12", "Fbar^n:02"],
            ),
            statement(
                "F^n:14",
                "F",
                None,
                "1:14",
                Basis::Statement("F^n:13".into()),
                claim("w", "ok", 0.0),
                vec![],
                &["F^n:13"],
            ),
            statement(
                "Wbar^n:22",
                "Wbar",
                None,
                "1:22",
                entry("Wbar", "1:00"),
                claim("z", "up", 1.0),
                vec![spin_readout(), outcome("wbar", "okbar")],
                &[],
            ),
            statement(
                "Wbar^n:23",
                "Wbar",
                None,
                "1:23",
                Basis::Statement("F^n:14".into()),
                claim("w", "ok", 0.0),
                vec![],
                &["Wbar^n:22", "F^n:14"],
            ),
            statement(
                "W^n:24",
                "W",
                None,
                "1:24",
                entry("W", "1:00"),
                claim("z", "up", 1.0),
                vec![spin_readout(), outcome("wbar", "okbar")],
                &[],
            ),
            statement(
                "W^n:25",
                "W",
                None,
                "1:25",
                Basis::Statement("F^n:14".into()),
                claim("w", "ok", 0.0),
                vec![],
                &["W^n:24", "F^n:14"],
            ),
        ],
    }
}
