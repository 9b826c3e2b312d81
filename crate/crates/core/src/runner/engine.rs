//! Step-by-step execution of a compiled protocol.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::hilbert::{apply, LinearOp, StateVector};
use crate::ledger::LedgerSet;
use crate::measurement::{born_probability, collapse, OutcomeRecord};
use crate::protocol::{Action, CompiledMeasure, CompiledProtocol};
use crate::time::TimeStamp;
use crate::IMPOSSIBLE_TOL;

/// Which measurements produce outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Semantics {
    /// Every measurement collapses the global state.
    Collapse,
    /// Only measurements read by external agents (performed by one, or
    /// broadcast to one) collapse; the rest are premeasurement unitaries.
    External,
}

/// A compiled protocol plus the set of measurements that branch.
#[derive(Debug, Clone)]
pub struct Engine<'a> {
    protocol: &'a CompiledProtocol,
    branching: Vec<bool>,
    external: Vec<String>,
}

impl<'a> Engine<'a> {
    /// `external` defaults to [`CompiledProtocol::default_external_agents`]
    /// and is ignored under [`Semantics::Collapse`].
    pub fn new(protocol: &'a CompiledProtocol, semantics: Semantics, external: Option<&[String]>) -> Result<Self> {
        let external: Vec<String> = match external {
            Some(list) => {
                for a in list {
                    if !protocol.agents.contains(a) {
                        return Err(Error::UnknownAgent(a.clone()));
                    }
                }
                list.to_vec()
            }
            None => protocol.default_external_agents(),
        };
        let branching = protocol
            .steps
            .iter()
            .map(|s| match &s.action {
                Action::Measure(m) => {
                    semantics == Semantics::Collapse
                        || external.contains(&m.agent)
                        || m.broadcast_to.iter().any(|t| external.contains(t))
                }
                _ => false,
            })
            .collect();
        Ok(Engine { protocol, branching, external })
    }

    pub fn protocol(&self) -> &'a CompiledProtocol {
        self.protocol
    }

    pub fn external_agents(&self) -> &[String] {
        &self.external
    }

    pub fn is_branching(&self, step: usize) -> bool {
        self.branching[step]
    }

    /// Names of the branching measurements in time order.
    pub fn branching_measurements(&self) -> Vec<String> {
        self.protocol
            .steps
            .iter()
            .zip(&self.branching)
            .filter(|(_, b)| **b)
            .map(|(s, _)| s.name.clone())
            .collect()
    }

    pub(crate) fn measure_at(&self, step: usize) -> &'a CompiledMeasure {
        match &self.protocol.steps[step].action {
            Action::Measure(m) => m,
            _ => unreachable!("step {step} is not a measurement"),
        }
    }

    /// Evolve `state` through steps `from..` up to the next branching
    /// measurement, returning its index (or the step count) and the state
    /// just before it.
    pub(crate) fn advance(&self, from: usize, mut state: StateVector) -> Result<(usize, StateVector)> {
        for (k, step) in self.protocol.steps.iter().enumerate().skip(from) {
            match &step.action {
                Action::Unitary(u) => state = apply(u, &state)?,
                Action::Measure(_) if self.branching[k] => return Ok((k, state)),
                Action::Measure(m) => state = m.measurement.premeasure(&state)?,
                Action::Infer { .. } => {}
            }
        }
        Ok((self.protocol.steps.len(), state))
    }

    /// Run one outcome path, keeping every agent's ledger. `record` maps
    /// each branching measurement to its outcome label.
    pub fn run_path(&self, record: &BTreeMap<String, String>) -> Result<Trace> {
        for name in record.keys() {
            match self.protocol.step(name).map(|s| &s.action) {
                Some(Action::Measure(_)) => {}
                _ => return Err(Error::Unresolved(format!("record names unknown measurement `{name}`"))),
            }
        }
        let p = self.protocol;
        let mut global = p.initial.clone();
        let mut ledgers = LedgerSet::new(&p.agents, &p.initial)?;
        let mut pending: Vec<Pending> = Vec::new();
        let mut records = Vec::new();
        let mut probability = 1.0;
        for (k, step) in p.steps.iter().enumerate() {
            deliver(&mut pending, &mut ledgers, Some(step.time))?;
            match &step.action {
                Action::Unitary(u) => {
                    global = apply(u, &global)?;
                    for l in ledgers.iter_mut() {
                        l.on_unitary(&step.name, u, step.time)?;
                    }
                    carry(&mut pending, u)?;
                }
                Action::Infer { .. } => {}
                Action::Measure(m) => {
                    let pre = m.measurement.premeasure(&global)?;
                    if let Some(u) = m.measurement.premeasurement() {
                        carry(&mut pending, u)?;
                    }
                    if !self.branching[k] {
                        global = pre;
                        for l in ledgers.iter_mut() {
                            l.on_unobserved_measurement(&m.measurement, step.time)?;
                        }
                        continue;
                    }
                    let label = record
                        .get(&step.name)
                        .ok_or_else(|| Error::Unresolved(format!("no outcome given for measurement `{}`", step.name)))?;
                    let outcome = m.measurement.outcome(label).ok_or_else(|| Error::UnknownLabel {
                        subsystem: step.name.clone(),
                        label: label.clone(),
                    })?;
                    let prob = born_probability(&pre, &outcome.projector)?;
                    if prob <= IMPOSSIBLE_TOL {
                        return Err(Error::ImpossibleBranch { probability: prob });
                    }
                    global = collapse(&pre, &outcome.projector)?;
                    probability *= prob;
                    let rec = OutcomeRecord {
                        measurement: step.name.clone(),
                        label: label.clone(),
                        probability: prob,
                        time: step.time,
                    };
                    for l in ledgers.iter_mut() {
                        if l.agent() == m.agent {
                            l.on_own_measurement(&rec, &m.measurement)?;
                        } else {
                            l.on_unobserved_measurement(&m.measurement, step.time)?;
                        }
                    }
                    for to in &m.broadcast_to {
                        pending.push(Pending {
                            at: step.time.plus_substeps(m.broadcast_delay),
                            to: to.clone(),
                            from: m.agent.clone(),
                            record: rec.clone(),
                            projector: outcome.projector.clone(),
                            carry: None,
                        });
                    }
                    records.push(rec);
                }
            }
        }
        deliver(&mut pending, &mut ledgers, None)?;
        Ok(Trace { records, probability, final_state: global, ledgers })
    }
}

/// One executed outcome path.
#[derive(Debug, Clone)]
pub struct Trace {
    pub records: Vec<OutcomeRecord>,
    /// Product of the conditional Born factors along the path.
    pub probability: f64,
    pub final_state: StateVector,
    pub ledgers: LedgerSet,
}

/// A broadcast in flight, with the evolution that happened since it was sent.
struct Pending {
    at: TimeStamp,
    to: String,
    from: String,
    record: OutcomeRecord,
    projector: LinearOp,
    carry: Option<LinearOp>,
}

fn carry(pending: &mut [Pending], u: &LinearOp) -> Result<()> {
    for p in pending {
        p.carry = Some(match &p.carry {
            Some(c) => u.compose(c)?,
            None => u.clone(),
        });
    }
    Ok(())
}

/// Deliver every broadcast due at or before `until` (all of them for `None`),
/// earliest first.
fn deliver(pending: &mut Vec<Pending>, ledgers: &mut LedgerSet, until: Option<TimeStamp>) -> Result<()> {
    let mut due: Vec<Pending> = Vec::new();
    let mut keep = Vec::new();
    for p in pending.drain(..) {
        if until.is_none_or(|t| p.at <= t) {
            due.push(p);
        } else {
            keep.push(p);
        }
    }
    *pending = keep;
    due.sort_by_key(|p| p.at);
    for p in due {
        let projector = match &p.carry {
            Some(v) => p.projector.conjugated_by(v)?,
            None => p.projector,
        };
        let at = p.at.max(ledgers.get(&p.to)?.latest().time);
        ledgers.get_mut(&p.to)?.receive(&p.record, &projector, &p.from, at)?;
    }
    Ok(())
}

/// Parse `name=label,name=label`.
pub fn parse_record(text: &str) -> Result<BTreeMap<String, String>> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|pair| {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| Error::Invalid(format!("record entry `{pair}` is not `measurement=label`")))?;
            Ok((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

pub fn record_map(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}
