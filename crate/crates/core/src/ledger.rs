//! Observer-relative state histories.
//!
//! Each agent keeps the sequence of wave functions it assigns. An agent's
//! own outcome or a received broadcast collapses its state; a measurement it
//! does not learn about only advances its state by the premeasurement.

use crate::error::{Error, Result};
use crate::hilbert::{apply, inner, LinearOp, StateVector};
use crate::measurement::{collapse, OutcomeRecord, ProjectiveMeasurement};
use crate::time::TimeStamp;
use crate::STRUCT_TOL;

#[derive(Debug, Clone, PartialEq)]
pub enum KnowledgeEvent {
    Prepared,
    OwnOutcome(OutcomeRecord),
    ReceivedOutcome { record: OutcomeRecord, from: String },
    /// A unitary step, or a measurement the agent did not learn the result of.
    ModeledUnitary { name: String },
}

impl KnowledgeEvent {
    pub fn kind(&self) -> &'static str {
        match self {
            KnowledgeEvent::Prepared => "prepared",
            KnowledgeEvent::OwnOutcome(_) => "own_outcome",
            KnowledgeEvent::ReceivedOutcome { .. } => "received_outcome",
            KnowledgeEvent::ModeledUnitary { .. } => "modeled_unitary",
        }
    }

    pub fn record(&self) -> Option<&OutcomeRecord> {
        match self {
            KnowledgeEvent::OwnOutcome(r) | KnowledgeEvent::ReceivedOutcome { record: r, .. } => Some(r),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LedgerEntry {
    pub time: TimeStamp,
    pub state: StateVector,
    pub event: KnowledgeEvent,
}

#[derive(Debug, Clone)]
pub struct ObserverLedger {
    agent: String,
    history: Vec<LedgerEntry>,
}

impl ObserverLedger {
    pub fn new(agent: impl Into<String>, initial: StateVector) -> Result<Self> {
        let n = initial.norm_sqr();
        if (n - 1.0).abs() > STRUCT_TOL {
            return Err(Error::Unnormalized { norm_sqr: n });
        }
        Ok(ObserverLedger {
            agent: agent.into(),
            history: vec![LedgerEntry { time: TimeStamp::ZERO, state: initial, event: KnowledgeEvent::Prepared }],
        })
    }

    pub fn agent(&self) -> &str {
        &self.agent
    }

    pub fn history(&self) -> &[LedgerEntry] {
        &self.history
    }

    pub fn latest(&self) -> &LedgerEntry {
        self.history.last().expect("a ledger always holds its preparation")
    }

    pub fn current(&self) -> &StateVector {
        &self.latest().state
    }

    /// The most recent entry at or before `t`.
    pub fn entry_at(&self, t: TimeStamp) -> Option<&LedgerEntry> {
        self.history.iter().rev().find(|e| e.time <= t)
    }

    /// Whether the agent holds the outcome `label` of `measurement` at `t`,
    /// either from its own reading or from a broadcast.
    pub fn knows(&self, measurement: &str, label: &str, t: TimeStamp) -> bool {
        self.known_outcomes(t).any(|r| r.measurement == measurement && r.label == label)
    }

    pub fn known_outcomes(&self, t: TimeStamp) -> impl Iterator<Item = &OutcomeRecord> {
        self.history.iter().take_while(move |e| e.time <= t).filter_map(|e| e.event.record())
    }

    fn push(&mut self, time: TimeStamp, state: StateVector, event: KnowledgeEvent) -> Result<()> {
        let last = self.latest().time;
        if time < last {
            return Err(Error::Invalid(format!("ledger of `{}` cannot go back from {last} to {time}", self.agent)));
        }
        self.history.push(LedgerEntry { time, state, event });
        Ok(())
    }

    /// Premeasure, then collapse onto the recorded outcome.
    pub fn on_own_measurement(&mut self, record: &OutcomeRecord, m: &ProjectiveMeasurement) -> Result<()> {
        let projector = outcome_projector(m, &record.label)?;
        let state = collapse(&m.premeasure(self.current())?, projector)?;
        self.push(record.time, state, KnowledgeEvent::OwnOutcome(record.clone()))
    }

    /// Collapse on a broadcast outcome. The sender's premeasurement has
    /// already been modeled when the measurement happened.
    pub fn on_broadcast_received(
        &mut self,
        record: &OutcomeRecord,
        m: &ProjectiveMeasurement,
        from: &str,
        at: TimeStamp,
    ) -> Result<()> {
        let projector = outcome_projector(m, &record.label)?.clone();
        self.receive(record, &projector, from, at)
    }

    /// Collapse on an arbitrary projector representing a received outcome,
    /// e.g. one already carried forward through later evolution.
    pub fn receive(&mut self, record: &OutcomeRecord, projector: &LinearOp, from: &str, at: TimeStamp) -> Result<()> {
        let state = collapse(self.current(), projector)?;
        self.push(at, state, KnowledgeEvent::ReceivedOutcome { record: record.clone(), from: from.to_string() })
    }

    /// A measurement the agent does not learn about: premeasurement only.
    pub fn on_unobserved_measurement(&mut self, m: &ProjectiveMeasurement, at: TimeStamp) -> Result<()> {
        let state = m.premeasure(self.current())?;
        self.push(at, state, KnowledgeEvent::ModeledUnitary { name: m.name().to_string() })
    }

    pub fn on_unitary(&mut self, name: &str, u: &LinearOp, at: TimeStamp) -> Result<()> {
        let state = apply(u, self.current())?;
        self.push(at, state, KnowledgeEvent::ModeledUnitary { name: name.to_string() })
    }
}

fn outcome_projector<'a>(m: &'a ProjectiveMeasurement, label: &str) -> Result<&'a LinearOp> {
    m.outcome(label)
        .map(|o| &o.projector)
        .ok_or_else(|| Error::UnknownLabel { subsystem: m.name().to_string(), label: label.to_string() })
}

/// Ray infidelity `1 − |⟨a|b⟩|²` of the two states held at `t`.
pub fn divergence(a: &ObserverLedger, b: &ObserverLedger, t: TimeStamp) -> Result<f64> {
    let sa = state_at(a, t)?;
    let sb = state_at(b, t)?;
    let overlap = inner(sa, sb)?.norm_sqr() / (sa.norm_sqr() * sb.norm_sqr());
    Ok((1.0 - overlap).clamp(0.0, 1.0))
}

fn state_at(l: &ObserverLedger, t: TimeStamp) -> Result<&StateVector> {
    l.entry_at(t)
        .map(|e| &e.state)
        .ok_or_else(|| Error::EmptyLedger { agent: l.agent.clone(), time: t })
}

/// True iff every pair of ledgers has divergence at most `1e-10` at `t`.
pub fn assert_consensus(ledgers: &[ObserverLedger], t: TimeStamp) -> Result<bool> {
    for (i, a) in ledgers.iter().enumerate() {
        for b in &ledgers[i + 1..] {
            if divergence(a, b, t)? > STRUCT_TOL {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// One ledger per agent, in declaration order.
#[derive(Debug, Clone)]
pub struct LedgerSet {
    ledgers: Vec<ObserverLedger>,
}

impl LedgerSet {
    pub fn new<S: AsRef<str>>(agents: &[S], initial: &StateVector) -> Result<Self> {
        let ledgers = agents
            .iter()
            .map(|a| ObserverLedger::new(a.as_ref(), initial.clone()))
            .collect::<Result<_>>()?;
        Ok(LedgerSet { ledgers })
    }

    pub fn get(&self, agent: &str) -> Result<&ObserverLedger> {
        self.ledgers.iter().find(|l| l.agent == agent).ok_or_else(|| Error::UnknownAgent(agent.to_string()))
    }

    pub fn get_mut(&mut self, agent: &str) -> Result<&mut ObserverLedger> {
        self.ledgers.iter_mut().find(|l| l.agent == agent).ok_or_else(|| Error::UnknownAgent(agent.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &ObserverLedger> {
        self.ledgers.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut ObserverLedger> {
        self.ledgers.iter_mut()
    }

    pub fn as_slice(&self) -> &[ObserverLedger] {
        &self.ledgers
    }

    pub fn consensus(&self, t: TimeStamp) -> Result<bool> {
        assert_consensus(&self.ledgers, t)
    }
}
