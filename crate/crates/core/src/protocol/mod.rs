//! Declarative protocol documents.
//!
//! A [`Protocol`] is the serialisable description (subsystems, agents, the
//! prepared state and timestamped steps). [`Protocol::compile`] resolves it
//! into operators on the full composite space, collecting every problem as a
//! [`Diagnostic`] instead of stopping at the first.

mod builtins;
mod format;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;

use crate::hilbert::{complete_isometry, embed_op, CompositeSpace, LinearOp, StateVector, SubsystemSpec};
use crate::measurement::{Outcome, ProjectiveMeasurement};
use crate::time::TimeStamp;
use crate::{Error, STRUCT_TOL};

pub use builtins::{builtin, builtin_epr, builtin_wfr, builtin_wfr_synced, builtin_wigner, builtin_wigner_synced, BUILTIN_NAMES};
pub use format::{parse, parse_document, ParseError};

/// An amplitude as written in a document.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Amp {
    Real(f64),
    /// `sqrt(num/den)`, negated when `negative`.
    Sqrt { negative: bool, num: u64, den: u64 },
    Complex { re: f64, im: f64 },
}

impl Amp {
    pub fn sqrt(num: u64, den: u64) -> Self {
        Amp::Sqrt { negative: false, num, den }
    }

    pub fn neg_sqrt(num: u64, den: u64) -> Self {
        Amp::Sqrt { negative: true, num, den }
    }

    pub fn value(&self) -> Complex64 {
        match *self {
            Amp::Real(x) => Complex64::new(x, 0.0),
            Amp::Sqrt { negative, num, den } => {
                let v = (num as f64 / den as f64).sqrt();
                Complex64::new(if negative { -v } else { v }, 0.0)
            }
            Amp::Complex { re, im } => Complex64::new(re, im),
        }
    }
}

impl fmt::Display for Amp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Amp::Real(x) => write!(f, "{x}"),
            Amp::Sqrt { negative, num, den } => write!(f, "{}sqrt({num}/{den})", if negative { "-" } else { "" }),
            Amp::Complex { re, im } => write!(f, "{re}{im:+}i"),
        }
    }
}

impl FromStr for Amp {
    type Err = String;

    /// Accepts `sqrt(a/b)` and `-sqrt(a/b)` with non-negative integers, `b > 0`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || format!("malformed amplitude token `{s}` (expected `sqrt(a/b)` or `-sqrt(a/b)`)");
        let (negative, rest) = match s.strip_prefix('-') {
            Some(r) => (true, r),
            None => (false, s),
        };
        let inner = rest.strip_prefix("sqrt(").and_then(|r| r.strip_suffix(')')).ok_or_else(err)?;
        let (num, den) = inner.split_once('/').ok_or_else(err)?;
        let num: u64 = num.trim().parse().map_err(|_| err())?;
        let den: u64 = den.trim().parse().map_err(|_| err())?;
        if den == 0 {
            return Err(format!("zero denominator in `{s}`"));
        }
        Ok(Amp::Sqrt { negative, num, den })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub amp: Amp,
    pub labels: Vec<String>,
}

/// A vector written as a sum of labelled basis terms.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StateSpec {
    pub terms: Vec<Term>,
}

impl StateSpec {
    pub fn term<S: Into<String>>(mut self, amp: Amp, labels: impl IntoIterator<Item = S>) -> Self {
        self.terms.push(Term { amp, labels: labels.into_iter().map(Into::into).collect() });
        self
    }

    pub fn basis<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Self {
        StateSpec::default().term(Amp::Real(1.0), labels)
    }

    fn build(&self, space: &Arc<CompositeSpace>) -> crate::Result<StateVector> {
        let terms: Vec<(Complex64, Vec<&str>)> = self
            .terms
            .iter()
            .map(|t| (t.amp.value(), t.labels.iter().map(String::as_str).collect()))
            .collect();
        StateVector::from_terms(space.clone(), &terms)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsystemDecl {
    pub name: String,
    pub dim: usize,
    pub basis: Vec<String>,
}

impl SubsystemDecl {
    pub fn new<S: Into<String>>(name: impl Into<String>, basis: impl IntoIterator<Item = S>) -> Self {
        let basis: Vec<String> = basis.into_iter().map(Into::into).collect();
        SubsystemDecl { name: name.into(), dim: basis.len(), basis }
    }
}

/// One `from → to` pair of a partial unitary.
#[derive(Debug, Clone, PartialEq)]
pub struct MapPair {
    pub from: StateSpec,
    pub to: StateSpec,
}

/// A unitary given by its action on a few orthonormal vectors of the target
/// subsystems; it is completed deterministically elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitarySpec {
    pub targets: Vec<String>,
    pub map: Vec<MapPair>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeSpec {
    pub label: String,
    /// Orthonormal vectors spanning the outcome subspace of the targets.
    pub vectors: Vec<StateSpec>,
    /// The outcome is `I − Σ(other outcomes)`.
    pub complement: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasureSpec {
    pub agent: String,
    pub targets: Vec<String>,
    pub outcomes: Vec<OutcomeSpec>,
    pub premeasurement: Option<UnitarySpec>,
    pub broadcast_to: Vec<String>,
    /// Substeps between the measurement and delivery of its broadcast.
    pub broadcast_delay: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepBody {
    Unitary(UnitarySpec),
    Measure(MeasureSpec),
    /// Marks the time at which an agent states a chain statement.
    Infer { agent: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolStep {
    pub time: TimeStamp,
    pub name: String,
    pub body: StepBody,
}

/// A protocol document. The prepared state is held in `initial` and
/// precedes every step (it sits at time `0:00`).
#[derive(Debug, Clone, PartialEq)]
pub struct Protocol {
    pub subsystems: Vec<SubsystemDecl>,
    pub agents: Vec<String>,
    pub initial: StateSpec,
    pub steps: Vec<ProtocolStep>,
}

impl Protocol {
    /// Copy in which every measurement broadcasts to every other agent.
    pub fn synchronized(&self, delay: u32) -> Protocol {
        let mut p = self.clone();
        for step in &mut p.steps {
            if let StepBody::Measure(m) = &mut step.body {
                m.broadcast_to = self.agents.iter().filter(|a| **a != m.agent).cloned().collect();
                m.broadcast_delay = delay;
            }
        }
        p
    }

    pub fn measure_count(&self) -> usize {
        self.steps.iter().filter(|s| matches!(s.body, StepBody::Measure(_))).count()
    }

    pub fn to_json(&self) -> String {
        format::serialize(self)
    }

    pub fn compile(&self) -> Result<CompiledProtocol, Vec<Diagnostic>> {
        Compiler::default().run(self)
    }
}

/// Every problem found in `p`; empty iff it compiles.
pub fn validate(p: &Protocol) -> Vec<Diagnostic> {
    p.compile().err().unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    /// Zero-based step index, when the problem belongs to a step.
    pub step: Option<usize>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.step {
            Some(k) => write!(f, "step {k}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CompiledMeasure {
    pub agent: String,
    pub measurement: ProjectiveMeasurement,
    /// Subsystems touched by the projectors or the premeasurement.
    pub support: BTreeSet<String>,
    pub broadcast_to: Vec<String>,
    pub broadcast_delay: u32,
}

#[derive(Debug, Clone)]
pub enum Action {
    Unitary(LinearOp),
    Measure(CompiledMeasure),
    Infer { agent: String },
}

#[derive(Debug, Clone)]
pub struct CompiledStep {
    pub time: TimeStamp,
    pub name: String,
    pub action: Action,
}

/// A protocol resolved onto its full composite space.
#[derive(Debug, Clone)]
pub struct CompiledProtocol {
    pub space: Arc<CompositeSpace>,
    pub agents: Vec<String>,
    pub initial: StateVector,
    pub steps: Vec<CompiledStep>,
}

impl CompiledProtocol {
    pub fn step(&self, name: &str) -> Option<&CompiledStep> {
        self.steps.iter().find(|s| s.name == name)
    }

    pub fn measure(&self, name: &str) -> Option<(TimeStamp, &CompiledMeasure)> {
        self.steps.iter().find_map(|s| match &s.action {
            Action::Measure(m) if s.name == name => Some((s.time, m)),
            _ => None,
        })
    }

    pub fn measures(&self) -> impl Iterator<Item = (&CompiledStep, &CompiledMeasure)> {
        self.steps.iter().filter_map(|s| match &s.action {
            Action::Measure(m) => Some((s, m)),
            _ => None,
        })
    }

    /// Agents all of whose measurements are never followed by another
    /// agent's measurement on an overlapping set of subsystems: the ones
    /// reading out the final record from outside.
    pub fn default_external_agents(&self) -> Vec<String> {
        let measures: Vec<_> = self.measures().collect();
        let internal: BTreeSet<&str> = measures
            .iter()
            .enumerate()
            .filter(|(i, (_, m))| {
                measures[i + 1..]
                    .iter()
                    .any(|(_, later)| later.agent != m.agent && !later.support.is_disjoint(&m.support))
            })
            .map(|(_, (_, m))| m.agent.as_str())
            .collect();
        let mut out = Vec::new();
        for (_, m) in &measures {
            if !internal.contains(m.agent.as_str()) && !out.contains(&m.agent) {
                out.push(m.agent.clone());
            }
        }
        out
    }

    /// Product of every unitary the protocol applies to all observers in
    /// the half-open interval `(after, until]`: unitary steps and
    /// premeasurements, latest on the left. `None` means identity.
    pub fn evolution_between(&self, after: TimeStamp, until: TimeStamp) -> crate::Result<Option<LinearOp>> {
        let mut acc: Option<LinearOp> = None;
        for s in self.steps.iter().filter(|s| s.time > after && s.time <= until) {
            let u = match &s.action {
                Action::Unitary(u) => Some(u),
                Action::Measure(m) => m.measurement.premeasurement(),
                Action::Infer { .. } => None,
            };
            if let Some(u) = u {
                acc = Some(match acc {
                    Some(prev) => u.compose(&prev)?,
                    None => u.clone(),
                });
            }
        }
        Ok(acc)
    }
}

#[derive(Default)]
struct Compiler {
    diags: Vec<Diagnostic>,
}

impl Compiler {
    fn report(&mut self, step: Option<usize>, message: impl Into<String>) {
        self.diags.push(Diagnostic { step, message: message.into() });
    }

    fn run(mut self, p: &Protocol) -> Result<CompiledProtocol, Vec<Diagnostic>> {
        let space = self.space(p);
        let agents = self.agents(p);
        let initial = space.as_ref().and_then(|space| self.initial(p, space));
        let mut steps = Vec::with_capacity(p.steps.len());
        let mut names = BTreeSet::new();
        let mut last = TimeStamp::ZERO;
        for (k, step) in p.steps.iter().enumerate() {
            if step.time <= last {
                self.report(Some(k), format!("non-increasing time at step {k} ({} after {last})", step.time));
            }
            last = last.max(step.time);
            if !names.insert(step.name.as_str()) {
                self.report(Some(k), format!("duplicate step name `{}`", step.name));
            }
            let Some(space) = &space else { continue };
            let action = match &step.body {
                StepBody::Unitary(u) => self.unitary(k, space, u).map(Action::Unitary),
                StepBody::Measure(m) => self.measure(k, space, &agents, &step.name, m).map(Action::Measure),
                StepBody::Infer { agent } => {
                    if !agents.contains(agent) {
                        self.report(Some(k), format!("unknown agent `{agent}`"));
                    }
                    Some(Action::Infer { agent: agent.clone() })
                }
            };
            if let Some(action) = action {
                steps.push(CompiledStep { time: step.time, name: step.name.clone(), action });
            }
        }
        match (space, initial) {
            (Some(space), Some(initial)) if self.diags.is_empty() => {
                Ok(CompiledProtocol { space, agents: p.agents.clone(), initial, steps })
            }
            _ => Err(self.diags),
        }
    }

    fn space(&mut self, p: &Protocol) -> Option<Arc<CompositeSpace>> {
        let mut specs = Vec::new();
        for decl in &p.subsystems {
            if decl.dim != decl.basis.len() {
                self.report(
                    None,
                    format!("subsystem `{}` declares dim {} but lists {} basis labels", decl.name, decl.dim, decl.basis.len()),
                );
            }
            match SubsystemSpec::new(decl.name.clone(), decl.basis.iter().cloned()) {
                Ok(s) => specs.push(s),
                Err(e) => self.report(None, e.to_string()),
            }
        }
        if p.subsystems.is_empty() {
            self.report(None, "no subsystems declared");
        }
        match CompositeSpace::new(specs) {
            Ok(space) if self.diags.is_empty() => Some(space),
            Ok(_) => None,
            Err(e) => {
                self.report(None, e.to_string());
                None
            }
        }
    }

    fn agents(&mut self, p: &Protocol) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for a in &p.agents {
            if !out.insert(a.clone()) {
                self.report(None, format!("duplicate agent `{a}`"));
            }
        }
        out
    }

    fn initial(&mut self, p: &Protocol, space: &Arc<CompositeSpace>) -> Option<StateVector> {
        match p.initial.build(space) {
            Ok(s) if (s.norm_sqr() - 1.0).abs() <= STRUCT_TOL => Some(s),
            Ok(s) => {
                self.report(None, format!("initial state is not normalized (norm^2 = {})", s.norm_sqr()));
                None
            }
            Err(e) => {
                self.report(None, format!("initial state: {e}"));
                None
            }
        }
    }

    fn targets(&mut self, k: usize, space: &Arc<CompositeSpace>, targets: &[String]) -> Option<Arc<CompositeSpace>> {
        if targets.is_empty() {
            self.report(Some(k), "no targets");
            return None;
        }
        match space.subspace(targets) {
            Ok(sub) => Some(sub),
            Err(e) => {
                self.report(Some(k), e.to_string());
                None
            }
        }
    }

    fn unitary(&mut self, k: usize, space: &Arc<CompositeSpace>, u: &UnitarySpec) -> Option<LinearOp> {
        let sub = self.targets(k, space, &u.targets)?;
        let mut pairs = Vec::with_capacity(u.map.len());
        for pair in &u.map {
            match (pair.from.build(&sub), pair.to.build(&sub)) {
                (Ok(a), Ok(b)) => pairs.push((a, b)),
                (Err(e), _) | (_, Err(e)) => {
                    self.report(Some(k), format!("map vector: {e}"));
                    return None;
                }
            }
        }
        match complete_isometry(&sub, &pairs).and_then(|op| embed_op(&op, space)) {
            Ok(op) => Some(op),
            Err(Error::NotIsometry(why)) => {
                self.report(Some(k), format!("not an isometry: {why}"));
                None
            }
            Err(e) => {
                self.report(Some(k), e.to_string());
                None
            }
        }
    }

    fn measure(
        &mut self,
        k: usize,
        space: &Arc<CompositeSpace>,
        agents: &BTreeSet<String>,
        name: &str,
        m: &MeasureSpec,
    ) -> Option<CompiledMeasure> {
        let before = self.diags.len();
        if !agents.contains(&m.agent) {
            self.report(Some(k), format!("unknown agent `{}`", m.agent));
        }
        for target in &m.broadcast_to {
            if !agents.contains(target) {
                self.report(Some(k), format!("unknown broadcast target `{target}`"));
            } else if *target == m.agent {
                self.report(Some(k), format!("agent `{target}` broadcasts to itself"));
            }
        }
        let premeasurement = match &m.premeasurement {
            Some(u) => Some(self.unitary(k, space, u)?),
            None => None,
        };
        let sub = self.targets(k, space, &m.targets)?;
        let mut outcomes: Vec<Outcome> = Vec::new();
        let mut complement_label = None;
        for o in &m.outcomes {
            if o.complement {
                if !o.vectors.is_empty() {
                    self.report(Some(k), format!("complement outcome `{}` must not list vectors", o.label));
                }
                if complement_label.replace(o.label.clone()).is_some() {
                    self.report(Some(k), "more than one complement outcome");
                }
                continue;
            }
            let vectors: crate::Result<Vec<_>> = o.vectors.iter().map(|v| v.build(&sub)).collect();
            let projector = vectors
                .and_then(|v| LinearOp::projector_onto(sub.clone(), &v))
                .and_then(|p| embed_op(&p, space));
            match projector {
                Ok(projector) => outcomes.push(Outcome { label: o.label.clone(), projector }),
                Err(e) => self.report(Some(k), format!("outcome `{}`: {e}", o.label)),
            }
        }
        if let Some(label) = complement_label {
            let mut rest = LinearOp::identity_projector(space.clone());
            for o in &outcomes {
                match LinearOp::new(space.clone(), rest.matrix() - o.projector.matrix(), crate::hilbert::OpKind::Projector) {
                    Ok(r) => rest = r,
                    Err(_) => {
                        self.report(Some(k), format!("complement outcome `{label}` is not a projector (outcomes overlap)"));
                        return None;
                    }
                }
            }
            outcomes.push(Outcome { label, projector: rest });
        }
        if self.diags.len() > before {
            return None;
        }
        let measurement = match ProjectiveMeasurement::new(name, outcomes, premeasurement) {
            Ok(m) => m,
            Err(e @ Error::IncompleteMeasurement { .. }) => {
                self.report(Some(k), e.to_string());
                return None;
            }
            Err(e) => {
                self.report(Some(k), e.to_string());
                return None;
            }
        };
        let mut support: BTreeSet<String> = m.targets.iter().cloned().collect();
        if let Some(u) = &m.premeasurement {
            support.extend(u.targets.iter().cloned());
        }
        Some(CompiledMeasure {
            agent: m.agent.clone(),
            measurement,
            support,
            broadcast_to: m.broadcast_to.clone(),
            broadcast_delay: m.broadcast_delay,
        })
    }
}
