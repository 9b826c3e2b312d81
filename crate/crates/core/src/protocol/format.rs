//! JSON document format for protocols. Unknown keys are rejected at every
//! level; keys that do not belong to a step's `op` are semantic errors.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    validate, Amp, Diagnostic, MapPair, MeasureSpec, OutcomeSpec, Protocol, ProtocolStep, StateSpec, StepBody,
    SubsystemDecl, Term, UnitarySpec,
};
use crate::time::TimeStamp;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("{}", join(.0))]
    Invalid(Vec<Diagnostic>),
}

fn join(diags: &[Diagnostic]) -> String {
    diags.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

impl ParseError {
    pub fn diagnostics(&self) -> &[Diagnostic] {
        match self {
            ParseError::Invalid(d) => d,
            ParseError::Syntax { .. } => &[],
        }
    }
}

/// Parse and validate a UTF-8 protocol document.
pub fn parse(text: &[u8]) -> Result<Protocol, ParseError> {
    let p = parse_document(text)?;
    let diags = validate(&p);
    if diags.is_empty() {
        Ok(p)
    } else {
        Err(ParseError::Invalid(diags))
    }
}

/// Parse without running [`validate`].
pub fn parse_document(text: &[u8]) -> Result<Protocol, ParseError> {
    let doc: Doc = serde_json::from_slice(text).map_err(|e| ParseError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    doc.into_protocol()
}

pub(super) fn serialize(p: &Protocol) -> String {
    serde_json::to_string_pretty(&Doc::from_protocol(p)).expect("protocol documents always serialize")
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Doc {
    subsystems: Vec<SubsystemDoc>,
    agents: Vec<String>,
    initial: StateDoc,
    steps: Vec<StepDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SubsystemDoc {
    name: String,
    dim: usize,
    basis: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateDoc {
    terms: Vec<TermDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermDoc {
    amp: AmpDoc,
    labels: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum AmpDoc {
    Number(f64),
    Token(String),
    Complex(ComplexDoc),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ComplexDoc {
    re: f64,
    im: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MapDoc {
    from: StateDoc,
    to: StateDoc,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UnitaryDoc {
    targets: Vec<String>,
    map: Vec<MapDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutcomeDoc {
    label: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    vectors: Vec<StateDoc>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    complement: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StepDoc {
    time: TimeStamp,
    op: String,
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    agent: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    targets: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    map: Option<Vec<MapDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    premeasurement: Option<UnitaryDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    outcomes: Option<Vec<OutcomeDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    broadcast_to: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    broadcast_delay: Option<u32>,
}

impl Doc {
    fn from_protocol(p: &Protocol) -> Self {
        Doc {
            subsystems: p
                .subsystems
                .iter()
                .map(|s| SubsystemDoc { name: s.name.clone(), dim: s.dim, basis: s.basis.clone() })
                .collect(),
            agents: p.agents.clone(),
            initial: StateDoc::from_spec(&p.initial),
            steps: p.steps.iter().map(StepDoc::from_step).collect(),
        }
    }

    fn into_protocol(self) -> Result<Protocol, ParseError> {
        let mut diags = Vec::new();
        let initial = self.initial.into_spec().unwrap_or_else(|e| {
            diags.push(Diagnostic { step: None, message: format!("initial state: {e}") });
            StateSpec::default()
        });
        let mut steps = Vec::with_capacity(self.steps.len());
        for (k, s) in self.steps.into_iter().enumerate() {
            match s.into_step() {
                Ok(step) => steps.push(step),
                Err(message) => diags.push(Diagnostic { step: Some(k), message }),
            }
        }
        if !diags.is_empty() {
            return Err(ParseError::Invalid(diags));
        }
        Ok(Protocol {
            subsystems: self
                .subsystems
                .into_iter()
                .map(|s| SubsystemDecl { name: s.name, dim: s.dim, basis: s.basis })
                .collect(),
            agents: self.agents,
            initial,
            steps,
        })
    }
}

impl StateDoc {
    fn from_spec(s: &StateSpec) -> Self {
        StateDoc {
            terms: s
                .terms
                .iter()
                .map(|t| TermDoc {
                    amp: match t.amp {
                        Amp::Real(x) => AmpDoc::Number(x),
                        a @ Amp::Sqrt { .. } => AmpDoc::Token(a.to_string()),
                        Amp::Complex { re, im } => AmpDoc::Complex(ComplexDoc { re, im }),
                    },
                    labels: t.labels.clone(),
                })
                .collect(),
        }
    }

    fn into_spec(self) -> Result<StateSpec, String> {
        let terms = self
            .terms
            .into_iter()
            .map(|t| {
                let amp = match t.amp {
                    AmpDoc::Number(x) => Amp::Real(x),
                    AmpDoc::Token(s) => s.parse()?,
                    AmpDoc::Complex(c) => Amp::Complex { re: c.re, im: c.im },
                };
                Ok(Term { amp, labels: t.labels })
            })
            .collect::<Result<_, String>>()?;
        Ok(StateSpec { terms })
    }
}

impl UnitaryDoc {
    fn from_spec(u: &UnitarySpec) -> Self {
        UnitaryDoc {
            targets: u.targets.clone(),
            map: u
                .map
                .iter()
                .map(|m| MapDoc { from: StateDoc::from_spec(&m.from), to: StateDoc::from_spec(&m.to) })
                .collect(),
        }
    }
}

fn map_spec(map: Vec<MapDoc>) -> Result<Vec<MapPair>, String> {
    map.into_iter()
        .map(|m| Ok(MapPair { from: m.from.into_spec()?, to: m.to.into_spec()? }))
        .collect()
}

impl StepDoc {
    fn bare(time: TimeStamp, op: &str, name: &str) -> Self {
        StepDoc {
            time,
            op: op.into(),
            name: name.into(),
            agent: None,
            targets: None,
            map: None,
            premeasurement: None,
            outcomes: None,
            broadcast_to: None,
            broadcast_delay: None,
        }
    }

    fn from_step(s: &ProtocolStep) -> Self {
        match &s.body {
            StepBody::Unitary(u) => {
                let u = UnitaryDoc::from_spec(u);
                StepDoc { targets: Some(u.targets), map: Some(u.map), ..Self::bare(s.time, "unitary", &s.name) }
            }
            StepBody::Measure(m) => StepDoc {
                    agent: Some(m.agent.clone()),
                    targets: Some(m.targets.clone()),
                    premeasurement: m.premeasurement.as_ref().map(UnitaryDoc::from_spec),
                    outcomes: Some(
                        m.outcomes
                            .iter()
                            .map(|o| OutcomeDoc {
                                label: o.label.clone(),
                                vectors: o.vectors.iter().map(StateDoc::from_spec).collect(),
                                complement: o.complement,
                            })
                            .collect(),
                    ),
                    broadcast_to: Some(m.broadcast_to.clone()),
                    broadcast_delay: Some(m.broadcast_delay),
                    ..Self::bare(s.time, "measure", &s.name)
            },
            StepBody::Infer { agent } => StepDoc { agent: Some(agent.clone()), ..Self::bare(s.time, "infer", &s.name) },
        }
    }

    fn into_step(self) -> Result<ProtocolStep, String> {
        let present = |allowed: &[&str], s: &StepDoc| -> Result<(), String> {
            let fields = [
                ("agent", s.agent.is_some()),
                ("targets", s.targets.is_some()),
                ("map", s.map.is_some()),
                ("premeasurement", s.premeasurement.is_some()),
                ("outcomes", s.outcomes.is_some()),
                ("broadcast_to", s.broadcast_to.is_some()),
                ("broadcast_delay", s.broadcast_delay.is_some()),
            ];
            match fields.iter().find(|(k, set)| *set && !allowed.contains(k)) {
                Some((k, _)) => Err(format!("key `{k}` is not allowed for op `{}`", s.op)),
                None => Ok(()),
            }
        };
        let missing = |key: &str| format!("op `{}` requires key `{key}`", self.op);
        let body = match self.op.as_str() {
            "unitary" => {
                present(&["targets", "map"], &self)?;
                StepBody::Unitary(UnitarySpec {
                    targets: self.targets.ok_or_else(|| missing("targets"))?,
                    map: map_spec(self.map.ok_or_else(|| missing("map"))?)?,
                })
            }
            "measure" => {
                present(&["agent", "targets", "premeasurement", "outcomes", "broadcast_to", "broadcast_delay"], &self)?;
                let outcomes = self
                    .outcomes
                    .ok_or_else(|| missing("outcomes"))?
                    .into_iter()
                    .map(|o| {
                        Ok(OutcomeSpec {
                            label: o.label,
                            vectors: o.vectors.into_iter().map(StateDoc::into_spec).collect::<Result<_, String>>()?,
                            complement: o.complement,
                        })
                    })
                    .collect::<Result<_, String>>()?;
                let premeasurement = match self.premeasurement {
                    Some(u) => Some(UnitarySpec { targets: u.targets, map: map_spec(u.map)? }),
                    None => None,
                };
                StepBody::Measure(MeasureSpec {
                    agent: self.agent.ok_or_else(|| missing("agent"))?,
                    targets: self.targets.ok_or_else(|| missing("targets"))?,
                    outcomes,
                    premeasurement,
                    broadcast_to: self.broadcast_to.unwrap_or_default(),
                    broadcast_delay: self.broadcast_delay.unwrap_or(0),
                })
            }
            "infer" => {
                present(&["agent"], &self)?;
                StepBody::Infer { agent: self.agent.ok_or_else(|| missing("agent"))? }
            }
            other => return Err(format!("unknown op `{other}` (expected unitary, measure or infer)")),
        };
        Ok(ProtocolStep { time: self.time, name: self.name, body })
    }
}
