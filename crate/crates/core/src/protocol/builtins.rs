//! Built-in scenarios: the two-lab extended Wigner's-friend experiment,
//! the original single-friend scenario, and an EPR pair.

use super::{Amp, MapPair, MeasureSpec, OutcomeSpec, Protocol, ProtocolStep, StateSpec, StepBody, SubsystemDecl, UnitarySpec};
use crate::time::TimeStamp;

pub const BUILTIN_NAMES: [&str; 5] = ["wfr", "wfr-synced", "wigner", "wigner-synced", "epr"];

/// Look up a builtin by name (`wfr`, `wfr-synced`, `wigner`, `wigner-synced`, `epr`).
pub fn builtin(name: &str) -> Option<Protocol> {
    Some(match name {
        "wfr" => builtin_wfr(),
        "wfr-synced" => builtin_wfr_synced(),
        "wigner" => builtin_wigner(),
        "wigner-synced" => builtin_wigner_synced(),
        "epr" => builtin_epr(),
        _ => return None,
    })
}

const fn t(step: u32, substep: u32) -> TimeStamp {
    TimeStamp::new(1, step, substep)
}

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

fn map(pairs: Vec<(StateSpec, StateSpec)>) -> Vec<MapPair> {
    pairs.into_iter().map(|(from, to)| MapPair { from, to }).collect()
}

fn basis_outcomes(labels: &[&str]) -> Vec<OutcomeSpec> {
    labels
        .iter()
        .map(|l| OutcomeSpec { label: l.to_string(), vectors: vec![StateSpec::basis([*l])], complement: false })
        .collect()
}

fn binary_outcomes(label: &str, vector: StateSpec, complement: &str) -> Vec<OutcomeSpec> {
    vec![
        OutcomeSpec { label: label.into(), vectors: vec![vector], complement: false },
        OutcomeSpec { label: complement.into(), vectors: vec![], complement: true },
    ]
}

fn step(time: TimeStamp, name: &str, body: StepBody) -> ProtocolStep {
    ProtocolStep { time, name: name.into(), body }
}

fn measure(agent: &str, targets: &[&str], outcomes: Vec<OutcomeSpec>) -> MeasureSpec {
    MeasureSpec {
        agent: agent.into(),
        targets: strings(targets),
        outcomes,
        premeasurement: None,
        broadcast_to: vec![],
        broadcast_delay: 0,
    }
}

fn infer(agent: &str) -> StepBody {
    StepBody::Infer { agent: agent.into() }
}

/// The two-lab experiment without synchronisation. Only the announcement
/// of `wbar` to W (one substep later) is kept.
pub fn builtin_wfr() -> Protocol {
    let half = Amp::sqrt(1, 2);
    let coin_to_labs = UnitarySpec {
        targets: strings(&["R", "Abar", "S"]),
        map: map(vec![
            (StateSpec::basis(["head", "init", "down"]), StateSpec::basis(["head", "hbar", "down"])),
            (
                StateSpec::basis(["tail", "init", "down"]),
                StateSpec::default().term(half, ["tail", "tbar", "up"]).term(half, ["tail", "tbar", "down"]),
            ),
        ]),
    };
    let friend_reads_spin = UnitarySpec {
        targets: strings(&["S", "A"]),
        map: map(vec![
            (StateSpec::basis(["down", "init"]), StateSpec::basis(["down", "down"])),
            (StateSpec::basis(["up", "init"]), StateSpec::basis(["up", "up"])),
        ]),
    };
    let okbar = StateSpec::default().term(half, ["head", "hbar"]).term(Amp::neg_sqrt(1, 2), ["tail", "tbar"]);
    let ok = StateSpec::default().term(half, ["down", "down"]).term(Amp::neg_sqrt(1, 2), ["up", "up"]);
    let mut wbar = measure("Wbar", &["R", "Abar"], binary_outcomes("okbar", okbar, "failbar"));
    wbar.broadcast_to = strings(&["W"]);
    wbar.broadcast_delay = 1;

    Protocol {
        subsystems: vec![
            SubsystemDecl::new("R", ["head", "tail"]),
            SubsystemDecl::new("Abar", ["init", "hbar", "tbar"]),
            SubsystemDecl::new("S", ["down", "up"]),
            SubsystemDecl::new("A", ["init", "up", "down"]),
        ],
        agents: strings(&["Fbar", "F", "Wbar", "W"]),
        initial: StateSpec::default()
            .term(Amp::sqrt(1, 3), ["head", "init", "down", "init"])
            .term(Amp::sqrt(2, 3), ["tail", "init", "down", "init"]),
        steps: vec![
            step(t(0, 0), "U_init_00", StepBody::Unitary(coin_to_labs)),
            step(t(0, 1), "r", StepBody::Measure(measure("Fbar", &["R"], basis_outcomes(&["head", "tail"])))),
            step(t(0, 2), "Fbar^n:02", infer("Fbar")),
            step(t(1, 0), "U_10_20", StepBody::Unitary(friend_reads_spin)),
            step(t(1, 1), "z", StepBody::Measure(measure("F", &["S"], basis_outcomes(&["down", "up"])))),
            step(t(1, 2), "F^n:12", infer("F")),
            step(t(1, 3), "F^n:13", infer("F")),
            step(t(1, 4), "F^n:14", infer("F")),
            step(t(2, 1), "wbar", StepBody::Measure(wbar)),
            step(t(3, 1), "w", StepBody::Measure(measure("W", &["S", "A"], binary_outcomes("ok", ok, "fail")))),
        ],
    }
}

/// Every measurement is announced to all other agents one substep later.
pub fn builtin_wfr_synced() -> Protocol {
    builtin_wfr().synchronized(1)
}

/// A friend measures a spin inside a sealed lab while Wigner later measures
/// the lab in an entangled basis.
pub fn builtin_wigner() -> Protocol {
    let half = Amp::sqrt(1, 2);
    let mut z = measure("F", &["S"], basis_outcomes(&["down", "up"]));
    z.premeasurement = Some(UnitarySpec {
        targets: strings(&["S", "A"]),
        map: map(vec![
            (StateSpec::basis(["down", "init"]), StateSpec::basis(["down", "down"])),
            (StateSpec::basis(["up", "init"]), StateSpec::basis(["up", "up"])),
        ]),
    });
    let ok = StateSpec::default().term(half, ["down", "down"]).term(Amp::neg_sqrt(1, 2), ["up", "up"]);
    Protocol {
        subsystems: vec![SubsystemDecl::new("S", ["down", "up"]), SubsystemDecl::new("A", ["init", "up", "down"])],
        agents: strings(&["F", "W"]),
        initial: StateSpec::default().term(half, ["down", "init"]).term(half, ["up", "init"]),
        steps: vec![
            step(t(0, 1), "z", StepBody::Measure(z)),
            step(t(1, 1), "w", StepBody::Measure(measure("W", &["S", "A"], binary_outcomes("ok", ok, "fail")))),
        ],
    }
}

pub fn builtin_wigner_synced() -> Protocol {
    builtin_wigner().synchronized(1)
}

/// Singlet pair; each side measures locally and tells the other.
pub fn builtin_epr() -> Protocol {
    let mut a = measure("Alice", &["Q1"], basis_outcomes(&["up", "down"]));
    a.broadcast_to = strings(&["Bob"]);
    a.broadcast_delay = 1;
    let mut b = measure("Bob", &["Q2"], basis_outcomes(&["up", "down"]));
    b.broadcast_to = strings(&["Alice"]);
    b.broadcast_delay = 1;
    Protocol {
        subsystems: vec![SubsystemDecl::new("Q1", ["up", "down"]), SubsystemDecl::new("Q2", ["up", "down"])],
        agents: strings(&["Alice", "Bob"]),
        initial: StateSpec::default()
            .term(Amp::sqrt(1, 2), ["up", "down"])
            .term(Amp::neg_sqrt(1, 2), ["down", "up"]),
        steps: vec![step(t(0, 1), "a", StepBody::Measure(a)), step(t(1, 1), "b", StepBody::Measure(b))],
    }
}
