//! Projective measurement: Born weights, Lüders collapse, seeded sampling,
//! and time-ordered chain operators whose norm-square gives the probability
//! of a whole sequence of events.

use rand::Rng;

use crate::error::{Error, Result};
use crate::hilbert::{apply, normalize, LinearOp, OpKind, StateVector};
use crate::time::TimeStamp;
use crate::{IMPOSSIBLE_TOL, STRUCT_TOL};

#[derive(Debug, Clone)]
pub struct Outcome {
    pub label: String,
    pub projector: LinearOp,
}

/// A complete set of orthogonal outcome projectors, optionally preceded by
/// an entangling premeasurement unitary.
#[derive(Debug, Clone)]
pub struct ProjectiveMeasurement {
    name: String,
    outcomes: Vec<Outcome>,
    premeasurement: Option<LinearOp>,
}

impl ProjectiveMeasurement {
    pub fn new(name: impl Into<String>, outcomes: Vec<Outcome>, premeasurement: Option<LinearOp>) -> Result<Self> {
        let name = name.into();
        let bad = |reason: String| Error::BadMeasurement { name: name.clone(), reason };
        let first = outcomes.first().ok_or_else(|| bad("no outcomes".into()))?;
        let space = first.projector.space().clone();
        let n = space.total_dim();
        let mut sum = nalgebra::DMatrix::<num_complex::Complex64>::zeros(n, n);
        for (i, o) in outcomes.iter().enumerate() {
            if o.projector.kind() != OpKind::Projector {
                return Err(bad(format!("outcome `{}` is not a projector", o.label)));
            }
            if outcomes[..i].iter().any(|p| p.label == o.label) {
                return Err(bad(format!("duplicate outcome label `{}`", o.label)));
            }
            for p in &outcomes[..i] {
                let overlap = o.projector.compose(&p.projector)?;
                let dev = overlap.matrix().iter().map(|z| z.norm()).fold(0.0, f64::max);
                if dev > STRUCT_TOL {
                    return Err(bad(format!("outcomes `{}` and `{}` are not orthogonal", p.label, o.label)));
                }
            }
            sum += o.projector.matrix();
        }
        let gap = (nalgebra::DMatrix::identity(n, n) - &sum).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if gap > STRUCT_TOL {
            let total = sum.trace().re / n as f64;
            return Err(Error::IncompleteMeasurement { name, total });
        }
        if let Some(u) = &premeasurement {
            if u.kind() != OpKind::Unitary {
                return Err(bad("premeasurement is not unitary".into()));
            }
            if **u.space() != *space {
                return Err(Error::SpaceMismatch);
            }
        }
        Ok(ProjectiveMeasurement { name, outcomes, premeasurement })
    }

    /// `{target, I − target}`, storing the complement explicitly.
    pub fn binary(
        name: impl Into<String>,
        target_label: impl Into<String>,
        target: LinearOp,
        complement_label: impl Into<String>,
    ) -> Result<Self> {
        let complement = target.complement()?;
        Self::new(
            name,
            vec![
                Outcome { label: target_label.into(), projector: target },
                Outcome { label: complement_label.into(), projector: complement },
            ],
            None,
        )
    }

    pub fn with_premeasurement(mut self, u: LinearOp) -> Result<Self> {
        let outcomes = std::mem::take(&mut self.outcomes);
        Self::new(self.name, outcomes, Some(u))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    pub fn outcome(&self, label: &str) -> Option<&Outcome> {
        self.outcomes.iter().find(|o| o.label == label)
    }

    pub fn outcome_index(&self, label: &str) -> Option<usize> {
        self.outcomes.iter().position(|o| o.label == label)
    }

    pub fn premeasurement(&self) -> Option<&LinearOp> {
        self.premeasurement.as_ref()
    }

    /// The state after the premeasurement (or a copy, when there is none).
    pub fn premeasure(&self, state: &StateVector) -> Result<StateVector> {
        match &self.premeasurement {
            Some(u) => apply(u, state),
            None => Ok(state.clone()),
        }
    }

    /// Born weights of every outcome, in declared order, after premeasurement.
    pub fn probabilities(&self, state: &StateVector) -> Result<Vec<f64>> {
        let pre = self.premeasure(state)?;
        self.outcomes.iter().map(|o| born_probability(&pre, &o.projector)).collect()
    }
}

/// A realised measurement outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeRecord {
    pub measurement: String,
    pub label: String,
    pub probability: f64,
    pub time: TimeStamp,
}

/// `‖Pψ‖²` for a normalized state.
pub fn born_probability(state: &StateVector, projector: &LinearOp) -> Result<f64> {
    let n = state.norm_sqr();
    if (n - 1.0).abs() > STRUCT_TOL {
        return Err(Error::Unnormalized { norm_sqr: n });
    }
    if projector.kind() != OpKind::Projector {
        return Err(Error::NotProjector { deviation: projector.projector_deviation() });
    }
    Ok(apply(projector, state)?.norm_sqr())
}

/// Lüders update `Pψ / ‖Pψ‖`; a vanishing branch is an error.
pub fn collapse(state: &StateVector, projector: &LinearOp) -> Result<StateVector> {
    let p = born_probability(state, projector)?;
    if p <= IMPOSSIBLE_TOL {
        return Err(Error::ImpossibleBranch { probability: p });
    }
    normalize(&apply(projector, state)?)
}

/// Draw one outcome by inverse CDF over the declared outcome order and
/// return it with the collapsed state.
pub fn sample<R: Rng + ?Sized>(
    state: &StateVector,
    m: &ProjectiveMeasurement,
    rng: &mut R,
    time: TimeStamp,
) -> Result<(OutcomeRecord, StateVector)> {
    let pre = m.premeasure(state)?;
    let probs = m
        .outcomes
        .iter()
        .map(|o| born_probability(&pre, &o.projector))
        .collect::<Result<Vec<_>>>()?;
    let total: f64 = probs.iter().sum();
    if total < 1.0 - 1e-8 {
        return Err(Error::IncompleteMeasurement { name: m.name.clone(), total });
    }
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut chosen = None;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc && *p > IMPOSSIBLE_TOL {
            chosen = Some(i);
            break;
        }
    }
    // Rounding can leave u just past the last partial sum.
    let i = chosen.unwrap_or_else(|| probs.iter().rposition(|p| *p > IMPOSSIBLE_TOL).unwrap_or(0));
    let outcome = &m.outcomes[i];
    let post = collapse(&pre, &outcome.projector)?;
    let record = OutcomeRecord {
        measurement: m.name.clone(),
        label: outcome.label.clone(),
        probability: probs[i],
        time,
    };
    Ok((record, post))
}

/// Time-ordered product `E = S_n ⋯ S_1` of the given steps (earliest first).
/// The probability of the whole event sequence is `‖Eψ‖²`.
pub fn chain_operator(steps: &[&LinearOp]) -> Result<LinearOp> {
    let (first, rest) = steps.split_first().ok_or_else(|| Error::Invalid("empty chain".into()))?;
    let mut acc = (*first).clone();
    for s in rest {
        acc = s.compose(&acc)?;
    }
    LinearOp::new(acc.space().clone(), acc.matrix().clone(), OpKind::Chain)
}

/// `‖Eψ‖²`.
pub fn event_probability(chain: &LinearOp, state: &StateVector) -> Result<f64> {
    Ok(apply(chain, state)?.norm_sqr())
}

/// One step of a sequential measurement record: an optional unitary
/// followed by an outcome projector.
pub type SeqStep<'a> = (Option<&'a LinearOp>, &'a LinearOp);

/// Product of conditional Born factors with collapse after each projector.
/// A vanishing branch yields probability 0 and no final state.
pub fn sequential_joint(state: &StateVector, steps: &[SeqStep<'_>]) -> Result<(f64, Option<StateVector>)> {
    let n = state.norm_sqr();
    if (n - 1.0).abs() > STRUCT_TOL {
        return Err(Error::Unnormalized { norm_sqr: n });
    }
    let mut current = normalize(state)?;
    let mut p = 1.0;
    for (u, projector) in steps {
        if let Some(u) = u {
            current = apply(u, &current)?;
        }
        let factor = born_probability(&current, projector)?;
        if factor <= IMPOSSIBLE_TOL {
            return Ok((0.0, None));
        }
        p *= factor;
        current = normalize(&apply(projector, &current)?)?;
    }
    Ok((p, Some(current)))
}

/// Flatten a sequential record into the operator list for [`chain_operator`].
pub fn chain_steps<'a>(steps: &[SeqStep<'a>]) -> Vec<&'a LinearOp> {
    steps.iter().flat_map(|(u, p)| u.iter().copied().chain(std::iter::once(*p))).collect()
}

/// `|‖Eψ‖² − Π conditional factors|` for the same step decomposition.
pub fn verify_equivalence(state: &StateVector, steps: &[SeqStep<'_>]) -> Result<f64> {
    if steps.is_empty() {
        return Ok(0.0);
    }
    let chain = chain_operator(&chain_steps(steps))?;
    let heisenberg = event_probability(&chain, state)?;
    let (schrodinger, _) = sequential_joint(state, steps)?;
    Ok((heisenberg - schrodinger).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{CompositeSpace, SubsystemSpec};
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn qubit_space() -> std::sync::Arc<CompositeSpace> {
        CompositeSpace::new(vec![SubsystemSpec::new("Q", ["0", "1"]).unwrap()]).unwrap()
    }

    fn z_measurement() -> ProjectiveMeasurement {
        let space = qubit_space();
        let p0 = LinearOp::projector_onto(space.clone(), &[StateVector::basis_state(space, &["0"]).unwrap()]).unwrap();
        ProjectiveMeasurement::binary("z", "0", p0, "1").unwrap()
    }

    #[test]
    fn incomplete_and_overlapping_sets_are_rejected() {
        let space = qubit_space();
        let p0 = LinearOp::projector_onto(space.clone(), &[StateVector::basis_state(space.clone(), &["0"]).unwrap()]).unwrap();
        let only = ProjectiveMeasurement::new("z", vec![Outcome { label: "0".into(), projector: p0.clone() }], None);
        assert!(matches!(only, Err(Error::IncompleteMeasurement { .. })));
        let twice = ProjectiveMeasurement::new(
            "z",
            vec![
                Outcome { label: "a".into(), projector: p0.clone() },
                Outcome { label: "b".into(), projector: p0 },
            ],
            None,
        );
        assert!(matches!(twice, Err(Error::BadMeasurement { .. })));
    }

    #[test]
    fn eigenstate_collapse_is_identity() {
        let m = z_measurement();
        let one = StateVector::basis_state(qubit_space(), &["1"]).unwrap();
        let post = collapse(&one, &m.outcome("1").unwrap().projector).unwrap();
        assert!(post.max_abs_diff(&one).unwrap() < 1e-15);
        assert!(matches!(collapse(&one, &m.outcome("0").unwrap().projector), Err(Error::ImpossibleBranch { .. })));
    }

    #[test]
    fn born_requires_normalized_state() {
        let m = z_measurement();
        let v = StateVector::new(qubit_space(), vec![Complex64::new(2.0, 0.0), Complex64::new(0.0, 0.0)]).unwrap();
        assert!(matches!(born_probability(&v, &m.outcomes()[0].projector), Err(Error::Unnormalized { .. })));
    }

    #[test]
    fn eigenstate_sampling_is_certain_and_replayable() {
        let m = z_measurement();
        let one = StateVector::basis_state(qubit_space(), &["1"]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let (rec, _) = sample(&one, &m, &mut rng, TimeStamp::ZERO).unwrap();
            assert_eq!(rec.label, "1");
        }
        let h = 0.5f64.sqrt();
        let plus = StateVector::new(qubit_space(), vec![Complex64::new(h, 0.0), Complex64::new(h, 0.0)]).unwrap();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..64).map(|_| sample(&plus, &m, &mut rng, TimeStamp::ZERO).unwrap().0.label).collect::<Vec<_>>()
        };
        assert_eq!(draw(42), draw(42));
        assert_ne!(draw(42), draw(43));
    }

    #[test]
    fn one_step_chain_matches_born() {
        let m = z_measurement();
        let h = 0.5f64.sqrt();
        let psi = StateVector::new(qubit_space(), vec![Complex64::new(h, 0.0), Complex64::new(0.0, h)]).unwrap();
        let p = &m.outcomes()[1].projector;
        let e = chain_operator(&[p]).unwrap();
        assert_eq!(e.kind(), OpKind::Chain);
        assert!((event_probability(&e, &psi).unwrap() - born_probability(&psi, p).unwrap()).abs() < 1e-15);
        assert_eq!(verify_equivalence(&psi, &[(None, p)]).unwrap(), 0.0);
    }

    #[test]
    fn vanishing_sequence_returns_zero_without_state() {
        let m = z_measurement();
        let zero = StateVector::basis_state(qubit_space(), &["0"]).unwrap();
        let (p, post) = sequential_joint(&zero, &[(None, &m.outcomes()[1].projector)]).unwrap();
        assert_eq!(p, 0.0);
        assert!(post.is_none());
    }
}
