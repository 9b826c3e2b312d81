//! Dense complex linear algebra over ordered tensor products of small,
//! named subsystems.
//!
//! Index convention: the last-listed subsystem varies fastest (row-major),
//! so in `R ⊗ Ā ⊗ S ⊗ A` the joint index is
//! `((r * 3 + ā) * 2 + s) * 3 + a`.
//!
//! All values are immutable once built; spaces are shared through [`Arc`].

use std::collections::BTreeSet;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::{EQ_TOL, IMPOSSIBLE_TOL, STRUCT_TOL};

pub type Amplitude = Complex64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// One tensor factor: a name and an ordered list of distinct basis labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsystemSpec {
    name: String,
    basis: Vec<String>,
}

impl SubsystemSpec {
    pub fn new<L: Into<String>>(name: impl Into<String>, basis: impl IntoIterator<Item = L>) -> Result<Self> {
        let name = name.into();
        let basis: Vec<String> = basis.into_iter().map(Into::into).collect();
        if basis.is_empty() {
            return Err(Error::BadSubsystem { name, reason: "dimension must be at least 1".into() });
        }
        let mut seen = BTreeSet::new();
        for label in &basis {
            if !seen.insert(label.as_str()) {
                return Err(Error::BadSubsystem { name, reason: format!("duplicate basis label `{label}`") });
            }
        }
        Ok(SubsystemSpec { name, basis })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[String] {
        &self.basis
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.basis.iter().position(|l| l == label)
    }
}

/// Ordered tensor product of subsystems.
#[derive(Debug, PartialEq, Eq)]
pub struct CompositeSpace {
    subsystems: Vec<SubsystemSpec>,
    strides: Vec<usize>,
    total_dim: usize,
}

impl CompositeSpace {
    pub fn new(subsystems: Vec<SubsystemSpec>) -> Result<Arc<Self>> {
        let mut seen = BTreeSet::new();
        for s in &subsystems {
            if !seen.insert(s.name()) {
                return Err(Error::OverlappingSubsystems(s.name().to_string()));
            }
        }
        let mut strides = vec![1; subsystems.len()];
        for k in (0..subsystems.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * subsystems[k + 1].dim();
        }
        let total_dim = subsystems.iter().map(SubsystemSpec::dim).product();
        Ok(Arc::new(CompositeSpace { subsystems, strides, total_dim }))
    }

    pub fn subsystems(&self) -> &[SubsystemSpec] {
        &self.subsystems
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.subsystems.iter().map(SubsystemSpec::name)
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.subsystems.iter().position(|s| s.name() == name)
    }

    pub fn subsystem(&self, name: &str) -> Option<&SubsystemSpec> {
        self.subsystems.iter().find(|s| s.name() == name)
    }

    /// Joint index of a product basis state given one label per subsystem.
    pub fn index_of<S: AsRef<str>>(&self, labels: &[S]) -> Result<usize> {
        if labels.len() != self.subsystems.len() {
            return Err(Error::DimensionMismatch { expected: self.subsystems.len(), got: labels.len() });
        }
        let mut index = 0;
        for ((sub, stride), label) in self.subsystems.iter().zip(&self.strides).zip(labels) {
            let label = label.as_ref();
            let d = sub.label_index(label).ok_or_else(|| Error::UnknownLabel {
                subsystem: sub.name().to_string(),
                label: label.to_string(),
            })?;
            index += d * stride;
        }
        Ok(index)
    }

    pub fn digits(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.subsystems.len()];
        for (k, stride) in self.strides.iter().enumerate() {
            out[k] = index / stride;
            index %= stride;
        }
        out
    }

    pub fn labels_of(&self, index: usize) -> Vec<&str> {
        self.digits(index)
            .into_iter()
            .zip(&self.subsystems)
            .map(|(d, s)| s.basis[d].as_str())
            .collect()
    }

    /// The space made of the named subsystems, in the order given.
    pub fn subspace<S: AsRef<str>>(&self, names: &[S]) -> Result<Arc<CompositeSpace>> {
        let subs = names
            .iter()
            .map(|n| {
                self.subsystem(n.as_ref())
                    .cloned()
                    .ok_or_else(|| Error::UnknownSubsystem(n.as_ref().to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        CompositeSpace::new(subs)
    }

    /// Positions in `self` of every subsystem of `sub`, checking that specs agree.
    fn locate(&self, sub: &CompositeSpace) -> Result<Vec<usize>> {
        sub.subsystems
            .iter()
            .map(|s| {
                let pos = self.position(s.name()).ok_or_else(|| Error::UnknownSubsystem(s.name().to_string()))?;
                if self.subsystems[pos] != *s {
                    return Err(Error::BadSubsystem {
                        name: s.name().to_string(),
                        reason: "basis differs from the enclosing space".into(),
                    });
                }
                Ok(pos)
            })
            .collect()
    }
}

fn same_space(a: &Arc<CompositeSpace>, b: &Arc<CompositeSpace>) -> bool {
    Arc::ptr_eq(a, b) || a == b
}

/// Index bookkeeping for an operator acting on a subset of a larger space.
struct LocalMap {
    /// For every full index: its local index within the subset.
    local: Vec<usize>,
    /// For every full index: the full index with all subset digits zeroed.
    rest: Vec<usize>,
    /// For every local index: its offset in the full space.
    offset: Vec<usize>,
}

impl LocalMap {
    fn new(full: &CompositeSpace, sub: &CompositeSpace) -> Result<Self> {
        let positions = full.locate(sub)?;
        let mut local = Vec::with_capacity(full.total_dim);
        let mut rest = Vec::with_capacity(full.total_dim);
        for i in 0..full.total_dim {
            let digits = full.digits(i);
            let mut l = 0;
            let mut r = i;
            for (k, &pos) in positions.iter().enumerate() {
                l += digits[pos] * sub.strides[k];
                r -= digits[pos] * full.strides[pos];
            }
            local.push(l);
            rest.push(r);
        }
        let offset = (0..sub.total_dim)
            .map(|l| {
                sub.digits(l)
                    .into_iter()
                    .zip(&positions)
                    .map(|(d, &pos)| d * full.strides[pos])
                    .sum()
            })
            .collect();
        Ok(LocalMap { local, rest, offset })
    }
}

/// Complex amplitude vector over a [`CompositeSpace`].
#[derive(Debug, Clone)]
pub struct StateVector {
    space: Arc<CompositeSpace>,
    amps: DVector<Complex64>,
    normalized: bool,
}

impl StateVector {
    pub fn new(space: Arc<CompositeSpace>, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != space.total_dim() {
            return Err(Error::DimensionMismatch { expected: space.total_dim(), got: amps.len() });
        }
        Self::from_vector(space, DVector::from_vec(amps))
    }

    fn from_vector(space: Arc<CompositeSpace>, amps: DVector<Complex64>) -> Result<Self> {
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        let normalized = (amps.norm_squared() - 1.0).abs() <= EQ_TOL;
        Ok(StateVector { space, amps, normalized })
    }

    pub fn zero(space: Arc<CompositeSpace>) -> Self {
        let n = space.total_dim();
        StateVector { space, amps: DVector::from_element(n, ZERO), normalized: false }
    }

    pub fn basis_state<S: AsRef<str>>(space: Arc<CompositeSpace>, labels: &[S]) -> Result<Self> {
        let index = space.index_of(labels)?;
        let mut amps = DVector::from_element(space.total_dim(), ZERO);
        amps[index] = ONE;
        Ok(StateVector { space, amps, normalized: true })
    }

    /// Sum of `amp · |labels⟩` terms. Repeated label tuples accumulate.
    pub fn from_terms<S: AsRef<str>>(space: Arc<CompositeSpace>, terms: &[(Complex64, Vec<S>)]) -> Result<Self> {
        let mut amps = DVector::from_element(space.total_dim(), ZERO);
        for (amp, labels) in terms {
            amps[space.index_of(labels)?] += amp;
        }
        Self::from_vector(space, amps)
    }

    pub fn space(&self) -> &Arc<CompositeSpace> {
        &self.space
    }

    pub fn amps(&self) -> &DVector<Complex64> {
        &self.amps
    }

    pub fn amplitude<S: AsRef<str>>(&self, labels: &[S]) -> Result<Complex64> {
        Ok(self.amps[self.space.index_of(labels)?])
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.norm_squared()
    }

    pub fn norm(&self) -> f64 {
        self.amps.norm()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn scaled(&self, c: Complex64) -> Result<Self> {
        let mut out = Self::from_vector(self.space.clone(), &self.amps * c)?;
        out.normalized = self.normalized && (c.norm() - 1.0).abs() <= EQ_TOL;
        Ok(out)
    }

    pub fn with_global_phase(&self, theta: f64) -> Self {
        let c = Complex64::from_polar(1.0, theta);
        StateVector { space: self.space.clone(), amps: &self.amps * c, normalized: self.normalized }
    }

    pub fn normalize(&self) -> Result<Self> {
        normalize(self)
    }

    pub fn max_abs_diff(&self, other: &StateVector) -> Result<f64> {
        if !same_space(&self.space, &other.space) {
            return Err(Error::SpaceMismatch);
        }
        Ok(self.amps.iter().zip(other.amps.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
    }

    /// Nonzero amplitudes with their basis labels, in index order.
    pub fn terms(&self, tol: f64) -> Vec<(Vec<&str>, Complex64)> {
        self.amps
            .iter()
            .enumerate()
            .filter(|(_, a)| a.norm() > tol)
            .map(|(i, a)| (self.space.labels_of(i), *a))
            .collect()
    }

    fn check_unit(&self) -> Result<()> {
        let n = self.norm_sqr();
        if (n - 1.0).abs() > STRUCT_TOL {
            return Err(Error::Unnormalized { norm_sqr: n });
        }
        Ok(())
    }
}

/// Tensor product of states on disjoint spaces, in factor order.
pub fn tensor_state(factors: &[StateVector]) -> Result<StateVector> {
    let subs: Vec<SubsystemSpec> = factors.iter().flat_map(|f| f.space.subsystems().iter().cloned()).collect();
    let space = CompositeSpace::new(subs)?;
    tensor_state_in(factors, &space)
}

/// Tensor product laid out in the subsystem order of `space`, which must be
/// covered exactly by the factors.
pub fn tensor_state_in(factors: &[StateVector], space: &Arc<CompositeSpace>) -> Result<StateVector> {
    let mut covered = BTreeSet::new();
    for f in factors {
        for name in f.space.names() {
            if !covered.insert(name.to_string()) {
                return Err(Error::OverlappingSubsystems(name.to_string()));
            }
        }
    }
    if let Some(missing) = space.names().find(|n| !covered.contains(*n)) {
        return Err(Error::Invalid(format!("no factor provides subsystem `{missing}`")));
    }
    let maps = factors.iter().map(|f| LocalMap::new(space, &f.space)).collect::<Result<Vec<_>>>()?;
    let amps = DVector::from_fn(space.total_dim(), |i, _| {
        factors.iter().zip(&maps).map(|(f, m)| f.amps[m.local[i]]).product::<Complex64>()
    });
    let mut out = StateVector::from_vector(space.clone(), amps)?;
    out.normalized = factors.iter().all(|f| f.normalized) || out.normalized;
    Ok(out)
}

/// `⟨a|b⟩`, conjugate-linear in `a`.
pub fn inner(a: &StateVector, b: &StateVector) -> Result<Complex64> {
    if !same_space(&a.space, &b.space) {
        return Err(Error::SpaceMismatch);
    }
    Ok(a.amps.dotc(&b.amps))
}

/// Rescale to unit norm without touching the global phase. A vanishing
/// vector is an impossible branch.
pub fn normalize(state: &StateVector) -> Result<StateVector> {
    let norm = state.norm();
    if norm <= IMPOSSIBLE_TOL {
        return Err(Error::ImpossibleBranch { probability: norm * norm });
    }
    let amps = &state.amps / Complex64::new(norm, 0.0);
    Ok(StateVector { space: state.space.clone(), amps, normalized: true })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpKind {
    Unitary,
    Projector,
    /// Time-ordered product of unitaries and projectors; no structural invariant.
    Chain,
}

/// Dense operator on a [`CompositeSpace`], tagged with its structural kind.
#[derive(Debug, Clone)]
pub struct LinearOp {
    space: Arc<CompositeSpace>,
    matrix: DMatrix<Complex64>,
    kind: OpKind,
}

fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

impl LinearOp {
    pub fn new(space: Arc<CompositeSpace>, matrix: DMatrix<Complex64>, kind: OpKind) -> Result<Self> {
        let n = space.total_dim();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: matrix.nrows().max(matrix.ncols()) });
        }
        if matrix.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        let op = LinearOp { space, matrix, kind };
        match kind {
            OpKind::Unitary => {
                let deviation = op.unitarity_deviation();
                if deviation > STRUCT_TOL {
                    return Err(Error::NotUnitary { deviation });
                }
            }
            OpKind::Projector => {
                let deviation = op.projector_deviation();
                if deviation > STRUCT_TOL {
                    return Err(Error::NotProjector { deviation });
                }
            }
            OpKind::Chain => {}
        }
        Ok(op)
    }

    pub fn identity(space: Arc<CompositeSpace>) -> Self {
        let n = space.total_dim();
        LinearOp { space, matrix: DMatrix::identity(n, n), kind: OpKind::Unitary }
    }

    /// The identity, tagged as the trivial projector.
    pub fn identity_projector(space: Arc<CompositeSpace>) -> Self {
        LinearOp { kind: OpKind::Projector, ..Self::identity(space) }
    }

    /// `Σ |v⟩⟨v|` over orthonormal `vectors`.
    pub fn projector_onto(space: Arc<CompositeSpace>, vectors: &[StateVector]) -> Result<Self> {
        check_orthonormal(vectors, &space).map_err(|e| Error::NotProjector { deviation: e })?;
        let n = space.total_dim();
        let mut matrix = DMatrix::from_element(n, n, ZERO);
        for v in vectors {
            matrix += &v.amps * v.amps.adjoint();
        }
        LinearOp::new(space, matrix, OpKind::Projector)
    }

    pub fn space(&self) -> &Arc<CompositeSpace> {
        &self.space
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn kind(&self) -> OpKind {
        self.kind
    }

    pub fn unitarity_deviation(&self) -> f64 {
        let n = self.matrix.nrows();
        max_abs(&(self.matrix.adjoint() * &self.matrix - DMatrix::<Complex64>::identity(n, n)))
    }

    /// `max(‖P² − P‖_max, ‖P − P†‖_max)`.
    pub fn projector_deviation(&self) -> f64 {
        let idem = max_abs(&(&self.matrix * &self.matrix - &self.matrix));
        let herm = max_abs(&(&self.matrix - self.matrix.adjoint()));
        idem.max(herm)
    }

    /// Rank of a projector (its trace, rounded).
    pub fn projector_rank(&self) -> Option<usize> {
        (self.kind == OpKind::Projector).then(|| self.matrix.trace().re.round() as usize)
    }

    /// `I − P` for a projector.
    pub fn complement(&self) -> Result<Self> {
        if self.kind != OpKind::Projector {
            return Err(Error::NotProjector { deviation: self.projector_deviation() });
        }
        let n = self.matrix.nrows();
        Ok(LinearOp { space: self.space.clone(), matrix: DMatrix::identity(n, n) - &self.matrix, kind: OpKind::Projector })
    }

    pub fn adjoint(&self) -> Self {
        LinearOp { space: self.space.clone(), matrix: self.matrix.adjoint(), kind: self.kind }
    }

    /// `self · rhs`. Unitary stays unitary; anything else becomes a chain.
    pub fn compose(&self, rhs: &LinearOp) -> Result<Self> {
        if !same_space(&self.space, &rhs.space) {
            return Err(Error::SpaceMismatch);
        }
        let kind = match (self.kind, rhs.kind) {
            (OpKind::Unitary, OpKind::Unitary) => OpKind::Unitary,
            _ => OpKind::Chain,
        };
        Ok(LinearOp { space: self.space.clone(), matrix: &self.matrix * &rhs.matrix, kind })
    }

    /// `U · self · U†`, which keeps the kind of `self`.
    pub fn conjugated_by(&self, u: &LinearOp) -> Result<Self> {
        if !same_space(&self.space, &u.space) {
            return Err(Error::SpaceMismatch);
        }
        if u.kind != OpKind::Unitary {
            return Err(Error::NotUnitary { deviation: u.unitarity_deviation() });
        }
        let matrix = &u.matrix * &self.matrix * u.matrix.adjoint();
        Ok(LinearOp { space: self.space.clone(), matrix, kind: self.kind })
    }

    pub fn max_abs_diff(&self, other: &LinearOp) -> Result<f64> {
        if !same_space(&self.space, &other.space) {
            return Err(Error::SpaceMismatch);
        }
        Ok(max_abs(&(&self.matrix - &other.matrix)))
    }

    pub fn is_identity(&self) -> bool {
        let n = self.matrix.nrows();
        max_abs(&(&self.matrix - DMatrix::<Complex64>::identity(n, n))) <= EQ_TOL
    }
}

/// Lift an operator on a subset of subsystems to `space`, acting as the
/// identity on everything else.
pub fn embed_op(op: &LinearOp, space: &Arc<CompositeSpace>) -> Result<LinearOp> {
    if same_space(&op.space, space) {
        return Ok(op.clone());
    }
    let map = LocalMap::new(space, &op.space)?;
    let n = space.total_dim();
    let matrix = DMatrix::from_fn(n, n, |i, j| {
        if map.rest[i] == map.rest[j] {
            op.matrix[(map.local[i], map.local[j])]
        } else {
            ZERO
        }
    });
    Ok(LinearOp { space: space.clone(), matrix, kind: op.kind })
}

/// Matrix-vector product. The result keeps the normalized flag only when a
/// unitary acts on a normalized state.
pub fn apply(op: &LinearOp, state: &StateVector) -> Result<StateVector> {
    if !same_space(&op.space, &state.space) {
        return Err(Error::SpaceMismatch);
    }
    Ok(StateVector {
        space: state.space.clone(),
        amps: &op.matrix * &state.amps,
        normalized: op.kind == OpKind::Unitary && state.normalized,
    })
}

/// Apply an operator defined on a subset of the state's subsystems without
/// materialising the embedded matrix.
pub fn apply_local(op: &LinearOp, state: &StateVector) -> Result<StateVector> {
    if same_space(&op.space, &state.space) {
        return apply(op, state);
    }
    let map = LocalMap::new(&state.space, &op.space)?;
    let local_dim = op.space.total_dim();
    let amps = DVector::from_fn(state.space.total_dim(), |i, _| {
        let row = map.local[i];
        let base = map.rest[i];
        (0..local_dim).map(|l| op.matrix[(row, l)] * state.amps[base + map.offset[l]]).sum()
    });
    Ok(StateVector {
        space: state.space.clone(),
        amps,
        normalized: op.kind == OpKind::Unitary && state.normalized,
    })
}

/// Largest deviation of the Gram matrix of `vectors` from the identity, or
/// the deviation as an error if it exceeds the structural tolerance.
fn check_orthonormal(vectors: &[StateVector], space: &Arc<CompositeSpace>) -> std::result::Result<f64, f64> {
    if vectors.iter().any(|v| !same_space(&v.space, space)) {
        return Err(f64::INFINITY);
    }
    let mut dev: f64 = 0.0;
    for (i, a) in vectors.iter().enumerate() {
        for (j, b) in vectors.iter().enumerate().skip(i) {
            let target = if i == j { ONE } else { ZERO };
            dev = dev.max((a.amps.dotc(&b.amps) - target).norm());
        }
    }
    if dev > STRUCT_TOL {
        Err(dev)
    } else {
        Ok(dev)
    }
}

/// Orthonormal completion of `basis` by Gram–Schmidt over the standard basis
/// vectors in index order.
fn extend_to_basis(basis: &[DVector<Complex64>], n: usize) -> Vec<DVector<Complex64>> {
    // Greedy selection succeeds for any threshold below 1/sqrt(n).
    let threshold = 0.5 / (n as f64).sqrt();
    let mut all: Vec<DVector<Complex64>> = basis.to_vec();
    let mut added = Vec::new();
    for i in 0..n {
        if all.len() == n {
            break;
        }
        let mut v = DVector::from_element(n, ZERO);
        v[i] = ONE;
        for _ in 0..2 {
            for b in &all {
                let c = b.dotc(&v);
                v -= b * c;
            }
        }
        let norm = v.norm();
        if norm > threshold {
            v /= Complex64::new(norm, 0.0);
            all.push(v.clone());
            added.push(v);
        }
    }
    added
}

/// Extend a partial map between orthonormal families to a unitary on the
/// whole space. Off the declared domain the completion pairs the
/// Gram–Schmidt extensions of domain and range in index order.
pub fn complete_isometry(space: &Arc<CompositeSpace>, partial_map: &[(StateVector, StateVector)]) -> Result<LinearOp> {
    let inputs: Vec<StateVector> = partial_map.iter().map(|(a, _)| a.clone()).collect();
    let outputs: Vec<StateVector> = partial_map.iter().map(|(_, b)| b.clone()).collect();
    if let Err(dev) = check_orthonormal(&inputs, space) {
        return Err(if dev.is_infinite() {
            Error::SpaceMismatch
        } else {
            Error::NotIsometry(format!("inputs are not orthonormal (deviation {dev:e})"))
        });
    }
    if let Err(dev) = check_orthonormal(&outputs, space) {
        return Err(if dev.is_infinite() {
            Error::SpaceMismatch
        } else {
            Error::NotIsometry(format!("outputs are not orthonormal (deviation {dev:e})"))
        });
    }
    let n = space.total_dim();
    let dom: Vec<_> = inputs.iter().map(|s| s.amps.clone()).collect();
    let ran: Vec<_> = outputs.iter().map(|s| s.amps.clone()).collect();
    let dom_ext = extend_to_basis(&dom, n);
    let ran_ext = extend_to_basis(&ran, n);
    let mut matrix = DMatrix::from_element(n, n, ZERO);
    for (v, w) in dom.iter().chain(&dom_ext).zip(ran.iter().chain(&ran_ext)) {
        matrix += w * v.adjoint();
    }
    LinearOp::new(space.clone(), matrix, OpKind::Unitary)
}

/// A split of a space's subsystems into two nonempty complementary sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bipartition {
    left: BTreeSet<String>,
    right: BTreeSet<String>,
}

impl Bipartition {
    pub fn new<S: AsRef<str>>(space: &CompositeSpace, left: &[S]) -> Result<Self> {
        let mut l = BTreeSet::new();
        for name in left {
            let name = name.as_ref();
            if space.position(name).is_none() {
                return Err(Error::UnknownSubsystem(name.to_string()));
            }
            l.insert(name.to_string());
        }
        let r: BTreeSet<String> = space.names().filter(|n| !l.contains(*n)).map(str::to_string).collect();
        if l.is_empty() || r.is_empty() {
            return Err(Error::InvalidBipartition("both sides must be nonempty".into()));
        }
        Ok(Bipartition { left: l, right: r })
    }

    pub fn from_sides<S: AsRef<str>>(space: &CompositeSpace, left: &[S], right: &[S]) -> Result<Self> {
        let cut = Self::new(space, left)?;
        let r: BTreeSet<String> = right.iter().map(|s| s.as_ref().to_string()).collect();
        if r != cut.right {
            return Err(Error::InvalidBipartition("sides must be disjoint and cover every subsystem".into()));
        }
        Ok(cut)
    }

    pub fn left(&self) -> &BTreeSet<String> {
        &self.left
    }

    pub fn right(&self) -> &BTreeSet<String> {
        &self.right
    }
}

/// Amplitudes reshaped into a `dim(left) × dim(right)` matrix.
fn reshape(state: &StateVector, left: &BTreeSet<String>) -> DMatrix<Complex64> {
    let space = &state.space;
    let (mut dl, mut dr) = (1, 1);
    for s in space.subsystems() {
        if left.contains(s.name()) {
            dl *= s.dim();
        } else {
            dr *= s.dim();
        }
    }
    let mut m = DMatrix::from_element(dl, dr, ZERO);
    for (i, a) in state.amps.iter().enumerate() {
        let (mut l, mut r) = (0, 0);
        for (d, s) in space.digits(i).into_iter().zip(space.subsystems()) {
            if left.contains(s.name()) {
                l = l * s.dim() + d;
            } else {
                r = r * s.dim() + d;
            }
        }
        m[(l, r)] = *a;
    }
    m
}

/// Schmidt rank across `cut`: the number of singular values above `tol`,
/// together with those values in descending order.
pub fn schmidt_rank(state: &StateVector, cut: &Bipartition, tol: f64) -> Result<(usize, Vec<f64>)> {
    state.check_unit()?;
    for name in cut.left.iter().chain(&cut.right) {
        if state.space.position(name).is_none() {
            return Err(Error::InvalidBipartition(format!("unknown subsystem `{name}`")));
        }
    }
    if cut.left.len() + cut.right.len() != state.space.subsystems().len() {
        return Err(Error::InvalidBipartition("cut does not cover the space".into()));
    }
    let m = reshape(state, &cut.left);
    let mut sv: Vec<f64> = m.svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv.retain(|s| *s > tol);
    Ok((sv.len(), sv))
}

/// `Tr(ρ²)` of the reduced density operator on `subset`.
pub fn reduced_purity<S: AsRef<str>>(state: &StateVector, subset: &[S]) -> Result<f64> {
    state.check_unit()?;
    let cut = Bipartition::new(&state.space, subset)?;
    let m = reshape(state, &cut.left);
    let rho = &m * m.adjoint();
    Ok(rho.iter().map(|z| z.norm_sqr()).sum())
}
