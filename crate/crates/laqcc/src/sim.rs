//! Dense statevector engine.
//!
//! Qubit 0 of the live list is the least significant bit of the amplitude
//! index. Qubits carry stable ids; the position of an id in the live list can
//! change when other qubits are recycled.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::rng::RandomSource;
use crate::{Error, Result};

pub type QubitId = usize;
pub type Registers = BTreeMap<String, u64>;

pub const DEFAULT_MAX_WIDTH: usize = 26;
/// Mass threshold below which a basis value counts as absent.
pub const RECYCLE_TOL: f64 = 1e-12;

const C0: Complex64 = Complex64::new(0.0, 0.0);
const C1: Complex64 = Complex64::new(1.0, 0.0);

/// Square complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    pub dim: usize,
    pub data: Vec<Complex64>,
}

impl Matrix {
    pub fn new(dim: usize, data: Vec<Complex64>) -> Self {
        assert_eq!(data.len(), dim * dim);
        Matrix { dim, data }
    }

    pub fn identity(dim: usize) -> Self {
        let mut data = vec![C0; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = C1;
        }
        Matrix { dim, data }
    }

    pub fn at(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.dim + c]
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        let d = self.dim;
        let mut data = vec![C0; d * d];
        for r in 0..d {
            for c in 0..d {
                let mut s = C0;
                for k in 0..d {
                    s += self.at(r, k) * other.at(k, c);
                }
                data[r * d + c] = s;
            }
        }
        Matrix { dim: d, data }
    }

    pub fn adjoint(&self) -> Matrix {
        let d = self.dim;
        let mut data = vec![C0; d * d];
        for r in 0..d {
            for c in 0..d {
                data[c * d + r] = self.at(r, c).conj();
            }
        }
        Matrix { dim: d, data }
    }

    /// Largest entry of |U†U − I|.
    pub fn unitarity_error(&self) -> f64 {
        let p = self.adjoint().mul(self);
        let id = Matrix::identity(self.dim);
        p.data
            .iter()
            .zip(&id.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.at(i, i)).sum()
    }
}

impl Serialize for Matrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = (0..self.dim)
            .map(|r| {
                (0..self.dim)
                    .map(|c| {
                        let z = self.at(r, c);
                        [z.re, z.im]
                    })
                    .collect()
            })
            .collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Matrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<[f64; 2]>> = Vec::deserialize(d)?;
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in &rows {
            if row.len() != dim {
                return Err(serde::de::Error::custom("matrix must be square"));
            }
            data.extend(row.iter().map(|z| Complex64::new(z[0], z[1])));
        }
        Ok(Matrix { dim, data })
    }
}

/// Gate kinds. Controlled kinds take their control from `GateOp::controls`.
#[derive(Clone, Debug, PartialEq)]
pub enum GateKind {
    H,
    X,
    Y,
    Z,
    S,
    T,
    RX(f64),
    RY(f64),
    RZ(f64),
    CNOT,
    CZ,
    CRZ(f64),
    CRY(f64),
    SWAP,
    Custom(Matrix),
}

impl GateKind {
    pub fn name(&self) -> &'static str {
        match self {
            GateKind::H => "H",
            GateKind::X => "X",
            GateKind::Y => "Y",
            GateKind::Z => "Z",
            GateKind::S => "S",
            GateKind::T => "T",
            GateKind::RX(_) => "RX",
            GateKind::RY(_) => "RY",
            GateKind::RZ(_) => "RZ",
            GateKind::CNOT => "CNOT",
            GateKind::CZ => "CZ",
            GateKind::CRZ(_) => "CRZ",
            GateKind::CRY(_) => "CRY",
            GateKind::SWAP => "SWAP",
            GateKind::Custom(_) => "U",
        }
    }

    pub fn angle(&self) -> Option<f64> {
        match self {
            GateKind::RX(t) | GateKind::RY(t) | GateKind::RZ(t) | GateKind::CRZ(t) | GateKind::CRY(t) => {
                Some(*t)
            }
            _ => None,
        }
    }

    pub fn from_name(name: &str, theta: Option<f64>, matrix: Option<Matrix>) -> Result<GateKind> {
        let need = |t: Option<f64>| t.ok_or_else(|| Error::Validation(format!("gate {name} needs an angle")));
        Ok(match name {
            "H" => GateKind::H,
            "X" => GateKind::X,
            "Y" => GateKind::Y,
            "Z" => GateKind::Z,
            "S" => GateKind::S,
            "T" => GateKind::T,
            "RX" => GateKind::RX(need(theta)?),
            "RY" => GateKind::RY(need(theta)?),
            "RZ" => GateKind::RZ(need(theta)?),
            "CNOT" | "CX" => GateKind::CNOT,
            "CZ" => GateKind::CZ,
            "CRZ" => GateKind::CRZ(need(theta)?),
            "CRY" => GateKind::CRY(need(theta)?),
            "SWAP" => GateKind::SWAP,
            "U" => GateKind::Custom(
                matrix.ok_or_else(|| Error::Validation("custom gate needs a matrix".into()))?,
            ),
            other => return Err(Error::Validation(format!("unknown gate kind {other}"))),
        })
    }

    /// Number of qubits the base matrix acts on.
    pub fn arity(&self) -> usize {
        match self {
            GateKind::SWAP => 2,
            GateKind::Custom(m) => m.dim.trailing_zeros() as usize,
            _ => 1,
        }
    }

    /// Number of controls built into the kind.
    pub fn builtin_controls(&self) -> usize {
        match self {
            GateKind::CNOT | GateKind::CZ | GateKind::CRZ(_) | GateKind::CRY(_) => 1,
            _ => 0,
        }
    }

    /// Matrix of the uncontrolled base operation.
    pub fn base_matrix(&self) -> Matrix {
        let c = |re: f64, im: f64| Complex64::new(re, im);
        match self {
            GateKind::H => Matrix::new(
                2,
                vec![c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0), c(-FRAC_1_SQRT_2, 0.0)],
            ),
            GateKind::X | GateKind::CNOT => Matrix::new(2, vec![C0, C1, C1, C0]),
            GateKind::Y => Matrix::new(2, vec![C0, c(0.0, -1.0), c(0.0, 1.0), C0]),
            GateKind::Z | GateKind::CZ => Matrix::new(2, vec![C1, C0, C0, c(-1.0, 0.0)]),
            GateKind::S => Matrix::new(2, vec![C1, C0, C0, c(0.0, 1.0)]),
            GateKind::T => Matrix::new(2, vec![C1, C0, C0, Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4)]),
            GateKind::RX(t) => {
                let (s, co) = (t / 2.0).sin_cos();
                Matrix::new(2, vec![c(co, 0.0), c(0.0, -s), c(0.0, -s), c(co, 0.0)])
            }
            GateKind::RY(t) | GateKind::CRY(t) => {
                let (s, co) = (t / 2.0).sin_cos();
                Matrix::new(2, vec![c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0)])
            }
            GateKind::RZ(t) | GateKind::CRZ(t) => Matrix::new(
                2,
                vec![Complex64::from_polar(1.0, -t / 2.0), C0, C0, Complex64::from_polar(1.0, t / 2.0)],
            ),
            GateKind::SWAP => {
                let mut m = Matrix::identity(4);
                m.data = vec![C1, C0, C0, C0, C0, C0, C1, C0, C0, C1, C0, C0, C0, C0, C0, C1];
                m
            }
            GateKind::Custom(m) => m.clone(),
        }
    }
}

/// One gate application.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GateSpec", into = "GateSpec")]
pub struct GateOp {
    pub kind: GateKind,
    pub targets: Vec<QubitId>,
    pub controls: Vec<QubitId>,
    /// Name of a classical value; the gate fires only when it is nonzero.
    pub condition: Option<String>,
}

/// Serialized gate: `{"g":"CNOT","c":[0],"t":[1]}` with optional
/// `theta`, `m` (custom matrix) and `if` (classical condition).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GateSpec {
    pub g: String,
    pub t: Vec<QubitId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub c: Vec<QubitId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<Matrix>,
    #[serde(default, rename = "if", skip_serializing_if = "Option::is_none")]
    pub cond: Option<String>,
}

impl From<GateOp> for GateSpec {
    fn from(op: GateOp) -> Self {
        let m = match &op.kind {
            GateKind::Custom(m) => Some(m.clone()),
            _ => None,
        };
        GateSpec {
            g: op.kind.name().to_string(),
            theta: op.kind.angle(),
            t: op.targets,
            c: op.controls,
            m,
            cond: op.condition,
        }
    }
}

impl TryFrom<GateSpec> for GateOp {
    type Error = Error;

    fn try_from(s: GateSpec) -> Result<Self> {
        let kind = GateKind::from_name(&s.g, s.theta, s.m)?;
        let op = GateOp {
            kind,
            targets: s.t,
            controls: s.c,
            condition: s.cond,
        };
        op.validate()?;
        Ok(op)
    }
}

impl GateOp {
    pub fn new(kind: GateKind, targets: Vec<QubitId>, controls: Vec<QubitId>) -> Self {
        GateOp {
            kind,
            targets,
            controls,
            condition: None,
        }
    }

    pub fn single(kind: GateKind, q: QubitId) -> Self {
        Self::new(kind, vec![q], vec![])
    }

    pub fn controlled(kind: GateKind, control: QubitId, target: QubitId) -> Self {
        Self::new(kind, vec![target], vec![control])
    }

    pub fn when(mut self, name: impl Into<String>) -> Self {
        self.condition = Some(name.into());
        self
    }

    /// All qubits touched by the gate.
    pub fn qubits(&self) -> Vec<QubitId> {
        let mut v = self.controls.clone();
        v.extend(&self.targets);
        v
    }

    pub fn validate(&self) -> Result<()> {
        if self.targets.len() != self.kind.arity() {
            return Err(Error::Validation(format!(
                "gate {} expects {} target(s), got {}",
                self.kind.name(),
                self.kind.arity(),
                self.targets.len()
            )));
        }
        if self.controls.len() < self.kind.builtin_controls() {
            return Err(Error::Validation(format!("gate {} needs a control", self.kind.name())));
        }
        let q = self.qubits();
        for (i, a) in q.iter().enumerate() {
            if q[i + 1..].contains(a) {
                return Err(Error::Validation(format!("qubit {a} used twice in gate {}", self.kind.name())));
            }
        }
        if let GateKind::Custom(m) = &self.kind {
            if !m.dim.is_power_of_two() || m.dim < 2 {
                return Err(Error::Validation("custom matrix dimension must be a power of two".into()));
            }
            if m.unitarity_error() > 1e-12 {
                return Err(Error::Validation("custom matrix is not unitary".into()));
            }
        }
        Ok(())
    }
}

/// Outcome of one measurement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub qubit: QubitId,
    pub outcome: u8,
    pub probability_of_outcome: f64,
    pub forced: bool,
}

/// JSON dump of a state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateDump {
    pub n: usize,
    pub amplitudes: Vec<[f64; 2]>,
}

/// Dense statevector over a dynamic set of live qubits.
#[derive(Clone, Debug)]
pub struct QuantumState {
    live: Vec<QubitId>,
    amps: Vec<Complex64>,
    max_width: usize,
    next_id: QubitId,
    pub global_norm_tolerance: f64,
}

impl Default for QuantumState {
    fn default() -> Self {
        Self::new()
    }
}

impl QuantumState {
    /// Empty state (no qubits, amplitude 1).
    pub fn new() -> Self {
        Self::with_max_width(DEFAULT_MAX_WIDTH)
    }

    pub fn with_max_width(max_width: usize) -> Self {
        QuantumState {
            live: Vec::new(),
            amps: vec![C1],
            max_width,
            next_id: 0,
            global_norm_tolerance: 1e-10,
        }
    }

    /// State on `n` fresh qubits (ids 0..n) with the given amplitudes.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        if !amps.len().is_power_of_two() {
            return Err(Error::Validation("amplitude count must be a power of two".into()));
        }
        let n = amps.len().trailing_zeros() as usize;
        if n > DEFAULT_MAX_WIDTH {
            return Err(Error::Capacity(format!("{n} qubits exceeds the width limit")));
        }
        Ok(QuantumState {
            live: (0..n).collect(),
            amps,
            max_width: DEFAULT_MAX_WIDTH,
            next_id: n,
            global_norm_tolerance: 1e-10,
        })
    }

    /// Computational basis state |value⟩ on `n` fresh qubits.
    pub fn basis(n: usize, value: usize) -> Result<Self> {
        let mut amps = vec![C0; 1 << n];
        amps[value] = C1;
        Self::from_amplitudes(amps)
    }

    pub fn width(&self) -> usize {
        self.live.len()
    }

    pub fn max_width(&self) -> usize {
        self.max_width
    }

    pub fn set_max_width(&mut self, w: usize) {
        self.max_width = w;
    }

    pub fn live_qubits(&self) -> &[QubitId] {
        &self.live
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    /// Next id that `alloc` will hand out.
    pub fn peek_next_id(&self) -> QubitId {
        self.next_id
    }

    pub fn is_live(&self, q: QubitId) -> bool {
        self.live.contains(&q)
    }

    pub fn position(&self, q: QubitId) -> Result<usize> {
        self.live
            .iter()
            .position(|&x| x == q)
            .ok_or_else(|| Error::Usage(format!("qubit {q} is not live")))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Allocate `count` qubits in |0⟩; they become the most significant bits.
    pub fn alloc(&mut self, count: usize) -> Result<Vec<QubitId>> {
        if count == 0 {
            return Err(Error::Usage("alloc count must be at least 1".into()));
        }
        if self.live.len() + count > self.max_width {
            return Err(Error::Capacity(format!(
                "allocating {count} qubit(s) on width {} exceeds the limit {}",
                self.live.len(),
                self.max_width
            )));
        }
        let old = self.amps.len();
        self.amps.resize(old << count, C0);
        let ids: Vec<QubitId> = (self.next_id..self.next_id + count).collect();
        self.next_id += count;
        self.live.extend(&ids);
        Ok(ids)
    }

    fn mask_of(&self, qs: &[QubitId]) -> Result<usize> {
        let mut m = 0usize;
        for &q in qs {
            m |= 1 << self.position(q)?;
        }
        Ok(m)
    }

    /// Apply a gate. Fails if the gate carries an unresolved classical condition.
    pub fn apply(&mut self, op: &GateOp) -> Result<()> {
        if let Some(c) = &op.condition {
            return Err(Error::Validation(format!("unresolved classical condition {c}")));
        }
        self.apply_unconditioned(op)
    }

    /// Apply a gate, resolving its classical condition against `regs`.
    pub fn apply_with(&mut self, op: &GateOp, regs: &Registers) -> Result<()> {
        if let Some(c) = &op.condition {
            match regs.get(c) {
                None => return Err(Error::Validation(format!("dangling classical reference {c}"))),
                Some(0) => return Ok(()),
                Some(_) => {}
            }
        }
        self.apply_unconditioned(op)
    }

    fn apply_unconditioned(&mut self, op: &GateOp) -> Result<()> {
        op.validate()?;
        let ctrl = self.mask_of(&op.controls)?;
        let m = op.kind.base_matrix();
        match op.targets.len() {
            1 => {
                let t = self.position(op.targets[0])?;
                self.kernel_1q(t, &m, ctrl);
            }
            2 => {
                let t0 = self.position(op.targets[0])?;
                let t1 = self.position(op.targets[1])?;
                self.kernel_2q(t0, t1, &m, ctrl);
            }
            k => {
                let pos: Vec<usize> = op.targets.iter().map(|&q| self.position(q)).collect::<Result<_>>()?;
                self.kernel_kq(&pos, &m, ctrl, k);
            }
        }
        Ok(())
    }

    fn kernel_1q(&mut self, t: usize, m: &Matrix, ctrl: usize) {
        let bit = 1usize << t;
        let (m00, m01, m10, m11) = (m.data[0], m.data[1], m.data[2], m.data[3]);
        let diag = m01 == C0 && m10 == C0;
        for i in 0..self.amps.len() {
            if i & bit != 0 || i & ctrl != ctrl {
                continue;
            }
            let j = i | bit;
            let (a, b) = (self.amps[i], self.amps[j]);
            if diag {
                self.amps[i] = m00 * a;
                self.amps[j] = m11 * b;
            } else {
                self.amps[i] = m00 * a + m01 * b;
                self.amps[j] = m10 * a + m11 * b;
            }
        }
    }

    fn kernel_2q(&mut self, t0: usize, t1: usize, m: &Matrix, ctrl: usize) {
        let (b0, b1) = (1usize << t0, 1usize << t1);
        for i in 0..self.amps.len() {
            if i & (b0 | b1) != 0 || i & ctrl != ctrl {
                continue;
            }
            let idx = [i, i | b0, i | b1, i | b0 | b1];
            let v = [self.amps[idx[0]], self.amps[idx[1]], self.amps[idx[2]], self.amps[idx[3]]];
            for r in 0..4 {
                let mut s = C0;
                for c in 0..4 {
                    s += m.data[r * 4 + c] * v[c];
                }
                self.amps[idx[r]] = s;
            }
        }
    }

    fn kernel_kq(&mut self, pos: &[usize], m: &Matrix, ctrl: usize, k: usize) {
        let tmask: usize = pos.iter().map(|&p| 1usize << p).sum();
        let d = 1usize << k;
        let mut idx = vec![0usize; d];
        let mut v = vec![C0; d];
        for i in 0..self.amps.len() {
            if i & tmask != 0 || i & ctrl != ctrl {
                continue;
            }
            for (s, slot) in idx.iter_mut().enumerate() {
                let mut j = i;
                for (b, &p) in pos.iter().enumerate() {
                    if s >> b & 1 == 1 {
                        j |= 1 << p;
                    }
                }
                *slot = j;
            }
            for s in 0..d {
                v[s] = self.amps[idx[s]];
            }
            for r in 0..d {
                let mut acc = C0;
                for c in 0..d {
                    acc += m.data[r * d + c] * v[c];
                }
                self.amps[idx[r]] = acc;
            }
        }
    }

    /// Value of the sub-register `qs` (qs[0] least significant) inside basis index `i`.
    fn sub_value(pos: &[usize], i: usize) -> usize {
        let mut v = 0;
        for (b, &p) in pos.iter().enumerate() {
            v |= (i >> p & 1) << b;
        }
        v
    }

    /// Multiply each basis amplitude by `f(value of qs)`.
    ///
    /// `f` must return unit-modulus values for the operation to be unitary.
    pub fn apply_diagonal(&mut self, qs: &[QubitId], f: impl Fn(usize) -> Complex64) -> Result<()> {
        let pos: Vec<usize> = qs.iter().map(|&q| self.position(q)).collect::<Result<_>>()?;
        let table: Vec<Complex64> = (0..1usize << qs.len()).map(&f).collect();
        for (i, a) in self.amps.iter_mut().enumerate() {
            *a *= table[Self::sub_value(&pos, i)];
        }
        Ok(())
    }

    /// Permute basis values of the sub-register `qs` by `table` (value → image).
    pub fn apply_permutation(&mut self, qs: &[QubitId], table: &[usize]) -> Result<()> {
        let pos: Vec<usize> = qs.iter().map(|&q| self.position(q)).collect::<Result<_>>()?;
        let size = 1usize << qs.len();
        if table.len() != size {
            return Err(Error::Validation("permutation table has the wrong length".into()));
        }
        let mut seen = vec![false; size];
        for &t in table {
            if t >= size || seen[t] {
                return Err(Error::Validation("table is not a permutation".into()));
            }
            seen[t] = true;
        }
        let mask: usize = pos.iter().map(|&p| 1usize << p).sum();
        let mut out = vec![C0; self.amps.len()];
        for (i, &a) in self.amps.iter().enumerate() {
            if a == C0 {
                continue;
            }
            let v = table[Self::sub_value(&pos, i)];
            let mut j = i & !mask;
            for (b, &p) in pos.iter().enumerate() {
                j |= (v >> b & 1) << p;
            }
            out[j] = a;
        }
        self.amps = out;
        Ok(())
    }

    /// Probability that qubit `q` reads 1.
    pub fn prob_one(&self, q: QubitId) -> Result<f64> {
        let bit = 1usize << self.position(q)?;
        Ok(self
            .amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & bit != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }

    /// Measure qubit `q` in the computational basis.
    ///
    /// With `forced` the outcome is fixed; forcing an outcome of probability
    /// at most `1e-12` is a branch error. The qubit stays live in the observed
    /// basis state.
    pub fn measure(&mut self, q: QubitId, rng: &mut RandomSource, forced: Option<u8>) -> Result<MeasurementRecord> {
        let p1 = self.prob_one(q)?.clamp(0.0, 1.0);
        let outcome = match forced {
            Some(b) => {
                let p = if b == 1 { p1 } else { 1.0 - p1 };
                if p <= RECYCLE_TOL {
                    return Err(Error::Branch(format!(
                        "cannot force outcome {b} on qubit {q}: probability {p:e}"
                    )));
                }
                b
            }
            None => rng.choose_outcome(p1, RECYCLE_TOL) as u8,
        };
        let p = if outcome == 1 { p1 } else { 1.0 - p1 };
        if p <= 0.0 {
            return Err(Error::Branch(format!("outcome {outcome} on qubit {q} has probability 0")));
        }
        let bit = 1usize << self.position(q)?;
        let scale = 1.0 / p.sqrt();
        for (i, a) in self.amps.iter_mut().enumerate() {
            if ((i & bit != 0) as u8) == outcome {
                *a *= scale;
            } else {
                *a = C0;
            }
        }
        Ok(MeasurementRecord {
            qubit: q,
            outcome,
            probability_of_outcome: p,
            forced: forced.is_some(),
        })
    }

    /// Remove a disentangled qubit from the state.
    pub fn recycle(&mut self, q: QubitId) -> Result<()> {
        let p = self.position(q)?;
        let p1 = self.prob_one(q)?;
        let p0 = 1.0 - p1;
        let keep = if p1 > p0 { 1 } else { 0 };
        let off = p1.min(p0);
        if off >= RECYCLE_TOL {
            return Err(Error::Recycle(format!(
                "qubit {q} is not disentangled (mass {off:e} off its dominant value)"
            )));
        }
        let bit = 1usize << p;
        let low = bit - 1;
        let mut out = Vec::with_capacity(self.amps.len() / 2);
        for i in 0..self.amps.len() / 2 {
            let j = (i & low) | ((i & !low) << 1) | (keep * bit);
            out.push(self.amps[j]);
        }
        let n: f64 = out.iter().map(|a| a.norm_sqr()).sum();
        let s = 1.0 / n.sqrt();
        for a in &mut out {
            *a *= s;
        }
        self.amps = out;
        self.live.remove(p);
        Ok(())
    }

    /// |⟨self|other⟩| over the two states' positional qubit orders.
    pub fn fidelity(&self, other: &QuantumState) -> Result<f64> {
        fidelity(self, other)
    }

    /// Copy of the state with qubits reordered so that position j holds `order[j]`.
    pub fn reordered(&self, order: &[QubitId]) -> Result<QuantumState> {
        if order.len() != self.live.len() {
            return Err(Error::Usage("reorder must list every live qubit".into()));
        }
        let pos: Vec<usize> = order.iter().map(|&q| self.position(q)).collect::<Result<_>>()?;
        let mut out = vec![C0; self.amps.len()];
        for (i, &a) in self.amps.iter().enumerate() {
            out[Self::sub_value(&pos, i)] = a;
        }
        Ok(QuantumState {
            live: order.to_vec(),
            amps: out,
            max_width: self.max_width,
            next_id: self.next_id,
            global_norm_tolerance: self.global_norm_tolerance,
        })
    }

    /// Probabilities of each basis state.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn dump(&self) -> StateDump {
        StateDump {
            n: self.width(),
            amplitudes: self.amps.iter().map(|a| [a.re, a.im]).collect(),
        }
    }

    pub fn from_dump(d: &StateDump) -> Result<Self> {
        if d.amplitudes.len() != 1 << d.n {
            return Err(Error::Validation("amplitude count does not match n".into()));
        }
        Self::from_amplitudes(d.amplitudes.iter().map(|z| Complex64::new(z[0], z[1])).collect())
    }

    /// Amplitudes with the global phase removed (largest entry made real positive).
    pub fn phase_normalized(&self) -> Vec<Complex64> {
        let best = self
            .amps
            .iter()
            .copied()
            .fold(C0, |acc, a| if a.norm_sqr() > acc.norm_sqr() + 1e-15 { a } else { acc });
        if best == C0 {
            return self.amps.clone();
        }
        let ph = best.conj() / best.norm();
        self.amps.iter().map(|a| a * ph).collect()
    }
}

/// |⟨a|b⟩|.
pub fn fidelity(a: &QuantumState, b: &QuantumState) -> Result<f64> {
    if a.width() != b.width() {
        return Err(Error::Usage(format!("width mismatch: {} vs {}", a.width(), b.width())));
    }
    let s: Complex64 = a.amps.iter().zip(&b.amps).map(|(x, y)| x.conj() * y).sum();
    Ok(s.norm().min(1.0))
}

/// Haar-random unitary of dimension `dim`: complex Gaussian matrix,
/// Gram–Schmidt on the columns, column phases fixed by the positive diagonal of R.
pub fn sample_haar_unitary(rng: &mut RandomSource, dim: usize) -> Matrix {
    let mut cols: Vec<Vec<Complex64>> = (0..dim)
        .map(|_| {
            (0..dim)
                .map(|_| {
                    let re: f64 = StandardNormal.sample(rng);
                    let im: f64 = StandardNormal.sample(rng);
                    Complex64::new(re, im) * FRAC_1_SQRT_2
                })
                .collect()
        })
        .collect();
    for j in 0..dim {
        for k in 0..j {
            let proj: Complex64 = (0..dim).map(|i| cols[k][i].conj() * cols[j][i]).sum();
            for i in 0..dim {
                let v = cols[k][i];
                cols[j][i] -= proj * v;
            }
        }
        let n: f64 = cols[j].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for z in &mut cols[j] {
            *z /= n;
        }
    }
    let mut data = vec![C0; dim * dim];
    for r in 0..dim {
        for c in 0..dim {
            data[r * dim + c] = cols[c][r];
        }
    }
    Matrix::new(dim, data)
}

/// Haar-random error gate on `targets` (one or two qubits; two qubits draw a
/// joint 4-dimensional unitary).
pub fn sample_haar_error(rng: &mut RandomSource, targets: &[QubitId]) -> Result<GateOp> {
    let arity = targets.len();
    if !(1..=2).contains(&arity) {
        return Err(Error::Usage("Haar errors act on one or two qubits".into()));
    }
    let m = sample_haar_unitary(rng, 1 << arity);
    Ok(GateOp::new(GateKind::Custom(m), targets.to_vec(), vec![]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn close(a: Complex64, re: f64, im: f64) -> bool {
        (a - Complex64::new(re, im)).norm() < 1e-12
    }

    #[test]
    fn alloc_zero_state() {
        let mut s = QuantumState::new();
        s.alloc(3).unwrap();
        assert_eq!(s.amplitudes().len(), 8);
        assert!(close(s.amplitudes()[0], 1.0, 0.0));
        assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn alloc_tensor_with_zero() {
        let mut s = QuantumState::new();
        let q = s.alloc(1).unwrap();
        s.apply(&GateOp::single(GateKind::H, q[0])).unwrap();
        s.alloc(1).unwrap();
        let a = s.amplitudes();
        assert!(close(a[0], FRAC_1_SQRT_2, 0.0) && close(a[1], FRAC_1_SQRT_2, 0.0));
        assert!(close(a[2], 0.0, 0.0) && close(a[3], 0.0, 0.0));
    }

    #[test]
    fn alloc_capacity() {
        let mut s = QuantumState::with_max_width(4);
        s.alloc(4).unwrap();
        assert!(matches!(s.alloc(1), Err(Error::Capacity(_))));
    }

    #[test]
    fn epr_by_cnot() {
        let mut s = QuantumState::new();
        let q = s.alloc(2).unwrap();
        s.apply(&GateOp::single(GateKind::H, q[0])).unwrap();
        s.apply(&GateOp::controlled(GateKind::CNOT, q[0], q[1])).unwrap();
        let a = s.amplitudes();
        assert!(close(a[0], FRAC_1_SQRT_2, 0.0) && close(a[3], FRAC_1_SQRT_2, 0.0));
    }

    #[test]
    fn rz_twice_is_s_up_to_phase() {
        let mut a = QuantumState::basis(1, 1).unwrap();
        let mut b = a.clone();
        a.apply(&GateOp::single(GateKind::RZ(PI / 4.0), 0)).unwrap();
        a.apply(&GateOp::single(GateKind::RZ(PI / 4.0), 0)).unwrap();
        b.apply(&GateOp::single(GateKind::S, 0)).unwrap();
        assert!((fidelity(&a, &b).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn forced_measure_epr() {
        let mut s = QuantumState::from_amplitudes(vec![
            Complex64::new(FRAC_1_SQRT_2, 0.0),
            C0,
            C0,
            Complex64::new(FRAC_1_SQRT_2, 0.0),
        ])
        .unwrap();
        let mut rng = RandomSource::new(0);
        let r = s.measure(0, &mut rng, Some(0)).unwrap();
        assert!((r.probability_of_outcome - 0.5).abs() < 1e-12);
        assert!(close(s.amplitudes()[0], 1.0, 0.0));
        assert!(matches!(s.measure(1, &mut rng, Some(1)), Err(Error::Branch(_))));
    }

    #[test]
    fn measure_plus_frequency() {
        let mut rng = RandomSource::new(11);
        let mut ones = 0;
        for _ in 0..10_000 {
            let mut s = QuantumState::new();
            s.alloc(1).unwrap();
            s.apply(&GateOp::single(GateKind::H, 0)).unwrap();
            ones += s.measure(0, &mut rng, None).unwrap().outcome as usize;
        }
        let f = ones as f64 / 10_000.0;
        assert!((f - 0.5).abs() < 0.02, "{f}");
    }

    #[test]
    fn recycle_rules() {
        let mut s = QuantumState::new();
        let q = s.alloc(2).unwrap();
        s.apply(&GateOp::single(GateKind::H, q[0])).unwrap();
        s.apply(&GateOp::controlled(GateKind::CNOT, q[0], q[1])).unwrap();
        assert!(matches!(s.recycle(q[1]), Err(Error::Recycle(_))));
        let mut rng = RandomSource::new(3);
        s.measure(q[1], &mut rng, Some(1)).unwrap();
        s.recycle(q[1]).unwrap();
        assert_eq!(s.width(), 1);
        let want = QuantumState::basis(1, 1).unwrap();
        assert!((fidelity(&s, &want).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn fidelity_examples() {
        let z = QuantumState::basis(1, 0).unwrap();
        let o = QuantumState::basis(1, 1).unwrap();
        let mut p = z.clone();
        p.apply(&GateOp::single(GateKind::H, 0)).unwrap();
        assert!((fidelity(&z, &z).unwrap() - 1.0).abs() < 1e-12);
        assert!(fidelity(&z, &o).unwrap() < 1e-12);
        assert!((fidelity(&p, &z).unwrap() - FRAC_1_SQRT_2).abs() < 1e-12);
        let two = QuantumState::basis(2, 0).unwrap();
        assert!(matches!(fidelity(&z, &two), Err(Error::Usage(_))));
    }

    #[test]
    fn haar_unitary_and_deterministic() {
        let mut r1 = RandomSource::with_path(5, vec![9]);
        let mut r2 = RandomSource::with_path(5, vec![9]);
        for dim in [2, 4] {
            let a = sample_haar_unitary(&mut r1, dim);
            let b = sample_haar_unitary(&mut r2, dim);
            assert!(a.unitarity_error() < 1e-10);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn haar_trace_moment() {
        let mut rng = RandomSource::new(42);
        let draws = 10_000;
        let mean: f64 = (0..draws)
            .map(|_| sample_haar_unitary(&mut rng, 2).trace().norm_sqr() / 2.0)
            .sum::<f64>()
            / draws as f64;
        assert!((mean - 0.5).abs() < 0.05, "{mean}");
    }

    #[test]
    fn dead_qubit_is_usage_error() {
        let mut s = QuantumState::basis(1, 0).unwrap();
        assert!(matches!(s.apply(&GateOp::single(GateKind::X, 5)), Err(Error::Usage(_))));
    }

    #[test]
    fn non_unitary_custom_rejected() {
        let mut s = QuantumState::basis(1, 0).unwrap();
        let m = Matrix::new(2, vec![C1, C1, C0, C1]);
        let op = GateOp::new(GateKind::Custom(m), vec![0], vec![]);
        assert!(matches!(s.apply(&op), Err(Error::Validation(_))));
    }

    #[test]
    fn permutation_and_diagonal() {
        let mut s = QuantumState::basis(2, 1).unwrap();
        s.apply_permutation(&[0, 1], &[2, 3, 0, 1]).unwrap();
        assert!(close(s.amplitudes()[3], 1.0, 0.0));
        s.apply_diagonal(&[1], |v| if v == 1 { -C1 } else { C1 }).unwrap();
        assert!(close(s.amplitudes()[3], -1.0, 0.0));
    }
}
