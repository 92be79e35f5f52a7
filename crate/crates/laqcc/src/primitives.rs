//! Reusable LAQCC building blocks in two modes: `Ideal` applies the logical
//! unitary directly, `Expanded` runs the measurement-assisted construction
//! with ancillas that are recycled afterwards.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::circuit::{self, Program};
use crate::rng::{enumerate_branches, RandomSource};
use crate::sim::{GateKind, GateOp, QuantumState, QubitId};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Ideal,
    Expanded,
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ideal" => Ok(Mode::Ideal),
            "expanded" => Ok(Mode::Expanded),
            _ => Err(Error::Validation(format!("unknown mode {s:?}"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Ideal => "ideal",
            Mode::Expanded => "expanded",
        })
    }
}

/// |μ_φ^c⟩ = ((1+e^{iφc})/2)|0⟩ + ((1−e^{iφc})/2)|1⟩.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MuState {
    pub phi: f64,
    pub c: u64,
}

impl MuState {
    pub fn amplitudes(&self) -> [Complex64; 2] {
        let e = Complex64::from_polar(1.0, self.phi * self.c as f64);
        [(Complex64::new(1.0, 0.0) + e) / 2.0, (Complex64::new(1.0, 0.0) - e) / 2.0]
    }
}

pub(crate) fn h(q: QubitId) -> GateOp {
    GateOp::single(GateKind::H, q)
}

pub(crate) fn x(q: QubitId) -> GateOp {
    GateOp::single(GateKind::X, q)
}

pub(crate) fn cnot(c: QubitId, t: QubitId) -> GateOp {
    GateOp::controlled(GateKind::CNOT, c, t)
}

/// X on `t` controlled on all of `cs`.
pub(crate) fn mcx(cs: &[QubitId], t: QubitId) -> GateOp {
    GateOp::new(GateKind::X, vec![t], cs.to_vec())
}

/// Controlled phase e^{iθ} on |11⟩, up to the global phase e^{−iθ/4}.
pub(crate) fn cphase(c: QubitId, t: QubitId, theta: f64) -> [GateOp; 2] {
    [
        GateOp::controlled(GateKind::CRZ(theta), c, t),
        GateOp::single(GateKind::RZ(theta / 2.0), c),
    ]
}

/// Incremental program builder.
///
/// Labels handed out by [`Builder::fresh`] start at the base label and grow
/// monotonically. When the base equals the state's `peek_next_id()`, every
/// label coincides with the engine id it gets bound to, so the stages of a
/// builder can be run as independent programs.
#[derive(Clone, Debug)]
pub struct Builder {
    current: Program,
    stages: Vec<Program>,
    next_label: usize,
    next_name: usize,
}

impl Builder {
    pub fn new(base_label: usize) -> Self {
        Builder {
            current: Program::new(),
            stages: Vec::new(),
            next_label: base_label,
            next_name: 0,
        }
    }

    /// Builder whose labels line up with the ids `state` will allocate.
    pub fn for_state(state: &QuantumState) -> Self {
        Self::new(state.peek_next_id())
    }

    pub fn fresh(&mut self, count: usize) -> Vec<usize> {
        if count == 0 {
            return vec![];
        }
        let ls: Vec<usize> = (self.next_label..self.next_label + count).collect();
        self.next_label += count;
        self.current.alloc(ls.clone());
        ls
    }

    fn names(&mut self, prefix: &str, count: usize) -> Vec<String> {
        let v = (0..count).map(|i| format!("{prefix}{}", self.next_name + i)).collect();
        self.next_name += count;
        v
    }

    pub fn quantum(&mut self, gates: Vec<GateOp>) {
        self.current.quantum(gates);
    }

    pub fn measure(&mut self, qubits: &[usize]) -> Vec<String> {
        let names = self.names("m", qubits.len());
        if !qubits.is_empty() {
            self.current.measure(qubits.to_vec(), names.clone());
        }
        names
    }

    pub fn classical(&mut self, func: &str, inputs: Vec<String>, outputs: usize) -> Vec<String> {
        let names = self.names("c", outputs);
        self.current.classical(func, inputs, names.clone());
        names
    }

    pub fn recycle(&mut self, qubits: &[usize]) {
        if !qubits.is_empty() {
            self.current.recycle(qubits.to_vec());
        }
    }

    /// Close the current stage.
    pub fn cut(&mut self) {
        if !self.current.layers.is_empty() {
            self.stages.push(std::mem::take(&mut self.current));
        }
    }

    pub fn into_stages(mut self) -> Vec<Program> {
        self.cut();
        self.stages
    }

    pub fn into_program(self) -> Program {
        let mut p = Program::new();
        for s in self.into_stages() {
            p.extend(s);
        }
        p.declared_alternations = p.cost().alternations;
        p
    }
}

/// Allocate `n` fresh qubits and prepare (|0ⁿ⟩+|1ⁿ⟩)/√2 on them with one
/// measurement round. Returns the system labels.
///
/// Allocates 2n−1 labels interleaved (system, ancilla, system, …). Hadamards
/// on the system qubits, each ancilla collects the parity of its two
/// neighbours, the ancillas are measured, and a prefix parity of the outcomes
/// decides the X corrections.
pub fn ghz_fresh(b: &mut Builder, n: usize) -> Vec<usize> {
    if n == 0 {
        return vec![];
    }
    let all = b.fresh(2 * n - 1);
    let sys: Vec<usize> = all.iter().copied().step_by(2).collect();
    let anc: Vec<usize> = all.iter().copied().skip(1).step_by(2).collect();
    let mut gates: Vec<GateOp> = sys.iter().map(|&s| h(s)).collect();
    for i in 0..anc.len() {
        gates.push(cnot(sys[i], anc[i]));
    }
    for i in 0..anc.len() {
        gates.push(cnot(sys[i + 1], anc[i]));
    }
    b.quantum(gates);
    if !anc.is_empty() {
        let d = b.measure(&anc);
        let c = b.classical("prefix-parity", d, anc.len());
        b.quantum((0..anc.len()).map(|i| x(sys[i + 1]).when(c[i].clone())).collect());
        b.recycle(&anc);
    }
    sys
}

/// Expanded fanout: `targets ⊕= control` through a GHZ resource.
pub fn fanout_into(b: &mut Builder, control: usize, targets: &[usize]) {
    if targets.is_empty() {
        return;
    }
    let m = targets.len();
    let g = ghz_fresh(b, m + 1);
    b.quantum(vec![cnot(control, g[0])]);
    let d = b.measure(&g[..1]);
    let e = b.classical("parity", d, 1).remove(0);
    let mut gates = Vec::new();
    for i in 1..=m {
        gates.push(x(g[i]).when(e.clone()));
        gates.push(cnot(g[i], targets[i - 1]));
        gates.push(h(g[i]));
    }
    b.quantum(gates);
    let r = b.measure(&g[1..]);
    let z = b.classical("parity", r, 1).remove(0);
    b.quantum(vec![GateOp::single(GateKind::Z, control).when(z)]);
    b.recycle(&g);
}

/// Expanded parity gate: Hadamard-conjugated fanout from the target.
pub fn parity_into(b: &mut Builder, sources: &[usize], target: usize) {
    if sources.is_empty() {
        return;
    }
    let mut all = sources.to_vec();
    all.push(target);
    b.quantum(all.iter().map(|&q| h(q)).collect());
    fanout_into(b, target, sources);
    b.quantum(all.iter().map(|&q| h(q)).collect());
}

/// Largest input count accepted by the expanded OR construction.
pub const EXPANDED_OR_MAX_INPUTS: usize = 4;

/// Expanded exact OR: `target ⊕= OR(inputs)`.
///
/// OR(x) = 2^{1−t} Σ_{a≠0} ⟨a,x⟩ mod 2, so a GHZ resource of 2^t−1 qubits picks
/// up the phase e^{iπ·OR(x)} on its |1…1⟩ branch when qubit a receives the
/// phase π/2^{t−1} conditioned on the parity ⟨a,x⟩. The phase is turned into a
/// bit, copied to the target, and removed again.
pub fn exact_or_into(b: &mut Builder, inputs: &[usize], target: usize) -> Result<()> {
    let t = inputs.len();
    if t == 0 {
        return Ok(());
    }
    if t > EXPANDED_OR_MAX_INPUTS {
        return Err(Error::Capacity(format!(
            "expanded OR supports at most {EXPANDED_OR_MAX_INPUTS} inputs, got {t}"
        )));
    }
    let m = (1usize << t) - 1;
    let theta = PI / (1u64 << (t - 1)) as f64;
    let subset = |a: usize| -> Vec<usize> { (0..t).filter(|j| a >> j & 1 == 1).map(|j| inputs[j]).collect() };
    let g = ghz_fresh(b, m);
    b.cut();
    let phase_round = |b: &mut Builder, angle: f64, on: &dyn Fn(usize) -> usize| {
        for a in 1..=m {
            let p = b.fresh(1)[0];
            let src = subset(a);
            parity_into(b, &src, p);
            b.cut();
            b.quantum(cphase(p, on(a), angle).to_vec());
            parity_into(b, &src, p);
            b.recycle(&[p]);
            b.cut();
        }
    };
    phase_round(b, theta, &|a| g[a - 1]);
    // |0…0⟩ + (−1)^{OR}|1…1⟩ → (|0⟩ + (−1)^{OR}|1⟩) on g0 via X-basis measurements
    let rest = &g[1..];
    b.quantum(rest.iter().map(|&q| h(q)).collect());
    let r = b.measure(rest);
    let mut gates = Vec::new();
    if !r.is_empty() {
        let z = b.classical("parity", r, 1).remove(0);
        gates.push(GateOp::single(GateKind::Z, g[0]).when(z));
    }
    gates.extend([h(g[0]), cnot(g[0], target), h(g[0])]);
    b.quantum(gates);
    b.recycle(rest);
    b.cut();
    phase_round(b, -theta, &|_| g[0]);
    b.quantum(vec![h(g[0])]);
    b.recycle(&g[..1]);
    b.cut();
    Ok(())
}

/// Expanded Equal_i: `target ⊕= [register = i]` through AND = ¬OR(¬·).
pub fn equal_into(b: &mut Builder, register: &[usize], i: u64, target: usize) -> Result<()> {
    check_index(register.len(), i)?;
    let flips: Vec<GateOp> = (0..register.len()).filter(|j| i >> j & 1 == 1).map(|j| x(register[j])).collect();
    b.quantum(flips.clone());
    exact_or_into(b, register, target)?;
    let mut tail = vec![x(target)];
    tail.extend(flips);
    b.quantum(tail);
    b.cut();
    Ok(())
}

fn check_index(bits: usize, i: u64) -> Result<()> {
    if bits < 64 && i >> bits != 0 {
        return Err(Error::Validation(format!("index {i} does not fit in {bits} bits")));
    }
    Ok(())
}

/// Number of OR-reduction outputs for n inputs: ⌈log₂(n+1)⌉.
pub fn or_reduction_width(n: usize) -> usize {
    (usize::BITS - n.leading_zeros()) as usize
}

/// Expanded OR-reduction; returns the output labels.
pub fn or_reduction_into(b: &mut Builder, inputs: &[usize]) -> Vec<usize> {
    let n = inputs.len();
    let t = or_reduction_width(n);
    let mut outs = Vec::with_capacity(t);
    for k in 1..=t {
        let phi = 2.0 * PI / (1u64 << k) as f64;
        let o = b.fresh(1)[0];
        b.quantum(vec![h(o)]);
        let copies = b.fresh(n);
        fanout_into(b, o, &copies);
        b.cut();
        let mut gates = Vec::new();
        for i in 0..n {
            gates.extend(cphase(inputs[i], copies[i], phi));
        }
        b.quantum(gates);
        fanout_into(b, o, &copies);
        b.recycle(&copies);
        b.quantum(vec![h(o)]);
        b.cut();
        outs.push(o);
    }
    outs
}

type StageOp<'a> = dyn Fn(&mut QuantumState, &mut RandomSource) -> Result<()> + 'a;
type StageBuild<'a> = dyn Fn(&QuantumState) -> Result<Vec<Program>> + 'a;

/// One stage of a staged run.
pub enum Stage<'a> {
    Program(Program),
    /// Programs built against the state reached so far (labels from its next id).
    Build(Box<StageBuild<'a>>),
    /// Direct state-level operation.
    Op(Box<StageOp<'a>>),
}

impl<'a> Stage<'a> {
    pub fn op(f: impl Fn(&mut QuantumState, &mut RandomSource) -> Result<()> + 'a) -> Self {
        Stage::Op(Box::new(f))
    }

    pub fn build(f: impl Fn(&mut Builder) -> Result<()> + 'a) -> Self {
        Stage::Build(Box::new(move |s| {
            let mut b = Builder::for_state(s);
            f(&mut b)?;
            Ok(b.into_stages())
        }))
    }
}

/// Summary of an exhaustive staged run.
#[derive(Clone, Debug)]
pub struct StagedOutcome {
    pub state: QuantumState,
    /// Branches enumerated, summed over stages.
    pub branches: usize,
    /// Branch count of the composed run: product over stages.
    pub composed_branches: f64,
    /// Smallest fidelity between a stage's branch output and its first branch.
    pub worst_agreement: f64,
}

/// Run stages, sampling measurement outcomes.
pub fn run_stages(stages: &[Stage], mut state: QuantumState, rng: &mut RandomSource) -> Result<QuantumState> {
    for s in stages {
        match s {
            Stage::Program(p) => state = circuit::run(p, state, rng)?.0,
            Stage::Build(f) => {
                for p in f(&state)? {
                    state = circuit::run(&p, state, rng)?.0;
                }
            }
            Stage::Op(f) => f(&mut state, rng)?,
        }
    }
    Ok(state)
}

/// Enumerate every measurement branch of every stage.
///
/// Each stage is run on all its branches from the common input; the outputs
/// must agree up to global phase (the stage is deterministic), and the first
/// branch feeds the next stage. Composition then covers every branch of the
/// full pipeline without enumerating their product.
pub fn run_stages_all_branches(stages: &[Stage], mut state: QuantumState, max_per_stage: usize) -> Result<StagedOutcome> {
    let mut acc = StagedOutcome {
        state: QuantumState::new(),
        branches: 0,
        composed_branches: 1.0,
        worst_agreement: 1.0,
    };
    for s in stages {
        match s {
            Stage::Program(p) => state = program_branches(p, state, max_per_stage, &mut acc)?,
            Stage::Build(f) => {
                for p in f(&state)? {
                    state = program_branches(&p, state, max_per_stage, &mut acc)?;
                }
            }
            Stage::Op(f) => {
                let outs = enumerate_branches(
                    |rng| {
                        let mut st = state.clone();
                        f(&mut st, rng)?;
                        Ok(st)
                    },
                    max_per_stage,
                )?
                .into_iter()
                .map(|(s, _)| s)
                .collect();
                state = agree(outs, &mut acc)?;
            }
        }
    }
    acc.state = state;
    Ok(acc)
}

fn program_branches(p: &Program, state: QuantumState, max: usize, acc: &mut StagedOutcome) -> Result<QuantumState> {
    let outs = circuit::run_branches(p, state, max)?.into_iter().map(|b| b.state).collect();
    agree(outs, acc)
}

fn agree(outs: Vec<QuantumState>, acc: &mut StagedOutcome) -> Result<QuantumState> {
    acc.branches += outs.len();
    acc.composed_branches *= outs.len() as f64;
    let first = &outs[0];
    for o in &outs[1..] {
        if o.live_qubits() != first.live_qubits() {
            return Err(Error::Branch("stage branches end on different live qubits".into()));
        }
        acc.worst_agreement = acc.worst_agreement.min(first.fidelity(o)?);
    }
    Ok(outs.into_iter().next().expect("at least one branch"))
}

fn stages_of(b: Builder) -> Vec<Stage<'static>> {
    b.into_stages().into_iter().map(Stage::Program).collect()
}

/// Expanded GHZ program on an empty state: 2n−1 qubits, system qubits at even labels.
pub fn ghz_laqcc_program(n: usize) -> Program {
    let mut b = Builder::new(0);
    ghz_fresh(&mut b, n);
    b.into_program()
}

/// (|0ⁿ⟩+|1ⁿ⟩)/√2 on n fresh qubits.
pub fn ghz_laqcc(n: usize, mode: Mode, rng: &mut RandomSource) -> Result<QuantumState> {
    if n == 0 {
        return Err(Error::Validation("GHZ needs n ≥ 1".into()));
    }
    let mut s = QuantumState::new();
    match mode {
        Mode::Ideal => {
            let q = s.alloc(n)?;
            s.apply(&h(q[0]))?;
            for &t in &q[1..] {
                s.apply(&cnot(q[0], t))?;
            }
            Ok(s)
        }
        Mode::Expanded => Ok(circuit::run(&ghz_laqcc_program(n), s, rng)?.0),
    }
}

/// Expanded fanout program for a control followed by `targets` qubits
/// (labels 0..=targets).
pub fn fanout_program(targets: usize) -> Program {
    let mut b = Builder::new(targets + 1);
    let t: Vec<usize> = (1..=targets).collect();
    fanout_into(&mut b, 0, &t);
    b.into_program()
}

fn check_disjoint(control: QubitId, targets: &[QubitId]) -> Result<()> {
    if targets.contains(&control) {
        return Err(Error::Validation(format!("control {control} is also a target")));
    }
    for (i, t) in targets.iter().enumerate() {
        if targets[i + 1..].contains(t) {
            return Err(Error::Validation(format!("target {t} repeated")));
        }
    }
    Ok(())
}

pub(crate) fn run_builder(state: &mut QuantumState, b: Builder, rng: &mut RandomSource) -> Result<()> {
    let s = std::mem::take(state);
    *state = run_stages(&stages_of(b), s, rng)?;
    Ok(())
}

pub fn fanout(state: &mut QuantumState, control: QubitId, targets: &[QubitId], mode: Mode, rng: &mut RandomSource) -> Result<()> {
    check_disjoint(control, targets)?;
    match mode {
        Mode::Ideal => {
            for &t in targets {
                state.apply(&cnot(control, t))?;
            }
            Ok(())
        }
        Mode::Expanded => {
            let mut b = Builder::for_state(state);
            fanout_into(&mut b, control, targets);
            run_builder(state, b, rng)
        }
    }
}

pub fn parity_gate(state: &mut QuantumState, sources: &[QubitId], target: QubitId, mode: Mode, rng: &mut RandomSource) -> Result<()> {
    check_disjoint(target, sources)?;
    match mode {
        Mode::Ideal => {
            for &s in sources {
                state.apply(&cnot(s, target))?;
            }
            Ok(())
        }
        Mode::Expanded => {
            let mut b = Builder::for_state(state);
            parity_into(&mut b, sources, target);
            run_builder(state, b, rng)
        }
    }
}

pub fn equal_gate(
    state: &mut QuantumState,
    register: &[QubitId],
    i: u64,
    target: QubitId,
    mode: Mode,
    rng: &mut RandomSource,
) -> Result<()> {
    check_index(register.len(), i)?;
    check_disjoint(target, register)?;
    match mode {
        Mode::Ideal => {
            let flips: Vec<GateOp> = (0..register.len()).filter(|j| i >> j & 1 == 0).map(|j| x(register[j])).collect();
            for g in &flips {
                state.apply(g)?;
            }
            state.apply(&mcx(register, target))?;
            for g in &flips {
                state.apply(g)?;
            }
            Ok(())
        }
        Mode::Expanded => {
            let mut b = Builder::for_state(state);
            equal_into(&mut b, register, i, target)?;
            run_builder(state, b, rng)
        }
    }
}

pub fn exact_or(state: &mut QuantumState, inputs: &[QubitId], target: QubitId, mode: Mode, rng: &mut RandomSource) -> Result<()> {
    check_disjoint(target, inputs)?;
    match mode {
        Mode::Ideal => {
            if inputs.is_empty() {
                return Ok(());
            }
            for &q in inputs {
                state.apply(&x(q))?;
            }
            state.apply(&mcx(inputs, target))?;
            state.apply(&x(target))?;
            for &q in inputs {
                state.apply(&x(q))?;
            }
            Ok(())
        }
        Mode::Expanded => {
            let mut b = Builder::for_state(state);
            exact_or_into(&mut b, inputs, target)?;
            run_builder(state, b, rng)
        }
    }
}

/// OR-reduction; returns the ⌈log₂(n+1)⌉ new output qubits, output k holding
/// |μ_{2π/2^k}^{|x|}⟩ for basis input x.
pub fn or_reduction(state: &mut QuantumState, inputs: &[QubitId], mode: Mode, rng: &mut RandomSource) -> Result<Vec<QubitId>> {
    if inputs.is_empty() {
        return Err(Error::Validation("OR-reduction needs at least one input".into()));
    }
    match mode {
        Mode::Ideal => {
            let t = or_reduction_width(inputs.len());
            let mut outs = Vec::with_capacity(t);
            for k in 1..=t {
                let phi = 2.0 * PI / (1u64 << k) as f64;
                let o = state.alloc(1)?[0];
                state.apply(&h(o))?;
                let mut qs = inputs.to_vec();
                qs.push(o);
                let n = inputs.len();
                state.apply_diagonal(&qs, |v| {
                    if v >> n & 1 == 1 {
                        Complex64::from_polar(1.0, phi * (v & ((1 << n) - 1)).count_ones() as f64)
                    } else {
                        Complex64::new(1.0, 0.0)
                    }
                })?;
                state.apply(&h(o))?;
                outs.push(o);
            }
            Ok(outs)
        }
        Mode::Expanded => {
            let mut b = Builder::for_state(state);
            let outs = or_reduction_into(&mut b, inputs);
            run_builder(state, b, rng)?;
            Ok(outs)
        }
    }
}

/// Parameters of exact amplitude amplification.
#[derive(Clone, Debug, PartialEq)]
pub struct AmplifyParams {
    pub beta: f64,
    pub iterations: usize,
    pub phi: f64,
}

/// β = arcsin √f, J = max(0, ⌈(π/2 − β)/(2β)⌉), J+1 iterations with phase
/// φ = 2 arcsin(sin(π/(4J+6)) / sin β). A fraction of one needs no iteration.
pub fn amplify_params(fraction: &BigRational) -> Result<AmplifyParams> {
    if *fraction <= BigRational::zero() || *fraction > BigRational::one() {
        return Err(Error::Validation(format!("good fraction {fraction} is not in (0, 1]")));
    }
    let f = fraction
        .to_f64()
        .ok_or_else(|| Error::Validation("good fraction is not representable".into()))?;
    let beta = f.sqrt().asin();
    if fraction.is_one() {
        return Ok(AmplifyParams {
            beta,
            iterations: 0,
            phi: 0.0,
        });
    }
    let j = ((PI / 2.0 - beta) / (2.0 * beta)).ceil().max(0.0) as usize;
    let ratio = ((PI / (4 * j + 6) as f64).sin() / beta.sin()).min(1.0);
    Ok(AmplifyParams {
        beta,
        iterations: j + 1,
        phi: 2.0 * ratio.asin(),
    })
}

/// Exact rational good fraction `good / total`.
pub fn fraction(good: u64, total: u64) -> BigRational {
    BigRational::new(BigInt::from(good), BigInt::from(total))
}

type PrepareFn<'a> = dyn Fn(&mut QuantumState, bool, &mut RandomSource) -> Result<()> + 'a;
type FlagFn<'a> = dyn Fn(&mut QuantumState, QubitId) -> Result<()> + 'a;

/// An amplification problem: a preparation A on `register` and a flag that
/// XORs goodness of the register value into a given qubit.
pub struct Amplifier<'a> {
    pub register: Vec<QubitId>,
    /// Applies A, or A† when the flag is true.
    pub prepare: Box<PrepareFn<'a>>,
    pub flag: Box<FlagFn<'a>>,
}

impl<'a> Amplifier<'a> {
    fn reflect_good(&self, state: &mut QuantumState, anc: QubitId, phi: f64) -> Result<()> {
        (self.flag)(state, anc)?;
        let ph = Complex64::from_polar(1.0, phi);
        state.apply_diagonal(&[anc], |v| if v == 1 { ph } else { Complex64::new(1.0, 0.0) })?;
        (self.flag)(state, anc)
    }

    fn reflect_zero(&self, state: &mut QuantumState, phi: f64) -> Result<()> {
        let ph = Complex64::from_polar(1.0, phi);
        state.apply_diagonal(&self.register, |v| if v == 0 { ph } else { Complex64::new(1.0, 0.0) })
    }

    fn iterate(&self, state: &mut QuantumState, phi: f64, rng: &mut RandomSource) -> Result<()> {
        let anc = state.alloc(1)?[0];
        self.reflect_good(state, anc, phi)?;
        (self.prepare)(state, true, rng)?;
        self.reflect_zero(state, phi)?;
        (self.prepare)(state, false, rng)?;
        state.recycle(anc)
    }

    fn iterate_adjoint(&self, state: &mut QuantumState, phi: f64, rng: &mut RandomSource) -> Result<()> {
        let anc = state.alloc(1)?[0];
        (self.prepare)(state, true, rng)?;
        self.reflect_zero(state, -phi)?;
        (self.prepare)(state, false, rng)?;
        self.reflect_good(state, anc, -phi)?;
        state.recycle(anc)
    }
}

/// Apply A to the zeroed register and amplify the good part to mass one.
pub fn exact_amplify(
    state: &mut QuantumState,
    amp: &Amplifier,
    good_fraction: &BigRational,
    rng: &mut RandomSource,
) -> Result<AmplifyParams> {
    let params = amplify_params(good_fraction)?;
    (amp.prepare)(state, false, rng)?;
    for _ in 0..params.iterations {
        amp.iterate(state, params.phi, rng)?;
    }
    Ok(params)
}

/// Inverse of [`exact_amplify`]: returns the register to |0…0⟩.
pub fn exact_amplify_adjoint(
    state: &mut QuantumState,
    amp: &Amplifier,
    good_fraction: &BigRational,
    rng: &mut RandomSource,
) -> Result<()> {
    let params = amplify_params(good_fraction)?;
    for _ in 0..params.iterations {
        amp.iterate_adjoint(state, params.phi, rng)?;
    }
    (amp.prepare)(state, true, rng)
}

/// Apply a permutation given as a function on register values.
pub(crate) fn permute(state: &mut QuantumState, qs: &[QubitId], f: impl Fn(usize) -> usize) -> Result<()> {
    let table: Vec<usize> = (0..1usize << qs.len()).map(f).collect();
    state.apply_permutation(qs, &table)
}

/// Flag `value < bound` on `register` into `flag`.
pub(crate) fn flag_less_than(state: &mut QuantumState, register: &[QubitId], bound: usize, flag: QubitId) -> Result<()> {
    let mut qs = register.to_vec();
    qs.push(flag);
    let n = register.len();
    permute(state, &qs, |v| if v & ((1 << n) - 1) < bound { v ^ (1 << n) } else { v })
}
