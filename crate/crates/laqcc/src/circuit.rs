//! LAQCC program representation: quantum layers, measurement layers and
//! classical layers with feedforward, plus cost accounting.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::rng::RandomSource;
use crate::sim::{GateOp, MeasurementRecord, QuantumState, QubitId, Registers};
use crate::{Error, Result};

/// One layer of a program.
///
/// Qubit numbers in a program are labels. Labels introduced by an `alloc`
/// layer are bound to fresh engine qubits when the layer runs; every other
/// label refers to the engine qubit with that id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Layer {
    Quantum {
        gates: Vec<GateOp>,
    },
    Measure {
        qubits: Vec<usize>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        out: Vec<String>,
    },
    Classical {
        #[serde(rename = "fn")]
        func: String,
        #[serde(rename = "in")]
        inputs: Vec<String>,
        out: Vec<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        table: Option<Vec<u64>>,
    },
    Alloc {
        qubits: Vec<usize>,
    },
    Recycle {
        qubits: Vec<usize>,
    },
}

/// An LAQCC program.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Program {
    pub layers: Vec<Layer>,
    #[serde(default)]
    pub declared_alternations: usize,
}

/// Metrics of a program.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub quantum_depth: usize,
    pub peak_width: usize,
    pub alternations: usize,
    pub gate_counts: BTreeMap<String, usize>,
}

/// Measurement records and classical values of one run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub records: Vec<MeasurementRecord>,
    pub values: Registers,
}

/// Registered classical functions.
#[derive(Clone, Debug, PartialEq)]
pub enum ClassicalFn {
    /// XOR of all inputs (low bits).
    Parity,
    /// out[i] = in[0] ⊕ … ⊕ in[i].
    PrefixParity,
    /// Hamming weight of the inputs, most significant bit first.
    HammingWeight,
    /// Ranks → order: out[r] is the input position holding rank r.
    SortPermutation,
    /// Pairwise comparisons: one bit per pair i < j, set when in[i] > in[j].
    ComparisonTable,
    /// Lookup: the input bits (in[0] least significant) index the table;
    /// out[j] is bit j of the entry.
    CustomTable(Vec<u64>),
}

impl ClassicalFn {
    pub fn parse(name: &str, table: Option<&[u64]>) -> Result<Self> {
        Ok(match name {
            "parity" => ClassicalFn::Parity,
            "prefix-parity" => ClassicalFn::PrefixParity,
            "hamming-weight" => ClassicalFn::HammingWeight,
            "sort-permutation" => ClassicalFn::SortPermutation,
            "comparison-table" => ClassicalFn::ComparisonTable,
            "custom-table" => ClassicalFn::CustomTable(
                table
                    .ok_or_else(|| Error::Validation("custom-table needs a table".into()))?
                    .to_vec(),
            ),
            other => return Err(Error::Validation(format!("unknown classical function {other}"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            ClassicalFn::Parity => "parity",
            ClassicalFn::PrefixParity => "prefix-parity",
            ClassicalFn::HammingWeight => "hamming-weight",
            ClassicalFn::SortPermutation => "sort-permutation",
            ClassicalFn::ComparisonTable => "comparison-table",
            ClassicalFn::CustomTable(_) => "custom-table",
        }
    }

    /// Natural output length for `n` inputs.
    pub fn output_len(&self, n: usize) -> usize {
        match self {
            ClassicalFn::Parity => 1,
            ClassicalFn::PrefixParity | ClassicalFn::SortPermutation => n,
            ClassicalFn::HammingWeight => usize::BITS as usize - n.leading_zeros() as usize,
            ClassicalFn::ComparisonTable => n * n.saturating_sub(1) / 2,
            ClassicalFn::CustomTable(t) => {
                let m = t.iter().copied().max().unwrap_or(0);
                (u64::BITS - m.leading_zeros()).max(1) as usize
            }
        }
    }

    /// Evaluate with the natural output length, or `width` outputs when given.
    pub fn eval(&self, inputs: &[u64], width: Option<usize>) -> Result<Vec<u64>> {
        let w = width.unwrap_or_else(|| self.output_len(inputs.len()));
        let out = match self {
            ClassicalFn::Parity => vec![inputs.iter().fold(0, |a, &b| a ^ (b & 1))],
            ClassicalFn::PrefixParity => {
                let mut acc = 0;
                inputs
                    .iter()
                    .map(|&b| {
                        acc ^= b & 1;
                        acc
                    })
                    .collect()
            }
            ClassicalFn::HammingWeight => {
                let hw: u64 = inputs.iter().map(|&b| b & 1).sum();
                if w < 64 && hw >> w != 0 {
                    return Err(Error::Validation(format!("weight {hw} does not fit in {w} bits")));
                }
                (0..w).rev().map(|j| hw >> j & 1).collect()
            }
            ClassicalFn::SortPermutation => sort_permutation(inputs)?.into_iter().map(|x| x as u64).collect(),
            ClassicalFn::ComparisonTable => {
                let mut v = Vec::new();
                for i in 0..inputs.len() {
                    for j in i + 1..inputs.len() {
                        v.push((inputs[i] > inputs[j]) as u64);
                    }
                }
                v
            }
            ClassicalFn::CustomTable(t) => {
                let idx = inputs
                    .iter()
                    .enumerate()
                    .fold(0usize, |a, (i, &b)| a | (((b & 1) as usize) << i));
                let v = *t
                    .get(idx)
                    .ok_or_else(|| Error::Validation(format!("custom table has no entry {idx}")))?;
                (0..w).map(|j| v >> j & 1).collect()
            }
        };
        if out.len() != w {
            return Err(Error::Validation(format!(
                "{} produces {} outputs, layer declares {w}",
                self.name(),
                out.len()
            )));
        }
        Ok(out)
    }
}

/// Evaluate a registered classical function by name.
pub fn classical_eval(descriptor: &str, inputs: &[u64]) -> Result<Vec<u64>> {
    ClassicalFn::parse(descriptor, None)?.eval(inputs, None)
}

/// Order of positions sorted by rank: out[r] = i with ranks[i] = r.
pub fn sort_permutation(ranks: &[u64]) -> Result<Vec<usize>> {
    let n = ranks.len();
    let mut out = vec![usize::MAX; n];
    for (i, &r) in ranks.iter().enumerate() {
        let r = r as usize;
        if r >= n || out[r] != usize::MAX {
            return Err(Error::Validation(format!("ranks {ranks:?} are not a permutation")));
        }
        out[r] = i;
    }
    Ok(out)
}

impl Program {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, layer: Layer) -> &mut Self {
        self.layers.push(layer);
        self
    }

    pub fn quantum(&mut self, gates: Vec<GateOp>) -> &mut Self {
        if !gates.is_empty() {
            self.layers.push(Layer::Quantum { gates });
        }
        self
    }

    pub fn measure(&mut self, qubits: Vec<usize>, out: Vec<String>) -> &mut Self {
        self.layers.push(Layer::Measure { qubits, out });
        self
    }

    pub fn classical(&mut self, func: &str, inputs: Vec<String>, out: Vec<String>) -> &mut Self {
        self.layers.push(Layer::Classical {
            func: func.to_string(),
            inputs,
            out,
            table: None,
        });
        self
    }

    pub fn alloc(&mut self, qubits: Vec<usize>) -> &mut Self {
        self.layers.push(Layer::Alloc { qubits });
        self
    }

    pub fn recycle(&mut self, qubits: Vec<usize>) -> &mut Self {
        self.layers.push(Layer::Recycle { qubits });
        self
    }

    /// Append all layers of `other`.
    pub fn extend(&mut self, other: Program) -> &mut Self {
        self.layers.extend(other.layers);
        self
    }

    /// Program that applies the adjoint quantum content in reverse order.
    /// Only valid for purely quantum programs.
    pub fn adjoint_gates(gates: &[GateOp]) -> Result<Vec<GateOp>> {
        gates.iter().rev().map(adjoint_gate).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("program serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Validation(format!("program JSON: {e}")))
    }

    /// Default name of the k-th measurement when a layer gives none.
    fn measure_names(qubits: &[usize], out: &[String], counter: usize) -> Result<Vec<String>> {
        if out.is_empty() {
            Ok((0..qubits.len()).map(|i| format!("m{}", counter + i)).collect())
        } else if out.len() == qubits.len() {
            Ok(out.to_vec())
        } else {
            Err(Error::Validation("measure layer: out names do not match qubits".into()))
        }
    }

    /// Check that every classical reference is defined by an earlier layer
    /// and that every gate is well formed.
    pub fn validate(&self) -> Result<()> {
        let mut defined: BTreeSet<String> = BTreeSet::new();
        let mut counter = 0;
        for (li, layer) in self.layers.iter().enumerate() {
            match layer {
                Layer::Quantum { gates } => {
                    for g in gates {
                        g.validate()?;
                        if let Some(c) = &g.condition {
                            if !defined.contains(c) {
                                return Err(Error::Validation(format!(
                                    "layer {li}: dangling feedforward reference {c}"
                                )));
                            }
                        }
                    }
                }
                Layer::Measure { qubits, out } => {
                    for n in Self::measure_names(qubits, out, counter)? {
                        defined.insert(n);
                    }
                    counter += qubits.len();
                }
                Layer::Classical {
                    func,
                    inputs,
                    out,
                    table,
                } => {
                    ClassicalFn::parse(func, table.as_deref())?;
                    for i in inputs {
                        if !defined.contains(i) {
                            return Err(Error::Validation(format!(
                                "layer {li}: classical input {i} is not defined earlier"
                            )));
                        }
                    }
                    for o in out {
                        defined.insert(o.clone());
                    }
                }
                Layer::Alloc { .. } | Layer::Recycle { .. } => {}
            }
        }
        Ok(())
    }

    /// Quantum depth, peak width, alternations and gate counts.
    ///
    /// Depth counts quantum layers only; each layer contributes its longest
    /// per-qubit gate chain. Alternations count classical layers whose outputs
    /// reach a later gate condition.
    pub fn cost(&self) -> CostReport {
        let mut depth = 0;
        let mut counts = BTreeMap::new();
        let allocated: BTreeSet<usize> = self
            .layers
            .iter()
            .flat_map(|l| match l {
                Layer::Alloc { qubits } => qubits.clone(),
                _ => vec![],
            })
            .collect();
        let mut pre: BTreeSet<usize> = BTreeSet::new();
        for l in &self.layers {
            let used: Vec<usize> = match l {
                Layer::Quantum { gates } => gates.iter().flat_map(|g| g.qubits()).collect(),
                Layer::Measure { qubits, .. } | Layer::Recycle { qubits } => qubits.clone(),
                _ => vec![],
            };
            pre.extend(used.into_iter().filter(|q| !allocated.contains(q)));
        }
        let mut width = pre.len();
        let mut peak = width;
        for l in &self.layers {
            match l {
                Layer::Quantum { gates } => {
                    depth += layer_depth(gates);
                    for g in gates {
                        *counts.entry(g.kind.name().to_string()).or_insert(0) += 1;
                    }
                }
                Layer::Alloc { qubits } => {
                    width += qubits.len();
                    peak = peak.max(width);
                }
                Layer::Recycle { qubits } => width -= qubits.len(),
                _ => {}
            }
        }
        let mut needed: BTreeSet<String> = BTreeSet::new();
        let mut alternations = 0;
        for l in self.layers.iter().rev() {
            match l {
                Layer::Quantum { gates } => {
                    needed.extend(gates.iter().filter_map(|g| g.condition.clone()));
                }
                Layer::Classical { inputs, out, .. } => {
                    if out.iter().any(|o| needed.contains(o)) {
                        alternations += 1;
                        needed.extend(inputs.iter().cloned());
                    }
                }
                _ => {}
            }
        }
        CostReport {
            quantum_depth: depth,
            peak_width: peak,
            alternations,
            gate_counts: counts,
        }
    }
}

/// Adjoint of a single gate.
pub fn adjoint_gate(g: &GateOp) -> Result<GateOp> {
    use crate::sim::GateKind::*;
    let kind = match &g.kind {
        S => RZ(-std::f64::consts::FRAC_PI_2),
        T => RZ(-std::f64::consts::FRAC_PI_4),
        RX(t) => RX(-t),
        RY(t) => RY(-t),
        RZ(t) => RZ(-t),
        CRZ(t) => CRZ(-t),
        CRY(t) => CRY(-t),
        Custom(m) => Custom(m.adjoint()),
        k => k.clone(),
    };
    if matches!(g.kind, S | T) && !g.controls.is_empty() {
        return Err(Error::Validation("adjoint of controlled S/T is not representable".into()));
    }
    Ok(GateOp {
        kind,
        targets: g.targets.clone(),
        controls: g.controls.clone(),
        condition: g.condition.clone(),
    })
}

/// As-soon-as-possible schedule of a gate list: each inner vector is one time step.
pub fn asap_steps(gates: &[GateOp]) -> Vec<Vec<&GateOp>> {
    let mut level: HashMap<usize, usize> = HashMap::new();
    let mut steps: Vec<Vec<&GateOp>> = Vec::new();
    for g in gates {
        let qs = g.qubits();
        let l = qs.iter().map(|q| level.get(q).copied().unwrap_or(0)).max().unwrap_or(0);
        for q in qs {
            level.insert(q, l + 1);
        }
        if steps.len() <= l {
            steps.resize_with(l + 1, Vec::new);
        }
        steps[l].push(g);
    }
    steps
}

/// Longest per-qubit gate chain.
pub fn layer_depth(gates: &[GateOp]) -> usize {
    asap_steps(gates).len()
}

/// Execution state of a program run; cloneable so that runs can fork at
/// measurements.
#[derive(Clone, Debug)]
pub struct Execution {
    pub state: QuantumState,
    pub transcript: Transcript,
    labels: HashMap<usize, QubitId>,
    pc: usize,
    sub: usize,
    counter: usize,
}

impl Execution {
    pub fn new(state: QuantumState) -> Self {
        Execution {
            state,
            transcript: Transcript::default(),
            labels: HashMap::new(),
            pc: 0,
            sub: 0,
            counter: 0,
        }
    }

    pub fn finished(&self, p: &Program) -> bool {
        self.pc >= p.layers.len()
    }

    fn q(&self, label: usize) -> QubitId {
        *self.labels.get(&label).unwrap_or(&label)
    }

    fn map_gate(&self, g: &GateOp) -> GateOp {
        GateOp {
            kind: g.kind.clone(),
            targets: g.targets.iter().map(|&t| self.q(t)).collect(),
            controls: g.controls.iter().map(|&c| self.q(c)).collect(),
            condition: g.condition.clone(),
        }
    }

    /// Next qubit to be measured if the program counter sits on a measurement.
    fn pending_measure(&self, p: &Program) -> Option<usize> {
        match p.layers.get(self.pc) {
            Some(Layer::Measure { qubits, .. }) if self.sub < qubits.len() => Some(qubits[self.sub]),
            _ => None,
        }
    }

    /// Measure the next pending qubit of the current measure layer.
    fn measure_one(&mut self, p: &Program, rng: &mut RandomSource, forced: Option<u8>) -> Result<()> {
        let (qubits, out) = match &p.layers[self.pc] {
            Layer::Measure { qubits, out } => (qubits, out),
            _ => unreachable!(),
        };
        let names = Program::measure_names(qubits, out, self.counter)?;
        let q = self.q(qubits[self.sub]);
        let rec = self.state.measure(q, rng, forced)?;
        self.transcript.values.insert(names[self.sub].clone(), rec.outcome as u64);
        self.transcript.records.push(rec);
        self.sub += 1;
        if self.sub == qubits.len() {
            self.counter += qubits.len();
            self.sub = 0;
            self.pc += 1;
        }
        Ok(())
    }

    /// Run one layer (or one qubit of a measurement layer).
    pub fn step(&mut self, p: &Program, rng: &mut RandomSource) -> Result<()> {
        match &p.layers[self.pc] {
            Layer::Quantum { gates } => {
                for g in gates {
                    let m = self.map_gate(g);
                    self.state.apply_with(&m, &self.transcript.values)?;
                }
                self.pc += 1;
            }
            Layer::Measure { qubits, .. } => {
                if qubits.is_empty() {
                    self.pc += 1;
                } else {
                    self.measure_one(p, rng, None)?;
                }
            }
            Layer::Classical {
                func,
                inputs,
                out,
                table,
            } => {
                let f = ClassicalFn::parse(func, table.as_deref())?;
                let vals: Vec<u64> = inputs
                    .iter()
                    .map(|i| {
                        self.transcript
                            .values
                            .get(i)
                            .copied()
                            .ok_or_else(|| Error::Validation(format!("dangling classical reference {i}")))
                    })
                    .collect::<Result<_>>()?;
                let res = f.eval(&vals, Some(out.len()))?;
                for (o, v) in out.iter().zip(res) {
                    self.transcript.values.insert(o.clone(), v);
                }
                self.pc += 1;
            }
            Layer::Alloc { qubits } => {
                let ids = self.state.alloc(qubits.len())?;
                for (&l, id) in qubits.iter().zip(ids) {
                    self.labels.insert(l, id);
                }
                self.pc += 1;
            }
            Layer::Recycle { qubits } => {
                for &l in qubits {
                    let q = self.q(l);
                    self.state.recycle(q)?;
                    self.labels.remove(&l);
                }
                self.pc += 1;
            }
        }
        Ok(())
    }
}

/// Run a program on `state`, sampling measurement outcomes from `rng`.
pub fn run(program: &Program, state: QuantumState, rng: &mut RandomSource) -> Result<(QuantumState, Transcript)> {
    program.validate()?;
    let mut ex = Execution::new(state);
    while !ex.finished(program) {
        ex.step(program, rng)?;
    }
    Ok((ex.state, ex.transcript))
}

/// One fully determined measurement branch.
#[derive(Clone, Debug)]
pub struct Branch {
    pub state: QuantumState,
    pub transcript: Transcript,
    pub probability: f64,
}

/// Run every measurement branch of `program` (depth first, forking the
/// execution at each measured qubit). Branches of probability at most
/// `1e-12` are pruned. Fails with a capacity error past `max_branches`.
pub fn run_branches(program: &Program, state: QuantumState, max_branches: usize) -> Result<Vec<Branch>> {
    let mut out = Vec::new();
    for_each_branch(program, state, max_branches, |b| {
        out.push(b);
        Ok(())
    })?;
    Ok(out)
}

/// Streaming form of [`run_branches`]; returns the number of branches.
pub fn for_each_branch<F>(program: &Program, state: QuantumState, max_branches: usize, mut visit: F) -> Result<usize>
where
    F: FnMut(Branch) -> Result<()>,
{
    program.validate()?;
    let mut rng = RandomSource::new(0);
    let mut stack = vec![(Execution::new(state), 1.0f64)];
    let mut count = 0;
    while let Some((mut ex, prob)) = stack.pop() {
        loop {
            if ex.finished(program) {
                count += 1;
                if count > max_branches {
                    return Err(Error::Capacity(format!("more than {max_branches} branches")));
                }
                visit(Branch {
                    state: ex.state,
                    transcript: ex.transcript,
                    probability: prob,
                })?;
                break;
            }
            if let Some(q) = ex.pending_measure(program) {
                let p1 = ex.state.prob_one(ex.q(q))?;
                let p0 = 1.0 - p1;
                let live0 = p0 > crate::sim::RECYCLE_TOL;
                let live1 = p1 > crate::sim::RECYCLE_TOL;
                if live0 && live1 {
                    let mut other = ex.clone();
                    other.measure_one(program, &mut rng, Some(1))?;
                    stack.push((other, prob * p1));
                    ex.measure_one(program, &mut rng, Some(0))?;
                    stack.push((ex, prob * p0));
                    break;
                }
                let b = if live1 { 1 } else { 0 };
                ex.measure_one(program, &mut rng, Some(b))?;
                continue;
            }
            ex.step(program, &mut rng)?;
        }
    }
    Ok(count)
}

/// Error class of one operation under the worst-case error model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpClass {
    Single,
    IdleSingle,
    Two,
    IdleTwo,
    Measure,
    IdleMeasure,
    IdleClassical,
}

impl OpClass {
    pub const ALL: [OpClass; 7] = [
        OpClass::Single,
        OpClass::IdleSingle,
        OpClass::Two,
        OpClass::IdleTwo,
        OpClass::Measure,
        OpClass::IdleMeasure,
        OpClass::IdleClassical,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Run a program and report every operation to `on_event` together with the
/// qubits it touches.
///
/// Quantum layers are split into ASAP time steps; live qubits untouched in a
/// step idle for that step. Gate events fire after the gate (also when its
/// condition is false), measurement events fire before the measurement.
/// Every qubit live during a classical layer idles once.
pub fn run_with_events<F>(
    program: &Program,
    state: QuantumState,
    rng: &mut RandomSource,
    mut on_event: F,
) -> Result<(QuantumState, Transcript)>
where
    F: FnMut(OpClass, &[QubitId], &mut QuantumState) -> Result<()>,
{
    program.validate()?;
    let mut ex = Execution::new(state);
    while !ex.finished(program) {
        match &program.layers[ex.pc] {
            Layer::Quantum { gates } => {
                let mapped: Vec<GateOp> = gates.iter().map(|g| ex.map_gate(g)).collect();
                for step in asap_steps(&mapped) {
                    let touched: BTreeSet<QubitId> = step.iter().flat_map(|g| g.qubits()).collect();
                    let wide = step.iter().any(|g| g.qubits().len() > 1);
                    for g in &step {
                        ex.state.apply_with(g, &ex.transcript.values)?;
                        let class = if g.qubits().len() > 1 { OpClass::Two } else { OpClass::Single };
                        on_event(class, &g.qubits(), &mut ex.state)?;
                    }
                    let idle = if wide { OpClass::IdleTwo } else { OpClass::IdleSingle };
                    let live: Vec<QubitId> = ex.state.live_qubits().to_vec();
                    for q in live.into_iter().filter(|q| !touched.contains(q)) {
                        on_event(idle, &[q], &mut ex.state)?;
                    }
                }
                ex.pc += 1;
            }
            Layer::Measure { qubits, .. } => {
                let measured: BTreeSet<QubitId> = qubits.iter().map(|&l| ex.q(l)).collect();
                let live: Vec<QubitId> = ex.state.live_qubits().to_vec();
                for q in live.into_iter().filter(|q| !measured.contains(q)) {
                    on_event(OpClass::IdleMeasure, &[q], &mut ex.state)?;
                }
                if qubits.is_empty() {
                    ex.pc += 1;
                }
                while ex.pending_measure(program).is_some() {
                    let q = ex.q(ex.pending_measure(program).unwrap_or_default());
                    on_event(OpClass::Measure, &[q], &mut ex.state)?;
                    ex.measure_one(program, rng, None)?;
                }
            }
            Layer::Classical { .. } => {
                let live: Vec<QubitId> = ex.state.live_qubits().to_vec();
                for q in live {
                    on_event(OpClass::IdleClassical, &[q], &mut ex.state)?;
                }
                ex.step(program, rng)?;
            }
            _ => ex.step(program, rng)?,
        }
    }
    Ok((ex.state, ex.transcript))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{GateKind, QuantumState};

    #[test]
    fn prefix_parity_example() {
        assert_eq!(classical_eval("prefix-parity", &[1, 0, 1]).unwrap(), vec![1, 1, 0]);
        assert_eq!(classical_eval("parity", &[1, 1, 1, 0]).unwrap(), vec![1]);
        assert!(matches!(classical_eval("nope", &[1]), Err(Error::Validation(_))));
    }

    #[test]
    fn sort_permutation_matches_brute_force() {
        let ranks = [2u64, 0, 1];
        let perm = classical_eval("sort-permutation", &ranks).unwrap();
        let mut idx: Vec<usize> = (0..3).collect();
        idx.sort_by_key(|&i| ranks[i]);
        assert_eq!(perm, idx.iter().map(|&i| i as u64).collect::<Vec<_>>());
    }

    #[test]
    fn hamming_weight_msb_first() {
        assert_eq!(classical_eval("hamming-weight", &[1, 1, 1, 0]).unwrap(), vec![0, 1, 1]);
    }

    #[test]
    fn epr_program() {
        let mut p = Program::new();
        p.alloc(vec![0, 1]).quantum(vec![
            GateOp::single(GateKind::H, 0),
            GateOp::controlled(GateKind::CNOT, 0, 1),
        ]);
        let (s, _) = run(&p, QuantumState::new(), &mut RandomSource::new(1)).unwrap();
        let a = s.amplitudes();
        assert!((a[0].re - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((a[3].re - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn empty_program_is_identity() {
        let s = QuantumState::basis(2, 2).unwrap();
        let (t, _) = run(&Program::new(), s.clone(), &mut RandomSource::new(0)).unwrap();
        assert_eq!(t.amplitudes(), s.amplitudes());
    }

    #[test]
    fn dangling_reference_rejected() {
        let mut p = Program::new();
        p.quantum(vec![GateOp::single(GateKind::X, 0).when("c9")]);
        let r = run(&p, QuantumState::basis(1, 0).unwrap(), &mut RandomSource::new(0));
        assert!(matches!(r, Err(Error::Validation(_))));
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"layers":[{"kind":"quantum","gates":[{"g":"H","t":[0]}]},{"kind":"measure","qubits":[0]},{"kind":"classical","fn":"prefix-parity","in":["m0"],"out":["c0"]}]}"#;
        let p = Program::from_json(text).unwrap();
        assert_eq!(p.layers.len(), 3);
        let back = Program::from_json(&p.to_json()).unwrap();
        assert_eq!(p, back);
    }

    #[test]
    fn appending_quantum_layer_never_lowers_depth() {
        let mut p = Program::new();
        p.quantum(vec![GateOp::single(GateKind::H, 0)]);
        let d0 = p.cost().quantum_depth;
        p.quantum(vec![GateOp::single(GateKind::X, 1)]);
        assert!(p.cost().quantum_depth >= d0);
    }

    #[test]
    fn branches_sum_to_one() {
        let mut p = Program::new();
        p.quantum(vec![GateOp::single(GateKind::H, 0), GateOp::single(GateKind::RY(1.0), 1)])
            .measure(vec![0, 1], vec![]);
        let b = run_branches(&p, QuantumState::basis(2, 0).unwrap(), 16).unwrap();
        assert_eq!(b.len(), 4);
        let t: f64 = b.iter().map(|x| x.probability).sum();
        assert!((t - 1.0).abs() < 1e-10);
    }
}
