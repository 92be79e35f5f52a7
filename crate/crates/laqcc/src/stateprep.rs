//! State preparation: uniform superpositions, W states and Dicke states,
//! plus the direct (non-LAQCC) reference circuits used for cost comparisons.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::circuit::Program;
use crate::numbersys::{decompose_fact, fact_to_comb, factorial, Factoradic};
use crate::primitives::{
    self, cnot, equal_into, exact_amplify, exact_amplify_adjoint, fanout_into, flag_less_than, h, permute,
    run_builder, run_stages, run_stages_all_branches, x, Amplifier, Builder, Mode, Stage, StagedOutcome,
};
use crate::rng::RandomSource;
use crate::sim::{GateKind, GateOp, QuantumState, QubitId};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    UniformQ,
    W,
    DickeSmallK,
    DickeFactoradic,
    Ghz,
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.replace('-', "_").as_str() {
            "uniform_q" | "uniform" => Family::UniformQ,
            "w" => Family::W,
            "dicke_small_k" => Family::DickeSmallK,
            "dicke_factoradic" => Family::DickeFactoradic,
            "ghz" => Family::Ghz,
            other => return Err(Error::Validation(format!("unknown state family {other:?}"))),
        })
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::UniformQ => "uniform_q",
            Family::W => "w",
            Family::DickeSmallK => "dicke_small_k",
            Family::DickeFactoradic => "dicke_factoradic",
            Family::Ghz => "ghz",
        })
    }
}

/// What to prepare.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateSpec {
    pub family: Family,
    pub n: usize,
    pub k: Option<usize>,
    pub q: Option<usize>,
    pub mode: Mode,
}

impl StateSpec {
    pub fn validate(&self) -> Result<()> {
        match self.family {
            Family::UniformQ => {
                if self.q.unwrap_or(0) < 1 {
                    return Err(Error::Validation("uniform_q needs q ≥ 1".into()));
                }
            }
            Family::DickeSmallK | Family::DickeFactoradic => {
                let k = self.k.ok_or_else(|| Error::Validation("Dicke states need k".into()))?;
                if k < 1 || k > self.n {
                    return Err(Error::Validation(format!("need 1 ≤ k ≤ n, got k = {k}, n = {}", self.n)));
                }
            }
            Family::W | Family::Ghz => {
                if self.n < 1 {
                    return Err(Error::Validation("need n ≥ 1".into()));
                }
            }
        }
        Ok(())
    }

    /// Basis states the target is uniform over.
    pub fn support(&self) -> Result<Vec<usize>> {
        self.validate()?;
        Ok(match self.family {
            Family::UniformQ => (0..self.q.unwrap_or(1)).collect(),
            Family::W => (0..self.n).map(|i| 1 << i).collect(),
            Family::DickeSmallK | Family::DickeFactoradic => {
                let k = self.k.unwrap_or(0) as u32;
                (0..1usize << self.n).filter(|v| v.count_ones() == k).collect()
            }
            Family::Ghz => vec![0, (1 << self.n) - 1],
        })
    }

    /// Target state as a dense amplitude vector.
    pub fn target(&self) -> Result<QuantumState> {
        let sup = self.support()?;
        let width = match self.family {
            Family::UniformQ => uniform_width(self.q.unwrap_or(1)),
            _ => self.n,
        };
        let a = 1.0 / (sup.len() as f64).sqrt();
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << width];
        for v in sup {
            amps[v] = Complex64::new(a, 0.0);
        }
        QuantumState::from_amplitudes(amps)
    }

    pub fn stages(&self) -> Result<Vec<Stage<'static>>> {
        self.validate()?;
        match self.family {
            Family::UniformQ => Ok(uniform_stages(self.q.unwrap_or(1))),
            Family::W => w_stages(self.n, self.mode),
            Family::DickeSmallK => dicke_small_k_stages(self.n, self.k.unwrap_or(0), self.mode),
            Family::DickeFactoradic => dicke_factoradic_stages(self.n, self.k.unwrap_or(0)),
            Family::Ghz => {
                let (n, mode) = (self.n, self.mode);
                Ok(vec![Stage::op(move |s, rng| {
                    *s = primitives::ghz_laqcc(n, mode, rng)?;
                    Ok(())
                })])
            }
        }
    }
}

/// Prepare a state by sampling measurement outcomes.
pub fn prepare(spec: &StateSpec, rng: &mut RandomSource) -> Result<QuantumState> {
    run_stages(&spec.stages()?, QuantumState::new(), rng)
}

/// Prepare a state on every measurement branch (stage by stage).
pub fn prepare_all_branches(spec: &StateSpec, max_per_stage: usize) -> Result<StagedOutcome> {
    run_stages_all_branches(&spec.stages()?, QuantumState::new(), max_per_stage)
}

/// Largest deviation of the amplitudes from the uniform target: off-support
/// magnitudes and spread of on-support magnitudes after phase normalization.
pub fn uniformity_deviation(state: &QuantumState, support: &[usize]) -> f64 {
    let amps = state.phase_normalized();
    let on: BTreeSet<usize> = support.iter().copied().collect();
    let target = 1.0 / (support.len() as f64).sqrt();
    let mut worst = 0.0f64;
    for (i, a) in amps.iter().enumerate() {
        let d = if on.contains(&i) { (*a - Complex64::new(target, 0.0)).norm() } else { a.norm() };
        worst = worst.max(d);
    }
    worst
}

/// Qubits for a uniform superposition over q values: ⌈log₂ q⌉ (at least one).
pub fn uniform_width(q: usize) -> usize {
    bits_for(q).max(1)
}

/// ⌈log₂ q⌉ for q ≥ 1.
pub(crate) fn bits_for(q: usize) -> usize {
    if q <= 1 {
        0
    } else {
        (usize::BITS - (q - 1).leading_zeros()) as usize
    }
}

fn hadamards(state: &mut QuantumState, qs: &[QubitId]) -> Result<()> {
    for &q in qs {
        state.apply(&h(q))?;
    }
    Ok(())
}

/// Uniform superposition over [0, q) on the low ⌈log₂ q⌉ qubits of `reg`
/// (which must start in |0⟩), or its inverse.
///
/// Powers of two need only Hadamards; otherwise the Hadamard layer is
/// exactly amplified onto the values below q.
pub fn uniform_on(state: &mut QuantumState, reg: &[QubitId], q: usize, adjoint: bool, rng: &mut RandomSource) -> Result<()> {
    if q == 0 {
        return Err(Error::Validation("uniform superposition needs q ≥ 1".into()));
    }
    let b = bits_for(q);
    if reg.len() < b {
        return Err(Error::Validation(format!("{q} values need {b} qubits, register has {}", reg.len())));
    }
    let bits = reg[..b].to_vec();
    if q.is_power_of_two() {
        return hadamards(state, &bits);
    }
    let (pb, fb) = (bits.clone(), bits.clone());
    let amp = Amplifier {
        register: bits,
        prepare: Box::new(move |s, _adj, _| hadamards(s, &pb)),
        flag: Box::new(move |s, f| flag_less_than(s, &fb, q, f)),
    };
    let frac = primitives::fraction(q as u64, 1 << b);
    if adjoint {
        exact_amplify_adjoint(state, &amp, &frac, rng)
    } else {
        exact_amplify(state, &amp, &frac, rng).map(|_| ())
    }
}

fn uniform_stages(q: usize) -> Vec<Stage<'static>> {
    vec![Stage::op(move |s, rng| {
        let reg = s.alloc(uniform_width(q))?;
        uniform_on(s, &reg, q, false, rng)
    })]
}

/// Uniform superposition over [0, q) on ⌈log₂ q⌉ fresh qubits.
pub fn prepare_uniform_q(q: usize, _mode: Mode, rng: &mut RandomSource) -> Result<QuantumState> {
    if q == 0 {
        return Err(Error::Validation("uniform superposition needs q ≥ 1".into()));
    }
    run_stages(&uniform_stages(q), QuantumState::new(), rng)
}

/// Uncompress: outputs[i] ⊕= [index = i].
pub fn uncompress(state: &mut QuantumState, index: &[QubitId], outputs: &[QubitId], mode: Mode, rng: &mut RandomSource) -> Result<()> {
    match mode {
        Mode::Ideal => {
            for (i, &o) in outputs.iter().enumerate() {
                primitives::equal_gate(state, index, i as u64, o, Mode::Ideal, rng)?;
            }
            Ok(())
        }
        Mode::Expanded => {
            let mut b = Builder::for_state(state);
            uncompress_into(&mut b, index, outputs)?;
            run_builder(state, b, rng)
        }
    }
}

/// Expanded Uncompress: fan the index out into one copy per output, run the
/// Equal_i gates on the copies, and fan back in.
pub fn uncompress_into(b: &mut Builder, index: &[usize], outputs: &[usize]) -> Result<()> {
    let n = outputs.len();
    let m = index.len();
    let mut regs = vec![index.to_vec()];
    for _ in 1..n {
        regs.push(b.fresh(m));
    }
    let fan = |b: &mut Builder, regs: &[Vec<usize>]| {
        for j in 0..m {
            let copies: Vec<usize> = regs[1..].iter().map(|r| r[j]).collect();
            fanout_into(b, index[j], &copies);
            b.cut();
        }
    };
    fan(b, &regs);
    for (i, &o) in outputs.iter().enumerate() {
        equal_into(b, &regs[i], i as u64, o)?;
    }
    fan(b, &regs);
    for r in &regs[1..] {
        b.recycle(r);
    }
    b.cut();
    Ok(())
}

/// Compress: clears the index register of Σ_i |i⟩|e_i⟩.
pub fn compress(state: &mut QuantumState, index: &[QubitId], outputs: &[QubitId], mode: Mode, rng: &mut RandomSource) -> Result<()> {
    match mode {
        Mode::Ideal => {
            hadamards(state, index)?;
            for (i, &o) in outputs.iter().enumerate() {
                for (j, &q) in index.iter().enumerate() {
                    if i >> j & 1 == 1 {
                        state.apply(&GateOp::controlled(GateKind::CZ, o, q))?;
                    }
                }
            }
            hadamards(state, index)
        }
        Mode::Expanded => {
            let mut b = Builder::for_state(state);
            compress_into(&mut b, index, outputs);
            run_builder(state, b, rng)
        }
    }
}

/// Expanded Compress: each index bit is fanned out to one copy per output
/// whose position has that bit set, and the CZ gates act on the copies.
pub fn compress_into(b: &mut Builder, index: &[usize], outputs: &[usize]) {
    b.quantum(index.iter().map(|&q| h(q)).collect());
    for (j, &q) in index.iter().enumerate() {
        let users: Vec<usize> = (0..outputs.len()).filter(|i| i >> j & 1 == 1).collect();
        let copies = b.fresh(users.len());
        fanout_into(b, q, &copies);
        b.cut();
        b.quantum(
            users
                .iter()
                .zip(&copies)
                .map(|(&i, &c)| GateOp::controlled(GateKind::CZ, outputs[i], c))
                .collect(),
        );
        fanout_into(b, q, &copies);
        b.recycle(&copies);
        b.cut();
    }
    b.quantum(index.iter().map(|&q| h(q)).collect());
    b.cut();
}

/// Stages preparing |W_n⟩ on qubits 0..n of an empty state.
pub fn w_stages(n: usize, mode: Mode) -> Result<Vec<Stage<'static>>> {
    if n == 0 {
        return Err(Error::Validation("W state needs n ≥ 1".into()));
    }
    if n == 1 {
        return Ok(vec![Stage::op(|s, _| {
            let q = s.alloc(1)?;
            s.apply(&x(q[0]))
        })]);
    }
    let m = bits_for(n);
    let out: Vec<QubitId> = (0..n).collect();
    let idx: Vec<QubitId> = (n..n + m).collect();
    let (o1, i1) = (out.clone(), idx.clone());
    let (o2, i2) = (out.clone(), idx.clone());
    let i3 = idx.clone();
    let i0 = idx.clone();
    let mut stages = vec![
        Stage::op(move |s, _| {
            s.alloc(n)?;
            s.alloc(m)?;
            Ok(())
        }),
        Stage::op(move |s, rng| uniform_on(s, &i0, n, false, rng)),
    ];
    match mode {
        Mode::Ideal => {
            stages.push(Stage::op(move |s, rng| uncompress(s, &i1, &o1, Mode::Ideal, rng)));
            stages.push(Stage::op(move |s, rng| compress(s, &i2, &o2, Mode::Ideal, rng)));
        }
        Mode::Expanded => {
            stages.push(Stage::build(move |b| uncompress_into(b, &i1, &o1)));
            stages.push(Stage::build(move |b| {
                compress_into(b, &i2, &o2);
                Ok(())
            }));
        }
    }
    stages.push(Stage::op(move |s, _| {
        for &q in &i3 {
            s.recycle(q)?;
        }
        Ok(())
    }));
    Ok(stages)
}

pub fn prepare_w(n: usize, mode: Mode, rng: &mut RandomSource) -> Result<QuantumState> {
    run_stages(&w_stages(n, mode)?, QuantumState::new(), rng)
}

/// n!/((n−k)!·n^k): chance that k uniform indices in [0, n) are distinct.
pub fn filtering_fraction(n: usize, k: usize) -> BigRational {
    let num = factorial(n) / factorial(n - k);
    let den = num_bigint::BigUint::from(n).pow(k as u32);
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

struct DickeLayout {
    n: usize,
    k: usize,
    out: Vec<QubitId>,
    regs: Vec<Vec<QubitId>>,
}

impl DickeLayout {
    fn new(n: usize, k: usize) -> Self {
        let m = bits_for(n);
        let out: Vec<QubitId> = (0..n).collect();
        let regs = (0..k).map(|j| (n + j * m..n + (j + 1) * m).collect()).collect();
        DickeLayout { n, k, out, regs }
    }

    fn filling(&self, s: &mut QuantumState, adjoint: bool, mode: Mode, rng: &mut RandomSource) -> Result<()> {
        if adjoint {
            for r in self.regs.iter().rev() {
                uncompress(s, r, &self.out, mode, rng)?;
                uniform_on(s, r, self.n, true, rng)?;
            }
        } else {
            for r in &self.regs {
                uniform_on(s, r, self.n, false, rng)?;
                uncompress(s, r, &self.out, mode, rng)?;
            }
        }
        Ok(())
    }

    fn filtering(&self, s: &mut QuantumState, mode: Mode, rng: &mut RandomSource) -> Result<()> {
        let all: Vec<QubitId> = self.out.iter().chain(self.regs.iter().flatten()).copied().collect();
        let (n, k) = (self.n, self.k);
        let out = self.out.clone();
        let me = DickeLayout::new(n, k);
        let amp = Amplifier {
            register: all,
            prepare: Box::new(move |s, adj, rng| me.filling(s, adj, mode, rng)),
            flag: Box::new(move |s, f| {
                let mut qs = out.clone();
                qs.push(f);
                permute(s, &qs, |v| if (v & ((1 << n) - 1)).count_ones() as usize == k { v ^ (1 << n) } else { v })
            }),
        };
        exact_amplify(s, &amp, &filtering_fraction(n, k), rng)?;
        Ok(())
    }

    fn ordering(&self, s: &mut QuantumState, rng: &mut RandomSource) -> Result<()> {
        let k = self.k;
        let mut greater = vec![vec![false; k]; k];
        let mut anc = Vec::new();
        for a in 0..k {
            for b in a + 1..k {
                let (ra, rb) = (&self.regs[a], &self.regs[b]);
                let m = ra.len();
                let mut qs = ra.clone();
                qs.extend(rb);
                let tie: f64 = s
                    .probabilities()
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| {
                        let pos = |q: &QubitId| s.position(*q).unwrap();
                        let va: usize = ra.iter().enumerate().map(|(j, q)| (i >> pos(q) & 1) << j).sum();
                        let vb: usize = rb.iter().enumerate().map(|(j, q)| (i >> pos(q) & 1) << j).sum();
                        va == vb
                    })
                    .map(|(_, p)| p)
                    .sum();
                if tie > 1e-12 {
                    return Err(Error::Branch(format!("registers {a} and {b} tie with mass {tie:e}")));
                }
                let c = s.alloc(1)?[0];
                qs.push(c);
                permute(s, &qs, |v| {
                    let va = v & ((1 << m) - 1);
                    let vb = v >> m & ((1 << m) - 1);
                    if va > vb {
                        v ^ (1 << (2 * m))
                    } else {
                        v
                    }
                })?;
                let rec = s.measure(c, rng, None)?;
                greater[a][b] = rec.outcome == 1;
                greater[b][a] = rec.outcome == 0;
                anc.push(c);
            }
        }
        let ranks: Vec<u64> = (0..k).map(|a| greater[a].iter().filter(|&&g| g).count() as u64).collect();
        let order = crate::circuit::sort_permutation(&ranks)?;
        // register r must receive the content of register order[r]
        let mut cur: Vec<usize> = (0..k).collect();
        for r in 0..k {
            let from = cur.iter().position(|&c| c == order[r]).expect("present");
            if from != r {
                for (&qa, &qb) in self.regs[r].iter().zip(&self.regs[from]) {
                    s.apply(&GateOp::new(GateKind::SWAP, vec![qa, qb], vec![]))?;
                }
                cur.swap(r, from);
            }
        }
        for c in anc {
            s.recycle(c)?;
        }
        Ok(())
    }

    /// R_j ⊕= position of the (j+1)-th lowest one of the output.
    fn cleaning(&self, s: &mut QuantumState) -> Result<()> {
        let n = self.n;
        let m = bits_for(n);
        let mut qs = self.out.clone();
        qs.extend(self.regs.iter().flatten());
        permute(s, &qs, |v| {
            let word = v & ((1 << n) - 1);
            let mut r = v;
            let mut j = 0;
            for p in 0..n {
                if word >> p & 1 == 1 && j < self.k {
                    r ^= p << (n + j * m);
                    j += 1;
                }
            }
            r
        })?;
        for q in self.regs.iter().flatten() {
            s.recycle(*q)?;
        }
        Ok(())
    }
}

/// Stages of the constant-round Dicke preparation for small k:
/// Filling, Filtering (exact amplification), Ordering, Cleaning.
pub fn dicke_small_k_stages(n: usize, k: usize, mode: Mode) -> Result<Vec<Stage<'static>>> {
    if k < 1 || k > n {
        return Err(Error::Validation(format!("need 1 ≤ k ≤ n, got k = {k}, n = {n}")));
    }
    if k * k > 4 * n {
        return Err(Error::Validation(format!("k = {k} is too large for n = {n} (need k² ≤ 4n)")));
    }
    if n == 1 {
        return w_stages(1, mode);
    }
    let m = bits_for(n);
    Ok(vec![
        Stage::op(move |s, _| {
            s.alloc(n)?;
            s.alloc(k * m)?;
            Ok(())
        }),
        Stage::op(move |s, rng| DickeLayout::new(n, k).filtering(s, mode, rng)),
        Stage::op(move |s, rng| DickeLayout::new(n, k).ordering(s, rng)),
        Stage::op(move |s, _| DickeLayout::new(n, k).cleaning(s)),
    ])
}

pub fn prepare_dicke_small_k(n: usize, k: usize, mode: Mode, rng: &mut RandomSource) -> Result<QuantumState> {
    run_stages(&dicke_small_k_stages(n, k, mode)?, QuantumState::new(), rng)
}

/// Largest n for the factoradic construction in superposition.
pub const FACTORADIC_MAX_N: usize = 5;

struct FactLayout {
    n: usize,
    k: usize,
    /// Digit registers D_0..D_{n−1}; D_j has ⌈log₂(j+1)⌉ qubits.
    digits: Vec<Vec<QubitId>>,
    dbits: usize,
}

impl FactLayout {
    fn new(n: usize, k: usize) -> Self {
        let mut next = n;
        let mut digits = Vec::with_capacity(n);
        for j in 0..n {
            let b = bits_for(j + 1);
            digits.push((next..next + b).collect());
            next += b;
        }
        FactLayout {
            n,
            k,
            digits,
            dbits: next - n,
        }
    }

    fn offset(&self, j: usize) -> usize {
        (0..j).map(|i| self.digits[i].len()).sum()
    }

    /// Digits y_j (by weight) encoded in a digit-register value, if valid.
    fn decode(&self, v: usize) -> Option<Vec<usize>> {
        let mut y = Vec::with_capacity(self.n);
        for j in 0..self.n {
            let b = self.digits[j].len();
            let d = v >> self.offset(j) & ((1 << b) - 1);
            if d > j {
                return None;
            }
            y.push(d);
        }
        Some(y)
    }

    fn encode(&self, y: &[usize]) -> usize {
        y.iter().enumerate().map(|(j, &d)| d << self.offset(j)).sum()
    }

    /// Qubits in table order: digit registers, then the output.
    fn table_qubits(&self) -> Vec<QubitId> {
        let mut qs: Vec<QubitId> = self.digits.iter().flatten().copied().collect();
        qs.extend(0..self.n);
        qs
    }

    fn comb_mask(&self, y: &[usize]) -> Result<usize> {
        let f = Factoradic::from_weights(y.to_vec())?;
        Ok(fact_to_comb(&f, self.k)?.to_mask() as usize)
    }

    /// s ⊕= A(y).
    fn evaluate_a(&self, s: &mut QuantumState) -> Result<()> {
        let size = 1usize << self.dbits;
        let mut a = vec![0usize; size];
        for (v, slot) in a.iter_mut().enumerate() {
            if let Some(y) = self.decode(v) {
                *slot = self.comb_mask(&y)?;
            }
        }
        let db = self.dbits;
        permute(s, &self.table_qubits(), |v| v ^ (a[v & (size - 1)] << db))
    }

    /// Replace y by the layout of (X, Z) with A(y) = s: X_j in D_j for j < k,
    /// Z_j in the low bits of D_{k+j}. Completed to a bijection on the rest.
    fn relabel(&self, s: &mut QuantumState) -> Result<()> {
        let size = 1usize << self.dbits;
        let (n, k) = (self.n, self.k);
        let mut per_s: std::collections::HashMap<usize, Vec<(usize, usize)>> = Default::default();
        for v in 0..size {
            if let Some(y) = self.decode(v) {
                let f = Factoradic::from_weights(y)?;
                let (comb, xf, zf) = decompose_fact(&f, k)?;
                let mut lay = vec![0usize; n];
                for j in 0..k {
                    lay[j] = xf.y(j);
                }
                for j in 0..n - k {
                    lay[k + j] = zf.y(j);
                }
                per_s.entry(comb.to_mask() as usize).or_default().push((v, self.encode(&lay)));
            }
        }
        let mut table: Vec<usize> = (0..size << n).collect();
        for (smask, pairs) in per_s {
            let mut map = vec![usize::MAX; size];
            let mut used = vec![false; size];
            for &(v, w) in &pairs {
                if used[w] {
                    return Err(Error::Validation("factoradic relabelling is not injective".into()));
                }
                map[v] = w;
                used[w] = true;
            }
            let free: Vec<usize> = (0..size).filter(|&w| !used[w]).collect();
            let mut it = free.into_iter();
            for slot in map.iter_mut() {
                if *slot == usize::MAX {
                    *slot = it.next().expect("sizes match");
                }
            }
            for v in 0..size {
                table[v | smask << self.dbits] = map[v] | smask << self.dbits;
            }
        }
        s.apply_permutation(&self.table_qubits(), &table)
    }
}

/// Stages of the factoradic Dicke preparation: uniform digits, s ⊕= A(y),
/// relabel y to its (X, Z) decomposition, and undo the uniform digits.
pub fn dicke_factoradic_stages(n: usize, k: usize) -> Result<Vec<Stage<'static>>> {
    if k < 1 || k > n {
        return Err(Error::Validation(format!("need 1 ≤ k ≤ n, got k = {k}, n = {n}")));
    }
    if n > FACTORADIC_MAX_N {
        return Err(Error::Capacity(format!(
            "factoradic preparation in superposition is limited to n ≤ {FACTORADIC_MAX_N}"
        )));
    }
    Ok(vec![
        Stage::op(move |s, _| {
            let l = FactLayout::new(n, k);
            s.alloc(n)?;
            if l.dbits > 0 {
                s.alloc(l.dbits)?;
            }
            Ok(())
        }),
        Stage::op(move |s, rng| {
            let l = FactLayout::new(n, k);
            for j in 1..n {
                uniform_on(s, &l.digits[j], j + 1, false, rng)?;
            }
            Ok(())
        }),
        Stage::op(move |s, _| FactLayout::new(n, k).evaluate_a(s)),
        Stage::op(move |s, _| FactLayout::new(n, k).relabel(s)),
        Stage::op(move |s, rng| {
            let l = FactLayout::new(n, k);
            for j in 1..n {
                let q = if j < k { j + 1 } else { j - k + 1 };
                uniform_on(s, &l.digits[j], q, true, rng)?;
            }
            for q in l.digits.iter().flatten() {
                s.recycle(*q)?;
            }
            Ok(())
        }),
    ])
}

pub fn prepare_dicke_factoradic(n: usize, k: usize, rng: &mut RandomSource) -> Result<QuantumState> {
    run_stages(&dicke_factoradic_stages(n, k)?, QuantumState::new(), rng)
}

/// GHZ with all-to-all connectivity: H then a doubling CNOT tree,
/// depth ⌈log₂ n⌉ + 1.
pub fn ghz_all_program(n: usize) -> Program {
    let mut p = Program::new();
    p.alloc((0..n).collect());
    let mut gates = vec![h(0)];
    let mut have = 1;
    while have < n {
        for i in 0..have.min(n - have) {
            gates.push(cnot(i, have + i));
        }
        have *= 2;
    }
    p.quantum(gates);
    p
}

/// GHZ on a line: H in the middle, CNOT chains outward.
pub fn ghz_linear_program(n: usize) -> Program {
    let mut p = Program::new();
    p.alloc((0..n).collect());
    let c = (n - 1) / 2;
    let mut gates = vec![h(c)];
    for i in (0..c).rev() {
        gates.push(cnot(i + 1, i));
    }
    for i in c + 1..n {
        gates.push(cnot(i - 1, i));
    }
    p.quantum(gates);
    p
}

/// W state with a CRY ladder and a CNOT cascade; depth 5n−7.
pub fn w_direct_program(n: usize) -> Program {
    let mut p = Program::new();
    p.alloc((0..n).collect());
    if n == 1 {
        p.quantum(vec![x(0)]);
        return p;
    }
    let theta = |m: usize| 2.0 * (1.0 / m as f64).sqrt().acos();
    let ry = |t: f64, q: usize| GateOp::single(GateKind::RY(t), q);
    let mut gates = vec![ry(theta(n), 0)];
    for j in 1..=n.saturating_sub(2) {
        let t = theta(n - j);
        gates.extend([ry(t / 4.0, j), cnot(j - 1, j), ry(-t / 2.0, j), cnot(j - 1, j), ry(t / 4.0, j)]);
    }
    for j in (0..n - 1).rev() {
        gates.push(cnot(j, j + 1));
    }
    gates.push(x(0));
    p.quantum(gates);
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::run;

    fn spec(family: Family, n: usize, k: Option<usize>, q: Option<usize>, mode: Mode) -> StateSpec {
        StateSpec { family, n, k, q, mode }
    }

    #[test]
    fn uniform_small_q() {
        for q in 1..=20 {
            let s = prepare_uniform_q(q, Mode::Ideal, &mut RandomSource::new(0)).unwrap();
            let sup: Vec<usize> = (0..q).collect();
            assert!(uniformity_deviation(&s, &sup) < 1e-8, "q={q}");
        }
        assert_eq!(prepare_uniform_q(8, Mode::Ideal, &mut RandomSource::new(0)).unwrap().width(), 3);
    }

    #[test]
    fn uniform_inverse_restores_zero() {
        let mut s = QuantumState::new();
        let r = s.alloc(3).unwrap();
        let mut rng = RandomSource::new(0);
        uniform_on(&mut s, &r, 5, false, &mut rng).unwrap();
        uniform_on(&mut s, &r, 5, true, &mut rng).unwrap();
        assert!(s.probabilities()[0] > 1.0 - 1e-9);
    }

    #[test]
    fn w_ideal() {
        for n in [1usize, 2, 3, 4, 5, 8] {
            let s = prepare_w(n, Mode::Ideal, &mut RandomSource::new(0)).unwrap();
            let sp = spec(Family::W, n, None, None, Mode::Ideal);
            assert!(uniformity_deviation(&s, &sp.support().unwrap()) < 1e-9, "n={n}");
        }
    }

    #[test]
    fn w_expanded_all_branches() {
        let sp = spec(Family::W, 2, None, None, Mode::Expanded);
        let out = prepare_all_branches(&sp, 1 << 12).unwrap();
        assert!(out.worst_agreement > 1.0 - 1e-9);
        assert!(out.state.fidelity(&sp.target().unwrap()).unwrap() > 1.0 - 1e-9);
    }

    #[test]
    fn filtering_fraction_exact() {
        assert_eq!(filtering_fraction(4, 2), primitives::fraction(3, 4));
        for n in 2..=8usize {
            for k in 1..=2usize {
                let f: f64 = num_traits::ToPrimitive::to_f64(&filtering_fraction(n, k)).unwrap();
                assert!(f > (-2.0 * (k * k) as f64 / n as f64).exp());
            }
        }
    }

    #[test]
    fn filling_good_mass_matches_fraction() {
        let (n, k) = (4usize, 2usize);
        let mut s = QuantumState::new();
        s.alloc(n).unwrap();
        s.alloc(k * bits_for(n)).unwrap();
        DickeLayout::new(n, k).filling(&mut s, false, Mode::Ideal, &mut RandomSource::new(0)).unwrap();
        let mass: f64 = s
            .probabilities()
            .iter()
            .enumerate()
            .filter(|(i, _)| (i & 0xF).count_ones() == 2)
            .map(|(_, p)| p)
            .sum();
        assert!((mass - 0.75).abs() < 1e-10);
    }

    #[test]
    fn dicke_small_k_grid() {
        for n in 2..=6usize {
            for k in 1..=2usize {
                let sp = spec(Family::DickeSmallK, n, Some(k), None, Mode::Ideal);
                let out = prepare_all_branches(&sp, 1 << 10).unwrap();
                assert!(out.worst_agreement > 1.0 - 1e-9, "n={n} k={k}");
                assert!(uniformity_deviation(&out.state, &sp.support().unwrap()) < 1e-9, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn dicke_factoradic_grid() {
        for n in 1..=4usize {
            for k in 1..=n {
                let sp = spec(Family::DickeFactoradic, n, Some(k), None, Mode::Ideal);
                let s = prepare(&sp, &mut RandomSource::new(0)).unwrap();
                assert_eq!(s.width(), n);
                assert!(uniformity_deviation(&s, &sp.support().unwrap()) < 1e-9, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn direct_programs() {
        for n in 2..=9usize {
            let c = ghz_all_program(n).cost();
            assert_eq!(c.quantum_depth, bits_for(n) + 1, "n={n}");
            for p in [ghz_all_program(n), ghz_linear_program(n)] {
                let (s, _) = run(&p, QuantumState::new(), &mut RandomSource::new(0)).unwrap();
                let t = spec(Family::Ghz, n, None, None, Mode::Ideal).target().unwrap();
                assert!(s.fidelity(&t).unwrap() > 1.0 - 1e-12);
            }
            let (s, _) = run(&w_direct_program(n), QuantumState::new(), &mut RandomSource::new(0)).unwrap();
            let t = spec(Family::W, n, None, None, Mode::Ideal).target().unwrap();
            assert!(s.fidelity(&t).unwrap() > 1.0 - 1e-12, "w n={n}");
        }
        assert_eq!(w_direct_program(4).cost().quantum_depth, 13);
    }
}
