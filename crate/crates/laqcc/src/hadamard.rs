//! Hadamard code over F_p: encoding, noisy channels, the quantum decoder's
//! exact output distribution, circuit-level sampling and list decoding.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::primitives::{self, h, Mode};
use crate::rng::{enumerate_branches, RandomSource};
use crate::sim::{GateKind, GateOp, QuantumState};
use crate::transform::{character_transform, digits, index_of, inner, is_prime, omega, table_size};
use crate::{Error, Result};

/// Largest k for statevector decoding.
pub const CIRCUIT_MAX_K: usize = 4;

/// List-decoding constant: ⌈C ε⁻² ln(1/ε)⌉ samples.
pub const LIST_DECODE_C: f64 = 8.0;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub p: u64,
    pub k: usize,
    pub coords: Vec<u64>,
}

impl Message {
    pub fn new(p: u64, coords: Vec<u64>) -> Result<Self> {
        check_field(p)?;
        if coords.iter().any(|&c| c >= p) {
            return Err(Error::Validation(format!("message coordinates must lie in [0, {p})")));
        }
        Ok(Message { p, k: coords.len(), coords })
    }

    pub fn from_index(p: u64, k: usize, index: usize) -> Self {
        Message {
            p,
            k,
            coords: digits(index, p, k),
        }
    }

    pub fn index(&self) -> usize {
        index_of(&self.coords, self.p)
    }

    pub fn random(p: u64, k: usize, rng: &mut RandomSource) -> Self {
        Message {
            p,
            k,
            coords: (0..k).map(|_| rng.random_range(0..p)).collect(),
        }
    }
}

/// Codeword file format: {"p", "k", "values"}; values indexed little-endian by y.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Codeword {
    pub p: u64,
    pub k: usize,
    pub values: Vec<u64>,
}

impl Codeword {
    pub fn validate(&self) -> Result<()> {
        check_field(self.p)?;
        if self.values.len() != table_size(self.p, self.k)? {
            return Err(Error::Validation("codeword length must be p^k".into()));
        }
        if self.values.iter().any(|&v| v >= self.p) {
            return Err(Error::Validation("codeword values must lie in [0, p)".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn check_field(p: u64) -> Result<()> {
    if !is_prime(p) {
        return Err(Error::Validation(format!("p = {p} is not prime")));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum NoiseModel {
    /// Each coordinate is replaced by a uniform symbol with probability 1 − ρ.
    Symmetric { bias: f64 },
    /// Exactly ⌊δn⌋ coordinates changed, positions drawn at random.
    WorstCase { delta: f64 },
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseModel::Symmetric { bias } if !(0.0..=1.0).contains(&bias) => {
                Err(Error::Validation(format!("bias {bias} is not in [0, 1]")))
            }
            NoiseModel::WorstCase { delta } if !(0.0..1.0).contains(&delta) => {
                Err(Error::Validation(format!("delta {delta} is not in [0, 1)")))
            }
            _ => Ok(()),
        }
    }
}

/// Output distribution of the decoder over messages (little-endian indices).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodeDistribution {
    pub p: u64,
    pub k: usize,
    pub probs: Vec<f64>,
}

impl DecodeDistribution {
    pub fn sample(&self, rng: &mut RandomSource) -> Message {
        let u = rng.uniform();
        let mut acc = 0.0;
        for (i, &p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return Message::from_index(self.p, self.k, i);
            }
        }
        let last = self.probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        Message::from_index(self.p, self.k, last)
    }
}

pub fn encode(x: &Message) -> Codeword {
    let n = table_size(x.p, x.k).expect("message dimension within limits");
    let xi = x.index();
    Codeword {
        p: x.p,
        k: x.k,
        values: (0..n).map(|y| inner(xi, y, x.p, x.k)).collect(),
    }
}

pub fn corrupt(c: &Codeword, model: &NoiseModel, rng: &mut RandomSource) -> Result<Codeword> {
    model.validate()?;
    let mut out = c.clone();
    match *model {
        NoiseModel::Symmetric { bias } => {
            for v in &mut out.values {
                if rng.uniform() >= bias {
                    *v = rng.random_range(0..c.p);
                }
            }
        }
        NoiseModel::WorstCase { delta } => {
            let count = (delta * c.len() as f64).floor() as usize;
            for i in rand::seq::index::sample(rng, c.len(), count) {
                out.values[i] = (out.values[i] + rng.random_range(1..c.p)) % c.p;
            }
        }
    }
    Ok(out)
}

pub fn distance(a: &Codeword, b: &Codeword) -> usize {
    a.values.iter().zip(&b.values).filter(|(x, y)| x != y).count()
}

/// probs[z] = |Σ_y ω^{c(y) − ⟨y,z⟩}|² / p^{2k}.
///
/// The decoder's final layer is the inverse Fourier transform, so an
/// uncorrupted H(x) decodes to x.
pub fn decode_distribution(c: &Codeword) -> Result<DecodeDistribution> {
    c.validate()?;
    let w = omega(c.p);
    let mut v: Vec<Complex64> = c.values.iter().map(|&e| w.powu(e as u32)).collect();
    character_transform(&mut v, c.p, c.k, -1)?;
    let n2 = (c.len() as f64).powi(2);
    Ok(DecodeDistribution {
        p: c.p,
        k: c.k,
        probs: v.iter().map(|a| a.norm_sqr() / n2).collect(),
    })
}

pub fn decode_sample(c: &Codeword, rng: &mut RandomSource) -> Result<Message> {
    Ok(decode_distribution(c)?.sample(rng))
}

/// Decoder state just before the final measurement, with its register.
pub fn decoder_state(c: &Codeword, mode: Mode, rng: &mut RandomSource) -> Result<(QuantumState, Vec<crate::QubitId>)> {
    c.validate()?;
    if c.p != 2 {
        return Err(Error::Validation("circuit decoding is implemented for p = 2".into()));
    }
    if c.k > CIRCUIT_MAX_K {
        return Err(Error::Capacity(format!("circuit decoding is limited to k ≤ {CIRCUIT_MAX_K}")));
    }
    let mut s = QuantumState::new();
    let reg = if c.k > 0 { s.alloc(c.k)? } else { vec![] };
    for &q in &reg {
        s.apply(&h(q))?;
    }
    match mode {
        Mode::Ideal => {
            let vals = c.values.clone();
            s.apply_diagonal(&reg, |y| if vals[y] == 1 { Complex64::new(-1.0, 0.0) } else { Complex64::new(1.0, 0.0) })?;
        }
        Mode::Expanded => {
            // phase kickback into |−⟩ from one Equal_y per flipped coordinate
            let anc = s.alloc(1)?[0];
            s.apply(&GateOp::single(GateKind::X, anc))?;
            s.apply(&h(anc))?;
            for (y, &v) in c.values.iter().enumerate() {
                if v == 1 {
                    primitives::equal_gate(&mut s, &reg, y as u64, anc, Mode::Expanded, rng)?;
                }
            }
            s.apply(&h(anc))?;
            s.apply(&GateOp::single(GateKind::X, anc))?;
            s.recycle(anc)?;
        }
    }
    for &q in &reg {
        s.apply(&h(q))?;
    }
    Ok((s, reg))
}

fn circuit_run(c: &Codeword, mode: Mode, rng: &mut RandomSource) -> Result<Message> {
    let (mut s, reg) = decoder_state(c, mode, rng)?;
    let mut coords = Vec::with_capacity(c.k);
    for &q in &reg {
        coords.push(s.measure(q, rng, None)?.outcome as u64);
    }
    Message::new(2, coords)
}

/// Statevector decoder: H^⊗k, phase (−1)^{c(y)}, H^⊗k, measure.
pub fn circuit_decode(c: &Codeword, rng: &mut RandomSource) -> Result<Message> {
    circuit_run(c, Mode::Ideal, rng)
}

/// Decoder with the phase layer built from expanded Equal gates.
pub fn circuit_decode_expanded(c: &Codeword, rng: &mut RandomSource) -> Result<Message> {
    circuit_run(c, Mode::Expanded, rng)
}

/// Exact output distribution of the statevector decoder by branch enumeration.
pub fn circuit_distribution(c: &Codeword) -> Result<Vec<f64>> {
    let n = table_size(c.p, c.k)?;
    let mut probs = vec![0.0; n];
    for (m, p) in enumerate_branches(|rng| circuit_decode(c, rng), n)? {
        probs[m.index()] += p;
    }
    Ok(probs)
}

/// Total-variation distance between two distributions.
pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Number of decoder runs used by [`list_decode`].
pub fn list_decode_runs(eps: f64) -> usize {
    (LIST_DECODE_C * eps.powi(-2) * (1.0 / eps).ln()).ceil().max(1.0) as usize
}

/// Deduplicated outputs of ⌈C ε⁻² ln(1/ε)⌉ decoder runs.
pub fn list_decode(c: &Codeword, eps: f64, rng: &mut RandomSource) -> Result<Vec<Message>> {
    if !(eps > 0.0 && eps <= 0.5) {
        return Err(Error::Validation(format!("epsilon {eps} is not in (0, 1/2]")));
    }
    let dist = decode_distribution(c)?;
    let mut out: Vec<Message> = Vec::new();
    for _ in 0..list_decode_runs(eps) {
        let m = dist.sample(rng);
        if !out.contains(&m) {
            out.push(m);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encode_examples() {
        let c = encode(&Message::new(2, vec![1, 0]).unwrap());
        assert_eq!(c.values, vec![0, 1, 0, 1]);
        assert!(encode(&Message::new(2, vec![0, 0, 0]).unwrap()).values.iter().all(|&v| v == 0));
        let a = encode(&Message::new(2, vec![1, 0, 1]).unwrap());
        let b = encode(&Message::new(2, vec![0, 1, 1]).unwrap());
        assert_eq!(distance(&a, &b), 4);
    }

    #[test]
    fn clean_codeword_decodes_exactly() {
        for (p, k) in [(2u64, 5usize), (3, 3), (5, 2)] {
            let mut rng = RandomSource::new(p);
            let x = Message::random(p, k, &mut rng);
            let d = decode_distribution(&encode(&x)).unwrap();
            assert!((d.probs[x.index()] - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn one_flip_k2_uniform() {
        let mut c = encode(&Message::new(2, vec![1, 1]).unwrap());
        c.values[2] ^= 1;
        let d = decode_distribution(&c).unwrap();
        for p in d.probs {
            assert!((p - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn binary_identity_and_odd_bound() {
        let mut rng = RandomSource::new(11);
        for k in 1..=6 {
            let x = Message::random(2, k, &mut rng);
            let c = corrupt(&encode(&x), &NoiseModel::Symmetric { bias: 0.5 }, &mut rng).unwrap();
            let d = decode_distribution(&c).unwrap();
            let n = c.len() as f64;
            for z in 0..c.len() {
                let dz = distance(&c, &encode(&Message::from_index(2, k, z))) as f64;
                assert!((d.probs[z] - (1.0 - 2.0 * dz / n).powi(2)).abs() < 1e-10);
            }
        }
        let x = Message::random(3, 3, &mut rng);
        let c = corrupt(&encode(&x), &NoiseModel::WorstCase { delta: 0.2 }, &mut rng).unwrap();
        let d = decode_distribution(&c).unwrap();
        let dd = distance(&c, &encode(&x)) as f64 / c.len() as f64;
        assert!(d.probs[x.index()] >= (1.0 - 2.0 * dd).powi(2) - 1e-12);
    }

    #[test]
    fn worst_case_count_exact() {
        let c = encode(&Message::new(2, vec![1, 0, 1, 1]).unwrap());
        let e = corrupt(&c, &NoiseModel::WorstCase { delta: 0.25 }, &mut RandomSource::new(3)).unwrap();
        assert_eq!(distance(&c, &e), 4);
        let same = corrupt(&c, &NoiseModel::Symmetric { bias: 1.0 }, &mut RandomSource::new(3)).unwrap();
        assert_eq!(same, c);
    }

    #[test]
    fn circuit_matches_transform_exactly() {
        let mut rng = RandomSource::new(5);
        for k in 1..=4 {
            let x = Message::random(2, k, &mut rng);
            let c = corrupt(&encode(&x), &NoiseModel::Symmetric { bias: 0.6 }, &mut rng).unwrap();
            let a = circuit_distribution(&c).unwrap();
            let b = decode_distribution(&c).unwrap().probs;
            assert!(total_variation(&a, &b) < 1e-9);
        }
    }

    #[test]
    fn expanded_phase_layer_k2() {
        let mut c = encode(&Message::new(2, vec![1, 0]).unwrap());
        c.values[3] ^= 1;
        let (ideal, _) = decoder_state(&c, Mode::Ideal, &mut RandomSource::new(0)).unwrap();
        for seed in 0..8 {
            let (s, _) = decoder_state(&c, Mode::Expanded, &mut RandomSource::new(seed)).unwrap();
            assert!((s.fidelity(&ideal).unwrap() - 1.0).abs() < 1e-9);
        }
        let m = circuit_decode_expanded(&c, &mut RandomSource::new(1)).unwrap();
        assert_eq!(m.k, 2);
    }

    #[test]
    fn list_bounds() {
        assert_eq!(list_decode_runs(0.25), 178);
        let x = Message::new(2, vec![1, 0, 1]).unwrap();
        let l = list_decode(&encode(&x), 0.5, &mut RandomSource::new(0)).unwrap();
        assert_eq!(l, vec![x]);
        assert!(list_decode(&encode(&Message::new(2, vec![1]).unwrap()), 0.0, &mut RandomSource::new(0)).is_err());
    }
}
