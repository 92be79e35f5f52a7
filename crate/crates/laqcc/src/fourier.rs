//! Fourier analysis over F_p^n: spectra, Gowers norms, Fourier sampling of
//! multiplicative derivatives, quadratic-phase learners and additive energy.

use std::collections::HashMap;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::RandomSource;
use crate::transform::{add, character_transform, digits, index_of, inner, is_prime, omega, table_size};
use crate::{Error, Result};

/// Gowers U³ table limit.
pub const GOWERS_U3_MAX: usize = 1 << 16;
/// Below this size U² autocorrelations are summed directly.
const DIRECT_AUTOCORR_MAX: usize = 1 << 12;
pub const ENERGY_MAX: usize = 1 << 12;
const UNIT_TOL: f64 = 1e-12;

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseFunction {
    pub p: u64,
    pub n: usize,
    pub table: Vec<Complex64>,
}

/// Function file: {"p", "n", "phase_table"} with f(x) = ω^{phase_table[x]}.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseTableFile {
    pub p: u64,
    pub n: usize,
    pub phase_table: Vec<u64>,
}

impl PhaseFunction {
    pub fn new(p: u64, n: usize, table: Vec<Complex64>) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::Validation(format!("p = {p} is not prime")));
        }
        if table.len() != table_size(p, n)? {
            return Err(Error::Validation("table length must be p^n".into()));
        }
        if table.iter().any(|v| v.norm() > 1.0 + UNIT_TOL) {
            return Err(Error::Validation("values must lie in the unit disc".into()));
        }
        Ok(PhaseFunction { p, n, table })
    }

    pub fn from_phases(p: u64, n: usize, phases: &[u64]) -> Result<Self> {
        let w = omega(p);
        Self::new(p, n, phases.iter().map(|&e| w.powu((e % p) as u32)).collect())
    }

    pub fn from_file(f: &PhaseTableFile) -> Result<Self> {
        Self::from_phases(f.p, f.n, &f.phase_table)
    }

    pub fn constant(p: u64, n: usize) -> Result<Self> {
        Self::new(p, n, vec![Complex64::new(1.0, 0.0); table_size(p, n)?])
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn is_unit_modulus(&self) -> bool {
        self.table.iter().all(|v| (v.norm() - 1.0).abs() <= 1e-9)
    }

    /// True when every value is a p-th root of unity.
    pub fn is_polynomial_phase(&self) -> bool {
        let w = omega(self.p);
        self.table
            .iter()
            .all(|v| (0..self.p).any(|e| (v - w.powu(e as u32)).norm() <= 1e-9))
    }

    /// Multiplicative derivative Δ_h f(x) = f(x+h) conj(f(x)).
    pub fn derivative(&self, h: usize) -> PhaseFunction {
        let table = (0..self.len())
            .map(|x| self.table[add(x, h, self.p, self.n)] * self.table[x].conj())
            .collect();
        PhaseFunction {
            p: self.p,
            n: self.n,
            table,
        }
    }

    /// Multiply ⌊δ N⌋ randomly chosen entries by a nontrivial p-th root of unity.
    pub fn corrupt(&self, delta: f64, rng: &mut RandomSource) -> Result<PhaseFunction> {
        if !(0.0..1.0).contains(&delta) {
            return Err(Error::Validation(format!("corruption fraction {delta} is not in [0, 1)")));
        }
        let w = omega(self.p);
        let mut out = self.clone();
        let count = (delta * self.len() as f64).floor() as usize;
        for i in rand::seq::index::sample(rng, self.len(), count) {
            out.table[i] *= w.powu(rng.random_range(1..self.p) as u32);
        }
        Ok(out)
    }

    /// Fraction of entries that differ from `other`.
    pub fn distance(&self, other: &PhaseFunction) -> f64 {
        let d = self.table.iter().zip(&other.table).filter(|(a, b)| (*a - *b).norm() > 1e-9).count();
        d as f64 / self.len() as f64
    }

    pub fn random_unit(p: u64, n: usize, rng: &mut RandomSource) -> Result<Self> {
        let tau = 2.0 * std::f64::consts::PI;
        let table = (0..table_size(p, n)?).map(|_| Complex64::from_polar(1.0, tau * rng.uniform())).collect();
        Self::new(p, n, table)
    }

    /// Random values in the unit disc.
    pub fn random_disc(p: u64, n: usize, rng: &mut RandomSource) -> Result<Self> {
        let tau = 2.0 * std::f64::consts::PI;
        let table = (0..table_size(p, n)?)
            .map(|_| Complex64::from_polar(rng.uniform().sqrt(), tau * rng.uniform()))
            .collect();
        Self::new(p, n, table)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FourierSpectrum {
    pub p: u64,
    pub n: usize,
    pub coefficients: Vec<Complex64>,
}

impl FourierSpectrum {
    pub fn l2_squared(&self) -> f64 {
        self.coefficients.iter().map(|c| c.norm_sqr()).sum()
    }

    /// ‖f̂‖₄ = (Σ|f̂|⁴)^{1/4}.
    pub fn l4(&self) -> f64 {
        self.coefficients.iter().map(|c| c.norm_sqr().powi(2)).sum::<f64>().powf(0.25)
    }
}

/// f̂(y) = E_x f(x) ω^{−⟨x,y⟩}.
pub fn fourier(f: &PhaseFunction) -> Result<FourierSpectrum> {
    let mut v = f.table.clone();
    character_transform(&mut v, f.p, f.n, -1)?;
    let n = v.len() as f64;
    for c in &mut v {
        *c /= n;
    }
    Ok(FourierSpectrum {
        p: f.p,
        n: f.n,
        coefficients: v,
    })
}

/// f(x) = Σ_y f̂(y) ω^{⟨x,y⟩}.
pub fn inverse_fourier(s: &FourierSpectrum) -> Result<PhaseFunction> {
    let mut v = s.coefficients.clone();
    character_transform(&mut v, s.p, s.n, 1)?;
    Ok(PhaseFunction {
        p: s.p,
        n: s.n,
        table: v,
    })
}

pub fn mean_square(f: &PhaseFunction) -> f64 {
    f.table.iter().map(|v| v.norm_sqr()).sum::<f64>() / f.len() as f64
}

/// ‖f‖_{U²}⁴ = E_h |E_x Δ_h f(x)|².
fn u2_fourth(f: &PhaseFunction) -> Result<f64> {
    let n = f.len();
    if n <= DIRECT_AUTOCORR_MAX {
        let mut acc = 0.0;
        for h in 0..n {
            let mut s = zero();
            for x in 0..n {
                s += f.table[add(x, h, f.p, f.n)] * f.table[x].conj();
            }
            acc += (s / n as f64).norm_sqr();
        }
        return Ok(acc / n as f64);
    }
    // autocorrelation E_x f(x+h) conj f(x) = Σ_y |f̂(y)|² ω^{⟨h,y⟩}
    let spec = fourier(f)?;
    let mut v: Vec<Complex64> = spec.coefficients.iter().map(|c| Complex64::new(c.norm_sqr(), 0.0)).collect();
    character_transform(&mut v, f.p, f.n, 1)?;
    Ok(v.iter().map(|a| a.norm_sqr()).sum::<f64>() / n as f64)
}

/// Gowers U^d norm for d ∈ {1, 2, 3}.
pub fn gowers_norm(f: &PhaseFunction, d: u32) -> Result<f64> {
    match d {
        1 => Ok((f.table.iter().sum::<Complex64>() / f.len() as f64).norm()),
        2 => Ok(u2_fourth(f)?.max(0.0).powf(0.25)),
        3 => {
            if f.len() > GOWERS_U3_MAX {
                return Err(Error::Capacity(format!("U³ is limited to {GOWERS_U3_MAX} table entries")));
            }
            let mut acc = 0.0;
            for h in 0..f.len() {
                acc += fourier(&f.derivative(h))?.l4().powi(4);
            }
            Ok((acc / f.len() as f64).max(0.0).powf(0.125))
        }
        _ => Err(Error::Validation(format!("Gowers degree {d} is not in {{1, 2, 3}}"))),
    }
}

/// probs[a] = |(Δ_h f)^(a)|².
pub fn fourier_sample_dist(f: &PhaseFunction, h: usize) -> Result<Vec<f64>> {
    if !f.is_unit_modulus() {
        return Err(Error::Validation("Fourier sampling needs a unit-modulus table".into()));
    }
    if h >= f.len() {
        return Err(Error::Validation(format!("shift {h} outside F_p^n")));
    }
    Ok(fourier(&f.derivative(h))?.coefficients.iter().map(|c| c.norm_sqr()).collect())
}

fn sample_index(probs: &[f64], rng: &mut RandomSource) -> usize {
    let u = rng.uniform();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// f(x) = ω^{⟨x,Mx⟩ + ⟨x,b⟩ + c} with M upper triangular.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadraticPhaseParams {
    pub p: u64,
    pub n: usize,
    pub m: Vec<Vec<u64>>,
    pub b: Vec<u64>,
    pub c: u64,
}

impl QuadraticPhaseParams {
    pub fn zero(p: u64, n: usize) -> Self {
        QuadraticPhaseParams {
            p,
            n,
            m: vec![vec![0; n]; n],
            b: vec![0; n],
            c: 0,
        }
    }

    pub fn random(p: u64, n: usize, rng: &mut RandomSource) -> Self {
        let mut q = Self::zero(p, n);
        for i in 0..n {
            let lo = if p == 2 { i + 1 } else { i };
            for j in lo..n {
                q.m[i][j] = rng.random_range(0..p);
            }
            q.b[i] = rng.random_range(0..p);
        }
        q.c = rng.random_range(0..p);
        q
    }

    pub fn quadratic_part(&self, x: &[u64]) -> u64 {
        let mut s = 0;
        for i in 0..self.n {
            for j in i..self.n {
                s = (s + self.m[i][j] * x[i] % self.p * x[j]) % self.p;
            }
        }
        s
    }

    pub fn eval(&self, x: &[u64]) -> u64 {
        let lin: u64 = x.iter().zip(&self.b).map(|(a, b)| a * b % self.p).sum();
        (self.quadratic_part(x) + lin + self.c) % self.p
    }

    pub fn phases(&self) -> Result<Vec<u64>> {
        Ok((0..table_size(self.p, self.n)?).map(|x| self.eval(&digits(x, self.p, self.n))).collect())
    }

    pub fn to_phase_function(&self) -> Result<PhaseFunction> {
        PhaseFunction::from_phases(self.p, self.n, &self.phases()?)
    }

    /// (M + Mᵀ) h.
    pub fn symmetric_times(&self, h: &[u64]) -> Vec<u64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| (self.m[i][j] + self.m[j][i]) * h[j] % self.p).sum::<u64>() % self.p)
            .collect()
    }
}

/// Truth-table oracle that counts queries.
///
/// A Fourier sample of Δ_h f costs p queries, a Bernstein–Vazirani sample and
/// a point evaluation cost one each.
pub struct QueryOracle {
    f: PhaseFunction,
    queries: usize,
}

impl QueryOracle {
    pub fn new(f: PhaseFunction) -> Self {
        QueryOracle { f, queries: 0 }
    }

    pub fn queries(&self) -> usize {
        self.queries
    }

    pub fn function(&self) -> &PhaseFunction {
        &self.f
    }

    pub fn derivative_dist(&mut self, h: usize) -> Result<Vec<f64>> {
        fourier_sample_dist(&self.f, h)
    }

    pub fn sample_derivative(&mut self, dist: &[f64], rng: &mut RandomSource) -> usize {
        self.queries += self.f.p as usize;
        sample_index(dist, rng)
    }

    /// Spectrum weights of f·g for a known phase g.
    pub fn twisted_dist(&mut self, twist: &[Complex64]) -> Result<Vec<f64>> {
        let table = self.f.table.iter().zip(twist).map(|(a, b)| a * b).collect();
        let g = PhaseFunction::new(self.f.p, self.f.n, table)?;
        Ok(fourier(&g)?.coefficients.iter().map(|c| c.norm_sqr()).collect())
    }

    pub fn sample_twisted(&mut self, dist: &[f64], rng: &mut RandomSource) -> usize {
        self.queries += 1;
        sample_index(dist, rng)
    }

    pub fn evaluate(&mut self, x: usize) -> Complex64 {
        self.queries += 1;
        self.f.table[x]
    }
}

fn unit_vector(p: u64, i: usize) -> usize {
    (p as usize).pow(i as u32)
}

fn point_mass(dist: &[f64], what: &str) -> Result<usize> {
    let (best, &mass) = dist
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::Validation("empty table".into()))?;
    if mass < 1.0 - 1e-10 {
        return Err(Error::Model(format!("oracle not quadratic: {what} spectrum is not a delta (max {mass:.6})")));
    }
    Ok(best)
}

/// Upper-triangular M from the columns of S = M + Mᵀ.
fn m_from_symmetric(p: u64, n: usize, cols: &[Vec<u64>]) -> Vec<Vec<u64>> {
    let half = if p == 2 { 0 } else { p.div_ceil(2) };
    let mut m = vec![vec![0; n]; n];
    for j in 0..n {
        for i in 0..j {
            m[i][j] = cols[j][i];
        }
        // S_jj = 2 M_jj, 2⁻¹ = (p+1)/2 for odd p
        m[j][j] = if p == 2 { 0 } else { cols[j][j] * half % p };
    }
    m
}

fn quadratic_twist(p: u64, n: usize, m: &[Vec<u64>]) -> Result<Vec<Complex64>> {
    let q = QuadraticPhaseParams {
        p,
        n,
        m: m.to_vec(),
        b: vec![0; n],
        c: 0,
    };
    let w = omega(p);
    Ok((0..table_size(p, n)?)
        .map(|x| w.powu(((p - q.quadratic_part(&digits(x, p, n))) % p) as u32))
        .collect())
}

fn phase_exponent(v: Complex64, p: u64) -> u64 {
    let w = omega(p);
    (0..p).min_by(|&a, &b| (v - w.powu(a as u32)).norm().total_cmp(&(v - w.powu(b as u32)).norm())).unwrap_or(0)
}

/// Exact learner for a noiseless quadratic phase, using p·n + 2 queries.
pub fn learn_quadratic_noiseless(oracle: &mut QueryOracle, rng: &mut RandomSource) -> Result<QuadraticPhaseParams> {
    let (p, n) = (oracle.f.p, oracle.f.n);
    if !oracle.f.is_polynomial_phase() {
        return Err(Error::Model("oracle is not a polynomial phase".into()));
    }
    let mut cols = Vec::with_capacity(n);
    for i in 0..n {
        let dist = oracle.derivative_dist(unit_vector(p, i))?;
        point_mass(&dist, "derivative")?;
        cols.push(digits(oracle.sample_derivative(&dist, rng), p, n));
    }
    let m = m_from_symmetric(p, n, &cols);
    let twist = quadratic_twist(p, n, &m)?;
    let dist = oracle.twisted_dist(&twist)?;
    point_mass(&dist, "linear")?;
    let b = digits(oracle.sample_twisted(&dist, rng), p, n);
    let c = phase_exponent(oracle.evaluate(0), p);
    Ok(QuadraticPhaseParams { p, n, m, b, c })
}

/// Draws per direction for the unique-radius learner: ⌈ε⁻² log₂ n⌉.
pub fn unique_radius_draws(n: usize, eps: f64) -> usize {
    (eps.powi(-2) * (n.max(2) as f64).log2()).ceil().max(1.0) as usize
}

/// Largest relative distance for which the unique-radius learner is promised.
pub fn unique_radius_bound(eps: f64) -> f64 {
    0.25 - 0.25 * (0.5 + eps).sqrt()
}

/// Most frequent draw; ties broken by drawing more.
fn majority<F: FnMut() -> usize>(m: usize, mut draw: F) -> usize {
    let mut counts: HashMap<usize, usize> = HashMap::new();
    for _ in 0..m {
        *counts.entry(draw()).or_default() += 1;
    }
    loop {
        let top = counts.values().copied().max().unwrap_or(0);
        let leaders: Vec<usize> = counts.iter().filter(|(_, &c)| c == top).map(|(&k, _)| k).collect();
        if leaders.len() == 1 {
            return leaders[0];
        }
        *counts.entry(draw()).or_default() += 1;
    }
}

/// Learner for a binary phase close to a quadratic one.
pub fn learn_quadratic_unique_radius(
    oracle: &mut QueryOracle,
    eps: f64,
    rng: &mut RandomSource,
) -> Result<QuadraticPhaseParams> {
    let (p, n) = (oracle.f.p, oracle.f.n);
    if p != 2 {
        return Err(Error::Validation("the unique-radius learner is implemented for p = 2".into()));
    }
    if !(eps > 0.0 && eps <= 0.5) {
        return Err(Error::Validation(format!("epsilon {eps} is not in (0, 1/2]")));
    }
    let draws = unique_radius_draws(n, eps);
    let mut cols = Vec::with_capacity(n);
    for i in 0..n {
        let dist = oracle.derivative_dist(unit_vector(p, i))?;
        cols.push(digits(majority(draws, || oracle.sample_derivative(&dist, rng)), p, n));
    }
    let m = m_from_symmetric(p, n, &cols);
    let twist = quadratic_twist(p, n, &m)?;
    let dist = oracle.twisted_dist(&twist)?;
    let b_idx = majority(draws, || oracle.sample_twisted(&dist, rng));
    let b = digits(b_idx, p, n);
    let c = majority(draws, || {
        let x = rng.random_range(0..oracle.f.len());
        let v = oracle.evaluate(x) * twist[x];
        let sign = inner(x, b_idx, p, n);
        (phase_exponent(v, p) + sign) as usize % 2
    }) as u64;
    Ok(QuadraticPhaseParams { p, n, m, b, c })
}

/// Number of additive quadruples (a, b, c, d) ∈ A⁴ with a + b = c + d.
pub fn energy(set: &[usize], p: u64, n: usize) -> Result<u64> {
    let size = table_size(p, n)?;
    let mut a: Vec<usize> = set.to_vec();
    a.sort_unstable();
    a.dedup();
    if a.len() > ENERGY_MAX {
        return Err(Error::Capacity(format!("energy is limited to {ENERGY_MAX} elements")));
    }
    if a.iter().any(|&x| x >= size) {
        return Err(Error::Validation("element outside F_p^n".into()));
    }
    let mut sums: HashMap<usize, u64> = HashMap::new();
    for &x in &a {
        for &y in &a {
            *sums.entry(add(x, y, p, n)).or_default() += 1;
        }
    }
    Ok(sums.values().map(|r| r * r).sum())
}

/// Element index from digit vector, little-endian.
pub fn element(d: &[u64], p: u64) -> usize {
    index_of(d, p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_and_linear_spectra() {
        let s = fourier(&PhaseFunction::constant(3, 2).unwrap()).unwrap();
        assert!((s.coefficients[0] - 1.0).norm() < 1e-12);
        assert!(s.coefficients[1..].iter().all(|c| c.norm() < 1e-12));
        let a = element(&[2, 1], 3);
        let phases: Vec<u64> = (0..9).map(|x| inner(x, a, 3, 2)).collect();
        let s = fourier(&PhaseFunction::from_phases(3, 2, &phases).unwrap()).unwrap();
        assert!((s.coefficients[a].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inverse_round_trip_and_parseval() {
        let mut rng = RandomSource::new(1);
        for (p, n) in [(2, 6), (3, 3), (5, 2)] {
            let f = PhaseFunction::random_disc(p, n, &mut rng).unwrap();
            let s = fourier(&f).unwrap();
            assert!((s.l2_squared() - mean_square(&f)).abs() < 1e-10);
            let g = inverse_fourier(&s).unwrap();
            for (a, b) in f.table.iter().zip(&g.table) {
                assert!((a - b).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn gowers_examples() {
        let one = PhaseFunction::constant(2, 4).unwrap();
        for d in 1..=3 {
            assert!((gowers_norm(&one, d).unwrap() - 1.0).abs() < 1e-12);
        }
        let phases: Vec<u64> = (0..9).map(|x| (x % 3) as u64).collect();
        let f = PhaseFunction::from_phases(3, 2, &phases).unwrap();
        assert!(gowers_norm(&f, 1).unwrap() < 1e-12);
        assert!((gowers_norm(&f, 2).unwrap() - 1.0).abs() < 1e-9);
        assert!(gowers_norm(&one, 4).is_err());
    }

    #[test]
    fn u2_both_paths_agree() {
        let mut rng = RandomSource::new(2);
        let f = PhaseFunction::random_unit(2, 13, &mut rng).unwrap();
        let s = fourier(&f).unwrap();
        assert!((gowers_norm(&f, 2).unwrap() - s.l4()).abs() < 1e-10);
    }

    #[test]
    fn sampling_quadratic_is_point_mass() {
        let mut rng = RandomSource::new(3);
        for (p, n) in [(2, 5), (3, 3)] {
            let q = QuadraticPhaseParams::random(p, n, &mut rng);
            let f = q.to_phase_function().unwrap();
            for h in 0..f.len() {
                let dist = fourier_sample_dist(&f, h).unwrap();
                let target = element(&q.symmetric_times(&digits(h, p, n)), p);
                assert!(dist[target] > 1.0 - 1e-10);
            }
        }
        let bad = PhaseFunction::new(2, 1, vec![Complex64::new(0.5, 0.0); 2]).unwrap();
        assert!(fourier_sample_dist(&bad, 0).is_err());
    }

    #[test]
    fn noiseless_learner() {
        let mut rng = RandomSource::new(4);
        let mut o = QueryOracle::new(PhaseFunction::constant(2, 3).unwrap());
        assert_eq!(learn_quadratic_noiseless(&mut o, &mut rng).unwrap(), QuadraticPhaseParams::zero(2, 3));
        for (p, n) in [(2, 6), (3, 3), (5, 2)] {
            let q = QuadraticPhaseParams::random(p, n, &mut rng);
            let mut o = QueryOracle::new(q.to_phase_function().unwrap());
            assert_eq!(learn_quadratic_noiseless(&mut o, &mut rng).unwrap(), q);
            assert_eq!(o.queries(), p as usize * n + 2);
        }
        let f = PhaseFunction::random_unit(2, 3, &mut rng).unwrap();
        assert!(matches!(learn_quadratic_noiseless(&mut QueryOracle::new(f), &mut rng), Err(Error::Model(_))));
    }

    #[test]
    fn unique_radius_clean_matches_noiseless() {
        let mut rng = RandomSource::new(5);
        let q = QuadraticPhaseParams::random(2, 6, &mut rng);
        let f = q.to_phase_function().unwrap();
        let got = learn_quadratic_unique_radius(&mut QueryOracle::new(f), 0.3, &mut rng).unwrap();
        assert_eq!(got, q);
        assert_eq!(unique_radius_draws(8, 0.3), 34);
    }

    #[test]
    fn energy_examples() {
        let sub: Vec<usize> = (0..8).collect();
        assert_eq!(energy(&sub, 2, 4).unwrap(), 512);
        assert_eq!(energy(&[5], 2, 4).unwrap(), 1);
    }
}
