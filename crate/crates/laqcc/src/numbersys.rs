//! Combinatorial number system and factoradics, in exact integer arithmetic.

use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Binomial coefficient C(n, k), zero when k > n.
pub fn binomial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut r = BigUint::one();
    for i in 0..k {
        r = r * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    r
}

pub fn factorial(n: usize) -> BigUint {
    (1..=n).fold(BigUint::one(), |a, i| a * BigUint::from(i))
}

/// m = Σ C(c_i, i) with strictly decreasing digits (c_k, …, c_1).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CombIndex {
    pub k: usize,
    pub digits: Vec<usize>,
}

impl CombIndex {
    pub fn new(digits: Vec<usize>) -> Result<Self> {
        if digits.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::Validation(format!("digits {digits:?} are not strictly decreasing")));
        }
        Ok(CombIndex {
            k: digits.len(),
            digits,
        })
    }

    pub fn value(&self) -> BigUint {
        comb_to_int(self)
    }
}

/// Greedy decomposition: pick the largest c_k with C(c_k, k) ≤ m, then recurse.
pub fn int_to_comb(m: &BigUint, k: usize) -> CombIndex {
    let mut rest = m.clone();
    let mut digits = Vec::with_capacity(k);
    for i in (1..=k).rev() {
        // C(c, i) is increasing in c for c ≥ i − 1; start at i − 1 where it is 0
        let mut c = i - 1;
        let mut lo = i - 1;
        let mut step = 1usize;
        while binomial(c + step, i) <= rest {
            lo = c + step;
            c += step;
            step *= 2;
        }
        let mut hi = c + step;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if binomial(mid, i) <= rest {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        rest -= binomial(lo, i);
        digits.push(lo);
    }
    CombIndex { k, digits }
}

pub fn comb_to_int(c: &CombIndex) -> BigUint {
    c.digits
        .iter()
        .enumerate()
        .map(|(j, &d)| binomial(d, c.k - j))
        .fold(BigUint::zero(), |a, b| a + b)
}

/// n-factoradic, digits stored most significant first: (y_{n−1}, …, y_0) with 0 ≤ y_j ≤ j.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Factoradic {
    pub digits: Vec<usize>,
}

impl Factoradic {
    pub fn new(digits: Vec<usize>) -> Result<Self> {
        let f = Factoradic { digits };
        f.check()?;
        Ok(f)
    }

    pub fn n(&self) -> usize {
        self.digits.len()
    }

    /// Digit y_j.
    pub fn y(&self, j: usize) -> usize {
        self.digits[self.n() - 1 - j]
    }

    pub fn check(&self) -> Result<()> {
        for j in 0..self.n() {
            if self.y(j) > j {
                return Err(Error::Validation(format!("factoradic digit y_{j} = {} exceeds {j}", self.y(j))));
            }
        }
        Ok(())
    }

    /// Build from digits indexed by weight: `by_weight[j] = y_j`.
    pub fn from_weights(by_weight: Vec<usize>) -> Result<Self> {
        let mut d = by_weight;
        d.reverse();
        Self::new(d)
    }

    /// All n-factoradics in increasing value order.
    pub fn all(n: usize) -> Vec<Factoradic> {
        let total: usize = (1..=n).product();
        (0..total)
            .map(|m| int_to_factoradic(&BigUint::from(m), n).expect("in range"))
            .collect()
    }
}

impl fmt::Display for Factoradic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.digits.iter().map(|d| d.to_string()).collect();
        write!(f, "({})", s.join(","))
    }
}

pub fn int_to_factoradic(m: &BigUint, n: usize) -> Result<Factoradic> {
    if *m >= factorial(n) {
        return Err(Error::Range(format!("{m} is not below {n}!")));
    }
    let mut rest = m.clone();
    let mut by_weight = vec![0usize; n];
    for (j, slot) in by_weight.iter_mut().enumerate() {
        let base = BigUint::from(j + 1);
        *slot = (&rest % &base).to_usize().expect("small digit");
        rest /= base;
    }
    Factoradic::from_weights(by_weight)
}

pub fn factoradic_to_int(y: &Factoradic) -> BigUint {
    let mut acc = BigUint::zero();
    for j in (0..y.n()).rev() {
        acc = acc * BigUint::from(j + 1) + BigUint::from(y.y(j));
    }
    acc
}

/// Bit string with a fixed weight; `bits[p]` is position p, position 0 being
/// the rightmost character of the printed form.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct WeightKString {
    pub bits: Vec<bool>,
}

impl WeightKString {
    pub fn n(&self) -> usize {
        self.bits.len()
    }

    pub fn k(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Parse a string written most significant position first.
    pub fn parse(s: &str) -> Result<Self> {
        let mut bits = Vec::with_capacity(s.len());
        for ch in s.chars().rev() {
            bits.push(match ch {
                '0' => false,
                '1' => true,
                _ => return Err(Error::Validation(format!("bad bit character {ch:?}"))),
            });
        }
        Ok(WeightKString { bits })
    }

    /// Positions as an integer mask (needs n ≤ 64).
    pub fn to_mask(&self) -> u64 {
        self.bits.iter().enumerate().fold(0, |a, (i, &b)| a | ((b as u64) << i))
    }

    pub fn from_mask(mask: u64, n: usize) -> Self {
        WeightKString {
            bits: (0..n).map(|i| mask >> i & 1 == 1).collect(),
        }
    }
}

impl fmt::Display for WeightKString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in self.bits.iter().rev() {
            write!(f, "{}", if b { '1' } else { '0' })?;
        }
        Ok(())
    }
}

/// Algorithm A: scanning positions n−1 down to 0 with H ones written so far,
/// position p gets a 1 iff y_p < k − H.
pub fn fact_to_comb(y: &Factoradic, k: usize) -> Result<WeightKString> {
    let n = y.n();
    if k > n {
        return Err(Error::Validation(format!("k = {k} exceeds n = {n}")));
    }
    y.check()?;
    let mut bits = vec![false; n];
    let mut h = 0;
    for p in (0..n).rev() {
        if y.y(p) + h < k {
            bits[p] = true;
            h += 1;
        }
    }
    Ok(WeightKString { bits })
}

/// Inverse of algorithm A: given the string `s`, a k-factoradic `x` and an
/// (n−k)-factoradic `z`, build the n-factoradic y with A(y) = s.
///
/// A 1 at a position where H ones were already written takes y = X_{k−H−1};
/// a 0 after `zeros` earlier zeros takes y = k − H + Z_{n−k−1−zeros}.
pub fn comb_to_fact(s: &WeightKString, x: &Factoradic, z: &Factoradic) -> Result<Factoradic> {
    let n = s.n();
    let k = s.k();
    if x.n() != k || z.n() != n - k {
        return Err(Error::Validation(format!(
            "need a {k}-factoradic and an {}-factoradic, got {} and {}",
            n - k,
            x.n(),
            z.n()
        )));
    }
    x.check()?;
    z.check()?;
    let mut by_weight = vec![0usize; n];
    let (mut h, mut zeros) = (0, 0);
    for p in (0..n).rev() {
        if s.bits[p] {
            by_weight[p] = x.y(k - h - 1);
            h += 1;
        } else {
            by_weight[p] = k - h + z.y(n - k - 1 - zeros);
            zeros += 1;
        }
    }
    Factoradic::from_weights(by_weight)
}

/// Inverse of [`comb_to_fact`]: y ↦ (A(y), X, Z).
pub fn decompose_fact(y: &Factoradic, k: usize) -> Result<(WeightKString, Factoradic, Factoradic)> {
    let s = fact_to_comb(y, k)?;
    let n = y.n();
    let mut xw = vec![0usize; k];
    let mut zw = vec![0usize; n - k];
    let (mut h, mut zeros) = (0, 0);
    for p in (0..n).rev() {
        if s.bits[p] {
            xw[k - h - 1] = y.y(p);
            h += 1;
        } else {
            zw[n - k - 1 - zeros] = y.y(p) - (k - h);
            zeros += 1;
        }
    }
    Ok((s, Factoradic::from_weights(xw)?, Factoradic::from_weights(zw)?))
}

/// Lexicographic rank of a weight-k string among all weight-k strings of its length.
pub fn rank_weightk(s: &WeightKString) -> BigUint {
    let ones: Vec<usize> = (0..s.n()).rev().filter(|&p| s.bits[p]).collect();
    comb_to_int(&CombIndex {
        k: ones.len(),
        digits: ones,
    })
}

/// The m-th (from 0) weight-k string of length n in lexicographic order.
pub fn unrank_weightk(m: &BigUint, n: usize, k: usize) -> Result<WeightKString> {
    if k > n {
        return Err(Error::Range(format!("k = {k} exceeds n = {n}")));
    }
    if *m >= binomial(n, k) {
        return Err(Error::Range(format!("rank {m} is not below C({n},{k})")));
    }
    let c = int_to_comb(m, k);
    let mut bits = vec![false; n];
    for d in c.digits {
        bits[d] = true;
    }
    Ok(WeightKString { bits })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(x: usize) -> BigUint {
        BigUint::from(x)
    }

    #[test]
    fn comb_examples() {
        assert_eq!(int_to_comb(&b(0), 3).digits, vec![2, 1, 0]);
        assert_eq!(int_to_comb(&b(5), 2).digits, vec![3, 2]);
    }

    fn decreasing_tuples(k: usize, below: usize, acc: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if acc.len() == k {
            out.push(acc.clone());
            return;
        }
        for v in (k - acc.len() - 1)..below {
            acc.push(v);
            decreasing_tuples(k, v, acc, out);
            acc.pop();
        }
    }

    #[test]
    fn greedy_matches_exhaustive_search() {
        let limit = 10_000usize;
        for k in 1..=6 {
            let mut l = k;
            while binomial(l, k) < b(limit) {
                l += 1;
            }
            let mut all = Vec::new();
            decreasing_tuples(k, l, &mut Vec::new(), &mut all);
            let mut by_value: Vec<Option<Vec<usize>>> = vec![None; limit];
            for t in all {
                let v = comb_to_int(&CombIndex { k, digits: t.clone() }).to_usize().unwrap();
                if v < limit {
                    assert!(by_value[v].is_none(), "two representations of {v}");
                    by_value[v] = Some(t);
                }
            }
            for (m, t) in by_value.into_iter().enumerate() {
                assert_eq!(Some(int_to_comb(&b(m), k).digits), t, "m={m} k={k}");
            }
        }
    }

    #[test]
    fn comb_round_trip() {
        for k in 1..=6 {
            for m in 0..10_000usize {
                assert_eq!(comb_to_int(&int_to_comb(&b(m), k)), b(m));
            }
        }
    }

    #[test]
    fn factoradic_examples() {
        assert_eq!(int_to_factoradic(&b(0), 4).unwrap().digits, vec![0, 0, 0, 0]);
        assert_eq!(int_to_factoradic(&b(5), 3).unwrap().digits, vec![2, 1, 0]);
        assert_eq!(int_to_factoradic(&b(23), 4).unwrap().digits, vec![3, 2, 1, 0]);
        assert!(matches!(int_to_factoradic(&b(6), 3), Err(Error::Range(_))));
    }

    #[test]
    fn algorithm_a_examples() {
        let y = Factoradic::new(vec![0, 1, 0]).unwrap();
        assert_eq!(fact_to_comb(&y, 1).unwrap().to_string(), "100");
        let y = Factoradic::new(vec![1, 0, 0]).unwrap();
        assert_eq!(fact_to_comb(&y, 1).unwrap().to_string(), "010");
    }

    #[test]
    fn all_ones_determined_by_x() {
        let s = WeightKString::parse("111").unwrap();
        let z = Factoradic::new(vec![]).unwrap();
        for x in Factoradic::all(3) {
            let y = comb_to_fact(&s, &x, &z).unwrap();
            assert_eq!(y, x);
        }
    }

    #[test]
    fn rank_examples() {
        assert_eq!(unrank_weightk(&b(0), 4, 2).unwrap().to_string(), "0011");
        assert!(matches!(unrank_weightk(&b(6), 4, 2), Err(Error::Range(_))));
        let total = binomial(10, 4).to_usize().unwrap();
        let mut prev: Option<String> = None;
        for m in 0..total {
            let s = unrank_weightk(&b(m), 10, 4).unwrap();
            assert_eq!(rank_weightk(&s), b(m));
            let t = s.to_string();
            if let Some(p) = &prev {
                assert!(p < &t);
            }
            prev = Some(t);
        }
    }
}
