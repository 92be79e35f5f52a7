//! Character transform over F_p^k with little-endian digit indexing
//! (index = Σ y_i p^i).

use num_complex::Complex64;

use crate::{Error, Result};

/// Largest table handled by the transforms.
pub const MAX_TABLE: usize = 1 << 24;

/// Primitive p-th root of unity ω_p = e^{2πi/p}.
pub fn omega(p: u64) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI / p as f64)
}

pub fn is_prime(p: u64) -> bool {
    p >= 2 && (2..).take_while(|d| d * d <= p).all(|d| p % d != 0)
}

/// p^k, failing past [`MAX_TABLE`].
pub fn table_size(p: u64, k: usize) -> Result<usize> {
    let mut n: usize = 1;
    for _ in 0..k {
        n = n
            .checked_mul(p as usize)
            .filter(|&v| v <= MAX_TABLE)
            .ok_or_else(|| Error::Capacity(format!("{p}^{k} entries exceeds the table limit {MAX_TABLE}")))?;
    }
    Ok(n)
}

/// Digits of `index` in base p, least significant first.
pub fn digits(mut index: usize, p: u64, k: usize) -> Vec<u64> {
    let mut d = Vec::with_capacity(k);
    for _ in 0..k {
        d.push((index % p as usize) as u64);
        index /= p as usize;
    }
    d
}

pub fn index_of(d: &[u64], p: u64) -> usize {
    d.iter().rev().fold(0usize, |a, &x| a * p as usize + x as usize)
}

/// ⟨a, b⟩ mod p for two table indices.
pub fn inner(a: usize, b: usize, p: u64, k: usize) -> u64 {
    if p == 2 {
        return ((a & b).count_ones() & 1) as u64;
    }
    let (mut a, mut b, mut s) = (a, b, 0u64);
    for _ in 0..k {
        s += (a % p as usize) as u64 * (b % p as usize) as u64;
        a /= p as usize;
        b /= p as usize;
    }
    s % p
}

/// Digitwise sum of two table indices.
pub fn add(a: usize, b: usize, p: u64, k: usize) -> usize {
    if p == 2 {
        return a ^ b;
    }
    let (mut a, mut b, mut out, mut w) = (a, b, 0usize, 1usize);
    let pu = p as usize;
    for _ in 0..k {
        out += ((a % pu + b % pu) % pu) * w;
        a /= pu;
        b /= pu;
        w *= pu;
    }
    out
}

/// Unnormalized transform in place: v[z] ← Σ_y v[y] ω^{sign·⟨y,z⟩}.
///
/// One radix-p butterfly pass per digit; p = 2 is the Walsh–Hadamard transform.
pub fn character_transform(v: &mut [Complex64], p: u64, k: usize, sign: i32) -> Result<()> {
    let n = table_size(p, k)?;
    if v.len() != n {
        return Err(Error::Validation(format!("table has {} entries, expected {n}", v.len())));
    }
    let pu = p as usize;
    if pu == 2 {
        let mut h = 1;
        while h < n {
            for i in (0..n).step_by(2 * h) {
                for j in i..i + h {
                    let (a, b) = (v[j], v[j + h]);
                    v[j] = a + b;
                    v[j + h] = a - b;
                }
            }
            h *= 2;
        }
        return Ok(());
    }
    let w = omega(p);
    let roots: Vec<Complex64> = (0..pu)
        .map(|e| if sign >= 0 { w.powu(e as u32) } else { w.powu(e as u32).conj() })
        .collect();
    let mut buf = vec![Complex64::new(0.0, 0.0); pu];
    let mut stride = 1;
    for _ in 0..k {
        for base in 0..n {
            if (base / stride) % pu != 0 {
                continue;
            }
            for (a, slot) in buf.iter_mut().enumerate() {
                *slot = v[base + a * stride];
            }
            for z in 0..pu {
                let mut s = Complex64::new(0.0, 0.0);
                for (y, &b) in buf.iter().enumerate() {
                    s += b * roots[(y * z) % pu];
                }
                v[base + z * stride] = s;
            }
        }
        stride *= pu;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(v: &[Complex64], p: u64, k: usize, sign: i32) -> Vec<Complex64> {
        let w = omega(p);
        (0..v.len())
            .map(|z| {
                (0..v.len())
                    .map(|y| {
                        let e = inner(y, z, p, k) as u32;
                        let r = w.powu(e);
                        v[y] * if sign >= 0 { r } else { r.conj() }
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn matches_naive_sum() {
        for (p, k) in [(2u64, 4usize), (3, 3), (5, 2)] {
            let n = table_size(p, k).unwrap();
            let v: Vec<Complex64> = (0..n).map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.7).cos())).collect();
            for sign in [1, -1] {
                let mut f = v.clone();
                character_transform(&mut f, p, k, sign).unwrap();
                for (a, b) in f.iter().zip(naive(&v, p, k, sign)) {
                    assert!((a - b).norm() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn digits_round_trip() {
        assert_eq!(digits(5, 3, 3), vec![2, 1, 0]);
        assert_eq!(index_of(&[2, 1, 0], 3), 5);
        // (2,1) + (1,1) = (0,2)
        assert_eq!(add(5, 4, 3, 2), 6);
        assert!(is_prime(7) && !is_prime(9));
    }
}
