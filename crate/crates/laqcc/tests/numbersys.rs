use laqcc::numbersys::*;
use num_bigint::BigUint;

#[test]
fn combinatorial_round_trip_and_bounds() {
    for k in 1..=6 {
        for m in 0u32..2000 {
            let c = int_to_comb(&BigUint::from(m), k);
            assert_eq!(c.digits.len(), k);
            assert!(c.digits.windows(2).all(|w| w[0] > w[1]));
            assert_eq!(comb_to_int(&c), BigUint::from(m));
        }
    }
}

#[test]
fn factoradic_bijection() {
    for n in 1..=7 {
        let all = Factoradic::all(n);
        assert_eq!(all.len(), (1..=n).product::<usize>());
        for (m, f) in all.iter().enumerate() {
            f.check().unwrap();
            assert_eq!(factoradic_to_int(f), BigUint::from(m));
        }
    }
    let big = factorial(30) - 1u32;
    let f = int_to_factoradic(&big, 30).unwrap();
    assert!((0..30).all(|j| f.y(j) == j));
    assert!(int_to_factoradic(&factorial(5), 5).is_err());
}

#[test]
fn fact_to_comb_hits_every_weight_k_string_equally() {
    for n in 1..=7 {
        for k in 1..=n {
            let mut counts = std::collections::HashMap::new();
            for y in Factoradic::all(n) {
                let s = fact_to_comb(&y, k).unwrap();
                assert_eq!((s.n(), s.k()), (n, k));
                *counts.entry(s).or_insert(0usize) += 1;
            }
            let c = binomial(n, k);
            assert_eq!(BigUint::from(counts.len()), c);
            let per = factorial(k) * factorial(n - k);
            assert!(counts.values().all(|&v| BigUint::from(v) == per));
        }
    }
}

#[test]
fn decompose_then_recombine() {
    for n in 1..=7 {
        for k in 1..=n {
            for y in Factoradic::all(n) {
                let (s, x, z) = decompose_fact(&y, k).unwrap();
                assert_eq!((x.n(), z.n()), (k, n - k));
                assert_eq!(comb_to_fact(&s, &x, &z).unwrap(), y);
            }
        }
    }
}

#[test]
fn rank_unrank_weight_k() {
    for n in 1..=10 {
        for k in 0..=n {
            let total: u64 = binomial(n, k).try_into().unwrap();
            let mut prev = None;
            for m in 0..total {
                let s = unrank_weightk(&BigUint::from(m), n, k).unwrap();
                assert_eq!(rank_weightk(&s), BigUint::from(m));
                assert!(prev.as_ref().is_none_or(|p: &WeightKString| p.to_string() != s.to_string()));
                prev = Some(s);
            }
            assert!(unrank_weightk(&BigUint::from(total), n, k).is_err());
        }
    }
}

#[test]
fn worked_example() {
    let y = Factoradic::new(vec![1, 0, 0]).unwrap();
    assert_eq!(fact_to_comb(&y, 1).unwrap().to_string(), "010");
}
