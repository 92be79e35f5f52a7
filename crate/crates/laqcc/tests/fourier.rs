use laqcc::fourier::*;
use laqcc::transform::{add, table_size};
use laqcc::RandomSource;

#[test]
fn parseval_and_inverse() {
    let mut rng = RandomSource::new(1);
    for (p, n) in [(2u64, 6usize), (3, 4), (5, 3)] {
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
fn gowers_norms_nest_and_detect_degree() {
    let mut rng = RandomSource::new(2);
    for (p, n) in [(2u64, 6usize), (3, 4)] {
        for _ in 0..5 {
            let f = PhaseFunction::random_unit(p, n, &mut rng).unwrap();
            let u: Vec<f64> = (1..=3).map(|d| gowers_norm(&f, d).unwrap()).collect();
            assert!(u[0] <= u[1] + 1e-12 && u[1] <= u[2] + 1e-12, "{u:?}");
            let s = fourier(&f).unwrap();
            assert!((u[1] - s.l4()).abs() < 1e-9);
        }
        let q = QuadraticPhaseParams::random(p, n, &mut rng).to_phase_function().unwrap();
        assert!((gowers_norm(&q, 3).unwrap() - 1.0).abs() < 1e-9);
        let mut lin = QuadraticPhaseParams::random(p, n, &mut rng);
        lin.m = vec![vec![0; n]; n];
        let l = lin.to_phase_function().unwrap();
        assert!((gowers_norm(&l, 2).unwrap() - 1.0).abs() < 1e-9);
        assert!((gowers_norm(&PhaseFunction::constant(p, n).unwrap(), 1).unwrap() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn fourier_sampling_is_a_distribution() {
    let mut rng = RandomSource::new(3);
    let f = PhaseFunction::random_unit(3, 3, &mut rng).unwrap();
    for h in [0, 1, 5, 26] {
        let d = fourier_sample_dist(&f, h).unwrap();
        assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        assert!(d.iter().all(|&v| v >= -1e-15));
    }
}

#[test]
fn noiseless_learner_over_several_fields() {
    let mut rng = RandomSource::new(4);
    for (p, n) in [(2u64, 7usize), (3, 4), (5, 3), (7, 2)] {
        for _ in 0..10 {
            let q = QuadraticPhaseParams::random(p, n, &mut rng);
            let mut oracle = QueryOracle::new(q.to_phase_function().unwrap());
            let learned = learn_quadratic_noiseless(&mut oracle, &mut rng).unwrap();
            assert_eq!(learned.phases().unwrap(), q.phases().unwrap());
            assert_eq!(oracle.queries(), p as usize * n + 2);
        }
    }
}

#[test]
fn unique_radius_learner_within_promise() {
    let mut rng = RandomSource::new(5);
    let eps = 0.3;
    let delta = unique_radius_bound(eps) * 0.9;
    for _ in 0..20 {
        let q = QuadraticPhaseParams::random(2, 8, &mut rng);
        let f = q.to_phase_function().unwrap().corrupt(delta, &mut rng).unwrap();
        let mut oracle = QueryOracle::new(f);
        let learned = learn_quadratic_unique_radius(&mut oracle, eps, &mut rng).unwrap();
        assert_eq!(learned.phases().unwrap(), q.phases().unwrap());
    }
}

#[test]
fn energy_matches_brute_force() {
    let mut rng = RandomSource::new(6);
    for trial in 0..20 {
        let (p, n) = if trial % 2 == 0 { (2u64, 5usize) } else { (3, 3) };
        let size = table_size(p, n).unwrap();
        let set: Vec<usize> = rand::seq::index::sample(&mut rng, size, 3 + trial % 7).into_vec();
        let mut brute = 0u64;
        for &a in &set {
            for &b in &set {
                for &c in &set {
                    for &d in &set {
                        brute += u64::from(add(a, b, p, n) == add(c, d, p, n));
                    }
                }
            }
        }
        assert_eq!(energy(&set, p, n).unwrap(), brute);
    }
}
