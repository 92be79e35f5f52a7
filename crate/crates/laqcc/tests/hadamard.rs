use laqcc::hadamard::*;
use laqcc::RandomSource;

#[test]
fn binary_success_law() {
    let mut rng = RandomSource::new(1);
    for k in 2..=8 {
        for delta in [0.0, 0.05, 0.1, 0.2, 0.3] {
            let x = Message::random(2, k, &mut rng);
            let c = encode(&x);
            let y = corrupt(&c, &NoiseModel::WorstCase { delta }, &mut rng).unwrap();
            let d = distance(&c, &y) as f64;
            let dist = decode_distribution(&y).unwrap();
            let want = (1.0 - 2.0 * d / c.len() as f64).powi(2);
            assert!((dist.probs[x.index()] - want).abs() < 1e-12);
            assert!((dist.probs.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }
}

#[test]
fn odd_characteristic_noiseless_is_exact() {
    let mut rng = RandomSource::new(2);
    for (p, k) in [(3u64, 3usize), (5, 2), (7, 2)] {
        let x = Message::random(p, k, &mut rng);
        let dist = decode_distribution(&encode(&x)).unwrap();
        assert!((dist.probs[x.index()] - 1.0).abs() < 1e-10);
        let y = corrupt(&encode(&x), &NoiseModel::Symmetric { bias: 0.6 }, &mut rng).unwrap();
        let dist = decode_distribution(&y).unwrap();
        assert!((dist.probs.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }
}

#[test]
fn circuit_matches_analytic_distribution() {
    let mut rng = RandomSource::new(3);
    let x = Message::random(2, 3, &mut rng);
    let y = corrupt(&encode(&x), &NoiseModel::WorstCase { delta: 0.125 }, &mut rng).unwrap();
    let circuit = circuit_distribution(&y).unwrap();
    let exact = decode_distribution(&y).unwrap();
    assert!(total_variation(&circuit, &exact.probs) < 1e-9);
}

#[test]
fn list_decoding_keeps_the_message() {
    let mut rng = RandomSource::new(4);
    let eps = 0.25;
    assert_eq!(list_decode_runs(eps), 178);
    for _ in 0..20 {
        let x = Message::random(2, 8, &mut rng);
        let delta = 0.5 - eps - 0.01;
        let y = corrupt(&encode(&x), &NoiseModel::WorstCase { delta }, &mut rng).unwrap();
        let list = list_decode(&y, eps, &mut rng).unwrap();
        assert!(list.contains(&x));
        assert!(list.len() <= list_decode_runs(eps));
    }
}

#[test]
fn codeword_files_validate() {
    let c: Codeword = serde_json::from_str(r#"{"p":2,"k":2,"values":[0,1,1,0]}"#).unwrap();
    c.validate().unwrap();
    let bad: Codeword = serde_json::from_str(r#"{"p":2,"k":2,"values":[0,1,1]}"#).unwrap();
    assert!(bad.validate().is_err());
    let four: Codeword = serde_json::from_str(r#"{"p":4,"k":1,"values":[0,1,1,0]}"#).unwrap();
    assert!(four.validate().is_err());
}
