use laqcc::circuit::{for_each_branch, run, Program};
use laqcc::primitives::{fanout_program, ghz_laqcc_program};
use laqcc::{QuantumState, RandomSource};

#[test]
fn ghz_protocol_width_accounting() {
    let p = ghz_laqcc_program(6);
    assert_eq!(p.cost().peak_width, 11);
    let (s, _) = run(&p, QuantumState::new(), &mut RandomSource::new(3)).unwrap();
    assert_eq!(s.width(), 6);
}

#[test]
fn expanded_depth_is_constant() {
    let d: Vec<usize> = (2..=10).map(|n| ghz_laqcc_program(n).cost().quantum_depth).collect();
    assert!(d.windows(2).all(|w| w[0] == w[1]), "{d:?}");
    let f: Vec<usize> = (2..=10).map(|n| fanout_program(n).cost().quantum_depth).collect();
    assert!(f.windows(2).all(|w| w[0] == w[1]), "{f:?}");
}

#[test]
fn branch_probabilities_sum_to_one() {
    let p = ghz_laqcc_program(5);
    let mut total = 0.0;
    let mut first: Option<QuantumState> = None;
    let count = for_each_branch(&p, QuantumState::new(), 1 << 12, |b| {
        total += b.probability;
        if let Some(f) = &first {
            assert!(b.state.fidelity(f)? > 1.0 - 1e-10);
        } else {
            first = Some(b.state);
        }
        Ok(())
    })
    .unwrap();
    assert_eq!(count, 16);
    assert!((total - 1.0).abs() < 1e-10);
}

#[test]
fn programs_round_trip_through_json() {
    let p = fanout_program(4);
    let text = serde_json::to_string_pretty(&p).unwrap();
    let q: Program = serde_json::from_str(&text).unwrap();
    assert_eq!(p, q);
    q.validate().unwrap();
}

#[test]
fn seeded_runs_repeat() {
    let p = ghz_laqcc_program(7);
    let (a, ta) = run(&p, QuantumState::new(), &mut RandomSource::new(42)).unwrap();
    let (b, tb) = run(&p, QuantumState::new(), &mut RandomSource::new(42)).unwrap();
    assert_eq!(ta, tb);
    assert_eq!(a.dump(), b.dump());
}
