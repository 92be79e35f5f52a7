use laqcc::primitives::Mode;
use laqcc::stateprep::*;
use laqcc::RandomSource;

fn spec(family: Family, n: usize, k: Option<usize>, q: Option<usize>, mode: Mode) -> StateSpec {
    StateSpec { family, n, k, q, mode }
}

#[test]
fn every_branch_prepares_the_target() {
    let cases = [
        spec(Family::W, 3, None, None, Mode::Expanded),
        spec(Family::W, 5, None, None, Mode::Ideal),
        spec(Family::Ghz, 4, None, None, Mode::Expanded),
        spec(Family::UniformQ, 1, None, Some(5), Mode::Ideal),
        spec(Family::DickeSmallK, 4, Some(2), None, Mode::Ideal),
        spec(Family::DickeFactoradic, 4, Some(2), None, Mode::Ideal),
    ];
    for s in cases {
        let out = prepare_all_branches(&s, 1 << 16).unwrap();
        let dev = uniformity_deviation(&out.state, &s.support().unwrap());
        assert!(dev < 1e-10, "{s:?}: {dev}");
        assert!(out.worst_agreement > 1.0 - 1e-10, "{s:?}");
    }
}

#[test]
fn sampled_preparations_are_uniform() {
    let mut rng = RandomSource::new(9);
    for q in [1, 3, 6, 7, 12, 33] {
        let s = prepare_uniform_q(q, Mode::Ideal, &mut rng).unwrap();
        let sup: Vec<usize> = (0..q).collect();
        assert!(uniformity_deviation(&s, &sup) < 1e-10, "q = {q}");
    }
    for n in 2..=5 {
        for k in 1..n {
            let s = spec(Family::DickeFactoradic, n, Some(k), None, Mode::Ideal);
            let st = prepare(&s, &mut rng).unwrap();
            assert!(uniformity_deviation(&st, &s.support().unwrap()) < 1e-10);
        }
    }
    let too_big = spec(Family::DickeFactoradic, 6, Some(3), None, Mode::Ideal);
    assert!(matches!(prepare(&too_big, &mut rng), Err(laqcc::Error::Capacity(_))));
}

#[test]
fn invalid_specs_are_rejected() {
    assert!(spec(Family::DickeSmallK, 3, Some(4), None, Mode::Ideal).validate().is_err());
    assert!(spec(Family::DickeSmallK, 3, None, None, Mode::Ideal).validate().is_err());
    assert!(spec(Family::UniformQ, 1, None, Some(0), Mode::Ideal).validate().is_err());
    assert!("zeta".parse::<Family>().is_err());
}
