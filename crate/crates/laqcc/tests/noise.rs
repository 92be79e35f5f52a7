use laqcc::noise::*;
use laqcc::stateprep::{ghz_all_program, ghz_linear_program};
use laqcc::RandomSource;

#[test]
fn exponents_nonnegative_over_range() {
    for n in 2..=128usize {
        for p in Protocol::ALL {
            if p == Protocol::WLaqcc && !n.is_power_of_two() {
                continue;
            }
            if p.needs_k() {
                for k in (1..=n).filter(|k| n % k == 0) {
                    success_expr(p, n, Some(k)).unwrap();
                }
            } else {
                success_expr(p, n, None).unwrap();
            }
        }
    }
}

#[test]
fn all_to_all_never_worse_than_linear() {
    let params = DeviceParams::uniform(0.99);
    for n in 2..=128usize {
        let all = evaluate(&success_expr(Protocol::GhzAll, n, None).unwrap(), &params).probability;
        let lin = evaluate(&success_expr(Protocol::GhzLinear, n, None).unwrap(), &params).probability;
        if n <= 6 {
            assert!((all - lin).abs() < 1e-15, "n = {n}");
        } else {
            assert!(all > lin, "n = {n}");
        }
    }
}

#[test]
fn ghz_linear_bernoulli_matches_two_qubit_loss() {
    let mut params = DeviceParams::ideal();
    params.p_d = 0.99;
    let tally = EventTally::from_program(&ghz_linear_program(6)).unwrap();
    let expected = 0.99f64.powi(5);
    assert!((tally.closed_form(&params) - expected).abs() < 1e-12);
    let mc = monte_carlo_bernoulli(&tally, &params, 100_000, &RandomSource::new(21)).unwrap();
    assert!(mc.within(expected, 4.0), "{mc:?}");
}

#[test]
fn program_tally_agrees_with_closed_form_counts() {
    for n in 2..=8 {
        let t = EventTally::from_program(&ghz_all_program(n)).unwrap();
        let e = success_expr(Protocol::GhzAll, n, None).unwrap();
        assert_eq!(t.counts[..3], e.exponents[..3], "n = {n}");
    }
}

#[test]
fn single_error_destroys_ghz() {
    let program = ghz_all_program(4);
    let mut rng = RandomSource::new(5);
    let survivors = (0..1000)
        .filter(|_| single_injection_fidelity(&program, &mut rng).unwrap() > 0.9999)
        .count();
    assert_eq!(survivors, 0);
}

#[test]
fn haar_monte_carlo_matches_tally() {
    let program = ghz_all_program(4);
    let params = DeviceParams::uniform(0.97);
    let expected = EventTally::from_program(&program).unwrap().closed_form(&params);
    let mc = monte_carlo_haar(&program, &params, 20_000, &RandomSource::new(8)).unwrap();
    assert!(mc.within(expected, 4.0), "{mc:?} vs {expected}");
}

#[test]
fn device_files_load() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../devices/brisbane.toml");
    let d = DeviceParams::load(&path).unwrap();
    let b = DeviceParams::brisbane();
    for (x, y) in d.probs().iter().zip(b.probs()) {
        assert!((x - y).abs() < 1e-12);
    }
    let lin = evaluate(&success_expr(Protocol::GhzLinear, 55, None).unwrap(), &d).probability;
    assert!((lin / 4.52e-4 - 1.0).abs() < 0.01);
    let json = r#"{"p_s":0.9,"p_is":0.9,"p_d":0.9,"p_id":0.9,"p_m":0.9,"p_im":0.8}"#;
    let j = DeviceParams::from_json_str(json).unwrap();
    assert_eq!(j.probs()[6], 0.8);
    assert!(DeviceParams::from_json_str(r#"{"p_s":1.5,"p_is":0.9,"p_d":0.9,"p_id":0.9,"p_m":0.9,"p_im":0.8}"#).is_err());
}

#[test]
fn symbolic_and_numeric_crossover_agree() {
    let a = success_expr(Protocol::GhzLaqcc, 16, None).unwrap();
    let b = success_expr(Protocol::GhzLinear, 16, None).unwrap();
    let s = crossover_symbolic(&a, &b, 0.995, 0.999);
    let mut params = DeviceParams::uniform(1.0 - 1e-6);
    params.p_d = 0.995;
    params.p_m = 0.995;
    params.p_id = 0.999;
    params.p_im = 0.999;
    params.p_ic = Some(0.999);
    let n = crossover_numeric(&a, &b, &params);
    assert_eq!(s.winner, n.winner);
    assert!(s.boundary_exponent.is_some());
}
