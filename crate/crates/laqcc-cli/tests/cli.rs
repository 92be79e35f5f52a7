use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use laqcc::circuit::{self, Program};
use laqcc::{QuantumState, RandomSource};

fn laqcc(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_laqcc"))
        .args(args)
        .current_dir(dir)
        .env_remove("LAQCC_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn device() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../devices/brisbane.toml").display().to_string()
}

#[test]
fn prepare_w4_has_four_half_amplitudes() {
    let dir = tempfile::tempdir().unwrap();
    let o = laqcc(&["prepare", "w", "--n", "4", "--mode", "ideal", "--seed", "7", "--out", "w4.json"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("w4.json")).unwrap()).unwrap();
    let amps = v["state"]["amplitudes"].as_array().unwrap();
    assert_eq!(amps.len(), 16);
    for (i, a) in amps.iter().enumerate() {
        let re = a[0].as_f64().unwrap();
        let want = if (i as u32).count_ones() == 1 { 0.5 } else { 0.0 };
        assert!((re - want).abs() < 1e-9 && a[1].as_f64().unwrap().abs() < 1e-9, "index {i}: {a}");
    }
}

#[test]
fn analyze_ghz_brisbane_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let o = laqcc(&["analyze", "ghz", "--device", &device(), "--n", "55"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut r = csv::Reader::from_reader(o.stdout.as_slice());
    assert_eq!(r.headers().unwrap(), vec!["protocol", "n", "probability", "duration_us", "verdict"]);
    let rows: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
    let prob = |name: &str| -> f64 { rows.iter().find(|r| &r[0] == name).unwrap()[2].parse().unwrap() };
    assert!((prob("ghz_linear") / 4.52e-4 - 1.0).abs() < 0.01);
    assert!((prob("ghz_laqcc") / 4.82e-2 - 1.0).abs() < 0.01);
}

#[test]
fn numbers_fact_to_comb() {
    let dir = tempfile::tempdir().unwrap();
    let o = laqcc(&["numbers", "fact-to-comb", "--n", "3", "--k", "1", "--digits", "1,0,0"], dir.path());
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["output"], "010");
    assert_eq!(v["representation"], "weight_k_string");
    assert_eq!(v["input"]["k"], 1);
}

#[test]
fn numbers_round_trips_through_cli() {
    let dir = tempfile::tempdir().unwrap();
    let o = laqcc(&["numbers", "int-to-fact", "--m", "17", "--n", "4"], dir.path());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let digits: String = v["output"].as_str().unwrap().chars().filter(|c| c.is_ascii_digit() || *c == ',').collect();
    let o = laqcc(&["numbers", "fact-to-int", "--digits", &digits], dir.path());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["output"], "17");
}

#[test]
fn same_seed_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let o = laqcc(
            &["decode-hadamard", "--k", "5", "--bias", "0.7", "--trials", "300", "--list-epsilon", "0.3", "--seed", seed, "--out", name],
            dir.path(),
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        fs::read(dir.path().join(name)).unwrap()
    };
    assert_eq!(run("a.json", "11"), run("b.json", "11"));
    assert_ne!(run("c.json", "11"), run("d.json", "12"));

    let a = laqcc(&["analyze", "all", "--n", "8", "--trials", "5000", "--seed", "3", "--out", "a.csv"], dir.path());
    let b = laqcc(&["analyze", "all", "--n", "8", "--trials", "5000", "--seed", "3", "--out", "b.csv"], dir.path());
    assert!(a.status.success() && b.status.success());
    assert_eq!(fs::read(dir.path().join("a.csv")).unwrap(), fs::read(dir.path().join("b.csv")).unwrap());
}

#[test]
fn seed_comes_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let flag = laqcc(&["learn-quadratic", "--n", "6", "--seed", "9"], dir.path());
    let env = Command::new(env!("CARGO_BIN_EXE_laqcc"))
        .args(["learn-quadratic", "--n", "6"])
        .env("LAQCC_SEED", "9")
        .output()
        .unwrap();
    assert!(flag.status.success());
    assert_eq!(flag.stdout, env.stdout);
    let v: serde_json::Value = serde_json::from_str(&stdout(&flag)).unwrap();
    assert_eq!(v["matches_planted"], true);
    assert_eq!(v["queries"], 2 * 6 + 2);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = laqcc(&["prepare", "w", "--n", "4", "--no-such-flag"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(laqcc(&["frobnicate"], dir.path()).status.code(), Some(1));
    // validation: k > n
    assert_eq!(laqcc(&["prepare", "dicke_small_k", "--n", "3", "--k", "5"], dir.path()).status.code(), Some(1));
    assert_eq!(laqcc(&["numbers", "fact-to-comb", "--k", "1", "--digits", "0,2,0"], dir.path()).status.code(), Some(1));
    // capacity: 40 qubits
    assert_eq!(laqcc(&["prepare", "w", "--n", "40"], dir.path()).status.code(), Some(2));
    assert_eq!(laqcc(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn emitted_ghz_program_runs() {
    let dir = tempfile::tempdir().unwrap();
    let o = laqcc(&["prepare", "ghz", "--n", "5", "--mode", "expanded", "--emit-ir", "ghz.json"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let p: Program = serde_json::from_str(&fs::read_to_string(dir.path().join("ghz.json")).unwrap()).unwrap();
    let (state, _) = circuit::run(&p, QuantumState::new(), &mut RandomSource::new(1)).unwrap();
    let mut target = vec![0.0; 32];
    target[0] = std::f64::consts::FRAC_1_SQRT_2;
    target[31] = std::f64::consts::FRAC_1_SQRT_2;
    let probs: Vec<f64> = state.dump().amplitudes.iter().map(|a| a[0] * a[0] + a[1] * a[1]).collect();
    for (got, want) in probs.iter().zip(&target) {
        assert!((got - want * want).abs() < 1e-9);
    }

    let o = laqcc(&["prepare", "fanout", "--n", "3", "--emit-ir", "fan.json"], dir.path());
    assert!(o.status.success());
    let p: Program = serde_json::from_str(&fs::read_to_string(dir.path().join("fan.json")).unwrap()).unwrap();
    assert!(p.validate().is_ok());
    assert_eq!(laqcc(&["prepare", "parity", "--n", "3"], dir.path()).status.code(), Some(1));
}

#[test]
fn gowers_of_a_quadratic_file() {
    let dir = tempfile::tempdir().unwrap();
    // f(x) = (-1)^{x0 x1 + x2}
    let table: Vec<u64> = (0..16u64).map(|x| ((x & 1) * (x >> 1 & 1) + (x >> 2 & 1)) % 2).collect();
    let file = serde_json::json!({"p": 2, "n": 4, "phase_table": table});
    fs::write(dir.path().join("f.json"), file.to_string()).unwrap();
    let o = laqcc(&["gowers", "--function", "f.json", "--orders", "2,3"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let u3 = v["norms"][1][1].as_f64().unwrap();
    assert!((u3 - 1.0).abs() < 1e-9);
    assert!((v["fourier_l2_squared"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}
