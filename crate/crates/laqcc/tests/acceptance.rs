//! Runs every acceptance criterion and prints one line per criterion.
//! Seed from LAQCC_SEED, default 0.

use laqcc::acceptance::run_all;

fn main() {
    let seed = std::env::var("LAQCC_SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(0);
    let results = run_all(seed);
    for r in &results {
        println!("{}", r.line());
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
