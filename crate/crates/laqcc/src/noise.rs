//! Success-probability models under the worst-case error model: exponent
//! vectors over seven base probabilities, evaluation, durations, protocol
//! crossover and Monte-Carlo validation.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, RngCore};
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{run, run_with_events, OpClass, Program};
use crate::rng::RandomSource;
use crate::sim::{sample_haar_error, QuantumState};
use crate::{Error, Result};

pub const BASE_NAMES: [&str; 7] = ["p_s", "p_is", "p_d", "p_id", "p_m", "p_im", "p_ic"];

/// Widest program accepted by the Haar Monte Carlo.
pub const HAAR_MAX_WIDTH: usize = 12;

/// Fidelity above which a noisy run counts as correct.
pub const HAAR_SUCCESS_FIDELITY: f64 = 1.0 - 1e-6;

const MC_CHUNK: usize = 1024;

/// Per-operation success probabilities and optional gate times (ns).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    pub p_s: f64,
    pub p_is: f64,
    pub p_d: f64,
    pub p_id: f64,
    pub p_m: f64,
    pub p_im: f64,
    /// Defaults to `p_im`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_ic: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_single_ns: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_two_ns: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_meas_ns: Option<f64>,
}

impl DeviceParams {
    pub fn uniform(p: f64) -> Self {
        DeviceParams {
            p_s: p,
            p_is: p,
            p_d: p,
            p_id: p,
            p_m: p,
            p_im: p,
            p_ic: Some(p),
            t_single_ns: None,
            t_two_ns: None,
            t_meas_ns: None,
        }
    }

    pub fn ideal() -> Self {
        Self::uniform(1.0)
    }

    /// IBM Brisbane calibration values.
    pub fn brisbane() -> Self {
        DeviceParams {
            p_s: 1.0 - 2.530e-4,
            p_is: 1.0 - 2.530e-4,
            p_d: 1.0 - 9.442e-3,
            p_id: 1.0 - 4.998e-3,
            p_m: 1.0 - 1.600e-2,
            p_im: 1.0 - 9.822e-3,
            p_ic: Some(1.0 - 9.822e-3),
            t_single_ns: Some(33.0),
            t_two_ns: Some(660.0),
            t_meas_ns: Some(1300.0),
        }
    }

    pub fn from_array(p: [f64; 7]) -> Self {
        DeviceParams {
            p_s: p[0],
            p_is: p[1],
            p_d: p[2],
            p_id: p[3],
            p_m: p[4],
            p_im: p[5],
            p_ic: Some(p[6]),
            t_single_ns: None,
            t_two_ns: None,
            t_meas_ns: None,
        }
    }

    pub fn probs(&self) -> [f64; 7] {
        [
            self.p_s,
            self.p_is,
            self.p_d,
            self.p_id,
            self.p_m,
            self.p_im,
            self.p_ic.unwrap_or(self.p_im),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in BASE_NAMES.iter().zip(self.probs()) {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::Validation(format!("{name} = {p} is not in (0, 1]")));
            }
        }
        for t in [self.t_single_ns, self.t_two_ns, self.t_meas_ns].into_iter().flatten() {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::Validation(format!("gate time {t} is not a nonnegative number")));
            }
        }
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let d: DeviceParams = toml::from_str(s).map_err(|e| Error::Validation(format!("device file: {e}")))?;
        d.validate()?;
        Ok(d)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let d: DeviceParams = serde_json::from_str(s).map_err(|e| Error::Validation(format!("device file: {e}")))?;
        d.validate()?;
        Ok(d)
    }

    /// Load a `.toml` or `.json` device file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Validation(format!("cannot read {}: {e}", path.display())))?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::from_json_str(&text),
            _ => Self::from_toml_str(&text),
        }
    }

    fn times(&self) -> Result<(f64, f64, f64)> {
        match (self.t_single_ns, self.t_two_ns, self.t_meas_ns) {
            (Some(a), Some(b), Some(c)) => Ok((a, b, c)),
            _ => Err(Error::Validation("device parameters carry no gate times".into())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    GhzAll,
    GhzLinear,
    GhzLaqcc,
    GhzHybridAll,
    GhzHybridLinear,
    WDirect,
    WLaqcc,
    Fanout,
    Parity,
    OrReduction,
    OrExact,
    ControlledU,
}

impl Protocol {
    pub const ALL: [Protocol; 12] = [
        Protocol::GhzAll,
        Protocol::GhzLinear,
        Protocol::GhzLaqcc,
        Protocol::GhzHybridAll,
        Protocol::GhzHybridLinear,
        Protocol::WDirect,
        Protocol::WLaqcc,
        Protocol::Fanout,
        Protocol::Parity,
        Protocol::OrReduction,
        Protocol::OrExact,
        Protocol::ControlledU,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::GhzAll => "ghz_all",
            Protocol::GhzLinear => "ghz_linear",
            Protocol::GhzLaqcc => "ghz_laqcc",
            Protocol::GhzHybridAll => "ghz_hybrid_all",
            Protocol::GhzHybridLinear => "ghz_hybrid_linear",
            Protocol::WDirect => "w_direct",
            Protocol::WLaqcc => "w_laqcc",
            Protocol::Fanout => "fanout",
            Protocol::Parity => "parity",
            Protocol::OrReduction => "or_reduction",
            Protocol::OrExact => "or_exact",
            Protocol::ControlledU => "controlled_u",
        }
    }

    pub fn needs_k(self) -> bool {
        matches!(self, Protocol::GhzHybridAll | Protocol::GhzHybridLinear)
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Protocol::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown protocol {s}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundType {
    Exact,
    Lower,
}

/// Π p_i^{e_i} over the seven base probabilities.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuccessExpr {
    pub protocol: Protocol,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    pub exponents: [u64; 7],
    pub bound: BoundType,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub probability: f64,
    pub log_probability: f64,
}

fn ceil_log2(n: i64) -> i64 {
    let mut l = 0;
    while (1i64 << l) < n {
        l += 1;
    }
    l
}

fn cdiv(a: i64, b: i64) -> i64 {
    a.div_euclid(b) + i64::from(a.rem_euclid(b) != 0)
}

fn fdiv(a: i64, b: i64) -> i64 {
    a.div_euclid(b)
}

fn fanout_exps(n: i64) -> [i64; 7] {
    let c = 3 * n - 1;
    [2 * n + cdiv(n - 1, 2), 5 * n + fdiv(n - 1, 2) - 2, 3 * n - 2, 2 * n + 1, 2 * n - 1, c, c]
}

fn parity_exps(n: i64) -> [i64; 7] {
    let c = 3 * n - 1;
    [4 * n + cdiv(n - 1, 2) - 1, 3 * n + fdiv(n - 1, 2) - 1, 3 * n - 2, 2 * n + 1, 2 * n - 1, c, c]
}

fn or_reduction_exps(n: i64) -> [i64; 7] {
    let t = ceil_log2(n + 1);
    let c = 12 * n * t - 2 * (n + t);
    [
        11 * n * t + 2 * (n * cdiv(t - 1, 2) + t * cdiv(n - 1, 2)) + 2 * t,
        23 * n * t + 2 * n * fdiv(t - 1, 2) + 2 * t * fdiv(n - 1, 2) - 4 * (n + t),
        14 * n * t - 4 * (n + t),
        8 * n * t + 2 * (n + t),
        8 * n * t - 2 * (n + t),
        c,
        c,
    ]
}

fn or_exact_exps(n: i64) -> [i64; 7] {
    let t = ceil_log2(n + 1);
    let tt = 1i64 << t;
    let h = tt / 2;
    let c = 24 * n * t - 4 * n - 12 * t + 9 * t * tt;
    [
        22 * n * t + 2 * (2 * n - tt - 1) * cdiv(t - 1, 2) + 4 * t * cdiv(n - 1, 2) + 2 * t * cdiv(h - 1, 2)
            + 2 * cdiv(tt - 1, 2)
            + 10 * t * tt
            + 3 * tt
            - 4 * t
            - 2,
        2 * (2 * n + tt - 1) * fdiv(t - 1, 2) + 4 * t * fdiv(n - 1, 2) + 2 * t * fdiv(h - 1, 2) + 2 * fdiv(tt - 1, 2)
            + 46 * n * t
            - 8 * n
            - 18 * t
            + 11 * t * tt
            + 3 * tt
            - 5,
        28 * n * t - 8 * n - 18 * t + 9 * t * tt + 2 * tt - 6,
        16 * n * t + 4 * n + 2 * t + 6 * t * tt + 2 * tt + 2,
        16 * n * t - 4 * n - 10 * t + 6 * t * tt - 2,
        c,
        c,
    ]
}

/// k = log₂ n and t = ⌈log₂(k+1)⌉ for the W-state LAQCC expressions.
fn w_kt(n: usize) -> Result<(i64, i64)> {
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::Validation(format!("w_laqcc needs n a power of two ≥ 2, got {n}")));
    }
    let k = n.trailing_zeros() as i64;
    Ok((k, ceil_log2(k + 1)))
}

fn w_laqcc_exps(n: usize) -> Result<[i64; 7]> {
    let (k, t) = w_kt(n)?;
    let n = n as i64;
    let tt = 1i64 << t;
    let h = tt / 2;
    let s = 22 * n * k * t + 14 * n * k + 2 * n * cdiv(tt - 1, 2) + n * (3 * tt + cdiv(k, 2)) + 2 * n * t * (5 * tt - 2)
        + 3 * k
        + 4 * k * cdiv(n - 1, 2)
        + 2 * n * (2 * k - tt - 1) * cdiv(t - 1, 2)
        + 4 * n * t * cdiv(k - 1, 2)
        + 2 * n * t * cdiv(h - 1, 2)
        + 2 * n * cdiv(tt - 1, 2);
    let is = 46 * n * k * t + 20 * n * k + 3 * n * tt - 18 * n * t + 21 * n - 11 * k + n * fdiv(k, 2)
        + 2 * n * (2 * k + tt - 1) * fdiv(t - 1, 2)
        + 4 * n * t * fdiv(k - 1, 2)
        + 2 * n * t * fdiv(h - 1, 2)
        + 2 * n * fdiv(tt - 1, 2)
        + 11 * n * t * tt
        + 4 * k * fdiv(n - 1, 2);
    let d = 28 * n * k * t + 7 * n * k + 9 * n * t * (tt - 2) + 2 * n * tt - 5 * n - 8 * k;
    let id = 16 * n * k * t + 14 * n * k + 2 * n * t * (3 * tt + 1) + 2 * n * tt + 17 * n + 4 * k;
    let m = 16 * n * k * t + 6 * n * k + 2 * n * t * (3 * tt - 5) - n - 4 * k;
    let c = 24 * n * k * t + 11 * n * k + 3 * n * t * (3 * tt - 4) + 10 * n - 4 * k;
    Ok([s, is, d, id, m, c, c])
}

/// Approximate W-state LAQCC exponents (ceilings and floors dropped).
pub fn w_laqcc_approximate_exponents(n: usize) -> Result<[f64; 7]> {
    let (k, t) = w_kt(n)?;
    let (n, k, t) = (n as f64, k as f64, t as f64);
    let nkt = n * k * t;
    let c = 33.0 * nkt + 11.0 * n * k - 12.0 * n * t + 10.0 * n - 4.0 * k;
    Ok([
        71.0 * nkt / 2.0 + 37.0 * n * k / 2.0 + 3.0 * n * k - 8.0 * n * t - n + k,
        125.0 * nkt / 2.0 + 47.0 * n * k / 2.0 - 22.0 * n * t + 21.0 * n - 13.0 * k,
        37.0 * nkt + 9.0 * n * k - 18.0 * n * t - 5.0 * n - 8.0 * k,
        22.0 * nkt + 16.0 * n * k + 2.0 * n * t + 17.0 * n + 4.0 * k,
        22.0 * nkt + 6.0 * n * k - 10.0 * n * t - n - 4.0 * k,
        c,
        c,
    ])
}

/// Exponent vector of a registered protocol.
pub fn success_expr(protocol: Protocol, n: usize, k: Option<usize>) -> Result<SuccessExpr> {
    if n < 2 {
        return Err(Error::Validation(format!("{protocol} needs n ≥ 2, got {n}")));
    }
    if protocol.needs_k() != k.is_some() && protocol.needs_k() {
        return Err(Error::Usage(format!("{protocol} needs a group count k")));
    }
    let ni = n as i64;
    let log = ceil_log2(ni);
    let half_up = cdiv(ni, 2);
    let half_down = fdiv(ni, 2);
    let (e, bound) = match protocol {
        Protocol::GhzAll => ([1, ni - 1, ni - 1, ni * (log - 2) + 2, 0, 0, 0], BoundType::Exact),
        Protocol::GhzLinear => ([1, ni - 1, ni - 1, ni * (half_up - 2) + 2, 0, 0, 0], BoundType::Exact),
        Protocol::GhzLaqcc => (
            [ni + half_down, ni + half_up - 1, 2 * (ni - 1), 2, ni - 1, ni, ni],
            BoundType::Lower,
        ),
        Protocol::GhzHybridAll | Protocol::GhzHybridLinear => {
            let k = k.unwrap_or(0);
            if k == 0 || n % k != 0 {
                return Err(Error::Validation(format!("hybrid GHZ needs k dividing n, got n = {n}, k = {k}")));
            }
            let (ki, g) = (k as i64, (n / k) as i64);
            let layers = if protocol == Protocol::GhzHybridAll { ceil_log2(g) } else { cdiv(g, 2) };
            (
                [
                    2 * ki + half_down,
                    3 * ni - ki + half_up - 1,
                    ni + ki - 2,
                    (ni + ki) * layers + 2,
                    ki - 1,
                    ni,
                    ni,
                ],
                BoundType::Lower,
            )
        }
        Protocol::WDirect => (
            [3 * ni - 4, ni * (2 * ni - 5) + 4, 3 * ni - 5, ni * (3 * ni - 11) + 10, 0, 0, 0],
            BoundType::Exact,
        ),
        Protocol::WLaqcc => (w_laqcc_exps(n)?, BoundType::Lower),
        Protocol::Fanout => (fanout_exps(ni), BoundType::Lower),
        Protocol::Parity => (parity_exps(ni), BoundType::Lower),
        Protocol::OrReduction => (or_reduction_exps(ni), BoundType::Lower),
        Protocol::OrExact => (or_exact_exps(ni), BoundType::Lower),
        Protocol::ControlledU => ([3, 3, 2, 0, 0, 0, 0], BoundType::Exact),
    };
    let mut exponents = [0u64; 7];
    for (i, &v) in e.iter().enumerate() {
        exponents[i] = u64::try_from(v)
            .map_err(|_| Error::Model(format!("{protocol} at n = {n}: negative exponent {v} for {}", BASE_NAMES[i])))?;
    }
    Ok(SuccessExpr {
        protocol,
        n,
        k: if protocol.needs_k() { k } else { None },
        exponents,
        bound,
    })
}

pub fn evaluate_exponents(exponents: &[f64; 7], params: &DeviceParams) -> Evaluation {
    let log: f64 = exponents.iter().zip(params.probs()).map(|(&e, p)| if e == 0.0 { 0.0 } else { e * p.ln() }).sum();
    Evaluation {
        probability: log.exp(),
        log_probability: log,
    }
}

pub fn evaluate(expr: &SuccessExpr, params: &DeviceParams) -> Evaluation {
    evaluate_exponents(&expr.exponents.map(|e| e as f64), params)
}

/// Wall-clock duration in ns from the gate times.
pub fn duration_ns(protocol: Protocol, n: usize, k: Option<usize>, params: &DeviceParams) -> Result<f64> {
    let (t1, t2, tm) = params.times()?;
    let ni = n as i64;
    let laqcc = 2.0 * (t1 + t2 + tm);
    Ok(match protocol {
        Protocol::GhzAll => t1 + ceil_log2(ni) as f64 * t2,
        Protocol::GhzLinear => t1 + cdiv(ni, 2) as f64 * t2,
        Protocol::GhzLaqcc => laqcc,
        Protocol::GhzHybridAll | Protocol::GhzHybridLinear => {
            let k = k.filter(|&k| k > 0 && n % k == 0).ok_or_else(|| {
                Error::Validation(format!("hybrid GHZ needs k dividing n, got n = {n}, k = {k:?}"))
            })?;
            let g = (n / k) as i64;
            let layers = if protocol == Protocol::GhzHybridAll { ceil_log2(g) } else { cdiv(g, 2) };
            t1 + layers as f64 * t2 + laqcc
        }
        Protocol::WDirect => {
            if n < 2 {
                return Err(Error::Validation("w_direct needs n ≥ 2".into()));
            }
            (n - 2) as f64 * (2.0 * t1 + 2.0 * t2) + 2.0 * t1 + (n - 1) as f64 * t2
        }
        _ => return Err(Error::Model(format!("no duration model for {protocol}"))),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonVerdict {
    /// Winning protocol name, or "tie".
    pub winner: String,
    /// p_d ≥ p_id^β favours the first protocol (when its p_d count is larger).
    pub boundary_exponent: Option<f64>,
    pub assumptions_applied: bool,
    pub probability_a: f64,
    pub probability_b: f64,
}

const TIE_REL: f64 = 1e-12;

fn pick(a: &SuccessExpr, b: &SuccessExpr, score: f64) -> String {
    if score > 0.0 {
        a.protocol.to_string()
    } else if score < 0.0 {
        b.protocol.to_string()
    } else {
        "tie".to_string()
    }
}

/// Compare the evaluated probabilities directly.
pub fn crossover_numeric(a: &SuccessExpr, b: &SuccessExpr, params: &DeviceParams) -> ComparisonVerdict {
    let (ea, eb) = (evaluate(a, params), evaluate(b, params));
    let diff = ea.log_probability - eb.log_probability;
    let scale = ea.log_probability.abs().max(eb.log_probability.abs()).max(1.0);
    let score = if diff.abs() <= TIE_REL * scale { 0.0 } else { diff };
    ComparisonVerdict {
        winner: pick(a, b, score),
        boundary_exponent: symbolic_reduction(a, b).2,
        assumptions_applied: false,
        probability_a: ea.probability,
        probability_b: eb.probability,
    }
}

/// Reduced two-parameter form with p_s ≈ p_is ≈ 1, p_m ≈ p_d and
/// p_id ≈ p_im ≈ p_ic: returns (D_a − D_b, I_b − I_a, boundary exponent).
fn symbolic_reduction(a: &SuccessExpr, b: &SuccessExpr) -> (i64, i64, Option<f64>) {
    let dd = |e: &SuccessExpr| (e.exponents[2] + e.exponents[4]) as i64;
    let ii = |e: &SuccessExpr| (e.exponents[3] + e.exponents[5] + e.exponents[6]) as i64;
    let ddiff = dd(a) - dd(b);
    let idiff = ii(b) - ii(a);
    let beta = if ddiff != 0 { Some(idiff as f64 / ddiff as f64) } else { None };
    (ddiff, idiff, beta)
}

/// Verdict from the reduced form P ≈ p_d^D p_id^I at the given p_d, p_id.
pub fn crossover_symbolic(a: &SuccessExpr, b: &SuccessExpr, p_d: f64, p_id: f64) -> ComparisonVerdict {
    let (ddiff, idiff, beta) = symbolic_reduction(a, b);
    // log P_a − log P_b in the reduced model
    let score = ddiff as f64 * p_d.ln() - idiff as f64 * p_id.ln();
    let scale = (ddiff.abs() as f64 * p_d.ln().abs()).max(idiff.abs() as f64 * p_id.ln().abs());
    let score = if score.abs() <= TIE_REL * scale.max(f64::MIN_POSITIVE) { 0.0 } else { score };
    let reduced = DeviceParams::from_array([1.0, 1.0, p_d, p_id, p_d, p_id, p_id]);
    ComparisonVerdict {
        winner: pick(a, b, score),
        boundary_exponent: beta,
        assumptions_applied: true,
        probability_a: evaluate(a, &reduced).probability,
        probability_b: evaluate(b, &reduced).probability,
    }
}

/// Operation counts per error class.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventTally {
    pub counts: [u64; 7],
}

impl EventTally {
    pub fn from_expr(e: &SuccessExpr) -> Self {
        EventTally { counts: e.exponents }
    }

    /// Counts from one run of `program`; every gate is counted whether or not
    /// its condition holds, so the tally does not depend on the branch.
    pub fn from_program(program: &Program) -> Result<Self> {
        let mut t = EventTally::default();
        run_with_events(program, QuantumState::new(), &mut RandomSource::new(0), |c, _, _| {
            t.counts[c.index()] += 1;
            Ok(())
        })?;
        Ok(t)
    }

    pub fn closed_form(&self, params: &DeviceParams) -> f64 {
        evaluate_exponents(&self.counts.map(|c| c as f64), params).probability
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub trials: usize,
    pub successes: usize,
    pub estimate: f64,
    pub stderr: f64,
}

impl McEstimate {
    fn new(trials: usize, successes: usize) -> Self {
        let p = successes as f64 / trials.max(1) as f64;
        McEstimate {
            trials,
            successes,
            estimate: p,
            stderr: (p * (1.0 - p) / trials.max(1) as f64).sqrt(),
        }
    }

    /// |estimate − expected| ≤ k σ with σ the binomial standard error at `expected`.
    pub fn within(&self, expected: f64, k: f64) -> bool {
        let sigma = (expected * (1.0 - expected) / self.trials.max(1) as f64).sqrt();
        (self.estimate - expected).abs() <= k * sigma + 1e-15
    }
}

fn chunked<F>(trials: usize, rng: &RandomSource, per_trial: F) -> Result<usize>
where
    F: Fn(&mut RandomSource) -> Result<bool> + Sync,
{
    let chunks = trials.div_ceil(MC_CHUNK);
    let counts: Vec<Result<usize>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut r = rng.derive(c as u64);
            let len = MC_CHUNK.min(trials - c * MC_CHUNK);
            let mut ok = 0;
            for _ in 0..len {
                if per_trial(&mut r)? {
                    ok += 1;
                }
            }
            Ok(ok)
        })
        .collect();
    counts.into_iter().sum()
}

/// Each operation fails independently; a trial succeeds iff none fails.
pub fn monte_carlo_bernoulli(
    tally: &EventTally,
    params: &DeviceParams,
    trials: usize,
    rng: &RandomSource,
) -> Result<McEstimate> {
    params.validate()?;
    let probs = params.probs();
    let dists: Vec<Binomial> = tally
        .counts
        .iter()
        .zip(probs)
        .map(|(&c, p)| Binomial::new(c, (1.0 - p).clamp(0.0, 1.0)))
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Validation(format!("binomial: {e}")))?;
    let ok = chunked(trials, rng, |r| Ok(dists.iter().all(|d| d.sample(r) == 0)))?;
    Ok(McEstimate::new(trials, ok))
}

fn check_haar_width(program: &Program) -> Result<()> {
    let w = program.cost().peak_width;
    if w > HAAR_MAX_WIDTH {
        return Err(Error::Capacity(format!("Haar Monte Carlo is limited to {HAAR_MAX_WIDTH} qubits, program uses {w}")));
    }
    Ok(())
}

fn ideal_output(program: &Program) -> Result<QuantumState> {
    Ok(run(program, QuantumState::new(), &mut RandomSource::new(0))?.0)
}

fn success_of(state: &QuantumState, ideal: &QuantumState) -> bool {
    state.fidelity(ideal).map(|f| f > HAAR_SUCCESS_FIDELITY).unwrap_or(false)
}

/// Failing operations are followed by a Haar-random unitary on their qubits
/// (a joint 4×4 unitary for two-qubit gates); success iff the output
/// fidelity with the ideal run exceeds 1 − 1e−6.
///
/// The program's output must not depend on measurement outcomes.
pub fn monte_carlo_haar(program: &Program, params: &DeviceParams, trials: usize, rng: &RandomSource) -> Result<McEstimate> {
    params.validate()?;
    check_haar_width(program)?;
    let ideal = ideal_output(program)?;
    let probs = params.probs();
    let ok = chunked(trials, rng, |r| {
        let idx = r.next_u64();
        let trial = r.derive(idx);
        let mut noise = trial.derive(0);
        let mut meas = trial.derive(1);
        let (out, _) = run_with_events(program, QuantumState::new(), &mut meas, |c, qs, s| {
            if noise.uniform() >= probs[c.index()] {
                let g = sample_haar_error(&mut noise, &qs[..qs.len().min(2)])?;
                s.apply(&g)?;
            }
            Ok(())
        })?;
        Ok(success_of(&out, &ideal))
    })?;
    Ok(McEstimate::new(trials, ok))
}

/// Inject exactly one Haar error after a uniformly chosen operation and return
/// the output fidelity with the ideal run.
pub fn single_injection_fidelity(program: &Program, rng: &mut RandomSource) -> Result<f64> {
    check_haar_width(program)?;
    let ideal = ideal_output(program)?;
    let total: u64 = EventTally::from_program(program)?.counts.iter().sum();
    if total == 0 {
        return Err(Error::Validation("program has no operations".into()));
    }
    let at = rng.random_range(0..total);
    let mut seen = 0u64;
    let idx = rng.next_u64();
    let trial = rng.derive(idx);
    let mut noise = trial.derive(0);
    let mut meas = trial.derive(1);
    let (out, _) = run_with_events(program, QuantumState::new(), &mut meas, |_c: OpClass, qs, s| {
        if seen == at {
            let g = sample_haar_error(&mut noise, &qs[..qs.len().min(2)])?;
            s.apply(&g)?;
        }
        seen += 1;
        Ok(())
    })?;
    out.fidelity(&ideal)
}
