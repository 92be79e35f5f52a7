use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use laqcc::acceptance;
use laqcc::circuit::Program;
use laqcc::fourier::{self, PhaseFunction, PhaseTableFile, QuadraticPhaseParams, QueryOracle};
use laqcc::hadamard::{self, Codeword, Message, NoiseModel};
use laqcc::noise::{self, DeviceParams, EventTally, Protocol};
use laqcc::numbersys::{self, Factoradic, WeightKString};
use laqcc::primitives::{self, Builder, Mode};
use laqcc::sim::StateDump;
use laqcc::stateprep::{self, Family, StateSpec};
use laqcc::{Error, RandomSource, Result};
use num_bigint::BigUint;
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "laqcc", version, about = "LAQCC simulation and analysis toolkit")]
struct Cli {
    /// Master seed for every random choice.
    #[arg(long, global = true, env = "LAQCC_SEED", default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug, Clone)]
struct OutArgs {
    /// Output file, or `json`/`csv` to pick a format for stdout.
    #[arg(long)]
    out: Option<String>,
    /// Output format (default: from the file extension, else json).
    #[arg(long, value_enum)]
    format: Option<Format>,
}

struct Sink {
    format: Format,
    path: Option<PathBuf>,
}

impl OutArgs {
    fn sink(&self, default: Format) -> Sink {
        match self.out.as_deref() {
            Some("json") => Sink { format: self.format.unwrap_or(Format::Json), path: None },
            Some("csv") => Sink { format: self.format.unwrap_or(Format::Csv), path: None },
            Some(p) => {
                let by_ext = match Path::new(p).extension().and_then(|e| e.to_str()) {
                    Some("csv") => Format::Csv,
                    Some("json") => Format::Json,
                    _ => default,
                };
                Sink { format: self.format.unwrap_or(by_ext), path: Some(PathBuf::from(p)) }
            }
            None => Sink { format: self.format.unwrap_or(default), path: None },
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Prepare a state (uniform_q, w, dicke_small_k, dicke_factoradic, ghz) or
    /// emit the program of a primitive (fanout, parity, exact_or, equal, or_reduction).
    Prepare(PrepareArgs),
    /// Encode, corrupt and decode a Hadamard codeword.
    DecodeHadamard(DecodeArgs),
    /// Number-system conversions.
    Numbers(NumbersArgs),
    /// Gowers norms and Fourier data of a phase function.
    Gowers(GowersArgs),
    /// Learn a quadratic phase from oracle access.
    LearnQuadratic(LearnArgs),
    /// Success probabilities and durations under a device model.
    Analyze(AnalyzeArgs),
    /// Run the acceptance suite and print a pass/fail table.
    Selftest(SelftestArgs),
}

#[derive(Args, Debug)]
struct PrepareArgs {
    target: String,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    q: Option<usize>,
    #[arg(long, default_value = "ideal")]
    mode: String,
    /// Write the LAQCC program as JSON to this path.
    #[arg(long)]
    emit_ir: Option<PathBuf>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct DecodeArgs {
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 2)]
    p: u64,
    /// Symmetric channel: each symbol kept with this bias.
    #[arg(long, conflicts_with = "delta")]
    bias: Option<f64>,
    /// Worst-case channel: this fraction of symbols altered.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long)]
    list_epsilon: Option<f64>,
    /// Decode this codeword file instead of a random message.
    #[arg(long)]
    codeword: Option<PathBuf>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum NumbersOp {
    IntToComb,
    CombToInt,
    IntToFact,
    FactToInt,
    FactToComb,
    CombToFact,
    Rank,
    Unrank,
}

#[derive(Args, Debug)]
struct NumbersArgs {
    #[arg(value_enum)]
    op: NumbersOp,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    /// Integer input.
    #[arg(long)]
    m: Option<String>,
    /// Comma-separated digits, most significant first.
    #[arg(long)]
    digits: Option<String>,
    /// Bit string, most significant position first.
    #[arg(long)]
    string: Option<String>,
    /// Factoradic digits of the ones (comb-to-fact).
    #[arg(long)]
    x: Option<String>,
    /// Factoradic digits of the zeros (comb-to-fact).
    #[arg(long)]
    z: Option<String>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct FunctionSource {
    /// Function file {"p", "n", "phase_table"}.
    #[arg(long)]
    function: Option<PathBuf>,
    /// Use a random quadratic phase with this many variables.
    #[arg(long, conflicts_with = "function")]
    n: Option<usize>,
    #[arg(long, default_value_t = 2)]
    p: u64,
}

#[derive(Args, Debug)]
struct GowersArgs {
    #[command(flatten)]
    source: FunctionSource,
    /// Norm orders to compute.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    orders: Vec<u32>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct LearnArgs {
    #[command(flatten)]
    source: FunctionSource,
    /// Flip this fraction of values of the function before learning.
    #[arg(long, default_value_t = 0.0)]
    corrupt: f64,
    /// Use the unique-radius learner with this ε.
    #[arg(long)]
    epsilon: Option<f64>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    /// ghz, w, or, fanout, parity, all, or a protocol name.
    target: String,
    #[arg(long)]
    n: usize,
    /// Group count for the hybrid GHZ protocols.
    #[arg(long)]
    k: Option<usize>,
    /// Device file (TOML or JSON); default: built-in Brisbane values.
    #[arg(long)]
    device: Option<PathBuf>,
    /// Add a Bernoulli Monte Carlo estimate with this many trials.
    #[arg(long)]
    trials: Option<usize>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct SelftestArgs {
    /// Run only these criteria.
    #[arg(long, value_delimiter = ',')]
    only: Vec<u32>,
    #[command(flatten)]
    out: OutArgs,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("laqcc: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let seed = cli.seed;
    let ok = match cli.command {
        Command::Prepare(a) => prepare(a, seed)?,
        Command::DecodeHadamard(a) => decode(a, seed)?,
        Command::Numbers(a) => numbers(a)?,
        Command::Gowers(a) => gowers(a, seed)?,
        Command::LearnQuadratic(a) => learn(a, seed)?,
        Command::Analyze(a) => analyze(a, seed)?,
        Command::Selftest(a) => selftest(a, seed)?,
    };
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

// ---- output ----

struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Validation(format!("{}: {e}", path.display()))
}

fn emit<T: Serialize>(sink: &Sink, value: &T, table: impl FnOnce() -> Table) -> Result<()> {
    let bytes = match sink.format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Validation(e.to_string()))?;
            s.push('\n');
            s.into_bytes()
        }
        Format::Csv => {
            let t = table();
            let mut w = csv::Writer::from_writer(Vec::new());
            let werr = |e: csv::Error| Error::Validation(e.to_string());
            w.write_record(&t.header).map_err(werr)?;
            for r in &t.rows {
                w.write_record(r).map_err(werr)?;
            }
            w.into_inner().map_err(|e| Error::Validation(e.to_string()))?
        }
    };
    match &sink.path {
        Some(p) => fs::write(p, bytes).map_err(|e| io_err(p, e)),
        None => {
            print!("{}", String::from_utf8_lossy(&bytes));
            Ok(())
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Validation(e.to_string()))?;
    s.push('\n');
    fs::write(path, s).map_err(|e| io_err(path, e))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| io_err(path, e))
}

fn sci(v: f64) -> String {
    format!("{v:.4e}")
}

fn parse_list(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|t| t.trim())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| Error::Usage(format!("bad digit {t:?}"))))
        .collect()
}

fn need<T: Clone>(v: &Option<T>, flag: &str) -> Result<T> {
    v.clone().ok_or_else(|| Error::Usage(format!("missing --{flag}")))
}

// ---- prepare ----

#[derive(Serialize)]
struct PrepareOutput {
    spec: StateSpec,
    seed: u64,
    max_deviation: f64,
    state: StateDump,
}

#[derive(Serialize)]
struct ProgramOutput {
    primitive: String,
    n: usize,
    cost: laqcc::circuit::CostReport,
}

fn primitive_program(name: &str, n: usize, k: Option<usize>) -> Result<Option<Program>> {
    let mut b = Builder::new(0);
    match name.replace('-', "_").as_str() {
        "fanout" => {
            let qs = b.fresh(n + 1);
            primitives::fanout_into(&mut b, qs[0], &qs[1..]);
        }
        "parity" => {
            let qs = b.fresh(n + 1);
            primitives::parity_into(&mut b, &qs[..n], qs[n]);
        }
        "exact_or" => {
            let qs = b.fresh(n + 1);
            primitives::exact_or_into(&mut b, &qs[..n], qs[n])?;
        }
        "equal" => {
            let qs = b.fresh(n + 1);
            primitives::equal_into(&mut b, &qs[..n], k.unwrap_or(0) as u64, qs[n])?;
        }
        "or_reduction" => {
            let qs = b.fresh(n);
            primitives::or_reduction_into(&mut b, &qs);
        }
        _ => return Ok(None),
    }
    Ok(Some(b.into_program()))
}

fn prepare(a: PrepareArgs, seed: u64) -> Result<bool> {
    let mode = Mode::from_str(&a.mode)?;
    if let Some(program) = primitive_program(&a.target, a.n, a.k)? {
        let path = a
            .emit_ir
            .as_deref()
            .ok_or_else(|| Error::Usage(format!("{} is a primitive; pass --emit-ir <path>", a.target)))?;
        program.validate()?;
        write_json(path, &program)?;
        let out = ProgramOutput { primitive: a.target.clone(), n: a.n, cost: program.cost() };
        let sink = a.out.sink(Format::Json);
        return emit(&sink, &out, || Table {
            header: vec!["primitive", "n", "quantum_depth", "peak_width"],
            rows: vec![vec![
                out.primitive.clone(),
                out.n.to_string(),
                out.cost.quantum_depth.to_string(),
                out.cost.peak_width.to_string(),
            ]],
        })
        .map(|()| true);
    }
    let family = Family::from_str(&a.target)?;
    let spec = StateSpec { family, n: a.n, k: a.k, q: a.q, mode };
    spec.validate()?;
    if let Some(path) = &a.emit_ir {
        let program = match (family, mode) {
            (Family::Ghz, Mode::Expanded) => primitives::ghz_laqcc_program(a.n),
            (Family::Ghz, Mode::Ideal) => stateprep::ghz_all_program(a.n),
            (Family::W, Mode::Ideal) => stateprep::w_direct_program(a.n),
            _ => {
                return Err(Error::Usage(format!(
                    "{family} in {} mode adapts to the live state and has no static program",
                    a.mode
                )))
            }
        };
        write_json(path, &program)?;
    }
    let mut rng = RandomSource::new(seed);
    let state = stateprep::prepare(&spec, &mut rng)?;
    let max_deviation = stateprep::uniformity_deviation(&state, &spec.support()?);
    let out = PrepareOutput { spec, seed, max_deviation, state: state.dump() };
    let sink = a.out.sink(Format::Json);
    emit(&sink, &out, || Table {
        header: vec!["index", "re", "im"],
        rows: out
            .state
            .amplitudes
            .iter()
            .enumerate()
            .map(|(i, c)| vec![i.to_string(), c[0].to_string(), c[1].to_string()])
            .collect(),
    })?;
    Ok(true)
}

// ---- decode-hadamard ----

#[derive(Serialize)]
struct DecodeOutput {
    p: u64,
    k: usize,
    seed: u64,
    channel: Option<NoiseModel>,
    message: Option<Vec<u64>>,
    distance: Option<usize>,
    /// (1 − 2d/n)² for p = 2.
    predicted_success: Option<f64>,
    exact_success: Option<f64>,
    trials: usize,
    empirical_success: Option<f64>,
    most_frequent: Vec<u64>,
    list: Option<Vec<Vec<u64>>>,
    list_contains_message: Option<bool>,
}

fn decode(a: DecodeArgs, seed: u64) -> Result<bool> {
    let mut rng = RandomSource::new(seed);
    let channel = match (a.bias, a.delta) {
        (Some(bias), None) => Some(NoiseModel::Symmetric { bias }),
        (None, Some(delta)) => Some(NoiseModel::WorstCase { delta }),
        _ => None,
    };
    if let Some(ch) = &channel {
        ch.validate()?;
    }
    let (received, message) = match &a.codeword {
        Some(path) => {
            let c: Codeword = read_json(path)?;
            c.validate()?;
            let c = match &channel {
                Some(ch) => hadamard::corrupt(&c, ch, &mut rng)?,
                None => c,
            };
            (c, None)
        }
        None => {
            Message::new(a.p, vec![0; a.k])?;
            let x = Message::random(a.p, a.k, &mut rng);
            let clean = hadamard::encode(&x);
            let c = match &channel {
                Some(ch) => hadamard::corrupt(&clean, ch, &mut rng)?,
                None => clean,
            };
            (c, Some(x))
        }
    };
    let dist = hadamard::decode_distribution(&received)?;
    let mut counts = vec![0usize; dist.probs.len()];
    for _ in 0..a.trials {
        counts[dist.sample(&mut rng).index()] += 1;
    }
    let top = (0..counts.len()).max_by_key(|&i| (counts[i], std::cmp::Reverse(i))).unwrap_or(0);
    let distance = message.as_ref().map(|x| hadamard::distance(&hadamard::encode(x), &received));
    let n = received.len() as f64;
    let list = match a.list_epsilon {
        Some(eps) => Some(hadamard::list_decode(&received, eps, &mut rng)?),
        None => None,
    };
    let out = DecodeOutput {
        p: received.p,
        k: received.k,
        seed,
        channel,
        message: message.as_ref().map(|x| x.coords.clone()),
        distance,
        predicted_success: distance.filter(|_| received.p == 2).map(|d| (1.0 - 2.0 * d as f64 / n).powi(2)),
        exact_success: message.as_ref().map(|x| dist.probs[x.index()]),
        trials: a.trials,
        empirical_success: message.as_ref().map(|x| counts[x.index()] as f64 / a.trials.max(1) as f64),
        most_frequent: Message::from_index(received.p, received.k, top).coords,
        list_contains_message: match (&list, &message) {
            (Some(l), Some(x)) => Some(l.contains(x)),
            _ => None,
        },
        list: list.map(|l| l.into_iter().map(|m| m.coords).collect()),
    };
    let opt = |v: Option<String>| v.unwrap_or_default();
    let sink = a.out.sink(Format::Json);
    emit(&sink, &out, || Table {
        header: vec![
            "p",
            "k",
            "seed",
            "distance",
            "predicted_success",
            "exact_success",
            "trials",
            "empirical_success",
            "list_size",
            "list_contains_message",
        ],
        rows: vec![vec![
            out.p.to_string(),
            out.k.to_string(),
            out.seed.to_string(),
            opt(out.distance.map(|d| d.to_string())),
            opt(out.predicted_success.map(|v| v.to_string())),
            opt(out.exact_success.map(|v| v.to_string())),
            out.trials.to_string(),
            opt(out.empirical_success.map(|v| v.to_string())),
            opt(out.list.as_ref().map(|l| l.len().to_string())),
            opt(out.list_contains_message.map(|b| b.to_string())),
        ]],
    })?;
    Ok(true)
}

// ---- numbers ----

#[derive(Serialize)]
struct NumbersOutput {
    input: serde_json::Value,
    representation: &'static str,
    output: String,
}

fn big(s: &Option<String>) -> Result<BigUint> {
    let s = need(s, "m")?;
    BigUint::from_str(s.trim()).map_err(|_| Error::Usage(format!("bad integer {s:?}")))
}

fn factoradic(s: &Option<String>, flag: &str, n: Option<usize>) -> Result<Factoradic> {
    let f = Factoradic::new(parse_list(&need(s, flag)?)?)?;
    if let Some(n) = n.filter(|&n| n != f.n()) {
        return Err(Error::Validation(format!("--{flag} has {} digits, --n is {n}", f.n())));
    }
    Ok(f)
}

fn numbers(a: NumbersArgs) -> Result<bool> {
    use serde_json::json;
    let (input, representation, output) = match a.op {
        NumbersOp::IntToComb => {
            let (m, k) = (big(&a.m)?, need(&a.k, "k")?);
            (json!({"m": m.to_string(), "k": k}), "combinatorial", format!("{:?}", numbersys::int_to_comb(&m, k).digits))
        }
        NumbersOp::CombToInt => {
            let c = numbersys::CombIndex::new(parse_list(&need(&a.digits, "digits")?)?)?;
            (json!({"digits": c.digits}), "integer", numbersys::comb_to_int(&c).to_string())
        }
        NumbersOp::IntToFact => {
            let (m, n) = (big(&a.m)?, need(&a.n, "n")?);
            (json!({"m": m.to_string(), "n": n}), "factoradic", numbersys::int_to_factoradic(&m, n)?.to_string())
        }
        NumbersOp::FactToInt => {
            let f = factoradic(&a.digits, "digits", a.n)?;
            (json!({"digits": f.digits}), "integer", numbersys::factoradic_to_int(&f).to_string())
        }
        NumbersOp::FactToComb => {
            let f = factoradic(&a.digits, "digits", a.n)?;
            let k = need(&a.k, "k")?;
            (json!({"n": f.n(), "k": k, "digits": f.digits}), "weight_k_string", numbersys::fact_to_comb(&f, k)?.to_string())
        }
        NumbersOp::CombToFact => {
            let s = WeightKString::parse(&need(&a.string, "string")?)?;
            let x = factoradic(&a.x, "x", None)?;
            let z = factoradic(&a.z, "z", None)?;
            let y = numbersys::comb_to_fact(&s, &x, &z)?;
            (json!({"string": s.to_string(), "x": x.digits, "z": z.digits}), "factoradic", y.to_string())
        }
        NumbersOp::Rank => {
            let s = WeightKString::parse(&need(&a.string, "string")?)?;
            (json!({"string": s.to_string()}), "integer", numbersys::rank_weightk(&s).to_string())
        }
        NumbersOp::Unrank => {
            let (m, n, k) = (big(&a.m)?, need(&a.n, "n")?, need(&a.k, "k")?);
            (
                json!({"m": m.to_string(), "n": n, "k": k}),
                "weight_k_string",
                numbersys::unrank_weightk(&m, n, k)?.to_string(),
            )
        }
    };
    let out = NumbersOutput { input, representation, output };
    let sink = a.out.sink(Format::Json);
    emit(&sink, &out, || Table {
        header: vec!["input", "representation", "output"],
        rows: vec![vec![out.input.to_string(), out.representation.to_string(), out.output.clone()]],
    })?;
    Ok(true)
}

// ---- gowers / learn-quadratic ----

fn load_function(src: &FunctionSource, rng: &mut RandomSource) -> Result<(PhaseFunction, Option<QuadraticPhaseParams>)> {
    match (&src.function, src.n) {
        (Some(path), _) => {
            let file: PhaseTableFile = read_json(path)?;
            Ok((PhaseFunction::from_file(&file)?, None))
        }
        (None, Some(n)) => {
            let q = QuadraticPhaseParams::random(src.p, n, rng);
            Ok((q.to_phase_function()?, Some(q)))
        }
        (None, None) => Err(Error::Usage("pass --function <file> or --n <vars>".into())),
    }
}

#[derive(Serialize)]
struct GowersOutput {
    p: u64,
    n: usize,
    norms: Vec<(u32, f64)>,
    mean_square: f64,
    fourier_l2_squared: f64,
    fourier_l4: f64,
}

fn gowers(a: GowersArgs, seed: u64) -> Result<bool> {
    let mut rng = RandomSource::new(seed);
    let (f, _) = load_function(&a.source, &mut rng)?;
    let spec = fourier::fourier(&f)?;
    let norms = a
        .orders
        .iter()
        .map(|&d| fourier::gowers_norm(&f, d).map(|v| (d, v)))
        .collect::<Result<Vec<_>>>()?;
    let out = GowersOutput {
        p: f.p,
        n: f.n,
        norms,
        mean_square: fourier::mean_square(&f),
        fourier_l2_squared: spec.l2_squared(),
        fourier_l4: spec.l4(),
    };
    let sink = a.out.sink(Format::Json);
    emit(&sink, &out, || Table {
        header: vec!["p", "n", "order", "norm"],
        rows: out
            .norms
            .iter()
            .map(|(d, v)| vec![out.p.to_string(), out.n.to_string(), d.to_string(), v.to_string()])
            .collect(),
    })?;
    Ok(true)
}

#[derive(Serialize)]
struct LearnOutput {
    learner: &'static str,
    p: u64,
    n: usize,
    corruption: f64,
    queries: usize,
    learned: QuadraticPhaseParams,
    planted: Option<QuadraticPhaseParams>,
    matches_planted: Option<bool>,
    /// Fraction of inputs where the learned phase disagrees with the oracle.
    distance_to_oracle: f64,
}

fn learn(a: LearnArgs, seed: u64) -> Result<bool> {
    let mut rng = RandomSource::new(seed);
    let (f, planted) = load_function(&a.source, &mut rng)?;
    let f = if a.corrupt > 0.0 { f.corrupt(a.corrupt, &mut rng)? } else { f };
    let mut oracle = QueryOracle::new(f.clone());
    let (learner, learned) = match a.epsilon {
        Some(eps) => ("unique_radius", fourier::learn_quadratic_unique_radius(&mut oracle, eps, &mut rng)?),
        None => ("noiseless", fourier::learn_quadratic_noiseless(&mut oracle, &mut rng)?),
    };
    let distance_to_oracle = learned.to_phase_function()?.distance(&f);
    let out = LearnOutput {
        learner,
        p: f.p,
        n: f.n,
        corruption: a.corrupt,
        queries: oracle.queries(),
        matches_planted: planted.as_ref().map(|q| q.phases().ok() == learned.phases().ok()),
        learned,
        planted,
        distance_to_oracle,
    };
    let sink = a.out.sink(Format::Json);
    emit(&sink, &out, || Table {
        header: vec!["learner", "p", "n", "corruption", "queries", "matches_planted", "distance_to_oracle"],
        rows: vec![vec![
            out.learner.to_string(),
            out.p.to_string(),
            out.n.to_string(),
            out.corruption.to_string(),
            out.queries.to_string(),
            out.matches_planted.map(|b| b.to_string()).unwrap_or_default(),
            out.distance_to_oracle.to_string(),
        ]],
    })?;
    Ok(true)
}

// ---- analyze ----

#[derive(Serialize)]
struct AnalyzeRow {
    protocol: Protocol,
    n: usize,
    k: Option<usize>,
    bound: noise::BoundType,
    probability: f64,
    duration_us: Option<f64>,
    verdict: String,
    mc_estimate: Option<f64>,
    mc_stderr: Option<f64>,
}

fn analyze_group(target: &str, k: Option<usize>) -> Result<Vec<Protocol>> {
    use Protocol::*;
    Ok(match target {
        "ghz" => {
            let mut v = vec![GhzAll, GhzLinear, GhzLaqcc];
            if k.is_some() {
                v.extend([GhzHybridAll, GhzHybridLinear]);
            }
            v
        }
        "w" => vec![WDirect, WLaqcc],
        "or" => vec![OrReduction, OrExact],
        "all" => Protocol::ALL.into_iter().filter(|p| k.is_some() || !p.needs_k()).collect(),
        other => vec![Protocol::from_str(other)?],
    })
}

/// The LAQCC protocol a row is compared against.
fn reference(p: Protocol) -> Protocol {
    use Protocol::*;
    match p {
        GhzAll | GhzLinear | GhzHybridAll | GhzHybridLinear => GhzLaqcc,
        WDirect => WLaqcc,
        OrReduction => OrExact,
        other => other,
    }
}

fn analyze(a: AnalyzeArgs, seed: u64) -> Result<bool> {
    let params = match &a.device {
        Some(p) => DeviceParams::load(p)?,
        None => DeviceParams::brisbane(),
    };
    params.validate()?;
    let protocols = analyze_group(&a.target, a.k)?;
    let exprs = protocols
        .iter()
        .map(|&p| noise::success_expr(p, a.n, if p.needs_k() { a.k } else { None }))
        .collect::<Result<Vec<_>>>()?;
    let root = RandomSource::new(seed);
    let mut rows = Vec::with_capacity(exprs.len());
    for (i, e) in exprs.iter().enumerate() {
        let probability = noise::evaluate(e, &params).probability;
        let duration_us = match noise::duration_ns(e.protocol, e.n, e.k, &params) {
            Ok(ns) => Some(ns / 1000.0),
            Err(Error::Model(_)) | Err(Error::Validation(_)) => None,
            Err(err) => return Err(err),
        };
        let r = reference(e.protocol);
        let verdict = if r == e.protocol {
            "reference".to_string()
        } else {
            noise::crossover_numeric(e, &noise::success_expr(r, e.n, None)?, &params).winner
        };
        let mc = match a.trials {
            Some(t) => Some(noise::monte_carlo_bernoulli(&EventTally::from_expr(e), &params, t, &root.derive(i as u64))?),
            None => None,
        };
        rows.push(AnalyzeRow {
            protocol: e.protocol,
            n: e.n,
            k: e.k,
            bound: e.bound,
            probability,
            duration_us,
            verdict,
            mc_estimate: mc.map(|m| m.estimate),
            mc_stderr: mc.map(|m| m.stderr),
        });
    }
    let sink = a.out.sink(Format::Csv);
    emit(&sink, &rows, || {
        let mut header = vec!["protocol", "n", "probability", "duration_us", "verdict"];
        if a.trials.is_some() {
            header.extend(["mc_estimate", "mc_stderr"]);
        }
        Table {
            header,
            rows: rows
                .iter()
                .map(|r| {
                    let mut row = vec![
                        r.protocol.to_string(),
                        r.n.to_string(),
                        sci(r.probability),
                        r.duration_us.map(|d| format!("{d:.3}")).unwrap_or_default(),
                        r.verdict.clone(),
                    ];
                    if let (Some(m), Some(s)) = (r.mc_estimate, r.mc_stderr) {
                        row.extend([sci(m), sci(s)]);
                    }
                    row
                })
                .collect(),
        }
    })?;
    Ok(true)
}

// ---- selftest ----

#[derive(Serialize)]
struct SelftestRow {
    id: u8,
    name: &'static str,
    passed: bool,
    detail: String,
}

fn selftest(a: SelftestArgs, seed: u64) -> Result<bool> {
    let results = if a.only.is_empty() {
        acceptance::run_all(seed)
    } else {
        a.only
            .iter()
            .map(|&id| {
                let id = u8::try_from(id).map_err(|_| Error::Usage(format!("no criterion {id}")))?;
                acceptance::run_criterion(id, seed)
            })
            .collect::<Result<Vec<_>>>()?
    };
    for r in &results {
        println!("{}", r.line());
    }
    let passed = results.iter().filter(|r| r.passed).count();
    println!("{passed}/{} criteria passed", results.len());
    if a.out.out.is_some() || a.out.format.is_some() {
        // timings are left out so that files are reproducible
        let rows: Vec<SelftestRow> = results
            .iter()
            .map(|r| SelftestRow { id: r.id, name: r.name, passed: r.passed, detail: r.detail.clone() })
            .collect();
        let sink = a.out.sink(Format::Json);
        emit(&sink, &rows, || Table {
            header: vec!["id", "name", "passed", "detail"],
            rows: rows
                .iter()
                .map(|r| vec![r.id.to_string(), r.name.to_string(), r.passed.to_string(), r.detail.clone()])
                .collect(),
        })?;
    }
    Ok(passed == results.len())
}
