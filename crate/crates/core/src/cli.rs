//! The `plateau-rt` command line.
//!
//! Every command prints either a short human-readable summary or, with
//! `--json`, a single [`OutputRecord`] object.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::asymptotics;
use crate::error::{Error, Result};
use crate::group_walk::MutationRate;
use crate::runtime_formulas::{
    blo_level_times, blo_total_time, needle_gks_limit, needle_time_excluding_optimum,
    needle_time_uniform_start, MutationSchedule, ProblemSpec, RuntimeEstimate,
};
use crate::simulator::{self, SimulationConfig};
use crate::verify::{self, Suite};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_VERIFY_FAILED: i32 = 2;
pub const EXIT_CAPPED: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "plateau-rt",
    version,
    about = "Expected runtimes of the (1+1) EA on Needle and BlockLeadingOnes"
)]
struct Cli {
    /// Print one JSON object instead of a text summary
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Expected time to find the needle 1^ℓ
    Needle(NeedleArgs),
    /// Expected optimization time on BlockLeadingOnes
    Blo(BloArgs),
    /// Optimal static or fitness-dependent mutation rates
    Optimal(OptimalArgs),
    /// Run a verification suite
    Verify(VerifyArgs),
    /// Monte Carlo runs of the (1+1) EA
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("rate").required(true).args(["p", "p_over_ell"])))]
struct NeedleArgs {
    /// Block length ℓ
    #[arg(long)]
    ell: usize,
    /// Mutation rate p
    #[arg(long)]
    p: Option<f64>,
    /// Mutation rate given as c, meaning p = c/ℓ
    #[arg(long = "p-over-ell", value_name = "C")]
    p_over_ell: Option<f64>,
    /// Start uniformly among the non-optimal strings
    #[arg(long)]
    exclude_optimum: bool,
    /// Also report the value divided by 2^ℓ and its large-ℓ limit
    #[arg(long)]
    normalized: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Mode {
    Exact,
    Asymptotic,
}

#[derive(Debug, Args)]
struct BloArgs {
    /// Dimension n
    #[arg(long)]
    n: usize,
    /// Block length ℓ, dividing n
    #[arg(long)]
    ell: usize,
    /// static:<p> | c-over-n:<c> | adaptive | file:<path> (JSON array of n/ℓ rates)
    #[arg(long)]
    rate: String,
    #[arg(long, value_enum, default_value_t = Mode::Exact)]
    mode: Mode,
}

#[derive(Debug, Args)]
struct OptimalArgs {
    #[command(subcommand)]
    kind: OptimalKind,
}

#[derive(Debug, Subcommand)]
enum OptimalKind {
    /// λ and α of the optimal static rate λ/n
    Static {
        /// Dimension n, to report the rate λ/n
        #[arg(long)]
        n: Option<usize>,
        /// Block length ℓ, to report the runtime at λ/n (needs --n)
        #[arg(long, requires = "n")]
        ell: Option<usize>,
    },
    /// Optimal rate at fitness level m
    Adaptive {
        /// Block length ℓ
        #[arg(long)]
        ell: usize,
        /// Fitness level m (number of completed blocks)
        #[arg(long)]
        m: usize,
    },
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(value_enum)]
    suite: Suite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Problem {
    Needle,
    Blo,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    problem: Problem,
    /// Dimension n (BlockLeadingOnes only; Needle uses n = ℓ)
    #[arg(long)]
    n: Option<usize>,
    /// Block length ℓ
    #[arg(long)]
    ell: usize,
    /// static:<p> | c-over-n:<c> | adaptive | file:<path>
    #[arg(long)]
    rate: String,
    #[arg(long)]
    trials: usize,
    #[arg(long)]
    seed: u64,
    /// Write per-trial iteration counts to this CSV file
    #[arg(long)]
    out: Option<PathBuf>,
    /// Iteration cap per trial (default: 10⁴ times the exact expectation)
    #[arg(long)]
    cap: Option<u64>,
}

/// A parsed `--rate` argument.
#[derive(Debug, Clone, PartialEq)]
pub enum RateSpec {
    Static(f64),
    COverN(f64),
    Adaptive,
    File(PathBuf),
}

impl std::str::FromStr for RateSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let number = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::domain(format!("cannot parse {v:?} as a number in rate {s:?}")))
        };
        if s == "adaptive" {
            Ok(RateSpec::Adaptive)
        } else if let Some(v) = s.strip_prefix("static:") {
            Ok(RateSpec::Static(number(v)?))
        } else if let Some(v) = s.strip_prefix("c-over-n:") {
            Ok(RateSpec::COverN(number(v)?))
        } else if let Some(v) = s.strip_prefix("file:") {
            Ok(RateSpec::File(PathBuf::from(v)))
        } else {
            Err(Error::domain(format!(
                "unknown rate {s:?}; expected static:<p>, c-over-n:<c>, adaptive or file:<path>"
            )))
        }
    }
}

impl RateSpec {
    pub fn schedule(&self, spec: &ProblemSpec) -> Result<MutationSchedule> {
        let sched = match self {
            RateSpec::Static(p) => MutationSchedule::Static(MutationRate::new(*p)?),
            RateSpec::COverN(c) => MutationSchedule::Static(MutationRate::new(c / spec.n as f64)?),
            RateSpec::Adaptive => MutationSchedule::AdaptiveOptimal,
            RateSpec::File(path) => {
                let rates: Vec<f64> = serde_json::from_reader(File::open(path)?)?;
                MutationSchedule::Table(
                    rates
                        .into_iter()
                        .map(MutationRate::new)
                        .collect::<Result<_>>()?,
                )
            }
        };
        sched.resolve(spec)?;
        Ok(sched)
    }

    /// The constant c of a static rate c/n, if the rate is static.
    fn c(&self, n: usize) -> Option<f64> {
        match self {
            RateSpec::Static(p) => Some(p * n as f64),
            RateSpec::COverN(c) => Some(*c),
            _ => None,
        }
    }
}

/// One invocation's machine-readable output.
#[derive(Debug, Clone, Serialize)]
pub struct OutputRecord {
    pub command: String,
    pub inputs: Value,
    pub payload: Value,
    pub version: String,
    pub timestamp: String,
}

struct Outcome {
    command: &'static str,
    inputs: Value,
    payload: Value,
    text: String,
    code: i32,
}

/// Six significant digits.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if (-4..6).contains(&mag) {
        format!("{:.*}", (5 - mag).max(0) as usize, x)
    } else {
        format!("{x:.5e}")
    }
}

fn fmt_estimate(e: &RuntimeEstimate) -> String {
    if e.overflow {
        format!("beyond f64 range (log2 = {})", fmt_sig(e.log2_value))
    } else {
        format!("{} (log2 = {})", fmt_sig(e.value), fmt_sig(e.log2_value))
    }
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("output types serialize")
}

fn needle(a: &NeedleArgs) -> Result<Outcome> {
    let ell_f = a.ell as f64;
    let p = match (a.p, a.p_over_ell) {
        (Some(p), _) => p,
        (None, Some(c)) => c / ell_f,
        (None, None) => unreachable!("clap requires one of --p and --p-over-ell"),
    };
    let rate = MutationRate::new(p)?;
    let est = if a.exclude_optimum {
        needle_time_excluding_optimum(a.ell, rate)?
    } else {
        needle_time_uniform_start(a.ell, rate)?
    };
    let mut text = format!(
        "Needle ell={} p={} ({} start)\nexpected iterations: {}\n",
        a.ell,
        fmt_sig(p),
        if a.exclude_optimum {
            "off-optimum"
        } else {
            "uniform"
        },
        fmt_estimate(&est)
    );
    let mut payload = json!({ "estimate": to_value(&est) });
    if a.normalized {
        let c = p * ell_f;
        let normalized = (est.ln() - ell_f * std::f64::consts::LN_2).exp();
        let limit = needle_gks_limit(c)?;
        text += &format!(
            "normalized by 2^ell: {}\nlimit 1/(1-e^-c) at c={}: {}\n",
            fmt_sig(normalized),
            fmt_sig(c),
            fmt_sig(limit)
        );
        payload["normalized"] = json!(normalized);
        payload["c"] = json!(c);
        payload["limit"] = json!(limit);
    }
    Ok(Outcome {
        command: "needle",
        inputs: json!({
            "ell": a.ell, "p": p, "p_over_ell": a.p_over_ell,
            "exclude_optimum": a.exclude_optimum, "normalized": a.normalized,
        }),
        payload,
        text,
        code: EXIT_OK,
    })
}

fn blo(a: &BloArgs) -> Result<Outcome> {
    let spec = ProblemSpec::block_leading_ones(a.n, a.ell)?;
    let rate: RateSpec = a.rate.parse()?;
    let sched = rate.schedule(&spec)?;
    let exact = blo_total_time(&spec, &sched)?;
    let inputs = json!({ "n": a.n, "ell": a.ell, "rate": a.rate, "mode": a.mode });
    let mut text = format!("BlockLeadingOnes n={} ell={} rate={}\n", a.n, a.ell, a.rate);
    let mut payload = json!({ "exact": to_value(&exact) });

    if sched == MutationSchedule::AdaptiveOptimal {
        let levels = blo_level_times(&spec, &sched)?;
        let rates = sched.resolve(&spec)?;
        text += "    m          rate      rate*k    level time\n";
        let mut rows = Vec::new();
        for (m, (r, t)) in rates.iter().zip(&levels).enumerate() {
            let k = m * a.ell;
            text += &format!(
                "{m:>5} {:>13} {:>11} {:>13}\n",
                fmt_sig(r.get()),
                if k > 0 {
                    fmt_sig(r.get() * k as f64)
                } else {
                    "-".into()
                },
                fmt_sig(t.value)
            );
            rows.push(json!({ "m": m, "rate": r.get(), "level_time": to_value(t) }));
        }
        payload["levels"] = Value::Array(rows);
    }

    match a.mode {
        Mode::Exact => {
            text += &format!("expected iterations: {}\n", fmt_estimate(&exact));
        }
        Mode::Asymptotic => {
            let (asym, warning) = if let Some(c) = rate.c(a.n) {
                let r = asymptotics::blo_asymptotic_static(a.n, a.ell, c)?;
                (r.estimate, r.regime_warning)
            } else if rate == RateSpec::Adaptive {
                let v = asymptotics::optimal_adaptive_runtime(a.n, a.ell)?;
                (
                    RuntimeEstimate::from_value(
                        v,
                        crate::runtime_formulas::EstimateMethod::Asymptotic,
                    ),
                    10 * a.ell > a.n,
                )
            } else {
                return Err(Error::domain(
                    "asymptotic mode needs a static, c-over-n or adaptive rate",
                ));
            };
            let ratio = (exact.ln() - asym.ln()).exp();
            text += &format!(
                "asymptotic: {}\nexact:      {}\nexact/asymptotic: {}\n",
                fmt_estimate(&asym),
                fmt_estimate(&exact),
                fmt_sig(ratio)
            );
            if warning {
                text += "warning: ell > n/10, outside the regime of the asymptotic formula\n";
            }
            payload["asymptotic"] = to_value(&asym);
            payload["ratio"] = json!(ratio);
            payload["regime_warning"] = json!(warning);
        }
    }
    Ok(Outcome {
        command: "blo",
        inputs,
        payload,
        text,
        code: EXIT_OK,
    })
}

fn optimal(a: &OptimalArgs) -> Result<Outcome> {
    match a.kind {
        OptimalKind::Static { n, ell } => {
            let opt = asymptotics::static_optimum();
            let ratio = (std::f64::consts::E / 2.0) / opt.alpha;
            let mut text = format!(
                "lambda = {:.12}\nalpha  = {:.12}\nstationarity residual = {:.3e}\nadaptive/static runtime ratio (e/2)/alpha = {:.6}\n",
                opt.lambda, opt.alpha, opt.stationarity_residual, ratio
            );
            let mut payload = json!({ "optimum": to_value(&opt), "adaptive_over_static": ratio });
            if let Some(n) = n {
                let rate = opt.lambda / n as f64;
                text += &format!("rate lambda/n = {}\n", fmt_sig(rate));
                payload["rate"] = json!(rate);
                if let Some(ell) = ell {
                    let res = asymptotics::optimal_static_rate(n, ell)?;
                    text += &format!(
                        "asymptotic runtime: {}\n",
                        fmt_estimate(&res.predicted_runtime)
                    );
                    payload["result"] = to_value(&res);
                }
            }
            Ok(Outcome {
                command: "optimal static",
                inputs: json!({ "n": n, "ell": ell }),
                payload,
                text,
                code: EXIT_OK,
            })
        }
        OptimalKind::Adaptive { ell, m } => {
            let exact = asymptotics::optimal_adaptive_rate_exact(m, ell)?;
            let mut text =
                format!(
                "fitness m={m}, ell={ell}, k={}\nnumeric minimizer: p = {}{}\n  E[T'_k] at p: {}\n",
                m * ell,
                fmt_sig(exact.rate.get()),
                if exact.boundary { " (boundary of [1e-9, 0.5])" } else { "" },
                fmt_estimate(&exact.predicted_runtime)
            );
            if exact.scan_fallback {
                text += "warning: objective not unimodal on the search grid; dense scan used\n";
            }
            let mut payload = json!({ "exact": to_value(&exact) });
            if m >= 1 {
                let closed = asymptotics::optimal_adaptive_rate_closed(m, ell)?;
                let gap = (closed.result.rate.get() - exact.rate.get()).abs() / exact.rate.get();
                text += &format!(
                    "closed form:       p = {}{}\n  E[T'_k] at p: {}\nlarge-ell form:    p = {}\n1/k form:          p = {}\nrelative gap closed vs numeric: {}\n",
                    fmt_sig(closed.result.rate.get()),
                    if closed.result.boundary { " (clamped to 0.5)" } else { "" },
                    fmt_estimate(&closed.result.predicted_runtime),
                    fmt_sig(closed.large_ell_rate),
                    fmt_sig(closed.large_m_rate),
                    fmt_sig(gap)
                );
                payload["closed"] = to_value(&closed);
                payload["relative_gap"] = json!(gap);
            } else {
                text += "closed form: undefined at m = 0\n";
            }
            Ok(Outcome {
                command: "optimal adaptive",
                inputs: json!({ "ell": ell, "m": m }),
                payload,
                text,
                code: EXIT_OK,
            })
        }
    }
}

fn run_verify(a: &VerifyArgs) -> Result<Outcome> {
    let report = verify::run_suite(a.suite)?;
    let mut text = String::new();
    for c in &report.checks {
        text += &format!(
            "[{}] {}: {}\n",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    let failed = report.checks.iter().filter(|c| !c.passed).count();
    text += &format!(
        "{}: {} checks, {} failed\n",
        a.suite.name(),
        report.checks.len(),
        failed
    );
    Ok(Outcome {
        command: "verify",
        inputs: json!({ "suite": a.suite }),
        payload: to_value(&report),
        text,
        code: if report.passed {
            EXIT_OK
        } else {
            EXIT_VERIFY_FAILED
        },
    })
}

fn simulate(a: &SimulateArgs) -> Result<Outcome> {
    let spec = match a.problem {
        Problem::Needle => {
            if a.n.is_some_and(|n| n != a.ell) {
                return Err(Error::domain(
                    "Needle uses n = ell; drop --n or make it equal",
                ));
            }
            ProblemSpec::needle(a.ell)?
        }
        Problem::Blo => {
            let n =
                a.n.ok_or_else(|| Error::domain("--n is required for --problem blo"))?;
            ProblemSpec::block_leading_ones(n, a.ell)?
        }
    };
    let rate: RateSpec = a.rate.parse()?;
    let sched = rate.schedule(&spec)?;
    let mut config = SimulationConfig::new(spec, sched.clone(), a.trials, a.seed)?;
    if let Some(cap) = a.cap {
        config.iteration_cap = cap;
    }
    let report = simulator::run(&config)?;
    if let Some(path) = &a.out {
        let file = BufWriter::new(File::create(path)?);
        report.write_csv(file)?;
    }
    let expected = blo_total_time(&spec, &sched)?;
    let z = report.z_score(expected.value);
    let mut text = format!(
        "{} n={} ell={} rate={} trials={} seed={}\nmean: {}  stderr: {}\nexact: {}\nz-score: {}\ncapped trials: {}\n",
        match a.problem {
            Problem::Needle => "Needle",
            Problem::Blo => "BlockLeadingOnes",
        },
        spec.n,
        spec.ell,
        a.rate,
        a.trials,
        a.seed,
        fmt_sig(report.mean),
        report.stderr.map_or("-".into(), fmt_sig),
        fmt_estimate(&expected),
        z.map_or("-".into(), fmt_sig),
        report.capped_trials
    );
    if let Some(path) = &a.out {
        text += &format!("wrote {}\n", path.display());
    }
    Ok(Outcome {
        command: "simulate",
        inputs: json!({
            "problem": a.problem, "n": spec.n, "ell": spec.ell, "rate": a.rate,
            "trials": a.trials, "seed": a.seed, "out": a.out, "cap": config.iteration_cap,
        }),
        payload: json!({ "report": to_value(&report), "exact": to_value(&expected), "z_score": z }),
        text,
        code: if report.capped_trials > 0 {
            EXIT_CAPPED
        } else {
            EXIT_OK
        },
    })
}

fn dispatch(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Needle(a) => needle(a),
        Command::Blo(a) => blo(a),
        Command::Optimal(a) => optimal(a),
        Command::Verify(a) => run_verify(a),
        Command::Simulate(a) => simulate(a),
    }
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_INVALID
            } else {
                EXIT_OK
            };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{rendered}")
            } else {
                write!(out, "{rendered}")
            };
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(outcome) => {
            let written = if cli.json {
                let record = OutputRecord {
                    command: outcome.command.to_owned(),
                    inputs: outcome.inputs,
                    payload: outcome.payload,
                    version: env!("CARGO_PKG_VERSION").to_owned(),
                    timestamp: chrono::Utc::now().to_rfc3339(),
                };
                serde_json::to_writer_pretty(&mut *out, &record)
                    .map_err(Error::from)
                    .and_then(|_| writeln!(out).map_err(Error::from))
            } else {
                write!(out, "{}", outcome.text).map_err(Error::from)
            };
            if let Err(e) = written {
                let _ = writeln!(err, "error: {e}");
                return EXIT_INVALID;
            }
            if outcome.code == EXIT_CAPPED {
                let _ = writeln!(err, "error: some trials hit the iteration cap; their runtimes are excluded from the mean");
            }
            outcome.code
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_INVALID
        }
    }
}
