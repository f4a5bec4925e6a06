//! `sblab`: evaluate the sample-bid mechanism, dump best responses, run the
//! certifications, and print the lower bound and gap report.
//!
//! Exit codes: 0 success or pass, 1 certification or oracle failure, 2 bad
//! input.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use sblab::cert_mhr::{self, MhrGrid, MHR_ALPHA};
use sblab::cert_regular::{self, RegularGrid, REGULAR_ALPHA};
use sblab::curves::{build, validate, Class, DistributionSpec, RevenueCurve};
use sblab::lower_bound::{lower_bound, LbInstance};
use sblab::numerics::GridScale;
use sblab::pricing::{gap_report, GapConstants};
use sblab::sample_bid::{best_response, evaluate, Bid};

mod oracle;

#[derive(Parser)]
#[command(name = "sblab", version, about = "Sample-bid mechanism lab")]
struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scale {
    Coarse,
    Default,
    Fine,
}

impl From<Scale> for GridScale {
    fn from(s: Scale) -> GridScale {
        match s {
            Scale::Coarse => GridScale::Coarse,
            Scale::Default => GridScale::Default,
            Scale::Fine => GridScale::Fine,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    Mhr,
    Regular,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GapClass {
    Regular,
    Mhr,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Revenue, optimal revenue and their ratio on one distribution.
    Eval {
        #[arg(long)]
        spec: PathBuf,
        /// Defaults to 0.824 for MHR distributions and 0.7 otherwise.
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Best response over a grid of values.
    BestResponse {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        alpha: Option<f64>,
        /// Largest value; defaults to three times the monopoly reserve.
        #[arg(long)]
        v_max: Option<f64>,
        #[arg(long, default_value_t = 100)]
        points: usize,
    },
    /// Certify a revenue lower bound on a grid.
    Verify {
        #[arg(value_enum)]
        which: Which,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, value_enum, default_value_t = Scale::Default)]
        grid: Scale,
        /// Evaluate worst cell corners instead of grid nodes.
        #[arg(long)]
        certified: bool,
    },
    /// Smallest ratio any mechanism can guarantee on the uniform instance.
    LowerBound {
        #[arg(long, default_value_t = 1.0)]
        l: f64,
        #[arg(long, default_value_t = 2.0)]
        h: f64,
    },
    /// Revelation-gap intervals.
    GapReport {
        #[arg(long = "class", value_enum, default_value_t = GapClass::Both)]
        class: GapClass,
        /// JSON file with `{"regular": {...}, "mhr": {...}}` overrides.
        #[arg(long)]
        constants: Option<PathBuf>,
    },
    /// Compare the best-response solver with brute force on random values.
    OracleCompare {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, default_value_t = 10_000)]
        n_bids: usize,
    },
}

enum Failure {
    /// Exit 2.
    Input(String),
    /// Exit 1, after the report has been printed.
    Check,
}

impl From<sblab::Error> for Failure {
    fn from(e: sblab::Error) -> Failure {
        Failure::Input(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check) => ExitCode::from(1),
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("SBLAB_THREADS") else { return Ok(()) };
    let n: usize = raw.trim().parse().map_err(|_| format!("SBLAB_THREADS = {raw:?} is not a thread count"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn run(cli: &Cli) -> Outcome {
    let fmt = cli.format;
    match &cli.command {
        Command::Eval { spec, alpha } => {
            let curve = load(spec)?;
            let alpha = check_alpha(alpha.unwrap_or_else(|| class_alpha(&curve)))?;
            let e = evaluate(&curve, alpha)?;
            emit(fmt, &e, |w| {
                w.write_record(["revenue", "opt_revenue", "ratio", "alpha"])?;
                w.write_record([e.revenue, e.opt_revenue, e.ratio, e.alpha].map(|x| x.to_string()))
            })
        }
        Command::BestResponse { spec, alpha, v_max, points } => {
            let curve = load(spec)?;
            let alpha = check_alpha(alpha.unwrap_or_else(|| class_alpha(&curve)))?;
            let v_max = v_max.unwrap_or(3.0 * curve.v_m());
            if !(v_max > 0.0 && v_max.is_finite()) || *points == 0 {
                return Err(Failure::Input("need a positive --v-max and --points".into()));
            }
            let rows: Vec<ResponseRow> = (0..=*points)
                .map(|i| {
                    let v = v_max * i as f64 / *points as f64;
                    let br = best_response(v, &curve, alpha);
                    ResponseRow { v, bid: br.bid, utility: br.utility, kind: br.kind }
                })
                .collect();
            emit(fmt, &rows, |w| {
                w.write_record(["v", "bid", "utility", "kind"])?;
                for r in &rows {
                    w.write_record([r.v.to_string(), bid_text(r.bid), r.utility.to_string(), kind_text(&r.kind)])?;
                }
                Ok(())
            })
        }
        Command::Verify { which: Which::Mhr, alpha, grid, certified } => {
            let alpha = check_alpha(alpha.unwrap_or(MHR_ALPHA))?;
            let report = cert_mhr::verify_mhr(alpha, &MhrGrid::preset((*grid).into()), *certified)?;
            emit(fmt, &report, |w| {
                w.write_record(["alpha", "target", "min_bound", "q_m", "w", "case", "pass"])?;
                let a = &report.argmin;
                w.write_record([
                    report.alpha.to_string(),
                    report.target.to_string(),
                    report.min_bound.to_string(),
                    a.q_m.to_string(),
                    a.w.to_string(),
                    kind_text(&a.case),
                    report.pass.to_string(),
                ])
            })?;
            verdict(report.pass)
        }
        Command::Verify { which: Which::Regular, alpha, grid, certified } => {
            let alpha = check_alpha(alpha.unwrap_or(REGULAR_ALPHA))?;
            if alpha >= 1.0 {
                return Err(Failure::Input("regular certification needs alpha < 1".into()));
            }
            let report = cert_regular::verify_regular(alpha, &RegularGrid::preset((*grid).into()), *certified)?;
            emit(fmt, &report, |w| {
                w.write_record(["q_m", "q_pp", "w", "case", "v_crit", "cert_revenue_lb"])?;
                for c in &report.cells {
                    w.write_record([
                        c.q_m.to_string(),
                        c.q_pp.to_string(),
                        c.w.to_string(),
                        kind_text(&c.case),
                        c.v_crit.to_string(),
                        c.cert_revenue_lb.to_string(),
                    ])?;
                }
                Ok(())
            })?;
            verdict(report.pass)
        }
        Command::LowerBound { l, h } => {
            let inst = LbInstance::new(*l, *h)?;
            let lb = lower_bound(inst, 1e-12)?;
            emit(fmt, &lb, |w| {
                w.write_record(["beta", "l", "h", "non_reference"])?;
                w.write_record([lb.beta.to_string(), lb.l.to_string(), lb.h.to_string(), lb.non_reference.to_string()])
            })
        }
        Command::GapReport { class, constants } => {
            let consts = match constants {
                Some(p) => {
                    let text = read(p)?;
                    serde_json::from_str::<ConstantsFile>(&text)
                        .map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?
                }
                None => ConstantsFile::default(),
            };
            let mut rows = Vec::new();
            if *class != GapClass::Mhr {
                rows.push(GapRow { class: "regular", interval: gap_report(&consts.regular)? });
            }
            if *class != GapClass::Regular {
                rows.push(GapRow { class: "mhr", interval: gap_report(&consts.mhr)? });
            }
            emit(fmt, &rows, |w| {
                w.write_record(["class", "lo", "hi"])?;
                for r in &rows {
                    w.write_record([r.class.to_string(), r.interval.lo.to_string(), r.interval.hi.to_string()])?;
                }
                Ok(())
            })
        }
        Command::OracleCompare { spec, alpha, seed, instances, n_bids } => {
            let curve = load(spec)?;
            let alpha = check_alpha(alpha.unwrap_or_else(|| class_alpha(&curve)))?;
            let report = oracle::compare(&curve, alpha, *seed, *instances, *n_bids);
            emit(fmt, &report, |w| {
                w.write_record(["instances", "max_gap", "worst_value", "pass"])?;
                w.write_record([
                    report.instances.to_string(),
                    report.max_gap.to_string(),
                    report.worst_value.to_string(),
                    report.pass.to_string(),
                ])
            })?;
            verdict(report.pass)
        }
    }
}

#[derive(Serialize)]
struct ResponseRow {
    v: f64,
    bid: Bid,
    utility: f64,
    kind: sblab::sample_bid::BidKind,
}

#[derive(Serialize)]
struct GapRow {
    class: &'static str,
    #[serde(flatten)]
    interval: sblab::pricing::GapInterval,
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ConstantsFile {
    regular: GapConstants,
    mhr: GapConstants,
}

impl Default for ConstantsFile {
    fn default() -> Self {
        ConstantsFile { regular: GapConstants::REGULAR, mhr: GapConstants::MHR }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load(path: &Path) -> Result<RevenueCurve, Failure> {
    let text = read(path)?;
    let spec: DistributionSpec =
        serde_json::from_str(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    Ok(build(&spec)?)
}

fn class_alpha(curve: &RevenueCurve) -> f64 {
    if validate(curve, Class::Mhr).ok {
        MHR_ALPHA
    } else {
        REGULAR_ALPHA
    }
}

fn check_alpha(alpha: f64) -> Result<f64, Failure> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(alpha)
    } else {
        Err(Failure::Input(format!("--alpha {alpha} must be in (0, 1]")))
    }
}

fn verdict(pass: bool) -> Outcome {
    if pass {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

fn bid_text(b: Bid) -> String {
    match b {
        Bid::Top => "TOP".into(),
        Bid::Finite(x) => x.to_string(),
    }
}

/// Serialized name of a unit enum.
fn kind_text<T: Serialize>(t: &T) -> String {
    serde_json::to_value(t).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
}

fn emit<T: Serialize>(fmt: Format, value: &T, csv_rows: impl FnOnce(&mut csv::Writer<std::io::StdoutLock>) -> csv::Result<()>) -> Outcome {
    let out = std::io::stdout();
    match fmt {
        Format::Json => {
            let mut lock = out.lock();
            serde_json::to_writer_pretty(&mut lock, value).map_err(|e| Failure::Input(e.to_string()))?;
            writeln!(lock).map_err(|e| Failure::Input(e.to_string()))
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out.lock());
            csv_rows(&mut w).map_err(|e| Failure::Input(e.to_string()))?;
            w.flush().map_err(|e| Failure::Input(e.to_string()))
        }
    }
}
