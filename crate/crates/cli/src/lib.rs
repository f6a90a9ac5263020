//! Command-line front end: argument parsing, file I/O and result emission
//! for the `relnet` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use relnet::design::{self, active_difference, apply_design, DesignProblem, DesignResult};
use relnet::rbd::{eval_rbd, rbd_to_network, RbdExpr};
use relnet::reliability::{estimate_reliability, outcomes_jsonl, LogicSpec};
use relnet::scenario::sample_scenarios;
use relnet::{DesignError, Network, RbdError, ReliabilityError};

pub const SEED_ENV: &str = "RELNET_SEED";

#[derive(Debug, Parser)]
#[command(name = "relnet", version, about = "Network reliability estimation and design")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the reliability of a network.
    Eval(EvalArgs),
    /// Find the most reliable design within one budget.
    Design(DesignArgs),
    /// Sweep budgets and write the Pareto frontier as CSV.
    Pareto(ParetoArgs),
    /// Compare the closed-form and sampled reliability of a block diagram.
    Rbd(RbdArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Network JSON file (block diagram JSON for `rbd`).
    #[arg(long)]
    pub network: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    /// Sampling seed; the RELNET_SEED environment variable takes precedence.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Mission time in years.
    #[arg(long, default_value_t = 5.0)]
    pub threshold: f64,
    /// `all-sinks`, or `subset:ID,ID,...` to require only the listed sinks.
    #[arg(long, default_value = "all-sinks", value_parser = parse_logic)]
    pub logic: LogicSpec,
    /// Write the result here instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Report all timings as zero so that outputs are byte-reproducible.
    #[arg(long)]
    pub no_timings: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Milp,
    Relaxed,
    Both,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value_t = Mode::Milp)]
    pub mode: Mode,
    /// Also write per-scenario outcomes as JSON lines.
    #[arg(long)]
    pub outcomes: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct DesignArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value_t = Mode::Milp)]
    pub mode: Mode,
    #[arg(long)]
    pub budget: f64,
    /// Ignore candidate edges and design capacities only.
    #[arg(long)]
    pub no_topology: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ParetoArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value_t = Mode::Both)]
    pub mode: Mode,
    /// Comma-separated, ascending.
    #[arg(long, value_delimiter = ',', required = true)]
    pub budgets: Vec<f64>,
    #[arg(long)]
    pub no_topology: bool,
    /// Directory for the per-budget design files; defaults to
    /// `<output>_designs` next to the CSV.
    #[arg(long)]
    pub designs_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RbdArgs {
    #[command(flatten)]
    pub common: Common,
    /// Also write the compiled network JSON.
    #[arg(long)]
    pub export_network: Option<PathBuf>,
}

fn parse_logic(s: &str) -> Result<LogicSpec, String> {
    if s == "all-sinks" {
        return Ok(LogicSpec::AllSinks);
    }
    match s.strip_prefix("subset:") {
        Some(ids) if !ids.is_empty() => Ok(LogicSpec::SubsetReachable {
            required: ids.split(',').map(|x| x.trim().to_string()).collect(),
        }),
        _ => Err(format!("expected `all-sinks` or `subset:ID,...`, got `{s}`")),
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot read `{path}`: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write `{path}`: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("`{path}`: {source}")]
    Schema { path: PathBuf, source: serde_json::Error },
    #[error("invalid argument `{arg}`: {reason}")]
    Argument { arg: &'static str, reason: String },
    #[error(transparent)]
    Reliability(#[from] ReliabilityError),
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error(transparent)]
    Rbd(#[from] RbdError),
    #[error("worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

impl CliError {
    /// 2 for solver limits, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        let limit = match self {
            CliError::Reliability(e) => e.is_solver_limit(),
            CliError::Design(e) => e.is_solver_limit(),
            _ => false,
        };
        if limit {
            2
        } else {
            1
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let common = match &cli.command {
        Command::Eval(a) => &a.common,
        Command::Design(a) => &a.common,
        Command::Pareto(a) => &a.common,
        Command::Rbd(a) => &a.common,
    };
    check_common(common)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(common.workers).build()?;
    pool.install(|| match &cli.command {
        Command::Eval(a) => eval(a),
        Command::Design(a) => design_cmd(a),
        Command::Pareto(a) => pareto(a),
        Command::Rbd(a) => rbd(a),
    })
}

fn check_common(c: &Common) -> Result<(), CliError> {
    if c.samples == 0 {
        return Err(CliError::Argument {
            arg: "--samples",
            reason: "must be at least 1".into(),
        });
    }
    if c.workers == 0 {
        return Err(CliError::Argument {
            arg: "--workers",
            reason: "must be at least 1".into(),
        });
    }
    if !(c.threshold >= 0.0 && c.threshold.is_finite()) {
        return Err(CliError::Argument {
            arg: "--threshold",
            reason: format!("must be a non-negative number of years, got {}", c.threshold),
        });
    }
    seed(c).map(|_| ())
}

fn seed(c: &Common) -> Result<u64, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| CliError::Argument {
            arg: SEED_ENV,
            reason: format!("`{v}` is not an unsigned integer"),
        }),
        Err(_) => Ok(c.seed),
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_network(path: &Path) -> Result<Network, CliError> {
    Network::from_json(&read(path)?).map_err(|source| CliError::Schema {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| CliError::Write {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, text).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

fn emit(c: &Common, text: &str) -> Result<(), CliError> {
    match &c.output {
        Some(p) => write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("result serializes");
    s.push('\n');
    s
}

fn seconds(c: &Common, clock: Instant) -> f64 {
    if c.no_timings {
        0.0
    } else {
        clock.elapsed().as_secs_f64()
    }
}

#[derive(Serialize)]
struct EvalReport {
    #[serde(rename = "R")]
    r: f64,
    samples: usize,
    stderr: f64,
    seconds: f64,
}

fn eval(a: &EvalArgs) -> Result<(), CliError> {
    let c = &a.common;
    let clock = Instant::now();
    let net = load_network(&c.network)?;
    let set = sample_scenarios(&net, c.samples, c.threshold, seed(c)?);
    let est = estimate_reliability(&net, &set, &c.logic, a.mode != Mode::Relaxed)?;
    if let Some(p) = &a.outcomes {
        write(p, &outcomes_jsonl(&set, &est))?;
    }
    emit(
        c,
        &to_json(&EvalReport {
            r: est.value,
            samples: est.samples,
            stderr: est.standard_error,
            seconds: seconds(c, clock),
        }),
    )
}

fn problem(c: &Common, no_topology: bool) -> Result<DesignProblem, CliError> {
    let net = load_network(&c.network)?;
    let set = sample_scenarios(&net, c.samples, c.threshold, seed(c)?);
    let mut p = DesignProblem::new(net, set, 0.0);
    p.enable_topology &= !no_topology;
    p.logic = c.logic.clone();
    Ok(p)
}

fn scrub(c: &Common, mut r: DesignResult) -> DesignResult {
    if c.no_timings {
        r.solve_seconds = 0.0;
    }
    r
}

#[derive(Serialize)]
struct BothReport {
    milp: DesignResult,
    relaxed: DesignResult,
    active_diff_pct: f64,
}

fn design_cmd(a: &DesignArgs) -> Result<(), CliError> {
    let c = &a.common;
    let p = problem(c, a.no_topology)?.with_budget(a.budget);
    let solve = |relaxed: bool| -> Result<DesignResult, CliError> {
        Ok(scrub(c, design::solve_design(&p.clone().relaxed(relaxed))?))
    };
    let (text, designed) = match a.mode {
        Mode::Both => {
            let milp = solve(false)?;
            let relaxed = solve(true)?;
            let active_diff_pct = active_difference(&milp, &relaxed)?;
            let designed = milp.design.clone();
            (to_json(&BothReport { milp, relaxed, active_diff_pct }), designed)
        }
        m => {
            let r = solve(m == Mode::Relaxed)?;
            (to_json(&r), r.design.clone())
        }
    };
    emit(c, &text)?;
    if let (Some(out), Some(d)) = (&c.output, designed) {
        write(&sibling(out, "network.json"), &(apply_design(&p.network, &d).to_json() + "\n"))?;
    }
    Ok(())
}

/// `dir/stem.json` -> `dir/stem.<suffix>`
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn pct(r: f64) -> String {
    format!("{:.4}", 100.0 * r)
}

fn pareto(a: &ParetoArgs) -> Result<(), CliError> {
    let c = &a.common;
    if a.budgets.is_empty() {
        return Err(CliError::Argument {
            arg: "--budgets",
            reason: "at least one budget is required".into(),
        });
    }
    if a.budgets.windows(2).any(|w| w[0] > w[1]) {
        return Err(CliError::Argument {
            arg: "--budgets",
            reason: "budgets must be ascending".into(),
        });
    }
    let p = problem(c, a.no_topology)?;
    let sweep = |relaxed: bool| -> Result<Option<design::ParetoFrontier>, CliError> {
        let wanted = a.mode == Mode::Both || (a.mode == Mode::Relaxed) == relaxed;
        if !wanted {
            return Ok(None);
        }
        let f = design::pareto_sweep(&p.clone().relaxed(relaxed), &a.budgets)?;
        if let Some((budget, msg)) = f.failures.first() {
            eprintln!("budget {budget}: {msg}");
        }
        Ok(Some(f))
    };
    let milp = sweep(false)?;
    let relaxed = sweep(true)?;

    let find = |f: &Option<design::ParetoFrontier>, b: f64| {
        f.as_ref().and_then(|f| f.pairs.iter().find(|p| p.budget == b)).map(|p| scrub(c, p.result.clone()))
    };
    let designs_dir = a.designs_dir.clone().or_else(|| {
        c.output.as_ref().map(|o| {
            let stem = o.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            o.with_file_name(format!("{stem}_designs"))
        })
    });

    let mut csv = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    csv.write_record([
        "epsilon",
        "cost",
        "reliability_milp",
        "reliability_lp",
        "active_diff_pct",
        "milp_seconds",
        "lp_seconds",
    ])
    .expect("in-memory write");
    let mut failed = None;
    for &b in &a.budgets {
        let m = find(&milp, b);
        let r = find(&relaxed, b);
        if m.is_none() && r.is_none() {
            failed.get_or_insert(b);
        }
        let diff = match (&m, &r) {
            (Some(m), Some(r)) => format!("{:.2}", active_difference(m, r)?),
            _ => String::new(),
        };
        let cost = m.as_ref().or(r.as_ref()).map(|x| format!("{}", x.cost)).unwrap_or_default();
        let opt = |x: &Option<DesignResult>, f: fn(&DesignResult) -> String| x.as_ref().map(f).unwrap_or_default();
        csv.write_record([
            format!("{b}"),
            cost,
            opt(&m, |x| pct(x.reliability)),
            opt(&r, |x| pct(x.reliability)),
            diff,
            opt(&m, |x| format!("{:.3}", x.solve_seconds)),
            opt(&r, |x| format!("{:.3}", x.solve_seconds)),
        ])
        .expect("in-memory write");
        if let Some(dir) = &designs_dir {
            for (tag, x) in [("milp", &m), ("lp", &r)] {
                if let Some(x) = x {
                    write(&dir.join(format!("eps_{b}_{tag}.json")), &to_json(x))?;
                }
            }
        }
    }
    let text = String::from_utf8(csv.into_inner().expect("in-memory flush")).expect("csv is utf-8");
    emit(c, &text)?;
    match failed {
        Some(b) => {
            let msg = [&milp, &relaxed]
                .iter()
                .filter_map(|f| f.as_ref())
                .flat_map(|f| f.failures.iter())
                .find(|(x, _)| *x == b)
                .map(|(_, m)| m.clone())
                .unwrap_or_default();
            Err(CliError::Argument {
                arg: "--budgets",
                reason: format!("budget {b} failed: {msg}"),
            })
        }
        None => Ok(()),
    }
}

#[derive(Serialize)]
struct RbdReport {
    analytic: f64,
    monte_carlo: f64,
    abs_diff: f64,
    stderr: f64,
    samples: usize,
}

fn rbd(a: &RbdArgs) -> Result<(), CliError> {
    let c = &a.common;
    let expr = RbdExpr::from_json(&read(&c.network)?)?;
    let analytic = eval_rbd(&expr);
    let net = rbd_to_network(&expr)?;
    if let Some(p) = &a.export_network {
        write(p, &(net.to_json() + "\n"))?;
    }
    // Exponential components are sampled at the diagram's own evaluation time.
    let threshold = expr.eval_time().unwrap_or(c.threshold);
    let set = sample_scenarios(&net, c.samples, threshold, seed(c)?);
    let est = estimate_reliability(&net, &set, &LogicSpec::AllSinks, false)?;
    emit(
        c,
        &to_json(&RbdReport {
            analytic,
            monte_carlo: est.value,
            abs_diff: (analytic - est.value).abs(),
            stderr: est.standard_error,
            samples: est.samples,
        }),
    )
}
