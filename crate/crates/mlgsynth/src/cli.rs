//! Command-line front end.
//!
//! Exit codes: 0 success; 1 the network file has violations; 2 infeasible
//! (budget too small, or a capacity at or below its load); 3 numeric failure
//! or no convergence; 4 unreadable or malformed input and bad flags.

use std::ffi::OsString;
use std::io::Write;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mlgsynth_core::{
    aggregate, compare_methods_on_loads, mean_network_delay, required_service_rate,
    square_root_assignment, synthesize_loads, LoadSet, PerfError, SizingInput, SynthesisError,
    SynthesisOptions,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::netfile::{CapacitiesFile, FileError, Issue, Model, NetworkFile};
use crate::report::{self, q, RunReport};
use crate::sim::{simulate_network, SimConfig, SimError};

pub const EXIT_OK: u8 = 0;
pub const EXIT_VIOLATIONS: u8 = 1;
pub const EXIT_INFEASIBLE: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;
pub const EXIT_INPUT: u8 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "mlgsynth",
    version,
    about = "Capacity synthesis for overlay networks carrying self-similar traffic",
    long_about = "Capacity synthesis for overlay networks carrying self-similar traffic.\n\n\
        Reports are JSON on standard output (or --out); diagnostics go to standard error.\n\
        Exit codes: 0 ok, 1 file violations, 2 infeasible, 3 numeric failure or no \
        convergence, 4 unreadable input or bad flags."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a network file and list every violation.
    Validate(Common),
    /// Aggregate demand flows onto physical edges.
    Aggregate(Common),
    /// Choose link capacities that minimize mean network delay under the budget.
    Synthesize(SynthesizeArgs),
    /// Run the gradient method and the square-root baseline on the same network.
    Compare(CompareArgs),
    /// Simulate fluid queues fed by fractional Brownian traffic.
    Simulate(SimulateArgs),
    /// Service rate needed to keep buffer overflow probability below a target.
    SizeLink(SizeLinkArgs),
}

#[derive(Debug, Args, Serialize)]
struct Common {
    /// Network specification file (JSON).
    network: String,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<String>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Method {
    Gradient,
    Sqrt,
}

#[derive(Debug, Args, Serialize)]
struct SynthesizeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value_t = Method::Gradient)]
    method: Method,
    /// Stability margin ε: every capacity stays at or above λ(1 + ε).
    #[arg(long, default_value_t = 0.01)]
    margin: f64,
    /// Also write a per-edge CSV table here.
    #[arg(long)]
    csv: Option<String>,
    /// Also write the capacities as a capacities file, ready for `simulate`.
    #[arg(long)]
    capacities_out: Option<String>,
}

#[derive(Debug, Args, Serialize)]
struct CompareArgs {
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
    /// Stability margin ε for the gradient method.
    #[arg(long, default_value_t = 0.01)]
    margin: f64,
}

#[derive(Debug, Args, Serialize)]
struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
    /// Capacities file: {"capacities": {edge id: bits/s}}.
    #[arg(long)]
    capacities: String,
    /// Slots per replication (power of two).
    #[arg(long, default_value_t = 1 << 20)]
    slots: usize,
    /// Slot length, seconds.
    #[arg(long, default_value_t = 1e-5)]
    dt: f64,
    /// Leading slots discarded from each replication.
    #[arg(long, default_value_t = 4096)]
    warmup: usize,
    /// Independent replications.
    #[arg(long, default_value_t = 8)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args, Serialize)]
struct SizeLinkArgs {
    /// Mean rate λ, bits/s.
    #[arg(long)]
    rate: f64,
    /// Variance coefficient a.
    #[arg(long)]
    variance: f64,
    /// Hurst parameter H in [0.5, 1).
    #[arg(long)]
    hurst: f64,
    /// Buffer size, bits.
    #[arg(long)]
    buffer: f64,
    /// Target overflow probability in (0, 1).
    #[arg(long)]
    loss: f64,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<String>,
}

/// A run that ends without a report.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.to_string(),
        }
    }
}

impl From<FileError> for Failure {
    fn from(e: FileError) -> Self {
        Failure::input(e)
    }
}

struct Outcome {
    code: u8,
    report: RunReport,
    /// Summary for standard error when the run did not succeed.
    message: Option<String>,
}

impl Outcome {
    fn ok(report: RunReport) -> Self {
        Self {
            code: EXIT_OK,
            report,
            message: None,
        }
    }

    fn fail(code: u8, mut report: RunReport, kind: &str, message: String, extra: Value) -> Self {
        let mut error = json!({ "kind": kind, "message": message.clone() });
        if let (Value::Object(e), Value::Object(x)) = (&mut error, extra) {
            e.extend(x);
        }
        let results = std::mem::take(&mut report.results);
        report.results = match results {
            Value::Object(mut r) => {
                r.insert("error".into(), error);
                Value::Object(r)
            }
            _ => json!({ "error": error }),
        };
        Self {
            code,
            report,
            message: Some(message),
        }
    }
}

/// Runs the tool with `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let (out, outcome) = match &cli.command {
        Command::Validate(a) => (a.out.clone(), cmd_validate(a)),
        Command::Aggregate(a) => (a.out.clone(), cmd_aggregate(a)),
        Command::Synthesize(a) => (a.common.out.clone(), cmd_synthesize(a)),
        Command::Compare(a) => (a.common.out.clone(), cmd_compare(a)),
        Command::Simulate(a) => (a.common.out.clone(), cmd_simulate(a)),
        Command::SizeLink(a) => (a.out.clone(), cmd_size_link(a)),
    };
    match outcome {
        Err(f) => {
            eprintln!("mlgsynth: {}", f.message);
            f.code
        }
        Ok(o) => {
            for w in &o.report.warnings {
                eprintln!("mlgsynth: warning: {w}");
            }
            if let Some(m) = &o.message {
                eprintln!("mlgsynth: {m}");
            }
            match emit(out.as_deref(), &o.report) {
                Ok(()) => o.code,
                Err(e) => {
                    eprintln!("mlgsynth: {e}");
                    EXIT_INPUT
                }
            }
        }
    }
}

fn emit(out: Option<&str>, report: &RunReport) -> Result<(), String> {
    let text = report.to_json();
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| format!("cannot write {path}: {e}")),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| format!("cannot write report: {e}")),
    }
}

fn command(name: &str, args: &impl Serialize) -> Value {
    let mut v = serde_json::to_value(args).expect("arguments serialize");
    if let Value::Object(m) = &mut v {
        m.insert("name".into(), json!(name));
    }
    v
}

fn issues_json(issues: &[Issue]) -> Value {
    serde_json::to_value(issues).expect("issues serialize")
}

/// Parses and expands a network file. File violations end the run with a
/// report listing them.
fn load(path: &str, report: &mut RunReport) -> Result<Result<Model, Vec<Issue>>, Failure> {
    let (file, bytes) = NetworkFile::load(path)?;
    report.input_digest = Some(report::digest(&bytes));
    Ok(file.to_model())
}

fn violations(report: RunReport, issues: Vec<Issue>) -> Outcome {
    let n = issues.len();
    let mut report = report;
    report.results = json!({ "valid": false, "violations": issues_json(&issues) });
    Outcome {
        code: EXIT_VIOLATIONS,
        report,
        message: Some(format!("{n} violation(s) in the network file")),
    }
}

fn loads_of(model: &Model) -> Result<LoadSet, Failure> {
    // Validation has already run, so aggregation cannot fail on the graph.
    aggregate(&model.graph, &model.demands).map_err(|e| Failure {
        code: EXIT_VIOLATIONS,
        message: e.to_string(),
    })
}

fn cmd_validate(a: &Common) -> Result<Outcome, Failure> {
    let mut report = RunReport::new(command("validate", a), None);
    match load(&a.network, &mut report)? {
        Err(issues) => Ok(violations(report, issues)),
        Ok(_) => {
            report.results = json!({ "valid": true, "violations": [] });
            Ok(Outcome::ok(report))
        }
    }
}

fn cmd_aggregate(a: &Common) -> Result<Outcome, Failure> {
    let mut report = RunReport::new(command("aggregate", a), None);
    let model = match load(&a.network, &mut report)? {
        Err(issues) => return Ok(violations(report, issues)),
        Ok(m) => m,
    };
    let loads = loads_of(&model)?;
    report.results = report::loads_json(&loads);
    Ok(Outcome::ok(report))
}

fn synthesis_failure(
    report: RunReport,
    e: SynthesisError,
    budget: f64,
) -> Result<Outcome, Failure> {
    let message = e.to_string();
    Ok(match &e {
        SynthesisError::InfeasibleBudget { required, budget } => Outcome::fail(
            EXIT_INFEASIBLE,
            report,
            "infeasible_budget",
            message,
            json!({
                "required": q(*required, report::COST),
                "budget": q(*budget, report::COST),
            }),
        ),
        SynthesisError::Perf(PerfError::CapacityViolated { .. })
        | SynthesisError::Perf(PerfError::EdgeCapacityViolated { .. }) => Outcome::fail(
            EXIT_INFEASIBLE,
            report,
            "capacity_violated",
            message,
            json!({}),
        ),
        SynthesisError::LineSearchFailed { partial } => Outcome::fail(
            EXIT_NUMERIC,
            report,
            "line_search_failed",
            message,
            json!({ "partial": report::synthesis_json(partial, budget) }),
        ),
        SynthesisError::InvalidOptions(_) => return Err(Failure::input(message)),
        SynthesisError::Perf(_) => {
            Outcome::fail(EXIT_NUMERIC, report, "numeric", message, json!({}))
        }
        SynthesisError::Traffic(_)
        | SynthesisError::NoTraffic
        | SynthesisError::MissingCost(_)
        | SynthesisError::InvalidCost { .. }
        | SynthesisError::InvalidBudget(_) => {
            Outcome::fail(EXIT_VIOLATIONS, report, "invalid_input", message, json!({}))
        }
    })
}

fn options(margin: f64) -> SynthesisOptions {
    SynthesisOptions {
        stability_margin: margin,
        ..Default::default()
    }
}

fn cmd_synthesize(a: &SynthesizeArgs) -> Result<Outcome, Failure> {
    let mut report = RunReport::new(command("synthesize", a), None);
    let model = match load(&a.common.network, &mut report)? {
        Err(issues) => return Ok(violations(report, issues)),
        Ok(m) => m,
    };
    let loads = loads_of(&model)?;
    let budget = model.cost.budget;

    let (caps, results, converged) = match a.method {
        Method::Gradient => match synthesize_loads(&loads, &model.cost, &options(a.margin)) {
            Ok(r) => {
                let json = report::synthesis_json(&r, budget);
                for e in &r.unloaded_edges {
                    report
                        .warnings
                        .push(format!("edge {e} carries no traffic and gets no capacity"));
                }
                (r.capacities, json, r.converged)
            }
            Err(e) => return synthesis_failure(report, e, budget),
        },
        Method::Sqrt => match square_root_assignment(&loads, &model.cost) {
            Ok(c) => {
                let cost = model.cost.cost_of(&c);
                let json = json!({
                    "capacities": report::capacities_json(&c),
                    "cost": q(cost, report::COST),
                    "budget": q(budget, report::COST),
                });
                (c, json, true)
            }
            Err(e) => return synthesis_failure(report, e, budget),
        },
    };
    let delay = match mean_network_delay(&loads, &caps) {
        Ok(d) => d,
        Err(e) => return synthesis_failure(report, e.into(), budget),
    };
    report.warn_saturation("synthesize", &delay);
    report.results = results;
    if let Value::Object(m) = &mut report.results {
        m.insert("method".into(), json!(a.method));
        m.insert("delay".into(), report::delay_json(&delay));
    }
    if let Some(path) = &a.csv {
        report::write_csv(path, &loads, &caps, &delay, &model.cost)
            .map_err(|e| Failure::input(format!("cannot write {path}: {e}")))?;
    }
    if let Some(path) = &a.capacities_out {
        std::fs::write(path, CapacitiesFile::from(&caps).to_json() + "\n")
            .map_err(|e| Failure::input(format!("cannot write {path}: {e}")))?;
    }
    if !converged {
        let message = "gradient descent did not converge; see the trace".to_string();
        return Ok(Outcome::fail(
            EXIT_NUMERIC,
            report,
            "not_converged",
            message,
            json!({}),
        ));
    }
    Ok(Outcome::ok(report))
}

fn cmd_compare(a: &CompareArgs) -> Result<Outcome, Failure> {
    let mut report = RunReport::new(command("compare", a), None);
    let model = match load(&a.common.network, &mut report)? {
        Err(issues) => return Ok(violations(report, issues)),
        Ok(m) => m,
    };
    let loads = loads_of(&model)?;
    let budget = model.cost.budget;
    let cmp = match compare_methods_on_loads(&loads, &model.cost, &options(a.margin)) {
        Ok(c) => c,
        Err(e) => return synthesis_failure(report, e, budget),
    };
    report.warn_saturation("gradient", &cmp.gradient_report);
    report.warn_saturation("sqrt", &cmp.square_root_report);
    let mut gradient = report::synthesis_json(&cmp.gradient, budget);
    if let Value::Object(m) = &mut gradient {
        m.insert("delay".into(), report::delay_json(&cmp.gradient_report));
    }
    report.results = json!({
        "gradient": gradient,
        "sqrt": {
            "capacities": report::capacities_json(&cmp.square_root),
            "cost": q(model.cost.cost_of(&cmp.square_root), report::COST),
            "delay": report::delay_json(&cmp.square_root_report),
        },
        "improvement": q(cmp.improvement, report::DIMENSIONLESS),
    });
    if !cmp.gradient.converged {
        let message = "gradient descent did not converge; see the trace".to_string();
        return Ok(Outcome::fail(
            EXIT_NUMERIC,
            report,
            "not_converged",
            message,
            json!({}),
        ));
    }
    Ok(Outcome::ok(report))
}

fn cmd_simulate(a: &SimulateArgs) -> Result<Outcome, Failure> {
    let mut report = RunReport::new(command("simulate", a), None);
    let cfg = SimConfig {
        slot: a.dt,
        slots: a.slots,
        warmup: a.warmup,
        replications: a.reps,
        seed: a.seed,
    };
    cfg.check().map_err(Failure::input)?;
    let model = match load(&a.common.network, &mut report)? {
        Err(issues) => return Ok(violations(report, issues)),
        Ok(m) => m,
    };
    let (file, bytes) = CapacitiesFile::load(&a.capacities)?;
    let caps = file.assignment();
    let loads = loads_of(&model)?;
    for e in loads.loads.keys() {
        if caps.get(e).is_none() {
            return Err(Failure::input(format!(
                "{}: no capacity for loaded edge {e}",
                a.capacities
            )));
        }
    }
    for e in caps.capacities.keys() {
        if loads.get(e).is_none() {
            report.warnings.push(format!(
                "capacity given for edge {e}, which carries no traffic"
            ));
        }
    }
    let sim = match simulate_network(&loads, &caps, &cfg) {
        Ok(s) => s,
        Err(e @ SimError::CapacityViolated { .. }) => {
            return Ok(Outcome::fail(
                EXIT_INFEASIBLE,
                report,
                "capacity_violated",
                e.to_string(),
                json!({}),
            ))
        }
        Err(e @ SimError::Config(_)) => return Err(Failure::input(e)),
        Err(e) => {
            return Ok(Outcome::fail(
                EXIT_NUMERIC,
                report,
                "numeric",
                e.to_string(),
                json!({}),
            ))
        }
    };
    report.results = report::simulation_json(&sim);
    if let Value::Object(m) = &mut report.results {
        m.insert("capacities_digest".into(), json!(report::digest(&bytes)));
    }
    Ok(Outcome::ok(report))
}

fn cmd_size_link(a: &SizeLinkArgs) -> Result<Outcome, Failure> {
    let mut report = RunReport::new(command("size-link", a), None);
    let input = SizingInput {
        rate: a.rate,
        variance_coeff: a.variance,
        hurst: a.hurst,
        buffer: a.buffer,
        loss_prob: a.loss,
    };
    let mu = required_service_rate(&input).map_err(Failure::input)?;
    if !mu.is_finite() {
        return Ok(Outcome::fail(
            EXIT_NUMERIC,
            report,
            "numeric",
            format!("service rate overflowed ({mu})"),
            json!({}),
        ));
    }
    report.results = json!({
        "service_rate": q(mu, report::BITS_PER_S),
        "headroom": q(mu - a.rate, report::BITS_PER_S),
    });
    Ok(Outcome::ok(report))
}
