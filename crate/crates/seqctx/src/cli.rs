//! The `seqctx` command line.
//!
//! Exit codes: 0 success, 1 domain-level failure (a requested property does
//! not hold), 2 input or usage error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use seqctx_core::empirical::{deterministic_model, kcbs_sum, pm_sum};
use seqctx_core::hvm::{self, NdReport};
use seqctx_core::polytope::{contextual_fraction_with, measurement_noncontextual_fraction, CfOptions, CfResult};
use seqctx_core::quantum::{self, kcbs_realization, kcbs_value, pm_realization, pm_realization_with_state, pm_value, DensityMatrix};
use seqctx_core::scenario::examples::{extended_kcbs_scenario, kcbs_scenario, pm_scenario};
use seqctx_core::scenario::{describe_sequence, enumerate_global_assignments, induce_sequential, OrderingPolicy};
use seqctx_core::{lp::LpStatus, EmpiricalBehaviour, SequentialScenario, DEFAULT_TOL};

use crate::golden;
use crate::io::{self, CfReport, Document, IoError, NdPair, NdReportDoc};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "seqctx", version, about = "Contextuality analysis for sequential measurement scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse and validate any document.
    Validate { file: PathBuf },
    /// Contextual fraction of a behaviour.
    Cf {
        behaviour: PathBuf,
        /// Scenario the behaviour must be defined on.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Emit a cf_report document instead of a table.
        #[arg(long)]
        json: bool,
        /// Exit with status 1 unless CF <= --tol.
        #[arg(long)]
        assert_nc: bool,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// No-disturbance check of a model over every ordered pair in every sequence.
    NdCheck {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        /// Emit an nd_report document instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Behaviour document generated by a model on a scenario.
    Simulate {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Sequential scenario induced by ordering each context of a measurement scenario.
    Induce {
        measurement_scenario: PathBuf,
        #[arg(long, value_enum, default_value_t = Order::Declared)]
        order: Order,
    },
    /// Reproduce the quantum violations of the KCBS or Peres-Mermin inequality.
    Demo {
        #[arg(value_enum)]
        which: DemoKind,
        /// Write the scenario, realization and behaviour documents into this directory.
        #[arg(long)]
        emit: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
struct ModelArg {
    #[arg(long)]
    hvm: Option<PathBuf>,
    #[arg(long)]
    quantum: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Order {
    Declared,
    Reversed,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DemoKind {
    Kcbs,
    Pm,
}

/// A failure that ends the command.
enum Failure {
    Input(String),
    Domain,
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<seqctx_core::Error> for Failure {
    fn from(e: seqctx_core::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

/// Runs the command line on `args` (including the program name).
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_INPUT
            } else {
                let _ = write!(out, "{text}");
                EXIT_OK
            };
        }
    };
    let result = match cli.command {
        Command::Validate { file } => validate(&file, out),
        Command::Cf {
            behaviour,
            scenario,
            json,
            assert_nc,
            tol,
        } => cf(&behaviour, scenario.as_deref(), json, assert_nc.then_some(tol), out),
        Command::NdCheck {
            model,
            scenario,
            tol,
            json,
        } => nd_check(&model, &scenario, tol, json, out),
        Command::Simulate { model, scenario } => simulate(&model, &scenario, out),
        Command::Induce {
            measurement_scenario,
            order,
        } => induce(&measurement_scenario, order, out),
        Command::Demo { which, emit } => match which {
            DemoKind::Kcbs => demo_kcbs(emit.as_deref(), out),
            DemoKind::Pm => demo_pm(emit.as_deref(), out),
        },
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Domain) => EXIT_DOMAIN,
        Err(Failure::Input(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_INPUT
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn parse_file(path: &Path) -> Result<Document, Failure> {
    let text = read(path)?;
    io::parse(&text)
        .map(|env| env.document)
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn expect_scenario(path: &Path) -> Result<SequentialScenario, Failure> {
    match parse_file(path)? {
        Document::Scenario(s) => Ok(s),
        other => Err(Failure::Input(format!(
            "{}: expected a scenario document, found `{}`",
            path.display(),
            other.kind().as_str()
        ))),
    }
}

/// Compact rendering: tiny magnitudes print as 0.
fn num(x: f64) -> String {
    if x.abs() < 1e-12 {
        return "0".into();
    }
    let s = format!("{x:.12}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

fn sci(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else {
        format!("{x:.1e}")
    }
}

fn status_name(s: LpStatus) -> &'static str {
    match s {
        LpStatus::Optimal => "optimal",
        LpStatus::Unbounded => "unbounded",
        LpStatus::Infeasible => "infeasible",
        LpStatus::NumericalFailure => "numerical-failure",
    }
}

fn cf_settings(opts: &CfOptions) -> BTreeMap<String, f64> {
    let s = &opts.solver;
    BTreeMap::from([
        ("assignment_cap".to_string(), opts.assignment_cap as f64),
        ("negative_clamp".to_string(), opts.negative_clamp),
        ("pivot_tol".to_string(), s.pivot_tol),
        ("cost_tol".to_string(), s.cost_tol),
        ("feasibility_tol".to_string(), s.feasibility_tol),
        ("dual_tol".to_string(), s.dual_tol),
        ("gap_tol".to_string(), s.gap_tol),
        ("max_iterations".to_string(), s.max_iterations as f64),
    ])
}

fn write_cf_header(out: &mut dyn Write, opts: &CfOptions) -> std::io::Result<()> {
    let s = &opts.solver;
    writeln!(
        out,
        "# lp: pivot_tol={} cost_tol={} feasibility_tol={} dual_tol={} gap_tol={} max_iterations={}",
        sci(s.pivot_tol),
        sci(s.cost_tol),
        sci(s.feasibility_tol),
        sci(s.dual_tol),
        sci(s.gap_tol),
        s.max_iterations
    )?;
    writeln!(
        out,
        "# negative_clamp={} assignment_cap={}",
        sci(opts.negative_clamp),
        opts.assignment_cap
    )
}

fn validate(path: &Path, out: &mut dyn Write) -> Outcome {
    let doc = parse_file(path)?;
    let detail = match &doc {
        Document::Scenario(s) => format!(
            "{} instruments, {} sequences",
            s.instruments().len(),
            s.sequences().len()
        ),
        Document::MeasurementScenario(m) => format!(
            "{} instruments, {} contexts",
            m.instruments().len(),
            m.contexts().len()
        ),
        Document::Behaviour(e) => format!("{} tables", e.tables().len()),
        Document::MeasurementBehaviour(e) => format!("{} tables", e.tables().len()),
        Document::Hvm(h) => format!("{} hidden states, {} instruments", h.lambda_count(), h.instruments().len()),
        Document::QuantumRealization(r) => format!("dimension {}, {} instruments", r.dim(), r.instruments().len()),
        Document::CfReport(r) => format!("cf {}", num(r.cf)),
        Document::NdReport(r) => format!("{} pairs", r.pairs.len()),
    };
    writeln!(out, "{}: valid {} ({detail})", path.display(), doc.kind().as_str())?;
    Ok(())
}

fn cf_report(r: &CfResult, s: &SequentialScenario, opts: &CfOptions) -> CfReport {
    let space = s.assignment_space();
    CfReport {
        cf: r.cf,
        ncf: r.ncf,
        status: status_name(r.status).to_string(),
        support: r
            .weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 1e-12)
            .map(|(k, &w)| (space.decode(k), w))
            .collect(),
        settings: cf_settings(opts),
    }
}

fn cf(behaviour: &Path, scenario: Option<&Path>, json: bool, assert_tol: Option<f64>, out: &mut dyn Write) -> Outcome {
    let opts = CfOptions::default();
    let (result, s) = match parse_file(behaviour)? {
        Document::Behaviour(e) => {
            if let Some(p) = scenario {
                let given = expect_scenario(p)?;
                if given != **e.scenario() {
                    return Err(Failure::Input(format!(
                        "{}: behaviour is defined on a different scenario than {}",
                        behaviour.display(),
                        p.display()
                    )));
                }
            }
            (contextual_fraction_with(&e, &opts)?, e.scenario().clone())
        }
        Document::MeasurementBehaviour(e) => {
            if scenario.is_some() {
                return Err(Failure::Input("--scenario applies to sequential behaviours only".into()));
            }
            let s = Arc::new(induce_sequential(e.scenario(), &OrderingPolicy::Declared)?);
            (measurement_noncontextual_fraction(&e)?, s)
        }
        other => {
            return Err(Failure::Input(format!(
                "{}: expected a behaviour document, found `{}`",
                behaviour.display(),
                other.kind().as_str()
            )))
        }
    };
    if json {
        let doc = Document::CfReport(cf_report(&result, &s, &opts));
        write!(out, "{}", io::to_text(&doc))?;
    } else {
        writeln!(out, "# contextual fraction of {}", behaviour.display())?;
        write_cf_header(out, &opts)?;
        if let Some(t) = assert_tol {
            writeln!(out, "# assert-nc tol={}", sci(t))?;
        }
        writeln!(out, "sequences    {}", s.sequences().len())?;
        writeln!(out, "assignments  {}", result.weights.len())?;
        writeln!(out, "status       {}", status_name(result.status))?;
        writeln!(out, "NCF = {}", num(result.ncf))?;
        writeln!(out, "CF = {}", num(result.cf))?;
    }
    if result.status != LpStatus::Optimal {
        return Err(Failure::Domain);
    }
    match assert_tol {
        Some(t) if result.cf > t => Err(Failure::Domain),
        _ => Ok(()),
    }
}

enum Model {
    Hvm(seqctx_core::HiddenVariableModel),
    Quantum(seqctx_core::QuantumRealization),
}

fn load_model(arg: &ModelArg) -> Result<Model, Failure> {
    let (path, want) = match (&arg.hvm, &arg.quantum) {
        (Some(p), _) => (p, "hvm"),
        (None, Some(p)) => (p, "quantum_realization"),
        (None, None) => return Err(Failure::Input("one of --hvm or --quantum is required".into())),
    };
    match parse_file(path)? {
        Document::Hvm(h) if want == "hvm" => Ok(Model::Hvm(h)),
        Document::QuantumRealization(r) if want == "quantum_realization" => Ok(Model::Quantum(r)),
        other => Err(Failure::Input(format!(
            "{}: expected a {want} document, found `{}`",
            path.display(),
            other.kind().as_str()
        ))),
    }
}

fn nd_report_doc(report: &NdReport, tol: f64) -> NdReportDoc {
    NdReportDoc {
        holds: report.holds(),
        max_deviation: report.max_deviation,
        tol,
        pairs: report
            .pairs
            .iter()
            .map(|p| NdPair {
                sequence: p.sequence,
                earlier: p.earlier,
                later: p.later,
                deviation: p.check.max_deviation,
                holds: p.check.holds,
            })
            .collect(),
    }
}

fn write_nd_table(out: &mut dyn Write, s: &SequentialScenario, report: &NdReport, tol: f64) -> std::io::Result<()> {
    for p in report.failures() {
        let seq = &s.sequences()[p.sequence];
        let label = |k: usize| seq.entries()[k].label.as_str().to_string();
        writeln!(
            out,
            "FAIL  {} before {} in sequence {} [{}]: deviation {}",
            label(p.earlier),
            label(p.later),
            p.sequence + s.index_base(),
            describe_sequence(s, p.sequence),
            sci(p.check.max_deviation)
        )?;
    }
    let verdict = if report.holds() { "holds" } else { "fails" };
    writeln!(
        out,
        "no-disturbance {verdict} on {} ordered pairs (max deviation {}, tol {})",
        report.pairs.len(),
        sci(report.max_deviation),
        sci(tol)
    )
}

fn nd_check(model: &ModelArg, scenario: &Path, tol: f64, json: bool, out: &mut dyn Write) -> Outcome {
    let s = expect_scenario(scenario)?;
    let report = match load_model(model)? {
        Model::Hvm(h) => hvm::check_nd_hvm(&h, &s, tol)?,
        Model::Quantum(r) => quantum::check_nd_quantum(&r, &s, tol)?,
    };
    if json {
        write!(out, "{}", io::to_text(&Document::NdReport(nd_report_doc(&report, tol))))?;
    } else {
        writeln!(out, "# no-disturbance check on {}", scenario.display())?;
        writeln!(out, "# tol={}", sci(tol))?;
        write_nd_table(out, &s, &report, tol)?;
    }
    if report.holds() {
        Ok(())
    } else {
        Err(Failure::Domain)
    }
}

fn simulate(model: &ModelArg, scenario: &Path, out: &mut dyn Write) -> Outcome {
    let s = Arc::new(expect_scenario(scenario)?);
    let e = match load_model(model)? {
        Model::Hvm(h) => hvm::behaviour(&h, &s)?,
        Model::Quantum(r) => r.behaviour(&s)?,
    };
    write!(out, "{}", io::to_text(&Document::Behaviour(e)))?;
    Ok(())
}

fn induce(path: &Path, order: Order, out: &mut dyn Write) -> Outcome {
    let m = match parse_file(path)? {
        Document::MeasurementScenario(m) => m,
        other => {
            return Err(Failure::Input(format!(
                "{}: expected a measurement_scenario document, found `{}`",
                path.display(),
                other.kind().as_str()
            )))
        }
    };
    let policy = match order {
        Order::Declared => OrderingPolicy::Declared,
        Order::Reversed => OrderingPolicy::Reversed,
    };
    let s = induce_sequential(&m, &policy)?;
    write!(out, "{}", io::to_text(&Document::Scenario(s)))?;
    Ok(())
}

fn emit(dir: &Path, docs: Vec<(&'static str, Document)>, out: &mut dyn Write) -> Outcome {
    fs::create_dir_all(dir)?;
    for (name, doc) in docs {
        let path = dir.join(name);
        fs::write(&path, io::to_text(&doc))?;
        writeln!(out, "wrote {}", path.display())?;
    }
    Ok(())
}

/// Extreme value of an inequality over the vertices of the NC polytope.
fn classical_extreme(
    s: &Arc<SequentialScenario>,
    f: fn(&EmpiricalBehaviour) -> seqctx_core::error::Result<f64>,
    maximize: bool,
) -> Result<f64, Failure> {
    let mut best = if maximize { f64::NEG_INFINITY } else { f64::INFINITY };
    for g in enumerate_global_assignments(s, seqctx_core::scenario::DEFAULT_ASSIGNMENT_CAP)? {
        let v = f(&deterministic_model(s, &g)?)?;
        best = if maximize { best.max(v) } else { best.min(v) };
    }
    Ok(best)
}

fn demo_kcbs(dir: Option<&Path>, out: &mut dyn Write) -> Outcome {
    let opts = CfOptions::default();
    let r = kcbs_realization();
    let s = Arc::new(kcbs_scenario());
    let ext = Arc::new(extended_kcbs_scenario());
    let value = kcbs_value(&r)?;
    let bound = classical_extreme(&s, kcbs_sum, false)?;
    let nd = quantum::check_nd_quantum(&r, &s, DEFAULT_TOL)?;
    let cf = contextual_fraction_with(&r.behaviour(&s)?, &opts)?;
    let cf_ext = contextual_fraction_with(&r.behaviour(&ext)?, &opts)?;

    writeln!(out, "# KCBS: qutrit, theta = pi/5, psi = (0, 0, 1), Lueders instruments")?;
    write_cf_header(out, &opts)?;
    writeln!(out, "# nd tol={}", sci(DEFAULT_TOL))?;
    writeln!(out, "value    sum_i p(a_i = a_i+1) = {}", num(value))?;
    writeln!(out, "         5 - 2 sqrt(5)        = {}", num(5.0 - 2.0 * 5f64.sqrt()))?;
    writeln!(out, "bound    non-contextual minimum = {}", num(bound))?;
    writeln!(out, "{}", if value < bound - DEFAULT_TOL { "VIOLATED" } else { "not violated" })?;
    write_nd_table(out, &s, &nd, DEFAULT_TOL)?;
    writeln!(out, "CF = {}", num(cf.cf))?;
    writeln!(out, "CF extended (A0 A1 A0) = {}", num(cf_ext.cf))?;
    if let Some(d) = dir {
        emit(d, golden::kcbs_documents()?, out)?;
    }
    Ok(())
}

fn demo_pm(dir: Option<&Path>, out: &mut dyn Write) -> Outcome {
    let opts = CfOptions::default();
    let r = pm_realization();
    let s = Arc::new(pm_scenario());
    let value = pm_value(&r)?;
    let mixed = pm_value(&pm_realization_with_state(DensityMatrix::maximally_mixed(4)?)?)?;
    let bound = classical_extreme(&s, pm_sum, true)?;
    let nd = quantum::check_nd_quantum(&r, &s, DEFAULT_TOL)?;
    let cf = contextual_fraction_with(&r.behaviour(&s)?, &opts)?;

    writeln!(out, "# Peres-Mermin: two qubits, Lueders instruments on the +-1 eigenspaces")?;
    write_cf_header(out, &opts)?;
    writeln!(out, "# nd tol={}", sci(DEFAULT_TOL))?;
    writeln!(out, "value    |00>            = {}", num(value))?;
    writeln!(out, "value    maximally mixed = {}", num(mixed))?;
    writeln!(out, "bound    non-contextual maximum over {} assignments = {}", s.assignment_count(), num(bound))?;
    writeln!(out, "{}", if value > bound + DEFAULT_TOL { "VIOLATED" } else { "not violated" })?;
    write_nd_table(out, &s, &nd, DEFAULT_TOL)?;
    writeln!(out, "CF = {}", num(cf.cf))?;
    if let Some(d) = dir {
        emit(d, golden::pm_documents()?, out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_str(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(args.iter().copied(), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn unknown_subcommand_is_usage_error() {
        let (code, _, err) = run_str(&["seqctx", "frobnicate"]);
        assert_eq!(code, EXIT_INPUT);
        assert!(err.contains("Usage"));
    }

    #[test]
    fn help_goes_to_stdout() {
        let (code, out, _) = run_str(&["seqctx", "--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("demo"));
    }

    #[test]
    fn nd_check_needs_exactly_one_model() {
        let (code, _, _) = run_str(&["seqctx", "nd-check", "--scenario", "x.json"]);
        assert_eq!(code, EXIT_INPUT);
        let (code, _, _) = run_str(&["seqctx", "nd-check", "--hvm", "a", "--quantum", "b", "--scenario", "x"]);
        assert_eq!(code, EXIT_INPUT);
    }

    #[test]
    fn number_rendering() {
        assert_eq!(num(1e-15), "0");
        assert_eq!(num(6.0), "6");
        assert_eq!(num(0.5278640450004206), "0.527864045");
    }
}
