//! JSON documents for scenarios, behaviours, models and reports.
//!
//! Every document is an envelope `{"kind": .., "payload": .., "version": 1}`.
//! Output is canonical: keys sorted, two-space indentation, arrays of scalars
//! on one line, floats in shortest round-trip form, trailing newline. Parsing
//! then serializing a canonical document reproduces it byte for byte.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use serde_json::{Map, Number, Value};
use thiserror::Error;

use seqctx_core::empirical::{validate_behaviour, MeasurementBehaviour};
use seqctx_core::hvm::{validate_hvm, HiddenVariableModel, InstrumentModel};
use seqctx_core::quantum::{CMatrix, DensityMatrix, QuantumInstrument, QuantumRealization, C64};
use seqctx_core::scenario::{
    validate_measurement_scenario, validate_scenario, Instrument, MeasurementViolation, ScenarioViolation,
    SequenceEntry,
};
use seqctx_core::{
    Distribution, EmpiricalBehaviour, InstrumentLabel, MeasurementScenario, Sequence, SequentialScenario,
};

pub const FORMAT_VERSION: u64 = 1;

/// Tolerance used when validating probabilities on input.
pub const INPUT_TOL: f64 = 1e-9;

/// Largest joint outcome space accepted for a single sequence or context.
pub const MAX_TABLE_SIZE: usize = 1 << 24;

#[derive(Debug, Error, PartialEq)]
pub enum IoError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    /// Well-formed but violates a normalization or consistency condition.
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

impl IoError {
    pub fn path(&self) -> Option<&str> {
        match self {
            IoError::Syntax { .. } => None,
            IoError::Schema { path, .. } | IoError::Invalid { path, .. } => Some(path),
        }
    }
}

type Result<T> = std::result::Result<T, IoError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Scenario,
    MeasurementScenario,
    Behaviour,
    MeasurementBehaviour,
    Hvm,
    QuantumRealization,
    CfReport,
    NdReport,
}

impl Kind {
    pub const ALL: [Kind; 8] = [
        Kind::Scenario,
        Kind::MeasurementScenario,
        Kind::Behaviour,
        Kind::MeasurementBehaviour,
        Kind::Hvm,
        Kind::QuantumRealization,
        Kind::CfReport,
        Kind::NdReport,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Scenario => "scenario",
            Kind::MeasurementScenario => "measurement_scenario",
            Kind::Behaviour => "behaviour",
            Kind::MeasurementBehaviour => "measurement_behaviour",
            Kind::Hvm => "hvm",
            Kind::QuantumRealization => "quantum_realization",
            Kind::CfReport => "cf_report",
            Kind::NdReport => "nd_report",
        }
    }

    fn from_str(s: &str) -> Option<Kind> {
        Kind::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

/// Summary of a contextual fraction computation.
#[derive(Clone, Debug, PartialEq)]
pub struct CfReport {
    pub cf: f64,
    pub ncf: f64,
    pub status: String,
    /// Global assignments (one outcome index per declared instrument) with
    /// positive weight.
    pub support: Vec<(Vec<usize>, f64)>,
    /// Solver and clamp settings used, by name.
    pub settings: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NdPair {
    pub sequence: usize,
    pub earlier: usize,
    pub later: usize,
    pub deviation: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NdReportDoc {
    pub holds: bool,
    pub max_deviation: f64,
    pub tol: f64,
    pub pairs: Vec<NdPair>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Document {
    Scenario(SequentialScenario),
    MeasurementScenario(MeasurementScenario),
    Behaviour(EmpiricalBehaviour),
    MeasurementBehaviour(MeasurementBehaviour),
    Hvm(HiddenVariableModel),
    QuantumRealization(QuantumRealization),
    CfReport(CfReport),
    NdReport(NdReportDoc),
}

impl Document {
    pub fn kind(&self) -> Kind {
        match self {
            Document::Scenario(_) => Kind::Scenario,
            Document::MeasurementScenario(_) => Kind::MeasurementScenario,
            Document::Behaviour(_) => Kind::Behaviour,
            Document::MeasurementBehaviour(_) => Kind::MeasurementBehaviour,
            Document::Hvm(_) => Kind::Hvm,
            Document::QuantumRealization(_) => Kind::QuantumRealization,
            Document::CfReport(_) => Kind::CfReport,
            Document::NdReport(_) => Kind::NdReport,
        }
    }
}

/// Parsed envelope.
#[derive(Clone, Debug, PartialEq)]
pub struct DocumentEnvelope {
    pub version: u64,
    pub document: Document,
}

impl DocumentEnvelope {
    pub fn new(document: Document) -> Self {
        DocumentEnvelope {
            version: FORMAT_VERSION,
            document,
        }
    }

    pub fn kind(&self) -> Kind {
        self.document.kind()
    }
}

// ---------------------------------------------------------------------------
// Canonical printing

fn write_value(out: &mut String, v: &Value, indent: usize) {
    match v {
        Value::Array(items) if items.iter().any(|x| x.is_array() || x.is_object()) => {
            out.push_str("[\n");
            for (i, x) in items.iter().enumerate() {
                push_indent(out, indent + 1);
                write_value(out, x, indent + 1);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            push_indent(out, indent);
            out.push(']');
        }
        Value::Array(items) => {
            out.push('[');
            for (i, x) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_value(out, x, indent);
            }
            out.push(']');
        }
        Value::Object(map) if map.is_empty() => out.push_str("{}"),
        Value::Object(map) => {
            out.push_str("{\n");
            // serde_json's Map is a BTreeMap here, so keys come out sorted
            for (i, (k, x)) in map.iter().enumerate() {
                push_indent(out, indent + 1);
                let _ = write!(out, "{}: ", Value::String(k.clone()));
                write_value(out, x, indent + 1);
                out.push_str(if i + 1 < map.len() { ",\n" } else { "\n" });
            }
            push_indent(out, indent);
            out.push('}');
        }
        scalar => {
            let _ = write!(out, "{scalar}");
        }
    }
}

fn push_indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

/// Canonical text of a JSON value, with trailing newline.
pub fn canonical_text(v: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, v, 0);
    out.push('\n');
    out
}

pub fn serialize(env: &DocumentEnvelope) -> String {
    canonical_text(&envelope_value(env))
}

/// Serializes a document in the current format version.
pub fn to_text(doc: &Document) -> String {
    serialize(&DocumentEnvelope::new(doc.clone()))
}

pub fn envelope_value(env: &DocumentEnvelope) -> Value {
    let payload = match &env.document {
        Document::Scenario(s) => scenario_value(s),
        Document::MeasurementScenario(m) => measurement_scenario_value(m),
        Document::Behaviour(e) => behaviour_value(e),
        Document::MeasurementBehaviour(e) => measurement_behaviour_value(e),
        Document::Hvm(h) => hvm_value(h),
        Document::QuantumRealization(r) => quantum_value(r),
        Document::CfReport(r) => cf_report_value(r),
        Document::NdReport(r) => nd_report_value(r),
    };
    object([
        ("kind", Value::from(env.kind().as_str())),
        ("payload", payload),
        ("version", Value::from(env.version)),
    ])
}

fn object<const N: usize>(fields: [(&str, Value); N]) -> Value {
    Value::Object(fields.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
}

fn float(x: f64) -> Value {
    Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
}

fn floats(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| float(x)).collect())
}

fn instruments_value(instruments: &[Instrument]) -> Value {
    Value::Array(
        instruments
            .iter()
            .map(|i| {
                object([
                    ("label", Value::from(i.label.as_str())),
                    ("outcomes", Value::Array(i.outcomes.iter().map(|o| Value::from(o.as_str())).collect())),
                ])
            })
            .collect(),
    )
}

fn scenario_value(s: &SequentialScenario) -> Value {
    let sequences = s
        .sequences()
        .iter()
        .map(|seq| {
            Value::Array(
                seq.entries()
                    .iter()
                    .map(|e| {
                        object([
                            ("index", Value::from(e.position + s.index_base())),
                            ("instrument", Value::from(e.label.as_str())),
                        ])
                    })
                    .collect(),
            )
        })
        .collect();
    object([
        ("index_base", Value::from(s.index_base())),
        ("instruments", instruments_value(s.instruments())),
        ("sequences", Value::Array(sequences)),
    ])
}

fn measurement_scenario_value(m: &MeasurementScenario) -> Value {
    let contexts = m
        .contexts()
        .iter()
        .map(|c| Value::Array(c.iter().map(|l| Value::from(l.as_str())).collect()))
        .collect();
    object([
        ("contexts", Value::Array(contexts)),
        ("instruments", instruments_value(m.instruments())),
    ])
}

fn tables_value(tables: &[Distribution]) -> Value {
    Value::Array(tables.iter().map(|t| floats(t.weights())).collect())
}

fn behaviour_value(e: &EmpiricalBehaviour) -> Value {
    object([("scenario", scenario_value(e.scenario())), ("tables", tables_value(e.tables()))])
}

fn measurement_behaviour_value(e: &MeasurementBehaviour) -> Value {
    object([
        ("scenario", measurement_scenario_value(e.scenario())),
        ("tables", tables_value(e.tables())),
    ])
}

fn hvm_value(h: &HiddenVariableModel) -> Value {
    let instruments: Map<String, Value> = h
        .instruments()
        .iter()
        .map(|(label, m)| {
            let n = m.lambda_count();
            let o = m.outcome_count();
            let response = Value::Array((0..n).map(|l| floats(m.response_row(l))).collect());
            let transfer = Value::Array(
                (0..n)
                    .map(|l| Value::Array((0..o).map(|a| floats(m.transfer_row(l, a))).collect()))
                    .collect(),
            );
            (
                label.to_string(),
                object([
                    ("outcome_count", Value::from(o)),
                    ("response", response),
                    ("transfer", transfer),
                ]),
            )
        })
        .collect();
    object([
        ("instruments", Value::Object(instruments)),
        ("lambda_count", Value::from(h.lambda_count())),
        ("mu", floats(h.mu())),
    ])
}

fn matrix_value(m: &CMatrix) -> Value {
    let d = m.dim();
    Value::Array(
        (0..d)
            .map(|i| {
                Value::Array(
                    (0..d)
                        .map(|j| {
                            let z = m[(i, j)];
                            floats(&[z.re, z.im])
                        })
                        .collect(),
                )
            })
            .collect(),
    )
}

fn quantum_value(r: &QuantumRealization) -> Value {
    let instruments: Map<String, Value> = r
        .instruments()
        .iter()
        .map(|(label, inst)| {
            let kraus = Value::Array(
                inst.kraus()
                    .iter()
                    .map(|ks| Value::Array(ks.iter().map(matrix_value).collect()))
                    .collect(),
            );
            (label.to_string(), object([("kraus", kraus)]))
        })
        .collect();
    object([
        ("dimension", Value::from(r.dim())),
        ("instruments", Value::Object(instruments)),
        ("state", matrix_value(r.state().matrix())),
    ])
}

fn cf_report_value(r: &CfReport) -> Value {
    let support = r
        .support
        .iter()
        .map(|(g, w)| {
            object([
                ("assignment", Value::Array(g.iter().map(|&v| Value::from(v)).collect())),
                ("weight", float(*w)),
            ])
        })
        .collect();
    let settings: Map<String, Value> = r.settings.iter().map(|(k, v)| (k.clone(), float(*v))).collect();
    object([
        ("cf", float(r.cf)),
        ("ncf", float(r.ncf)),
        ("settings", Value::Object(settings)),
        ("status", Value::from(r.status.as_str())),
        ("support", Value::Array(support)),
    ])
}

fn nd_report_value(r: &NdReportDoc) -> Value {
    let pairs = r
        .pairs
        .iter()
        .map(|p| {
            object([
                ("deviation", float(p.deviation)),
                ("earlier", Value::from(p.earlier)),
                ("holds", Value::from(p.holds)),
                ("later", Value::from(p.later)),
                ("sequence", Value::from(p.sequence)),
            ])
        })
        .collect();
    object([
        ("holds", Value::from(r.holds)),
        ("max_deviation", float(r.max_deviation)),
        ("pairs", Value::Array(pairs)),
        ("tol", float(r.tol)),
    ])
}

// ---------------------------------------------------------------------------
// Parsing

/// A JSON value together with its field path, for error messages.
#[derive(Clone, Copy)]
struct At<'a> {
    v: &'a Value,
    path: &'a str,
}

fn schema(path: &str, message: impl Into<String>) -> IoError {
    IoError::Schema {
        path: path.to_string(),
        message: message.into(),
    }
}

fn invalid(path: &str, message: impl Into<String>) -> IoError {
    IoError::Invalid {
        path: path.to_string(),
        message: message.into(),
    }
}

impl<'a> At<'a> {
    fn object(self) -> Result<&'a Map<String, Value>> {
        self.v.as_object().ok_or_else(|| schema(self.path, "expected an object"))
    }

    fn array(self) -> Result<&'a Vec<Value>> {
        self.v.as_array().ok_or_else(|| schema(self.path, "expected an array"))
    }

    fn str(self) -> Result<&'a str> {
        self.v.as_str().ok_or_else(|| schema(self.path, "expected a string"))
    }

    fn usize(self) -> Result<usize> {
        self.v
            .as_u64()
            .and_then(|x| usize::try_from(x).ok())
            .ok_or_else(|| schema(self.path, "expected a non-negative integer"))
    }

    fn f64(self) -> Result<f64> {
        self.v.as_f64().ok_or_else(|| schema(self.path, "expected a number"))
    }

    fn bool(self) -> Result<bool> {
        self.v.as_bool().ok_or_else(|| schema(self.path, "expected a boolean"))
    }
}

fn field_path(parent: &str, name: &str) -> String {
    let plain = !name.is_empty() && name.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '-');
    if !plain {
        return format!("{parent}[{}]", Value::String(name.to_string()));
    }
    if parent.is_empty() {
        name.to_string()
    } else {
        format!("{parent}.{name}")
    }
}

fn field<'a>(obj: &'a Map<String, Value>, parent: &str, name: &str) -> Result<(&'a Value, String)> {
    let path = field_path(parent, name);
    let v = obj.get(name).ok_or_else(|| schema(&path, "missing field"))?;
    Ok((v, path))
}

fn reject_unknown(obj: &Map<String, Value>, parent: &str, allowed: &[&str]) -> Result<()> {
    match obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(schema(&field_path(parent, k), "unknown field")),
        None => Ok(()),
    }
}

fn at<'a>(v: &'a Value, path: &'a str) -> At<'a> {
    At { v, path }
}

fn usize_field(obj: &Map<String, Value>, parent: &str, name: &str) -> Result<usize> {
    let (v, p) = field(obj, parent, name)?;
    at(v, &p).usize()
}

fn f64_field(obj: &Map<String, Value>, parent: &str, name: &str) -> Result<f64> {
    let (v, p) = field(obj, parent, name)?;
    at(v, &p).f64()
}

fn float_array(v: &Value, path: &str) -> Result<Vec<f64>> {
    at(v, path)
        .array()?
        .iter()
        .enumerate()
        .map(|(i, x)| at(x, &format!("{path}[{i}]")).f64())
        .collect()
}

fn array_items<'a>(v: &'a Value, path: &str) -> Result<Vec<(&'a Value, String)>> {
    Ok(v
        .as_array()
        .ok_or_else(|| schema(path, "expected an array"))?
        .iter()
        .enumerate()
        .map(|(i, x)| (x, format!("{path}[{i}]")))
        .collect())
}

fn parse_instruments(v: &Value, path: &str) -> Result<Vec<Instrument>> {
    array_items(v, path)?
        .into_iter()
        .map(|(x, p)| {
            let obj = at(x, &p).object()?;
            reject_unknown(obj, &p, &["label", "outcomes"])?;
            let (l, lp) = field(obj, &p, "label")?;
            let label = at(l, &lp).str()?;
            let (o, op) = field(obj, &p, "outcomes")?;
            let outcomes = array_items(o, &op)?
                .into_iter()
                .map(|(x, p)| at(x, &p).str().map(str::to_string))
                .collect::<Result<Vec<_>>>()?;
            Ok(Instrument::new(label, outcomes))
        })
        .collect()
}

fn scenario_violation_path(path: &str, v: &ScenarioViolation, s: &SequentialScenario) -> String {
    use ScenarioViolation::*;
    match v {
        EmptyLabel { instrument } => format!("{path}.instruments[{instrument}].label"),
        DuplicateLabel(l) | EmptyOutcomeSet(l) => {
            let k = s.instruments().iter().rposition(|i| &i.label == l).unwrap_or(0);
            format!("{path}.instruments[{k}]")
        }
        EmptySequence { sequence } => format!("{path}.sequences[{sequence}]"),
        UnknownLabel { sequence, entry, .. } => format!("{path}.sequences[{sequence}][{entry}].instrument"),
        DuplicatePosition { sequence, .. } => format!("{path}.sequences[{sequence}]"),
        PositionGap { sequence, entry, .. } => format!("{path}.sequences[{sequence}][{entry}].index"),
    }
}

fn check_table_size(radices: impl Iterator<Item = usize>, path: &str) -> Result<()> {
    let mut size = 1usize;
    for r in radices {
        size = size
            .checked_mul(r)
            .filter(|&n| n <= MAX_TABLE_SIZE)
            .ok_or_else(|| schema(path, format!("joint outcome space exceeds {MAX_TABLE_SIZE} entries")))?;
    }
    Ok(())
}

fn parse_scenario(v: &Value, path: &str) -> Result<SequentialScenario> {
    let obj = at(v, path).object()?;
    reject_unknown(obj, path, &["index_base", "instruments", "sequences"])?;
    let index_base = usize_field(obj, path, "index_base")?;
    let (iv, ip) = field(obj, path, "instruments")?;
    let instruments = parse_instruments(iv, &ip)?;
    let (sv, sp) = field(obj, path, "sequences")?;
    let mut sequences = Vec::new();
    for (seq, p) in array_items(sv, &sp)? {
        let mut entries = Vec::new();
        for (x, ep) in array_items(seq, &p)? {
            let obj = at(x, &ep).object()?;
            reject_unknown(obj, &ep, &["index", "instrument"])?;
            let index = usize_field(obj, &ep, "index")?;
            let (l, lp) = field(obj, &ep, "instrument")?;
            let label = at(l, &lp).str()?;
            if index < index_base {
                return Err(schema(&format!("{ep}.index"), format!("index below index_base {index_base}")));
            }
            entries.push(SequenceEntry {
                label: InstrumentLabel::from(label),
                position: index - index_base,
            });
        }
        sequences.push(Sequence::from_entries(entries));
    }
    let s = SequentialScenario::from_parts_unchecked(instruments, sequences).with_index_base(index_base);
    if let Some(v) = validate_scenario(&s).first() {
        return Err(schema(&scenario_violation_path(path, v, &s), v.to_string()));
    }
    for (i, seq) in s.sequences().iter().enumerate() {
        let radices = seq.labels().map(|l| s.outcome_count(s.label_index(l.as_str()).expect("validated")));
        check_table_size(radices, &format!("{path}.sequences[{i}]"))?;
    }
    Ok(s)
}

fn parse_measurement_scenario(v: &Value, path: &str) -> Result<MeasurementScenario> {
    let obj = at(v, path).object()?;
    reject_unknown(obj, path, &["contexts", "instruments"])?;
    let (iv, ip) = field(obj, path, "instruments")?;
    let instruments = parse_instruments(iv, &ip)?;
    let (cv, cp) = field(obj, path, "contexts")?;
    let contexts = array_items(cv, &cp)?
        .into_iter()
        .map(|(c, p)| {
            array_items(c, &p)?
                .into_iter()
                .map(|(x, p)| at(x, &p).str().map(InstrumentLabel::from))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let m = MeasurementScenario::from_parts_unchecked(instruments, contexts);
    if let Some(v) = validate_measurement_scenario(&m).first() {
        let p = match v {
            MeasurementViolation::EmptyContext { context }
            | MeasurementViolation::UnknownLabel { context, .. }
            | MeasurementViolation::RepeatedLabel { context, .. }
            | MeasurementViolation::DuplicateContext { context, .. } => format!("{cp}[{context}]"),
            _ => ip.clone(),
        };
        return Err(schema(&p, v.to_string()));
    }
    for (i, c) in m.contexts().iter().enumerate() {
        let radices = c.iter().map(|l| m.instruments()[m.label_index(l.as_str()).expect("validated")].outcome_count());
        check_table_size(radices, &format!("{cp}[{i}]"))?;
    }
    Ok(m)
}

fn parse_tables(v: &Value, path: &str, sizes: &[usize]) -> Result<Vec<Distribution>> {
    let items = array_items(v, path)?;
    if items.len() != sizes.len() {
        return Err(schema(
            path,
            format!("expected {} tables, found {}", sizes.len(), items.len()),
        ));
    }
    items
        .into_iter()
        .zip(sizes)
        .map(|((t, p), &n)| {
            let w = float_array(t, &p)?;
            if w.len() != n {
                return Err(schema(&p, format!("expected {n} probabilities, found {}", w.len())));
            }
            Ok(Distribution::new(w))
        })
        .collect()
}

fn check_tables(tables: &[Distribution], path: &str) -> Result<()> {
    for (i, t) in tables.iter().enumerate() {
        if let Some(k) = t.weights().iter().position(|&w| w < -INPUT_TOL) {
            return Err(invalid(&format!("{path}[{i}][{k}]"), "negative probability"));
        }
        let sum = t.sum();
        if (sum - 1.0).abs() > INPUT_TOL {
            return Err(invalid(&format!("{path}[{i}]"), format!("probabilities sum to {sum}")));
        }
    }
    Ok(())
}

fn parse_behaviour(v: &Value, path: &str) -> Result<EmpiricalBehaviour> {
    let obj = at(v, path).object()?;
    reject_unknown(obj, path, &["scenario", "tables"])?;
    let (sv, sp) = field(obj, path, "scenario")?;
    let s = Arc::new(parse_scenario(sv, &sp)?);
    let sizes: Vec<usize> = (0..s.sequences().len())
        .map(|i| s.outcome_space(i).map(|o| o.size()))
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| schema(&sp, e.to_string()))?;
    let (tv, tp) = field(obj, path, "tables")?;
    let tables = parse_tables(tv, &tp, &sizes)?;
    check_tables(&tables, &tp)?;
    let e = EmpiricalBehaviour::new(s, tables).map_err(|e| schema(&tp, e.to_string()))?;
    debug_assert!(validate_behaviour(&e, INPUT_TOL).is_empty());
    Ok(e)
}

fn parse_measurement_behaviour(v: &Value, path: &str) -> Result<MeasurementBehaviour> {
    let obj = at(v, path).object()?;
    reject_unknown(obj, path, &["scenario", "tables"])?;
    let (sv, sp) = field(obj, path, "scenario")?;
    let m = Arc::new(parse_measurement_scenario(sv, &sp)?);
    let sizes: Vec<usize> = m
        .contexts()
        .iter()
        .map(|c| {
            c.iter()
                .map(|l| {
                    let k = m.label_index(l.as_str()).expect("validated");
                    m.instruments()[k].outcome_count()
                })
                .product()
        })
        .collect();
    let (tv, tp) = field(obj, path, "tables")?;
    let tables = parse_tables(tv, &tp, &sizes)?;
    check_tables(&tables, &tp)?;
    MeasurementBehaviour::new(m, tables).map_err(|e| schema(&tp, e.to_string()))
}

fn parse_hvm(v: &Value, path: &str) -> Result<HiddenVariableModel> {
    let obj = at(v, path).object()?;
    reject_unknown(obj, path, &["instruments", "lambda_count", "mu"])?;
    let n = usize_field(obj, path, "lambda_count")?;
    if n == 0 || n > seqctx_core::hvm::DEFAULT_LAMBDA_CAP {
        return Err(schema(
            &field_path(path, "lambda_count"),
            format!("must lie in 1..={}", seqctx_core::hvm::DEFAULT_LAMBDA_CAP),
        ));
    }
    let (mv, mp) = field(obj, path, "mu")?;
    let mu = float_array(mv, &mp)?;
    if mu.len() != n {
        return Err(schema(&mp, format!("expected {n} entries, found {}", mu.len())));
    }
    let (iv, ip) = field(obj, path, "instruments")?;
    let mut instruments = BTreeMap::new();
    for (label, x) in at(iv, &ip).object()? {
        let p = field_path(&ip, label);
        let obj = at(x, &p).object()?;
        reject_unknown(obj, &p, &["outcome_count", "response", "transfer"])?;
        let o = usize_field(obj, &p, "outcome_count")?;
        if o == 0 {
            return Err(schema(&field_path(&p, "outcome_count"), "must be positive"));
        }
        let (rv, rp) = field(obj, &p, "response")?;
        let rows = array_items(rv, &rp)?;
        if rows.len() != n {
            return Err(schema(&rp, format!("expected {n} rows, found {}", rows.len())));
        }
        let mut response = Vec::new();
        for (row, p) in rows {
            let r = float_array(row, &p)?;
            if r.len() != o {
                return Err(schema(&p, format!("expected {o} entries, found {}", r.len())));
            }
            response.extend(r);
        }
        let (tv, tp) = field(obj, &p, "transfer")?;
        let blocks = array_items(tv, &tp)?;
        if blocks.len() != n {
            return Err(schema(&tp, format!("expected {n} blocks, found {}", blocks.len())));
        }
        let mut transfer = Vec::new();
        for (block, bp) in blocks {
            let rows = array_items(block, &bp)?;
            if rows.len() != o {
                return Err(schema(&bp, format!("expected {o} rows, found {}", rows.len())));
            }
            for (row, p) in rows {
                let r = float_array(row, &p)?;
                if r.len() != n {
                    return Err(schema(&p, format!("expected {n} entries, found {}", r.len())));
                }
                transfer.extend(r);
            }
        }
        let m = InstrumentModel::new(n, o, response, transfer).map_err(|e| schema(&p, e.to_string()))?;
        instruments.insert(InstrumentLabel::from(label.as_str()), m);
    }
    let h = HiddenVariableModel::new(mu, instruments).map_err(|e| schema(path, e.to_string()))?;
    if let Some(v) = validate_hvm(&h, INPUT_TOL).first() {
        return Err(invalid(path, v.to_string()));
    }
    Ok(h)
}

fn parse_matrix(v: &Value, path: &str, dim: usize) -> Result<CMatrix> {
    let rows = array_items(v, path)?;
    if rows.len() != dim {
        return Err(schema(path, format!("expected {dim} rows, found {}", rows.len())));
    }
    let mut data = Vec::with_capacity(dim * dim);
    for (row, p) in rows {
        let cells = array_items(row, &p)?;
        if cells.len() != dim {
            return Err(schema(&p, format!("expected {dim} entries, found {}", cells.len())));
        }
        for (cell, cp) in cells {
            let z = float_array(cell, &cp)?;
            if z.len() != 2 {
                return Err(schema(&cp, "expected [re, im]"));
            }
            data.push(C64::new(z[0], z[1]));
        }
    }
    CMatrix::from_data(dim, data).map_err(|e| schema(path, e.to_string()))
}

fn parse_quantum(v: &Value, path: &str) -> Result<QuantumRealization> {
    let obj = at(v, path).object()?;
    reject_unknown(obj, path, &["dimension", "instruments", "state"])?;
    let d = usize_field(obj, path, "dimension")?;
    if d == 0 || d > seqctx_core::quantum::MAX_DIMENSION {
        return Err(schema(
            &field_path(path, "dimension"),
            format!("must lie in 1..={}", seqctx_core::quantum::MAX_DIMENSION),
        ));
    }
    let (sv, sp) = field(obj, path, "state")?;
    let state = DensityMatrix::new(parse_matrix(sv, &sp, d)?).map_err(|e| invalid(&sp, e.to_string()))?;
    let (iv, ip) = field(obj, path, "instruments")?;
    let mut instruments = BTreeMap::new();
    for (label, x) in at(iv, &ip).object()? {
        let p = field_path(&ip, label);
        let obj = at(x, &p).object()?;
        reject_unknown(obj, &p, &["kraus"])?;
        let (kv, kp) = field(obj, &p, "kraus")?;
        let kraus = array_items(kv, &kp)?
            .into_iter()
            .map(|(ks, p)| {
                array_items(ks, &p)?
                    .into_iter()
                    .map(|(k, p)| parse_matrix(k, &p, d))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let inst = QuantumInstrument::new(kraus).map_err(|e| invalid(&kp, e.to_string()))?;
        instruments.insert(InstrumentLabel::from(label.as_str()), inst);
    }
    QuantumRealization::new(state, instruments).map_err(|e| schema(path, e.to_string()))
}

fn parse_cf_report(v: &Value, path: &str) -> Result<CfReport> {
    let obj = at(v, path).object()?;
    reject_unknown(obj, path, &["cf", "ncf", "settings", "status", "support"])?;
    let (st, stp) = field(obj, path, "status")?;
    let (sv, sp) = field(obj, path, "support")?;
    let support = array_items(sv, &sp)?
        .into_iter()
        .map(|(x, p)| {
            let obj = at(x, &p).object()?;
            reject_unknown(obj, &p, &["assignment", "weight"])?;
            let (a, ap) = field(obj, &p, "assignment")?;
            let g = array_items(a, &ap)?
                .into_iter()
                .map(|(x, p)| at(x, &p).usize())
                .collect::<Result<Vec<_>>>()?;
            Ok((g, f64_field(obj, &p, "weight")?))
        })
        .collect::<Result<Vec<_>>>()?;
    let (gv, gp) = field(obj, path, "settings")?;
    let settings = at(gv, &gp)
        .object()?
        .iter()
        .map(|(k, x)| Ok((k.clone(), at(x, &field_path(&gp, k)).f64()?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    Ok(CfReport {
        cf: f64_field(obj, path, "cf")?,
        ncf: f64_field(obj, path, "ncf")?,
        status: at(st, &stp).str()?.to_string(),
        support,
        settings,
    })
}

fn parse_nd_report(v: &Value, path: &str) -> Result<NdReportDoc> {
    let obj = at(v, path).object()?;
    reject_unknown(obj, path, &["holds", "max_deviation", "pairs", "tol"])?;
    let (hv, hp) = field(obj, path, "holds")?;
    let (pv, pp) = field(obj, path, "pairs")?;
    let pairs = array_items(pv, &pp)?
        .into_iter()
        .map(|(x, p)| {
            let obj = at(x, &p).object()?;
            reject_unknown(obj, &p, &["deviation", "earlier", "holds", "later", "sequence"])?;
            let (h, hp) = field(obj, &p, "holds")?;
            Ok(NdPair {
                sequence: usize_field(obj, &p, "sequence")?,
                earlier: usize_field(obj, &p, "earlier")?,
                later: usize_field(obj, &p, "later")?,
                deviation: f64_field(obj, &p, "deviation")?,
                holds: at(h, &hp).bool()?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(NdReportDoc {
        holds: at(hv, &hp).bool()?,
        max_deviation: f64_field(obj, path, "max_deviation")?,
        tol: f64_field(obj, path, "tol")?,
        pairs,
    })
}

/// Parses and validates a document.
pub fn parse(text: &str) -> Result<DocumentEnvelope> {
    let root: Value = serde_json::from_str(text).map_err(|e| IoError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let obj = at(&root, "$").object()?;
    reject_unknown(obj, "", &["kind", "payload", "version"])?;
    let (kv, kp) = field(obj, "", "kind")?;
    let kind_name = at(kv, &kp).str()?;
    let kind = Kind::from_str(kind_name).ok_or_else(|| schema("kind", format!("unknown kind `{kind_name}`")))?;
    let version = usize_field(obj, "", "version")? as u64;
    if version != FORMAT_VERSION {
        return Err(schema("version", format!("unsupported version {version}")));
    }
    let (payload, pp) = field(obj, "", "payload")?;
    let document = match kind {
        Kind::Scenario => Document::Scenario(parse_scenario(payload, &pp)?),
        Kind::MeasurementScenario => Document::MeasurementScenario(parse_measurement_scenario(payload, &pp)?),
        Kind::Behaviour => Document::Behaviour(parse_behaviour(payload, &pp)?),
        Kind::MeasurementBehaviour => Document::MeasurementBehaviour(parse_measurement_behaviour(payload, &pp)?),
        Kind::Hvm => Document::Hvm(parse_hvm(payload, &pp)?),
        Kind::QuantumRealization => Document::QuantumRealization(parse_quantum(payload, &pp)?),
        Kind::CfReport => Document::CfReport(parse_cf_report(payload, &pp)?),
        Kind::NdReport => Document::NdReport(parse_nd_report(payload, &pp)?),
    };
    Ok(DocumentEnvelope { version, document })
}

fn wrong_kind(found: Kind, want: Kind) -> IoError {
    schema("kind", format!("expected `{}`, found `{}`", want.as_str(), found.as_str()))
}

pub fn parse_scenario_doc(text: &str) -> Result<SequentialScenario> {
    match parse(text)?.document {
        Document::Scenario(s) => Ok(s),
        other => Err(wrong_kind(other.kind(), Kind::Scenario)),
    }
}

pub fn parse_measurement_scenario_doc(text: &str) -> Result<MeasurementScenario> {
    match parse(text)?.document {
        Document::MeasurementScenario(m) => Ok(m),
        other => Err(wrong_kind(other.kind(), Kind::MeasurementScenario)),
    }
}

pub fn parse_behaviour_doc(text: &str) -> Result<EmpiricalBehaviour> {
    match parse(text)?.document {
        Document::Behaviour(e) => Ok(e),
        other => Err(wrong_kind(other.kind(), Kind::Behaviour)),
    }
}

pub fn parse_hvm_doc(text: &str) -> Result<HiddenVariableModel> {
    match parse(text)?.document {
        Document::Hvm(h) => Ok(h),
        other => Err(wrong_kind(other.kind(), Kind::Hvm)),
    }
}

pub fn parse_quantum_doc(text: &str) -> Result<QuantumRealization> {
    match parse(text)?.document {
        Document::QuantumRealization(r) => Ok(r),
        other => Err(wrong_kind(other.kind(), Kind::QuantumRealization)),
    }
}
