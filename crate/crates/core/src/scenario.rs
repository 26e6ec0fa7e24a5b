//! Sequential and measurement scenarios.
//!
//! A sequential scenario is a set of instrument labels, a list of ordered
//! sequences over those labels (a label may occur several times in the same
//! sequence) and one finite outcome alphabet per label. Outcomes are stored as
//! dense indices into the alphabet; the alphabet keeps display names.
//!
//! Joint outcomes of a sequence are linearized row-major with position 0 the
//! most significant digit (see [`OutcomeSpace`]).

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

/// Default cap on the number of global assignments that may be enumerated.
pub const DEFAULT_ASSIGNMENT_CAP: u64 = 1 << 24;

/// Name of an instrument.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct InstrumentLabel(String);

impl InstrumentLabel {
    pub fn new(name: impl Into<String>) -> Self {
        InstrumentLabel(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for InstrumentLabel {
    fn from(s: &str) -> Self {
        InstrumentLabel(s.to_string())
    }
}

impl From<String> for InstrumentLabel {
    fn from(s: String) -> Self {
        InstrumentLabel(s)
    }
}

impl From<&InstrumentLabel> for InstrumentLabel {
    fn from(l: &InstrumentLabel) -> Self {
        l.clone()
    }
}

impl fmt::Display for InstrumentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// An instrument label together with its outcome alphabet.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instrument {
    pub label: InstrumentLabel,
    /// Display names of the outcomes; outcome `k` is `outcomes[k]`.
    pub outcomes: Vec<String>,
}

impl Instrument {
    pub fn new(label: impl Into<InstrumentLabel>, outcomes: Vec<String>) -> Self {
        Instrument {
            label: label.into(),
            outcomes,
        }
    }

    /// Instrument with outcomes named `"0"` and `"1"`.
    pub fn binary(label: impl Into<InstrumentLabel>) -> Self {
        Self::with_outcome_count(label, 2)
    }

    /// Instrument with outcomes named `"0"`, `"1"`, ... `"n-1"`.
    pub fn with_outcome_count(label: impl Into<InstrumentLabel>, n: usize) -> Self {
        Instrument {
            label: label.into(),
            outcomes: (0..n).map(|k| k.to_string()).collect(),
        }
    }

    pub fn outcome_count(&self) -> usize {
        self.outcomes.len()
    }
}

/// One slot of a sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SequenceEntry {
    pub label: InstrumentLabel,
    /// 0-based position inside the sequence.
    pub position: usize,
}

/// An ordered sequence of instruments.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sequence {
    entries: Vec<SequenceEntry>,
}

impl Sequence {
    /// Builds a sequence from labels in order; positions are `0..n`.
    pub fn new<L: Into<InstrumentLabel>>(labels: impl IntoIterator<Item = L>) -> Self {
        Sequence {
            entries: labels
                .into_iter()
                .enumerate()
                .map(|(position, l)| SequenceEntry {
                    label: l.into(),
                    position,
                })
                .collect(),
        }
    }

    /// Builds a sequence from raw entries without checking the positions.
    pub fn from_entries(entries: Vec<SequenceEntry>) -> Self {
        Sequence { entries }
    }

    pub fn entries(&self) -> &[SequenceEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = &InstrumentLabel> + '_ {
        self.entries.iter().map(|e| &e.label)
    }

    /// True when some label occurs at two or more positions.
    pub fn has_repeats(&self) -> bool {
        base_set(self).len() < self.entries.len()
    }
}

/// The set of distinct labels of a sequence (the sequence with its indices removed).
pub fn base_set(seq: &Sequence) -> BTreeSet<InstrumentLabel> {
    seq.labels().cloned().collect()
}

/// Row-major mixed-radix index over a product of finite outcome sets.
///
/// Digit 0 is the most significant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutcomeSpace {
    radices: Vec<usize>,
}

impl OutcomeSpace {
    pub fn new(radices: Vec<usize>) -> Self {
        OutcomeSpace { radices }
    }

    pub fn radices(&self) -> &[usize] {
        &self.radices
    }

    pub fn size(&self) -> usize {
        self.radices.iter().product()
    }

    /// Linear index of a tuple; `None` if the tuple does not fit the space.
    pub fn index_of(&self, tuple: &[usize]) -> Option<usize> {
        if tuple.len() != self.radices.len() {
            return None;
        }
        let mut idx = 0usize;
        for (&v, &r) in tuple.iter().zip(&self.radices) {
            if v >= r {
                return None;
            }
            idx = idx * r + v;
        }
        Some(idx)
    }

    pub fn decode_into(&self, mut idx: usize, out: &mut [usize]) {
        for (slot, &r) in out.iter_mut().zip(&self.radices).rev() {
            *slot = idx % r;
            idx /= r;
        }
    }

    pub fn decode(&self, idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.radices.len()];
        self.decode_into(idx, &mut out);
        out
    }

    /// All tuples in linear order.
    pub fn iter(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.size()).map(move |i| self.decode(i))
    }
}

/// One outcome per instrument label, indexed by the scenario's label order.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GlobalAssignment(Vec<usize>);

impl GlobalAssignment {
    pub fn new(values: Vec<usize>) -> Self {
        GlobalAssignment(values)
    }

    pub fn get(&self, label_index: usize) -> usize {
        self.0[label_index]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

/// A problem found by [`validate_scenario`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ScenarioViolation {
    EmptyLabel { instrument: usize },
    DuplicateLabel(InstrumentLabel),
    EmptyOutcomeSet(InstrumentLabel),
    EmptySequence { sequence: usize },
    UnknownLabel { sequence: usize, entry: usize, label: InstrumentLabel },
    DuplicatePosition { sequence: usize, position: usize },
    PositionGap { sequence: usize, entry: usize, expected: usize, found: usize },
}

impl fmt::Display for ScenarioViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use ScenarioViolation::*;
        match self {
            EmptyLabel { instrument } => write!(f, "instrument {instrument} has an empty label"),
            DuplicateLabel(l) => write!(f, "label `{l}` declared twice"),
            EmptyOutcomeSet(l) => write!(f, "instrument `{l}` has no outcomes"),
            EmptySequence { sequence } => write!(f, "sequence {sequence} is empty"),
            UnknownLabel {
                sequence,
                entry,
                label,
            } => write!(f, "sequence {sequence} entry {entry} names undeclared instrument `{label}`"),
            DuplicatePosition { sequence, position } => {
                write!(f, "sequence {sequence} uses position {position} twice")
            }
            PositionGap {
                sequence,
                entry,
                expected,
                found,
            } => write!(
                f,
                "sequence {sequence} entry {entry} has position {found}, expected {expected}"
            ),
        }
    }
}

/// A sequential scenario: labels, sequences and outcome sets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SequentialScenario {
    instruments: Vec<Instrument>,
    sequences: Vec<Sequence>,
    index_base: usize,
}

impl SequentialScenario {
    /// Builds and validates a scenario.
    pub fn new(instruments: Vec<Instrument>, sequences: Vec<Sequence>) -> Result<Self> {
        let s = Self::from_parts_unchecked(instruments, sequences);
        match validate_scenario(&s).first() {
            None => Ok(s),
            Some(v) => Err(Error::InvalidScenario(v.to_string())),
        }
    }

    /// Builds a scenario without validation; use [`validate_scenario`] to inspect it.
    pub fn from_parts_unchecked(instruments: Vec<Instrument>, sequences: Vec<Sequence>) -> Self {
        SequentialScenario {
            instruments,
            sequences,
            index_base: 0,
        }
    }

    /// Convenience constructor for scenarios where every instrument is binary.
    pub fn binary(labels: &[&str], sequences: &[&[&str]]) -> Result<Self> {
        Self::new(
            labels.iter().map(|l| Instrument::binary(*l)).collect(),
            sequences.iter().map(|s| Sequence::new(s.iter().copied())).collect(),
        )
    }

    /// Sets the first user-facing position index (serialization only).
    pub fn with_index_base(mut self, base: usize) -> Self {
        self.index_base = base;
        self
    }

    pub fn index_base(&self) -> usize {
        self.index_base
    }

    pub fn instruments(&self) -> &[Instrument] {
        &self.instruments
    }

    pub fn sequences(&self) -> &[Sequence] {
        &self.sequences
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.instruments.iter().position(|i| i.label.as_str() == label)
    }

    pub fn label(&self, index: usize) -> &InstrumentLabel {
        &self.instruments[index].label
    }

    pub fn outcome_count(&self, label_index: usize) -> usize {
        self.instruments[label_index].outcome_count()
    }

    /// Label indices of a sequence, in order.
    pub fn resolve(&self, seq_index: usize) -> Result<Vec<usize>> {
        let seq = self.sequence(seq_index)?;
        seq.labels()
            .map(|l| {
                self.label_index(l.as_str())
                    .ok_or_else(|| Error::UnknownLabel(l.to_string()))
            })
            .collect()
    }

    /// Outcome space `O_S` of a sequence.
    pub fn outcome_space(&self, seq_index: usize) -> Result<OutcomeSpace> {
        Ok(OutcomeSpace::new(
            self.resolve(seq_index)?
                .into_iter()
                .map(|i| self.outcome_count(i))
                .collect(),
        ))
    }

    /// Outcome space over all labels, in declaration order.
    pub fn assignment_space(&self) -> OutcomeSpace {
        OutcomeSpace::new(self.instruments.iter().map(Instrument::outcome_count).collect())
    }

    /// Number of global assignments, saturating at `u128::MAX`.
    pub fn assignment_count(&self) -> u128 {
        self.instruments.iter().fold(1u128, |acc, i| {
            acc.saturating_mul(i.outcome_count() as u128)
        })
    }

    fn sequence(&self, seq_index: usize) -> Result<&Sequence> {
        self.sequences.get(seq_index).ok_or(Error::ShapeMismatch {
            what: "sequence index",
            expected: self.sequences.len(),
            found: seq_index,
        })
    }
}

fn check_instruments(instruments: &[Instrument], out: &mut Vec<ScenarioViolation>) {
    let mut seen = BTreeSet::new();
    for (k, inst) in instruments.iter().enumerate() {
        if inst.label.as_str().is_empty() {
            out.push(ScenarioViolation::EmptyLabel { instrument: k });
        }
        if !seen.insert(&inst.label) {
            out.push(ScenarioViolation::DuplicateLabel(inst.label.clone()));
        }
        if inst.outcomes.is_empty() {
            out.push(ScenarioViolation::EmptyOutcomeSet(inst.label.clone()));
        }
    }
}

/// Lists every structural problem of a scenario. An empty list means valid.
pub fn validate_scenario(s: &SequentialScenario) -> Vec<ScenarioViolation> {
    let mut out = Vec::new();
    check_instruments(&s.instruments, &mut out);
    let known: BTreeSet<&InstrumentLabel> = s.instruments.iter().map(|i| &i.label).collect();
    for (si, seq) in s.sequences.iter().enumerate() {
        if seq.is_empty() {
            out.push(ScenarioViolation::EmptySequence { sequence: si });
        }
        let mut positions = BTreeSet::new();
        for (ei, entry) in seq.entries.iter().enumerate() {
            if !known.contains(&entry.label) {
                out.push(ScenarioViolation::UnknownLabel {
                    sequence: si,
                    entry: ei,
                    label: entry.label.clone(),
                });
            }
            if !positions.insert(entry.position) {
                out.push(ScenarioViolation::DuplicatePosition {
                    sequence: si,
                    position: entry.position,
                });
            } else if entry.position != ei {
                out.push(ScenarioViolation::PositionGap {
                    sequence: si,
                    entry: ei,
                    expected: ei,
                    found: entry.position,
                });
            }
        }
    }
    out
}

/// Projects a joint outcome onto the base set of its sequence.
///
/// Returns `Some` with one value per distinct label when every repeated label
/// carries the same value at all of its positions, `None` otherwise.
pub fn consistent_projection(
    outcome: &[usize],
    seq: &Sequence,
) -> Result<Option<BTreeMap<InstrumentLabel, usize>>> {
    if outcome.len() != seq.len() {
        return Err(Error::ShapeMismatch {
            what: "joint outcome length",
            expected: seq.len(),
            found: outcome.len(),
        });
    }
    let mut proj = BTreeMap::new();
    for (label, &v) in seq.labels().zip(outcome) {
        match proj.get(label) {
            Some(&prev) if prev != v => return Ok(None),
            Some(_) => {}
            None => {
                proj.insert(label.clone(), v);
            }
        }
    }
    Ok(Some(proj))
}

/// Consistency test on resolved label indices: repeated labels carry equal values.
pub fn is_consistent(labels: &[usize], outcome: &[usize]) -> bool {
    for i in 0..labels.len() {
        for j in (i + 1)..labels.len() {
            if labels[i] == labels[j] && outcome[i] != outcome[j] {
                return false;
            }
        }
    }
    true
}

/// Iterator over all global assignments in row-major order (first label most significant).
#[derive(Clone, Debug)]
pub struct GlobalAssignments {
    space: OutcomeSpace,
    next: usize,
    total: usize,
}

impl Iterator for GlobalAssignments {
    type Item = GlobalAssignment;

    fn next(&mut self) -> Option<GlobalAssignment> {
        if self.next >= self.total {
            return None;
        }
        let g = GlobalAssignment(self.space.decode(self.next));
        self.next += 1;
        Some(g)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.total - self.next;
        (left, Some(left))
    }
}

impl ExactSizeIterator for GlobalAssignments {}

/// Enumerates every global assignment, refusing when there are more than `cap`.
pub fn enumerate_global_assignments(
    s: &SequentialScenario,
    cap: u64,
) -> Result<GlobalAssignments> {
    let count = s.assignment_count();
    if count > cap as u128 || count > usize::MAX as u128 {
        return Err(Error::AssignmentCapExceeded { count, cap });
    }
    Ok(GlobalAssignments {
        space: s.assignment_space(),
        next: 0,
        total: count as usize,
    })
}

/// A measurement scenario: labels, maximal contexts and outcome sets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MeasurementScenario {
    instruments: Vec<Instrument>,
    contexts: Vec<Vec<InstrumentLabel>>,
}

/// A problem found by [`validate_measurement_scenario`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MeasurementViolation {
    Instrument(ScenarioViolation),
    EmptyContext { context: usize },
    UnknownLabel { context: usize, label: InstrumentLabel },
    RepeatedLabel { context: usize, label: InstrumentLabel },
    DuplicateContext { context: usize, first: usize },
    Uncovered(InstrumentLabel),
}

impl fmt::Display for MeasurementViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use MeasurementViolation::*;
        match self {
            Instrument(v) => v.fmt(f),
            EmptyContext { context } => write!(f, "context {context} is empty"),
            UnknownLabel { context, label } => {
                write!(f, "context {context} names undeclared instrument `{label}`")
            }
            RepeatedLabel { context, label } => {
                write!(f, "context {context} lists `{label}` more than once")
            }
            DuplicateContext { context, first } => {
                write!(f, "context {context} repeats context {first}")
            }
            Uncovered(l) => write!(f, "instrument `{l}` is in no context"),
        }
    }
}

impl MeasurementScenario {
    pub fn new(instruments: Vec<Instrument>, contexts: Vec<Vec<InstrumentLabel>>) -> Result<Self> {
        let m = Self::from_parts_unchecked(instruments, contexts);
        match validate_measurement_scenario(&m).first() {
            None => Ok(m),
            Some(v) => Err(Error::InvalidScenario(v.to_string())),
        }
    }

    pub fn from_parts_unchecked(
        instruments: Vec<Instrument>,
        contexts: Vec<Vec<InstrumentLabel>>,
    ) -> Self {
        MeasurementScenario {
            instruments,
            contexts,
        }
    }

    pub fn binary(labels: &[&str], contexts: &[&[&str]]) -> Result<Self> {
        Self::new(
            labels.iter().map(|l| Instrument::binary(*l)).collect(),
            contexts
                .iter()
                .map(|c| c.iter().map(|l| InstrumentLabel::from(*l)).collect())
                .collect(),
        )
    }

    pub fn instruments(&self) -> &[Instrument] {
        &self.instruments
    }

    pub fn contexts(&self) -> &[Vec<InstrumentLabel>] {
        &self.contexts
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.instruments.iter().position(|i| i.label.as_str() == label)
    }

    /// Contexts as sets, for order-insensitive comparison.
    pub fn context_sets(&self) -> BTreeSet<BTreeSet<InstrumentLabel>> {
        self.contexts
            .iter()
            .map(|c| c.iter().cloned().collect())
            .collect()
    }
}

pub fn validate_measurement_scenario(m: &MeasurementScenario) -> Vec<MeasurementViolation> {
    let mut inst = Vec::new();
    check_instruments(&m.instruments, &mut inst);
    let mut out: Vec<MeasurementViolation> =
        inst.into_iter().map(MeasurementViolation::Instrument).collect();
    let known: BTreeSet<&InstrumentLabel> = m.instruments.iter().map(|i| &i.label).collect();
    let mut covered = BTreeSet::new();
    let mut seen: Vec<BTreeSet<&InstrumentLabel>> = Vec::new();
    for (ci, ctx) in m.contexts.iter().enumerate() {
        if ctx.is_empty() {
            out.push(MeasurementViolation::EmptyContext { context: ci });
        }
        let mut set = BTreeSet::new();
        for l in ctx {
            if !known.contains(l) {
                out.push(MeasurementViolation::UnknownLabel {
                    context: ci,
                    label: l.clone(),
                });
            }
            if !set.insert(l) {
                out.push(MeasurementViolation::RepeatedLabel {
                    context: ci,
                    label: l.clone(),
                });
            }
            covered.insert(l);
        }
        if let Some(first) = seen.iter().position(|s| *s == set) {
            out.push(MeasurementViolation::DuplicateContext { context: ci, first });
        }
        seen.push(set);
    }
    for i in &m.instruments {
        if !covered.contains(&i.label) {
            out.push(MeasurementViolation::Uncovered(i.label.clone()));
        }
    }
    out
}

/// How the labels of each context are ordered into a sequence.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub enum OrderingPolicy {
    /// Labels in the order the context lists them.
    #[default]
    Declared,
    /// Labels in reverse declaration order.
    Reversed,
    /// One permutation per context: `perm[k]` is the declared index placed at position `k`.
    Explicit(Vec<Vec<usize>>),
}

/// Builds the induced sequential scenario of a measurement scenario.
pub fn induce_sequential(
    m: &MeasurementScenario,
    ordering: &OrderingPolicy,
) -> Result<SequentialScenario> {
    if let Some(v) = validate_measurement_scenario(m).first() {
        return Err(Error::InvalidScenario(v.to_string()));
    }
    let mut sequences = Vec::with_capacity(m.contexts.len());
    for (ci, ctx) in m.contexts.iter().enumerate() {
        let order: Vec<usize> = match ordering {
            OrderingPolicy::Declared => (0..ctx.len()).collect(),
            OrderingPolicy::Reversed => (0..ctx.len()).rev().collect(),
            OrderingPolicy::Explicit(perms) => {
                let p = perms.get(ci).ok_or(Error::NotAPermutation { context: ci })?;
                let mut hit = vec![false; ctx.len()];
                if p.len() != ctx.len() {
                    return Err(Error::NotAPermutation { context: ci });
                }
                for &k in p {
                    if k >= ctx.len() || core::mem::replace(&mut hit[k], true) {
                        return Err(Error::NotAPermutation { context: ci });
                    }
                }
                p.clone()
            }
        };
        sequences.push(Sequence::new(order.into_iter().map(|k| &ctx[k])));
    }
    if let OrderingPolicy::Explicit(perms) = ordering {
        if perms.len() != m.contexts.len() {
            return Err(Error::NotAPermutation {
                context: m.contexts.len().min(perms.len()),
            });
        }
    }
    SequentialScenario::new(m.instruments.clone(), sequences)
}

/// Recovers the measurement scenario of an induced sequential scenario.
///
/// Returns `None` when some sequence repeats a label or some label occurs in
/// no sequence, since such a scenario is not induced by any measurement
/// scenario. Sequences with equal base sets contribute a single context.
pub fn underlying_measurement_scenario(s: &SequentialScenario) -> Option<MeasurementScenario> {
    if s.sequences.iter().any(Sequence::has_repeats) {
        return None;
    }
    let mut contexts: Vec<Vec<InstrumentLabel>> = Vec::new();
    let mut seen = BTreeSet::new();
    for seq in &s.sequences {
        if seen.insert(base_set(seq)) {
            contexts.push(seq.labels().cloned().collect());
        }
    }
    let m = MeasurementScenario::from_parts_unchecked(s.instruments.clone(), contexts);
    validate_measurement_scenario(&m).is_empty().then_some(m)
}

/// Ready-made scenarios: KCBS (plain and extended) and Peres-Mermin.
pub mod examples {
    use super::*;

    pub const KCBS_LABELS: [&str; 5] = ["A0", "A1", "A2", "A3", "A4"];
    pub const PM_LABELS: [&str; 9] = ["A1", "A2", "A3", "A4", "A5", "A6", "A7", "A8", "A9"];

    fn kcbs_pairs() -> Vec<[&'static str; 2]> {
        (0..5).map(|i| [KCBS_LABELS[i], KCBS_LABELS[(i + 1) % 5]]).collect()
    }

    /// The 5-cycle measurement scenario with contexts `{A^i, A^{i+1 mod 5}}`.
    pub fn kcbs_measurement_scenario() -> MeasurementScenario {
        let pairs = kcbs_pairs();
        let ctx: Vec<&[&str]> = pairs.iter().map(|p| &p[..]).collect();
        MeasurementScenario::binary(&KCBS_LABELS, &ctx).expect("static scenario")
    }

    /// Sequences `(A^i, A^{i+1 mod 5})` with binary outcomes, positions shown from 1.
    pub fn kcbs_scenario() -> SequentialScenario {
        let pairs = kcbs_pairs();
        let seqs: Vec<&[&str]> = pairs.iter().map(|p| &p[..]).collect();
        SequentialScenario::binary(&KCBS_LABELS, &seqs)
            .expect("static scenario")
            .with_index_base(1)
    }

    /// KCBS with `A^0` measured again at the end of the first sequence.
    pub fn extended_kcbs_scenario() -> SequentialScenario {
        let pairs = kcbs_pairs();
        let first = ["A0", "A1", "A0"];
        let mut seqs: Vec<&[&str]> = vec![&first[..]];
        seqs.extend(pairs[1..].iter().map(|p| &p[..]));
        SequentialScenario::binary(&KCBS_LABELS, &seqs)
            .expect("static scenario")
            .with_index_base(1)
    }

    /// The six Peres-Mermin sequences: three rows then three columns.
    pub fn pm_sequences() -> [[&'static str; 3]; 6] {
        [
            ["A1", "A2", "A3"],
            ["A4", "A5", "A6"],
            ["A7", "A8", "A9"],
            ["A1", "A4", "A7"],
            ["A2", "A5", "A8"],
            ["A3", "A6", "A9"],
        ]
    }

    /// Peres-Mermin sequential scenario, positions shown from 0.
    pub fn pm_scenario() -> SequentialScenario {
        let seqs = pm_sequences();
        let refs: Vec<&[&str]> = seqs.iter().map(|s| &s[..]).collect();
        SequentialScenario::binary(&PM_LABELS, &refs).expect("static scenario")
    }

    pub fn pm_measurement_scenario() -> MeasurementScenario {
        let seqs = pm_sequences();
        let refs: Vec<&[&str]> = seqs.iter().map(|s| &s[..]).collect();
        MeasurementScenario::binary(&PM_LABELS, &refs).expect("static scenario")
    }
}

/// Renders a sequence as `A_1 B_2 ..` using the scenario's index base.
pub fn describe_sequence(s: &SequentialScenario, seq_index: usize) -> String {
    let seq = &s.sequences[seq_index];
    let parts: Vec<String> = seq
        .entries
        .iter()
        .map(|e| format!("{}_{}", e.label, e.position + s.index_base))
        .collect();
    parts.join(" ")
}
