//! Empirical behaviours: one probability table per sequence.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::ToString;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::scenario::{
    base_set, examples, GlobalAssignment, InstrumentLabel, MeasurementScenario, OutcomeSpace,
    SequentialScenario,
};

/// A probability vector over a finite outcome space.
///
/// Construction does not validate; see [`validate_behaviour`].
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution {
    weights: Vec<f64>,
}

impl Distribution {
    pub fn new(weights: Vec<f64>) -> Self {
        Distribution { weights }
    }

    pub fn uniform(n: usize) -> Self {
        Distribution {
            weights: vec![1.0 / n as f64; n],
        }
    }

    pub fn point_mass(n: usize, index: usize) -> Self {
        let mut weights = vec![0.0; n];
        weights[index] = 1.0;
        Distribution { weights }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn into_weights(self) -> Vec<f64> {
        self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Largest componentwise absolute difference.
    pub fn max_abs_diff(&self, other: &Distribution) -> f64 {
        self.weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// One distribution over joint outcomes for each sequence of a scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalBehaviour {
    scenario: Arc<SequentialScenario>,
    tables: Vec<Distribution>,
}

impl EmpiricalBehaviour {
    /// Checks that there is one table per sequence with `|O_S|` entries each.
    pub fn new(scenario: Arc<SequentialScenario>, tables: Vec<Distribution>) -> Result<Self> {
        if tables.len() != scenario.sequences().len() {
            return Err(Error::ShapeMismatch {
                what: "number of tables",
                expected: scenario.sequences().len(),
                found: tables.len(),
            });
        }
        for (i, t) in tables.iter().enumerate() {
            let n = scenario.outcome_space(i)?.size();
            if t.len() != n {
                return Err(Error::ShapeMismatch {
                    what: "table length",
                    expected: n,
                    found: t.len(),
                });
            }
        }
        Ok(EmpiricalBehaviour { scenario, tables })
    }

    /// The behaviour with a uniform table on every sequence.
    pub fn uniform(scenario: Arc<SequentialScenario>) -> Result<Self> {
        let tables = (0..scenario.sequences().len())
            .map(|i| Ok(Distribution::uniform(scenario.outcome_space(i)?.size())))
            .collect::<Result<Vec<_>>>()?;
        Self::new(scenario, tables)
    }

    pub fn scenario(&self) -> &Arc<SequentialScenario> {
        &self.scenario
    }

    pub fn tables(&self) -> &[Distribution] {
        &self.tables
    }

    pub fn table(&self, seq_index: usize) -> &Distribution {
        &self.tables[seq_index]
    }

    pub fn into_tables(self) -> Vec<Distribution> {
        self.tables
    }

    /// Probability of one joint outcome of one sequence.
    pub fn probability(&self, seq_index: usize, outcome: &[usize]) -> Result<f64> {
        let space = self.scenario.outcome_space(seq_index)?;
        let idx = space.index_of(outcome).ok_or(Error::ShapeMismatch {
            what: "joint outcome length",
            expected: space.radices().len(),
            found: outcome.len(),
        })?;
        Ok(self.tables[seq_index].weights[idx])
    }

    /// Largest componentwise difference over all tables. Both behaviours must
    /// share a scenario shape.
    pub fn max_abs_diff(&self, other: &EmpiricalBehaviour) -> f64 {
        self.tables
            .iter()
            .zip(&other.tables)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max)
    }
}

/// A normalization or positivity problem found by [`validate_behaviour`].
#[derive(Clone, Debug, PartialEq)]
pub enum BehaviourViolation {
    Negative { sequence: usize, outcome: usize, value: f64 },
    NotNormalized { sequence: usize, sum: f64 },
}

impl fmt::Display for BehaviourViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BehaviourViolation::Negative {
                sequence,
                outcome,
                value,
            } => write!(f, "sequence {sequence} outcome {outcome} has weight {value:e}"),
            BehaviourViolation::NotNormalized { sequence, sum } => {
                write!(f, "sequence {sequence} sums to {sum}")
            }
        }
    }
}

/// Lists entries below `-tol` and tables whose sum is off by more than `tol`.
pub fn validate_behaviour(e: &EmpiricalBehaviour, tol: f64) -> Vec<BehaviourViolation> {
    let mut out = Vec::new();
    for (si, t) in e.tables.iter().enumerate() {
        for (k, &w) in t.weights.iter().enumerate() {
            if !(w >= -tol) {
                out.push(BehaviourViolation::Negative {
                    sequence: si,
                    outcome: k,
                    value: w,
                });
            }
        }
        let sum = t.sum();
        if !((sum - 1.0).abs() <= tol) {
            out.push(BehaviourViolation::NotNormalized { sequence: si, sum });
        }
    }
    out
}

/// Sums out every position not in `positions`.
///
/// The result is indexed row-major over the selected positions in the order given.
pub fn marginal(e: &EmpiricalBehaviour, seq_index: usize, positions: &[usize]) -> Result<Distribution> {
    if positions.is_empty() {
        return Err(Error::InvalidSelection("empty position set".to_string()));
    }
    let space = e.scenario.outcome_space(seq_index)?;
    let radices = space.radices();
    for (k, &p) in positions.iter().enumerate() {
        if p >= radices.len() {
            return Err(Error::InvalidSelection(format!(
                "position {p} outside a sequence of length {}",
                radices.len()
            )));
        }
        if positions[..k].contains(&p) {
            return Err(Error::InvalidSelection(format!("position {p} selected twice")));
        }
    }
    let target = OutcomeSpace::new(positions.iter().map(|&p| radices[p]).collect());
    let mut out = vec![0.0; target.size()];
    let mut full = vec![0usize; radices.len()];
    let mut sel = vec![0usize; positions.len()];
    for (idx, &w) in e.tables[seq_index].weights.iter().enumerate() {
        space.decode_into(idx, &mut full);
        for (s, &p) in sel.iter_mut().zip(positions) {
            *s = full[p];
        }
        out[target.index_of(&sel).expect("selection fits")] += w;
    }
    Ok(Distribution::new(out))
}

/// Two single-label marginals that differ by more than the tolerance.
#[derive(Clone, Debug, PartialEq)]
pub struct MarginalDisagreement {
    pub label: InstrumentLabel,
    /// `(sequence, position)` of the reference occurrence.
    pub first: (usize, usize),
    /// `(sequence, position)` of the disagreeing occurrence.
    pub second: (usize, usize),
    pub deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct CompatibilityReport {
    pub disagreements: Vec<MarginalDisagreement>,
    /// Largest deviation seen over all compared occurrences.
    pub max_deviation: f64,
}

impl CompatibilityReport {
    pub fn passes(&self) -> bool {
        self.disagreements.is_empty()
    }
}

/// Compares the single-instrument marginals of every label across all of its
/// occurrences.
///
/// Each occurrence is compared with the first occurrence of that label (in
/// sequence order, then position order). Repeated occurrences inside one
/// sequence are included.
pub fn check_compatibility_of_marginals(e: &EmpiricalBehaviour, tol: f64) -> CompatibilityReport {
    let mut reference: BTreeMap<usize, ((usize, usize), Distribution)> = BTreeMap::new();
    let mut report = CompatibilityReport::default();
    for si in 0..e.tables.len() {
        let labels = match e.scenario.resolve(si) {
            Ok(l) => l,
            Err(_) => continue,
        };
        for (pos, &label) in labels.iter().enumerate() {
            let m = marginal(e, si, &[pos]).expect("position in range");
            match reference.get(&label) {
                None => {
                    reference.insert(label, ((si, pos), m));
                }
                Some((first, r)) => {
                    let dev = r.max_abs_diff(&m);
                    report.max_deviation = report.max_deviation.max(dev);
                    if !(dev <= tol) {
                        report.disagreements.push(MarginalDisagreement {
                            label: e.scenario.label(label).clone(),
                            first: *first,
                            second: (si, pos),
                            deviation: dev,
                        });
                    }
                }
            }
        }
    }
    report
}

/// The vertex of the non-contextual polytope fixed by a global assignment:
/// each table is a point mass on the consistent outcome that agrees with `g`.
pub fn deterministic_model(
    s: &Arc<SequentialScenario>,
    g: &GlobalAssignment,
) -> Result<EmpiricalBehaviour> {
    if g.as_slice().len() != s.instruments().len() {
        return Err(Error::ShapeMismatch {
            what: "assignment length",
            expected: s.instruments().len(),
            found: g.as_slice().len(),
        });
    }
    for (k, &v) in g.as_slice().iter().enumerate() {
        if v >= s.outcome_count(k) {
            return Err(Error::InvalidParameter(format!(
                "outcome {v} outside the alphabet of `{}`",
                s.label(k)
            )));
        }
    }
    let mut tables = Vec::with_capacity(s.sequences().len());
    for si in 0..s.sequences().len() {
        let labels = s.resolve(si)?;
        let space = s.outcome_space(si)?;
        let tuple: Vec<usize> = labels.iter().map(|&l| g.get(l)).collect();
        tables.push(Distribution::point_mass(
            space.size(),
            space.index_of(&tuple).expect("assignment fits"),
        ));
    }
    EmpiricalBehaviour::new(s.clone(), tables)
}

/// Componentwise convex combination of behaviours on one scenario.
pub fn mix(parts: &[(f64, &EmpiricalBehaviour)]) -> Result<EmpiricalBehaviour> {
    let (_, first) = parts
        .first()
        .ok_or_else(|| Error::InvalidWeights("no components".to_string()))?;
    let mut total = 0.0;
    for &(w, e) in parts {
        if !(w >= 0.0) {
            return Err(Error::InvalidWeights(format!("negative weight {w}")));
        }
        if !Arc::ptr_eq(&e.scenario, &first.scenario) && e.scenario != first.scenario {
            return Err(Error::ScenarioMismatch);
        }
        total += w;
    }
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidWeights(format!("weights sum to {total}")));
    }
    let mut tables: Vec<Distribution> = first
        .tables
        .iter()
        .map(|t| Distribution::new(vec![0.0; t.len()]))
        .collect();
    for &(w, e) in parts {
        for (acc, t) in tables.iter_mut().zip(&e.tables) {
            for (a, &x) in acc.weights.iter_mut().zip(&t.weights) {
                *a += w * x;
            }
        }
    }
    EmpiricalBehaviour::new(first.scenario.clone(), tables)
}

/// An empirical model on a measurement scenario: one table per context, with
/// the context's labels in declared order.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementBehaviour {
    scenario: Arc<MeasurementScenario>,
    tables: Vec<Distribution>,
}

impl MeasurementBehaviour {
    pub fn new(scenario: Arc<MeasurementScenario>, tables: Vec<Distribution>) -> Result<Self> {
        if tables.len() != scenario.contexts().len() {
            return Err(Error::ShapeMismatch {
                what: "number of tables",
                expected: scenario.contexts().len(),
                found: tables.len(),
            });
        }
        for (ci, t) in tables.iter().enumerate() {
            let n = context_space(&scenario, ci)?.size();
            if t.len() != n {
                return Err(Error::ShapeMismatch {
                    what: "table length",
                    expected: n,
                    found: t.len(),
                });
            }
        }
        Ok(MeasurementBehaviour { scenario, tables })
    }

    pub fn scenario(&self) -> &Arc<MeasurementScenario> {
        &self.scenario
    }

    pub fn tables(&self) -> &[Distribution] {
        &self.tables
    }

    /// Carries the tables over to an induced sequential scenario, reordering
    /// each table's axes to the sequence order.
    pub fn to_induced(&self, s: &Arc<SequentialScenario>) -> Result<EmpiricalBehaviour> {
        let m = &self.scenario;
        let mut tables = Vec::with_capacity(s.sequences().len());
        for (si, seq) in s.sequences().iter().enumerate() {
            if seq.has_repeats() {
                return Err(Error::InvalidScenario(format!(
                    "sequence {si} repeats a label; not an induced scenario"
                )));
            }
            let bs = base_set(seq);
            let ci = m
                .contexts()
                .iter()
                .position(|c| c.iter().cloned().collect::<alloc::collections::BTreeSet<_>>() == bs)
                .ok_or_else(|| Error::InvalidScenario(format!("sequence {si} matches no context")))?;
            let ctx = &m.contexts()[ci];
            // ctx position k sits at sequence position perm[k]
            let perm: Vec<usize> = ctx
                .iter()
                .map(|l| seq.labels().position(|x| x == l).expect("same base set"))
                .collect();
            let seq_space = s.outcome_space(si)?;
            let ctx_space = context_space(m, ci)?;
            if seq_space.size() != ctx_space.size() {
                return Err(Error::ShapeMismatch {
                    what: "outcome space",
                    expected: ctx_space.size(),
                    found: seq_space.size(),
                });
            }
            let mut out = vec![0.0; seq_space.size()];
            let mut c = vec![0usize; ctx.len()];
            for (idx, o) in seq_space.iter().enumerate() {
                for (k, slot) in c.iter_mut().enumerate() {
                    *slot = o[perm[k]];
                }
                out[idx] = self.tables[ci].weights[ctx_space.index_of(&c).expect("fits")];
            }
            tables.push(Distribution::new(out));
        }
        EmpiricalBehaviour::new(s.clone(), tables)
    }
}

pub(crate) fn context_space(m: &MeasurementScenario, ci: usize) -> Result<OutcomeSpace> {
    let ctx = m.contexts().get(ci).ok_or(Error::ShapeMismatch {
        what: "context index",
        expected: m.contexts().len(),
        found: ci,
    })?;
    let radices = ctx
        .iter()
        .map(|l| {
            m.label_index(l.as_str())
                .map(|k| m.instruments()[k].outcome_count())
                .ok_or_else(|| Error::UnknownLabel(l.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OutcomeSpace::new(radices))
}

fn find_sequence(s: &SequentialScenario, labels: &[&str]) -> Result<usize> {
    s.sequences()
        .iter()
        .position(|q| q.len() == labels.len() && q.labels().zip(labels).all(|(a, b)| a.as_str() == *b))
        .ok_or_else(|| Error::InvalidScenario(format!("no sequence {labels:?}")))
}

fn require_binary(s: &SequentialScenario, labels: &[&str]) -> Result<()> {
    for l in labels {
        let k = s.label_index(l).ok_or_else(|| Error::UnknownLabel(l.to_string()))?;
        if s.outcome_count(k) != 2 {
            return Err(Error::NotBinary(l.to_string()));
        }
    }
    Ok(())
}

/// Left-hand side of the KCBS inequality: `Σ_i p(a^i = a^{i+1 mod 5})` over the
/// sequences `(A^i, A^{i+1})`. Non-contextual behaviours give at least 1.
pub fn kcbs_sum(e: &EmpiricalBehaviour) -> Result<f64> {
    let s = e.scenario();
    require_binary(s, &examples::KCBS_LABELS)?;
    let mut total = 0.0;
    for i in 0..5 {
        let pair = [examples::KCBS_LABELS[i], examples::KCBS_LABELS[(i + 1) % 5]];
        let si = find_sequence(s, &pair)?;
        let t = e.table(si).weights();
        // row-major: (0,0) -> 0, (1,1) -> 3
        total += t[0] + t[3];
    }
    Ok(total)
}

/// Left-hand side of the Peres-Mermin inequality with outcome `k` read as
/// `(-1)^k`: the product of each row must be `+1`, of the first two columns
/// `+1`, and of the third column `-1`. Non-contextual behaviours give at most 5.
pub fn pm_sum(e: &EmpiricalBehaviour) -> Result<f64> {
    let s = e.scenario();
    require_binary(s, &examples::PM_LABELS)?;
    let mut total = 0.0;
    for seq in examples::pm_sequences() {
        let si = find_sequence(s, &seq)?;
        let want_odd = seq == ["A3", "A6", "A9"];
        let space = OutcomeSpace::new(vec![2, 2, 2]);
        for (idx, o) in space.iter().enumerate() {
            let odd = o.iter().sum::<usize>() % 2 == 1;
            if odd == want_odd {
                total += e.table(si).weights()[idx];
            }
        }
    }
    Ok(total)
}
