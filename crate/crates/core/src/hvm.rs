//! Finite hidden variable models for sequential scenarios.
//!
//! A model has a finite set `Λ = {0, .., n-1}`, a preparation distribution
//! `μ`, and for every instrument a response function `ξ(a|λ)` and a transfer
//! function `Γ(λ'|λ, a)`. The behaviour of a sequence `A_1 .. A_N` is
//!
//! ```text
//! h_S(a_1..a_N) = Σ μ(λ_0) Π_i ξ_{A_i}(a_i|λ_{i-1}) Γ_{A_i}(λ_i|λ_{i-1}, a_i)
//! ```
//!
//! which rules out signalling backwards in time by construction. The last
//! transfer sums to one over the unused final hidden variable and is skipped.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::ToString;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::empirical::{Distribution, EmpiricalBehaviour};
use crate::error::{Error, Result};
use crate::scenario::{InstrumentLabel, OutcomeSpace, SequentialScenario, DEFAULT_ASSIGNMENT_CAP};

/// Largest hidden variable space accepted by the dense representation.
pub const DEFAULT_LAMBDA_CAP: usize = 4096;

/// Response and transfer functions of one instrument.
#[derive(Clone, Debug, PartialEq)]
pub struct InstrumentModel {
    lambda_count: usize,
    outcome_count: usize,
    /// `response[λ * O + a] = ξ(a|λ)`
    response: Vec<f64>,
    /// `transfer[(λ * O + a) * Λ + λ'] = Γ(λ'|λ, a)`
    transfer: Vec<f64>,
}

impl InstrumentModel {
    pub fn new(
        lambda_count: usize,
        outcome_count: usize,
        response: Vec<f64>,
        transfer: Vec<f64>,
    ) -> Result<Self> {
        if lambda_count == 0 || outcome_count == 0 {
            return Err(Error::InvalidParameter(
                "hidden variable and outcome sets must be non-empty".to_string(),
            ));
        }
        if lambda_count > DEFAULT_LAMBDA_CAP {
            return Err(Error::LambdaCapExceeded {
                count: lambda_count,
                cap: DEFAULT_LAMBDA_CAP,
            });
        }
        let too_large = || Error::InvalidParameter("instrument tables too large".to_string());
        let rows = lambda_count.checked_mul(outcome_count).ok_or_else(too_large)?;
        let cells = rows.checked_mul(lambda_count).ok_or_else(too_large)?;
        if response.len() != rows {
            return Err(Error::ShapeMismatch {
                what: "response matrix size",
                expected: rows,
                found: response.len(),
            });
        }
        if transfer.len() != cells {
            return Err(Error::ShapeMismatch {
                what: "transfer tensor size",
                expected: cells,
                found: transfer.len(),
            });
        }
        Ok(InstrumentModel {
            lambda_count,
            outcome_count,
            response,
            transfer,
        })
    }

    /// Builds the tables from `xi(a, λ)` and `gamma(λ', λ, a)`.
    pub fn from_fns(
        lambda_count: usize,
        outcome_count: usize,
        xi: impl Fn(usize, usize) -> f64,
        gamma: impl Fn(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut response = Vec::with_capacity(lambda_count * outcome_count);
        let mut transfer = Vec::with_capacity(lambda_count * outcome_count * lambda_count);
        for l in 0..lambda_count {
            for a in 0..outcome_count {
                response.push(xi(a, l));
                for to in 0..lambda_count {
                    transfer.push(gamma(to, l, a));
                }
            }
        }
        Self::new(lambda_count, outcome_count, response, transfer)
    }

    pub fn lambda_count(&self) -> usize {
        self.lambda_count
    }

    pub fn outcome_count(&self) -> usize {
        self.outcome_count
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn transfer(&self) -> &[f64] {
        &self.transfer
    }

    /// `ξ(a|λ)`
    #[inline]
    pub fn xi(&self, a: usize, lambda: usize) -> f64 {
        self.response[lambda * self.outcome_count + a]
    }

    /// `Γ(to|from, a)`
    #[inline]
    pub fn gamma(&self, to: usize, from: usize, a: usize) -> f64 {
        self.transfer[(from * self.outcome_count + a) * self.lambda_count + to]
    }

    pub fn response_row(&self, lambda: usize) -> &[f64] {
        &self.response[lambda * self.outcome_count..(lambda + 1) * self.outcome_count]
    }

    /// `Γ(·|from, a)`
    pub fn transfer_row(&self, from: usize, a: usize) -> &[f64] {
        let start = (from * self.outcome_count + a) * self.lambda_count;
        &self.transfer[start..start + self.lambda_count]
    }
}

/// Hidden variables with positive preparation weight.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SupportSet {
    pub lambdas: BTreeSet<usize>,
}

/// A finite hidden variable model.
#[derive(Clone, Debug, PartialEq)]
pub struct HiddenVariableModel {
    mu: Vec<f64>,
    instruments: BTreeMap<InstrumentLabel, InstrumentModel>,
}

impl HiddenVariableModel {
    /// Checks shapes only; use [`validate_hvm`] for normalization.
    pub fn new(mu: Vec<f64>, instruments: BTreeMap<InstrumentLabel, InstrumentModel>) -> Result<Self> {
        if mu.is_empty() {
            return Err(Error::InvalidParameter("empty hidden variable set".to_string()));
        }
        if mu.len() > DEFAULT_LAMBDA_CAP {
            return Err(Error::LambdaCapExceeded {
                count: mu.len(),
                cap: DEFAULT_LAMBDA_CAP,
            });
        }
        for m in instruments.values() {
            if m.lambda_count != mu.len() {
                return Err(Error::ShapeMismatch {
                    what: "instrument hidden variable count",
                    expected: mu.len(),
                    found: m.lambda_count,
                });
            }
        }
        Ok(HiddenVariableModel { mu, instruments })
    }

    pub fn lambda_count(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn instruments(&self) -> &BTreeMap<InstrumentLabel, InstrumentModel> {
        &self.instruments
    }

    pub fn instrument(&self, label: &str) -> Result<&InstrumentModel> {
        self.instruments
            .get(&InstrumentLabel::from(label))
            .ok_or_else(|| Error::MissingInstrument(label.to_string()))
    }

    pub fn support(&self) -> SupportSet {
        SupportSet {
            lambdas: (0..self.mu.len()).filter(|&l| self.mu[l] > 0.0).collect(),
        }
    }

    /// Same model with another preparation.
    pub fn with_mu(&self, mu: Vec<f64>) -> Result<Self> {
        Self::new(mu, self.instruments.clone())
    }
}

/// A normalization or positivity problem found by [`validate_hvm`].
#[derive(Clone, Debug, PartialEq)]
pub enum HvmViolation {
    PreparationNegative { lambda: usize, value: f64 },
    PreparationNotNormalized { sum: f64 },
    ResponseNegative { label: InstrumentLabel, lambda: usize, outcome: usize, value: f64 },
    ResponseNotNormalized { label: InstrumentLabel, lambda: usize, sum: f64 },
    TransferNegative { label: InstrumentLabel, from: usize, outcome: usize, to: usize, value: f64 },
    TransferNotNormalized { label: InstrumentLabel, from: usize, outcome: usize, sum: f64 },
}

impl fmt::Display for HvmViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use HvmViolation::*;
        match self {
            PreparationNegative { lambda, value } => write!(f, "mu({lambda}) = {value:e} < 0"),
            PreparationNotNormalized { sum } => write!(f, "mu sums to {sum}"),
            ResponseNegative {
                label,
                lambda,
                outcome,
                value,
            } => write!(f, "xi_{label}({outcome}|{lambda}) = {value:e} < 0"),
            ResponseNotNormalized { label, lambda, sum } => {
                write!(f, "xi_{label}(.|{lambda}) sums to {sum}")
            }
            TransferNegative {
                label,
                from,
                outcome,
                to,
                value,
            } => write!(f, "Gamma_{label}({to}|{from},{outcome}) = {value:e} < 0"),
            TransferNotNormalized {
                label,
                from,
                outcome,
                sum,
            } => write!(f, "Gamma_{label}(.|{from},{outcome}) sums to {sum}"),
        }
    }
}

/// Lists every violated positivity or normalization condition beyond `tol`.
pub fn validate_hvm(h: &HiddenVariableModel, tol: f64) -> Vec<HvmViolation> {
    let mut out = Vec::new();
    for (l, &m) in h.mu.iter().enumerate() {
        if !(m >= -tol) {
            out.push(HvmViolation::PreparationNegative { lambda: l, value: m });
        }
    }
    let sum: f64 = h.mu.iter().sum();
    if !((sum - 1.0).abs() <= tol) {
        out.push(HvmViolation::PreparationNotNormalized { sum });
    }
    for (label, inst) in &h.instruments {
        for l in 0..inst.lambda_count {
            let row = inst.response_row(l);
            for (a, &v) in row.iter().enumerate() {
                if !(v >= -tol) {
                    out.push(HvmViolation::ResponseNegative {
                        label: label.clone(),
                        lambda: l,
                        outcome: a,
                        value: v,
                    });
                }
            }
            let s: f64 = row.iter().sum();
            if !((s - 1.0).abs() <= tol) {
                out.push(HvmViolation::ResponseNotNormalized {
                    label: label.clone(),
                    lambda: l,
                    sum: s,
                });
            }
            for a in 0..inst.outcome_count {
                let row = inst.transfer_row(l, a);
                for (to, &v) in row.iter().enumerate() {
                    if !(v >= -tol) {
                        out.push(HvmViolation::TransferNegative {
                            label: label.clone(),
                            from: l,
                            outcome: a,
                            to,
                            value: v,
                        });
                    }
                }
                let s: f64 = row.iter().sum();
                if !((s - 1.0).abs() <= tol) {
                    out.push(HvmViolation::TransferNotNormalized {
                        label: label.clone(),
                        from: l,
                        outcome: a,
                        sum: s,
                    });
                }
            }
        }
    }
    out
}

fn sequence_models<'a>(
    h: &'a HiddenVariableModel,
    s: &SequentialScenario,
    si: usize,
) -> Result<Vec<&'a InstrumentModel>> {
    s.sequences()[si]
        .labels()
        .map(|l| {
            let m = h.instrument(l.as_str())?;
            let k = s.label_index(l.as_str()).ok_or_else(|| Error::UnknownLabel(l.to_string()))?;
            if m.outcome_count != s.outcome_count(k) {
                return Err(Error::ShapeMismatch {
                    what: "instrument outcome count",
                    expected: s.outcome_count(k),
                    found: m.outcome_count,
                });
            }
            Ok(m)
        })
        .collect()
}

fn propagate(models: &[&InstrumentModel], pos: usize, w: &[f64], base: usize, out: &mut [f64]) {
    let m = models[pos];
    let n = w.len();
    for a in 0..m.outcome_count {
        let idx = base * m.outcome_count + a;
        if pos + 1 == models.len() {
            out[idx] = (0..n).map(|l| w[l] * m.xi(a, l)).sum();
            continue;
        }
        let mut next = vec![0.0; n];
        let mut any = false;
        for l in 0..n {
            let p = w[l] * m.xi(a, l);
            if p == 0.0 {
                continue;
            }
            any = true;
            for (nx, &g) in next.iter_mut().zip(m.transfer_row(l, a)) {
                *nx += p * g;
            }
        }
        if !any {
            // the whole subtree is zero; `out` starts zeroed
            continue;
        }
        propagate(models, pos + 1, &next, idx, out);
    }
}

/// The empirical behaviour generated by the model on every sequence.
pub fn behaviour(h: &HiddenVariableModel, s: &Arc<SequentialScenario>) -> Result<EmpiricalBehaviour> {
    let mut tables = Vec::with_capacity(s.sequences().len());
    for si in 0..s.sequences().len() {
        let models = sequence_models(h, s, si)?;
        let size = s.outcome_space(si)?.size();
        let mut out = vec![0.0; size];
        if !models.is_empty() {
            propagate(&models, 0, &h.mu, 0, &mut out);
        }
        tables.push(Distribution::new(out));
    }
    EmpiricalBehaviour::new(s.clone(), tables)
}

/// True when every response probability is within `tol` of 0 or 1.
pub fn check_outcome_determinism(h: &HiddenVariableModel, label: &str, tol: f64) -> Result<bool> {
    let m = h.instrument(label)?;
    Ok(m.response
        .iter()
        .all(|&v| v.abs() <= tol || (v - 1.0).abs() <= tol))
}

/// Result of a no-disturbance check.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NdCheck {
    pub holds: bool,
    pub max_deviation: f64,
}

/// Checks that performing `a` right before `b` leaves the statistics of `b`
/// unchanged for every hidden variable:
/// `Σ_{a,λ'} ξ_A(a|λ) Γ_A(λ'|λ,a) ξ_B(b|λ') = ξ_B(b|λ)`.
pub fn check_no_disturbance(
    h: &HiddenVariableModel,
    a_label: &str,
    b_label: &str,
    tol: f64,
) -> Result<NdCheck> {
    let a = h.instrument(a_label)?;
    let b = h.instrument(b_label)?;
    let n = h.lambda_count();
    let mut worst = 0.0f64;
    let mut after = vec![0.0; b.outcome_count];
    for l in 0..n {
        after.iter_mut().for_each(|v| *v = 0.0);
        for x in 0..a.outcome_count {
            let p = a.xi(x, l);
            if p == 0.0 {
                continue;
            }
            for (to, &g) in a.transfer_row(l, x).iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                for (y, slot) in after.iter_mut().enumerate() {
                    *slot += p * g * b.xi(y, to);
                }
            }
        }
        for (y, &v) in after.iter().enumerate() {
            worst = worst.max((v - b.xi(y, l)).abs());
        }
    }
    Ok(NdCheck {
        holds: worst <= tol,
        max_deviation: worst,
    })
}

/// True when `Γ(·|λ, a)` does not depend on `a` (within `tol`).
pub fn check_outcome_independence(h: &HiddenVariableModel, label: &str, tol: f64) -> Result<bool> {
    let m = h.instrument(label)?;
    for l in 0..m.lambda_count {
        let first = m.transfer_row(l, 0);
        for a in 1..m.outcome_count {
            let row = m.transfer_row(l, a);
            if first.iter().zip(row).any(|(x, y)| (x - y).abs() > tol) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// One ordered pair of positions inside a sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct PairCheck {
    pub sequence: usize,
    pub earlier: usize,
    pub later: usize,
    pub check: NdCheck,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NdReport {
    pub pairs: Vec<PairCheck>,
    pub max_deviation: f64,
}

impl NdReport {
    pub fn holds(&self) -> bool {
        self.pairs.iter().all(|p| p.check.holds)
    }

    pub fn failures(&self) -> impl Iterator<Item = &PairCheck> {
        self.pairs.iter().filter(|p| !p.check.holds)
    }
}

/// Runs [`check_no_disturbance`] for every pair of positions `i < j` in every
/// sequence, including pairs where the same label is repeated.
pub fn check_nd_hvm(h: &HiddenVariableModel, s: &SequentialScenario, tol: f64) -> Result<NdReport> {
    let mut cache: BTreeMap<(&InstrumentLabel, &InstrumentLabel), NdCheck> = BTreeMap::new();
    let mut pairs = Vec::new();
    let mut max_deviation = 0.0f64;
    for (si, seq) in s.sequences().iter().enumerate() {
        let labels: Vec<&InstrumentLabel> = seq.labels().collect();
        for i in 0..labels.len() {
            for j in (i + 1)..labels.len() {
                let key = (labels[i], labels[j]);
                let check = match cache.get(&key) {
                    Some(c) => *c,
                    None => {
                        let c = check_no_disturbance(h, labels[i].as_str(), labels[j].as_str(), tol)?;
                        cache.insert(key, c);
                        c
                    }
                };
                max_deviation = max_deviation.max(check.max_deviation);
                pairs.push(PairCheck {
                    sequence: si,
                    earlier: i,
                    later: j,
                    check,
                });
            }
        }
    }
    Ok(NdReport {
        pairs,
        max_deviation,
    })
}

/// The textbook instruments.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExampleKind {
    /// Uniform response, hidden variable untouched.
    FairCoinFlip,
    /// Deterministic response, `Γ(λ'|λ) = δ_{λ,λ'}`.
    NonInvasive,
    /// Deterministic response; after outcome `a` the hidden variable is
    /// resampled uniformly among those that again answer `a`.
    RepeatableDeterministic,
    /// `Γ(λ'|λ, a) = 1/|Λ|`.
    RandomResampling,
    /// `Γ(λ'|λ, a) = δ_{λ_target, λ'}`.
    DeterministicReset { target: usize },
}

/// Parameters of [`build_example_instrument`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExampleParams {
    pub lambda_count: usize,
    pub outcome_count: usize,
    /// Outcome produced by each hidden variable. Required for the
    /// deterministic kinds; when absent elsewhere the response is uniform.
    pub assignment: Option<Vec<usize>>,
}

fn deterministic(asg: &[usize]) -> impl Fn(usize, usize) -> f64 + '_ {
    move |a, l| (asg[l] == a) as u8 as f64
}

pub fn build_example_instrument(kind: ExampleKind, params: &ExampleParams) -> Result<InstrumentModel> {
    let n = params.lambda_count;
    let o = params.outcome_count;
    if let Some(asg) = &params.assignment {
        if asg.len() != n {
            return Err(Error::ShapeMismatch {
                what: "assignment length",
                expected: n,
                found: asg.len(),
            });
        }
        if let Some(&bad) = asg.iter().find(|&&v| v >= o) {
            return Err(Error::InvalidParameter(format!(
                "assigned outcome {bad} outside {o} outcomes"
            )));
        }
    }
    let uniform = |_: usize, _: usize| 1.0 / o as f64;
    let identity = |to: usize, from: usize, _: usize| (to == from) as u8 as f64;
    match kind {
        ExampleKind::FairCoinFlip => InstrumentModel::from_fns(n, o, uniform, identity),
        ExampleKind::NonInvasive => {
            let asg = params.assignment.as_ref().ok_or_else(|| {
                Error::InvalidParameter("non-invasive instrument needs an assignment".to_string())
            })?;
            InstrumentModel::from_fns(n, o, deterministic(asg), identity)
        }
        ExampleKind::RepeatableDeterministic => {
            let asg = params.assignment.as_ref().ok_or_else(|| {
                Error::InvalidParameter("repeatable instrument needs an assignment".to_string())
            })?;
            let class_size: Vec<usize> = (0..o).map(|a| asg.iter().filter(|&&v| v == a).count()).collect();
            InstrumentModel::from_fns(n, o, deterministic(asg), |to, from, a| {
                if class_size[a] == 0 {
                    (to == from) as u8 as f64
                } else if asg[to] == a {
                    1.0 / class_size[a] as f64
                } else {
                    0.0
                }
            })
        }
        ExampleKind::RandomResampling => {
            let flat = |_: usize, _: usize, _: usize| 1.0 / n as f64;
            match &params.assignment {
                Some(asg) => InstrumentModel::from_fns(n, o, deterministic(asg), flat),
                None => InstrumentModel::from_fns(n, o, uniform, flat),
            }
        }
        ExampleKind::DeterministicReset { target } => {
            if target >= n {
                return Err(Error::InvalidParameter(format!(
                    "reset target {target} outside {n} hidden variables"
                )));
            }
            let reset = move |to: usize, _: usize, _: usize| (to == target) as u8 as f64;
            match &params.assignment {
                Some(asg) => InstrumentModel::from_fns(n, o, deterministic(asg), reset),
                None => InstrumentModel::from_fns(n, o, uniform, reset),
            }
        }
    }
}

/// Model whose hidden variables are the global assignments with positive
/// weight: `μ` is the weight, responses read the assignment, and every
/// transfer is the identity. It is outcome deterministic, outcome independent
/// and non-disturbing, and reproduces the mixture of deterministic models.
///
/// `weights` is indexed by global assignment in enumeration order.
pub fn build_factorizable_hvm(s: &SequentialScenario, weights: &[f64]) -> Result<HiddenVariableModel> {
    let count = s.assignment_count();
    if count > DEFAULT_ASSIGNMENT_CAP as u128 {
        return Err(Error::AssignmentCapExceeded {
            count,
            cap: DEFAULT_ASSIGNMENT_CAP,
        });
    }
    if weights.len() as u128 != count {
        return Err(Error::ShapeMismatch {
            what: "assignment weights",
            expected: count as usize,
            found: weights.len(),
        });
    }
    if let Some(w) = weights.iter().find(|w| !(**w >= 0.0)) {
        return Err(Error::InvalidWeights(format!("negative weight {w}")));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidWeights(format!("weights sum to {total}")));
    }
    let support: Vec<usize> = (0..weights.len()).filter(|&k| weights[k] > 0.0).collect();
    if support.len() > DEFAULT_LAMBDA_CAP {
        return Err(Error::LambdaCapExceeded {
            count: support.len(),
            cap: DEFAULT_LAMBDA_CAP,
        });
    }
    let space = s.assignment_space();
    let assignments: Vec<Vec<usize>> = support.iter().map(|&k| space.decode(k)).collect();
    let n = support.len();
    let mut instruments = BTreeMap::new();
    for (x, inst) in s.instruments().iter().enumerate() {
        let m = InstrumentModel::from_fns(
            n,
            inst.outcome_count(),
            |a, l| (assignments[l][x] == a) as u8 as f64,
            |to, from, _| (to == from) as u8 as f64,
        )?;
        instruments.insert(inst.label.clone(), m);
    }
    HiddenVariableModel::new(support.iter().map(|&k| weights[k]).collect(), instruments)
}

/// Restriction classes for [`random_restricted_hvm`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Restriction {
    /// Outcome deterministic and non-disturbing.
    OdNd,
    /// Outcome independent and non-disturbing.
    OiNd,
    /// Non-disturbing only.
    Nd,
}

fn random_distribution(rng: &mut ChaCha8Rng, support: &[usize], n: usize) -> Vec<f64> {
    let mut w = vec![0.0; n];
    loop {
        let mut total = 0.0;
        for &k in support {
            let v = if rng.gen_bool(0.3) { 0.0 } else { rng.gen::<f64>() };
            w[k] = v;
            total += v;
        }
        if total > 0.0 {
            for &k in support {
                w[k] /= total;
            }
            return w;
        }
    }
}

/// Draws a random model satisfying the requested restriction on `s`.
///
/// Each instrument `x` splits `Λ` into a few response classes and answers
/// with one row per class (deterministic rows for [`Restriction::OdNd`]). A
/// transfer of `x` only moves `λ` to hidden variables lying in the same
/// response class as `λ` for every instrument that follows `x` in some
/// sequence, so no later instrument can see the move. Transfers depend on the
/// outcome except for [`Restriction::OiNd`].
pub fn random_restricted_hvm(
    s: &SequentialScenario,
    restriction: Restriction,
    seed: u64,
    lambda_count: usize,
) -> Result<HiddenVariableModel> {
    if lambda_count == 0 || lambda_count > DEFAULT_LAMBDA_CAP {
        return Err(Error::InvalidParameter(format!(
            "lambda_count {lambda_count} outside 1..={DEFAULT_LAMBDA_CAP}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = lambda_count;
    let nx = s.instruments().len();
    let mut downstream: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); nx];
    for si in 0..s.sequences().len() {
        let labels = s.resolve(si)?;
        for i in 0..labels.len() {
            for &later in &labels[i + 1..] {
                downstream[labels[i]].insert(later);
            }
        }
    }
    let mut class: Vec<Vec<usize>> = Vec::with_capacity(nx);
    let mut rows: Vec<Vec<Vec<f64>>> = Vec::with_capacity(nx);
    for x in 0..nx {
        let o = s.outcome_count(x);
        let k = rng.gen_range(1..=n.min(3));
        class.push((0..n).map(|_| rng.gen_range(0..k)).collect());
        let all: Vec<usize> = (0..o).collect();
        rows.push(
            (0..k)
                .map(|_| match restriction {
                    Restriction::OdNd => {
                        let mut r = vec![0.0; o];
                        r[rng.gen_range(0..o)] = 1.0;
                        r
                    }
                    Restriction::OiNd | Restriction::Nd => random_distribution(&mut rng, &all, o),
                })
                .collect(),
        );
    }
    let mut instruments = BTreeMap::new();
    for x in 0..nx {
        let o = s.outcome_count(x);
        let allowed: Vec<Vec<usize>> = (0..n)
            .map(|l| {
                (0..n)
                    .filter(|&t| downstream[x].iter().all(|&y| class[y][t] == class[y][l]))
                    .collect()
            })
            .collect();
        let mut transfer = Vec::with_capacity(n * o * n);
        for l in 0..n {
            let shared = random_distribution(&mut rng, &allowed[l], n);
            for _ in 0..o {
                if restriction == Restriction::OiNd {
                    transfer.extend_from_slice(&shared);
                } else {
                    transfer.extend(random_distribution(&mut rng, &allowed[l], n));
                }
            }
        }
        let response: Vec<f64> = (0..n).flat_map(|l| rows[x][class[x][l]].iter().copied()).collect();
        instruments.insert(
            s.label(x).clone(),
            InstrumentModel::new(n, o, response, transfer)?,
        );
    }
    let all: Vec<usize> = (0..n).collect();
    let mu = random_distribution(&mut rng, &all, n);
    HiddenVariableModel::new(mu, instruments)
}

fn require_binary<'a>(h: &'a HiddenVariableModel, label: &str) -> Result<&'a InstrumentModel> {
    let m = h.instrument(label)?;
    if m.outcome_count != 2 {
        return Err(Error::NotBinary(label.to_string()));
    }
    Ok(m)
}

/// Probability that `b` would flip between a run right before and a run
/// right after `a`, both evaluated on the same initial hidden variable:
/// `Σ μ(λ0) ξ_B(k|λ0) ξ_A(k'|λ0) Γ_A(λ1|λ0,k') ξ_B(1−k|λ1)`.
///
/// Not an observable quantity; it is only defined inside the model.
pub fn p_flip(h: &HiddenVariableModel, a_label: &str, b_label: &str) -> Result<f64> {
    let b = require_binary(h, b_label)?;
    let a = h.instrument(a_label)?;
    let n = h.lambda_count();
    let mut total = 0.0;
    for l0 in 0..n {
        let mu = h.mu[l0];
        if mu == 0.0 {
            continue;
        }
        for k in 0..2 {
            let pb = b.xi(k, l0);
            for kp in 0..a.outcome_count {
                let pa = a.xi(kp, l0);
                if pb * pa == 0.0 {
                    continue;
                }
                let flipped: f64 = a
                    .transfer_row(l0, kp)
                    .iter()
                    .enumerate()
                    .map(|(l1, g)| g * b.xi(1 - k, l1))
                    .sum();
                total += mu * pb * pa * flipped;
            }
        }
    }
    Ok(total)
}

/// Probability that the two runs of `b` in the sequence `b, a, b` disagree.
pub fn p_err(h: &HiddenVariableModel, a_label: &str, b_label: &str) -> Result<f64> {
    let b = require_binary(h, b_label)?;
    let a = h.instrument(a_label)?;
    let n = h.lambda_count();
    let mut total = 0.0;
    for l0 in 0..n {
        let mu = h.mu[l0];
        if mu == 0.0 {
            continue;
        }
        for k in 0..2 {
            let pb = b.xi(k, l0);
            if pb == 0.0 {
                continue;
            }
            for (l1, &g1) in b.transfer_row(l0, k).iter().enumerate() {
                if g1 == 0.0 {
                    continue;
                }
                for kp in 0..a.outcome_count {
                    let pa = a.xi(kp, l1);
                    if pa == 0.0 {
                        continue;
                    }
                    let flipped: f64 = a
                        .transfer_row(l1, kp)
                        .iter()
                        .enumerate()
                        .map(|(l2, g2)| g2 * b.xi(1 - k, l2))
                        .sum();
                    total += mu * pb * g1 * pa * flipped;
                }
            }
        }
    }
    Ok(total)
}

/// `Γ^ε(λ'|λ,k) = (1−ε) Γ(λ'|λ,k) + ε δ_{λ', flip_target[λ]}`.
///
/// `flip_target[λ]` must be a hidden variable on which the binary instrument
/// `flipped` gives the opposite response to `λ`; the builder refuses targets
/// that do not flip it.
pub fn with_noisy_transfer(
    inst: &InstrumentModel,
    flipped: &InstrumentModel,
    flip_target: &[usize],
    epsilon: f64,
) -> Result<InstrumentModel> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::InvalidParameter(format!("epsilon {epsilon} outside [0, 1]")));
    }
    if flipped.outcome_count != 2 {
        return Err(Error::NotBinary("flipped instrument".to_string()));
    }
    let n = inst.lambda_count;
    if flip_target.len() != n || flipped.lambda_count != n {
        return Err(Error::ShapeMismatch {
            what: "flip target length",
            expected: n,
            found: flip_target.len(),
        });
    }
    for (l, &t) in flip_target.iter().enumerate() {
        if t >= n {
            return Err(Error::InvalidParameter(format!("flip target {t} outside Λ")));
        }
        if (0..2).any(|k| (flipped.xi(k, t) - flipped.xi(1 - k, l)).abs() > 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "hidden variable {t} does not flip the response of {l}"
            )));
        }
    }
    let mut transfer = inst.transfer.clone();
    for l in 0..n {
        for a in 0..inst.outcome_count {
            let start = (l * inst.outcome_count + a) * n;
            for v in &mut transfer[start..start + n] {
                *v *= 1.0 - epsilon;
            }
            transfer[start + flip_target[l]] += epsilon;
        }
    }
    InstrumentModel::new(n, inst.outcome_count, inst.response.clone(), transfer)
}

/// Two non-invasive deterministic instruments `A` and `B` on
/// `Λ = {0,1}×{0,1}` (`λ = 2·a + b`, uniform preparation), after which both
/// transfers are made ε-noisy with a noise channel that flips `B`'s bit.
pub fn epsilon_noisy_family(epsilon: f64) -> Result<HiddenVariableModel> {
    let n = 4;
    let a_bit = |l: usize| l >> 1;
    let b_bit = |l: usize| l & 1;
    let identity = |to: usize, from: usize, _: usize| (to == from) as u8 as f64;
    let a = InstrumentModel::from_fns(n, 2, |k, l| (a_bit(l) == k) as u8 as f64, identity)?;
    let b = InstrumentModel::from_fns(n, 2, |k, l| (b_bit(l) == k) as u8 as f64, identity)?;
    let flip: Vec<usize> = (0..n).map(|l| l ^ 1).collect();
    let a_noisy = with_noisy_transfer(&a, &b, &flip, epsilon)?;
    let b_noisy = with_noisy_transfer(&b, &b, &flip, epsilon)?;
    let mut instruments = BTreeMap::new();
    instruments.insert(InstrumentLabel::from("A"), a_noisy);
    instruments.insert(InstrumentLabel::from("B"), b_noisy);
    HiddenVariableModel::new(vec![0.25; n], instruments)
}

/// All joint outcomes of a sequence with their probabilities, for reporting.
pub fn outcome_listing(e: &EmpiricalBehaviour, si: usize) -> Result<Vec<(Vec<usize>, f64)>> {
    let space: OutcomeSpace = e.scenario().outcome_space(si)?;
    Ok(space
        .iter()
        .zip(e.table(si).weights().iter().copied())
        .collect())
}
