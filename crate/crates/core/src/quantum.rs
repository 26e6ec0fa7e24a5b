//! Quantum realizations of sequential scenarios.
//!
//! Matrices are small, dense and complex. Instruments are lists of Kraus
//! operators per outcome; the Lüders instrument of a POVM `{E_y}` has the
//! single Kraus operator `√E_y` for outcome `y`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::ToString;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;

use crate::empirical::{kcbs_sum, pm_sum, Distribution, EmpiricalBehaviour};
use crate::error::{Error, Result};
use crate::hvm::{NdCheck, NdReport, PairCheck};
use crate::scenario::examples::{kcbs_scenario, pm_scenario, KCBS_LABELS, PM_LABELS};
use crate::scenario::{InstrumentLabel, Sequence, SequentialScenario};

pub type C64 = Complex64;

/// Largest Hilbert space dimension accepted.
pub const MAX_DIMENSION: usize = 64;
/// Outcomes with probability at or below this have no post-measurement state.
pub const DEFAULT_PROBABILITY_THRESHOLD: f64 = 1e-12;
/// Tolerance on `Σ K†K = 1` and on effects summing to the identity.
pub const COMPLETENESS_TOL: f64 = 1e-10;
/// Smallest eigenvalue tolerated in a positive semidefinite matrix.
pub const PSD_TOL: f64 = 1e-10;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Square complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(dim: usize) -> Self {
        CMatrix {
            dim,
            data: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_data(dim: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::ShapeMismatch {
                what: "matrix entries",
                expected: dim * dim,
                found: data.len(),
            });
        }
        Ok(CMatrix { dim, data })
    }

    pub fn from_real(dim: usize, data: &[f64]) -> Result<Self> {
        Self::from_data(dim, data.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    /// `|v⟩⟨v|`
    pub fn outer(v: &[C64]) -> Self {
        let d = v.len();
        let mut m = Self::zeros(d);
        for i in 0..d {
            for j in 0..d {
                m[(i, j)] = v[i] * v[j].conj();
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        let d = self.dim;
        let mut m = Self::zeros(d);
        for i in 0..d {
            for j in 0..d {
                m[(j, i)] = self[(i, j)].conj();
            }
        }
        m
    }

    pub fn scale(&self, s: C64) -> Self {
        CMatrix {
            dim: self.dim,
            data: self.data.iter().map(|&x| x * s).collect(),
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        libm::sqrt(self.data.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max))
    }

    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        (self - other).max_abs()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.max_abs_diff(&self.adjoint()) <= tol
    }

    /// `(M + M†)/2`
    pub fn hermitian_part(&self) -> Self {
        (self + &self.adjoint()).scale(C64::new(0.5, 0.0))
    }

    pub fn kron(&self, other: &CMatrix) -> Self {
        let (a, b) = (self.dim, other.dim);
        let mut m = Self::zeros(a * b);
        for i in 0..a {
            for j in 0..a {
                for k in 0..b {
                    for l in 0..b {
                        m[(i * b + k, j * b + l)] = self[(i, j)] * other[(k, l)];
                    }
                }
            }
        }
        m
    }

    /// `⟨v|M|v⟩`
    pub fn expectation(&self, v: &[C64]) -> C64 {
        let d = self.dim;
        let mut total = ZERO;
        for i in 0..d {
            let mut row = ZERO;
            for j in 0..d {
                row += self[(i, j)] * v[j];
            }
            total += v[i].conj() * row;
        }
        total
    }

    /// `Tr[A B]` without forming the product.
    pub fn trace_product(&self, other: &CMatrix) -> C64 {
        let d = self.dim;
        let mut total = ZERO;
        for i in 0..d {
            for k in 0..d {
                total += self[(i, k)] * other[(k, i)];
            }
        }
        total
    }

    /// `[A, B]`
    pub fn commutator(&self, other: &CMatrix) -> Self {
        &(self * other) - &(other * self)
    }

    fn check_dim(&self, other: &CMatrix) {
        assert_eq!(self.dim, other.dim, "matrix dimension mismatch");
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.dim + j]
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        self.check_dim(rhs);
        CMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        self.check_dim(rhs);
        CMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        self.check_dim(rhs);
        let d = self.dim;
        let mut out = CMatrix::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                for j in 0..d {
                    out.data[i * d + j] += a * rhs.data[k * d + j];
                }
            }
        }
        out
    }
}

/// Cyclic Jacobi eigensolver for a real symmetric `n×n` matrix.
/// Returns the eigenvalues and the eigenvectors as the columns of a row-major
/// `n×n` matrix.
pub fn symmetric_eigen(a: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut a = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let scale: f64 = a.iter().map(|x| x * x).sum();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if off <= 1e-32 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + libm::sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i * n + i]).collect(), v)
}

// H = A + iB  <->  [[A, -B], [B, A]]; each eigenvalue of H appears twice.
fn real_embedding(m: &CMatrix) -> Vec<f64> {
    let d = m.dim;
    let n = 2 * d;
    let mut r = vec![0.0; n * n];
    for i in 0..d {
        for j in 0..d {
            let z = m[(i, j)];
            r[i * n + j] = z.re;
            r[(i + d) * n + j + d] = z.re;
            r[(i + d) * n + j] = z.im;
            r[i * n + j + d] = -z.im;
        }
    }
    r
}

/// Eigenvalues of a Hermitian matrix (each listed once, ascending).
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let (mut vals, _) = symmetric_eigen(&real_embedding(&m.hermitian_part()), 2 * m.dim);
    vals.sort_by(|a, b| a.total_cmp(b));
    vals.into_iter().step_by(2).collect()
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m).first().copied().unwrap_or(0.0)
}

/// `f(H)` for Hermitian `H`, through the spectral decomposition.
pub fn hermitian_function(m: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let d = m.dim;
    let n = 2 * d;
    let (vals, vecs) = symmetric_eigen(&real_embedding(&m.hermitian_part()), n);
    let fv: Vec<f64> = vals.iter().map(|&x| f(x)).collect();
    let mut out = CMatrix::zeros(d);
    // top-left block is Re f(H), bottom-left block is Im f(H)
    for i in 0..d {
        for j in 0..d {
            let mut re = 0.0;
            let mut im = 0.0;
            for k in 0..n {
                re += vecs[i * n + k] * fv[k] * vecs[j * n + k];
                im += vecs[(i + d) * n + k] * fv[k] * vecs[j * n + k];
            }
            out[(i, j)] = C64::new(re, im);
        }
    }
    out
}

/// Principal square root of a positive semidefinite matrix. Eigenvalues
/// slightly below zero (numerical noise) are clipped to zero.
pub fn psd_sqrt(m: &CMatrix) -> Result<CMatrix> {
    let min = min_eigenvalue(m);
    if min < -PSD_TOL {
        return Err(Error::NotPositiveSemidefinite { min_eigenvalue: min });
    }
    Ok(hermitian_function(m, |x| libm::sqrt(x.max(0.0))))
}

fn check_dimension(d: usize) -> Result<()> {
    if d == 0 || d > MAX_DIMENSION {
        return Err(Error::InvalidParameter(format!(
            "dimension {d} outside 1..={MAX_DIMENSION}"
        )));
    }
    Ok(())
}

/// A density operator: Hermitian, unit trace, positive semidefinite.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    rho: CMatrix,
}

impl DensityMatrix {
    pub fn new(rho: CMatrix) -> Result<Self> {
        check_dimension(rho.dim)?;
        if !rho.is_hermitian(1e-12) {
            return Err(Error::InvalidState("not Hermitian".to_string()));
        }
        let tr = rho.trace();
        if (tr - ONE).norm_sqr() > 1e-24 {
            return Err(Error::InvalidState(format!("trace {} + {}i", tr.re, tr.im)));
        }
        let min = min_eigenvalue(&rho);
        if min < -PSD_TOL {
            return Err(Error::NotPositiveSemidefinite { min_eigenvalue: min });
        }
        Ok(DensityMatrix { rho })
    }

    /// `|ψ⟩⟨ψ|`; `ψ` must have unit norm.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        check_dimension(psi.len())?;
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidState(format!("state vector has squared norm {norm}")));
        }
        Ok(DensityMatrix {
            rho: CMatrix::outer(psi),
        })
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        check_dimension(dim)?;
        Ok(DensityMatrix {
            rho: CMatrix::identity(dim).scale(C64::new(1.0 / dim as f64, 0.0)),
        })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.rho
    }

    pub fn dim(&self) -> usize {
        self.rho.dim
    }
}

/// An instrument as Kraus operators grouped by outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumInstrument {
    dim: usize,
    kraus: Vec<Vec<CMatrix>>,
}

impl QuantumInstrument {
    /// Checks `Σ_a Σ_k K†K = 1` within [`COMPLETENESS_TOL`].
    pub fn new(kraus: Vec<Vec<CMatrix>>) -> Result<Self> {
        let dim = kraus
            .iter()
            .flatten()
            .next()
            .map(|k| k.dim)
            .ok_or_else(|| Error::InvalidParameter("instrument without Kraus operators".to_string()))?;
        check_dimension(dim)?;
        let mut total = CMatrix::zeros(dim);
        for k in kraus.iter().flatten() {
            if k.dim != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: k.dim,
                });
            }
            total = &total + &(&k.adjoint() * k);
        }
        let deviation = total.max_abs_diff(&CMatrix::identity(dim));
        if deviation > COMPLETENESS_TOL {
            return Err(Error::Incomplete { deviation });
        }
        Ok(QuantumInstrument { dim, kraus })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn outcome_count(&self) -> usize {
        self.kraus.len()
    }

    pub fn kraus(&self) -> &[Vec<CMatrix>] {
        &self.kraus
    }

    /// `E_a = Σ_k K†K` for outcome `a`.
    pub fn effect(&self, a: usize) -> CMatrix {
        self.kraus[a]
            .iter()
            .fold(CMatrix::zeros(self.dim), |acc, k| &acc + &(&k.adjoint() * k))
    }

    /// The unnormalized post-measurement operator `ℐ^a(σ) = Σ_k K σ K†`.
    pub fn map(&self, a: usize, sigma: &CMatrix) -> CMatrix {
        self.kraus[a]
            .iter()
            .fold(CMatrix::zeros(self.dim), |acc, k| &acc + &(&(k * sigma) * &k.adjoint()))
    }

    /// `Σ_a ℐ^a(σ)`
    pub fn channel(&self, sigma: &CMatrix) -> CMatrix {
        (0..self.kraus.len()).fold(CMatrix::zeros(self.dim), |acc, a| &acc + &self.map(a, sigma))
    }
}

/// Lüders instrument of a POVM: one Kraus operator `√E` per effect.
pub fn lueders_from_povm(effects: &[CMatrix]) -> Result<QuantumInstrument> {
    let first = effects
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty POVM".to_string()))?;
    let dim = first.dim;
    check_dimension(dim)?;
    let mut total = CMatrix::zeros(dim);
    for e in effects {
        if e.dim != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: e.dim,
            });
        }
        if !e.is_hermitian(1e-12) {
            return Err(Error::NotPositiveSemidefinite {
                min_eigenvalue: f64::NAN,
            });
        }
        total = &total + e;
    }
    let deviation = total.max_abs_diff(&CMatrix::identity(dim));
    if deviation > COMPLETENESS_TOL {
        return Err(Error::Incomplete { deviation });
    }
    let kraus = effects
        .iter()
        .map(|e| psd_sqrt(e).map(|k| vec![k]))
        .collect::<Result<Vec<_>>>()?;
    QuantumInstrument::new(kraus)
}

/// Lüders instrument of a projective measurement. The projectors are used as
/// their own square roots; they must be idempotent and Hermitian.
pub fn projective_instrument(projectors: &[CMatrix]) -> Result<QuantumInstrument> {
    for p in projectors {
        if !p.is_hermitian(1e-12) || (&(p * p) - p).max_abs() > COMPLETENESS_TOL {
            return Err(Error::InvalidParameter("not an orthogonal projector".to_string()));
        }
    }
    QuantumInstrument::new(projectors.iter().map(|p| vec![p.clone()]).collect())
}

/// Outcome of [`apply_instrument`].
#[derive(Clone, Debug, PartialEq)]
pub struct InstrumentOutcome {
    pub probability: f64,
    /// `None` when the probability is at or below the threshold.
    pub post_state: Option<DensityMatrix>,
}

pub fn apply_instrument(inst: &QuantumInstrument, a: usize, rho: &DensityMatrix) -> Result<InstrumentOutcome> {
    apply_instrument_with(inst, a, rho, DEFAULT_PROBABILITY_THRESHOLD)
}

/// `p = Tr[ℐ^a(ρ)]` and `ρ_a = ℐ^a(ρ)/p`.
pub fn apply_instrument_with(
    inst: &QuantumInstrument,
    a: usize,
    rho: &DensityMatrix,
    threshold: f64,
) -> Result<InstrumentOutcome> {
    if rho.dim() != inst.dim {
        return Err(Error::DimensionMismatch {
            expected: inst.dim,
            found: rho.dim(),
        });
    }
    if a >= inst.outcome_count() {
        return Err(Error::InvalidParameter(format!(
            "outcome {a} outside {} outcomes",
            inst.outcome_count()
        )));
    }
    let sigma = inst.map(a, &rho.rho);
    let probability = sigma.trace().re.clamp(0.0, 1.0);
    let post_state = (probability > threshold).then(|| DensityMatrix {
        rho: sigma.hermitian_part().scale(C64::new(1.0 / probability, 0.0)),
    });
    Ok(InstrumentOutcome {
        probability,
        post_state,
    })
}

/// A state and an instrument per label on a common Hilbert space.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumRealization {
    state: DensityMatrix,
    instruments: BTreeMap<InstrumentLabel, QuantumInstrument>,
}

impl QuantumRealization {
    pub fn new(state: DensityMatrix, instruments: BTreeMap<InstrumentLabel, QuantumInstrument>) -> Result<Self> {
        for inst in instruments.values() {
            if inst.dim != state.dim() {
                return Err(Error::DimensionMismatch {
                    expected: state.dim(),
                    found: inst.dim,
                });
            }
        }
        Ok(QuantumRealization { state, instruments })
    }

    pub fn dim(&self) -> usize {
        self.state.dim()
    }

    pub fn state(&self) -> &DensityMatrix {
        &self.state
    }

    pub fn instruments(&self) -> &BTreeMap<InstrumentLabel, QuantumInstrument> {
        &self.instruments
    }

    pub fn instrument(&self, label: &str) -> Result<&QuantumInstrument> {
        self.instruments
            .get(&InstrumentLabel::from(label))
            .ok_or_else(|| Error::MissingInstrument(label.to_string()))
    }

    pub fn with_state(&self, state: DensityMatrix) -> Result<Self> {
        Self::new(state, self.instruments.clone())
    }

    /// Tables for every sequence of `s`.
    pub fn behaviour(&self, s: &Arc<SequentialScenario>) -> Result<EmpiricalBehaviour> {
        let mut tables = Vec::with_capacity(s.sequences().len());
        for seq in s.sequences() {
            for label in seq.labels() {
                let inst = self.instrument(label.as_str())?;
                let k = s
                    .label_index(label.as_str())
                    .ok_or_else(|| Error::UnknownLabel(label.to_string()))?;
                if inst.outcome_count() != s.outcome_count(k) {
                    return Err(Error::ShapeMismatch {
                        what: "instrument outcome count",
                        expected: s.outcome_count(k),
                        found: inst.outcome_count(),
                    });
                }
            }
            tables.push(sequential_distribution(self, seq)?);
        }
        EmpiricalBehaviour::new(s.clone(), tables)
    }
}

fn chain(insts: &[&QuantumInstrument], pos: usize, sigma: &CMatrix, base: usize, out: &mut [f64]) {
    let inst = insts[pos];
    for a in 0..inst.outcome_count() {
        let idx = base * inst.outcome_count() + a;
        let next = inst.map(a, sigma);
        // trace of the unnormalized branch = product of conditional probabilities
        let p = next.trace().re;
        if !(p > 0.0) {
            continue;
        }
        if pos + 1 == insts.len() {
            out[idx] = p.min(1.0);
        } else {
            chain(insts, pos + 1, &next, idx, out);
        }
    }
}

/// Joint outcome distribution of applying the instruments of `seq` in order,
/// each on the post-measurement state left by the previous one.
pub fn sequential_distribution(r: &QuantumRealization, seq: &Sequence) -> Result<Distribution> {
    let insts = seq
        .labels()
        .map(|l| r.instrument(l.as_str()))
        .collect::<Result<Vec<_>>>()?;
    let size: usize = insts.iter().map(|i| i.outcome_count()).product();
    let mut out = vec![0.0; size];
    if !insts.is_empty() {
        chain(&insts, 0, &r.state.rho, 0, &mut out);
    }
    Ok(Distribution::new(out))
}

/// `d²` pure states whose projectors span the Hermitian matrices:
/// `|i⟩`, `(|i⟩+|j⟩)/√2` and `(|i⟩+i|j⟩)/√2` for `i < j`.
pub fn tomographic_states(dim: usize) -> Vec<Vec<C64>> {
    let h = core::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(dim * dim);
    for i in 0..dim {
        let mut v = vec![ZERO; dim];
        v[i] = ONE;
        out.push(v);
    }
    for i in 0..dim {
        for j in (i + 1)..dim {
            let mut plus = vec![ZERO; dim];
            plus[i] = C64::new(h, 0.0);
            plus[j] = C64::new(h, 0.0);
            out.push(plus);
            let mut phase = vec![ZERO; dim];
            phase[i] = C64::new(h, 0.0);
            phase[j] = C64::new(0.0, h);
            out.push(phase);
        }
    }
    out
}

/// Checks `Tr[ℐ_B^b(Σ_a ℐ_A^a(ρ))] = Tr[ℐ_B^b(ρ)]` on a spanning set of
/// states; by linearity this covers every `ρ`.
pub fn check_quantum_nd(r: &QuantumRealization, a_label: &str, b_label: &str, tol: f64) -> Result<NdCheck> {
    let a = r.instrument(a_label)?;
    let b = r.instrument(b_label)?;
    let effects: Vec<CMatrix> = (0..b.outcome_count()).map(|y| b.effect(y)).collect();
    let mut worst = 0.0f64;
    for psi in tomographic_states(r.dim()) {
        let rho = CMatrix::outer(&psi);
        let after = a.channel(&rho);
        for e in &effects {
            let dev = (e.trace_product(&after) - e.trace_product(&rho)).norm_sqr();
            worst = worst.max(libm::sqrt(dev));
        }
    }
    Ok(NdCheck {
        holds: worst <= tol,
        max_deviation: worst,
    })
}

/// [`check_quantum_nd`] for every ordered pair of positions in every sequence.
pub fn check_nd_quantum(r: &QuantumRealization, s: &SequentialScenario, tol: f64) -> Result<NdReport> {
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
                        let c = check_quantum_nd(r, labels[i].as_str(), labels[j].as_str(), tol)?;
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

/// The five KCBS vectors `ν_0 .. ν_4` in `ℂ³` (all real), with
/// `θ = π/5` and `N = √(1 + cos θ)`. Consecutive vectors are orthogonal.
pub fn kcbs_vectors() -> [[f64; 3]; 5] {
    let theta = core::f64::consts::PI / 5.0;
    let c = libm::cos(theta);
    let n = libm::sqrt(1.0 + c);
    let z = libm::sqrt(c) / n;
    let v = |angle: f64, sign: f64| [libm::cos(angle) / n, sign * libm::sin(angle) / n, z];
    [
        v(0.0, 1.0),
        v(4.0 * theta, 1.0),
        v(2.0 * theta, -1.0),
        v(2.0 * theta, 1.0),
        v(4.0 * theta, -1.0),
    ]
}

fn real_vector(v: &[f64]) -> Vec<C64> {
    v.iter().map(|&x| C64::new(x, 0.0)).collect()
}

/// Qutrit realization with `A^i` the Lüders instrument of
/// `{|ν_i⟩⟨ν_i|, 1 − |ν_i⟩⟨ν_i|}` and input state `(0, 0, 1)`.
pub fn kcbs_realization() -> QuantumRealization {
    let mut instruments = BTreeMap::new();
    for (label, nu) in KCBS_LABELS.iter().zip(kcbs_vectors()) {
        let p0 = CMatrix::outer(&real_vector(&nu));
        let p1 = &CMatrix::identity(3) - &p0;
        instruments.insert(
            InstrumentLabel::from(*label),
            projective_instrument(&[p0, p1]).expect("rank-one projector"),
        );
    }
    let psi = real_vector(&[0.0, 0.0, 1.0]);
    QuantumRealization::new(DensityMatrix::pure(&psi).expect("unit vector"), instruments)
        .expect("common dimension")
}

/// Left-hand side of the KCBS inequality evaluated on the sequential tables.
pub fn kcbs_value(r: &QuantumRealization) -> Result<f64> {
    let s = Arc::new(kcbs_scenario());
    kcbs_sum(&r.behaviour(&s)?)
}

/// `σ_x, σ_y, σ_z`
pub fn paulis() -> [CMatrix; 3] {
    let c = |re: f64, im: f64| C64::new(re, im);
    [
        CMatrix::from_data(2, vec![ZERO, ONE, ONE, ZERO]).expect("2x2"),
        CMatrix::from_data(2, vec![ZERO, c(0.0, -1.0), c(0.0, 1.0), ZERO]).expect("2x2"),
        CMatrix::from_data(2, vec![ONE, ZERO, ZERO, c(-1.0, 0.0)]).expect("2x2"),
    ]
}

/// The nine two-qubit observables of the magic square, `A1 .. A9`.
pub fn pm_observables() -> [CMatrix; 9] {
    let [x, y, z] = paulis();
    let i = CMatrix::identity(2);
    [
        z.kron(&i),
        i.kron(&z),
        z.kron(&z),
        i.kron(&x),
        x.kron(&i),
        x.kron(&x),
        z.kron(&x),
        x.kron(&z),
        y.kron(&y),
    ]
}

/// Two-qubit realization with `A_i` the Lüders instrument onto the `±1`
/// eigenspaces of the `i`-th observable (outcome 0 is `+1`), on `|00⟩`.
pub fn pm_realization() -> QuantumRealization {
    let mut psi = vec![ZERO; 4];
    psi[0] = ONE;
    pm_realization_with_state(DensityMatrix::pure(&psi).expect("unit vector")).expect("dimension 4")
}

pub fn pm_realization_with_state(state: DensityMatrix) -> Result<QuantumRealization> {
    let id = CMatrix::identity(4);
    let half = C64::new(0.5, 0.0);
    let mut instruments = BTreeMap::new();
    for (label, o) in PM_LABELS.iter().zip(pm_observables()) {
        let plus = (&id + &o).scale(half);
        let minus = (&id - &o).scale(half);
        instruments.insert(InstrumentLabel::from(*label), projective_instrument(&[plus, minus])?);
    }
    QuantumRealization::new(state, instruments)
}

/// Left-hand side of the Peres-Mermin inequality evaluated on the sequential tables.
pub fn pm_value(r: &QuantumRealization) -> Result<f64> {
    let s = Arc::new(pm_scenario());
    pm_sum(&r.behaviour(&s)?)
}

/// Pointwise values of the quantum response and transfer formulas for pure
/// hidden states: `ξ(a|λ0) = Tr[ℐ^a(|λ0⟩⟨λ0|)]` and
/// `Γ(λ1|λ0, a) = ⟨λ1|ρ_a|λ1⟩` with `ρ_a` the normalized post-state.
pub fn hvm_formulas(inst: &QuantumInstrument, a: usize, lambda0: &[C64], lambda1: &[C64]) -> Result<(f64, f64)> {
    for v in [lambda0, lambda1] {
        if v.len() != inst.dim {
            return Err(Error::DimensionMismatch {
                expected: inst.dim,
                found: v.len(),
            });
        }
    }
    let rho = DensityMatrix::pure(lambda0)?;
    DensityMatrix::pure(lambda1)?;
    let out = apply_instrument(inst, a, &rho)?;
    let post = out.post_state.ok_or(Error::ZeroProbability)?;
    let gamma = post.rho.expectation(lambda1).re;
    Ok((out.probability, gamma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::empirical::check_compatibility_of_marginals;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn basis(d: usize, i: usize) -> Vec<C64> {
        let mut v = vec![ZERO; d];
        v[i] = ONE;
        v
    }

    #[test]
    fn jacobi_diagonalizes() {
        let a = [4.0, 1.0, 2.0, 1.0, 3.0, 0.5, 2.0, 0.5, 1.0];
        let (vals, vecs) = symmetric_eigen(&a, 3);
        for k in 0..3 {
            for i in 0..3 {
                let av: f64 = (0..3).map(|j| a[i * 3 + j] * vecs[j * 3 + k]).sum();
                assert!((av - vals[k] * vecs[i * 3 + k]).abs() < 1e-12);
            }
        }
        let trace: f64 = vals.iter().sum();
        assert!((trace - 8.0).abs() < 1e-12);
    }

    #[test]
    fn complex_eigenvalues_and_sqrt() {
        let [_, y, _] = paulis();
        let vals = hermitian_eigenvalues(&y);
        assert!((vals[0] + 1.0).abs() < 1e-12 && (vals[1] - 1.0).abs() < 1e-12);
        // (1 + σ_y)/2 is a projector, its own root
        let p = (&CMatrix::identity(2) + &y).scale(c(0.5));
        assert!(psd_sqrt(&p).unwrap().max_abs_diff(&p) < 1e-12);
        let m = CMatrix::from_data(2, vec![c(2.0), C64::new(0.0, -1.0), C64::new(0.0, 1.0), c(2.0)]).unwrap();
        let r = psd_sqrt(&m).unwrap();
        assert!((&r * &r).max_abs_diff(&m) < 1e-12);
        assert!(matches!(psd_sqrt(&y), Err(Error::NotPositiveSemidefinite { .. })));
    }

    #[test]
    fn density_matrix_validation() {
        assert!(DensityMatrix::maximally_mixed(3).is_ok());
        let bad_trace = CMatrix::identity(2);
        assert!(matches!(DensityMatrix::new(bad_trace), Err(Error::InvalidState(_))));
        let neg = CMatrix::from_real(2, &[1.5, 0.0, 0.0, -0.5]).unwrap();
        assert!(matches!(DensityMatrix::new(neg), Err(Error::NotPositiveSemidefinite { .. })));
        assert!(DensityMatrix::pure(&[c(1.0), c(1.0)]).is_err());
        assert!(DensityMatrix::maximally_mixed(65).is_err());
    }

    #[test]
    fn lueders_examples() {
        let p = CMatrix::outer(&basis(2, 0));
        let q = &CMatrix::identity(2) - &p;
        let inst = lueders_from_povm(&[p.clone(), q.clone()]).unwrap();
        assert!(inst.kraus()[0][0].max_abs_diff(&p) < 1e-12);
        assert!(inst.kraus()[1][0].max_abs_diff(&q) < 1e-12);

        let trivial = lueders_from_povm(&[CMatrix::identity(3)]).unwrap();
        assert!(trivial.kraus()[0][0].max_abs_diff(&CMatrix::identity(3)) < 1e-12);

        let half = CMatrix::identity(2).scale(c(0.5));
        let dep = lueders_from_povm(&[half.clone(), half]).unwrap();
        let expect = CMatrix::identity(2).scale(c(core::f64::consts::FRAC_1_SQRT_2));
        assert!(dep.kraus()[1][0].max_abs_diff(&expect) < 1e-12);

        assert!(matches!(lueders_from_povm(&[p.clone()]), Err(Error::Incomplete { .. })));
        let neg = CMatrix::from_real(2, &[1.5, 0.0, 0.0, -0.5]).unwrap();
        let rest = &CMatrix::identity(2) - &neg;
        assert!(matches!(
            lueders_from_povm(&[neg, rest]),
            Err(Error::NotPositiveSemidefinite { .. })
        ));
    }

    #[test]
    fn apply_projector() {
        let p = CMatrix::outer(&basis(2, 0));
        let q = &CMatrix::identity(2) - &p;
        let inst = projective_instrument(&[p, q]).unwrap();
        let rho = DensityMatrix::pure(&basis(2, 0)).unwrap();
        let out = apply_instrument(&inst, 0, &rho).unwrap();
        assert_eq!(out.probability, 1.0);
        assert_eq!(out.post_state.unwrap(), rho);
        let other = apply_instrument(&inst, 1, &rho).unwrap();
        assert_eq!(other.probability, 0.0);
        assert!(other.post_state.is_none());
        let big = DensityMatrix::maximally_mixed(3).unwrap();
        assert!(matches!(
            apply_instrument(&inst, 0, &big),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn kcbs_vectors_normalized_and_cyclic_orthogonal() {
        let v = kcbs_vectors();
        let dot = |a: &[f64; 3], b: &[f64; 3]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        for i in 0..5 {
            assert!((dot(&v[i], &v[i]) - 1.0).abs() < 1e-14);
            assert!(dot(&v[i], &v[(i + 1) % 5]).abs() < 1e-14);
        }
        let cos = libm::cos(core::f64::consts::PI / 5.0);
        assert!((v[0][2] * v[0][2] - cos / (1.0 + cos)).abs() < 1e-14);
    }

    #[test]
    fn kcbs_first_projector_probability() {
        let r = kcbs_realization();
        let out = apply_instrument(r.instrument("A0").unwrap(), 0, r.state()).unwrap();
        let cos = libm::cos(core::f64::consts::PI / 5.0);
        assert!((out.probability - cos / (1.0 + cos)).abs() < 1e-14);
    }

    #[test]
    fn kcbs_value_and_nd() {
        let r = kcbs_realization();
        let v = kcbs_value(&r).unwrap();
        assert!((v - (5.0 - 2.0 * libm::sqrt(5.0))).abs() < 1e-12);
        for i in 0..5 {
            let a = KCBS_LABELS[i];
            let b = KCBS_LABELS[(i + 1) % 5];
            assert!(check_quantum_nd(&r, a, b, 1e-12).unwrap().holds);
            assert!(check_quantum_nd(&r, b, a, 1e-12).unwrap().holds);
        }
        let far = check_quantum_nd(&r, "A0", "A2", 1e-9).unwrap();
        assert!(!far.holds);
        assert!(far.max_deviation > 1e-3);
        assert!(check_nd_quantum(&r, &kcbs_scenario(), 1e-12).unwrap().holds());
    }

    #[test]
    fn pm_algebra() {
        let obs = pm_observables();
        let id = CMatrix::identity(4);
        for o in &obs {
            assert!((o * o).max_abs_diff(&id) < 1e-15);
        }
        for (k, seq) in crate::scenario::examples::pm_sequences().iter().enumerate() {
            let ix: Vec<usize> = seq.iter().map(|l| l[1..].parse::<usize>().unwrap() - 1).collect();
            for i in 0..3 {
                for j in 0..3 {
                    assert!(obs[ix[i]].commutator(&obs[ix[j]]).max_abs() < 1e-14);
                }
            }
            let prod = &(&obs[ix[0]] * &obs[ix[1]]) * &obs[ix[2]];
            let sign = if k == 5 { -1.0 } else { 1.0 };
            assert!(prod.max_abs_diff(&id.scale(c(sign))) < 1e-14, "sequence {k}");
        }
    }

    #[test]
    fn pm_value_is_state_independent() {
        let r = pm_realization();
        assert!((pm_value(&r).unwrap() - 6.0).abs() < 1e-12);
        let mixed = r.with_state(DensityMatrix::maximally_mixed(4).unwrap()).unwrap();
        assert!((pm_value(&mixed).unwrap() - 6.0).abs() < 1e-12);
        assert!(check_nd_quantum(&r, &pm_scenario(), 1e-12).unwrap().holds());
    }

    #[test]
    fn exported_behaviours_are_compatible() {
        let s = Arc::new(kcbs_scenario());
        let e = kcbs_realization().behaviour(&s).unwrap();
        assert!(check_compatibility_of_marginals(&e, 1e-9).passes());
        let s = Arc::new(pm_scenario());
        let e = pm_realization().behaviour(&s).unwrap();
        assert!(check_compatibility_of_marginals(&e, 1e-9).passes());
    }

    #[test]
    fn commuting_joint_statistics() {
        // σ_z ⊗ 1 and 1 ⊗ σ_x on a generic pure state
        let r = pm_realization();
        let psi = [c(0.5), C64::new(0.1, 0.4), c(-0.3), C64::new(0.2, -0.1)];
        let norm = libm::sqrt(psi.iter().map(|z| z.norm_sqr()).sum::<f64>());
        let psi: Vec<C64> = psi.iter().map(|z| z / norm).collect();
        let r = r.with_state(DensityMatrix::pure(&psi).unwrap()).unwrap();
        let seq = Sequence::new(["A1", "A4"]);
        let d = sequential_distribution(&r, &seq).unwrap();
        let a = r.instrument("A1").unwrap();
        let b = r.instrument("A4").unwrap();
        for x in 0..2 {
            for y in 0..2 {
                let pq = &a.effect(x) * &b.effect(y);
                let p = pq.trace_product(r.state().matrix()).re;
                assert!((d.weights()[2 * x + y] - p).abs() < 1e-14);
            }
        }
        let missing = Sequence::new(["A1", "Z"]);
        assert_eq!(sequential_distribution(&r, &missing), Err(Error::MissingInstrument("Z".into())));
    }

    #[test]
    fn formulas_pointwise() {
        let r = kcbs_realization();
        let inst = r.instrument("A0").unwrap();
        let nu = real_vector(&kcbs_vectors()[0]);
        let (xi, gamma) = hvm_formulas(inst, 0, &nu, &nu).unwrap();
        assert!((xi - 1.0).abs() < 1e-14 && (gamma - 1.0).abs() < 1e-14);
        let psi = basis(3, 2);
        let direct = apply_instrument(inst, 1, r.state()).unwrap();
        let mut total = 0.0;
        for k in 0..3 {
            let (xi, gamma) = hvm_formulas(inst, 1, &psi, &basis(3, k)).unwrap();
            assert!((xi - direct.probability).abs() < 1e-14);
            total += gamma;
        }
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(hvm_formulas(inst, 0, &real_vector(&kcbs_vectors()[1]), &psi), Err(Error::ZeroProbability));
    }

    #[test]
    fn spanning_set_size() {
        assert_eq!(tomographic_states(4).len(), 16);
    }
}
