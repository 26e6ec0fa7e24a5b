//! The non-contextual polytope and the contextual fraction.
//!
//! Non-contextual behaviours are exactly the convex mixtures of the
//! deterministic models of global assignments. The incidence matrix has one
//! column per global assignment holding that deterministic model; the
//! non-contextual fraction is the largest total weight `1ᵀb` of a
//! sub-normalized mixture `M b ≤ e`, `b ≥ 0`, dominated by the behaviour.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::empirical::{context_space, Distribution, EmpiricalBehaviour, MeasurementBehaviour};
use crate::error::{Error, Result};
use crate::lp::{self, LinearProgram, LpStatus, SolverOptions};
use crate::scenario::{OutcomeSpace, SequentialScenario, DEFAULT_ASSIGNMENT_CAP};

/// Dense 0/1 matrix: rows are `(sequence, joint outcome)` pairs in table
/// order, columns are global assignments in enumeration order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IncidenceMatrix {
    rows: Vec<(usize, usize)>,
    cols: usize,
    data: Vec<u8>,
}

impl IncidenceMatrix {
    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_cols(&self) -> usize {
        self.cols
    }

    /// `(sequence, linear outcome index)` of a row.
    pub fn row_key(&self, r: usize) -> (usize, usize) {
        self.rows[r]
    }

    pub fn get(&self, r: usize, c: usize) -> u8 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[u8] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `M w`, one value per row.
    pub fn apply(&self, w: &[f64]) -> Vec<f64> {
        (0..self.rows.len())
            .map(|r| {
                self.row(r)
                    .iter()
                    .zip(w)
                    .filter(|(&m, _)| m != 0)
                    .map(|(_, &x)| x)
                    .sum()
            })
            .collect()
    }
}

fn incidence_from(
    spaces: &[OutcomeSpace],
    label_maps: &[Vec<usize>],
    assignment_space: &OutcomeSpace,
    cap: u64,
) -> Result<IncidenceMatrix> {
    let cols = assignment_space.size();
    if cols as u64 > cap {
        return Err(Error::AssignmentCapExceeded {
            count: cols as u128,
            cap,
        });
    }
    let mut offsets = Vec::with_capacity(spaces.len());
    let mut rows = Vec::new();
    for (si, sp) in spaces.iter().enumerate() {
        offsets.push(rows.len());
        rows.extend((0..sp.size()).map(|k| (si, k)));
    }
    let mut data = vec![0u8; rows.len() * cols];
    let mut g = vec![0usize; assignment_space.radices().len()];
    let mut tuple = Vec::new();
    for c in 0..cols {
        assignment_space.decode_into(c, &mut g);
        for (si, sp) in spaces.iter().enumerate() {
            tuple.clear();
            tuple.extend(label_maps[si].iter().map(|&l| g[l]));
            let k = sp.index_of(&tuple).expect("assignment fits the outcome space");
            data[(offsets[si] + k) * cols + c] = 1;
        }
    }
    Ok(IncidenceMatrix { rows, cols, data })
}

fn assignment_count_checked(radices: &[usize], cap: u64) -> Result<()> {
    let count = radices
        .iter()
        .fold(1u128, |acc, &r| acc.saturating_mul(r as u128));
    if count > cap as u128 {
        return Err(Error::AssignmentCapExceeded { count, cap });
    }
    Ok(())
}

/// Builds the incidence matrix of a sequential scenario.
///
/// The deterministic model of an assignment puts mass on the one consistent
/// outcome of each sequence that agrees with it, so rows of inconsistent
/// outcomes are identically zero.
pub fn build_incidence(s: &SequentialScenario, cap: u64) -> Result<IncidenceMatrix> {
    let asp = s.assignment_space();
    assignment_count_checked(asp.radices(), cap)?;
    let n = s.sequences().len();
    let spaces = (0..n).map(|i| s.outcome_space(i)).collect::<Result<Vec<_>>>()?;
    let maps = (0..n).map(|i| s.resolve(i)).collect::<Result<Vec<_>>>()?;
    incidence_from(&spaces, &maps, &asp, cap)
}

/// Options for [`contextual_fraction_with`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CfOptions {
    pub assignment_cap: u64,
    /// Entries of the behaviour in `[-negative_clamp, 0)` are treated as zero.
    pub negative_clamp: f64,
    pub solver: SolverOptions,
}

impl Default for CfOptions {
    fn default() -> Self {
        CfOptions {
            assignment_cap: DEFAULT_ASSIGNMENT_CAP,
            negative_clamp: 1e-9,
            solver: SolverOptions::default(),
        }
    }
}

/// Outcome of the non-contextual fraction program.
#[derive(Clone, Debug, PartialEq)]
pub struct CfResult {
    /// Non-contextual fraction, clamped to `[0, 1]`.
    pub ncf: f64,
    /// `1 − ncf`.
    pub cf: f64,
    /// Sub-normalized weights on global assignments (enumeration order).
    pub weights: Vec<f64>,
    /// `(e − M b) / (1 − ncf)`; `None` when `ncf = 1`.
    pub residual: Option<EmpiricalBehaviour>,
    /// Dual multipliers of the program, one per incidence row.
    pub dual: Vec<f64>,
    pub status: LpStatus,
}

pub fn contextual_fraction(e: &EmpiricalBehaviour) -> Result<CfResult> {
    contextual_fraction_with(e, &CfOptions::default())
}

fn flatten(tables: &[Distribution], clamp: f64) -> Vec<f64> {
    tables
        .iter()
        .flat_map(|t| t.weights().iter())
        .map(|&v| if v < 0.0 && v >= -clamp { 0.0 } else { v })
        .collect()
}

fn solve_ncf(m: &IncidenceMatrix, bound: Vec<f64>, opts: &SolverOptions) -> Result<lp::LpSolution> {
    let rows: Vec<Vec<f64>> = (0..m.num_rows())
        .map(|r| m.row(r).iter().map(|&v| v as f64).collect())
        .collect();
    let p = LinearProgram::new(vec![1.0; m.num_cols()], rows, bound)?;
    Ok(lp::solve_with(&p, opts))
}

pub fn contextual_fraction_with(e: &EmpiricalBehaviour, opts: &CfOptions) -> Result<CfResult> {
    let s = e.scenario();
    let m = build_incidence(s, opts.assignment_cap)?;
    let bound = flatten(e.tables(), opts.negative_clamp);
    let sol = solve_ncf(&m, bound.clone(), &opts.solver)?;
    let ncf = sol.objective.clamp(0.0, 1.0);
    let residual = if sol.status == LpStatus::Optimal && ncf < 1.0 - 1e-12 {
        let covered = m.apply(&sol.x);
        let scale = 1.0 / (1.0 - ncf);
        Some(unflatten(
            s,
            bound.iter().zip(&covered).map(|(b, c)| ((b - c) * scale).max(0.0)),
        )?)
    } else {
        None
    };
    Ok(CfResult {
        ncf,
        cf: 1.0 - ncf,
        weights: sol.x,
        residual,
        dual: sol.dual,
        status: sol.status,
    })
}

fn unflatten(
    s: &Arc<SequentialScenario>,
    values: impl Iterator<Item = f64>,
) -> Result<EmpiricalBehaviour> {
    let flat: Vec<f64> = values.collect();
    let mut tables = Vec::with_capacity(s.sequences().len());
    let mut at = 0;
    for i in 0..s.sequences().len() {
        let n = s.outcome_space(i)?.size();
        tables.push(Distribution::new(flat[at..at + n].to_vec()));
        at += n;
    }
    EmpiricalBehaviour::new(s.clone(), tables)
}

/// True when the contextual fraction is at most `tol`.
pub fn is_noncontextual(e: &EmpiricalBehaviour, tol: f64) -> Result<bool> {
    let r = contextual_fraction(e)?;
    if r.status != LpStatus::Optimal {
        return Err(Error::InvalidParameter(alloc::format!(
            "linear program ended with status {:?}",
            r.status
        )));
    }
    Ok(r.cf <= tol)
}

/// `e = λ e_nc + (1 − λ) e_residual` with `λ` the non-contextual fraction.
#[derive(Clone, Debug, PartialEq)]
pub struct NcDecomposition {
    pub lambda: f64,
    /// Normalized non-contextual part; `None` when `λ = 0`.
    pub noncontextual: Option<EmpiricalBehaviour>,
    /// Contextual remainder; `None` when `λ = 1`.
    pub residual: Option<EmpiricalBehaviour>,
    pub weights: Vec<f64>,
}

impl NcDecomposition {
    /// Largest entrywise gap between `e` and the recombined parts.
    pub fn reconstruction_error(&self, e: &EmpiricalBehaviour) -> f64 {
        let mut worst = 0.0f64;
        for (si, t) in e.tables().iter().enumerate() {
            for (k, &v) in t.weights().iter().enumerate() {
                let mut r = 0.0;
                if let Some(nc) = &self.noncontextual {
                    r += self.lambda * nc.table(si).weights()[k];
                }
                if let Some(res) = &self.residual {
                    r += (1.0 - self.lambda) * res.table(si).weights()[k];
                }
                worst = worst.max((r - v).abs());
            }
        }
        worst
    }
}

pub fn nc_decomposition(e: &EmpiricalBehaviour) -> Result<NcDecomposition> {
    let r = contextual_fraction(e)?;
    if r.status != LpStatus::Optimal {
        return Err(Error::InvalidParameter(alloc::format!(
            "linear program ended with status {:?}",
            r.status
        )));
    }
    let s = e.scenario();
    let noncontextual = if r.ncf > 1e-12 {
        let m = build_incidence(s, DEFAULT_ASSIGNMENT_CAP)?;
        let normalized: Vec<f64> = r.weights.iter().map(|w| w / r.ncf).collect();
        Some(unflatten(s, m.apply(&normalized).into_iter())?)
    } else {
        None
    };
    Ok(NcDecomposition {
        lambda: r.ncf,
        noncontextual,
        residual: r.residual,
        weights: r.weights,
    })
}

/// Non-contextual fraction of an empirical model on a measurement scenario:
/// rows are `(context, outcome)` pairs and an assignment covers the outcome
/// equal to its restriction to the context.
pub fn measurement_noncontextual_fraction(e: &MeasurementBehaviour) -> Result<CfResult> {
    let m = e.scenario();
    let radices: Vec<usize> = m.instruments().iter().map(|i| i.outcome_count()).collect();
    assignment_count_checked(&radices, DEFAULT_ASSIGNMENT_CAP)?;
    let n = m.contexts().len();
    let spaces = (0..n).map(|i| context_space(m, i)).collect::<Result<Vec<_>>>()?;
    let maps = m
        .contexts()
        .iter()
        .map(|c| {
            c.iter()
                .map(|l| {
                    m.label_index(l.as_str())
                        .ok_or_else(|| Error::UnknownLabel(l.as_str().into()))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let inc = incidence_from(&spaces, &maps, &OutcomeSpace::new(radices), DEFAULT_ASSIGNMENT_CAP)?;
    let opts = CfOptions::default();
    let sol = solve_ncf(&inc, flatten(e.tables(), opts.negative_clamp), &opts.solver)?;
    let ncf = sol.objective.clamp(0.0, 1.0);
    Ok(CfResult {
        ncf,
        cf: 1.0 - ncf,
        weights: sol.x,
        residual: None,
        dual: sol.dual,
        status: sol.status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::empirical::{deterministic_model, mix};
    use crate::scenario::examples::*;
    use crate::scenario::{enumerate_global_assignments, GlobalAssignment};

    #[test]
    fn kcbs_incidence_shape() {
        let m = build_incidence(&kcbs_scenario(), DEFAULT_ASSIGNMENT_CAP).unwrap();
        assert_eq!((m.num_rows(), m.num_cols()), (20, 32));
        for c in 0..32 {
            for si in 0..5 {
                let col_sum: u32 = (0..20)
                    .filter(|&r| m.row_key(r).0 == si)
                    .map(|r| m.get(r, c) as u32)
                    .sum();
                assert_eq!(col_sum, 1);
            }
        }
    }

    #[test]
    fn extended_kcbs_inconsistent_rows_are_zero() {
        let s = extended_kcbs_scenario();
        let m = build_incidence(&s, DEFAULT_ASSIGNMENT_CAP).unwrap();
        assert_eq!(m.num_rows(), 8 + 16);
        let sp = s.outcome_space(0).unwrap();
        for r in 0..8 {
            let o = sp.decode(m.row_key(r).1);
            let total: u32 = m.row(r).iter().map(|&v| v as u32).sum();
            if o[0] != o[2] {
                assert_eq!(total, 0);
            } else {
                assert!(total > 0);
            }
        }
    }

    #[test]
    fn single_instrument_incidence_is_identity() {
        let s = SequentialScenario::new(
            alloc::vec![crate::scenario::Instrument::with_outcome_count("A", 3)],
            alloc::vec![crate::scenario::Sequence::new(["A"])],
        )
        .unwrap();
        let m = build_incidence(&s, 10).unwrap();
        for r in 0..3 {
            for c in 0..3 {
                assert_eq!(m.get(r, c), (r == c) as u8);
            }
        }
        assert!(build_incidence(&s, 2).is_err());
    }

    #[test]
    fn deterministic_vertices_have_zero_cf() {
        let s = Arc::new(kcbs_scenario());
        for g in enumerate_global_assignments(&s, DEFAULT_ASSIGNMENT_CAP).unwrap().step_by(5) {
            let e = deterministic_model(&s, &g).unwrap();
            let r = contextual_fraction(&e).unwrap();
            assert_eq!(r.status, LpStatus::Optimal);
            assert!(r.cf.abs() < 1e-12, "cf = {}", r.cf);
            assert!(r.residual.is_none());
            assert!(is_noncontextual(&e, 1e-9).unwrap());
        }
    }

    #[test]
    fn mixture_of_two_vertices() {
        let s = Arc::new(kcbs_scenario());
        let a = deterministic_model(&s, &GlobalAssignment::new(alloc::vec![0, 1, 0, 1, 1])).unwrap();
        let b = deterministic_model(&s, &GlobalAssignment::new(alloc::vec![1, 0, 0, 1, 0])).unwrap();
        let e = mix(&[(0.3, &a), (0.7, &b)]).unwrap();
        let d = nc_decomposition(&e).unwrap();
        assert!((d.lambda - 1.0).abs() < 1e-12);
        assert!(d.residual.is_none());
        assert!(d.reconstruction_error(&e) < 1e-9);
    }

    #[test]
    fn inconsistent_mass_is_contextual() {
        let s = Arc::new(extended_kcbs_scenario());
        let mut e = deterministic_model(&s, &GlobalAssignment::new(alloc::vec![0; 5])).unwrap();
        // move 0.1 of the first table onto the inconsistent outcome (0, 0, 1)
        let mut tables = e.clone().into_tables();
        let mut w = tables[0].weights().to_vec();
        w[0] = 0.9;
        w[1] = 0.1;
        tables[0] = Distribution::new(w);
        e = EmpiricalBehaviour::new(s, tables).unwrap();
        let r = contextual_fraction(&e).unwrap();
        assert!((r.cf - 0.1).abs() < 1e-9);
        assert!(!is_noncontextual(&e, 1e-6).unwrap());
    }

    #[test]
    fn pr_box_like_kcbs_is_fully_contextual() {
        // perfectly anti-correlated pairs around an odd cycle admit no vertex
        let s = Arc::new(kcbs_scenario());
        let tables = (0..5).map(|_| Distribution::new(alloc::vec![0.0, 0.5, 0.5, 0.0])).collect();
        let e = EmpiricalBehaviour::new(s, tables).unwrap();
        let d = nc_decomposition(&e).unwrap();
        assert!(d.lambda.abs() < 1e-12);
        assert!(d.noncontextual.is_none());
        assert!(d.reconstruction_error(&e) < 1e-9);
    }
}
