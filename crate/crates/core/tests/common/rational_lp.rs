//! Exact simplex over arbitrary-precision rationals, used as a reference for
//! the floating-point solver.

#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use seqctx_core::EmpiricalBehaviour;

pub fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite input")
}

pub fn to_f64(x: &BigRational) -> f64 {
    // numerator and denominator can exceed f64 range separately
    let scale = 60u32;
    let shifted = (x * BigRational::from_integer(BigInt::one() << scale)).floor();
    let n: f64 = shifted.to_integer().to_string().parse().unwrap();
    n / 2f64.powi(scale as i32)
}

#[derive(Debug)]
pub struct RationalSolution {
    pub objective: BigRational,
    pub x: Vec<BigRational>,
}

/// Maximizes `c·x` subject to `A x ≤ b`, `x ≥ 0`, with `b ≥ 0` so that the
/// slack basis is feasible. Bland's rule. `None` when unbounded.
pub fn maximize(c: &[BigRational], a: &[Vec<BigRational>], b: &[BigRational]) -> Option<RationalSolution> {
    let m = a.len();
    let n = c.len();
    assert!(b.iter().all(|v| !v.is_negative()), "needs b >= 0");
    let width = n + m + 1;
    let mut t: Vec<Vec<BigRational>> = Vec::with_capacity(m + 1);
    for i in 0..m {
        let mut row = vec![BigRational::zero(); width];
        row[..n].clone_from_slice(&a[i]);
        row[n + i] = BigRational::one();
        row[width - 1] = b[i].clone();
        t.push(row);
    }
    let mut z = vec![BigRational::zero(); width];
    for j in 0..n {
        z[j] = -c[j].clone();
    }
    t.push(z);
    let mut basis: Vec<usize> = (n..n + m).collect();
    loop {
        let Some(enter) = (0..n + m).find(|&j| t[m][j].is_negative()) else {
            break;
        };
        let mut leave: Option<(usize, BigRational)> = None;
        for i in 0..m {
            if !t[i][enter].is_positive() {
                continue;
            }
            let ratio = &t[i][width - 1] / &t[i][enter];
            let better = match &leave {
                None => true,
                Some((li, best)) => ratio < *best || (ratio == *best && basis[i] < basis[*li]),
            };
            if better {
                leave = Some((i, ratio));
            }
        }
        let (r, _) = leave?;
        let piv = t[r][enter].clone();
        for v in t[r].iter_mut() {
            *v = &*v / &piv;
        }
        let pivot_row = t[r].clone();
        for (i, row) in t.iter_mut().enumerate() {
            if i == r || row[enter].is_zero() {
                continue;
            }
            let f = row[enter].clone();
            for (v, p) in row.iter_mut().zip(&pivot_row) {
                if !p.is_zero() {
                    *v -= &f * p;
                }
            }
        }
        basis[r] = enter;
    }
    let mut x = vec![BigRational::zero(); n];
    for (i, &bv) in basis.iter().enumerate() {
        if bv < n {
            x[bv] = t[i][width - 1].clone();
        }
    }
    Some(RationalSolution {
        objective: t[m][width - 1].clone(),
        x,
    })
}

/// Non-contextual fraction of `e`, with the incidence built straight from the
/// definition: assignment `g` contributes to outcome `o` of a sequence iff
/// every position carries `g`'s value for its label.
pub fn ncf(e: &EmpiricalBehaviour) -> BigRational {
    let s = e.scenario();
    let asp = s.assignment_space();
    let cols = asp.size();
    let mut rows = Vec::new();
    let mut bounds = Vec::new();
    for si in 0..s.sequences().len() {
        let labels = s.resolve(si).unwrap();
        let sp = s.outcome_space(si).unwrap();
        for (k, o) in sp.iter().enumerate() {
            let row: Vec<BigRational> = (0..cols)
                .map(|c| {
                    let g = asp.decode(c);
                    let hit = labels.iter().zip(&o).all(|(&l, &v)| g[l] == v);
                    if hit { BigRational::one() } else { BigRational::zero() }
                })
                .collect();
            rows.push(row);
            bounds.push(rational(e.table(si).weights()[k].max(0.0)));
        }
    }
    let c = vec![BigRational::one(); cols];
    maximize(&c, &rows, &bounds).expect("bounded").objective
}
