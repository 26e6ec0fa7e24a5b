//! Dense two-phase primal simplex with Bland's anti-cycling rule.
//!
//! Solves `maximize c·x subject to A x ≤ b, x ≥ 0`. The programs built by
//! [`crate::polytope`] are small (tens of rows, hundreds of columns) and highly
//! degenerate, so the solver favours a plain tableau with a terminating pivot
//! rule over speed. Every optimal answer carries a dual vector and is checked
//! against primal feasibility, dual feasibility and the duality gap before it
//! is reported; a failed check is reported as [`LpStatus::NumericalFailure`].

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// `maximize objective·x subject to rows·x ≤ bounds, x ≥ 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgram {
    objective: Vec<f64>,
    rows: Vec<Vec<f64>>,
    bounds: Vec<f64>,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>, rows: Vec<Vec<f64>>, bounds: Vec<f64>) -> Result<Self> {
        if rows.len() != bounds.len() {
            return Err(Error::ShapeMismatch {
                what: "constraint bounds",
                expected: rows.len(),
                found: bounds.len(),
            });
        }
        for r in &rows {
            if r.len() != objective.len() {
                return Err(Error::ShapeMismatch {
                    what: "constraint row length",
                    expected: objective.len(),
                    found: r.len(),
                });
            }
        }
        let finite = objective
            .iter()
            .chain(bounds.iter())
            .chain(rows.iter().flatten())
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("non-finite LP coefficient".into()));
        }
        Ok(LinearProgram {
            objective,
            rows,
            bounds,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.rows.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn bounds(&self) -> &[f64] {
        &self.bounds
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Unbounded,
    Infeasible,
    /// Iteration limit hit or the optimality certificate failed its checks.
    NumericalFailure,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal point (the last basic solution when not optimal).
    pub x: Vec<f64>,
    pub objective: f64,
    /// Dual multipliers, one per constraint. At an optimum `y ≥ 0`,
    /// `Aᵀy ≥ c` and `b·y = c·x`. For an infeasible program these are the
    /// phase-one multipliers.
    pub dual: Vec<f64>,
    pub iterations: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// Tolerances and limits of the simplex.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// Smallest magnitude accepted as a pivot element.
    pub pivot_tol: f64,
    /// Reduced-cost threshold for optimality.
    pub cost_tol: f64,
    /// Primal feasibility tolerance of the certificate.
    pub feasibility_tol: f64,
    /// Dual feasibility and complementary slackness tolerance.
    pub dual_tol: f64,
    /// Bound on `|b·y − c·x|` at an optimum.
    pub gap_tol: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            pivot_tol: 1e-10,
            cost_tol: 1e-11,
            feasibility_tol: 1e-9,
            dual_tol: 1e-8,
            gap_tol: 1e-8,
            max_iterations: 200_000,
        }
    }
}

pub fn solve(p: &LinearProgram) -> LpSolution {
    solve_with(p, &SolverOptions::default())
}

struct Tableau {
    m: usize,
    /// Columns excluding the right-hand side.
    cols: usize,
    first_artificial: usize,
    /// `(m + 1) × (cols + 1)`; row `m` is the objective row `z_j − c_j`.
    t: Vec<f64>,
    basis: Vec<usize>,
    iterations: usize,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
    IterationLimit,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.t[r * (self.cols + 1) + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.cols)
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.cols + 1;
        let inv = 1.0 / self.t[pr * w + pc];
        for c in 0..w {
            self.t[pr * w + c] *= inv;
        }
        self.t[pr * w + pc] = 1.0;
        for r in 0..=self.m {
            if r == pr {
                continue;
            }
            let f = self.t[r * w + pc];
            if f == 0.0 {
                continue;
            }
            for c in 0..w {
                let v = self.t[pr * w + c];
                if v != 0.0 {
                    self.t[r * w + c] -= f * v;
                }
            }
            self.t[r * w + pc] = 0.0;
        }
        self.basis[pr] = pc;
        self.iterations += 1;
    }

    /// Sets the objective row for cost vector `cost` (length `cols`).
    fn price(&mut self, cost: &[f64]) {
        let w = self.cols + 1;
        for c in 0..w {
            let mut z = 0.0;
            for r in 0..self.m {
                z += cost[self.basis[r]] * self.t[r * w + c];
            }
            self.t[self.m * w + c] = if c < self.cols { z - cost[c] } else { z };
        }
    }

    fn run(&mut self, allow_artificial: bool, opts: &SolverOptions) -> PhaseEnd {
        let limit = self.cols.min(if allow_artificial { self.cols } else { self.first_artificial });
        loop {
            if self.iterations >= opts.max_iterations {
                return PhaseEnd::IterationLimit;
            }
            // Bland: lowest-index improving column
            let entering = (0..limit).find(|&c| self.at(self.m, c) < -opts.cost_tol);
            let Some(pc) = entering else {
                return PhaseEnd::Optimal;
            };
            let mut best: Option<(usize, f64)> = None;
            for r in 0..self.m {
                let a = self.at(r, pc);
                if a > opts.pivot_tol {
                    let ratio = self.rhs(r).max(0.0) / a;
                    best = match best {
                        None => Some((r, ratio)),
                        Some((br, bratio)) => {
                            if ratio < bratio - 1e-12
                                || (ratio <= bratio + 1e-12 && self.basis[r] < self.basis[br])
                            {
                                Some((r, ratio))
                            } else {
                                Some((br, bratio))
                            }
                        }
                    };
                }
            }
            match best {
                None => return PhaseEnd::Unbounded,
                Some((pr, _)) => self.pivot(pr, pc),
            }
        }
    }
}

pub fn solve_with(p: &LinearProgram, opts: &SolverOptions) -> LpSolution {
    let m = p.num_constraints();
    let n = p.num_vars();
    let flipped: Vec<bool> = p.bounds.iter().map(|&b| b < 0.0).collect();
    let n_art = flipped.iter().filter(|&&f| f).count();
    let cols = n + m + n_art;
    let w = cols + 1;
    let mut t = vec![0.0; (m + 1) * w];
    let mut basis = vec![0; m];
    let mut art = n + m;
    for i in 0..m {
        let sign = if flipped[i] { -1.0 } else { 1.0 };
        for j in 0..n {
            t[i * w + j] = sign * p.rows[i][j];
        }
        t[i * w + n + i] = sign;
        t[i * w + cols] = sign * p.bounds[i];
        if flipped[i] {
            t[i * w + art] = 1.0;
            basis[i] = art;
            art += 1;
        } else {
            basis[i] = n + i;
        }
    }
    let mut tab = Tableau {
        m,
        cols,
        first_artificial: n + m,
        t,
        basis,
        iterations: 0,
    };

    let failure = |tab: &Tableau, status| {
        let x = primal_from(tab, n);
        let objective = dot(&p.objective, &x);
        LpSolution {
            status,
            x,
            objective,
            dual: slack_prices(tab, n, m),
            iterations: tab.iterations,
        }
    };

    if n_art > 0 {
        let mut cost = vec![0.0; cols];
        for c in cost.iter_mut().skip(n + m) {
            *c = -1.0;
        }
        tab.price(&cost);
        match tab.run(true, opts) {
            PhaseEnd::Optimal => {}
            // phase one is bounded above by zero
            PhaseEnd::Unbounded | PhaseEnd::IterationLimit => {
                return failure(&tab, LpStatus::NumericalFailure)
            }
        }
        if tab.rhs(m) < -opts.feasibility_tol {
            return failure(&tab, LpStatus::Infeasible);
        }
        // drive degenerate artificials out of the basis where possible
        for r in 0..m {
            if tab.basis[r] >= n + m {
                if let Some(c) = (0..n + m).find(|&c| tab.at(r, c).abs() > opts.pivot_tol) {
                    tab.pivot(r, c);
                }
            }
        }
    }

    let mut cost = vec![0.0; cols];
    cost[..n].copy_from_slice(&p.objective);
    tab.price(&cost);
    match tab.run(false, opts) {
        PhaseEnd::Optimal => {}
        PhaseEnd::Unbounded => return failure(&tab, LpStatus::Unbounded),
        PhaseEnd::IterationLimit => return failure(&tab, LpStatus::NumericalFailure),
    }

    let (x, dual) = match refine(p, &tab) {
        Some(v) => v,
        None => (primal_from(&tab, n), slack_prices(&tab, n, m)),
    };
    let x: Vec<f64> = x
        .into_iter()
        .map(|v| if v < 0.0 && v >= -opts.feasibility_tol { 0.0 } else { v })
        .collect();
    let dual: Vec<f64> = dual
        .into_iter()
        .map(|v| if v < 0.0 && v >= -opts.dual_tol { 0.0 } else { v })
        .collect();
    let objective = dot(&p.objective, &x);
    let sol = LpSolution {
        status: LpStatus::Optimal,
        x,
        objective,
        dual,
        iterations: tab.iterations,
    };
    let cert = certificate(p, &sol);
    if cert.primal_infeasibility > opts.feasibility_tol
        || cert.dual_infeasibility > opts.dual_tol
        || cert.duality_gap > opts.gap_tol
        || cert.complementary_slackness > opts.dual_tol
    {
        return LpSolution {
            status: LpStatus::NumericalFailure,
            ..sol
        };
    }
    sol
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn primal_from(tab: &Tableau, n: usize) -> Vec<f64> {
    let mut x = vec![0.0; n];
    for r in 0..tab.m {
        if tab.basis[r] < n {
            x[tab.basis[r]] = tab.rhs(r);
        }
    }
    x
}

fn slack_prices(tab: &Tableau, n: usize, m: usize) -> Vec<f64> {
    (0..m).map(|i| tab.at(tab.m, n + i)).collect()
}

/// Recomputes the basic solution and the duals from the original data, which
/// removes the round-off accumulated by the tableau updates.
fn refine(p: &LinearProgram, tab: &Tableau) -> Option<(Vec<f64>, Vec<f64>)> {
    let m = tab.m;
    let n = p.num_vars();
    if tab.basis.iter().any(|&b| b >= n + m) {
        return None;
    }
    let column = |j: usize, i: usize| -> f64 {
        if j < n {
            p.rows[i][j]
        } else if j - n == i {
            1.0
        } else {
            0.0
        }
    };
    // B[i][k] = column basis[k], row i
    let mut b = vec![0.0; m * m];
    for k in 0..m {
        for i in 0..m {
            b[i * m + k] = column(tab.basis[k], i);
        }
    }
    let xb = dense_solve(&b, m, &p.bounds)?;
    let mut bt = vec![0.0; m * m];
    for i in 0..m {
        for k in 0..m {
            bt[k * m + i] = b[i * m + k];
        }
    }
    let cb: Vec<f64> = tab
        .basis
        .iter()
        .map(|&j| if j < n { p.objective[j] } else { 0.0 })
        .collect();
    let y = dense_solve(&bt, m, &cb)?;
    let mut x = vec![0.0; n];
    for (k, &j) in tab.basis.iter().enumerate() {
        if j < n {
            x[j] = xb[k];
        }
    }
    Some((x, y))
}

/// Gaussian elimination with partial pivoting on a row-major `m × m` matrix.
fn dense_solve(a: &[f64], m: usize, rhs: &[f64]) -> Option<Vec<f64>> {
    let mut a = a.to_vec();
    let mut x = rhs.to_vec();
    for col in 0..m {
        let piv = (col..m).max_by(|&i, &j| {
            a[i * m + col]
                .abs()
                .partial_cmp(&a[j * m + col].abs())
                .unwrap_or(core::cmp::Ordering::Equal)
        })?;
        if a[piv * m + col].abs() < 1e-13 {
            return None;
        }
        if piv != col {
            for c in 0..m {
                a.swap(piv * m + c, col * m + c);
            }
            x.swap(piv, col);
        }
        let d = a[col * m + col];
        for r in (col + 1)..m {
            let f = a[r * m + col] / d;
            if f == 0.0 {
                continue;
            }
            for c in col..m {
                a[r * m + c] -= f * a[col * m + c];
            }
            x[r] -= f * x[col];
        }
    }
    for col in (0..m).rev() {
        let mut s = x[col];
        for c in (col + 1)..m {
            s -= a[col * m + c] * x[c];
        }
        x[col] = s / a[col * m + col];
    }
    Some(x)
}

/// Residuals of an optimality certificate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Certificate {
    /// `max(max_i (A x − b)_i, max_j −x_j, 0)`.
    pub primal_infeasibility: f64,
    /// `max(max_i −y_i, max_j (c − Aᵀy)_j, 0)`.
    pub dual_infeasibility: f64,
    /// `|b·y − c·x|`.
    pub duality_gap: f64,
    /// `max(max_i |y_i (b − A x)_i|, max_j |x_j (Aᵀy − c)_j|)`.
    pub complementary_slackness: f64,
}

pub fn certificate(p: &LinearProgram, sol: &LpSolution) -> Certificate {
    let mut primal = 0.0f64;
    let mut cs = 0.0f64;
    for (i, row) in p.rows.iter().enumerate() {
        let slack = p.bounds[i] - dot(row, &sol.x);
        primal = primal.max(-slack);
        cs = cs.max((sol.dual[i] * slack).abs());
    }
    for &v in &sol.x {
        primal = primal.max(-v);
    }
    let mut dual = 0.0f64;
    for &y in &sol.dual {
        dual = dual.max(-y);
    }
    for j in 0..p.num_vars() {
        let aty: f64 = p.rows.iter().zip(&sol.dual).map(|(r, y)| r[j] * y).sum();
        let reduced = aty - p.objective[j];
        dual = dual.max(-reduced);
        cs = cs.max((sol.x[j] * reduced).abs());
    }
    Certificate {
        primal_infeasibility: primal,
        dual_infeasibility: dual,
        duality_gap: (dot(&p.bounds, &sol.dual) - dot(&p.objective, &sol.x)).abs(),
        complementary_slackness: cs,
    }
}
