//! Dense strictly convex quadratic programming.
//!
//! Problems have the form
//!
//! ```text
//!     minimize    1/2 z' H z + f' z
//!     subject to  A z <= b
//! ```
//!
//! where some rows of `A z <= b` may be marked soft. A soft row `i` gets its
//! own slack `s_i` (`a_i z <= b_i + s_i`) that is penalized by `rho_i / 2 * s_i^2`.
//! The solver is a dual active-set method in the style of Goldfarb and Idnani:
//! it starts from the unconstrained minimizer and adds violated constraints
//! one at a time, keeping the factors of the active set up to date with Givens
//! rotations. Infeasibility of the hard rows is detected exactly.

mod dual;
mod kkt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub use kkt::{kkt_residual, kkt_residual_with_multipliers};

/// Default quadratic penalty on soft-row slacks.
pub const DEFAULT_SOFT_PENALTY: f64 = 1e6;

/// Residual below which a solution is reported optimal.
pub const OPTIMALITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub h: DMatrix<f64>,
    pub f: DVector<f64>,
    /// Inequality rows, `m x n`.
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    /// `Some(rho)` marks row `i` soft with slack penalty `rho`.
    pub soft: Vec<Option<f64>>,
}

impl QpProblem {
    /// Problem with all rows hard.
    pub fn new(h: DMatrix<f64>, f: DVector<f64>, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        let m = a.nrows();
        Self {
            h,
            f,
            a,
            b,
            soft: vec![None; m],
        }
    }

    pub fn unconstrained(h: DMatrix<f64>, f: DVector<f64>) -> Self {
        let n = f.len();
        Self::new(h, f, DMatrix::zeros(0, n), DVector::zeros(0))
    }

    pub fn num_vars(&self) -> usize {
        self.f.len()
    }

    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    pub fn has_soft_rows(&self) -> bool {
        self.soft.iter().any(Option::is_some)
    }

    /// Marks every row soft with the given penalty.
    pub fn soften_all(&mut self, rho: f64) {
        self.soft.iter_mut().for_each(|s| *s = Some(rho));
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.f.len();
        let m = self.b.len();
        if self.h.nrows() != n || self.h.ncols() != n {
            return Err(Error::Structural(format!(
                "Hessian is {}x{}, expected {n}x{n}",
                self.h.nrows(),
                self.h.ncols()
            )));
        }
        if self.a.ncols() != n || self.a.nrows() != m || self.soft.len() != m {
            return Err(Error::Structural(format!(
                "constraint block is {}x{} with {} bounds and {} soft flags, expected {m}x{n}",
                self.a.nrows(),
                self.a.ncols(),
                m,
                self.soft.len()
            )));
        }
        let scale = 1.0 + self.h.amax();
        for i in 0..n {
            for j in 0..i {
                if (self.h[(i, j)] - self.h[(j, i)]).abs() > 1e-10 * scale {
                    return Err(Error::Structural(format!(
                        "Hessian not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        if let Some(bad) = self.soft.iter().flatten().find(|rho| !(**rho > 0.0)) {
            return Err(Error::Structural(format!(
                "soft penalty must be positive, got {bad}"
            )));
        }
        Ok(())
    }

    /// `1/2 z'Hz + f'z`, plus the slack penalty of violated soft rows.
    pub fn objective(&self, z: &DVector<f64>) -> f64 {
        let mut obj = 0.5 * z.dot(&(&self.h * z)) + self.f.dot(z);
        for (i, rho) in self.soft.iter().enumerate() {
            if let Some(rho) = rho {
                let v = (self.a.row(i) * z)[0] - self.b[i];
                if v > 0.0 {
                    obj += 0.5 * rho * v * v;
                }
            }
        }
        obj
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QpStatus {
    Optimal,
    MaxIterations,
    InfeasibleHard,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub z: DVector<f64>,
    pub objective: f64,
    pub kkt_residual: f64,
    pub status: QpStatus,
    /// Multiplier of each row (zero for inactive rows).
    pub multipliers: DVector<f64>,
    /// Rows in the final active set.
    pub active_set: Vec<usize>,
    pub iterations: usize,
}

/// Reusable solver holding the warm-start active set of the previous solve.
#[derive(Debug, Clone, Default)]
pub struct QpSolver {
    warm_start: Vec<usize>,
}

impl QpSolver {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rows tried first when looking for violated constraints.
    pub fn set_warm_start(&mut self, rows: Vec<usize>) {
        self.warm_start = rows;
    }

    pub fn warm_start(&self) -> &[usize] {
        &self.warm_start
    }

    pub fn clear_warm_start(&mut self) {
        self.warm_start.clear();
    }

    /// Solves `p` and records its active set as the next warm start.
    pub fn solve(&mut self, p: &QpProblem, max_iter: usize) -> Result<QpSolution> {
        let sol = solve_with_warm_start(p, max_iter, &self.warm_start)?;
        if sol.status == QpStatus::Optimal {
            self.warm_start = sol.active_set.clone();
        }
        Ok(sol)
    }
}

/// Solves `p` from a cold start.
pub fn solve(p: &QpProblem, max_iter: usize) -> Result<QpSolution> {
    solve_with_warm_start(p, max_iter, &[])
}

fn solve_with_warm_start(p: &QpProblem, max_iter: usize, warm: &[usize]) -> Result<QpSolution> {
    p.validate()?;
    let n = p.num_vars();
    let m = p.num_rows();
    let soft_rows: Vec<usize> = (0..m).filter(|&i| p.soft[i].is_some()).collect();

    let raw = if soft_rows.is_empty() {
        dual::solve(
            dual::inverse_factor(&p.h)?,
            &p.f,
            &p.a,
            &p.b,
            warm,
            max_iter,
        )?
    } else {
        // Append one slack per soft row; the extended Hessian is block
        // diagonal, so its inverse factor is too.
        let ns = soft_rows.len();
        let mut j = DMatrix::zeros(n + ns, n + ns);
        j.view_mut((0, 0), (n, n))
            .copy_from(&dual::inverse_factor(&p.h)?);
        let mut a = DMatrix::zeros(m, n + ns);
        a.view_mut((0, 0), (m, n)).copy_from(&p.a);
        for (k, &i) in soft_rows.iter().enumerate() {
            j[(n + k, n + k)] = 1.0 / p.soft[i].unwrap().sqrt();
            a[(i, n + k)] = -1.0;
        }
        let mut f = DVector::zeros(n + ns);
        f.rows_mut(0, n).copy_from(&p.f);
        let mut r = dual::solve(j, &f, &a, &p.b, warm, max_iter)?;
        r.x = r.x.rows(0, n).into_owned();
        r
    };

    let z = raw.x;
    let multipliers = raw.multipliers;
    let mut status = raw.status;
    let residual = if status == QpStatus::InfeasibleHard {
        f64::INFINITY
    } else {
        kkt_residual_with_multipliers(p, &z, &multipliers)
    };
    if status == QpStatus::Optimal && !(residual < OPTIMALITY_TOL) {
        status = QpStatus::MaxIterations;
    }
    Ok(QpSolution {
        objective: p.objective(&z),
        z,
        kkt_residual: residual,
        status,
        multipliers,
        active_set: raw.active,
        iterations: raw.iterations,
    })
}
