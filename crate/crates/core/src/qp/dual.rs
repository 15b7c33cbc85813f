use nalgebra::{Cholesky, DMatrix, DVector};

use super::QpStatus;
use crate::error::{Error, Result};

pub(super) struct DualResult {
    pub x: DVector<f64>,
    pub multipliers: DVector<f64>,
    pub active: Vec<usize>,
    pub status: QpStatus,
    pub iterations: usize,
}

/// Factors of the active set: `J' N = [R; 0]` with `J = L^{-T}`, `H = L L'`,
/// and `N` the (negated) active constraint normals.
struct Factors {
    j: DMatrix<f64>,
    r: DMatrix<f64>,
    q: usize,
}

impl Factors {
    fn rotate_cols(&mut self, c1: usize, c2: usize, c: f64, s: f64) {
        let n = self.j.nrows();
        for i in 0..n {
            let a = self.j[(i, c1)];
            let b = self.j[(i, c2)];
            self.j[(i, c1)] = c * a + s * b;
            self.j[(i, c2)] = -s * a + c * b;
        }
    }

    /// Appends a constraint whose transformed normal is `d = J' n`.
    fn add(&mut self, d: &mut DVector<f64>) {
        let n = d.len();
        let q = self.q;
        for k in (q + 1..n).rev() {
            let (a, b) = (d[k - 1], d[k]);
            if b == 0.0 {
                continue;
            }
            let h = a.hypot(b);
            let (c, s) = (a / h, b / h);
            d[k - 1] = h;
            d[k] = 0.0;
            self.rotate_cols(k - 1, k, c, s);
        }
        for i in 0..=q {
            self.r[(i, q)] = d[i];
        }
        self.q += 1;
    }

    /// Removes the `k`-th active constraint and restores triangularity.
    fn drop(&mut self, k: usize) {
        let q = self.q;
        for col in k..q - 1 {
            for i in 0..q {
                self.r[(i, col)] = self.r[(i, col + 1)];
            }
        }
        for i in 0..q {
            self.r[(i, q - 1)] = 0.0;
        }
        for row in k..q - 1 {
            let (a, b) = (self.r[(row, row)], self.r[(row + 1, row)]);
            if b == 0.0 {
                continue;
            }
            let h = a.hypot(b);
            let (c, s) = (a / h, b / h);
            for col in row..q - 1 {
                let x = self.r[(row, col)];
                let y = self.r[(row + 1, col)];
                self.r[(row, col)] = c * x + s * y;
                self.r[(row + 1, col)] = -s * x + c * y;
            }
            self.r[(row + 1, row)] = 0.0;
            self.rotate_cols(row, row + 1, c, s);
        }
        self.q -= 1;
    }

    /// Solves `R r = d[..q]` by back substitution.
    fn back_substitute(&self, d: &DVector<f64>) -> Vec<f64> {
        let q = self.q;
        let mut r = vec![0.0; q];
        for i in (0..q).rev() {
            let mut acc = d[i];
            for k in i + 1..q {
                acc -= self.r[(i, k)] * r[k];
            }
            r[i] = acc / self.r[(i, i)];
        }
        r
    }
}

/// `L^-T` for the Cholesky factor `L` of `h`.
pub(super) fn inverse_factor(h: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = h.nrows();
    let chol = Cholesky::new(h.clone())
        .ok_or_else(|| Error::Structural("Hessian is not positive definite".into()))?;
    let l_inv = chol
        .l()
        .solve_lower_triangular(&DMatrix::identity(n, n))
        .ok_or_else(|| Error::Structural("singular Cholesky factor".into()))?;
    Ok(l_inv.transpose())
}

/// Dual active-set iterations starting from `j = L^-T` of the Hessian.
pub(super) fn solve(
    j: DMatrix<f64>,
    f: &DVector<f64>,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    warm: &[usize],
    max_iter: usize,
) -> Result<DualResult> {
    let n = f.len();
    let m = b.len();
    let mut fac = Factors {
        j,
        r: DMatrix::zeros(n, n),
        q: 0,
    };

    // Unconstrained minimizer x = -H^{-1} f.
    let mut x = -(&fac.j * (fac.j.tr_mul(f)));
    let row_norms: Vec<f64> = (0..m).map(|i| a.row(i).norm()).collect();
    let mut active: Vec<usize> = Vec::new();
    let mut u: Vec<f64> = Vec::new();
    let mut is_active = vec![false; m];
    let mut iterations = 0;

    let finish = |x: DVector<f64>, active: Vec<usize>, u: &[f64], status, iterations| {
        let mut multipliers = DVector::zeros(m);
        for (k, &i) in active.iter().enumerate() {
            multipliers[i] = u[k];
        }
        DualResult {
            x,
            multipliers,
            active,
            status,
            iterations,
        }
    };

    for i in 0..m {
        if row_norms[i] == 0.0 && b[i] < 0.0 {
            return Ok(finish(x, active, &u, QpStatus::InfeasibleHard, 0));
        }
    }

    let violation = |x: &DVector<f64>, i: usize| -> f64 {
        let s = (a.row(i) * x)[0] - b[i];
        s / row_norms[i]
    };
    let tolerance = |i: usize| 1e-11 * (1.0 + b[i].abs() / row_norms[i]);

    loop {
        // Pick the most violated inactive row, preferring warm-start rows.
        let mut pick: Option<(usize, f64)> = None;
        for &i in warm {
            if i < m && !is_active[i] && row_norms[i] > 0.0 {
                let v = violation(&x, i);
                if v > tolerance(i) && pick.map_or(true, |(_, best)| v > best) {
                    pick = Some((i, v));
                }
            }
        }
        if pick.is_none() {
            for i in 0..m {
                if !is_active[i] && row_norms[i] > 0.0 {
                    let v = violation(&x, i);
                    if v > tolerance(i) && pick.map_or(true, |(_, best)| v > best) {
                        pick = Some((i, v));
                    }
                }
            }
        }
        let Some((p, _)) = pick else {
            return Ok(finish(x, active, &u, QpStatus::Optimal, iterations));
        };
        iterations += 1;
        if iterations > max_iter {
            return Ok(finish(
                x,
                active,
                &u,
                QpStatus::MaxIterations,
                iterations - 1,
            ));
        }

        // Constraint in >= form: n_p' x >= -b_p with n_p = -a_p.
        let np: DVector<f64> = -a.row(p).transpose();
        let mut up = 0.0;
        let added = step_toward(
            &mut fac,
            &np,
            a,
            b,
            p,
            &mut x,
            &mut active,
            &mut u,
            &mut is_active,
            &mut up,
        );
        if !added {
            return Ok(finish(x, active, &u, QpStatus::InfeasibleHard, iterations));
        }
    }
}
/// Moves along the primal/dual step for violated row `p` until it becomes
/// active. Returns `false` when no step can restore feasibility.
#[allow(clippy::too_many_arguments)]
fn step_toward(
    fac: &mut Factors,
    np: &DVector<f64>,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    p: usize,
    x: &mut DVector<f64>,
    active: &mut Vec<usize>,
    u: &mut Vec<f64>,
    is_active: &mut [bool],
    up: &mut f64,
) -> bool {
    let n = x.len();
    loop {
        let q = fac.q;
        let mut d = fac.j.tr_mul(np);
        let r = fac.back_substitute(&d);
        let mut z = DVector::zeros(n);
        for k in q..n {
            z.axpy(d[k], &fac.j.column(k), 1.0);
        }

        // Partial step limited by a multiplier reaching zero.
        let mut t1 = f64::INFINITY;
        let mut drop_at = None;
        for k in 0..q {
            if r[k] > 0.0 {
                let t = u[k] / r[k];
                if t < t1 {
                    t1 = t;
                    drop_at = Some(k);
                }
            }
        }
        // Full step that makes row p active.
        let d2: f64 = (q..n).map(|k| d[k] * d[k]).sum();
        let dn: f64 = d.norm_squared();
        let sp = -(a.row(p) * &*x)[0] + b[p];
        let t2 = if q < n && d2 > 1e-20 * dn {
            -sp / z.dot(np)
        } else {
            f64::INFINITY
        };
        let t = t1.min(t2);
        if !t.is_finite() {
            return false;
        }
        for k in 0..q {
            u[k] -= t * r[k];
        }
        *up += t;
        if t2.is_finite() {
            x.axpy(t, &z, 1.0);
        }
        if t2 <= t1 {
            fac.add(&mut d);
            active.push(p);
            u.push(*up);
            is_active[p] = true;
            return true;
        }
        let k = drop_at.expect("partial step has a blocking multiplier");
        is_active[active[k]] = false;
        active.remove(k);
        u.remove(k);
        fac.drop(k);
    }
}
