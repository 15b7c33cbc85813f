use nalgebra::{DMatrix, DVector};

use super::QpProblem;

/// Relative slack below which a hard row is treated as active when
/// estimating multipliers.
const ACTIVE_TOL: f64 = 1e-7;

/// Gradient of the objective including the soft-row penalty.
fn penalized_gradient(p: &QpProblem, z: &DVector<f64>) -> (DVector<f64>, f64) {
    let hz = &p.h * z;
    let scale = 1.0 + hz.amax().max(p.f.amax());
    let mut g = hz + &p.f;
    for (i, rho) in p.soft.iter().enumerate() {
        if let Some(rho) = rho {
            let v = (p.a.row(i) * z)[0] - p.b[i];
            if v > 0.0 {
                g.axpy(rho * v, &p.a.row(i).transpose(), 1.0);
            }
        }
    }
    (g, scale)
}

/// KKT residual of `z` using multipliers estimated by nonnegative least
/// squares over the (nearly) active hard rows.
///
/// The residual is the maximum of relative stationarity, primal feasibility
/// and complementarity. Soft rows enter through their smooth penalty.
pub fn kkt_residual(p: &QpProblem, z: &DVector<f64>) -> f64 {
    let (g, _) = penalized_gradient(p, z);
    let near: Vec<usize> = (0..p.num_rows())
        .filter(|&i| p.soft[i].is_none())
        .filter(|&i| {
            let scale = p.a.row(i).norm().max(1.0) * (1.0 + p.b[i].abs());
            p.b[i] - (p.a.row(i) * z)[0] <= ACTIVE_TOL * scale
        })
        .collect();
    let mut lambda = DVector::zeros(p.num_rows());
    if !near.is_empty() {
        let n = p.num_vars();
        let mut m = DMatrix::zeros(n, near.len());
        for (k, &i) in near.iter().enumerate() {
            m.set_column(k, &p.a.row(i).transpose());
        }
        let est = nnls(&m, &(-&g));
        for (k, &i) in near.iter().enumerate() {
            lambda[i] = est[k];
        }
    }
    kkt_residual_with_multipliers(p, z, &lambda)
}

/// KKT residual of `z` for given row multipliers. Multipliers of soft rows
/// are ignored since their penalty is part of the gradient.
pub fn kkt_residual_with_multipliers(
    p: &QpProblem,
    z: &DVector<f64>,
    lambda: &DVector<f64>,
) -> f64 {
    let (mut g, scale) = penalized_gradient(p, z);
    let mut primal: f64 = 0.0;
    let mut compl: f64 = 0.0;
    let mut dual: f64 = 0.0;
    for i in 0..p.num_rows() {
        if p.soft[i].is_some() {
            continue;
        }
        let row = p.a.row(i);
        let norm = row.norm().max(1.0);
        let slack = p.b[i] - (row * z)[0];
        primal = primal.max(-slack / norm);
        let l = lambda[i];
        dual = dual.max(-l / scale);
        if l != 0.0 {
            g.axpy(l, &row.transpose(), 1.0);
            compl = compl.max((l * slack).abs() / (scale * norm));
        }
    }
    let stationarity = g.amax() / scale;
    stationarity.max(primal).max(compl).max(dual)
}

/// Lawson-Hanson nonnegative least squares: `min |M x - v|` subject to `x >= 0`.
pub(crate) fn nnls(m: &DMatrix<f64>, v: &DVector<f64>) -> DVector<f64> {
    let k = m.ncols();
    let mut x = DVector::zeros(k);
    let mut passive = vec![false; k];
    let tol = 1e-12 * (1.0 + m.amax()) * (1.0 + v.amax());
    for _ in 0..3 * k + 3 {
        let w = m.tr_mul(&(v - m * &x));
        let next = (0..k)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&a, &b| w[a].total_cmp(&w[b]));
        let Some(t) = next else { break };
        passive[t] = true;
        loop {
            let idx: Vec<usize> = (0..k).filter(|&j| passive[j]).collect();
            let sub = m.select_columns(&idx);
            let sol = sub
                .svd(true, true)
                .solve(v, 1e-14)
                .unwrap_or_else(|_| DVector::zeros(idx.len()));
            if sol.iter().all(|&s| s > 0.0) {
                x.fill(0.0);
                for (c, &j) in idx.iter().enumerate() {
                    x[j] = sol[c];
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (c, &j) in idx.iter().enumerate() {
                if sol[c] <= 0.0 {
                    let denom = x[j] - sol[c];
                    if denom > 0.0 {
                        alpha = alpha.min(x[j] / denom);
                    } else {
                        alpha = 0.0;
                    }
                }
            }
            for (c, &j) in idx.iter().enumerate() {
                x[j] += alpha * (sol[c] - x[j]);
                if x[j] <= 1e-15 {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nnls_clamps_negative_component() {
        let m = DMatrix::identity(2, 2);
        let v = DVector::from_column_slice(&[1.0, -2.0]);
        let x = nnls(&m, &v);
        assert!((x[0] - 1.0).abs() < 1e-14);
        assert_eq!(x[1], 0.0);
    }

    #[test]
    fn residual_zero_at_constrained_optimum() {
        let p = QpProblem::new(
            DMatrix::identity(1, 1),
            DVector::from_column_slice(&[-2.0]),
            DMatrix::from_row_slice(1, 1, &[1.0]),
            DVector::from_column_slice(&[0.5]),
        );
        let z = DVector::from_column_slice(&[0.5]);
        assert!(kkt_residual(&p, &z) < 1e-14);
        let off = DVector::from_column_slice(&[0.4]);
        assert!(kkt_residual(&p, &off) > 1e-2);
    }
}
