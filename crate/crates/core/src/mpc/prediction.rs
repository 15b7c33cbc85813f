use nalgebra::{DMatrix, DVector};

use super::{MpcConfig, ReferenceBundle};
use crate::dynamics::{AxisInput, AxisState, StateSpace, INPUT_DIM, OUTPUT_DIM, STATE_DIM};
use crate::error::{Error, Result};

/// Condensed prediction of the outputs at samples `k+1 ..= k+Np`:
///
/// `Y = free * x(k) + input_hold * u(k-1) + forced * dU`,
///
/// with `u(k+j) = u(k-1) + sum_{l <= min(j, Nc-1)} du(l)`. Outputs are
/// stacked sample-major in the order (stance, swing, ZMP).
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub np: usize,
    pub nc: usize,
    /// `3Np x 9`.
    pub free: DMatrix<f64>,
    /// `3Np x 3`.
    pub input_hold: DMatrix<f64>,
    /// `3Np x 3Nc`.
    pub forced: DMatrix<f64>,
    /// Maps `dU` to the stacked inputs `u(k) ..= u(k+Np-1)`, `3Np x 3Nc`.
    pub input_map: DMatrix<f64>,
}

impl Prediction {
    /// Stacked outputs for the given state, previous input and moves.
    pub fn outputs(&self, x: &AxisState, u_prev: &AxisInput, du: &DVector<f64>) -> DVector<f64> {
        self.free_response(x, u_prev) + &self.forced * du
    }

    /// Stacked outputs with all moves zero.
    pub fn free_response(&self, x: &AxisState, u_prev: &AxisInput) -> DVector<f64> {
        let xs = DVector::from_column_slice(x.0.as_slice());
        let us = DVector::from_column_slice(u_prev.0.as_slice());
        &self.free * xs + &self.input_hold * us
    }

    /// Stacked inputs `u(k) ..= u(k+Np-1)`.
    pub fn inputs(&self, u_prev: &AxisInput, du: &DVector<f64>) -> DVector<f64> {
        let mut u = &self.input_map * du;
        for j in 0..self.np {
            for i in 0..INPUT_DIM {
                u[INPUT_DIM * j + i] += u_prev.0[i];
            }
        }
        u
    }
}

pub fn build_prediction(ss: &StateSpace, config: &MpcConfig) -> Result<Prediction> {
    config.validate()?;
    match ss.sample_time {
        Some(ts) if (ts - config.ts).abs() <= 1e-12 * config.ts => {}
        Some(ts) => {
            return Err(Error::Structural(format!(
                "model sample time {ts} differs from controller sample time {}",
                config.ts
            )))
        }
        None => {
            return Err(Error::Structural(
                "prediction needs a discrete model".into(),
            ))
        }
    }
    let (np, nc) = (config.np, config.nc);
    let mut free = DMatrix::zeros(OUTPUT_DIM * np, STATE_DIM);
    let mut input_hold = DMatrix::zeros(OUTPUT_DIM * np, INPUT_DIM);
    let mut forced = DMatrix::zeros(OUTPUT_DIM * np, INPUT_DIM * nc);
    let mut input_map = DMatrix::zeros(INPUT_DIM * np, INPUT_DIM * nc);

    // cs[m] = C * sum_{i<m} A^i B: output response m samples after a unit
    // step in the input.
    let mut a_pow = ss.a;
    let mut step_sum = ss.b;
    let mut cs = Vec::with_capacity(np + 1);
    cs.push(nalgebra::SMatrix::<f64, OUTPUT_DIM, INPUT_DIM>::zeros());
    for j in 1..=np {
        let row = OUTPUT_DIM * (j - 1);
        free.view_mut((row, 0), (OUTPUT_DIM, STATE_DIM))
            .copy_from(&(ss.c * a_pow));
        cs.push(ss.c * step_sum);
        a_pow = ss.a * a_pow;
        step_sum = ss.a * step_sum + ss.b;
    }
    for j in 1..=np {
        let row = OUTPUT_DIM * (j - 1);
        input_hold
            .view_mut((row, 0), (OUTPUT_DIM, INPUT_DIM))
            .copy_from(&cs[j]);
        for l in 0..nc.min(j) {
            forced
                .view_mut((row, INPUT_DIM * l), (OUTPUT_DIM, INPUT_DIM))
                .copy_from(&cs[j - l]);
        }
    }
    for j in 0..np {
        for l in 0..=j.min(nc - 1) {
            for i in 0..INPUT_DIM {
                input_map[(INPUT_DIM * j + i, INPUT_DIM * l + i)] = 1.0;
            }
        }
    }
    Ok(Prediction {
        np,
        nc,
        free,
        input_hold,
        forced,
        input_map,
    })
}

/// Hessian `H` and gradient `f` of the horizon cost in `dU`, scaled so the
/// QP objective `1/2 dU'H dU + f'dU` differs from the weighted sum of
/// squared tracking errors and jerks by a factor 1/2 and a constant.
pub fn build_cost(
    pred: &Prediction,
    x: &AxisState,
    u_prev: &AxisInput,
    refs: &ReferenceBundle,
    config: &MpcConfig,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    refs.validate(pred.np)?;
    let hessian = cost_hessian(pred, config);
    let gradient = cost_gradient(
        pred,
        &weighted_forced(pred, config),
        x,
        u_prev,
        refs,
        config,
    );
    Ok((hessian, gradient))
}

fn output_weight_vector(pred: &Prediction, config: &MpcConfig) -> Vec<f64> {
    let w = config.output_weights();
    (0..OUTPUT_DIM * pred.np)
        .map(|r| w[r % OUTPUT_DIM])
        .collect()
}

/// `forced' * Q`.
pub(super) fn weighted_forced(pred: &Prediction, config: &MpcConfig) -> DMatrix<f64> {
    let q = output_weight_vector(pred, config);
    let mut gq = pred.forced.transpose();
    for (c, w) in q.iter().enumerate() {
        gq.column_mut(c).scale_mut(*w);
    }
    gq
}

pub(super) fn cost_hessian(pred: &Prediction, config: &MpcConfig) -> DMatrix<f64> {
    let gq = weighted_forced(pred, config);
    let mut h = &gq * &pred.forced;
    let mut ts = pred.input_map.transpose();
    for c in 0..ts.ncols() {
        ts.column_mut(c)
            .scale_mut(config.jerk_weights[c % INPUT_DIM]);
    }
    h += ts * &pred.input_map;
    // Symmetrize against rounding.
    let ht = h.transpose();
    (h + ht) * 0.5
}

pub(super) fn cost_gradient(
    pred: &Prediction,
    gq: &DMatrix<f64>,
    x: &AxisState,
    u_prev: &AxisInput,
    refs: &ReferenceBundle,
    config: &MpcConfig,
) -> DVector<f64> {
    let mut err = pred.free_response(x, u_prev);
    for j in 0..pred.np {
        for o in 0..OUTPUT_DIM {
            err[OUTPUT_DIM * j + o] -= refs.output(j, o);
        }
    }
    let mut f = gq * err;
    // Jerk term: T' S (1 (x) u_prev).
    for l in 0..pred.nc {
        let count = (pred.np - l) as f64;
        for i in 0..INPUT_DIM {
            f[INPUT_DIM * l + i] += config.jerk_weights[i] * count * u_prev.0[i];
        }
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{build_continuous, discretize, step_plant, ThreeMassParams};

    fn model() -> StateSpace {
        discretize(
            &build_continuous(&ThreeMassParams::default()).unwrap(),
            0.02,
        )
        .unwrap()
    }

    fn config(np: usize, nc: usize) -> MpcConfig {
        MpcConfig {
            np,
            nc,
            ..MpcConfig::default()
        }
    }

    #[test]
    fn one_step_prediction() {
        let ss = model();
        let p = build_prediction(&ss, &config(1, 1)).unwrap();
        let ca = ss.c * ss.a;
        let cb = ss.c * ss.b;
        assert!((p.free.clone() - DMatrix::from_column_slice(3, 9, ca.as_slice())).amax() < 1e-15);
        assert!(
            (p.forced.clone() - DMatrix::from_column_slice(3, 3, cb.as_slice())).amax() < 1e-15
        );
    }

    #[test]
    fn held_input_response() {
        let ss = model();
        let cfg = config(10, 4);
        let p = build_prediction(&ss, &cfg).unwrap();
        let u = AxisInput::new(1.0, -2.0, 0.5);
        let y = p.outputs(&AxisState::zeros(), &u, &DVector::zeros(12));
        let mut x = AxisState::zeros();
        for j in 0..10 {
            x = step_plant(&ss, &x, &u, [0.0; 3]).unwrap();
            let out = ss.output(&x);
            for o in 0..3 {
                assert!((y[3 * j + o] - out[o]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hessian_symmetric_positive_definite() {
        let ss = model();
        let cfg = MpcConfig::default();
        let p = build_prediction(&ss, &cfg).unwrap();
        let h = cost_hessian(&p, &cfg);
        assert_eq!(h, h.transpose());
        assert!(nalgebra::Cholesky::new(h).is_some());
    }

    #[test]
    fn rejects_mismatched_sample_time() {
        let ss = model();
        let cfg = MpcConfig {
            ts: 0.01,
            ..MpcConfig::default()
        };
        assert!(build_prediction(&ss, &cfg).is_err());
    }
}
