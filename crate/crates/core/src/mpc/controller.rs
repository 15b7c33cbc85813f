use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use super::constraints::HorizonConstraints;
use super::prediction::{
    build_prediction, cost_gradient, cost_hessian, weighted_forced, Prediction,
};
use super::{MpcConfig, ReferenceBundle};
use crate::dynamics::{AxisInput, AxisState, StateSpace, INPUT_DIM, OUTPUT_DIM};
use crate::error::{Error, Result};
use crate::qp::{QpProblem, QpSolver, QpStatus};

/// Result of one control cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlOutcome {
    pub input: AxisInput,
    pub status: QpStatus,
    /// The hard problem was infeasible and output rows were softened.
    pub softened: bool,
    pub iterations: usize,
    pub kkt_residual: f64,
    pub objective: f64,
    /// Optimal moves `dU` of the accepted solution.
    pub moves: DVector<f64>,
}

/// Position of a QP row inside the horizon: (sample, row within the set).
type RowKey = (usize, usize);

/// Receding-horizon controller of one axis. Holds `u(k-1)` and the active
/// set of the previous cycle.
#[derive(Debug, Clone)]
pub struct AxisController {
    config: MpcConfig,
    prediction: Prediction,
    hessian: DMatrix<f64>,
    weighted_forced: DMatrix<f64>,
    solver: QpSolver,
    u_prev: AxisInput,
    warm_rows: Vec<RowKey>,
}

impl AxisController {
    pub fn new(ss: &StateSpace, config: MpcConfig) -> Result<Self> {
        let prediction = build_prediction(ss, &config)?;
        let hessian = cost_hessian(&prediction, &config);
        let weighted_forced = weighted_forced(&prediction, &config);
        Ok(Self {
            config,
            prediction,
            hessian,
            weighted_forced,
            solver: QpSolver::new(),
            u_prev: AxisInput::zeros(),
            warm_rows: Vec::new(),
        })
    }

    pub fn config(&self) -> &MpcConfig {
        &self.config
    }

    pub fn prediction(&self) -> &Prediction {
        &self.prediction
    }

    pub fn previous_input(&self) -> AxisInput {
        self.u_prev
    }

    pub fn set_previous_input(&mut self, u: AxisInput) {
        self.u_prev = u;
    }

    pub fn reset_warm_start(&mut self) {
        self.warm_rows.clear();
        self.solver.clear_warm_start();
    }

    /// Builds the QP of one cycle. Returns the problem and the horizon
    /// position of each row.
    pub fn assemble(
        &self,
        x: &AxisState,
        refs: &ReferenceBundle,
        horizon: &HorizonConstraints,
    ) -> Result<(QpProblem, Vec<RowKey>)> {
        let np = self.prediction.np;
        let nc = self.prediction.nc;
        refs.validate(np)?;
        horizon.validate(np)?;
        if !x.is_finite() {
            return Err(Error::Structural("state estimate is not finite".into()));
        }
        let f = cost_gradient(
            &self.prediction,
            &self.weighted_forced,
            x,
            &self.u_prev,
            refs,
            &self.config,
        );
        let free = self.prediction.free_response(x, &self.u_prev);
        let n = INPUT_DIM * nc;

        let mut keys = Vec::new();
        let mut coeffs: Vec<f64> = Vec::new();
        let mut bounds = Vec::new();
        let mut soft = Vec::new();
        let mut row = vec![0.0; n];
        for j in 0..=np {
            for (r, c) in horizon.set_at(j).rows.iter().enumerate() {
                let outputs = c.involves_outputs();
                if (outputs && j == 0) || (!outputs && j >= nc) {
                    continue;
                }
                // Inputs at sample j (held after the control horizon).
                let ju = j.min(np - 1);
                row.iter_mut().for_each(|v| *v = 0.0);
                let mut g = c.g;
                if c.involves_inputs() {
                    for l in 0..=ju.min(nc - 1) {
                        for i in 0..INPUT_DIM {
                            row[INPUT_DIM * l + i] += c.e[i];
                        }
                    }
                    for i in 0..INPUT_DIM {
                        g -= c.e[i] * self.u_prev.0[i];
                    }
                }
                if outputs {
                    let base = OUTPUT_DIM * (j - 1);
                    for o in 0..OUTPUT_DIM {
                        if c.f[o] == 0.0 {
                            continue;
                        }
                        let pr = self.prediction.forced.row(base + o);
                        for (k, v) in row.iter_mut().enumerate() {
                            *v += c.f[o] * pr[k];
                        }
                        g -= c.f[o] * free[base + o];
                    }
                }
                keys.push((j, r));
                coeffs.extend_from_slice(&row);
                bounds.push(g);
                let beyond = self
                    .config
                    .hard_output_samples
                    .is_some_and(|n| outputs && j > n);
                soft.push(c.soft || beyond);
            }
        }
        let m = bounds.len();
        let a = DMatrix::from_row_slice(m, n, &coeffs);
        let mut qp = QpProblem::new(self.hessian.clone(), f, a, DVector::from_vec(bounds));
        for (i, s) in soft.into_iter().enumerate() {
            if s {
                qp.soft[i] = Some(self.config.soft_penalty);
            }
        }
        Ok((qp, keys))
    }

    /// One cycle: solve for the moves, apply the first one and remember it.
    /// A hard-infeasible problem is retried with every output row softened.
    pub fn control_step(
        &mut self,
        x: &AxisState,
        refs: &ReferenceBundle,
        horizon: &HorizonConstraints,
    ) -> Result<ControlOutcome> {
        let (mut qp, keys) = self.assemble(x, refs, horizon)?;
        let index: HashMap<RowKey, usize> = keys.iter().enumerate().map(|(i, k)| (*k, i)).collect();
        // Previous active rows, shifted one sample earlier.
        let warm: Vec<usize> = self
            .warm_rows
            .iter()
            .filter(|(j, _)| *j > 0)
            .filter_map(|(j, r)| index.get(&(j - 1, *r)).copied())
            .collect();
        self.solver.set_warm_start(warm);
        let mut sol = self.solver.solve(&qp, self.config.max_qp_iterations)?;
        let mut softened = false;
        if sol.status == QpStatus::InfeasibleHard {
            softened = true;
            for (i, (j, r)) in keys.iter().enumerate() {
                if horizon.set_at(*j).rows[*r].involves_outputs() {
                    qp.soft[i] = Some(self.config.soft_penalty);
                }
            }
            self.solver.clear_warm_start();
            sol = self.solver.solve(&qp, self.config.max_qp_iterations)?;
        }
        if sol.status != QpStatus::Optimal {
            self.reset_warm_start();
            return Err(Error::Solver(format!(
                "QP ended with status {:?} after {} iterations{}",
                sol.status,
                sol.iterations,
                if softened {
                    " with softened outputs"
                } else {
                    ""
                }
            )));
        }
        self.warm_rows = sol.active_set.iter().map(|&i| keys[i]).collect();
        let mut u = self.u_prev;
        for i in 0..INPUT_DIM {
            u.0[i] += sol.z[i];
        }
        self.u_prev = u;
        Ok(ControlOutcome {
            input: u,
            status: sol.status,
            softened,
            iterations: sol.iterations,
            kkt_residual: sol.kkt_residual,
            objective: sol.objective,
            moves: sol.z,
        })
    }
}
