//! Discrete-time LTI plant and per-node measurement model; exact state
//! propagation used as ground truth by the simulator.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::spectral;
use crate::NodeId;

/// Autonomous plant `x[k+1] = A x[k]` with per-node observations
/// `y_i[k] = C_i x[k]`. Nodes without sensors carry a 0-row observation
/// matrix, so every node has a `C_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiPlant {
    a: DMatrix<f64>,
    observations: Vec<DMatrix<f64>>,
    initial_state: DVector<f64>,
}

impl LtiPlant {
    /// Validates dimensions and collective detectability of the stacked pair
    /// (A, C).
    pub fn new(
        a: DMatrix<f64>,
        observations: Vec<DMatrix<f64>>,
        initial_state: DVector<f64>,
    ) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Config(format!(
                "system matrix must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if initial_state.len() != n {
            return Err(Error::Config(format!(
                "initial state has length {}, expected {n}",
                initial_state.len()
            )));
        }
        for (i, c) in observations.iter().enumerate() {
            if c.ncols() != n {
                return Err(Error::Config(format!(
                    "observation matrix of node {i} has {} columns, expected {n}",
                    c.ncols()
                )));
            }
        }
        let plant = LtiPlant {
            a,
            observations,
            initial_state,
        };
        let all: Vec<NodeId> = (0..plant.node_count()).collect();
        if !spectral::is_detectable_stacked(&plant, &all) {
            return Err(Error::Config(
                "the stacked pair (A, C) is not detectable".into(),
            ));
        }
        Ok(plant)
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn node_count(&self) -> usize {
        self.observations.len()
    }

    pub fn a_matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn observation(&self, node: NodeId) -> Result<&DMatrix<f64>> {
        self.observations
            .get(node)
            .ok_or_else(|| Error::Config(format!("unknown node id {node}")))
    }

    pub fn observations(&self) -> &[DMatrix<f64>] {
        &self.observations
    }

    pub fn initial_state(&self) -> &DVector<f64> {
        &self.initial_state
    }

    /// One step of the plant dynamics, `A * state`.
    pub fn step_state(&self, state: &DVector<f64>) -> Result<DVector<f64>> {
        if state.len() != self.state_dim() {
            return Err(Error::Config(format!(
                "state has length {}, expected {}",
                state.len(),
                self.state_dim()
            )));
        }
        Ok(&self.a * state)
    }

    /// Measurement of `node` at the given state, `C_i * state`; empty for a
    /// sensor-less node.
    pub fn measure(&self, node: NodeId, state: &DVector<f64>) -> Result<DVector<f64>> {
        let c = self.observation(node)?;
        if state.len() != self.state_dim() {
            return Err(Error::Config(format!(
                "state has length {}, expected {}",
                state.len(),
                self.state_dim()
            )));
        }
        Ok(c * state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::{scalar_demo_plant, two_mode_plant};
    use nalgebra::dvector;

    #[test]
    fn scalar_step() {
        let plant = scalar_demo_plant();
        let next = plant.step_state(&dvector![0.5]).unwrap();
        assert_eq!(next, dvector![1.0]);
    }

    #[test]
    fn identity_step_preserves_state() {
        let a = DMatrix::identity(3, 3);
        let c = DMatrix::identity(3, 3);
        let plant = LtiPlant::new(a, vec![c], DVector::zeros(3)).unwrap();
        let x = dvector![1.0, -2.0, 3.5];
        assert_eq!(plant.step_state(&x).unwrap(), x);
    }

    #[test]
    fn rotation_step() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let c = DMatrix::identity(2, 2);
        let plant = LtiPlant::new(a, vec![c], DVector::zeros(2)).unwrap();
        let next = plant.step_state(&dvector![1.0, 0.0]).unwrap();
        assert_eq!(next, dvector![0.0, -1.0]);
    }

    #[test]
    fn measure_identity_and_empty() {
        let plant = scalar_demo_plant();
        let x = dvector![0.75];
        assert_eq!(plant.measure(1, &x).unwrap(), dvector![0.75]);
        assert_eq!(plant.measure(4, &x).unwrap().len(), 0);
        assert!(plant.measure(99, &x).is_err());
    }

    #[test]
    fn dimension_mismatch_is_config_error() {
        let plant = scalar_demo_plant();
        assert!(plant.step_state(&dvector![1.0, 2.0]).is_err());
    }

    #[test]
    fn undetectable_stack_rejected() {
        // unstable mode 2 observed by nobody
        let a = DMatrix::from_diagonal(&dvector![2.0, 0.5]);
        let c = DMatrix::from_row_slice(1, 2, &[0.0, 1.0]);
        assert!(LtiPlant::new(a, vec![c], DVector::zeros(2)).is_err());
    }

    #[test]
    fn step_is_linear() {
        let plant = two_mode_plant();
        let u = dvector![0.3, -1.2];
        let v = dvector![2.0, 0.7];
        let (alpha, beta) = (1.7, -0.4);
        let lhs = plant.step_state(&(alpha * &u + beta * &v)).unwrap();
        let rhs =
            alpha * plant.step_state(&u).unwrap() + beta * plant.step_state(&v).unwrap();
        assert!((lhs - rhs).norm() <= 1e-12);
    }

    #[test]
    fn measure_after_steps_matches_closed_form() {
        let plant = two_mode_plant();
        let x0 = dvector![0.5, 0.25];
        let mut x = x0.clone();
        let mut a_pow = DMatrix::identity(2, 2);
        for _ in 0..=50 {
            for node in [0, 8] {
                let measured = plant.measure(node, &x).unwrap();
                let closed = plant.observation(node).unwrap() * &a_pow * &x0;
                let denom = closed.norm().max(1.0);
                assert!((measured - closed).norm() / denom <= 1e-9);
            }
            x = plant.step_state(&x).unwrap();
            a_pow = plant.a_matrix() * a_pow;
        }
    }
}
