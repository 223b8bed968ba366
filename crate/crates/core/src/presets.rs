//! Small reference systems used by the test suites and as demo scenarios: a
//! scalar unstable plant on a 7-node feed-forward network, and a two-mode
//! plant on a 10-node network with two sensing clusters.

use nalgebra::{DMatrix, DVector};

use crate::graph::SensorNetwork;
use crate::plant::LtiPlant;

/// 7-node network with three fully-sensing nodes feeding a middle layer and
/// one downstream node. Strongly 3-robust w.r.t. nodes {0, 1, 2}.
pub fn scalar_demo_network() -> SensorNetwork {
    // 1-based edges, as usually drawn
    let edges_1 = [
        (1, 2),
        (1, 4),
        (1, 5),
        (1, 6),
        (2, 1),
        (2, 3),
        (2, 4),
        (2, 5),
        (2, 6),
        (3, 2),
        (3, 4),
        (3, 5),
        (3, 6),
        (4, 5),
        (4, 7),
        (5, 4),
        (5, 6),
        (5, 7),
        (6, 5),
        (6, 7),
        (7, 4),
        (7, 5),
        (7, 6),
    ];
    SensorNetwork::new(7, edges_1.iter().map(|&(a, b)| (a - 1, b - 1))).unwrap()
}

/// Scalar plant x[k+1] = 2 x[k] with identity measurements at nodes 0..2 and
/// no sensors elsewhere; x[0] = 0.5.
pub fn scalar_demo_plant() -> LtiPlant {
    let a = DMatrix::from_element(1, 1, 2.0);
    let observations = (0..7)
        .map(|i| {
            if i < 3 {
                DMatrix::from_element(1, 1, 1.0)
            } else {
                DMatrix::zeros(0, 1)
            }
        })
        .collect();
    LtiPlant::new(a, observations, DVector::from_element(1, 0.5)).unwrap()
}

/// 10-node network with two sensing clusters {0,1,2} and {7,8,9} bridged by
/// the middle nodes {3,4,5,6}.
pub fn two_cluster_network() -> SensorNetwork {
    let edges_1 = [
        (1, 2),
        (1, 4),
        (1, 6),
        (2, 1),
        (2, 3),
        (2, 4),
        (2, 5),
        (2, 6),
        (2, 7),
        (3, 2),
        (3, 5),
        (3, 7),
        (4, 1),
        (4, 8),
        (4, 5),
        (5, 2),
        (5, 9),
        (5, 4),
        (5, 6),
        (5, 3),
        (5, 10),
        (6, 2),
        (6, 9),
        (6, 1),
        (6, 8),
        (6, 5),
        (6, 7),
        (7, 3),
        (7, 10),
        (7, 6),
        (8, 4),
        (8, 6),
        (8, 9),
        (9, 4),
        (9, 5),
        (9, 6),
        (9, 7),
        (9, 8),
        (9, 10),
        (10, 5),
        (10, 7),
        (10, 9),
    ];
    SensorNetwork::new(10, edges_1.iter().map(|&(a, b)| (a - 1, b - 1))).unwrap()
}

/// Two-mode plant A = diag(2, 3); nodes 0..2 observe the first state, nodes
/// 7..9 the second, the middle nodes have no sensors.
pub fn two_mode_plant() -> LtiPlant {
    let a = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0]));
    let observations = (0..10)
        .map(|i| {
            if i < 3 {
                DMatrix::from_row_slice(1, 2, &[1.0, 0.0])
            } else if i >= 7 {
                DMatrix::from_row_slice(1, 2, &[0.0, 1.0])
            } else {
                DMatrix::zeros(0, 2)
            }
        })
        .collect();
    LtiPlant::new(a, observations, DVector::from_vec(vec![0.5, 0.5])).unwrap()
}
