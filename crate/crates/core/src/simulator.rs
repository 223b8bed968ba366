//! Synchronous round engine tying the plant, the per-node estimators, the
//! routing DAGs, and an attack script into one executable scenario.
//!
//! Round semantics: block estimates transmitted at round `k` are delivered
//! and consumed at round `k+1`; there is no lookahead. Compromised nodes'
//! internal state is simulated only to supply values for honest-behaving
//! policies — what exists externally are their transmissions.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::adversary::{edge_rng, runtime_message, AttackScript};
use crate::error::{Error, Result};
use crate::estimation::NodeEstimator;
use crate::graph::SensorNetwork;
use crate::medag::{construct_medag_trace, default_max_rounds, Medag};
use crate::plant::LtiPlant;
use crate::spectral::{build_basis, build_basis_with, SpectralBasis};
use crate::NodeId;

/// Estimator flavor: the resilient trim filter, or the plain averaging
/// baseline it is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorMode {
    ResilientLfre,
    PlainConsensus,
}

/// Where the nodes' initial estimates come from (in the original state
/// coordinates).
#[derive(Debug, Clone, PartialEq)]
pub enum InitialEstimates {
    Zero,
    /// one state-dimension vector per node
    Explicit(Vec<DVector<f64>>),
    /// every component of every node drawn uniformly from [low, high),
    /// deterministically from the scenario seed
    RandomUniform { low: f64, high: f64 },
}

/// Complete executable experiment description.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub plant: LtiPlant,
    pub net: SensorNetwork,
    pub f: usize,
    pub attack: AttackScript,
    pub rounds: usize,
    pub seed: u64,
    pub initial_estimates: InitialEstimates,
    /// per-node observer gain overrides; absent nodes get the dead-beat
    /// default
    pub observer_gains: BTreeMap<NodeId, DMatrix<f64>>,
    pub estimator_mode: EstimatorMode,
    /// explicit similarity transform (T, M) for non-diagonalizable systems
    pub basis_override: Option<(DMatrix<f64>, DMatrix<f64>)>,
    /// round budget for the DAG construction phase; default N+1
    pub max_design_rounds: Option<usize>,
}

impl Scenario {
    pub fn new(plant: LtiPlant, net: SensorNetwork, f: usize, rounds: usize) -> Result<Self> {
        if net.node_count() != plant.node_count() {
            return Err(Error::Config(format!(
                "network has {} nodes but the plant defines {} observation matrices",
                net.node_count(),
                plant.node_count()
            )));
        }
        if rounds == 0 {
            return Err(Error::Config("rounds must be at least 1".into()));
        }
        Ok(Scenario {
            plant,
            net,
            f,
            attack: AttackScript::empty(),
            rounds,
            seed: 0,
            initial_estimates: InitialEstimates::Zero,
            observer_gains: BTreeMap::new(),
            estimator_mode: EstimatorMode::ResilientLfre,
            basis_override: None,
            max_design_rounds: None,
        })
    }
}

/// One estimate record: a node's full-state estimate and its error at one
/// round.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub round: usize,
    pub node: NodeId,
    pub estimate: DVector<f64>,
    pub error_norm: f64,
}

/// Value a compromised node actually put on one edge in one round, kept for
/// audit.
#[derive(Debug, Clone, PartialEq)]
pub struct AdversarialTransmission {
    pub round: usize,
    pub sender: NodeId,
    pub recipient: NodeId,
    pub block: usize,
    pub value: Option<DVector<f64>>,
}

/// Full output of a run: per-round-and-regular-node records plus the
/// constructed DAGs and audit data.
#[derive(Debug, Clone)]
pub struct SimulationTrace {
    pub records: Vec<TraceRecord>,
    pub state_dim: usize,
    pub rounds: usize,
    pub regular: BTreeSet<NodeId>,
    pub adversarial: BTreeSet<NodeId>,
    pub medags: BTreeMap<usize, Medag>,
    pub flagged: BTreeMap<NodeId, BTreeSet<NodeId>>,
    pub adversarial_transmissions: Vec<AdversarialTransmission>,
    pub warnings: Vec<String>,
}

impl SimulationTrace {
    /// Records of one node across rounds, in round order.
    pub fn node_records(&self, node: NodeId) -> Vec<&TraceRecord> {
        self.records.iter().filter(|r| r.node == node).collect()
    }
}

fn initial_z(scenario: &Scenario, basis: &SpectralBasis, node: NodeId) -> Result<DVector<f64>> {
    let n = basis.state_dim();
    let x0 = match &scenario.initial_estimates {
        InitialEstimates::Zero => DVector::zeros(n),
        InitialEstimates::Explicit(list) => {
            let v = list.get(node).ok_or_else(|| {
                Error::Config(format!("no initial estimate provided for node {node}"))
            })?;
            if v.len() != n {
                return Err(Error::Config(format!(
                    "initial estimate of node {node} has length {}, expected {n}",
                    v.len()
                )));
            }
            v.clone()
        }
        InitialEstimates::RandomUniform { low, high } => {
            if !(low < high) {
                return Err(Error::Config("initial-estimate range must have low < high".into()));
            }
            let mut rng = edge_rng(scenario.seed, node, 0, usize::MAX, 0);
            DVector::from_fn(n, |_, _| rng.gen_range(*low..*high))
        }
    };
    Ok(basis.transform_inv() * x0)
}

/// Executes the full pipeline: basis construction, per-block DAG phase under
/// the design-time attack policies, then `rounds` synchronous estimation
/// rounds.
pub fn run(scenario: &Scenario) -> Result<SimulationTrace> {
    let plant = &scenario.plant;
    let net = &scenario.net;
    let basis = match &scenario.basis_override {
        Some((t, m)) => build_basis_with(plant, t.clone(), m.clone())?,
        None => build_basis(plant)?,
    };
    let mut warnings = Vec::new();
    if !scenario.attack.is_f_local(net, scenario.f) {
        warnings.push(format!(
            "compromised set {:?} is not {}-local; resilience guarantees lapse",
            scenario.attack.compromised, scenario.f
        ));
    }

    // design phase: one DAG per consensus-estimated block
    let max_design = scenario
        .max_design_rounds
        .unwrap_or_else(|| default_max_rounds(net));
    let mut medags = BTreeMap::new();
    for &j in basis.omega_u() {
        let (medag, activated) = construct_medag_trace(
            net,
            j,
            basis.source_set(j),
            scenario.f,
            Some(&scenario.attack),
            max_design,
        );
        match medag {
            Some(m) => {
                medags.insert(j, m);
            }
            None => {
                return Err(Error::DesignPhaseFailed {
                    block: j,
                    max_rounds: max_design,
                    activated: activated.into_iter().collect(),
                })
            }
        }
    }

    // estimators for every node; compromised nodes are simulated so honest
    // policies have values to transmit
    let compromised = &scenario.attack.compromised;
    let regular: BTreeSet<NodeId> = net.nodes().filter(|i| !compromised.contains(i)).collect();
    let mut estimators: Vec<NodeEstimator> = Vec::with_capacity(net.node_count());
    for node in net.nodes() {
        let mut accepted: BTreeMap<usize, Vec<NodeId>> = BTreeMap::new();
        for (&j, medag) in &medags {
            if basis.undetectable_set(node).contains(&j) {
                let neighbors = medag
                    .accepted_neighbors
                    .get(&node)
                    .cloned()
                    .unwrap_or_default();
                if regular.contains(&node) && neighbors.len() < 2 * scenario.f + 1 {
                    return Err(Error::Config(format!(
                        "node {node} obtained only {} routed neighbors for block {j}",
                        neighbors.len()
                    )));
                }
                accepted.insert(j, neighbors);
            }
        }
        let mut est = NodeEstimator::new(
            &basis,
            plant,
            node,
            accepted,
            scenario.observer_gains.get(&node).cloned(),
        )?;
        est.set_initial_z(initial_z(scenario, &basis, node)?)?;
        estimators.push(est);
    }

    let mut x = plant.initial_state().clone();
    let mut records = Vec::new();
    let mut adversarial_transmissions = Vec::new();
    let record_round =
        |records: &mut Vec<TraceRecord>, round: usize, x: &DVector<f64>, ests: &[NodeEstimator]| {
            for node in net.nodes().filter(|i| regular.contains(i)) {
                let estimate = ests[node].full_estimate();
                let error_norm = (&estimate - x).norm();
                records.push(TraceRecord {
                    round,
                    node,
                    estimate,
                    error_norm,
                });
            }
        };
    record_round(&mut records, 0, &x, &estimators);

    let trim = match scenario.estimator_mode {
        EstimatorMode::ResilientLfre => scenario.f,
        EstimatorMode::PlainConsensus => 0,
    };

    for k in 0..scenario.rounds {
        // snapshot of round-k block estimates: what every node transmits
        let snapshot: Vec<DVector<f64>> =
            estimators.iter().map(|e| e.z_estimate().clone()).collect();
        let z_truth = basis.transform_inv() * &x;

        // deliver round-k messages per (recipient, consensus block)
        let mut inboxes: Vec<BTreeMap<usize, BTreeMap<NodeId, Option<DVector<f64>>>>> =
            vec![BTreeMap::new(); net.node_count()];
        for recipient in net.nodes() {
            for (&j, medag) in &medags {
                if !basis.undetectable_set(recipient).contains(&j) {
                    continue;
                }
                let Some(accepted) = medag.accepted_neighbors.get(&recipient) else {
                    continue;
                };
                let range = basis.blocks()[j].range();
                let truth_block: DVector<f64> = z_truth.rows(range.start, range.len()).into();
                let mut received = BTreeMap::new();
                for &sender in accepted {
                    let honest: DVector<f64> =
                        snapshot[sender].rows(range.start, range.len()).into();
                    let value = if compromised.contains(&sender) {
                        let v = runtime_message(
                            &scenario.attack,
                            sender,
                            recipient,
                            j,
                            &truth_block,
                            &honest,
                            k,
                            scenario.seed,
                        );
                        adversarial_transmissions.push(AdversarialTransmission {
                            round: k,
                            sender,
                            recipient,
                            block: j,
                            value: v.clone(),
                        });
                        v
                    } else {
                        Some(honest)
                    };
                    received.insert(sender, value);
                }
                inboxes[recipient].insert(j, received);
            }
        }

        // simultaneous node updates from the snapshot
        for node in net.nodes() {
            let y = plant.measure(node, &x)?;
            estimators[node].observer_step(&y)?;
            let node_inbox = std::mem::take(&mut inboxes[node]);
            for (j, received) in node_inbox {
                estimators[node].lfre_step(j, &received, trim)?;
            }
        }

        x = plant.step_state(&x)?;
        record_round(&mut records, k + 1, &x, &estimators);
    }

    let flagged = net
        .nodes()
        .filter(|i| regular.contains(i))
        .map(|i| (i, estimators[i].flagged().clone()))
        .collect();
    Ok(SimulationTrace {
        records,
        state_dim: plant.state_dim(),
        rounds: scenario.rounds,
        regular,
        adversarial: compromised.clone(),
        medags,
        flagged,
        adversarial_transmissions,
        warnings,
    })
}

/// Per-node convergence summary derived from a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSummary {
    pub node: NodeId,
    pub final_error: f64,
    pub max_error: f64,
    /// first round with error below 1e-3 / 1e-6
    pub first_below_1e3: Option<usize>,
    pub first_below_1e6: Option<usize>,
    /// error grew by a factor of at least 10 over the last 10 rounds
    pub diverging: bool,
}

/// Condenses a trace into per-node final/max errors, threshold-crossing
/// rounds, and a divergence flag.
pub fn summarize(trace: &SimulationTrace) -> Vec<NodeSummary> {
    let mut out = Vec::new();
    for &node in &trace.regular {
        let errs: Vec<(usize, f64)> = trace
            .node_records(node)
            .iter()
            .map(|r| (r.round, r.error_norm))
            .collect();
        if errs.is_empty() {
            continue;
        }
        let final_error = errs.last().unwrap().1;
        let max_error = errs.iter().map(|&(_, e)| e).fold(0.0, f64::max);
        let first_below = |tol: f64| errs.iter().find(|&&(_, e)| e < tol).map(|&(r, _)| r);
        let diverging = if errs.len() > 10 {
            let old = errs[errs.len() - 11].1;
            final_error >= 10.0 * old && final_error > 0.0
        } else {
            false
        };
        out.push(NodeSummary {
            node,
            final_error,
            max_error,
            first_below_1e3: first_below(1e-3),
            first_below_1e6: first_below(1e-6),
            diverging,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::RuntimePolicy;
    use crate::presets::{scalar_demo_network, scalar_demo_plant};
    use nalgebra::dmatrix;

    /// The 7-node demo scenario: scalar unstable plant, gain 1.5 at the
    /// sensing nodes, uniform random initial estimates.
    pub(crate) fn demo_scenario(mode: EstimatorMode) -> Scenario {
        let mut s = Scenario::new(scalar_demo_plant(), scalar_demo_network(), 1, 100).unwrap();
        s.estimator_mode = mode;
        s.seed = 7;
        s.initial_estimates = InitialEstimates::RandomUniform { low: 0.0, high: 1.0 };
        for node in 0..3 {
            s.observer_gains.insert(node, dmatrix![1.5]);
        }
        s.attack.compromised = [0].into_iter().collect();
        s.attack
            .runtime_policies
            .insert(0, RuntimePolicy::Constant(0.001));
        s
    }

    #[test]
    fn record_count_and_round_range() {
        let mut s = demo_scenario(EstimatorMode::ResilientLfre);
        s.rounds = 5;
        let trace = run(&s).unwrap();
        // 6 regular nodes, rounds 0..=5
        assert_eq!(trace.records.len(), 6 * 6);
        assert_eq!(trace.node_records(3).len(), 6);
        assert!(trace.records.iter().all(|r| r.round <= 5));
        assert!(!trace.regular.contains(&0));
    }

    #[test]
    fn resilient_mode_converges() {
        let trace = run(&demo_scenario(EstimatorMode::ResilientLfre)).unwrap();
        for s in summarize(&trace) {
            assert!(
                s.final_error < 1e-6,
                "node {} final error {}",
                s.node,
                s.final_error
            );
            assert!(s.first_below_1e6.is_some_and(|r| r <= 80));
            assert!(!s.diverging);
        }
    }

    #[test]
    fn plain_consensus_diverges_under_attack() {
        let mut s = demo_scenario(EstimatorMode::PlainConsensus);
        s.rounds = 60;
        let trace = run(&s).unwrap();
        for s in summarize(&trace) {
            if s.node >= 3 {
                assert!(s.final_error > 1e3, "node {} error {}", s.node, s.final_error);
                assert!(s.diverging);
            }
        }
    }

    #[test]
    fn all_honest_script_matches_no_attack_run() {
        let mut with_script = demo_scenario(EstimatorMode::ResilientLfre);
        with_script.attack.runtime_policies.clear();
        with_script.rounds = 30;
        let mut no_attack = with_script.clone();
        no_attack.attack = AttackScript::empty();
        let a = run(&with_script).unwrap();
        let b = run(&no_attack).unwrap();
        // node 0 is regular in run b but compromised-honest in run a; compare
        // the shared regular nodes bit for bit
        for node in 1..7 {
            let ra = a.node_records(node);
            let rb = b.node_records(node);
            assert_eq!(ra.len(), rb.len());
            for (x, y) in ra.iter().zip(rb.iter()) {
                assert_eq!(x.estimate, y.estimate, "node {node} round {}", x.round);
            }
        }
    }

    #[test]
    fn determinism_across_runs() {
        let s = demo_scenario(EstimatorMode::ResilientLfre);
        let a = run(&s).unwrap();
        let b = run(&s).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.medags, b.medags);
    }

    #[test]
    fn design_phase_failure_reports_partial_activation() {
        use crate::adversary::DesignPolicy;
        let mut s = demo_scenario(EstimatorMode::ResilientLfre);
        s.attack.design_policies.insert(0, DesignPolicy::Silent);
        match run(&s) {
            Err(Error::DesignPhaseFailed { block, activated, .. }) => {
                assert_eq!(block, 0);
                assert!(!activated.contains(&3));
            }
            other => panic!("expected design-phase failure, got {other:?}"),
        }
    }

    #[test]
    fn all_source_network_converges_locally() {
        let net = scalar_demo_network();
        let plant = {
            use nalgebra::{DMatrix, DVector};
            let a = DMatrix::from_element(1, 1, 2.0);
            let observations = (0..7).map(|_| DMatrix::from_element(1, 1, 1.0)).collect();
            crate::plant::LtiPlant::new(a, observations, DVector::from_element(1, 0.5)).unwrap()
        };
        let mut s = Scenario::new(plant, net, 1, 10).unwrap();
        s.initial_estimates = InitialEstimates::RandomUniform { low: 0.0, high: 1.0 };
        let trace = run(&s).unwrap();
        assert!(trace.medags.is_empty());
        for sum in summarize(&trace) {
            // dead-beat observers: exact after one step
            assert!(sum.final_error <= 1e-9);
            assert!(sum.first_below_1e6.is_some_and(|r| r <= 2));
        }
    }

    #[test]
    fn non_f_local_attack_only_warns() {
        let mut s = demo_scenario(EstimatorMode::ResilientLfre);
        s.rounds = 3;
        s.attack.compromised = [0, 1].into_iter().collect();
        s.attack
            .runtime_policies
            .insert(1, RuntimePolicy::Constant(0.001));
        let trace = run(&s).unwrap();
        assert!(!trace.warnings.is_empty());
    }

    #[test]
    fn summarize_single_round() {
        let mut s = demo_scenario(EstimatorMode::ResilientLfre);
        s.rounds = 1;
        let trace = run(&s).unwrap();
        let sums = summarize(&trace);
        assert_eq!(sums.len(), 6);
        for n in sums {
            assert!(!n.diverging);
        }
    }
}
