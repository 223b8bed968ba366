//! Byzantine attack scripts for both protocol phases: design-time (DAG
//! construction misbehavior) and run-time (estimation-phase lies), including
//! per-recipient differing messages.
//!
//! Attacks are fixed scripts rather than adaptive programs; randomized
//! policies carry explicit seeds so every run is reproducible.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::graph::{self, SensorNetwork};
use crate::NodeId;

/// How a compromised node behaves during DAG construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DesignPolicy {
    /// indistinguishable from a regular node
    Honest,
    /// never transmits
    Silent,
    /// transmits "1" in round 1 regardless of its counter
    BroadcastEarly,
    /// transmits "1" in exactly the listed rounds
    ScriptedRounds(BTreeSet<usize>),
}

/// How a compromised node behaves during the estimation phase.
#[derive(Debug, Clone, PartialEq)]
pub enum RuntimePolicy {
    /// transmits its honestly computed estimate
    Honest,
    /// transmits nothing
    Silent,
    /// every component of every transmitted block estimate equals this value
    Constant(f64),
    /// components drawn uniformly from [low, high); deterministic per
    /// (seed, sender, recipient, block, round)
    Random { seed: u64, low: f64, high: f64 },
    /// transmits `factor` times the true block state
    ScaledTruth(f64),
    /// a different policy per recipient; unlisted recipients get honest values
    PerRecipient(BTreeMap<NodeId, RuntimePolicy>),
}

/// Full adversary specification for one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackScript {
    pub compromised: BTreeSet<NodeId>,
    /// per-node design-phase policy; unlisted compromised nodes are honest
    pub design_policies: BTreeMap<NodeId, DesignPolicy>,
    /// per-node estimation-phase policy; unlisted compromised nodes are honest
    pub runtime_policies: BTreeMap<NodeId, RuntimePolicy>,
}

impl AttackScript {
    /// No compromised nodes at all.
    pub fn empty() -> Self {
        AttackScript {
            compromised: BTreeSet::new(),
            design_policies: BTreeMap::new(),
            runtime_policies: BTreeMap::new(),
        }
    }

    pub fn design_policy(&self, node: NodeId) -> &DesignPolicy {
        self.design_policies.get(&node).unwrap_or(&DesignPolicy::Honest)
    }

    pub fn runtime_policy(&self, node: NodeId) -> &RuntimePolicy {
        self.runtime_policies.get(&node).unwrap_or(&RuntimePolicy::Honest)
    }

    /// Whether the compromised set is f-local on the given network. Guarantees
    /// lapse when this fails, but running such a scenario is still allowed.
    pub fn is_f_local(&self, net: &SensorNetwork, f: usize) -> bool {
        graph::is_f_local(net, &self.compromised, f)
    }
}

/// What a compromised node does in one construction round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignDecision {
    /// behave exactly like a regular node this round
    FollowProtocol,
    Send,
    Silent,
}

/// Resolves the design-phase policy of `sender` for one round. Round numbers
/// are 1-based to match the protocol description.
pub fn design_message(script: &AttackScript, sender: NodeId, round: usize) -> DesignDecision {
    debug_assert!(script.compromised.contains(&sender));
    match script.design_policy(sender) {
        DesignPolicy::Honest => DesignDecision::FollowProtocol,
        DesignPolicy::Silent => DesignDecision::Silent,
        DesignPolicy::BroadcastEarly => {
            if round == 1 {
                DesignDecision::Send
            } else {
                DesignDecision::Silent
            }
        }
        DesignPolicy::ScriptedRounds(rounds) => {
            if rounds.contains(&round) {
                DesignDecision::Send
            } else {
                DesignDecision::Silent
            }
        }
    }
}

/// SplitMix64 step, used to fold identifying integers into one RNG seed.
fn mix(state: u64, value: u64) -> u64 {
    let mut z = state
        .wrapping_add(value)
        .wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic per-edge RNG: the same (seed, sender, recipient, block,
/// round) always produces the same stream.
pub fn edge_rng(seed: u64, sender: NodeId, recipient: NodeId, block: usize, round: usize) -> ChaCha8Rng {
    let mut s = mix(seed, 0x5ee_d);
    s = mix(s, sender as u64);
    s = mix(s, recipient as u64);
    s = mix(s, block as u64);
    s = mix(s, round as u64);
    ChaCha8Rng::seed_from_u64(s)
}

/// Value that `sender` transmits to `recipient` for one eigen block in one
/// estimation round; `None` models refusal to transmit.
///
/// `truth` is the true block state (read only by the scaled-truth policy) and
/// `honest_estimate` the estimate an honest node in the same position would
/// send.
#[allow(clippy::too_many_arguments)]
pub fn runtime_message(
    script: &AttackScript,
    sender: NodeId,
    recipient: NodeId,
    block: usize,
    truth: &DVector<f64>,
    honest_estimate: &DVector<f64>,
    round: usize,
    seed: u64,
) -> Option<DVector<f64>> {
    debug_assert!(script.compromised.contains(&sender));
    policy_message(
        script.runtime_policy(sender),
        sender,
        recipient,
        block,
        truth,
        honest_estimate,
        round,
        seed,
    )
}

#[allow(clippy::too_many_arguments)]
fn policy_message(
    policy: &RuntimePolicy,
    sender: NodeId,
    recipient: NodeId,
    block: usize,
    truth: &DVector<f64>,
    honest_estimate: &DVector<f64>,
    round: usize,
    seed: u64,
) -> Option<DVector<f64>> {
    let dim = honest_estimate.len();
    match policy {
        RuntimePolicy::Honest => Some(honest_estimate.clone()),
        RuntimePolicy::Silent => None,
        RuntimePolicy::Constant(v) => Some(DVector::from_element(dim, *v)),
        RuntimePolicy::Random { seed: pol_seed, low, high } => {
            let mut rng = edge_rng(seed ^ *pol_seed, sender, recipient, block, round);
            Some(DVector::from_fn(dim, |_, _| rng.gen_range(*low..*high)))
        }
        RuntimePolicy::ScaledTruth(factor) => Some(truth * *factor),
        RuntimePolicy::PerRecipient(map) => {
            let inner = map.get(&recipient).unwrap_or(&RuntimePolicy::Honest);
            policy_message(inner, sender, recipient, block, truth, honest_estimate, round, seed)
        }
    }
}
