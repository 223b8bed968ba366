//! Construction and validation of the per-eigenvalue routing DAG.
//!
//! The construction is a synchronous round protocol: sources announce
//! themselves in round 1, and every other node activates once it has heard
//! from at least `2f+1` distinct in-neighbors (accumulated across rounds),
//! recording exactly the neighbors heard so far as its accepted set.
//! Messages sent in round `k` are delivered at the start of round `k+1`.
//! Compromised nodes may deviate through a design-phase attack policy.

use std::collections::{BTreeMap, BTreeSet};

use crate::adversary::{design_message, AttackScript, DesignDecision};
use crate::graph::SensorNetwork;
use crate::NodeId;

/// Routing DAG for one eigen block: per-node accepted in-neighbors, the level
/// partition of the participating regular nodes, and the round at which
/// construction terminated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Medag {
    pub eigen_block: usize,
    /// accepted in-neighbors in arrival order (earlier rounds first, ties by
    /// ascending node id); empty for sources
    pub accepted_neighbors: BTreeMap<NodeId, Vec<NodeId>>,
    /// level q holds the regular nodes that activated in round q+1
    pub levels: Vec<BTreeSet<NodeId>>,
    pub termination_round: usize,
    /// activation flag per node, regular and compromised alike
    pub counters: BTreeMap<NodeId, bool>,
}

impl Medag {
    /// Nodes of the given level, or an empty set past the last level.
    pub fn level(&self, q: usize) -> BTreeSet<NodeId> {
        self.levels.get(q).cloned().unwrap_or_default()
    }

    /// Level index of a regular participating node, if it activated.
    pub fn level_of(&self, node: NodeId) -> Option<usize> {
        self.levels.iter().position(|l| l.contains(&node))
    }
}

/// Default round budget: a counter flips at most once per node, so `N + 1`
/// rounds cover every terminating execution.
pub fn default_max_rounds(net: &SensorNetwork) -> usize {
    net.node_count() + 1
}

/// Runs the construction protocol; returns the DAG if every regular node
/// activated within `max_rounds`, together with the set of nodes that did
/// activate (for diagnostics on failure).
pub fn construct_medag_trace(
    net: &SensorNetwork,
    eigen_block: usize,
    sources: &BTreeSet<NodeId>,
    f: usize,
    design_adversary: Option<&AttackScript>,
    max_rounds: usize,
) -> (Option<Medag>, BTreeSet<NodeId>) {
    let n = net.node_count();
    let empty = BTreeSet::new();
    let compromised = design_adversary.map_or(&empty, |s| &s.compromised);
    let threshold = 2 * f + 1;

    let mut counter = vec![false; n];
    // distinct senders heard so far, in arrival order
    let mut arrived: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    let mut arrived_set: Vec<BTreeSet<NodeId>> = vec![BTreeSet::new(); n];
    let mut accepted_neighbors: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    let mut levels: Vec<BTreeSet<NodeId>> = Vec::new();
    let mut termination = None;
    let mut pending: BTreeSet<NodeId> = BTreeSet::new(); // senders of the current round

    for round in 1..=max_rounds {
        // deliver last round's messages; BTreeSet order makes same-round
        // arrivals ascend by node id
        let delivered = std::mem::take(&mut pending);
        for &sender in &delivered {
            for &recipient in net.out_neighbors(sender) {
                if !counter[recipient] && arrived_set[recipient].insert(sender) {
                    arrived[recipient].push(sender);
                }
            }
        }

        // simultaneous activations based on the delivered state
        let mut activated_now: Vec<NodeId> = Vec::new();
        for node in net.nodes() {
            if counter[node] {
                continue;
            }
            if let Some(script) = design_adversary.filter(|s| s.compromised.contains(&node)) {
                match design_message(script, node, round) {
                    DesignDecision::Send => {
                        counter[node] = true;
                        pending.insert(node);
                        continue;
                    }
                    DesignDecision::Silent => continue,
                    DesignDecision::FollowProtocol => {}
                }
            }
            let activates = if sources.contains(&node) {
                round == 1
            } else {
                arrived[node].len() >= threshold
            };
            if activates {
                counter[node] = true;
                pending.insert(node);
                if !compromised.contains(&node) {
                    activated_now.push(node);
                    if !sources.contains(&node) {
                        accepted_neighbors.insert(node, arrived[node].clone());
                    } else {
                        accepted_neighbors.insert(node, Vec::new());
                    }
                }
            }
        }
        if !activated_now.is_empty() {
            while levels.len() < round {
                levels.push(BTreeSet::new());
            }
            levels[round - 1].extend(activated_now);
        }

        let all_regular_done = net
            .nodes()
            .filter(|i| !compromised.contains(i))
            .all(|i| counter[i]);
        if all_regular_done {
            termination = Some(round);
            break;
        }
    }

    let activated: BTreeSet<NodeId> = net.nodes().filter(|&i| counter[i]).collect();
    match termination {
        Some(t) => {
            // trailing empty levels can appear when only compromised nodes
            // activated in some round; drop them
            while levels.last().is_some_and(|l| l.is_empty()) {
                levels.pop();
            }
            let counters = net.nodes().map(|i| (i, counter[i])).collect();
            (
                Some(Medag {
                    eigen_block,
                    accepted_neighbors,
                    levels,
                    termination_round: t,
                    counters,
                }),
                activated,
            )
        }
        None => (None, activated),
    }
}

/// Convenience wrapper dropping the diagnostic activation set.
pub fn construct_medag(
    net: &SensorNetwork,
    eigen_block: usize,
    sources: &BTreeSet<NodeId>,
    f: usize,
    design_adversary: Option<&AttackScript>,
    max_rounds: usize,
) -> Option<Medag> {
    construct_medag_trace(net, eigen_block, sources, f, design_adversary, max_rounds).0
}

/// Validation outcome: re-derived levels over the regular nodes and the list
/// of violated structural properties (empty when the DAG is sound).
#[derive(Debug, Clone)]
pub struct MedagReport {
    /// level partition of R = V \ adversarial re-derived from the accepted
    /// neighbor sets
    pub levels: Vec<BTreeSet<NodeId>>,
    pub violations: Vec<String>,
}

impl MedagReport {
    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the two defining DAG properties against an arbitrary adversarial
/// set: every regular non-source participant has at least `2f+1` accepted
/// in-neighbors, and its regular accepted neighbors all sit in strictly
/// lower levels (level 0 being the regular sources).
pub fn validate_medag(
    medag: &Medag,
    net: &SensorNetwork,
    sources: &BTreeSet<NodeId>,
    f: usize,
    adversarial: &BTreeSet<NodeId>,
) -> MedagReport {
    let mut violations = Vec::new();
    let regular: BTreeSet<NodeId> = net.nodes().filter(|i| !adversarial.contains(i)).collect();
    let threshold = 2 * f + 1;

    // level derivation: sources at 0, others one past their deepest regular
    // accepted neighbor; iterate to a fixed point (the accepted sets should
    // be acyclic among regular nodes, so N passes suffice)
    let mut level: BTreeMap<NodeId, usize> = BTreeMap::new();
    for &s in sources {
        if regular.contains(&s) {
            level.insert(s, 0);
        }
    }
    for _ in 0..net.node_count() {
        let mut changed = false;
        for &i in &regular {
            if sources.contains(&i) {
                continue;
            }
            let Some(accepted) = medag.accepted_neighbors.get(&i) else {
                continue;
            };
            let reg_neighbors: Vec<NodeId> = accepted
                .iter()
                .copied()
                .filter(|l| regular.contains(l))
                .collect();
            if reg_neighbors.iter().all(|l| level.contains_key(l)) {
                let next = 1 + reg_neighbors
                    .iter()
                    .map(|l| level[l])
                    .max()
                    .unwrap_or_default();
                if level.get(&i) != Some(&next) {
                    level.insert(i, next);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }

    for &i in &regular {
        if sources.contains(&i) {
            if medag
                .accepted_neighbors
                .get(&i)
                .is_some_and(|a| !a.is_empty())
            {
                violations.push(format!("source node {i} has a nonempty accepted set"));
            }
            continue;
        }
        let Some(accepted) = medag.accepted_neighbors.get(&i) else {
            violations.push(format!("regular node {i} did not participate"));
            continue;
        };
        if accepted.len() < threshold {
            violations.push(format!(
                "node {i} accepted {} neighbors, needs at least {threshold}",
                accepted.len()
            ));
        }
        let Some(&li) = level.get(&i) else {
            violations.push(format!(
                "node {i} has no derivable level (cycle or unactivated neighbor)"
            ));
            continue;
        };
        for l in accepted.iter().filter(|l| regular.contains(l)) {
            match level.get(l) {
                Some(&ll) if ll < li => {}
                Some(&ll) => violations.push(format!(
                    "accepted neighbor {l} of node {i} sits at level {ll} >= {li}"
                )),
                None => violations.push(format!(
                    "accepted neighbor {l} of node {i} has no level"
                )),
            }
        }
        for l in accepted {
            if !net.in_neighbors(i).contains(l) {
                violations.push(format!("accepted neighbor {l} is not an in-neighbor of {i}"));
            }
        }
    }

    let mut levels: Vec<BTreeSet<NodeId>> = Vec::new();
    for (&i, &q) in &level {
        while levels.len() <= q {
            levels.push(BTreeSet::new());
        }
        levels[q].insert(i);
    }
    MedagReport { levels, violations }
}

/// True iff the induced accepted-neighbor subgraph restricted to the given
/// regular nodes is acyclic (checked by Kahn-style topological elimination).
pub fn is_acyclic_among(medag: &Medag, regular: &BTreeSet<NodeId>) -> bool {
    let participants: BTreeSet<NodeId> = medag
        .accepted_neighbors
        .keys()
        .copied()
        .filter(|i| regular.contains(i))
        .collect();
    let mut indeg: BTreeMap<NodeId, usize> = BTreeMap::new();
    let mut out: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    for &i in &participants {
        let deps: Vec<NodeId> = medag.accepted_neighbors[&i]
            .iter()
            .copied()
            .filter(|l| participants.contains(l))
            .collect();
        indeg.insert(i, deps.len());
        for d in deps {
            out.entry(d).or_default().push(i);
        }
    }
    let mut queue: Vec<NodeId> = indeg
        .iter()
        .filter(|&(_, &d)| d == 0)
        .map(|(&i, _)| i)
        .collect();
    let mut seen = 0;
    while let Some(i) = queue.pop() {
        seen += 1;
        for &j in out.get(&i).into_iter().flatten() {
            let d = indeg.get_mut(&j).unwrap();
            *d -= 1;
            if *d == 0 {
                queue.push(j);
            }
        }
    }
    seen == participants.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::DesignPolicy;
    use crate::graph::{is_strongly_r_robust, percolate};
    use crate::netgen::{generate, GenSpec, GraphModel, SourceRule};
    use crate::presets::scalar_demo_network;
    use rand::{Rng, SeedableRng};

    fn sources_012() -> BTreeSet<NodeId> {
        [0, 1, 2].into_iter().collect()
    }

    #[test]
    fn seven_node_demo_exact_output() {
        let net = scalar_demo_network();
        let m = construct_medag(&net, 0, &sources_012(), 1, None, default_max_rounds(&net))
            .expect("construction terminates");
        let expected: Vec<NodeId> = vec![0, 1, 2];
        for i in [3, 4, 5] {
            assert_eq!(m.accepted_neighbors[&i], expected, "node {i}");
        }
        assert_eq!(m.accepted_neighbors[&6], vec![3, 4, 5]);
        assert_eq!(m.levels.len(), 3);
        assert_eq!(m.level(0), sources_012());
        assert_eq!(m.level(1), [3, 4, 5].into_iter().collect());
        assert_eq!(m.level(2), [6].into_iter().collect());
        assert_eq!(m.termination_round, 3);
    }

    #[test]
    fn all_source_network_is_single_level() {
        let net = scalar_demo_network();
        let all: BTreeSet<NodeId> = net.nodes().collect();
        let m = construct_medag(&net, 0, &all, 1, None, default_max_rounds(&net)).unwrap();
        assert_eq!(m.termination_round, 1);
        assert_eq!(m.levels, vec![all.clone()]);
        assert!(m.accepted_neighbors.values().all(|a| a.is_empty()));
    }

    #[test]
    fn validation_passes_for_every_one_local_set() {
        let net = scalar_demo_network();
        let m = construct_medag(&net, 0, &sources_012(), 1, None, default_max_rounds(&net))
            .unwrap();
        let mut sets: Vec<BTreeSet<NodeId>> = vec![BTreeSet::new()];
        sets.extend(net.nodes().map(|i| [i].into_iter().collect()));
        assert_eq!(sets.len(), 8);
        for adv in sets {
            let report = validate_medag(&m, &net, &sources_012(), 1, &adv);
            assert!(report.pass(), "adv {adv:?}: {:?}", report.violations);
        }
    }

    #[test]
    fn validation_levels_with_excluded_source() {
        let net = scalar_demo_network();
        let m = construct_medag(&net, 0, &sources_012(), 1, None, default_max_rounds(&net))
            .unwrap();
        let adv: BTreeSet<NodeId> = [0].into_iter().collect();
        let report = validate_medag(&m, &net, &sources_012(), 1, &adv);
        assert!(report.pass());
        assert_eq!(report.levels[0], [1, 2].into_iter().collect());
        assert_eq!(report.levels[1], [3, 4, 5].into_iter().collect());
        assert_eq!(report.levels[2], [6].into_iter().collect());
    }

    #[test]
    fn too_few_accepted_neighbors_is_flagged() {
        let net = scalar_demo_network();
        let mut m = construct_medag(&net, 0, &sources_012(), 1, None, default_max_rounds(&net))
            .unwrap();
        m.accepted_neighbors.insert(3, vec![0, 1]); // 2f at f=1
        let report = validate_medag(&m, &net, &sources_012(), 1, &BTreeSet::new());
        assert!(!report.pass());
        assert!(report.violations.iter().any(|v| v.contains("node 3")));
    }

    #[test]
    fn acyclic_and_level_monotone() {
        let net = scalar_demo_network();
        let m = construct_medag(&net, 0, &sources_012(), 1, None, default_max_rounds(&net))
            .unwrap();
        let regular: BTreeSet<NodeId> = net.nodes().collect();
        assert!(is_acyclic_among(&m, &regular));
        for (q, level) in m.levels.iter().enumerate() {
            for &i in level {
                for &l in &m.accepted_neighbors[&i] {
                    let lq = m.level_of(l).expect("neighbor leveled");
                    assert!(lq < q.max(1), "neighbor {l} of {i} at level {lq} vs {q}");
                }
            }
        }
    }

    #[test]
    fn determinism() {
        let net = scalar_demo_network();
        let mut script = AttackScript::empty();
        script.compromised = [1].into_iter().collect();
        script
            .design_policies
            .insert(1, DesignPolicy::ScriptedRounds([2].into_iter().collect()));
        let a = construct_medag(&net, 0, &sources_012(), 1, Some(&script), 8);
        let b = construct_medag(&net, 0, &sources_012(), 1, Some(&script), 8);
        assert_eq!(a, b);
    }

    #[test]
    fn silent_source_can_stall_a_3_robust_graph() {
        // the demo graph is strongly 3-robust but below the 3f+1 = 4 margin,
        // so a silent source may block construction
        let net = scalar_demo_network();
        assert!(is_strongly_r_robust(&net, &sources_012(), 3));
        assert!(!is_strongly_r_robust(&net, &sources_012(), 4));
        let mut script = AttackScript::empty();
        script.compromised = [0].into_iter().collect();
        script.design_policies.insert(0, DesignPolicy::Silent);
        let (m, activated) =
            construct_medag_trace(&net, 0, &sources_012(), 1, Some(&script), 10);
        assert!(m.is_none());
        assert!(!activated.contains(&3));
    }

    #[test]
    fn robust_margin_tolerates_silent_design_adversaries() {
        // strongly (3f+1)-robust instances terminate under any silent f-local
        // design adversary
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        let mut tested = 0;
        while tested < 25 {
            let n = rng.gen_range(8..=11);
            let spec = GenSpec {
                model: GraphModel::Er { n, p: 0.7 },
                source_rule: SourceRule::RandomSubset(5),
                r: 4,
                seed: rng.gen(),
            };
            let net = generate(&spec).unwrap();
            let sources = crate::netgen::sample_sources(&spec, &net).unwrap();
            if !is_strongly_r_robust(&net, &sources, 4) {
                continue;
            }
            tested += 1;
            for adv_node in net.nodes() {
                let adv: BTreeSet<NodeId> = [adv_node].into_iter().collect();
                if !crate::graph::is_f_local(&net, &adv, 1) {
                    continue;
                }
                let mut script = AttackScript::empty();
                script.compromised = adv.clone();
                script.design_policies.insert(adv_node, DesignPolicy::Silent);
                let m = construct_medag(&net, 0, &sources, 1, Some(&script), n + 1)
                    .expect("4-robust graph terminates under silent 1-local adversary");
                let report = validate_medag(&m, &net, &sources, 1, &adv);
                assert!(report.pass(), "{:?}", report.violations);
            }
        }
    }

    #[test]
    fn structural_equivalence_on_small_graphs() {
        // no-adversary construction succeeds iff the sources percolate at
        // threshold 2f+1
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        for _ in 0..300 {
            let n = rng.gen_range(2..=5);
            let mut edges = Vec::new();
            for i in 0..n {
                for j in 0..n {
                    if i != j && rng.gen_bool(0.4) {
                        edges.push((i, j));
                    }
                }
            }
            let net = SensorNetwork::new(n, edges).unwrap();
            let src_count = rng.gen_range(1..=n);
            let sources: BTreeSet<NodeId> = (0..src_count).collect();
            for f in 0..=1 {
                let r = 2 * f + 1;
                let ok =
                    construct_medag(&net, 0, &sources, f, None, n + 1).is_some();
                let robust = is_strongly_r_robust(&net, &sources, r);
                assert_eq!(ok, robust, "n={n} f={f} sources={sources:?}");
                if ok {
                    let all: BTreeSet<NodeId> = net.nodes().collect();
                    let perc = percolate(&net, &sources, r);
                    assert_eq!(perc.final_active, all);
                }
            }
        }
    }
}
