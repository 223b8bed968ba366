//! Directed sensor-network structure and the feasibility / necessity checks:
//! f-local sets, r-reachability, bootstrap percolation, strong r-robustness,
//! critical sets, pair cuts and the tolerable-adversary bound.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::plant::LtiPlant;
use crate::spectral::{self, SpectralBasis};
use crate::NodeId;

/// Default guard for the exponential searches (critical sets, pair cuts).
pub const DEFAULT_MAX_NODES: usize = 12;

/// Directed communication graph over nodes `0..N-1`. An edge `(j, i)` means
/// node `j` can transmit to node `i`; `in_neighbors(i)` is the set of senders
/// node `i` can hear.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SensorNetwork {
    node_count: usize,
    edges: BTreeSet<(NodeId, NodeId)>,
    in_neighbors: Vec<BTreeSet<NodeId>>,
    out_neighbors: Vec<BTreeSet<NodeId>>,
}

impl SensorNetwork {
    pub fn new<I>(node_count: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (NodeId, NodeId)>,
    {
        let mut net = SensorNetwork {
            node_count,
            edges: BTreeSet::new(),
            in_neighbors: vec![BTreeSet::new(); node_count],
            out_neighbors: vec![BTreeSet::new(); node_count],
        };
        for (from, to) in edges {
            net.insert_edge(from, to)?;
        }
        Ok(net)
    }

    fn insert_edge(&mut self, from: NodeId, to: NodeId) -> Result<()> {
        if from >= self.node_count || to >= self.node_count {
            return Err(Error::Config(format!(
                "edge ({from}, {to}) references a node outside 0..{}",
                self.node_count
            )));
        }
        if from == to {
            return Err(Error::Config(format!("self-loop on node {from}")));
        }
        self.edges.insert((from, to));
        self.in_neighbors[to].insert(from);
        self.out_neighbors[from].insert(to);
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> &BTreeSet<(NodeId, NodeId)> {
        &self.edges
    }

    pub fn in_neighbors(&self, node: NodeId) -> &BTreeSet<NodeId> {
        &self.in_neighbors[node]
    }

    pub fn out_neighbors(&self, node: NodeId) -> &BTreeSet<NodeId> {
        &self.out_neighbors[node]
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        0..self.node_count
    }

    /// Grows the network by one node with the given incoming and outgoing
    /// edges; returns the id of the new node.
    pub fn add_node<I, O>(&mut self, incoming: I, outgoing: O) -> Result<NodeId>
    where
        I: IntoIterator<Item = NodeId>,
        O: IntoIterator<Item = NodeId>,
    {
        let id = self.node_count;
        self.node_count += 1;
        self.in_neighbors.push(BTreeSet::new());
        self.out_neighbors.push(BTreeSet::new());
        for from in incoming {
            self.insert_edge(from, id)?;
        }
        for to in outgoing {
            self.insert_edge(id, to)?;
        }
        Ok(id)
    }

    /// Induced subgraph after deleting `removed`; surviving nodes are
    /// renumbered in ascending order. Returns the subgraph and the map from
    /// old ids to new ids.
    pub fn remove_nodes(&self, removed: &BTreeSet<NodeId>) -> (SensorNetwork, Vec<Option<NodeId>>) {
        let mut remap = vec![None; self.node_count];
        let mut next = 0;
        for v in 0..self.node_count {
            if !removed.contains(&v) {
                remap[v] = Some(next);
                next += 1;
            }
        }
        let edges: Vec<(NodeId, NodeId)> = self
            .edges
            .iter()
            .filter_map(|&(a, b)| Some((remap[a]?, remap[b]?)))
            .collect();
        let net = SensorNetwork::new(next, edges).expect("induced subgraph is valid");
        (net, remap)
    }
}

/// True iff every node outside `candidate` has at most `f` in-neighbors
/// inside it.
pub fn is_f_local(net: &SensorNetwork, candidate: &BTreeSet<NodeId>, f: usize) -> bool {
    net.nodes()
        .filter(|v| !candidate.contains(v))
        .all(|v| net.in_neighbors(v).intersection(candidate).count() <= f)
}

/// True iff some member of `subset` has at least `r` in-neighbors outside it.
pub fn is_r_reachable(net: &SensorNetwork, subset: &BTreeSet<NodeId>, r: usize) -> Result<bool> {
    if subset.is_empty() {
        return Err(Error::Precondition("r-reachability of the empty set".into()));
    }
    Ok(subset
        .iter()
        .any(|&v| net.in_neighbors(v).difference(subset).count() >= r))
}

/// Outcome of a bootstrap percolation run. `rounds[0]` is the seed; each
/// later entry holds the nodes newly activated in that round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Percolation {
    pub final_active: BTreeSet<NodeId>,
    pub rounds: Vec<BTreeSet<NodeId>>,
}

/// Threshold-r bootstrap percolation over in-neighbors: an inactive node
/// activates once at least `r` of its in-neighbors are active.
pub fn percolate(net: &SensorNetwork, seed: &BTreeSet<NodeId>, r: usize) -> Percolation {
    assert!(r >= 1, "percolation threshold must be positive");
    let n = net.node_count();
    let mut active = vec![false; n];
    let mut count = vec![0usize; n];
    let seed: BTreeSet<NodeId> = seed.iter().copied().filter(|&v| v < n).collect();
    for &v in &seed {
        active[v] = true;
    }
    let mut rounds = vec![seed.clone()];
    let mut frontier = seed;
    while !frontier.is_empty() {
        let mut next = BTreeSet::new();
        for &v in &frontier {
            for &w in net.out_neighbors(v) {
                if !active[w] {
                    count[w] += 1;
                    if count[w] >= r {
                        next.insert(w);
                    }
                }
            }
        }
        for &v in &next {
            active[v] = true;
        }
        if next.is_empty() {
            break;
        }
        rounds.push(next.clone());
        frontier = next;
    }
    let final_active = (0..n).filter(|&v| active[v]).collect();
    Percolation {
        final_active,
        rounds,
    }
}

/// Percolation-based strong r-robustness test (every node activates from
/// `sources`). Vacuously true when `sources` covers all nodes.
pub fn is_strongly_r_robust(net: &SensorNetwork, sources: &BTreeSet<NodeId>, r: usize) -> bool {
    percolate(net, sources, r).final_active.len() == net.node_count()
}

/// Per-block verdicts of the r-feasibility check.
#[derive(Debug, Clone)]
pub struct RFeasibilityReport {
    pub r: usize,
    /// (block id, canonical eigenvalue, strongly r-robust w.r.t. its sources)
    pub per_block: Vec<(usize, num_complex::Complex<f64>, bool)>,
    pub feasible: bool,
}

/// Runs the strong r-robustness test for the source set of every block in
/// `Ω_U`.
pub fn check_r_feasible(net: &SensorNetwork, basis: &SpectralBasis, r: usize) -> RFeasibilityReport {
    let mut per_block = Vec::new();
    let mut feasible = true;
    for &j in basis.omega_u() {
        let ok = is_strongly_r_robust(net, basis.source_set(j), r);
        feasible &= ok;
        per_block.push((j, basis.blocks()[j].eigenvalue, ok));
    }
    RFeasibilityReport {
        r,
        per_block,
        feasible,
    }
}

fn subsets_by_cardinality(n: usize) -> Vec<BTreeSet<NodeId>> {
    // all subsets of 0..n, ordered by increasing cardinality then
    // lexicographic by sorted node ids
    let mut all: Vec<BTreeSet<NodeId>> = (0u64..(1 << n))
        .map(|mask| (0..n).filter(|&v| mask >> v & 1 == 1).collect())
        .collect();
    all.sort_by(|a, b| {
        a.len()
            .cmp(&b.len())
            .then_with(|| a.iter().cmp(b.iter()))
    });
    all
}

fn guard(n: usize, max_nodes: usize) -> Result<()> {
    if n > max_nodes {
        return Err(Error::ScaleLimit {
            actual: n,
            max: max_nodes,
        });
    }
    Ok(())
}

/// All inclusion-minimal node sets whose measurement removal destroys
/// detectability of the remaining stacked system. Exponential; guarded by
/// `max_nodes`.
pub fn minimal_critical_sets(plant: &LtiPlant, max_nodes: usize) -> Result<Vec<BTreeSet<NodeId>>> {
    let n = plant.node_count();
    guard(n, max_nodes)?;
    let mut minimal: Vec<BTreeSet<NodeId>> = Vec::new();
    for candidate in subsets_by_cardinality(n) {
        if candidate.is_empty() {
            continue;
        }
        if minimal.iter().any(|m| m.is_subset(&candidate)) {
            continue;
        }
        let keep: Vec<NodeId> = (0..n).filter(|v| !candidate.contains(v)).collect();
        if !spectral::is_detectable_stacked(plant, &keep) {
            minimal.push(candidate);
        }
    }
    Ok(minimal)
}

/// Which bound the two halves of a pair cut must satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutKind {
    FLocal,
    FTotal,
}

/// Witness for an f-local or f-total pair cut with respect to the virtual
/// source attached to a critical set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairCut {
    pub cut: BTreeSet<NodeId>,
    pub part_one: BTreeSet<NodeId>,
    pub part_two: BTreeSet<NodeId>,
    /// nodes still reachable from the virtual source after removing the cut
    pub source_side: BTreeSet<NodeId>,
    /// nodes unreachable from the virtual source after removing the cut
    pub sink_side: BTreeSet<NodeId>,
    pub kind: CutKind,
    pub f: usize,
}

fn unreachable_after_removal(
    net: &SensorNetwork,
    critical: &BTreeSet<NodeId>,
    removed: &BTreeSet<NodeId>,
) -> BTreeSet<NodeId> {
    // BFS from the virtual source, which feeds every member of `critical`
    let mut seen = vec![false; net.node_count()];
    let mut queue: Vec<NodeId> = critical
        .iter()
        .copied()
        .filter(|v| !removed.contains(v))
        .collect();
    for &v in &queue {
        seen[v] = true;
    }
    while let Some(v) = queue.pop() {
        for &w in net.out_neighbors(v) {
            if !seen[w] && !removed.contains(&w) {
                seen[w] = true;
                queue.push(w);
            }
        }
    }
    net.nodes()
        .filter(|&v| !seen[v] && !removed.contains(&v))
        .collect()
}

fn part_admissible(net: &SensorNetwork, part: &BTreeSet<NodeId>, f: usize, kind: CutKind) -> bool {
    match kind {
        CutKind::FLocal => is_f_local(net, part, f),
        CutKind::FTotal => part.len() <= f,
    }
}

/// Searches for a pair cut w.r.t. the virtual source of `critical`. Subsets
/// are enumerated by increasing cardinality, then lexicographically; the
/// first witness is returned.
pub fn find_pair_cut(
    net: &SensorNetwork,
    critical: &BTreeSet<NodeId>,
    f: usize,
    kind: CutKind,
) -> Result<Option<PairCut>> {
    guard(net.node_count(), DEFAULT_MAX_NODES)?;
    for cut in subsets_by_cardinality(net.node_count()) {
        if cut.len() == net.node_count() {
            continue; // Y must be non-empty
        }
        let sink_side = unreachable_after_removal(net, critical, &cut);
        if sink_side.is_empty() {
            continue; // not a cut
        }
        let members: Vec<NodeId> = cut.iter().copied().collect();
        // bipartitions in increasing cardinality of part_one, then lex
        let mut splits: Vec<BTreeSet<NodeId>> = (0u64..(1 << members.len()))
            .map(|mask| {
                members
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask >> i & 1 == 1)
                    .map(|(_, &v)| v)
                    .collect()
            })
            .collect();
        splits.sort_by(|a: &BTreeSet<NodeId>, b| {
            a.len().cmp(&b.len()).then_with(|| a.iter().cmp(b.iter()))
        });
        for part_one in splits {
            let part_two: BTreeSet<NodeId> = cut.difference(&part_one).copied().collect();
            if part_admissible(net, &part_one, f, kind)
                && part_admissible(net, &part_two, f, kind)
            {
                let source_side = net
                    .nodes()
                    .filter(|v| !cut.contains(v) && !sink_side.contains(v))
                    .collect();
                return Ok(Some(PairCut {
                    cut,
                    part_one,
                    part_two,
                    source_side,
                    sink_side,
                    kind,
                    f,
                }));
            }
        }
    }
    Ok(None)
}

/// Largest number of total adversaries compatible with the necessary
/// condition: returns `k - 1` where `k` is the smallest positive integer such
/// that some minimal critical set admits a k-total pair cut.
pub fn max_tolerable_f_bound(
    plant: &LtiPlant,
    net: &SensorNetwork,
    max_nodes: usize,
) -> Result<usize> {
    guard(net.node_count(), max_nodes)?;
    let critical_sets = minimal_critical_sets(plant, max_nodes)?;
    if critical_sets.is_empty() {
        return Err(Error::Precondition(
            "no critical sets: the bound is vacuous for a locally detectable system".into(),
        ));
    }
    for k in 1..=net.node_count() {
        for critical in &critical_sets {
            if find_pair_cut(net, critical, k, CutKind::FTotal)?.is_some() {
                return Ok(k - 1);
            }
        }
    }
    // a critical set is always its own cut, so this is unreachable for
    // non-degenerate inputs
    Ok(net.node_count())
}

/// Checks the redundant-path detectability condition at `node`: for every
/// removal set of at most `2f` upstream nodes, the measurements of `node`
/// together with the nodes still reaching it keep the plant detectable.
pub fn check_theorem2_condition(
    plant: &LtiPlant,
    net: &SensorNetwork,
    node: NodeId,
    f: usize,
) -> Result<bool> {
    guard(net.node_count(), DEFAULT_MAX_NODES)?;
    let upstream = ancestors(net, node, &BTreeSet::new());
    let upstream_vec: Vec<NodeId> = upstream.iter().copied().collect();
    for mask in 0u64..(1 << upstream_vec.len()) {
        let removal: BTreeSet<NodeId> = upstream_vec
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, &v)| v)
            .collect();
        if removal.len() > 2 * f {
            continue;
        }
        let reaching = ancestors(net, node, &removal);
        let mut keep: Vec<NodeId> = reaching.into_iter().collect();
        keep.push(node);
        keep.sort_unstable();
        if !spectral::is_detectable_stacked(plant, &keep) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Nodes with a directed path to `target` avoiding `removed` (excludes the
/// target itself).
fn ancestors(net: &SensorNetwork, target: NodeId, removed: &BTreeSet<NodeId>) -> BTreeSet<NodeId> {
    let mut seen = vec![false; net.node_count()];
    let mut queue = vec![target];
    seen[target] = true;
    while let Some(v) = queue.pop() {
        for &w in net.in_neighbors(v) {
            if !seen[w] && !removed.contains(&w) {
                seen[w] = true;
                queue.push(w);
            }
        }
    }
    net.nodes()
        .filter(|&v| v != target && seen[v] && !removed.contains(&v))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::{scalar_demo_network, two_cluster_network};

    fn set(ids: &[NodeId]) -> BTreeSet<NodeId> {
        ids.iter().copied().collect()
    }

    #[test]
    fn f_local_examples() {
        let net = two_cluster_network();
        // paper labels are 1-based; internally 0-based
        assert!(is_f_local(&net, &set(&[3, 4]), 1));
        assert!(is_f_local(&net, &set(&[]), 0));
        // {5, 6} puts two in-neighbors inside node 2's neighborhood? build a
        // direct violation instead: {1, 2} are both in-neighbors of node 3
        assert!(!is_f_local(&net, &set(&[1, 2]), 1));
    }

    #[test]
    fn r_reachable_examples() {
        let net = scalar_demo_network();
        for mask in 1u64..16 {
            let subset: BTreeSet<NodeId> =
                (0..4).filter(|i| mask >> i & 1 == 1).map(|i| i + 3).collect();
            assert!(is_r_reachable(&net, &subset, 3).unwrap());
        }
        let singleton = set(&[6]);
        let indeg = net.in_neighbors(6).len();
        assert!(is_r_reachable(&net, &singleton, indeg).unwrap());
        assert!(!is_r_reachable(&net, &singleton, indeg + 1).unwrap());
        let all: BTreeSet<NodeId> = net.nodes().collect();
        assert!(!is_r_reachable(&net, &all, 1).unwrap());
        assert!(is_r_reachable(&net, &set(&[]), 1).is_err());
    }

    #[test]
    fn percolation_demo_levels() {
        let net = scalar_demo_network();
        let result = percolate(&net, &set(&[0, 1, 2]), 3);
        assert_eq!(result.final_active, (0..7).collect());
        assert_eq!(
            result.rounds,
            vec![set(&[0, 1, 2]), set(&[3, 4, 5]), set(&[6])]
        );
    }

    #[test]
    fn percolation_full_seed_single_round() {
        let net = scalar_demo_network();
        let all: BTreeSet<NodeId> = net.nodes().collect();
        let result = percolate(&net, &all, 2);
        assert_eq!(result.final_active, all);
        assert_eq!(result.rounds.len(), 1);
    }

    #[test]
    fn percolation_matches_fixed_point_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let n = 8;
            let mut edges = Vec::new();
            for a in 0..n {
                for b in 0..n {
                    if a != b && rng.gen_bool(0.35) {
                        edges.push((a, b));
                    }
                }
            }
            let net = SensorNetwork::new(n, edges).unwrap();
            let seed: BTreeSet<NodeId> = (0..n).filter(|_| rng.gen_bool(0.4)).collect();
            let r = rng.gen_range(1..=3);
            let got = percolate(&net, &seed, r).final_active;
            // brute-force fixed point by repeated full scans
            let mut active = seed.clone();
            loop {
                let added: Vec<NodeId> = net
                    .nodes()
                    .filter(|v| !active.contains(v))
                    .filter(|&v| net.in_neighbors(v).intersection(&active).count() >= r)
                    .collect();
                if added.is_empty() {
                    break;
                }
                active.extend(added);
            }
            assert_eq!(got, active);
        }
    }

    #[test]
    fn strong_robustness_demo() {
        let net = scalar_demo_network();
        assert!(is_strongly_r_robust(&net, &set(&[0, 1, 2]), 3));
        assert!(!is_strongly_r_robust(&net, &set(&[0, 1, 2]), 4));
        let all: BTreeSet<NodeId> = net.nodes().collect();
        assert!(is_strongly_r_robust(&net, &all, 10));
    }

    #[test]
    fn strong_robustness_matches_subset_enumeration_small() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let n = rng.gen_range(2..=5);
            let mut edges = Vec::new();
            for a in 0..n {
                for b in 0..n {
                    if a != b && rng.gen_bool(0.5) {
                        edges.push((a, b));
                    }
                }
            }
            let net = SensorNetwork::new(n, edges).unwrap();
            let sources: BTreeSet<NodeId> = (0..n).filter(|_| rng.gen_bool(0.5)).collect();
            for r in 1..=3 {
                let fast = is_strongly_r_robust(&net, &sources, r);
                let slow = definition_robust_oracle(&net, &sources, r);
                assert_eq!(fast, slow, "n={n} sources={sources:?} r={r}");
            }
        }
    }

    pub(crate) fn definition_robust_oracle(
        net: &SensorNetwork,
        sources: &BTreeSet<NodeId>,
        r: usize,
    ) -> bool {
        let outside: Vec<NodeId> = net.nodes().filter(|v| !sources.contains(v)).collect();
        for mask in 1u64..(1 << outside.len()) {
            let subset: BTreeSet<NodeId> = outside
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, &v)| v)
                .collect();
            if !is_r_reachable(net, &subset, r).unwrap() {
                return false;
            }
        }
        true
    }

    #[test]
    fn percolation_monotone_in_seed() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for _ in 0..50 {
            let n = 7;
            let mut edges = Vec::new();
            for a in 0..n {
                for b in 0..n {
                    if a != b && rng.gen_bool(0.4) {
                        edges.push((a, b));
                    }
                }
            }
            let net = SensorNetwork::new(n, edges).unwrap();
            let small: BTreeSet<NodeId> = (0..n).filter(|_| rng.gen_bool(0.3)).collect();
            let mut large = small.clone();
            large.insert(rng.gen_range(0..n));
            let r = rng.gen_range(1..=3);
            let a = percolate(&net, &small, r).final_active;
            let b = percolate(&net, &large, r).final_active;
            assert!(a.is_subset(&b));
        }
    }
}
