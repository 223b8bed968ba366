//! Random network generators (Erdős–Rényi, preferential attachment, random
//! geometric) and the analytic threshold functions used to study percolation
//! feasibility probabilistically.
//!
//! Generated graphs are undirected in spirit — every edge is realized as a
//! bidirectional pair of directed edges — while the rest of the library
//! remains fully directed.

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{percolate, SensorNetwork};
use crate::NodeId;

/// Random graph family and its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum GraphModel {
    /// each unordered pair is an edge independently with probability `p`
    Er { n: usize, p: f64 },
    /// preferential attachment: grow from `seed_graph` by adding nodes with
    /// `r` edges to existing nodes chosen proportionally to degree
    Ba { n: usize, r: usize, seed_graph: SensorNetwork },
    /// `n` uniform points in the unit square, edges within distance `d`
    Rgg { n: usize, d: f64 },
}

/// How source sets are drawn for feasibility trials.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceRule {
    RandomSubset(usize),
    Bernoulli(f64),
    Explicit(BTreeSet<NodeId>),
}

/// Full generator specification; `seed` makes everything reproducible.
#[derive(Debug, Clone, PartialEq)]
pub struct GenSpec {
    pub model: GraphModel,
    pub source_rule: SourceRule,
    /// percolation threshold used in feasibility trials
    pub r: usize,
    pub seed: u64,
}

fn validate(spec: &GenSpec) -> Result<()> {
    match &spec.model {
        GraphModel::Er { p, .. } => {
            if !(0.0..=1.0).contains(p) {
                return Err(Error::Config(format!("edge probability {p} outside [0, 1]")));
            }
        }
        GraphModel::Ba { n, r, seed_graph } => {
            if *r == 0 {
                return Err(Error::Config("attachment count must be positive".into()));
            }
            if seed_graph.node_count() < *r {
                return Err(Error::Config(format!(
                    "seed graph has {} nodes, fewer than attachment count {r}",
                    seed_graph.node_count()
                )));
            }
            if *n < seed_graph.node_count() {
                return Err(Error::Config(
                    "target size smaller than the seed graph".into(),
                ));
            }
        }
        GraphModel::Rgg { d, .. } => {
            if !(*d > 0.0 && *d <= std::f64::consts::SQRT_2) {
                return Err(Error::Config(format!(
                    "connection radius {d} outside (0, sqrt(2)]"
                )));
            }
        }
    }
    Ok(())
}

fn generate_with_rng(spec: &GenSpec, rng: &mut ChaCha8Rng) -> Result<SensorNetwork> {
    validate(spec)?;
    match &spec.model {
        GraphModel::Er { n, p } => {
            let mut edges = Vec::new();
            for i in 0..*n {
                for j in (i + 1)..*n {
                    if rng.gen_bool(*p) {
                        edges.push((i, j));
                        edges.push((j, i));
                    }
                }
            }
            SensorNetwork::new(*n, edges)
        }
        GraphModel::Ba { n, r, seed_graph } => {
            let mut net = seed_graph.clone();
            // undirected degree = out-degree for bidirectional seed graphs;
            // use out-degree + 1 so isolated seed nodes stay attachable
            let mut weight: Vec<usize> = net
                .nodes()
                .map(|i| net.out_neighbors(i).len() + 1)
                .collect();
            while net.node_count() < *n {
                let mut chosen: BTreeSet<NodeId> = BTreeSet::new();
                while chosen.len() < *r {
                    let total: usize = weight
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| !chosen.contains(i))
                        .map(|(_, w)| w)
                        .sum();
                    let mut pick = rng.gen_range(0..total);
                    for (i, &w) in weight.iter().enumerate() {
                        if chosen.contains(&i) {
                            continue;
                        }
                        if pick < w {
                            chosen.insert(i);
                            break;
                        }
                        pick -= w;
                    }
                }
                let targets: Vec<NodeId> = chosen.iter().copied().collect();
                net.add_node(targets.iter().copied(), targets.iter().copied())?;
                for &t in &targets {
                    weight[t] += 1;
                }
                weight.push(*r + 1);
            }
            Ok(net)
        }
        GraphModel::Rgg { n, d } => {
            let points: Vec<(f64, f64)> = (0..*n)
                .map(|_| (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)))
                .collect();
            let mut edges = Vec::new();
            for i in 0..*n {
                for j in (i + 1)..*n {
                    let dx = points[i].0 - points[j].0;
                    let dy = points[i].1 - points[j].1;
                    if (dx * dx + dy * dy).sqrt() <= *d {
                        edges.push((i, j));
                        edges.push((j, i));
                    }
                }
            }
            SensorNetwork::new(*n, edges)
        }
    }
}

/// Generates one network; deterministic in `spec.seed`.
pub fn generate(spec: &GenSpec) -> Result<SensorNetwork> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    generate_with_rng(spec, &mut rng)
}

fn sample_sources_with_rng(
    spec: &GenSpec,
    net: &SensorNetwork,
    rng: &mut ChaCha8Rng,
) -> Result<BTreeSet<NodeId>> {
    let n = net.node_count();
    match &spec.source_rule {
        SourceRule::RandomSubset(size) => {
            if *size > n {
                return Err(Error::Config(format!(
                    "source subset of size {size} requested from {n} nodes"
                )));
            }
            Ok(sample(rng, n, *size).into_iter().collect())
        }
        SourceRule::Bernoulli(p) => {
            if !(0.0..=1.0).contains(p) {
                return Err(Error::Config(format!("source probability {p} outside [0, 1]")));
            }
            Ok((0..n).filter(|_| rng.gen_bool(*p)).collect())
        }
        SourceRule::Explicit(set) => {
            if set.iter().any(|&i| i >= n) {
                return Err(Error::Config("explicit source id out of range".into()));
            }
            Ok(set.clone())
        }
    }
}

/// Draws a source set per the spec's source rule; deterministic in
/// `spec.seed` (a stream separate from edge generation).
pub fn sample_sources(spec: &GenSpec, net: &SensorNetwork) -> Result<BTreeSet<NodeId>> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x50ce_5eed);
    sample_sources_with_rng(spec, net, &mut rng)
}

/// Percolation-time and source-size thresholds for the Erdős–Rényi family:
/// `T_c = ((r-1)! / (N p^r))^{1/(r-1)}` and `A_c = (1 - 1/r) T_c`.
pub fn er_threshold_values(n_nodes: usize, p: f64, r: usize) -> Result<(f64, f64)> {
    if r < 2 {
        return Err(Error::Domain("threshold formulas require r >= 2".into()));
    }
    if !(p > 0.0) {
        return Err(Error::Domain("edge probability must be positive".into()));
    }
    let factorial: f64 = (1..r).map(|k| k as f64).product();
    let t_c = (factorial / (n_nodes as f64 * p.powi(r as i32))).powf(1.0 / (r as f64 - 1.0));
    let a_c = (1.0 - 1.0 / r as f64) * t_c;
    Ok((t_c, a_c))
}

/// `H(x) = x ln x - x + 1`.
pub fn h_entropy(x: f64) -> f64 {
    x * x.ln() - x + 1.0
}

/// `J(x) = ln x - 1 + 1/x`, increasing on [1, ∞) with J(1) = 0.
pub fn j_rate(x: f64) -> f64 {
    x.ln() - 1.0 + 1.0 / x
}

/// Inverse of `J` restricted to [1, ∞), by bisection to 1e-12.
pub fn j_rate_inverse(target: f64) -> Result<f64> {
    if target < 0.0 {
        return Err(Error::Domain("J is nonnegative on [1, inf)".into()));
    }
    if target == 0.0 {
        return Ok(1.0);
    }
    let mut lo = 1.0_f64;
    let mut hi = 2.0_f64;
    while j_rate(hi) < target {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::Domain("J inverse target out of range".into()));
        }
    }
    // tolerance 1e-12, relative for arguments beyond the float grid
    while hi - lo > 1e-12 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break; // interval hit the floating-point grid
        }
        if j_rate(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Connection radius, percolation threshold, and minimum source density for
/// the random-geometric regime: `d = sqrt(a ln N / (π N))`,
/// `r = floor(γ a ln N)`, `p_min = min(γ, 5πγ / J⁻¹(1/(aγ)))`.
pub fn rgg_threshold_values(n_nodes: usize, a: f64, gamma: f64) -> Result<(f64, usize, f64)> {
    use std::f64::consts::PI;
    if !(a > 1.0) {
        return Err(Error::Domain("coverage parameter a must exceed 1".into()));
    }
    if !(gamma > 0.0 && gamma < 1.0 / (5.0 * PI)) {
        return Err(Error::Domain(format!(
            "gamma {gamma} outside (0, 1/(5 pi))"
        )));
    }
    if n_nodes < 2 {
        return Err(Error::Domain("need at least 2 nodes".into()));
    }
    let n = n_nodes as f64;
    let d = (a * n.ln() / (PI * n)).sqrt();
    let r = (gamma * a * n.ln()).floor() as usize;
    let inv = j_rate_inverse(1.0 / (a * gamma))?;
    let p_min = gamma.min(5.0 * PI * gamma / inv);
    Ok((d, r, p_min))
}

/// Fraction of generated instances whose sampled source set percolates the
/// whole graph at threshold `spec.r`.
pub fn feasibility_monte_carlo(spec: &GenSpec, trials: usize) -> Result<f64> {
    if trials == 0 {
        return Err(Error::Config("need at least one trial".into()));
    }
    let mut successes = 0usize;
    for t in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(t as u64 + 1)));
        let net = generate_with_rng(spec, &mut rng)?;
        let sources = sample_sources_with_rng(spec, &net, &mut rng)?;
        let all: BTreeSet<NodeId> = net.nodes().collect();
        let reached = percolate(&net, &sources, spec.r).final_active;
        if reached == all {
            successes += 1;
        }
    }
    Ok(successes as f64 / trials as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::is_strongly_r_robust;

    fn er_spec(n: usize, p: f64, seed: u64) -> GenSpec {
        GenSpec {
            model: GraphModel::Er { n, p },
            source_rule: SourceRule::RandomSubset(3),
            r: 3,
            seed,
        }
    }

    #[test]
    fn er_p1_is_complete() {
        let net = generate(&er_spec(8, 1.0, 1)).unwrap();
        assert_eq!(net.edges().len(), 8 * 7);
    }

    #[test]
    fn er_p0_is_empty() {
        let net = generate(&er_spec(8, 0.0, 1)).unwrap();
        assert!(net.edges().is_empty());
    }

    #[test]
    fn rgg_full_radius_is_complete() {
        let spec = GenSpec {
            model: GraphModel::Rgg { n: 10, d: std::f64::consts::SQRT_2 },
            source_rule: SourceRule::RandomSubset(2),
            r: 2,
            seed: 4,
        };
        let net = generate(&spec).unwrap();
        assert_eq!(net.edges().len(), 10 * 9);
    }

    #[test]
    fn generators_are_reproducible() {
        for spec in [
            er_spec(30, 0.2, 99),
            GenSpec {
                model: GraphModel::Rgg { n: 25, d: 0.4 },
                source_rule: SourceRule::Bernoulli(0.3),
                r: 2,
                seed: 99,
            },
        ] {
            let a = generate(&spec).unwrap();
            let b = generate(&spec).unwrap();
            assert_eq!(a.edges(), b.edges());
            assert_eq!(sample_sources(&spec, &a).unwrap(), sample_sources(&spec, &b).unwrap());
        }
    }

    #[test]
    fn generated_graphs_are_symmetric() {
        for spec in [er_spec(20, 0.3, 5), GenSpec {
            model: GraphModel::Rgg { n: 20, d: 0.5 },
            source_rule: SourceRule::RandomSubset(2),
            r: 2,
            seed: 5,
        }] {
            let net = generate(&spec).unwrap();
            for &(u, v) in net.edges() {
                assert!(net.edges().contains(&(v, u)));
            }
        }
    }

    #[test]
    fn er_edge_count_concentrates() {
        let (n, p) = (150, 0.2);
        let net = generate(&er_spec(n, p, 7)).unwrap();
        let undirected = net.edges().len() as f64 / 2.0;
        let pairs = (n * (n - 1) / 2) as f64;
        let mean = pairs * p;
        let sd = (pairs * p * (1.0 - p)).sqrt();
        assert!((undirected - mean).abs() <= 5.0 * sd);
    }

    #[test]
    fn ba_growth_preserves_seed_percolation() {
        // a complete 7-node seed is strongly 3-robust w.r.t. any 3 sources;
        // attaching nodes with 3 incoming edges preserves that
        let seed_net = generate(&er_spec(7, 1.0, 3)).unwrap();
        let sources: BTreeSet<NodeId> = [0, 1, 2].into_iter().collect();
        assert!(is_strongly_r_robust(&seed_net, &sources, 3));
        for seed in 0..10 {
            let spec = GenSpec {
                model: GraphModel::Ba { n: 25, r: 3, seed_graph: seed_net.clone() },
                source_rule: SourceRule::Explicit(sources.clone()),
                r: 3,
                seed,
            };
            let net = generate(&spec).unwrap();
            assert_eq!(net.node_count(), 25);
            assert!(is_strongly_r_robust(&net, &sources, 3), "seed {seed}");
        }
    }

    #[test]
    fn ba_without_enough_seed_nodes_rejected() {
        let tiny = SensorNetwork::new(2, [(0usize, 1usize), (1, 0)]).unwrap();
        let spec = GenSpec {
            model: GraphModel::Ba { n: 10, r: 3, seed_graph: tiny },
            source_rule: SourceRule::RandomSubset(1),
            r: 3,
            seed: 0,
        };
        assert!(generate(&spec).is_err());
    }

    #[test]
    fn er_threshold_specialization() {
        // r = 2: T_c = 1/(N p^2), A_c = T_c / 2
        let (t_c, a_c) = er_threshold_values(10_000, 1e-2, 2).unwrap();
        assert!((t_c - 1.0).abs() <= 1e-12);
        assert!((a_c - 0.5).abs() <= 1e-12);
        assert!(er_threshold_values(10, 0.5, 1).is_err());
        assert!(er_threshold_values(10, 0.0, 2).is_err());
    }

    #[test]
    fn threshold_ratio_is_structural() {
        for r in 2..6 {
            let (t_c, a_c) = er_threshold_values(500, 0.1, r).unwrap();
            assert!((a_c / t_c - (1.0 - 1.0 / r as f64)).abs() <= 1e-12);
        }
    }

    #[test]
    fn rate_functions_at_one() {
        assert_eq!(h_entropy(1.0), 0.0);
        assert_eq!(j_rate(1.0), 0.0);
        assert_eq!(j_rate_inverse(0.0).unwrap(), 1.0);
    }

    #[test]
    fn j_inverse_residual() {
        let (d, r, p_min) = rgg_threshold_values(10_000, 2.0, 0.05).unwrap();
        assert!(d > 0.0 && d < 1.0);
        assert_eq!(r, (0.05 * 2.0 * (10_000f64).ln()).floor() as usize);
        assert!(p_min > 0.0 && p_min <= 0.05);
        let target = 1.0 / (2.0 * 0.05);
        let x = j_rate_inverse(target).unwrap();
        assert!((j_rate(x) - target).abs() <= 1e-10);
    }

    #[test]
    fn rgg_parameter_ranges_enforced() {
        assert!(rgg_threshold_values(100, 0.9, 0.05).is_err());
        assert!(rgg_threshold_values(100, 2.0, 0.2).is_err());
    }

    #[test]
    fn monte_carlo_extremes() {
        let mut spec = er_spec(12, 1.0, 11);
        assert_eq!(feasibility_monte_carlo(&spec, 20).unwrap(), 1.0);
        spec.model = GraphModel::Er { n: 12, p: 0.0 };
        assert_eq!(feasibility_monte_carlo(&spec, 20).unwrap(), 0.0);
    }
}
