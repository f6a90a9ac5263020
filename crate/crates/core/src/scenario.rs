//! Component lifetimes, Monte-Carlo failure scenarios and the perturbed
//! incidence structure `A(ξ) = Ξ_N A Ξ_E`.
//!
//! Every component draws exactly one uniform per scenario, nodes first and
//! then edges, from a ChaCha8 stream keyed by `(seed, k)`. Scenario `k` is
//! therefore the same no matter how many scenarios are drawn or in which
//! order they are generated.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::ReliabilityError;
use crate::graph::{incidence, Network};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LifetimeDistribution {
    /// Exponential lifetime with the given mean (years).
    Exponential { mean: f64 },
    AlwaysOn,
    /// Survives with probability `p`, independent of time.
    Bernoulli { p: f64 },
}

impl LifetimeDistribution {
    pub fn is_valid(&self) -> bool {
        match *self {
            LifetimeDistribution::Exponential { mean } => mean > 0.0 && mean.is_finite(),
            LifetimeDistribution::AlwaysOn => true,
            LifetimeDistribution::Bernoulli { p } => (0.0..=1.0).contains(&p),
        }
    }

    /// Probability of surviving past `t` years.
    pub fn survival(&self, t: f64) -> f64 {
        match *self {
            LifetimeDistribution::Exponential { mean } => (-t / mean).exp(),
            LifetimeDistribution::AlwaysOn => 1.0,
            LifetimeDistribution::Bernoulli { p } => p,
        }
    }

    /// Map one uniform draw in `[0, 1)` to a survival indicator.
    ///
    /// Exponential lifetimes are drawn by inverse CDF, `T = -mean ln(1 - U)`,
    /// and the component survives iff `T > threshold`.
    fn survives(&self, uniform: f64, threshold: f64) -> bool {
        match *self {
            LifetimeDistribution::Exponential { mean } => -mean * (1.0 - uniform).ln() > threshold,
            LifetimeDistribution::AlwaysOn => true,
            LifetimeDistribution::Bernoulli { p } => uniform < p,
        }
    }
}

/// One binary survival realization `(ξ_N, ξ_E)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Scenario {
    pub k: usize,
    pub xi_nodes: Vec<u8>,
    pub xi_edges: Vec<u8>,
}

impl Scenario {
    pub fn intact(network: &Network) -> Self {
        Scenario {
            k: 0,
            xi_nodes: vec![1; network.node_count()],
            xi_edges: vec![1; network.edge_count()],
        }
    }

    pub fn node_up(&self, n: usize) -> bool {
        self.xi_nodes[n] == 1
    }

    pub fn edge_up(&self, e: usize) -> bool {
        self.xi_edges[e] == 1
    }

    pub fn check_dims(&self, network: &Network) -> Result<(), ReliabilityError> {
        if self.xi_nodes.len() != network.node_count() || self.xi_edges.len() != network.edge_count()
        {
            return Err(ReliabilityError::Dimension(format!(
                "scenario {} has {}x{} indicators, network has {} nodes and {} edges",
                self.k,
                self.xi_nodes.len(),
                self.xi_edges.len(),
                network.node_count(),
                network.edge_count()
            )));
        }
        if self.xi_nodes.iter().chain(&self.xi_edges).any(|&x| x > 1) {
            return Err(ReliabilityError::Dimension(format!(
                "scenario {} has a non-binary indicator",
                self.k
            )));
        }
        Ok(())
    }

    /// Edges that can carry flow: the edge and both of its end nodes survive.
    pub fn effective_edges(&self, network: &Network) -> Vec<bool> {
        (0..network.edge_count())
            .map(|e| self.edge_up(e) && self.node_up(network.tail(e)) && self.node_up(network.head(e)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    pub scenarios: Vec<Scenario>,
    pub seed: u64,
    pub threshold: f64,
}

impl ScenarioSet {
    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn check_dims(&self, network: &Network) -> Result<(), ReliabilityError> {
        self.scenarios.iter().try_for_each(|s| s.check_dims(network))
    }

    /// JSON array of `{k, xi_nodes, xi_edges}`.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.scenarios).expect("scenarios serialize")
    }

    pub fn from_json(text: &str, seed: u64, threshold: f64) -> Result<Self, serde_json::Error> {
        let scenarios: Vec<Scenario> = serde_json::from_str(text)?;
        Ok(ScenarioSet { scenarios, seed, threshold })
    }
}

fn stream(seed: u64, k: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k as u64);
    rng
}

/// Draw `count` independent failure scenarios over all nodes and edges
/// (candidates included).
pub fn sample_scenarios(network: &Network, count: usize, threshold_years: f64, seed: u64) -> ScenarioSet {
    assert!(count >= 1, "at least one scenario is required");
    assert!(threshold_years >= 0.0, "threshold must be non-negative");
    let node_dists: Vec<_> = network.nodes().iter().map(|n| n.lifetime).collect();
    let edge_dists: Vec<_> = network.edges().iter().map(|e| e.lifetime).collect();
    let scenarios = (0..count)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(seed, k);
            let mut draw = |d: &LifetimeDistribution| -> u8 {
                let u: f64 = rng.random();
                d.survives(u, threshold_years) as u8
            };
            let xi_nodes = node_dists.iter().map(&mut draw).collect();
            let xi_edges = edge_dists.iter().map(&mut draw).collect();
            Scenario { k, xi_nodes, xi_edges }
        })
        .collect();
    ScenarioSet {
        scenarios,
        seed,
        threshold: threshold_years,
    }
}

/// `Ā_{ne} · ξ_{N,n} · ξ_{E,e}`, with candidate columns further multiplied by
/// their entry of `active_candidates` (ordered as the candidate edges appear).
pub fn perturbed_incidence(network: &Network, scenario: &Scenario, active_candidates: &[bool]) -> Vec<Vec<f64>> {
    let mut v = vec![1.0; network.edge_count()];
    let cands: Vec<usize> = network.candidate_edges().collect();
    assert_eq!(cands.len(), active_candidates.len(), "one activity flag per candidate edge");
    for (&e, &on) in cands.iter().zip(active_candidates) {
        v[e] = if on { 1.0 } else { 0.0 };
    }
    let mut a = incidence(network);
    for (n, row) in a.iter_mut().enumerate() {
        let xn = scenario.xi_nodes[n] as f64;
        for (e, entry) in row.iter_mut().enumerate() {
            *entry *= xn * scenario.xi_edges[e] as f64 * v[e];
        }
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::*;
    use crate::graph::{Edge, Node, NodeRole};

    fn with_lifetimes(node: LifetimeDistribution, edge: LifetimeDistribution) -> Network {
        let net = bridge();
        let nodes = net.nodes().iter().cloned().map(|n| n.with_lifetime(node)).collect();
        let edges = net.edges().iter().cloned().map(|e| e.with_lifetime(edge)).collect();
        net.rebuild(nodes, edges).unwrap()
    }

    #[test]
    fn always_on_never_fails() {
        let net = bridge();
        let set = sample_scenarios(&net, 50, 1e6, 3);
        assert!(set.scenarios.iter().all(|s| s.xi_nodes.iter().chain(&s.xi_edges).all(|&x| x == 1)));
    }

    #[test]
    fn bernoulli_zero_always_fails() {
        let net = with_lifetimes(LifetimeDistribution::Bernoulli { p: 0.0 }, LifetimeDistribution::Bernoulli { p: 0.0 });
        let set = sample_scenarios(&net, 50, 0.0, 3);
        assert!(set.scenarios.iter().all(|s| s.xi_nodes.iter().chain(&s.xi_edges).all(|&x| x == 0)));
    }

    #[test]
    fn exponential_survival_fraction() {
        let net = Network::new(
            "one",
            vec![
                Node::new("a", NodeRole::Source, 1.0)
                    .with_lifetime(LifetimeDistribution::Exponential { mean: 100.0 }),
                Node::new("b", NodeRole::Sink, -1.0),
            ],
            vec![Edge::new("ab", "a", "b")],
        )
        .unwrap();
        let set = sample_scenarios(&net, 10_000, 5.0, 11);
        let frac = set.scenarios.iter().filter(|s| s.xi_nodes[0] == 1).count() as f64 / 10_000.0;
        assert!((frac - (-0.05f64).exp()).abs() < 0.01, "{frac}");
    }

    #[test]
    fn sampling_is_reproducible_and_prefix_stable() {
        let net = with_lifetimes(LifetimeDistribution::Exponential { mean: 10.0 }, LifetimeDistribution::Bernoulli { p: 0.7 });
        let a = sample_scenarios(&net, 200, 2.0, 42);
        let b = sample_scenarios(&net, 200, 2.0, 42);
        let c = sample_scenarios(&net, 50, 2.0, 42);
        assert_eq!(a, b);
        assert_eq!(&a.scenarios[..50], &c.scenarios[..]);
        let d = sample_scenarios(&net, 200, 2.0, 43);
        assert_ne!(a.scenarios, d.scenarios);
    }

    #[test]
    fn survival_rates_within_three_sigma() {
        let lifetimes = [
            LifetimeDistribution::Exponential { mean: 20.0 },
            LifetimeDistribution::Bernoulli { p: 0.35 },
        ];
        for (i, &dist) in lifetimes.iter().enumerate() {
            let net = with_lifetimes(dist, dist);
            let k = 4000;
            let set = sample_scenarios(&net, k, 4.0, 100 + i as u64);
            let p = dist.survival(4.0);
            let sigma = (p * (1.0 - p) / k as f64).sqrt();
            for n in 0..net.node_count() {
                let rate = set.scenarios.iter().filter(|s| s.xi_nodes[n] == 1).count() as f64 / k as f64;
                assert!((rate - p).abs() <= 3.0 * sigma, "node {n}: {rate} vs {p}");
            }
            for e in 0..net.edge_count() {
                let rate = set.scenarios.iter().filter(|s| s.xi_edges[e] == 1).count() as f64 / k as f64;
                assert!((rate - p).abs() <= 3.0 * sigma, "edge {e}: {rate} vs {p}");
            }
        }
    }

    #[test]
    fn identity_perturbation() {
        let net = bridge();
        assert_eq!(perturbed_incidence(&net, &Scenario::intact(&net), &[]), incidence(&net));
    }

    #[test]
    fn failed_relay_zeroes_its_row_only() {
        let net = bridge();
        let mut s = Scenario::intact(&net);
        s.xi_nodes[1] = 0;
        let a = perturbed_incidence(&net, &s, &[]);
        // Hand-computed Ξ_N A Ξ_E with ξ_N = (1,0,1,1), ξ_E = 1.
        let expected = vec![
            vec![-1.0, -1.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 0.0, 0.0],
            vec![0.0, 1.0, 1.0, 0.0, -1.0],
            vec![0.0, 0.0, 0.0, 1.0, 1.0],
        ];
        assert_eq!(a, expected);
        // Balance at the failed node reads 0 = 0 for any flow.
        let z = [0.3, 0.7, 0.2, 0.5, 0.1];
        let row: f64 = a[1].iter().zip(z).map(|(a, z)| a * z).sum();
        assert_eq!(row, 0.0);
    }

    #[test]
    fn failed_edge_zeroes_column() {
        let net = single_edge();
        let mut s = Scenario::intact(&net);
        s.xi_edges[0] = 0;
        assert_eq!(perturbed_incidence(&net, &s, &[]), vec![vec![0.0], vec![0.0]]);
    }

    #[test]
    fn inactive_candidates_are_masked() {
        let net = crate::graph::with_candidates(
            &bridge(),
            vec![Edge::new("e14", "n1", "n4").as_candidate(100.0)],
        )
        .unwrap();
        let s = Scenario::intact(&net);
        let off = perturbed_incidence(&net, &s, &[false]);
        assert!(off.iter().all(|r| r[5] == 0.0));
        assert_eq!(perturbed_incidence(&net, &s, &[true]), incidence(&net));
    }

    #[test]
    fn effective_edges_drop_edges_at_failed_nodes() {
        let net = bridge();
        let mut s = Scenario::intact(&net);
        s.xi_nodes[1] = 0;
        s.xi_edges[4] = 0;
        assert_eq!(s.effective_edges(&net), vec![false, true, false, false, false]);
    }

    #[test]
    fn scenario_json_round_trip() {
        let net = with_lifetimes(LifetimeDistribution::Bernoulli { p: 0.5 }, LifetimeDistribution::Bernoulli { p: 0.5 });
        let set = sample_scenarios(&net, 20, 0.0, 5);
        let back = ScenarioSet::from_json(&set.to_json(), 5, 0.0).unwrap();
        assert_eq!(back, set);
        assert!(set.to_json().starts_with("[{\"k\":0,\"xi_nodes\":["));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let net = bridge();
        let s = Scenario { k: 3, xi_nodes: vec![1; 4], xi_edges: vec![1; 2] };
        assert!(matches!(s.check_dims(&net), Err(ReliabilityError::Dimension(_))));
    }

    proptest::proptest! {
        #[test]
        fn masks_commute(nodes in proptest::collection::vec(0u8..2, 4), edges in proptest::collection::vec(0u8..2, 5)) {
            let net = bridge();
            let a = incidence(&net);
            // Ξ_N (A Ξ_E) and (Ξ_N A) Ξ_E computed separately.
            let mut right = a.clone();
            for row in right.iter_mut() { for (e, x) in row.iter_mut().enumerate() { *x *= edges[e] as f64; } }
            for (n, row) in right.iter_mut().enumerate() { for x in row.iter_mut() { *x *= nodes[n] as f64; } }
            let mut left = a.clone();
            for (n, row) in left.iter_mut().enumerate() { for x in row.iter_mut() { *x *= nodes[n] as f64; } }
            for row in left.iter_mut() { for (e, x) in row.iter_mut().enumerate() { *x *= edges[e] as f64; } }
            let s = Scenario { k: 0, xi_nodes: nodes.clone(), xi_edges: edges.clone() };
            let p = perturbed_incidence(&net, &s, &[]);
            proptest::prop_assert_eq!(&p, &left);
            proptest::prop_assert_eq!(&p, &right);
            for n in 0..4 { if nodes[n] == 0 { proptest::prop_assert!(p[n].iter().all(|&x| x == 0.0)); } }
            for e in 0..5 { if edges[e] == 0 { proptest::prop_assert!(p.iter().all(|r| r[e] == 0.0)); } }
        }
    }
}
