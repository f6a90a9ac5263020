//! Feasibility indicators and reliability estimates against graph
//! reachability, which decides feasibility when capacities are unbounded.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relnet::reliability::{estimate_reliability, psi_general, psi_single_with, LogicSpec};
use relnet::scenario::sample_scenarios;
use relnet::{Edge, LifetimeDistribution, Network, Node, NodeRole, Scenario, ScenarioSet};

/// Random directed network: node 0 is the source, the last `sinks` nodes are
/// sinks with equal shares of the unit supply. About half of the components
/// fail with a random probability, capped at `max_failing`.
fn random_network(rng: &mut ChaCha8Rng, n: usize, sinks: usize, max_failing: usize) -> Network {
    let mut failing = 0;
    let mut lifetime = |rng: &mut ChaCha8Rng| {
        if failing < max_failing && rng.random_bool(0.5) {
            failing += 1;
            LifetimeDistribution::Bernoulli { p: rng.random_range(0.3..0.98) }
        } else {
            LifetimeDistribution::AlwaysOn
        }
    };
    let nodes: Vec<Node> = (0..n)
        .map(|i| {
            let (role, d) = if i == 0 {
                (NodeRole::Source, 1.0)
            } else if i >= n - sinks {
                (NodeRole::Sink, -1.0 / sinks as f64)
            } else {
                (NodeRole::Relay, 0.0)
            };
            Node::new(format!("n{i}"), role, d).with_lifetime(lifetime(rng))
        })
        .collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.random_bool(if i < j { 0.45 } else { 0.1 }) {
                edges.push(Edge::new(format!("e{i}_{j}"), format!("n{i}"), format!("n{j}")).with_lifetime(lifetime(rng)));
            }
        }
    }
    Network::new("random", nodes, edges).unwrap()
}

/// Every sink reachable from the source over surviving components.
fn connected(net: &Network, s: &Scenario) -> bool {
    let up = |n: usize| s.xi_nodes[n] == 1;
    let sinks: Vec<usize> = net.nodes_with_role(NodeRole::Sink).collect();
    let src = net.nodes_with_role(NodeRole::Source).next().unwrap();
    if !up(src) || !sinks.iter().all(|&t| up(t)) {
        return false;
    }
    let mut seen = vec![false; net.node_count()];
    let mut stack = vec![src];
    seen[src] = true;
    while let Some(v) = stack.pop() {
        for e in net.out_edges(v) {
            let w = net.head(e);
            if s.xi_edges[e] == 1 && up(w) && !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    sinks.iter().all(|&t| seen[t])
}

fn survival_prob(l: &LifetimeDistribution) -> f64 {
    match *l {
        LifetimeDistribution::Bernoulli { p } => p,
        _ => 1.0,
    }
}

/// All `2^m` failure masks over the failing components with their
/// probabilities.
fn enumerate(net: &Network) -> (ScenarioSet, Vec<f64>) {
    let node_p: Vec<f64> = net.nodes().iter().map(|n| survival_prob(&n.lifetime)).collect();
    let edge_p: Vec<f64> = net.edges().iter().map(|e| survival_prob(&e.lifetime)).collect();
    let slots: Vec<(bool, usize)> = (0..net.node_count())
        .filter(|&i| node_p[i] < 1.0)
        .map(|i| (true, i))
        .chain((0..net.edge_count()).filter(|&e| edge_p[e] < 1.0).map(|e| (false, e)))
        .collect();
    let mut scenarios = Vec::new();
    let mut weights = Vec::new();
    for mask in 0u32..(1 << slots.len()) {
        let mut s = Scenario::intact(net);
        s.k = mask as usize;
        let mut w = 1.0;
        for (bit, &(is_node, i)) in slots.iter().enumerate() {
            let alive = mask >> bit & 1 == 1;
            let p = if is_node { node_p[i] } else { edge_p[i] };
            w *= if alive { p } else { 1.0 - p };
            if !alive {
                if is_node {
                    s.xi_nodes[i] = 0;
                } else {
                    s.xi_edges[i] = 0;
                }
            }
        }
        scenarios.push(s);
        weights.push(w);
    }
    (ScenarioSet { scenarios, seed: 0, threshold: 0.0 }, weights)
}

#[test]
fn exhaustive_estimate_equals_connectivity_probability() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for trial in 0..40 {
        let n = rng.random_range(3..=7);
        let sinks = rng.random_range(1..=2.min(n - 1));
        let net = random_network(&mut rng, n, sinks, 10);
        let (set, weights) = enumerate(&net);
        let est = estimate_reliability(&net, &set, &LogicSpec::AllSinks, false).unwrap();
        let from_estimate: f64 = est.per_scenario.iter().zip(&weights).filter(|(o, _)| o.functional).map(|(_, w)| w).sum();
        let oracle: f64 = set.scenarios.iter().zip(&weights).filter(|(s, _)| connected(&net, s)).map(|(_, w)| w).sum();
        assert!((from_estimate - oracle).abs() <= 1e-12, "trial {trial}: {from_estimate} vs {oracle}");
    }
}

#[test]
fn single_pair_lp_equals_milp_on_random_dags() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut functional = 0;
    for trial in 0..200 {
        let n = rng.random_range(4..=12);
        let nodes: Vec<Node> = (0..n)
            .map(|i| match i {
                0 => Node::new("s", NodeRole::Source, 1.0),
                _ if i == n - 1 => Node::new("t", NodeRole::Sink, -1.0),
                _ => Node::new(format!("r{i}"), NodeRole::Relay, 0.0),
            })
            .collect();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.random_bool(0.35) {
                    edges.push(Edge::new(format!("e{i}_{j}"), nodes[i].id.clone(), nodes[j].id.clone()));
                }
            }
        }
        let net = Network::new("dag", nodes, edges).unwrap();
        let mut s = Scenario::intact(&net);
        s.xi_nodes.iter_mut().skip(1).take(n - 2).for_each(|x| *x = rng.random_bool(0.8) as u8);
        s.xi_edges.iter_mut().for_each(|x| *x = rng.random_bool(0.7) as u8);
        let lp = psi_single_with(&net, &s, false).unwrap();
        let mip = psi_single_with(&net, &s, true).unwrap();
        assert_eq!(lp.functional, mip.functional, "trial {trial}");
        assert_eq!(lp.functional, connected(&net, &s), "trial {trial}");
        functional += lp.functional as usize;
    }
    assert!(functional > 30 && functional < 170, "{functional} functional instances");
}

#[test]
fn estimate_is_the_mean_of_independent_indicators() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let net = random_network(&mut rng, 6, 2, 12);
    let set = sample_scenarios(&net, 400, 0.0, 3);
    let est = estimate_reliability(&net, &set, &LogicSpec::AllSinks, false).unwrap();
    let one_by_one: Vec<bool> = set
        .scenarios
        .iter()
        .rev()
        .map(|s| psi_general(&net, s, &LogicSpec::AllSinks, false).unwrap().functional)
        .collect();
    let mean = one_by_one.iter().filter(|&&f| f).count() as f64 / set.len() as f64;
    assert_eq!(est.value, mean);
    assert!(est.functional().iter().eq(one_by_one.iter().rev()));

    // Any partition of the set gives the same counts.
    let halves: usize = set
        .scenarios
        .chunks(137)
        .map(|c| {
            let part = ScenarioSet { scenarios: c.to_vec(), ..set.clone() };
            estimate_reliability(&net, &part, &LogicSpec::AllSinks, false).unwrap().functional().iter().filter(|&&f| f).count()
        })
        .sum();
    assert_eq!(halves as f64 / set.len() as f64, est.value);

    let pool = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let parallel = pool.install(|| estimate_reliability(&net, &set, &LogicSpec::AllSinks, false).unwrap());
    assert_eq!(parallel.per_scenario, est.per_scenario);
}

#[test]
fn requiring_every_sink_equals_all_sinks() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..30 {
        let n = rng.random_range(4..=7);
        let net = random_network(&mut rng, n, 3, 12);
        let required: BTreeSet<String> = net.nodes_with_role(NodeRole::Sink).map(|n| net.nodes()[n].id.clone()).collect();
        let subset = LogicSpec::SubsetReachable { required };
        let set = sample_scenarios(&net, 200, 0.0, 1);
        for use_milp in [false, true] {
            let all = estimate_reliability(&net, &set, &LogicSpec::AllSinks, use_milp).unwrap();
            let sub = estimate_reliability(&net, &set, &subset, use_milp).unwrap();
            assert_eq!(all.functional(), sub.functional());
        }
    }
}

#[test]
fn bernoulli_edge_estimates_cover_the_truth() {
    let p = 0.8;
    let net = Network::new(
        "edge",
        vec![Node::new("a", NodeRole::Source, 1.0), Node::new("b", NodeRole::Sink, -1.0)],
        vec![Edge::new("ab", "a", "b").with_lifetime(LifetimeDistribution::Bernoulli { p })],
    )
    .unwrap();
    let k = 2000;
    let band = 3.0 * (p * (1.0 - p) / k as f64).sqrt();
    let seeds = 200;
    let covered = (0..seeds)
        .filter(|&seed| {
            let set = sample_scenarios(&net, k, 0.0, seed);
            let r = estimate_reliability(&net, &set, &LogicSpec::AllSinks, false).unwrap().value;
            (r - p).abs() <= band
        })
        .count();
    assert!(covered * 100 >= 99 * seeds as usize, "{covered}/{seeds} within 3 sigma");
}
