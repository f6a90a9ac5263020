//! Scenario feasibility programs `ψ` and the sample-average reliability
//! estimate `R ≈ (1/|K|) Σ_k ψ(ξ^k)`.
//!
//! For one scenario the balance at node `n` reads
//! `Σ_e A_ne(ξ) z_e + u_n + d_n (1 - y_n) = 0`; `y_n = 1` relaxes the demand
//! or supply of a source or sink. The scenario is functional when the
//! configured logic finds no relaxed node.
//!
//! A failed node takes its incident edges and its control out of service, so
//! its balance row collapses to `d_n (1 - y_n) = 0`.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::ReliabilityError;
use crate::graph::{Network, NodeRole};
use crate::lp::{self, LinearProgram, LpStatus, Relation, FEAS_TOL};
use crate::milp::{self, MipStatus, MixedIntegerProgram};
use crate::scenario::{Scenario, ScenarioSet};

/// Relaxed indicators above this value round to one.
pub const ROUND_TOL: f64 = 1e-6;

/// Which relaxed nodes make a scenario nonfunctional.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogicSpec {
    /// Every source and sink must be unrelaxed.
    #[default]
    AllSinks,
    /// Only the listed sinks must be unrelaxed.
    SubsetReachable { required: BTreeSet<String> },
}

impl LogicSpec {
    pub fn check(&self, network: &Network) -> Result<(), ReliabilityError> {
        if let LogicSpec::SubsetReachable { required } = self {
            for id in required {
                match network.node_index(id) {
                    Some(n) if network.nodes()[n].role == NodeRole::Sink => {}
                    _ => {
                        return Err(ReliabilityError::Structure(format!(
                            "required node `{id}` is not a sink"
                        )))
                    }
                }
            }
        }
        Ok(())
    }

    fn is_required(&self, network: &Network, n: usize) -> bool {
        match self {
            LogicSpec::AllSinks => true,
            LogicSpec::SubsetReachable { required } => required.contains(&network.nodes()[n].id),
        }
    }
}

/// Round a relaxed indicator: any value above [`ROUND_TOL`] counts as relaxed.
pub fn rounding_rule(relaxed_y: f64) -> u8 {
    (relaxed_y > ROUND_TOL) as u8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityOutcome {
    pub functional: bool,
    /// Rounded relaxation indicator per source and sink node.
    pub y_values: BTreeMap<String, u8>,
    /// Flow per edge, zero on edges out of service.
    pub flows: Vec<f64>,
    /// Control per node, zero where not controllable or failed.
    pub controls: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityEstimate {
    pub value: f64,
    pub samples: usize,
    pub standard_error: f64,
    pub per_scenario: Vec<FeasibilityOutcome>,
}

impl ReliabilityEstimate {
    pub fn from_outcomes(per_scenario: Vec<FeasibilityOutcome>) -> Self {
        let samples = per_scenario.len();
        let hits = per_scenario.iter().filter(|o| o.functional).count();
        let value = hits as f64 / samples as f64;
        ReliabilityEstimate {
            value,
            samples,
            standard_error: (value * (1.0 - value) / samples as f64).sqrt(),
            per_scenario,
        }
    }

    pub fn functional(&self) -> Vec<bool> {
        self.per_scenario.iter().map(|o| o.functional).collect()
    }
}

/// How relaxation indicators are attached to source and sink balances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Indicators<'a> {
    /// One indicator per source/sink node, each costing one unit.
    PerNode,
    /// One indicator shared by every source/sink node.
    Shared,
    /// One indicator shared by the required nodes; the others get free
    /// indicators of their own.
    Subset(&'a LogicSpec),
}

/// Variable layout of one scenario block inside a larger program.
#[derive(Debug, Clone)]
pub(crate) struct Block {
    pub z: Vec<Option<usize>>,
    pub u: Vec<Option<usize>>,
    pub y: Vec<Option<usize>>,
    /// Indicator whose value decides functionality.
    pub decisive: Vec<usize>,
    pub binaries: Vec<usize>,
}

pub(crate) struct BlockSpec<'a> {
    pub network: &'a Network,
    pub node_up: &'a [bool],
    /// Edges that exist and carry flow in this scenario.
    pub edge_on: &'a [bool],
    pub edge_bounds: &'a [(f64, f64)],
    pub control_bounds: &'a [(f64, f64)],
    pub d: &'a [f64],
    pub indicators: Indicators<'a>,
    /// Objective weight of each decisive indicator (maximization).
    pub weight: f64,
}

/// Append one scenario's balance system to `lp`.
pub(crate) fn add_block(lp: &mut LinearProgram, spec: &BlockSpec) -> Block {
    let net = spec.network;
    let z: Vec<Option<usize>> = (0..net.edge_count())
        .map(|e| {
            spec.edge_on[e].then(|| lp.add_var(spec.edge_bounds[e].0, spec.edge_bounds[e].1, 0.0))
        })
        .collect();
    let u: Vec<Option<usize>> = (0..net.node_count())
        .map(|n| {
            (spec.node_up[n] && net.nodes()[n].controllable())
                .then(|| lp.add_var(spec.control_bounds[n].0, spec.control_bounds[n].1, 0.0))
        })
        .collect();

    let terminal = |n: usize| net.nodes()[n].role != NodeRole::Relay;
    let mut y = vec![None; net.node_count()];
    let mut decisive = Vec::new();
    let mut binaries = Vec::new();
    match spec.indicators {
        Indicators::PerNode => {
            for n in (0..net.node_count()).filter(|&n| terminal(n)) {
                let v = lp.add_var(0.0, 1.0, -spec.weight);
                y[n] = Some(v);
                decisive.push(v);
                binaries.push(v);
            }
        }
        Indicators::Shared => {
            let v = lp.add_var(0.0, 1.0, -spec.weight);
            for n in (0..net.node_count()).filter(|&n| terminal(n)) {
                y[n] = Some(v);
            }
            decisive.push(v);
            binaries.push(v);
        }
        Indicators::Subset(logic) => {
            let shared = lp.add_var(0.0, 1.0, -spec.weight);
            decisive.push(shared);
            binaries.push(shared);
            for n in (0..net.node_count()).filter(|&n| terminal(n)) {
                if net.nodes()[n].role == NodeRole::Sink && logic.is_required(net, n) {
                    y[n] = Some(shared);
                } else {
                    let v = lp.add_var(0.0, 1.0, 0.0);
                    y[n] = Some(v);
                    binaries.push(v);
                }
            }
        }
    }

    // Σ_e A_ne z_e + u_n - d_n y_n = -d_n
    for n in 0..net.node_count() {
        let mut coeffs = Vec::new();
        for e in net.in_edges(n) {
            if let Some(v) = z[e] {
                coeffs.push((v, 1.0));
            }
        }
        for e in net.out_edges(n) {
            if let Some(v) = z[e] {
                coeffs.push((v, -1.0));
            }
        }
        if let Some(v) = u[n] {
            coeffs.push((v, 1.0));
        }
        let d = spec.d[n];
        if let (Some(v), true) = (y[n], d != 0.0) {
            coeffs.push((v, -d));
        }
        if !coeffs.is_empty() || d != 0.0 {
            lp.add_row(coeffs, Relation::Eq, -d);
        }
    }

    Block { z, u, y, decisive, binaries }
}

impl Block {
    pub(crate) fn outcome(&self, network: &Network, x: &[f64]) -> FeasibilityOutcome {
        let functional = self.decisive.iter().all(|&v| rounding_rule(x[v]) == 0);
        let y_values = self
            .y
            .iter()
            .enumerate()
            .filter_map(|(n, v)| v.map(|v| (network.nodes()[n].id.clone(), rounding_rule(x[v]))))
            .collect();
        let value = |v: &Option<usize>| v.map_or(0.0, |v| x[v]);
        FeasibilityOutcome {
            functional,
            y_values,
            flows: self.z.iter().map(value).collect(),
            controls: self.u.iter().map(value).collect(),
        }
    }
}

/// Solve a block program, by LP relaxation or exactly.
pub(crate) fn solve_program(
    lp: &LinearProgram,
    binaries: &[usize],
    use_milp: bool,
) -> Result<Option<Vec<f64>>, ReliabilityError> {
    if use_milp {
        let sol = milp::solve_mip(&MixedIntegerProgram::new(lp.clone(), binaries.to_vec()))?;
        Ok((sol.status == MipStatus::Optimal).then_some(sol.primal))
    } else {
        let sol = lp::solve(lp)?;
        Ok((sol.status == LpStatus::Optimal).then_some(sol.primal))
    }
}

fn node_mask(scenario: &Scenario) -> Vec<bool> {
    scenario.xi_nodes.iter().map(|&x| x == 1).collect()
}

/// Edges that exist (non-candidate) and survive with both end nodes.
fn built_edges(network: &Network, scenario: &Scenario) -> Vec<bool> {
    scenario
        .effective_edges(network)
        .into_iter()
        .zip(network.edges())
        .map(|(on, e)| on && !e.candidate)
        .collect()
}

/// `ψ(A, ξ)` for one source, one sink, no controls and `Z = R_+`, with a
/// single indicator `y` and injections `d = +1 / -1`. Solved through the LP
/// relaxation, which is exact for this problem class.
pub fn psi_single(network: &Network, scenario: &Scenario) -> Result<FeasibilityOutcome, ReliabilityError> {
    psi_single_with(network, scenario, false)
}

/// [`psi_single`] solved either by LP relaxation or by branch-and-bound.
pub fn psi_single_with(
    network: &Network,
    scenario: &Scenario,
    use_milp: bool,
) -> Result<FeasibilityOutcome, ReliabilityError> {
    scenario.check_dims(network)?;
    let sources: Vec<usize> = network.nodes_with_role(NodeRole::Source).collect();
    let sinks: Vec<usize> = network.nodes_with_role(NodeRole::Sink).collect();
    if sources.len() != 1 || sinks.len() != 1 {
        return Err(ReliabilityError::Structure(format!(
            "single source/sink problem needs exactly one source and one sink, found {} and {}",
            sources.len(),
            sinks.len()
        )));
    }
    if let Some(n) = network.nodes().iter().find(|n| n.controllable()) {
        return Err(ReliabilityError::Structure(format!(
            "single source/sink problem takes no controls, node `{}` is controllable",
            n.id
        )));
    }
    let d: Vec<f64> = network
        .nodes()
        .iter()
        .map(|n| match n.role {
            NodeRole::Source => 1.0,
            NodeRole::Sink => -1.0,
            NodeRole::Relay => 0.0,
        })
        .collect();
    let edge_bounds = vec![(0.0, f64::INFINITY); network.edge_count()];
    let control_bounds = vec![(0.0, 0.0); network.node_count()];
    let node_up = node_mask(scenario);
    let edge_on = built_edges(network, scenario);
    let mut lp = LinearProgram::new();
    let block = add_block(
        &mut lp,
        &BlockSpec {
            network,
            node_up: &node_up,
            edge_on: &edge_on,
            edge_bounds: &edge_bounds,
            control_bounds: &control_bounds,
            d: &d,
            indicators: Indicators::Shared,
            weight: 1.0,
        },
    );
    let x = solve_program(&lp, &block.binaries, use_milp)?
        .expect("y = 1, z = 0 is always feasible");
    Ok(block.outcome(network, &x))
}

/// `ψ(A, ξ, Z, U)` for general networks with controls and flow boxes.
///
/// With `use_milp` the indicators are binary and solved by branch-and-bound;
/// otherwise the LP relaxation is solved and indicators are rounded with
/// [`rounding_rule`].
pub fn psi_general(
    network: &Network,
    scenario: &Scenario,
    logic: &LogicSpec,
    use_milp: bool,
) -> Result<FeasibilityOutcome, ReliabilityError> {
    scenario.check_dims(network)?;
    logic.check(network)?;
    let node_up = node_mask(scenario);
    let edge_on = built_edges(network, scenario);
    evaluate_pattern(network, &node_up, &edge_on, logic, use_milp)
}

fn evaluate_pattern(
    network: &Network,
    node_up: &[bool],
    edge_on: &[bool],
    logic: &LogicSpec,
    use_milp: bool,
) -> Result<FeasibilityOutcome, ReliabilityError> {
    let edge_bounds: Vec<(f64, f64)> = network.edges().iter().map(|e| (e.flow.lower, e.flow.upper)).collect();
    let control_bounds: Vec<(f64, f64)> = network.nodes().iter().map(|n| n.control_bounds()).collect();
    let d: Vec<f64> = network.nodes().iter().map(|n| n.d).collect();
    let indicators = match logic {
        LogicSpec::AllSinks => Indicators::PerNode,
        LogicSpec::SubsetReachable { .. } => Indicators::Subset(logic),
    };
    let mut lp = LinearProgram::new();
    let block = add_block(
        &mut lp,
        &BlockSpec {
            network,
            node_up,
            edge_on,
            edge_bounds: &edge_bounds,
            control_bounds: &control_bounds,
            d: &d,
            indicators,
            weight: 1.0,
        },
    );
    match solve_program(&lp, &block.binaries, use_milp)? {
        Some(x) => Ok(block.outcome(network, &x)),
        // Only lower bounds on flows or controls can make y = 1 infeasible.
        None => Ok(nonfunctional(network, &block)),
    }
}

fn nonfunctional(network: &Network, block: &Block) -> FeasibilityOutcome {
    FeasibilityOutcome {
        functional: false,
        y_values: block
            .y
            .iter()
            .enumerate()
            .filter_map(|(n, v)| v.map(|_| (network.nodes()[n].id.clone(), 1)))
            .collect(),
        flows: vec![0.0; network.edge_count()],
        controls: vec![0.0; network.node_count()],
    }
}

/// Sample-average reliability over a scenario set.
///
/// Scenarios with identical effective failure patterns share one solve;
/// distinct patterns are evaluated in parallel on the current rayon pool.
pub fn estimate_reliability(
    network: &Network,
    scenarios: &ScenarioSet,
    logic: &LogicSpec,
    use_milp: bool,
) -> Result<ReliabilityEstimate, ReliabilityError> {
    scenarios.check_dims(network)?;
    logic.check(network)?;
    if scenarios.is_empty() {
        return Err(ReliabilityError::Dimension("empty scenario set".into()));
    }
    let (patterns, pattern_of) = distinct_patterns(network, scenarios);
    let first_use = {
        let mut first = vec![usize::MAX; patterns.len()];
        for (k, &p) in pattern_of.iter().enumerate().rev() {
            first[p] = k;
        }
        first
    };
    let outcomes: Vec<Result<FeasibilityOutcome, ReliabilityError>> = patterns
        .par_iter()
        .map(|(nodes, edges)| evaluate_pattern(network, nodes, edges, logic, use_milp))
        .collect();
    let mut resolved = Vec::with_capacity(outcomes.len());
    for (p, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(o) => resolved.push(o),
            Err(e) => {
                return Err(ReliabilityError::Scenario {
                    index: scenarios.scenarios[first_use[p]].k,
                    source: Box::new(e),
                })
            }
        }
    }
    Ok(ReliabilityEstimate::from_outcomes(
        pattern_of.iter().map(|&p| resolved[p].clone()).collect(),
    ))
}

pub(crate) type Pattern = (Vec<bool>, Vec<bool>);

/// Distinct `(node up, edge in service)` patterns in first-seen order and the
/// pattern index of every scenario.
pub(crate) fn distinct_patterns(network: &Network, scenarios: &ScenarioSet) -> (Vec<Pattern>, Vec<usize>) {
    let mut index: HashMap<Pattern, usize> = HashMap::new();
    let mut patterns = Vec::new();
    let pattern_of = scenarios
        .scenarios
        .iter()
        .map(|s| {
            let key = (node_mask(s), built_edges(network, s));
            *index.entry(key.clone()).or_insert_with(|| {
                patterns.push(key);
                patterns.len() - 1
            })
        })
        .collect();
    (patterns, pattern_of)
}

/// Per-scenario outcomes as JSON lines `{k, functional, y}`.
pub fn outcomes_jsonl(scenarios: &ScenarioSet, estimate: &ReliabilityEstimate) -> String {
    #[derive(Serialize)]
    struct Line<'a> {
        k: usize,
        functional: bool,
        y: &'a BTreeMap<String, u8>,
    }
    let mut out = String::new();
    for (s, o) in scenarios.scenarios.iter().zip(&estimate.per_scenario) {
        out.push_str(
            &serde_json::to_string(&Line {
                k: s.k,
                functional: o.functional,
                y: &o.y_values,
            })
            .expect("outcome serializes"),
        );
        out.push('\n');
    }
    out
}

/// Check that an outcome's flows and controls satisfy the scenario balances.
pub fn audit_outcome(network: &Network, scenario: &Scenario, outcome: &FeasibilityOutcome) -> Result<(), String> {
    let edge_on = built_edges(network, scenario);
    for (e, edge) in network.edges().iter().enumerate() {
        let z = outcome.flows[e];
        if edge_on[e] && (z < edge.flow.lower - FEAS_TOL || z > edge.flow.upper + FEAS_TOL) {
            return Err(format!("edge `{}` flow {z} outside its box", edge.id));
        }
        if !edge_on[e] && z != 0.0 {
            return Err(format!("edge `{}` is out of service but carries {z}", edge.id));
        }
    }
    for (n, node) in network.nodes().iter().enumerate() {
        let y = outcome.y_values.get(&node.id).copied().unwrap_or(0);
        if outcome.functional && y == 0 {
            let inflow: f64 = network.in_edges(n).map(|e| outcome.flows[e]).sum();
            let outflow: f64 = network.out_edges(n).map(|e| outcome.flows[e]).sum();
            let balance = inflow - outflow + outcome.controls[n] + node.d;
            if balance.abs() > 1e-6 {
                return Err(format!("node `{}` balance off by {balance}", node.id));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::*;
    use crate::graph::{Edge, Node};
    use crate::scenario::{sample_scenarios, LifetimeDistribution};

    fn fail_edges(net: &Network, ids: &[&str]) -> Scenario {
        let mut s = Scenario::intact(net);
        for id in ids {
            s.xi_edges[net.edge_index(id).unwrap()] = 0;
        }
        s
    }

    #[test]
    fn rounding() {
        assert_eq!(rounding_rule(0.0), 0);
        assert_eq!(rounding_rule(1.0), 1);
        assert_eq!(rounding_rule(3e-4), 1);
        assert_eq!(rounding_rule(1e-9), 0);
    }

    #[test]
    fn bridge_intact_is_functional() {
        let net = bridge();
        let o = psi_single(&net, &Scenario::intact(&net)).unwrap();
        assert!(o.functional);
        audit_outcome(&net, &Scenario::intact(&net), &o).unwrap();
    }

    #[test]
    fn bridge_sink_cut_off() {
        let net = bridge();
        let s = fail_edges(&net, &["e24", "e34"]);
        assert!(!psi_single(&net, &s).unwrap().functional);
        assert!(!psi_single_with(&net, &s, true).unwrap().functional);
        // Any single one of the two is survivable.
        assert!(psi_single(&net, &fail_edges(&net, &["e24"])).unwrap().functional);
        assert!(psi_single(&net, &fail_edges(&net, &["e34", "e13"])).unwrap().functional);
        // Edges are directed: n3 cannot reach n2.
        assert!(!psi_single(&net, &fail_edges(&net, &["e34", "e12"])).unwrap().functional);
    }

    #[test]
    fn single_edge_failed() {
        let net = single_edge();
        let o = psi_single(&net, &fail_edges(&net, &["ab"])).unwrap();
        assert!(!o.functional);
        assert_eq!(o.flows, vec![0.0]);
        assert_eq!(o.y_values["a"], 1);
        assert_eq!(o.y_values["b"], 1);
    }

    #[test]
    fn single_rejects_controls_and_multiple_sinks() {
        let net = three_node();
        let err = psi_single(&net, &Scenario::intact(&net)).unwrap_err();
        assert!(err.to_string().contains("exactly one source and one sink"));
    }

    #[test]
    fn three_node_source_failure() {
        let net = three_node();
        let mut s = Scenario::intact(&net);
        assert!(psi_general(&net, &s, &LogicSpec::AllSinks, false).unwrap().functional);
        s.xi_nodes[0] = 0;
        for milp in [false, true] {
            assert!(!psi_general(&net, &s, &LogicSpec::AllSinks, milp).unwrap().functional);
        }
    }

    #[test]
    fn saturated_path_is_nonfunctional() {
        // c3 is served through c1 -> c3 with capacity 10; demand raised to 12
        // exceeds the only surviving path even though the graph is connected.
        let base = three_node();
        let mut nodes = base.nodes().to_vec();
        nodes[3].d = -12.0;
        nodes[0].control = Some(crate::graph::Range::new(0.0, 40.0));
        let mut edges = base.edges().to_vec();
        edges[0].flow.upper = 40.0;
        let net = base.rebuild(nodes, edges).unwrap();
        let s = Scenario::intact(&net);
        for milp in [false, true] {
            let o = psi_general(&net, &s, &LogicSpec::AllSinks, milp).unwrap();
            assert!(!o.functional);
            assert_eq!(o.y_values["c3"], 1);
        }
        let only_c2 = LogicSpec::SubsetReachable { required: ["c2".to_string()].into() };
        assert!(psi_general(&net, &s, &only_c2, true).unwrap().functional);
    }

    #[test]
    fn subset_must_name_sinks() {
        let net = three_node();
        let logic = LogicSpec::SubsetReachable { required: ["p".to_string()].into() };
        assert!(psi_general(&net, &Scenario::intact(&net), &logic, false).is_err());
    }

    #[test]
    fn always_on_gives_unit_reliability() {
        let net = bridge();
        let set = sample_scenarios(&net, 100, 5.0, 1);
        let est = estimate_reliability(&net, &set, &LogicSpec::AllSinks, false).unwrap();
        assert_eq!(est.value, 1.0);
        assert_eq!(est.standard_error, 0.0);
    }

    #[test]
    fn bernoulli_single_edge() {
        let net = single_edge();
        let edges = vec![Edge::new("ab", "a", "b").with_lifetime(LifetimeDistribution::Bernoulli { p: 0.9 })];
        let net = net.rebuild(net.nodes().to_vec(), edges).unwrap();
        let k = 20_000;
        let set = sample_scenarios(&net, k, 0.0, 2024);
        let est = estimate_reliability(&net, &set, &LogicSpec::AllSinks, false).unwrap();
        assert!((est.value - 0.9).abs() <= 0.007, "{}", est.value);
        assert!((est.standard_error - (est.value * (1.0 - est.value) / k as f64).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn jsonl_lines() {
        let net = single_edge();
        let set = sample_scenarios(&net, 2, 0.0, 0);
        let est = estimate_reliability(&net, &set, &LogicSpec::AllSinks, false).unwrap();
        let text = outcomes_jsonl(&set, &est);
        assert_eq!(
            text,
            "{\"k\":0,\"functional\":true,\"y\":{\"a\":0,\"b\":0}}\n{\"k\":1,\"functional\":true,\"y\":{\"a\":0,\"b\":0}}\n"
        );
    }

    #[test]
    fn candidates_are_not_built_during_evaluation() {
        let net = crate::graph::with_candidates(
            &Network::new(
                "x",
                vec![Node::new("a", NodeRole::Source, 1.0), Node::new("b", NodeRole::Sink, -1.0)],
                vec![],
            )
            .unwrap(),
            vec![Edge::new("ab", "a", "b").as_candidate(100.0)],
        )
        .unwrap();
        assert!(!psi_general(&net, &Scenario::intact(&net), &LogicSpec::AllSinks, false).unwrap().functional);
    }
}
