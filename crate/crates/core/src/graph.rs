//! Network data model: nodes with roles and controls, directed edges with
//! flow boxes, incidence matrices and structural validation.
//!
//! Incidence sign convention: `+1` where an edge enters a node and `-1`
//! where it leaves, so a node balance reads `inflow - outflow + u + d = 0`
//! and a source with `d > 0` pushes its supply out along non-negative flows.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::NetworkError;
use crate::scenario::LifetimeDistribution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeRole {
    Source,
    Sink,
    Relay,
}

/// A closed interval `[lower, upper]` with an optional design ceiling.
///
/// `upper` may be `+inf` (serialized as `null`). `max_upper` is the largest
/// value a capacity design may raise `upper` to; when absent the design
/// menu defaults to `[upper, 10 * upper]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lower: f64,
    #[serde(with = "inf_as_null")]
    pub upper: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_upper: Option<f64>,
}

impl Range {
    pub fn new(lower: f64, upper: f64) -> Self {
        Range { lower, upper, max_upper: None }
    }

    pub fn unbounded_above(lower: f64) -> Self {
        Range::new(lower, f64::INFINITY)
    }

    /// Design menu for the upper bound.
    pub fn design_menu(&self) -> (f64, f64) {
        let hi = self.max_upper.unwrap_or(10.0 * self.upper);
        (self.upper, hi.max(self.upper))
    }
}

mod inf_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_none()
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub role: NodeRole,
    /// Fixed injection. Positive at sources, negative at sinks, zero at relays.
    pub d: f64,
    /// Controllable injection `u` in `[lower, upper]`; `None` pins `u = 0`.
    pub control: Option<Range>,
    pub lifetime: LifetimeDistribution,
}

impl Node {
    pub fn new(id: impl Into<String>, role: NodeRole, d: f64) -> Self {
        Node {
            id: id.into(),
            role,
            d,
            control: None,
            lifetime: LifetimeDistribution::AlwaysOn,
        }
    }

    pub fn with_control(mut self, lower: f64, upper: f64) -> Self {
        self.control = Some(Range::new(lower, upper));
        self
    }

    pub fn with_lifetime(mut self, lifetime: LifetimeDistribution) -> Self {
        self.lifetime = lifetime;
        self
    }

    pub fn controllable(&self) -> bool {
        self.control.is_some()
    }

    /// `(lower, upper)` of the control, `(0, 0)` when not controllable.
    pub fn control_bounds(&self) -> (f64, f64) {
        self.control.map(|c| (c.lower, c.upper)).unwrap_or((0.0, 0.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub id: String,
    pub tail: String,
    pub head: String,
    pub flow: Range,
    pub lifetime: LifetimeDistribution,
    #[serde(default)]
    pub candidate: bool,
    #[serde(default)]
    pub capital_cost: f64,
}

impl Edge {
    pub fn new(id: impl Into<String>, tail: impl Into<String>, head: impl Into<String>) -> Self {
        Edge {
            id: id.into(),
            tail: tail.into(),
            head: head.into(),
            flow: Range::unbounded_above(0.0),
            lifetime: LifetimeDistribution::AlwaysOn,
            candidate: false,
            capital_cost: 0.0,
        }
    }

    pub fn with_flow(mut self, lower: f64, upper: f64) -> Self {
        self.flow = Range::new(lower, upper);
        self
    }

    pub fn with_lifetime(mut self, lifetime: LifetimeDistribution) -> Self {
        self.lifetime = lifetime;
        self
    }

    pub fn as_candidate(mut self, capital_cost: f64) -> Self {
        self.candidate = true;
        self.capital_cost = capital_cost;
        self
    }
}

/// A structural problem found by [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    DuplicateNodeId(String),
    DuplicateEdgeId(String),
    DanglingEndpoint { edge: String, node: String },
    SelfLoop(String),
    FlowBounds(String),
    NegativeFlowLower(String),
    ControlBounds(String),
    NegativeControl(String),
    CapitalCostOnBaseEdge(String),
    SourceFlow(String),
    SinkFlow(String),
    RelayFlow(String),
    Lifetime(String),
    NoSources,
    NoSinks,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateNodeId(id) => write!(f, "node `{id}`: duplicate node id"),
            Violation::DuplicateEdgeId(id) => write!(f, "edge `{id}`: duplicate edge id"),
            Violation::DanglingEndpoint { edge, node } => {
                write!(f, "edge `{edge}`: endpoint `{node}` is not a node")
            }
            Violation::SelfLoop(id) => write!(f, "edge `{id}`: tail equals head"),
            Violation::FlowBounds(id) => write!(f, "edge `{id}`: flow lower exceeds upper"),
            Violation::NegativeFlowLower(id) => write!(f, "edge `{id}`: flow lower is negative"),
            Violation::ControlBounds(id) => write!(f, "node `{id}`: control lower exceeds upper"),
            Violation::NegativeControl(id) => write!(f, "node `{id}`: control lower is negative"),
            Violation::CapitalCostOnBaseEdge(id) => {
                write!(f, "edge `{id}`: non-candidate edge carries a capital cost")
            }
            Violation::SourceFlow(id) => {
                write!(f, "node `{id}`: source flow must be positive unless controllable")
            }
            Violation::SinkFlow(id) => write!(f, "node `{id}`: sink flow must be negative"),
            Violation::RelayFlow(id) => write!(f, "node `{id}`: relay flow must be zero"),
            Violation::Lifetime(id) => write!(f, "component `{id}`: invalid lifetime parameters"),
            Violation::NoSources => write!(f, "no source nodes"),
            Violation::NoSinks => write!(f, "no sink nodes"),
        }
    }
}

/// An immutable, validated directed network.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Network {
    name: String,
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    #[serde(skip)]
    tails: Vec<usize>,
    #[serde(skip)]
    heads: Vec<usize>,
}

#[derive(Deserialize)]
struct RawNetwork {
    name: String,
    nodes: Vec<RawNode>,
    edges: Vec<Edge>,
}

#[derive(Deserialize)]
struct RawNode {
    id: String,
    role: NodeRole,
    #[serde(default)]
    d: Option<f64>,
    #[serde(default)]
    control: Option<Range>,
    lifetime: LifetimeDistribution,
}

impl<'de> Deserialize<'de> for Network {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let raw = RawNetwork::deserialize(de)?;
        let n_src = raw
            .nodes
            .iter()
            .filter(|n| n.role == NodeRole::Source && n.control.is_none())
            .count();
        let n_sink = raw.nodes.iter().filter(|n| n.role == NodeRole::Sink).count();
        // Omitted injections default to +1 per fixed source and a matching
        // share of -1 per sink, so that the total is zero.
        let sink_share = if n_sink > 0 && n_src > 0 {
            n_src as f64 / n_sink as f64
        } else {
            1.0
        };
        let nodes = raw
            .nodes
            .into_iter()
            .map(|n| {
                let d = n.d.unwrap_or(match n.role {
                    NodeRole::Source if n.control.is_some() => 0.0,
                    NodeRole::Source => 1.0,
                    NodeRole::Sink => -sink_share,
                    NodeRole::Relay => 0.0,
                });
                Node {
                    id: n.id,
                    role: n.role,
                    d,
                    control: n.control,
                    lifetime: n.lifetime,
                }
            })
            .collect();
        Network::new(raw.name, nodes, raw.edges).map_err(serde::de::Error::custom)
    }
}

impl Network {
    pub fn new(
        name: impl Into<String>,
        nodes: Vec<Node>,
        edges: Vec<Edge>,
    ) -> Result<Self, NetworkError> {
        let violations = check(&nodes, &edges);
        if !violations.is_empty() {
            return Err(NetworkError::Invalid(violations));
        }
        let index: HashMap<&str, usize> =
            nodes.iter().enumerate().map(|(i, n)| (n.id.as_str(), i)).collect();
        let tails = edges.iter().map(|e| index[e.tail.as_str()]).collect();
        let heads = edges.iter().map(|e| index[e.head.as_str()]).collect();
        Ok(Network {
            name: name.into(),
            nodes,
            edges,
            tails,
            heads,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Index of the node an edge leaves.
    pub fn tail(&self, edge: usize) -> usize {
        self.tails[edge]
    }

    /// Index of the node an edge enters.
    pub fn head(&self, edge: usize) -> usize {
        self.heads[edge]
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    pub fn edge_index(&self, id: &str) -> Option<usize> {
        self.edges.iter().position(|e| e.id == id)
    }

    pub fn nodes_with_role(&self, role: NodeRole) -> impl Iterator<Item = usize> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(move |(_, n)| n.role == role)
            .map(|(i, _)| i)
    }

    /// Edges leaving `node`.
    pub fn out_edges(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.edges.len()).filter(move |&e| self.tails[e] == node)
    }

    /// Edges entering `node`.
    pub fn in_edges(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.edges.len()).filter(move |&e| self.heads[e] == node)
    }

    pub fn candidate_edges(&self) -> impl Iterator<Item = usize> + '_ {
        self.edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.candidate)
            .map(|(i, _)| i)
    }

    pub fn has_candidates(&self) -> bool {
        self.edges.iter().any(|e| e.candidate)
    }

    /// The network restricted to its non-candidate edges.
    pub fn base(&self) -> Network {
        let edges = self.edges.iter().filter(|e| !e.candidate).cloned().collect();
        Network::new(self.name.clone(), self.nodes.clone(), edges)
            .expect("restriction of a valid network is valid")
    }

    /// Rebuild with modified components; revalidates.
    pub fn rebuild(
        &self,
        nodes: Vec<Node>,
        edges: Vec<Edge>,
    ) -> Result<Network, NetworkError> {
        Network::new(self.name.clone(), nodes, edges)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serializes")
    }

    pub fn from_json(text: &str) -> Result<Network, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Dense node-by-edge incidence matrix in input order.
pub fn incidence(network: &Network) -> Vec<Vec<f64>> {
    let mut a = vec![vec![0.0; network.edge_count()]; network.node_count()];
    for e in 0..network.edge_count() {
        a[network.tail(e)][e] = -1.0;
        a[network.head(e)][e] = 1.0;
    }
    a
}

/// All invariant violations of a network; empty when valid.
pub fn validate(network: &Network) -> Vec<Violation> {
    check(&network.nodes, &network.edges)
}

fn check(nodes: &[Node], edges: &[Edge]) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for n in nodes {
        if !seen.insert(n.id.as_str()) {
            out.push(Violation::DuplicateNodeId(n.id.clone()));
        }
        match n.role {
            NodeRole::Source if !(n.d > 0.0 || (n.controllable() && n.d >= 0.0)) => {
                out.push(Violation::SourceFlow(n.id.clone()))
            }
            NodeRole::Sink if !(n.d < 0.0) => out.push(Violation::SinkFlow(n.id.clone())),
            NodeRole::Relay if n.d != 0.0 => out.push(Violation::RelayFlow(n.id.clone())),
            _ => {}
        }
        if let Some(c) = n.control {
            if !(c.lower <= c.upper) {
                out.push(Violation::ControlBounds(n.id.clone()));
            }
            if c.lower < 0.0 {
                out.push(Violation::NegativeControl(n.id.clone()));
            }
        }
        if !n.lifetime.is_valid() {
            out.push(Violation::Lifetime(n.id.clone()));
        }
    }
    let mut seen_edges = HashSet::new();
    for e in edges {
        if !seen_edges.insert(e.id.as_str()) {
            out.push(Violation::DuplicateEdgeId(e.id.clone()));
        }
        for end in [&e.tail, &e.head] {
            if !seen.contains(end.as_str()) {
                out.push(Violation::DanglingEndpoint {
                    edge: e.id.clone(),
                    node: end.clone(),
                });
            }
        }
        if e.tail == e.head {
            out.push(Violation::SelfLoop(e.id.clone()));
        }
        if !(e.flow.lower <= e.flow.upper) {
            out.push(Violation::FlowBounds(e.id.clone()));
        }
        if e.flow.lower < 0.0 {
            out.push(Violation::NegativeFlowLower(e.id.clone()));
        }
        if !e.candidate && e.capital_cost != 0.0 {
            out.push(Violation::CapitalCostOnBaseEdge(e.id.clone()));
        }
        if !e.lifetime.is_valid() {
            out.push(Violation::Lifetime(e.id.clone()));
        }
    }
    if !nodes.iter().any(|n| n.role == NodeRole::Source) {
        out.push(Violation::NoSources);
    }
    if !nodes.iter().any(|n| n.role == NodeRole::Sink) {
        out.push(Violation::NoSinks);
    }
    out
}

/// Expand a network with candidate edges `Ê`, giving `Ē = E ∪ Ê`.
pub fn with_candidates(network: &Network, candidates: Vec<Edge>) -> Result<Network, NetworkError> {
    let mut ids: HashSet<&str> = network.edges.iter().map(|e| e.id.as_str()).collect();
    for c in &candidates {
        if !ids.insert(c.id.as_str()) {
            return Err(NetworkError::DuplicateCandidate(c.id.clone()));
        }
    }
    let mut edges = network.edges.clone();
    edges.extend(candidates.into_iter().map(|mut c| {
        c.candidate = true;
        c
    }));
    network.rebuild(network.nodes.clone(), edges)
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn bridge_incidence_column_e12() {
        let net = bridge();
        let a = incidence(&net);
        let col: Vec<f64> = a.iter().map(|row| row[0]).collect();
        assert_eq!(col, vec![-1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn single_edge_incidence() {
        assert_eq!(incidence(&single_edge()), vec![vec![-1.0], vec![1.0]]);
    }

    #[test]
    fn column_sums_vanish() {
        let a = incidence(&bridge());
        for e in 0..5 {
            let s: f64 = a.iter().map(|r| r[e]).sum();
            assert_eq!(s, 0.0);
        }
    }

    #[test]
    fn three_node_validates() {
        assert!(validate(&three_node()).is_empty());
    }

    #[test]
    fn positive_sink_flow_is_reported() {
        let nodes = vec![
            Node::new("a", NodeRole::Source, 1.0),
            Node::new("b", NodeRole::Sink, 1.0),
        ];
        let err = Network::new("bad", nodes, vec![Edge::new("ab", "a", "b")]).unwrap_err();
        let NetworkError::Invalid(v) = err else { panic!() };
        assert!(v.iter().any(|v| v.to_string().contains("sink flow must be negative")));
    }

    #[test]
    fn missing_sources_are_reported() {
        let nodes = vec![
            Node::new("a", NodeRole::Relay, 0.0),
            Node::new("b", NodeRole::Sink, -1.0),
        ];
        let err = Network::new("bad", nodes, vec![Edge::new("ab", "a", "b")]).unwrap_err();
        let NetworkError::Invalid(v) = err else { panic!() };
        assert!(v.contains(&Violation::NoSources));
        assert_eq!(Violation::NoSources.to_string(), "no source nodes");
    }

    #[test]
    fn dangling_and_duplicate_ids() {
        let nodes = vec![
            Node::new("a", NodeRole::Source, 1.0),
            Node::new("a", NodeRole::Sink, -1.0),
        ];
        let edges = vec![Edge::new("x", "a", "zz"), Edge::new("x", "a", "a")];
        let v = check(&nodes, &edges);
        assert!(v.contains(&Violation::DuplicateNodeId("a".into())));
        assert!(v.contains(&Violation::DuplicateEdgeId("x".into())));
        assert!(v.contains(&Violation::SelfLoop("x".into())));
        assert!(v.iter().any(|v| matches!(v, Violation::DanglingEndpoint { .. })));
    }

    #[test]
    fn empty_expansion_is_identity() {
        let net = three_node();
        assert_eq!(with_candidates(&net, vec![]).unwrap(), net);
    }

    #[test]
    fn expansion_flags_candidates_and_restricts_back() {
        let net = three_node();
        let cands = vec![
            Edge::new("21", "c2", "c1").with_flow(0.0, 10.0).as_candidate(100.0),
            Edge::new("23", "c2", "c3").with_flow(0.0, 10.0),
        ];
        let ext = with_candidates(&net, cands).unwrap();
        assert_eq!(ext.edge_count(), 5);
        assert!(ext.edges()[3].candidate && ext.edges()[4].candidate);
        assert_eq!(ext.base(), net);
    }

    #[test]
    fn topology_expansion_of_empty_base() {
        let base = Network::new("t", three_node().nodes().to_vec(), vec![]).unwrap();
        let pairs = [("p", "c1"), ("p", "c2"), ("p", "c3"), ("c1", "c2"), ("c1", "c3"), ("c2", "c3")];
        let cands = pairs
            .iter()
            .enumerate()
            .map(|(i, (t, h))| Edge::new(format!("c{i}"), *t, *h).as_candidate(100.0))
            .collect();
        let ext = with_candidates(&base, cands).unwrap();
        assert_eq!(ext.edge_count(), 6);
    }

    #[test]
    fn duplicate_candidate_is_rejected() {
        let net = three_node();
        let err = with_candidates(&net, vec![Edge::new("p1", "c2", "c3")]).unwrap_err();
        assert!(matches!(err, NetworkError::DuplicateCandidate(id) if id == "p1"));
    }

    #[test]
    fn infinite_upper_serializes_as_null() {
        let json = single_edge().to_json();
        assert!(json.contains("\"upper\": null"));
        assert_eq!(Network::from_json(&json).unwrap(), single_edge());
    }

    #[test]
    fn omitted_injections_are_normalized() {
        let json = r#"{"name":"x","nodes":[
            {"id":"s","role":"source","control":null,"lifetime":"always_on"},
            {"id":"t1","role":"sink","control":null,"lifetime":"always_on"},
            {"id":"t2","role":"sink","control":null,"lifetime":"always_on"}],
            "edges":[]}"#;
        let net = Network::from_json(json).unwrap();
        let total: f64 = net.nodes().iter().map(|n| n.d).sum();
        assert_eq!(net.nodes()[0].d, 1.0);
        assert!(total.abs() < 1e-15);
    }
}
