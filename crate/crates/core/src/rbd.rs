//! Series/parallel reliability block diagrams.
//!
//! A series block works when every child works, a parallel block when at
//! least one child does. [`eval_rbd`] evaluates a diagram in closed form and
//! [`rbd_to_network`] compiles it into a single-source, single-sink network
//! whose nodes are the components, so the diagram can also be scored by the
//! scenario programs in [`crate::reliability`].

use serde::{Deserialize, Serialize};

use crate::error::RbdError;
use crate::graph::{Edge, Network, Node, NodeRole};
use crate::scenario::LifetimeDistribution;

pub const SOURCE_ID: &str = "__source";
pub const SINK_ID: &str = "__sink";

#[derive(Debug, Clone, PartialEq)]
pub enum RbdExpr {
    Component {
        id: String,
        reliability: f64,
        /// Mean of an exponential lifetime; compiled networks fall back to a
        /// time-independent survival probability when absent.
        mean_life: Option<f64>,
    },
    Series(Vec<RbdExpr>),
    Parallel(Vec<RbdExpr>),
}

impl RbdExpr {
    pub fn component(id: impl Into<String>, reliability: f64) -> Self {
        RbdExpr::Component {
            id: id.into(),
            reliability,
            mean_life: None,
        }
    }

    /// Component with an exponential lifetime, evaluated at `eval_time`.
    pub fn exponential(id: impl Into<String>, mean_life: f64, eval_time: f64) -> Self {
        RbdExpr::Component {
            id: id.into(),
            reliability: (-eval_time / mean_life).exp(),
            mean_life: Some(mean_life),
        }
    }

    /// Component ids in left-to-right order.
    pub fn components(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect(&mut out);
        out
    }

    fn collect<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            RbdExpr::Component { id, .. } => out.push(id),
            RbdExpr::Series(c) | RbdExpr::Parallel(c) => c.iter().for_each(|c| c.collect(out)),
        }
    }

    /// Evaluation time of the first component with an exponential lifetime.
    pub fn eval_time(&self) -> Option<f64> {
        match self {
            RbdExpr::Component {
                reliability,
                mean_life: Some(m),
                ..
            } => Some(-m * reliability.ln()),
            RbdExpr::Component { .. } => None,
            RbdExpr::Series(c) | RbdExpr::Parallel(c) => c.iter().find_map(RbdExpr::eval_time),
        }
    }

    pub fn validate(&self) -> Result<(), RbdError> {
        match self {
            RbdExpr::Component { id, reliability, mean_life } => {
                if !(0.0..=1.0).contains(reliability) {
                    return Err(RbdError::Invalid(format!(
                        "component `{id}` reliability {reliability} outside [0, 1]"
                    )));
                }
                if let Some(m) = mean_life {
                    if !(*m > 0.0 && m.is_finite()) {
                        return Err(RbdError::Invalid(format!("component `{id}` mean life {m}")));
                    }
                }
            }
            RbdExpr::Series(c) | RbdExpr::Parallel(c) => {
                if c.is_empty() {
                    return Err(RbdError::Invalid("empty series or parallel block".into()));
                }
                c.iter().try_for_each(RbdExpr::validate)?;
            }
        }
        let ids = self.components();
        let mut sorted = ids.clone();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(RbdError::Invalid(format!("duplicate component `{}`", w[0])));
        }
        if let Some(id) = ids.iter().find(|id| id.starts_with("__")) {
            return Err(RbdError::Invalid(format!("component id `{id}` is reserved")));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, RbdError> {
        let raw: RawExpr = serde_json::from_str(text)?;
        let expr = raw.into_expr()?;
        expr.validate()?;
        Ok(expr)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&RawExpr::from(self)).expect("diagram serializes")
    }
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RawExpr {
    Series(Vec<RawExpr>),
    Parallel(Vec<RawExpr>),
    Component(RawComponent),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawComponent {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reliability: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mean_life: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eval_time: Option<f64>,
}

impl RawExpr {
    fn into_expr(self) -> Result<RbdExpr, RbdError> {
        let children = |c: Vec<RawExpr>| c.into_iter().map(RawExpr::into_expr).collect::<Result<Vec<_>, _>>();
        Ok(match self {
            RawExpr::Series(c) => RbdExpr::Series(children(c)?),
            RawExpr::Parallel(c) => RbdExpr::Parallel(children(c)?),
            RawExpr::Component(c) => match (c.reliability, c.mean_life, c.eval_time) {
                (Some(r), None, None) => RbdExpr::component(c.id, r),
                (None, Some(m), Some(t)) => RbdExpr::exponential(c.id, m, t),
                _ => {
                    return Err(RbdError::Invalid(format!(
                        "component `{}` needs either `reliability` or both `mean_life` and `eval_time`",
                        c.id
                    )))
                }
            },
        })
    }
}

impl From<&RbdExpr> for RawExpr {
    fn from(e: &RbdExpr) -> Self {
        match e {
            RbdExpr::Series(c) => RawExpr::Series(c.iter().map(Into::into).collect()),
            RbdExpr::Parallel(c) => RawExpr::Parallel(c.iter().map(Into::into).collect()),
            RbdExpr::Component { id, reliability, mean_life } => RawExpr::Component(match mean_life {
                // -m ln R recovers the evaluation time.
                Some(m) => RawComponent {
                    id: id.clone(),
                    reliability: None,
                    mean_life: Some(*m),
                    eval_time: Some(-m * reliability.ln()),
                },
                None => RawComponent {
                    id: id.clone(),
                    reliability: Some(*reliability),
                    mean_life: None,
                    eval_time: None,
                },
            }),
        }
    }
}

/// Closed-form reliability: products over series blocks, complements of
/// products of complements over parallel blocks.
pub fn eval_rbd(expr: &RbdExpr) -> f64 {
    match expr {
        RbdExpr::Component { reliability, .. } => *reliability,
        RbdExpr::Series(c) => c.iter().map(eval_rbd).product(),
        RbdExpr::Parallel(c) => 1.0 - c.iter().map(|c| 1.0 - eval_rbd(c)).product::<f64>(),
    }
}

/// Compile a diagram into a network with one source (`d = +1`), one sink
/// (`d = -1`), one relay node per component, and always-on junction nodes
/// around each parallel block. All edges are always on and uncapacitated.
pub fn rbd_to_network(expr: &RbdExpr) -> Result<Network, RbdError> {
    expr.validate()?;
    let mut b = Builder::default();
    b.nodes.push(Node::new(SOURCE_ID, NodeRole::Source, 1.0));
    let (entry, exit) = b.compile(expr);
    b.nodes.push(Node::new(SINK_ID, NodeRole::Sink, -1.0));
    b.link(SOURCE_ID.to_string(), entry);
    b.link(exit, SINK_ID.to_string());
    Network::new("rbd", b.nodes, b.edges).map_err(|e| RbdError::Invalid(e.to_string()))
}

#[derive(Default)]
struct Builder {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    junctions: usize,
}

impl Builder {
    fn link(&mut self, tail: String, head: String) {
        let id = format!("{tail}->{head}");
        self.edges.push(Edge::new(id, tail, head));
    }

    fn junction(&mut self) -> String {
        let id = format!("__j{}", self.junctions);
        self.junctions += 1;
        self.nodes.push(Node::new(id.clone(), NodeRole::Relay, 0.0));
        id
    }

    /// Returns the (entry, exit) node ids of the compiled block.
    fn compile(&mut self, expr: &RbdExpr) -> (String, String) {
        match expr {
            RbdExpr::Component { id, reliability, mean_life } => {
                let lifetime = match mean_life {
                    Some(mean) => LifetimeDistribution::Exponential { mean: *mean },
                    None => LifetimeDistribution::Bernoulli { p: *reliability },
                };
                self.nodes.push(Node::new(id.clone(), NodeRole::Relay, 0.0).with_lifetime(lifetime));
                (id.clone(), id.clone())
            }
            RbdExpr::Series(children) => {
                let mut ends: Option<(String, String)> = None;
                for c in children {
                    let (entry, exit) = self.compile(c);
                    ends = Some(match ends {
                        None => (entry, exit),
                        Some((first, last)) => {
                            self.link(last, entry);
                            (first, exit)
                        }
                    });
                }
                ends.expect("validated nonempty")
            }
            RbdExpr::Parallel(children) => {
                let split = self.junction();
                let merge = self.junction();
                for c in children {
                    let (entry, exit) = self.compile(c);
                    self.link(split.clone(), entry);
                    self.link(exit, merge.clone());
                }
                (split, merge)
            }
        }
    }
}

/// The pump system: valve, two pump/valve branches in parallel, mixer.
/// Every component has an exponential lifetime with the given mean.
pub fn pump_system(mean_life: f64, eval_time: f64) -> RbdExpr {
    let c = |id: &str| RbdExpr::exponential(id, mean_life, eval_time);
    RbdExpr::Series(vec![
        c("throttle_valve"),
        RbdExpr::Parallel(vec![
            RbdExpr::Series(vec![c("pump_a"), c("valve_a")]),
            RbdExpr::Series(vec![c("pump_b"), c("valve_b")]),
        ]),
        c("mixer"),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_component_identities() {
        let c = RbdExpr::component("a", 0.7);
        assert_eq!(eval_rbd(&c), 0.7);
        assert_eq!(eval_rbd(&RbdExpr::Series(vec![c.clone()])), 0.7);
        assert_eq!(eval_rbd(&RbdExpr::Parallel(vec![c])), 0.7);
    }

    #[test]
    fn parallel_with_perfect_child() {
        let e = RbdExpr::Parallel(vec![RbdExpr::component("a", 0.0), RbdExpr::component("b", 1.0)]);
        assert_eq!(eval_rbd(&e), 1.0);
        let s = RbdExpr::Series(vec![RbdExpr::component("a", 0.3), RbdExpr::component("b", 0.0)]);
        assert_eq!(eval_rbd(&s), 0.0);
    }

    #[test]
    fn pump_closed_form() {
        let r = (-0.05f64).exp();
        let expected = r * (1.0 - (1.0 - r * r).powi(2)) * r;
        let got = eval_rbd(&pump_system(100.0, 5.0));
        assert!((got - expected).abs() < 1e-15);
        assert!((got - 0.896643).abs() < 1e-6, "{got}");
    }

    #[test]
    fn single_component_compiles_to_chain() {
        let net = rbd_to_network(&RbdExpr::component("a", 0.5)).unwrap();
        assert_eq!(net.node_count(), 3);
        assert_eq!(net.edge_count(), 2);
        let two = RbdExpr::Series(vec![RbdExpr::component("a", 0.5), RbdExpr::component("b", 0.5)]);
        let net = rbd_to_network(&two).unwrap();
        assert_eq!(net.node_count(), 4);
        assert_eq!(net.edge_count(), 3);
    }

    #[test]
    fn pump_network_shape() {
        let net = rbd_to_network(&pump_system(100.0, 5.0)).unwrap();
        // source, sink, 6 components, split and merge junctions
        assert_eq!(net.node_count(), 10);
        assert_eq!(net.edge_count(), 10);
        let split = net.node_index("__j0").unwrap();
        assert_eq!(net.out_edges(split).count(), 2);
        let pump = net.node_index("pump_a").unwrap();
        assert_eq!(
            net.nodes()[pump].lifetime,
            LifetimeDistribution::Exponential { mean: 100.0 }
        );
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"series": [
            {"component": {"id": "v", "mean_life": 100, "eval_time": 5}},
            {"parallel": [{"component": {"id": "p", "reliability": 0.9}},
                          {"component": {"id": "q", "reliability": 0.8}}]}
        ]}"#;
        let e = RbdExpr::from_json(text).unwrap();
        assert!((eval_rbd(&e) - (-0.05f64).exp() * 0.98).abs() < 1e-12);
        let back = RbdExpr::from_json(&e.to_json()).unwrap();
        assert!((eval_rbd(&back) - eval_rbd(&e)).abs() < 1e-15);
        assert_eq!(back.components(), vec!["v", "p", "q"]);
    }

    #[test]
    fn invalid_diagrams() {
        assert!(RbdExpr::Series(vec![]).validate().is_err());
        assert!(RbdExpr::component("a", 1.5).validate().is_err());
        let dup = RbdExpr::Series(vec![RbdExpr::component("a", 0.5), RbdExpr::component("a", 0.5)]);
        assert!(rbd_to_network(&dup).is_err());
        assert!(RbdExpr::from_json(r#"{"component": {"id": "a"}}"#).is_err());
    }
}
