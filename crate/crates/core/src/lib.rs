//! Reliability of networked systems under random component failures.
//!
//! A system is a directed [`graph::Network`] whose nodes and edges fail at
//! random. For one failure realization the system is functional when a flow
//! respecting edge capacities and node controls still meets every demand;
//! this is decided by a small linear or mixed-integer program
//! ([`reliability`]). Averaging that indicator over Monte-Carlo scenarios
//! ([`scenario`]) estimates the reliability, and embedding the scenario
//! programs in a budgeted optimization ([`design`]) finds capacity and
//! topology expansions of maximum reliability.
//!
//! Linear programs are solved by the self-contained simplex in [`lp`];
//! [`milp`] adds branch-and-bound on top. [`rbd`] evaluates series/parallel
//! reliability block diagrams analytically and compiles them to networks.

pub mod design;
pub mod error;
pub mod graph;
pub mod lp;
pub mod milp;
pub mod rbd;
pub mod reliability;
pub mod scenario;

pub use error::{DesignError, LpError, MipError, NetworkError, RbdError, ReliabilityError};
pub use graph::{Edge, Network, Node, NodeRole, Range};
pub use scenario::{LifetimeDistribution, Scenario, ScenarioSet};
