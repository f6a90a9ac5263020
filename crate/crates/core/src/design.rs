//! Budgeted reliability design.
//!
//! Decision variables are the candidate-edge switches `v`, the edge capacity
//! ceilings `z̄` and the control ceilings `ū`. Every scenario gets its own
//! copy of the balance system from [`crate::reliability`], tied to the design
//! by `z^k_e ≤ z̄_e` and `u^k_n ≤ ū_n`; a candidate edge's ceiling is
//! `z̄_e = lo_e v_e + w_e` with `w_e ≤ (hi_e - lo_e) v_e`. The program
//! maximizes the number of functional scenarios subject to
//! `cost(v, z̄, ū) ≤ ε`.
//!
//! Scenarios with the same effective failure pattern share one block,
//! weighted by multiplicity. Patterns that work under the base design, or
//! that fail under the most generous design, do not depend on the decision
//! and are counted without a block.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::DesignError;
use crate::graph::Network;
use crate::lp::{self, LinearProgram, LpStatus, Relation, FEAS_TOL};
use crate::milp::{self, MipOptions, MipStatus, MixedIntegerProgram};
use crate::reliability::{
    add_block, estimate_reliability, rounding_rule, solve_program, Block, BlockSpec, Indicators, LogicSpec,
};
use crate::scenario::ScenarioSet;

/// Allowed ranges for capacity and control ceilings. `None` marks a
/// component whose ceiling is not a decision (fixed at the network value).
#[derive(Debug, Clone, PartialEq)]
pub struct BoundMenus {
    pub flow: Vec<Option<(f64, f64)>>,
    pub control: Vec<Option<(f64, f64)>>,
}

impl BoundMenus {
    /// Menus read from the network: `[upper, max_upper]`, defaulting to
    /// `[upper, 10 upper]`. Unbounded components are not designable.
    pub fn from_network(network: &Network) -> Self {
        let menu = |r: &crate::graph::Range| {
            let (lo, hi) = r.design_menu();
            hi.is_finite().then_some((lo, hi))
        };
        BoundMenus {
            flow: network.edges().iter().map(|e| menu(&e.flow)).collect(),
            control: network
                .nodes()
                .iter()
                .map(|n| n.control.as_ref().and_then(menu))
                .collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DesignProblem {
    pub network: Network,
    pub scenarios: ScenarioSet,
    pub budget: f64,
    /// Include the candidate-edge switches; otherwise candidates stay unbuilt.
    pub enable_topology: bool,
    pub menus: BoundMenus,
    pub logic: LogicSpec,
    /// Solve the LP relaxation and round instead of branch-and-bound.
    pub relaxed: bool,
    pub max_nodes: usize,
}

impl DesignProblem {
    pub fn new(network: Network, scenarios: ScenarioSet, budget: f64) -> Self {
        DesignProblem {
            enable_topology: network.has_candidates(),
            menus: BoundMenus::from_network(&network),
            network,
            scenarios,
            budget,
            logic: LogicSpec::AllSinks,
            relaxed: false,
            max_nodes: MipOptions::default().max_nodes,
        }
    }

    pub fn relaxed(mut self, relaxed: bool) -> Self {
        self.relaxed = relaxed;
        self
    }

    pub fn with_budget(&self, budget: f64) -> Self {
        DesignProblem { budget, ..self.clone() }
    }

    fn validate(&self) -> Result<(), DesignError> {
        if !(self.budget >= 0.0) {
            return Err(DesignError::NegativeBudget(self.budget));
        }
        if self.scenarios.is_empty() {
            return Err(DesignError::Invalid("empty scenario set".into()));
        }
        self.scenarios.check_dims(&self.network)?;
        self.logic.check(&self.network)?;
        let net = &self.network;
        if self.menus.flow.len() != net.edge_count() || self.menus.control.len() != net.node_count() {
            return Err(DesignError::Invalid("bound menus do not match the network".into()));
        }
        for (e, m) in self.menus.flow.iter().enumerate() {
            let edge = &net.edges()[e];
            if let Some((lo, hi)) = *m {
                if !(lo <= hi && hi.is_finite() && lo >= edge.flow.lower) {
                    return Err(DesignError::Invalid(format!("edge `{}` menu [{lo}, {hi}]", edge.id)));
                }
            }
            if edge.candidate && self.enable_topology {
                if edge.flow.lower != 0.0 {
                    return Err(DesignError::Invalid(format!(
                        "candidate edge `{}` must have zero lower flow bound",
                        edge.id
                    )));
                }
                if !self.edge_ceiling(e).1.is_finite() {
                    return Err(DesignError::Invalid(format!(
                        "candidate edge `{}` needs a finite capacity",
                        edge.id
                    )));
                }
            }
        }
        for (n, m) in self.menus.control.iter().enumerate() {
            let node = &net.nodes()[n];
            if let Some((lo, hi)) = *m {
                if !node.controllable() || !(lo <= hi && hi.is_finite() && lo >= node.control_bounds().0) {
                    return Err(DesignError::Invalid(format!("node `{}` control menu [{lo}, {hi}]", node.id)));
                }
            }
        }
        Ok(())
    }

    /// Smallest and largest admissible capacity ceiling of an edge.
    fn edge_ceiling(&self, e: usize) -> (f64, f64) {
        self.menus.flow[e].unwrap_or_else(|| {
            let u = self.network.edges()[e].flow.upper;
            (u, u)
        })
    }

    fn control_ceiling(&self, n: usize) -> (f64, f64) {
        self.menus.control[n].unwrap_or_else(|| {
            let u = self.network.nodes()[n].control_bounds().1;
            (u, u)
        })
    }

    fn is_switch(&self, e: usize) -> bool {
        self.enable_topology && self.network.edges()[e].candidate
    }

    /// The cheapest design: no candidates, every ceiling at its menu floor.
    pub fn base_design(&self) -> Design {
        let net = &self.network;
        Design {
            chosen: vec![false; net.edge_count()],
            flow_caps: (0..net.edge_count()).map(|e| self.edge_ceiling(e).0).collect(),
            control_caps: (0..net.node_count()).map(|n| self.control_ceiling(n).0).collect(),
        }
    }

    /// The most generous design, ignoring the budget.
    fn max_design(&self) -> Design {
        let net = &self.network;
        Design {
            chosen: (0..net.edge_count()).map(|e| self.is_switch(e)).collect(),
            flow_caps: (0..net.edge_count()).map(|e| self.edge_ceiling(e).1).collect(),
            control_caps: (0..net.node_count()).map(|n| self.control_ceiling(n).1).collect(),
        }
    }
}

/// A concrete design, indexed like the network's edges and nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Design {
    /// Candidate edges that are built; always false for existing edges.
    pub chosen: Vec<bool>,
    pub flow_caps: Vec<f64>,
    /// Control ceilings; ignored at nodes without a control.
    pub control_caps: Vec<f64>,
}

/// `Σ capital_e v_e + Σ (z̄_e - base_e) + Σ (ū_n - base_n)`, where the
/// base values are the network's own ceilings, so the unmodified network
/// costs nothing.
pub fn cost_of(network: &Network, design: &Design) -> f64 {
    let mut cost = 0.0;
    for (e, edge) in network.edges().iter().enumerate() {
        if edge.candidate && !design.chosen[e] {
            continue;
        }
        if edge.candidate {
            cost += edge.capital_cost;
        }
        if edge.flow.upper.is_finite() {
            cost += design.flow_caps[e] - edge.flow.upper;
        }
    }
    for (n, node) in network.nodes().iter().enumerate() {
        let base = node.control_bounds().1;
        if node.controllable() && base.is_finite() {
            cost += design.control_caps[n] - base;
        }
    }
    cost
}

/// The network as built under `design`: chosen candidates become ordinary
/// edges with no further capital cost, and ceilings are replaced.
pub fn apply_design(network: &Network, design: &Design) -> Network {
    let edges = network
        .edges()
        .iter()
        .enumerate()
        .map(|(e, edge)| {
            let mut edge = edge.clone();
            if edge.candidate && design.chosen[e] {
                edge.candidate = false;
                edge.capital_cost = 0.0;
            }
            edge.flow.upper = design.flow_caps[e];
            edge
        })
        .collect();
    let nodes = network
        .nodes()
        .iter()
        .enumerate()
        .map(|(n, node)| {
            let mut node = node.clone();
            if let Some(c) = node.control.as_mut() {
                c.upper = design.control_caps[n];
            }
            node
        })
        .collect();
    network.rebuild(nodes, edges).expect("a design keeps the network valid")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DesignResult {
    pub budget: f64,
    pub reliability: f64,
    pub cost: f64,
    pub chosen_edges: BTreeMap<String, u8>,
    pub flow_caps: BTreeMap<String, f64>,
    pub control_caps: BTreeMap<String, f64>,
    pub solve_seconds: f64,
    pub relaxed: bool,
    /// Objective of the LP relaxation before rounding (relaxed mode).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relaxed_bound: Option<f64>,
    pub nodes_explored: usize,
    #[serde(skip)]
    pub design: Option<Design>,
    /// Functional indicator per scenario under the returned design.
    #[serde(skip)]
    pub functional: Vec<bool>,
    #[serde(skip)]
    pub scenario_key: (u64, u64, usize),
}

fn scenario_key(set: &ScenarioSet) -> (u64, u64, usize) {
    (set.seed, set.threshold.to_bits(), set.len())
}

/// A failure pattern that matters to the design, with its multiplicity.
struct Group {
    node_up: Vec<bool>,
    edge_on: Vec<bool>,
    count: usize,
}

/// Distinct patterns of `(node up, edge usable)`; candidate edges count as
/// usable only when the topology is a decision.
fn groups(problem: &DesignProblem) -> Vec<Group> {
    let net = &problem.network;
    let mut index: BTreeMap<(Vec<bool>, Vec<bool>), usize> = BTreeMap::new();
    let mut out: Vec<Group> = Vec::new();
    for s in &problem.scenarios.scenarios {
        let node_up: Vec<bool> = s.xi_nodes.iter().map(|&x| x == 1).collect();
        let edge_on: Vec<bool> = s
            .effective_edges(net)
            .into_iter()
            .enumerate()
            .map(|(e, on)| on && (!net.edges()[e].candidate || problem.is_switch(e)))
            .collect();
        match index.get(&(node_up.clone(), edge_on.clone())) {
            Some(&g) => out[g].count += 1,
            None => {
                index.insert((node_up.clone(), edge_on.clone()), out.len());
                out.push(Group { node_up, edge_on, count: 1 });
            }
        }
    }
    out
}

fn indicators(logic: &LogicSpec) -> Indicators<'_> {
    match logic {
        LogicSpec::AllSinks => Indicators::Shared,
        LogicSpec::SubsetReachable { .. } => Indicators::Subset(logic),
    }
}

/// Per-edge flow bounds and per-node control bounds inside a block whose
/// ceilings are `flow_hi` / `control_hi`.
fn block_bounds(problem: &DesignProblem, flow_hi: &[f64], control_hi: &[f64]) -> (Vec<(f64, f64)>, Vec<(f64, f64)>) {
    let net = &problem.network;
    let edges = net
        .edges()
        .iter()
        .enumerate()
        .map(|(e, edge)| (edge.flow.lower, flow_hi[e]))
        .collect();
    let controls = net
        .nodes()
        .iter()
        .enumerate()
        .map(|(n, node)| (node.control_bounds().0, control_hi[n]))
        .collect();
    (edges, controls)
}

/// One group under a fixed design, as a standalone program.
fn fixed_block(problem: &DesignProblem, group: &Group, design: &Design) -> (LinearProgram, Block) {
    let net = &problem.network;
    let flow_hi: Vec<f64> = (0..net.edge_count())
        .map(|e| {
            if problem.is_switch(e) && !design.chosen[e] {
                0.0
            } else {
                design.flow_caps[e]
            }
        })
        .collect();
    let (edge_bounds, control_bounds) = block_bounds(problem, &flow_hi, &design.control_caps);
    let d: Vec<f64> = net.nodes().iter().map(|n| n.d).collect();
    let mut lp = LinearProgram::new();
    let block = add_block(
        &mut lp,
        &BlockSpec {
            network: net,
            node_up: &group.node_up,
            edge_on: &group.edge_on,
            edge_bounds: &edge_bounds,
            control_bounds: &control_bounds,
            d: &d,
            indicators: indicators(&problem.logic),
            weight: 1.0,
        },
    );
    (lp, block)
}

/// Solve a group under a fixed design; `None` when even full relaxation of
/// the indicators is infeasible.
fn solve_fixed(
    problem: &DesignProblem,
    group: &Group,
    design: &Design,
    use_milp: bool,
) -> Result<Option<(Vec<f64>, Block)>, DesignError> {
    let (lp, block) = fixed_block(problem, group, design);
    let x = solve_program(&lp, &block.binaries, use_milp)?;
    Ok(x.map(|x| (x, block)))
}

fn works(block: &Block, x: &[f64]) -> bool {
    block.decisive.iter().all(|&v| rounding_rule(x[v]) == 0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Class {
    Always,
    Never,
    Contested,
}

fn classify(problem: &DesignProblem, group: &Group) -> Result<Class, DesignError> {
    let exact = !problem.relaxed;
    let at_base = solve_fixed(problem, group, &problem.base_design(), exact)?;
    if matches!(&at_base, Some((x, b)) if works(b, x)) {
        return Ok(Class::Always);
    }
    // An LP that cannot drive the indicators to zero under the most generous
    // design rules the pattern out in both modes.
    let at_max = solve_fixed(problem, group, &problem.max_design(), false)?;
    if !matches!(&at_max, Some((x, b)) if works(b, x)) {
        return Ok(Class::Never);
    }
    if exact {
        let at_max = solve_fixed(problem, group, &problem.max_design(), true)?;
        if !matches!(&at_max, Some((x, b)) if works(b, x)) {
            return Ok(Class::Never);
        }
    }
    Ok(Class::Contested)
}

/// The joint program over the contested groups.
struct Model {
    lp: LinearProgram,
    binaries: Vec<usize>,
    v: Vec<Option<usize>>,
    /// Capacity ceiling of an existing edge, or capacity above the floor
    /// of a candidate edge.
    zbar: Vec<Option<usize>>,
    ubar: Vec<Option<usize>>,
    /// First variable of each block and its layout.
    blocks: Vec<(usize, Block)>,
}

fn build_model(problem: &DesignProblem, contested: &[&Group]) -> Model {
    let net = &problem.network;
    let mut lp = LinearProgram::new();
    let mut binaries = Vec::new();
    let v: Vec<Option<usize>> = (0..net.edge_count())
        .map(|e| {
            problem.is_switch(e).then(|| {
                let j = lp.add_var(0.0, 1.0, 0.0);
                binaries.push(j);
                j
            })
        })
        .collect();
    let zbar: Vec<Option<usize>> = (0..net.edge_count())
        .map(|e| {
            let (lo, hi) = problem.edge_ceiling(e);
            if problem.is_switch(e) {
                (hi > lo).then(|| lp.add_var(0.0, hi - lo, 0.0))
            } else {
                (hi > lo && !net.edges()[e].candidate).then(|| lp.add_var(lo, hi, 0.0))
            }
        })
        .collect();
    let ubar: Vec<Option<usize>> = (0..net.node_count())
        .map(|n| {
            let (lo, hi) = problem.control_ceiling(n);
            (net.nodes()[n].controllable() && hi > lo).then(|| lp.add_var(lo, hi, 0.0))
        })
        .collect();

    // Budget row with the base-design constants moved to the right-hand side.
    // A candidate's ceiling is split as lo v + w with w ≤ (hi - lo) v, so an
    // unbuilt candidate costs nothing and carries nothing.
    let mut coeffs = Vec::new();
    let mut rhs = problem.budget;
    for (e, edge) in net.edges().iter().enumerate() {
        let (lo, hi) = problem.edge_ceiling(e);
        if let Some(vj) = v[e] {
            coeffs.push((vj, edge.capital_cost + lo - edge.flow.upper));
            if let Some(j) = zbar[e] {
                coeffs.push((j, 1.0));
                lp.add_row(vec![(j, 1.0), (vj, -(hi - lo))], Relation::Le, 0.0);
            }
        } else if !edge.candidate && edge.flow.upper.is_finite() {
            match zbar[e] {
                Some(j) => {
                    coeffs.push((j, 1.0));
                    rhs += edge.flow.upper;
                }
                None => rhs -= lo - edge.flow.upper,
            }
        }
    }
    for (n, node) in net.nodes().iter().enumerate() {
        let base = node.control_bounds().1;
        if node.controllable() && base.is_finite() {
            match ubar[n] {
                Some(j) => {
                    coeffs.push((j, 1.0));
                    rhs += base;
                }
                None => rhs -= problem.control_ceiling(n).0 - base,
            }
        }
    }
    lp.add_row(coeffs, Relation::Le, rhs);

    let max = problem.max_design();
    let (edge_bounds, control_bounds) = block_bounds(problem, &max.flow_caps, &max.control_caps);
    let d: Vec<f64> = net.nodes().iter().map(|n| n.d).collect();
    let mut blocks = Vec::with_capacity(contested.len());
    for g in contested {
        let offset = lp.num_vars();
        let block = add_block(
            &mut lp,
            &BlockSpec {
                network: net,
                node_up: &g.node_up,
                edge_on: &g.edge_on,
                edge_bounds: &edge_bounds,
                control_bounds: &control_bounds,
                d: &d,
                indicators: indicators(&problem.logic),
                weight: g.count as f64,
            },
        );
        for e in 0..net.edge_count() {
            let Some(z) = block.z[e] else { continue };
            match (v[e], zbar[e]) {
                (Some(vj), w) => {
                    let mut row = vec![(z, 1.0), (vj, -problem.edge_ceiling(e).0)];
                    row.extend(w.map(|j| (j, -1.0)));
                    lp.add_row(row, Relation::Le, 0.0);
                }
                (None, Some(j)) => {
                    lp.add_row(vec![(z, 1.0), (j, -1.0)], Relation::Le, 0.0);
                }
                (None, None) => {}
            }
        }
        for n in 0..net.node_count() {
            if let (Some(u), Some(j)) = (block.u[n], ubar[n]) {
                lp.add_row(vec![(u, 1.0), (j, -1.0)], Relation::Le, 0.0);
            }
        }
        binaries.extend(block.binaries.iter().copied());
        blocks.push((offset, block));
    }
    Model { lp, binaries, v, zbar, ubar, blocks }
}

impl Model {
    fn design(&self, problem: &DesignProblem, x: &[f64]) -> Design {
        let base = problem.base_design();
        let net = &problem.network;
        Design {
            chosen: (0..net.edge_count()).map(|e| self.v[e].is_some_and(|j| x[j] > 0.5)).collect(),
            flow_caps: (0..net.edge_count())
                .map(|e| match (self.v[e], self.zbar[e]) {
                    (Some(vj), Some(j)) if x[vj] > 0.5 => base.flow_caps[e] + x[j],
                    (Some(_), _) => base.flow_caps[e],
                    (None, z) => z.map_or(base.flow_caps[e], |j| x[j]),
                })
                .collect(),
            control_caps: (0..net.node_count())
                .map(|n| self.ubar[n].map_or(base.control_caps[n], |j| x[j]))
                .collect(),
        }
    }

    /// A feasible integral point realizing `design`.
    fn point_for(&self, problem: &DesignProblem, contested: &[&Group], design: &Design) -> Result<Vec<f64>, DesignError> {
        let mut x = vec![0.0; self.lp.num_vars()];
        for e in 0..design.chosen.len() {
            if let Some(j) = self.v[e] {
                x[j] = design.chosen[e] as u8 as f64;
            }
            if let Some(j) = self.zbar[e] {
                x[j] = match self.v[e] {
                    Some(_) if design.chosen[e] => design.flow_caps[e] - problem.edge_ceiling(e).0,
                    Some(_) => 0.0,
                    None => design.flow_caps[e],
                };
            }
        }
        for n in 0..design.control_caps.len() {
            if let Some(j) = self.ubar[n] {
                x[j] = design.control_caps[n];
            }
        }
        for (g, (offset, _)) in contested.iter().zip(&self.blocks) {
            let (mut lp, block) = fixed_block(problem, g, design);
            let local = solve_program(&lp, &block.binaries, true)?;
            let local = match local {
                Some(local) if works(&block, &local) => local,
                _ => {
                    for &j in &block.decisive {
                        lp.bounds[j] = (1.0, 1.0);
                    }
                    solve_program(&lp, &block.binaries, true)?
                        .ok_or_else(|| DesignError::Invalid("a fully relaxed scenario is infeasible".into()))?
                }
            };
            x[*offset..*offset + local.len()].copy_from_slice(&local);
        }
        Ok(x)
    }
}

/// Solve one budget. See [`solve_design_from`] for warm starts.
pub fn solve_design(problem: &DesignProblem) -> Result<DesignResult, DesignError> {
    solve_design_from(problem, None)
}

/// Solve one budget, seeding the search with `start` when it is affordable.
///
/// In exact mode `start` becomes the initial incumbent; in relaxed mode the
/// rounded design is replaced by `start` when `start` evaluates better.
pub fn solve_design_from(problem: &DesignProblem, start: Option<&Design>) -> Result<DesignResult, DesignError> {
    let clock = Instant::now();
    problem.validate()?;
    let groups = groups(problem);
    let classes = groups.iter().map(|g| classify(problem, g)).collect::<Result<Vec<_>, _>>()?;
    let contested: Vec<&Group> = groups
        .iter()
        .zip(&classes)
        .filter(|(_, c)| **c == Class::Contested)
        .map(|(g, _)| g)
        .collect();
    let start = start.filter(|d| cost_of(&problem.network, d) <= problem.budget + FEAS_TOL);

    let always: usize = groups.iter().zip(&classes).filter(|(_, c)| **c == Class::Always).map(|(g, _)| g.count).sum();
    let mut nodes_explored = 0;
    let mut relaxed_bound = None;
    let design = if contested.is_empty() {
        if problem.relaxed {
            relaxed_bound = Some(always as f64 / problem.scenarios.len() as f64);
        }
        start.cloned().unwrap_or_else(|| problem.base_design())
    } else {
        let model = build_model(problem, &contested);
        if problem.relaxed {
            let sol = lp::solve(&model.lp)?;
            if sol.status != LpStatus::Optimal {
                return Err(DesignError::Invalid("design relaxation is infeasible".into()));
            }
            let gain: f64 = model
                .blocks
                .iter()
                .zip(&contested)
                .map(|((_, b), g)| g.count as f64 * (1.0 - b.decisive.iter().map(|&j| sol.primal[j]).fold(0.0, f64::max)))
                .sum();
            relaxed_bound = Some((always as f64 + gain) / problem.scenarios.len() as f64);
            let rounded = round_topology(problem, &model, &sol.primal)?;
            match start {
                Some(s) if evaluate(problem, s)?.0 > evaluate(problem, &rounded)?.0 => s.clone(),
                _ => rounded,
            }
        } else {
            let mut opts = MipOptions {
                max_nodes: problem.max_nodes,
                ..Default::default()
            };
            let seed = start.cloned().unwrap_or_else(|| problem.base_design());
            opts.incumbent = Some(model.point_for(problem, &contested, &seed)?);
            let sol = milp::solve_mip_with(&MixedIntegerProgram::new(model.lp.clone(), model.binaries.clone()), &opts)?;
            if sol.status != MipStatus::Optimal {
                return Err(DesignError::Invalid("design program is infeasible".into()));
            }
            nodes_explored = sol.nodes_explored;
            model.design(problem, &sol.primal)
        }
    };

    let (reliability, functional) = evaluate(problem, &design)?;
    Ok(result(problem, design, reliability, functional, relaxed_bound, nodes_explored, clock.elapsed().as_secs_f64()))
}

/// Round the relaxed switches at one half, then re-optimize the ceilings with
/// the switches frozen. Switches rounded up are dropped, least fractional
/// value first, while the budget cannot accommodate them.
fn round_topology(problem: &DesignProblem, model: &Model, x: &[f64]) -> Result<Design, DesignError> {
    let mut on: Vec<(usize, f64)> = model
        .v
        .iter()
        .filter_map(|v| *v)
        .map(|j| (j, x[j]))
        .collect();
    if on.is_empty() {
        return Ok(model.design(problem, x));
    }
    on.retain(|&(_, val)| val > 0.5);
    on.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    loop {
        let mut lp = model.lp.clone();
        for j in model.v.iter().filter_map(|v| *v) {
            let val = on.iter().any(|&(k, _)| k == j) as u8 as f64;
            lp.bounds[j] = (val, val);
        }
        let sol = lp::solve(&lp)?;
        if sol.status == LpStatus::Optimal {
            return Ok(model.design(problem, &sol.primal));
        }
        on.remove(0);
    }
}

/// Reliability of a frozen design on the problem's scenarios.
fn evaluate(problem: &DesignProblem, design: &Design) -> Result<(f64, Vec<bool>), DesignError> {
    let built = apply_design(&problem.network, design);
    // The LP decides the all-sinks logic exactly.
    let use_milp = !problem.relaxed && problem.logic != LogicSpec::AllSinks;
    let est = estimate_reliability(&built, &problem.scenarios, &problem.logic, use_milp)?;
    Ok((est.value, est.functional()))
}

fn result(
    problem: &DesignProblem,
    design: Design,
    reliability: f64,
    functional: Vec<bool>,
    relaxed_bound: Option<f64>,
    nodes_explored: usize,
    solve_seconds: f64,
) -> DesignResult {
    let net = &problem.network;
    let chosen_edges = net
        .edges()
        .iter()
        .enumerate()
        .filter(|(_, e)| e.candidate)
        .map(|(i, e)| (e.id.clone(), design.chosen[i] as u8))
        .collect();
    let flow_caps = net
        .edges()
        .iter()
        .enumerate()
        .filter(|(i, _)| design.flow_caps[*i].is_finite())
        .map(|(i, e)| (e.id.clone(), design.flow_caps[i]))
        .collect();
    let control_caps = net
        .nodes()
        .iter()
        .enumerate()
        .filter(|(i, n)| n.controllable() && design.control_caps[*i].is_finite())
        .map(|(i, n)| (n.id.clone(), design.control_caps[i]))
        .collect();
    DesignResult {
        budget: problem.budget,
        reliability,
        cost: cost_of(net, &design),
        chosen_edges,
        flow_caps,
        control_caps,
        solve_seconds,
        relaxed: problem.relaxed,
        relaxed_bound,
        nodes_explored,
        design: Some(design),
        functional,
        scenario_key: scenario_key(&problem.scenarios),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ParetoPair {
    pub budget: f64,
    pub cost: f64,
    pub reliability: f64,
    pub result: DesignResult,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ParetoFrontier {
    pub pairs: Vec<ParetoPair>,
    /// Budgets whose solve failed, with the error message.
    pub failures: Vec<(f64, String)>,
}

/// Solve every budget on the same scenarios, in ascending order, each one
/// seeded with the previous budget's design.
pub fn pareto_sweep(problem: &DesignProblem, budgets: &[f64]) -> Result<ParetoFrontier, DesignError> {
    if budgets.windows(2).any(|w| w[0] > w[1]) {
        return Err(DesignError::Invalid("budgets must be sorted ascending".into()));
    }
    if let Some(&b) = budgets.iter().find(|b| !(**b >= 0.0)) {
        return Err(DesignError::NegativeBudget(b));
    }
    let mut frontier = ParetoFrontier::default();
    let mut previous: Option<Design> = None;
    for &budget in budgets {
        match solve_design_from(&problem.with_budget(budget), previous.as_ref()) {
            Ok(r) => {
                previous = r.design.clone();
                frontier.pairs.push(ParetoPair {
                    budget,
                    cost: r.cost,
                    reliability: r.reliability,
                    result: r,
                });
            }
            Err(e) => frontier.failures.push((budget, e.to_string())),
        }
    }
    Ok(frontier)
}

/// Percentage of scenarios whose functional indicator differs.
pub fn active_difference(exact: &DesignResult, relaxed: &DesignResult) -> Result<f64, DesignError> {
    if exact.scenario_key != relaxed.scenario_key {
        return Err(DesignError::ScenarioMismatch(
            "results were computed on different scenario sets".into(),
        ));
    }
    outcome_difference(&exact.functional, &relaxed.functional)
}

pub fn outcome_difference(a: &[bool], b: &[bool]) -> Result<f64, DesignError> {
    if a.len() != b.len() || a.is_empty() {
        return Err(DesignError::ScenarioMismatch(format!(
            "outcome vectors have lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let differ = a.iter().zip(b).filter(|(x, y)| x != y).count();
    Ok(100.0 * differ as f64 / a.len() as f64)
}
