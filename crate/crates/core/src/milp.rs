//! Best-bound branch-and-bound over binary variables.
//!
//! Nodes carry the list of binaries fixed on the way down and are ordered by
//! the LP bound of their parent, with ties resolved first-in first-out.
//! Branching picks the most fractional binary (lowest index on ties) and
//! explores the down branch before the up branch.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::MipError;
use crate::lp::{check_point, solve_with, LinearProgram, LpOptions, LpStatus, FEAS_TOL};

/// Integrality tolerance.
pub const INT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct MixedIntegerProgram {
    pub lp: LinearProgram,
    pub binary_vars: Vec<usize>,
}

impl MixedIntegerProgram {
    pub fn new(lp: LinearProgram, binary_vars: Vec<usize>) -> Self {
        MixedIntegerProgram { lp, binary_vars }
    }

    fn validate(&self) -> Result<(), MipError> {
        self.lp.validate()?;
        for &j in &self.binary_vars {
            match self.lp.bounds.get(j) {
                None => return Err(MipError::Malformed(format!("binary index {j} out of range"))),
                Some(&(l, u)) if l < 0.0 || u > 1.0 => {
                    return Err(MipError::Malformed(format!("binary {j} has bounds [{l}, {u}]")))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MipStatus {
    Optimal,
    Infeasible,
}

/// Bound of an explored node next to the bound of the node it came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeRecord {
    pub bound: f64,
    pub parent_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MipSolution {
    pub status: MipStatus,
    pub objective_value: f64,
    pub primal: Vec<f64>,
    pub nodes_explored: usize,
    /// Per-node bounds, filled only when [`MipOptions::record_tree`] is set.
    pub tree: Vec<NodeRecord>,
}

#[derive(Debug, Clone)]
pub struct MipOptions {
    pub max_nodes: usize,
    pub int_tol: f64,
    pub lp: LpOptions,
    pub record_tree: bool,
    /// A known feasible point used as the starting incumbent.
    pub incumbent: Option<Vec<f64>>,
}

impl Default for MipOptions {
    fn default() -> Self {
        MipOptions {
            max_nodes: 200_000,
            int_tol: INT_TOL,
            lp: LpOptions::default(),
            record_tree: false,
            incumbent: None,
        }
    }
}

struct Pending {
    parent_bound: f64,
    seq: usize,
    fixes: Vec<(usize, f64)>,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Pending {}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Pending {
    fn cmp(&self, other: &Self) -> Ordering {
        self.parent_bound
            .total_cmp(&other.parent_bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

pub fn solve_mip(mip: &MixedIntegerProgram) -> Result<MipSolution, MipError> {
    solve_mip_with(mip, &MipOptions::default())
}

pub fn solve_mip_with(mip: &MixedIntegerProgram, opts: &MipOptions) -> Result<MipSolution, MipError> {
    mip.validate()?;
    let mut incumbent: Option<(f64, Vec<f64>)> = opts
        .incumbent
        .as_ref()
        .filter(|x| is_integral_feasible(mip, x, opts.int_tol))
        .map(|x| {
            let x = snap(mip, x);
            (objective(&mip.lp, &x), x)
        });

    let mut heap = BinaryHeap::new();
    heap.push(Pending {
        parent_bound: f64::INFINITY,
        seq: 0,
        fixes: Vec::new(),
    });
    let mut seq = 1;
    let mut explored = 0;
    let mut tree = Vec::new();
    let mut lp = mip.lp.clone();

    while let Some(node) = heap.pop() {
        if let Some((best, _)) = &incumbent {
            if node.parent_bound <= best + gap(*best) {
                continue;
            }
        }
        if explored >= opts.max_nodes {
            return Err(MipError::NodeLimit {
                limit: opts.max_nodes,
                incumbent: incumbent.map(|(obj, x)| {
                    Box::new(finish(MipStatus::Optimal, obj, x, explored, tree))
                }),
            });
        }
        explored += 1;

        lp.bounds.clone_from(&mip.lp.bounds);
        for &(j, v) in &node.fixes {
            lp.bounds[j] = (v, v);
        }
        let sol = solve_with(&lp, &opts.lp)?;
        match sol.status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                return Err(MipError::Malformed("unbounded relaxation".into()));
            }
            LpStatus::Optimal => {}
        }
        let bound = sol.objective_value;
        if opts.record_tree {
            tree.push(NodeRecord {
                bound,
                parent_bound: node.parent_bound,
            });
        }
        if let Some((best, _)) = &incumbent {
            if bound <= best + gap(*best) {
                continue;
            }
        }

        let branch = mip
            .binary_vars
            .iter()
            .map(|&j| (j, (sol.primal[j] - sol.primal[j].round()).abs()))
            .filter(|&(_, frac)| frac > opts.int_tol)
            .fold(None::<(usize, f64)>, |best, (j, frac)| match best {
                Some((bj, bf)) if bf > frac || (bf == frac && bj < j) => Some((bj, bf)),
                _ => Some((j, frac)),
            });

        match branch {
            None => {
                let x = snap(mip, &sol.primal);
                let obj = objective(&mip.lp, &x);
                if incumbent.as_ref().is_none_or(|(best, _)| obj > *best) {
                    incumbent = Some((obj, x));
                }
            }
            Some((j, _)) => {
                for v in [0.0, 1.0] {
                    let mut fixes = node.fixes.clone();
                    fixes.push((j, v));
                    heap.push(Pending {
                        parent_bound: bound,
                        seq,
                        fixes,
                    });
                    seq += 1;
                }
            }
        }
    }

    Ok(match incumbent {
        Some((obj, x)) => finish(MipStatus::Optimal, obj, x, explored, tree),
        None => finish(
            MipStatus::Infeasible,
            f64::NEG_INFINITY,
            vec![0.0; mip.lp.num_vars()],
            explored,
            tree,
        ),
    })
}

fn finish(status: MipStatus, objective_value: f64, primal: Vec<f64>, nodes: usize, tree: Vec<NodeRecord>) -> MipSolution {
    MipSolution {
        status,
        objective_value,
        primal,
        nodes_explored: nodes,
        tree,
    }
}

fn gap(best: f64) -> f64 {
    1e-9 * (1.0 + best.abs())
}

fn objective(lp: &LinearProgram, x: &[f64]) -> f64 {
    lp.objective.iter().zip(x).map(|(c, x)| c * x).sum()
}

fn snap(mip: &MixedIntegerProgram, x: &[f64]) -> Vec<f64> {
    let mut x = x.to_vec();
    for &j in &mip.binary_vars {
        x[j] = x[j].round();
    }
    x
}

fn is_integral_feasible(mip: &MixedIntegerProgram, x: &[f64], int_tol: f64) -> bool {
    x.len() == mip.lp.num_vars()
        && mip.binary_vars.iter().all(|&j| (x[j] - x[j].round()).abs() <= int_tol)
        && check_point(&mip.lp, &snap(mip, x), FEAS_TOL).is_ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{check_solution, LpSolution, Relation};

    #[test]
    fn two_item_knapsack() {
        let mut lp = LinearProgram::new();
        let a = lp.add_var(0.0, 1.0, 1.0);
        let b = lp.add_var(0.0, 1.0, 1.0);
        lp.add_row(vec![(a, 1.0), (b, 1.0)], Relation::Le, 1.0);
        let sol = solve_mip(&MixedIntegerProgram::new(lp, vec![a, b])).unwrap();
        assert_eq!(sol.status, MipStatus::Optimal);
        assert_eq!(sol.objective_value, 1.0);
    }

    #[test]
    fn fractional_root_needs_branching() {
        // max 5a + 4b + 3c s.t. 2a + 3b + c <= 5, 4a + b + 2c <= 11, 3a + 4b + 2c <= 8
        let mut lp = LinearProgram::new();
        let v: Vec<usize> = [5.0, 4.0, 3.0].iter().map(|&c| lp.add_var(0.0, 1.0, c)).collect();
        lp.add_row(vec![(v[0], 2.0), (v[1], 3.0), (v[2], 1.0)], Relation::Le, 4.5);
        lp.add_row(vec![(v[0], 3.0), (v[1], 4.0), (v[2], 2.0)], Relation::Le, 6.5);
        let opts = MipOptions { record_tree: true, ..Default::default() };
        let sol = solve_mip_with(&MixedIntegerProgram::new(lp.clone(), v.clone()), &opts).unwrap();
        assert_eq!(sol.objective_value, 8.0);
        assert!(sol.nodes_explored > 1);
        for r in &sol.tree {
            assert!(r.bound <= r.parent_bound + 1e-9);
        }
        let as_lp = LpSolution {
            status: LpStatus::Optimal,
            objective_value: sol.objective_value,
            primal: sol.primal.clone(),
            iterations: 0,
        };
        check_solution(&lp, &as_lp).unwrap();
    }

    #[test]
    fn infeasible_binary_program() {
        let mut lp = LinearProgram::new();
        let a = lp.add_var(0.0, 1.0, 1.0);
        lp.add_row(vec![(a, 2.0)], Relation::Eq, 1.0);
        let sol = solve_mip(&MixedIntegerProgram::new(lp, vec![a])).unwrap();
        assert_eq!(sol.status, MipStatus::Infeasible);
    }

    #[test]
    fn node_limit_carries_incumbent() {
        let mut lp = LinearProgram::new();
        let v: Vec<usize> = (0..8).map(|i| lp.add_var(0.0, 1.0, 1.0 + i as f64 * 0.1)).collect();
        lp.add_row(v.iter().map(|&j| (j, 2.0)).collect(), Relation::Le, 7.0);
        let mip = MixedIntegerProgram::new(lp, v);
        let opts = MipOptions {
            max_nodes: 1,
            incumbent: Some(vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
            ..Default::default()
        };
        match solve_mip_with(&mip, &opts) {
            Err(MipError::NodeLimit { limit: 1, incumbent: Some(inc) }) => {
                assert!(inc.objective_value >= 1.0)
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_binary_bounds_are_rejected() {
        let mut lp = LinearProgram::new();
        let a = lp.add_var(0.0, 2.0, 1.0);
        assert!(matches!(
            solve_mip(&MixedIntegerProgram::new(lp, vec![a])),
            Err(MipError::Malformed(_))
        ));
    }
}
