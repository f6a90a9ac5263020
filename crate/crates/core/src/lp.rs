//! Dense-tableau bounded-variable primal simplex.
//!
//! Problems are stated as `maximize c·x` subject to rows `a·x {<=,>=,=} b`
//! and per-variable boxes `l <= x <= u` (either side may be infinite).
//! Every inequality gets a slack `s` with `a·x + s = b`; rows whose starting
//! residual cannot be absorbed by their slack receive a phase-1 artificial.
//! Artificial columns are never stored: once an artificial leaves the basis
//! it cannot come back.
//!
//! Pricing is Dantzig's largest reduced cost with a two-pass (Harris)
//! ratio test. After `2 (m + n)` degenerate pivots the solver switches to
//! Bland's smallest-index rule for the rest of the phase, which guarantees
//! termination.

use std::fmt;

use crate::error::LpError;

/// Primal feasibility tolerance.
pub const FEAS_TOL: f64 = 1e-7;
/// Reduced-cost optimality tolerance.
pub const OPT_TOL: f64 = 1e-9;

const PIVOT_TOL: f64 = 1e-9;
const ZERO_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        })
    }
}

/// One constraint row, stored sparsely as `(variable, coefficient)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Row {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearProgram {
    /// Objective coefficients (maximized).
    pub objective: Vec<f64>,
    pub rows: Vec<Row>,
    pub bounds: Vec<(f64, f64)>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_var(&mut self, lower: f64, upper: f64, objective: f64) -> usize {
        self.objective.push(objective);
        self.bounds.push((lower, upper));
        self.objective.len() - 1
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, relation: Relation, rhs: f64) -> usize {
        self.rows.push(Row { coeffs, relation, rhs });
        self.rows.len() - 1
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if self.bounds.len() != n {
            return Err(LpError::Malformed(format!(
                "{} bounds for {} variables",
                self.bounds.len(),
                n
            )));
        }
        for (j, &(l, u)) in self.bounds.iter().enumerate() {
            if l.is_nan() || u.is_nan() || l > u || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(LpError::Malformed(format!("variable {j} has bounds [{l}, {u}]")));
            }
        }
        for (i, r) in self.rows.iter().enumerate() {
            if !r.rhs.is_finite() {
                return Err(LpError::Malformed(format!("row {i} has rhs {}", r.rhs)));
            }
            if let Some(&(j, a)) = r.coeffs.iter().find(|&&(j, a)| j >= n || !a.is_finite()) {
                return Err(LpError::Malformed(format!("row {i} has entry ({j}, {a})")));
            }
        }
        if let Some(j) = self.objective.iter().position(|c| !c.is_finite()) {
            return Err(LpError::Malformed(format!("objective coefficient {j} is not finite")));
        }
        Ok(())
    }

    /// Plain-text standard form, one line per objective, row and bound.
    pub fn dump(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for LinearProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let term = |j: usize, a: f64| format!("{a:+} x{j}");
        let obj: Vec<String> = self
            .objective
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0.0)
            .map(|(j, &c)| term(j, c))
            .collect();
        writeln!(f, "maximize {}", if obj.is_empty() { "0".into() } else { obj.join(" ") })?;
        for (i, r) in self.rows.iter().enumerate() {
            let lhs: Vec<String> = r.coeffs.iter().map(|&(j, a)| term(j, a)).collect();
            writeln!(f, "r{i}: {} {} {}", lhs.join(" "), r.relation, r.rhs)?;
        }
        for (j, &(l, u)) in self.bounds.iter().enumerate() {
            writeln!(f, "bound x{j}: {l} <= x{j} <= {u}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective_value: f64,
    pub primal: Vec<f64>,
    pub iterations: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LpOptions {
    pub feas_tol: f64,
    pub opt_tol: f64,
    /// Overrides the default cap of `50 (rows + cols)` iterations.
    pub max_iterations: Option<usize>,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions {
            feas_tol: FEAS_TOL,
            opt_tol: OPT_TOL,
            max_iterations: None,
        }
    }
}

/// A constraint or bound violation found by [`check_solution`].
#[derive(Debug, Clone, PartialEq)]
pub enum Residual {
    Row { row: usize, violation: f64 },
    Bound { var: usize, violation: f64 },
    Dimension { expected: usize, found: usize },
}

impl Residual {
    pub fn magnitude(&self) -> f64 {
        match *self {
            Residual::Row { violation, .. } | Residual::Bound { violation, .. } => violation,
            Residual::Dimension { .. } => f64::INFINITY,
        }
    }
}

/// Recompute every row residual and bound violation of `sol` against `lp`.
pub fn check_solution(lp: &LinearProgram, sol: &LpSolution) -> Result<(), Vec<Residual>> {
    check_point(lp, &sol.primal, FEAS_TOL)
}

pub fn check_point(lp: &LinearProgram, x: &[f64], tol: f64) -> Result<(), Vec<Residual>> {
    if x.len() != lp.num_vars() {
        return Err(vec![Residual::Dimension {
            expected: lp.num_vars(),
            found: x.len(),
        }]);
    }
    let mut out = Vec::new();
    for (i, r) in lp.rows.iter().enumerate() {
        let act = r.activity(x);
        let violation = match r.relation {
            Relation::Le => act - r.rhs,
            Relation::Ge => r.rhs - act,
            Relation::Eq => (act - r.rhs).abs(),
        };
        if violation > tol {
            out.push(Residual::Row { row: i, violation });
        }
    }
    for (j, (&v, &(l, u))) in x.iter().zip(&lp.bounds).enumerate() {
        let violation = (l - v).max(v - u);
        if violation > tol || v.is_nan() {
            out.push(Residual::Bound { var: j, violation });
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

pub fn solve(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    solve_with(lp, &LpOptions::default())
}

pub fn solve_with(lp: &LinearProgram, opts: &LpOptions) -> Result<LpSolution, LpError> {
    lp.validate()?;
    let n = lp.num_vars();

    // Empty rows are checked once and dropped.
    let mut rows = Vec::with_capacity(lp.rows.len());
    for r in &lp.rows {
        if r.coeffs.iter().all(|&(_, a)| a == 0.0) {
            let ok = match r.relation {
                Relation::Le => r.rhs >= -opts.feas_tol,
                Relation::Ge => r.rhs <= opts.feas_tol,
                Relation::Eq => r.rhs.abs() <= opts.feas_tol,
            };
            if !ok {
                return Ok(infeasible(n, 0));
            }
        } else {
            rows.push(r);
        }
    }

    let mut s = Simplex::new(lp, &rows, opts);
    let status = s.run()?;
    let primal = s.structural_values();
    let objective_value = match status {
        LpStatus::Optimal => lp.objective.iter().zip(&primal).map(|(c, x)| c * x).sum(),
        LpStatus::Unbounded => f64::INFINITY,
        LpStatus::Infeasible => f64::NEG_INFINITY,
    };
    Ok(LpSolution {
        status,
        objective_value,
        primal,
        iterations: s.iterations,
    })
}

fn infeasible(n: usize, iterations: usize) -> LpSolution {
    LpSolution {
        status: LpStatus::Infeasible,
        objective_value: f64::NEG_INFINITY,
        primal: vec![0.0; n],
        iterations,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Basic {
    Col(usize),
    Artificial,
}

struct Simplex {
    m: usize,
    /// Structural plus slack columns.
    nc: usize,
    n_struct: usize,
    tab: Vec<f64>,
    beta: Vec<f64>,
    basis: Vec<Basic>,
    /// Row holding each column when basic.
    row_of: Vec<Option<usize>>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    /// Values of nonbasic columns.
    x: Vec<f64>,
    cost: Vec<f64>,
    d: Vec<f64>,
    feas_tol: f64,
    opt_tol: f64,
    iterations: usize,
    max_iterations: usize,
    degenerate: usize,
    bland: bool,
    phase_one: bool,
}

enum Step {
    Optimal,
    Unbounded,
    Moved,
}

impl Simplex {
    fn new(lp: &LinearProgram, rows: &[&Row], opts: &LpOptions) -> Self {
        let n = lp.num_vars();
        let m = rows.len();
        let slack_of: Vec<Option<usize>> = {
            let mut next = n;
            rows.iter()
                .map(|r| match r.relation {
                    Relation::Eq => None,
                    _ => {
                        next += 1;
                        Some(next - 1)
                    }
                })
                .collect()
        };
        let nc = n + slack_of.iter().flatten().count();

        let mut lo = Vec::with_capacity(nc);
        let mut hi = Vec::with_capacity(nc);
        for &(l, u) in &lp.bounds {
            lo.push(l);
            hi.push(u);
        }
        for r in rows {
            match r.relation {
                Relation::Le => {
                    lo.push(0.0);
                    hi.push(f64::INFINITY);
                }
                Relation::Ge => {
                    lo.push(f64::NEG_INFINITY);
                    hi.push(0.0);
                }
                Relation::Eq => {}
            }
        }
        let mut x: Vec<f64> = (0..nc)
            .map(|j| {
                if lo[j].is_finite() {
                    lo[j]
                } else if hi[j].is_finite() {
                    hi[j]
                } else {
                    0.0
                }
            })
            .collect();

        let mut tab = vec![0.0; m * nc];
        let mut beta = vec![0.0; m];
        let mut basis = Vec::with_capacity(m);
        let mut row_of = vec![None; nc];
        for (i, r) in rows.iter().enumerate() {
            let residual = r.rhs - r.coeffs.iter().map(|&(j, a)| a * x[j]).sum::<f64>();
            let slack_absorbs = match r.relation {
                Relation::Le => residual >= 0.0,
                Relation::Ge => residual <= 0.0,
                Relation::Eq => false,
            };
            let scale = if slack_absorbs || residual >= 0.0 { 1.0 } else { -1.0 };
            let row = &mut tab[i * nc..(i + 1) * nc];
            for &(j, a) in &r.coeffs {
                row[j] += a * scale;
            }
            if let Some(sj) = slack_of[i] {
                row[sj] = scale;
            }
            beta[i] = residual * scale;
            if slack_absorbs {
                let sj = slack_of[i].expect("inequality rows have slacks");
                basis.push(Basic::Col(sj));
                row_of[sj] = Some(i);
                x[sj] = 0.0;
            } else {
                basis.push(Basic::Artificial);
            }
        }

        let max_iterations = opts.max_iterations.unwrap_or(50 * (m + nc).max(1));
        Simplex {
            m,
            nc,
            n_struct: n,
            tab,
            beta,
            basis,
            row_of,
            lo,
            hi,
            x,
            cost: vec![0.0; nc],
            d: vec![0.0; nc],
            feas_tol: opts.feas_tol,
            opt_tol: opts.opt_tol,
            iterations: 0,
            max_iterations,
            degenerate: 0,
            bland: false,
            phase_one: true,
        }
        .with_objective(lp)
    }

    fn with_objective(mut self, lp: &LinearProgram) -> Self {
        for (j, &c) in lp.objective.iter().enumerate() {
            self.cost[j] = -c;
        }
        self
    }

    fn run(&mut self) -> Result<LpStatus, LpError> {
        if self.basis.contains(&Basic::Artificial) {
            self.phase_one = true;
            self.price_from_scratch();
            loop {
                match self.step()? {
                    Step::Moved => {}
                    Step::Optimal => break,
                    Step::Unbounded => unreachable!("phase one is bounded below by zero"),
                }
            }
            let infeas: f64 = (0..self.m)
                .filter(|&i| self.basis[i] == Basic::Artificial)
                .map(|i| self.beta[i].abs())
                .sum();
            if infeas > self.feas_tol {
                return Ok(LpStatus::Infeasible);
            }
            self.expel_artificials();
        }
        self.phase_one = false;
        self.bland = false;
        self.degenerate = 0;
        self.price_from_scratch();
        loop {
            match self.step()? {
                Step::Moved => {}
                Step::Optimal => return Ok(LpStatus::Optimal),
                Step::Unbounded => return Ok(LpStatus::Unbounded),
            }
        }
    }

    fn basic_cost(&self, i: usize) -> f64 {
        match self.basis[i] {
            Basic::Artificial => {
                if self.phase_one {
                    1.0
                } else {
                    0.0
                }
            }
            Basic::Col(j) => {
                if self.phase_one {
                    0.0
                } else {
                    self.cost[j]
                }
            }
        }
    }

    fn price_from_scratch(&mut self) {
        let nc = self.nc;
        for j in 0..nc {
            self.d[j] = if self.phase_one { 0.0 } else { self.cost[j] };
        }
        for i in 0..self.m {
            let cb = self.basic_cost(i);
            if cb != 0.0 {
                let row = &self.tab[i * nc..(i + 1) * nc];
                for (dj, &t) in self.d.iter_mut().zip(row) {
                    *dj -= cb * t;
                }
            }
        }
        for i in 0..self.m {
            if let Basic::Col(j) = self.basis[i] {
                self.d[j] = 0.0;
            }
        }
    }

    /// Entering column and direction (+1 increase, -1 decrease).
    fn choose_entering(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.nc {
            if self.row_of[j].is_some() || self.lo[j] == self.hi[j] {
                continue;
            }
            let dj = self.d[j];
            let at_lo = self.lo[j].is_finite() && self.x[j] <= self.lo[j];
            let at_hi = self.hi[j].is_finite() && self.x[j] >= self.hi[j];
            let dir = if dj < -self.opt_tol && !at_hi {
                1.0
            } else if dj > self.opt_tol && !at_lo {
                -1.0
            } else {
                continue;
            };
            if self.bland {
                return Some((j, dir));
            }
            if dj.abs() > best_score {
                best_score = dj.abs();
                best = Some((j, dir));
            }
        }
        best
    }

    fn step(&mut self) -> Result<Step, LpError> {
        let Some((q, dir)) = self.choose_entering() else {
            return Ok(Step::Optimal);
        };
        if self.iterations >= self.max_iterations {
            return Err(LpError::IterationLimit(self.max_iterations));
        }
        self.iterations += 1;
        let nc = self.nc;
        let flip = self.hi[q] - self.lo[q];

        // Row limits: basic i moves by -alpha * t.
        let limit = |s: &Self, i: usize, alpha: f64, slack: f64| -> Option<f64> {
            let (lo, hi) = match s.basis[i] {
                Basic::Col(b) => (s.lo[b], s.hi[b]),
                Basic::Artificial => (0.0, if s.phase_one { f64::INFINITY } else { 0.0 }),
            };
            if alpha > PIVOT_TOL && lo.is_finite() {
                Some(((s.beta[i] - lo + slack) / alpha).max(0.0))
            } else if alpha < -PIVOT_TOL && hi.is_finite() {
                Some(((hi - s.beta[i] + slack) / -alpha).max(0.0))
            } else {
                None
            }
        };

        let mut leave: Option<(usize, f64)> = None;
        if self.bland {
            let mut best_key = usize::MAX;
            for i in 0..self.m {
                let alpha = dir * self.tab[i * nc + q];
                if let Some(r) = limit(self, i, alpha, 0.0) {
                    let key = match self.basis[i] {
                        Basic::Col(b) => b,
                        Basic::Artificial => nc + i,
                    };
                    let better = match leave {
                        None => true,
                        Some((_, t)) => r < t - ZERO_TOL || (r <= t + ZERO_TOL && key < best_key),
                    };
                    if better {
                        leave = Some((i, r));
                        best_key = key;
                    }
                }
            }
        } else {
            let mut theta = f64::INFINITY;
            for i in 0..self.m {
                let alpha = dir * self.tab[i * nc + q];
                if let Some(r) = limit(self, i, alpha, self.feas_tol) {
                    theta = theta.min(r);
                }
            }
            if theta.is_finite() {
                let mut best_alpha = 0.0;
                for i in 0..self.m {
                    let alpha = dir * self.tab[i * nc + q];
                    if let Some(r) = limit(self, i, alpha, 0.0) {
                        if r <= theta && alpha.abs() > best_alpha {
                            best_alpha = alpha.abs();
                            leave = Some((i, r));
                        }
                    }
                }
            }
        }

        let t = match leave {
            Some((_, t)) if !(flip <= t) => t,
            _ if flip.is_finite() => {
                // Bound flip: the entering column jumps to its other bound.
                for i in 0..self.m {
                    let a = self.tab[i * nc + q];
                    if a != 0.0 {
                        self.beta[i] -= dir * a * flip;
                    }
                }
                self.x[q] = if dir > 0.0 { self.hi[q] } else { self.lo[q] };
                self.note_progress(flip);
                return Ok(Step::Moved);
            }
            _ => return Ok(Step::Unbounded),
        };
        let (r, _) = leave.expect("finite step has a leaving row");
        self.note_progress(t);

        for i in 0..self.m {
            let a = self.tab[i * nc + q];
            if a != 0.0 {
                self.beta[i] -= dir * a * t;
            }
        }
        let entering_value = self.x[q] + dir * t;
        let alpha_r = dir * self.tab[r * nc + q];
        if let Basic::Col(b) = self.basis[r] {
            self.x[b] = if alpha_r > 0.0 { self.lo[b] } else { self.hi[b] };
            self.row_of[b] = None;
        }
        self.basis[r] = Basic::Col(q);
        self.row_of[q] = Some(r);
        self.beta[r] = entering_value;
        self.pivot(r, q);
        Ok(Step::Moved)
    }

    fn note_progress(&mut self, t: f64) {
        if t <= ZERO_TOL {
            self.degenerate += 1;
            if self.degenerate >= 2 * (self.m + self.nc) {
                self.bland = true;
            }
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let nc = self.nc;
        let piv = self.tab[r * nc + q];
        let mut prow: Vec<f64> = self.tab[r * nc..(r + 1) * nc].to_vec();
        for v in prow.iter_mut() {
            *v /= piv;
            if v.abs() < ZERO_TOL {
                *v = 0.0;
            }
        }
        prow[q] = 1.0;
        let nz: Vec<usize> = (0..nc).filter(|&j| prow[j] != 0.0).collect();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.tab[i * nc + q];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.tab[i * nc..(i + 1) * nc];
            for &j in &nz {
                let v = row[j] - f * prow[j];
                row[j] = if v.abs() < ZERO_TOL { 0.0 } else { v };
            }
            row[q] = 0.0;
        }
        let dq = self.d[q];
        if dq != 0.0 {
            for &j in &nz {
                self.d[j] -= dq * prow[j];
            }
            self.d[q] = 0.0;
        }
        self.tab[r * nc..(r + 1) * nc].copy_from_slice(&prow);
    }

    /// Pivot zero-level artificials out of the basis where possible.
    fn expel_artificials(&mut self) {
        let nc = self.nc;
        for r in 0..self.m {
            if self.basis[r] != Basic::Artificial {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for j in 0..nc {
                if self.row_of[j].is_some() {
                    continue;
                }
                let a = self.tab[r * nc + j].abs();
                if a > PIVOT_TOL && best.is_none_or(|(_, b)| a > b) {
                    best = Some((j, a));
                }
            }
            if let Some((q, _)) = best {
                self.basis[r] = Basic::Col(q);
                self.row_of[q] = Some(r);
                self.beta[r] = self.x[q];
                self.pivot(r, q);
            }
        }
    }

    fn structural_values(&self) -> Vec<f64> {
        (0..self.n_struct)
            .map(|j| match self.row_of[j] {
                Some(i) => {
                    let v = self.beta[i];
                    // Snap round-off just outside a bound back onto it.
                    if v < self.lo[j] && v > self.lo[j] - self.feas_tol {
                        self.lo[j]
                    } else if v > self.hi[j] && v < self.hi[j] + self.feas_tol {
                        self.hi[j]
                    } else {
                        v
                    }
                }
                None => self.x[j],
            })
            .collect()
    }
}
