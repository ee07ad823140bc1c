//! Exact reference solver for tiny models: enumerate assignments of the
//! binaries that sit in all-binary equality rows, solve the remaining LP
//! for each.

use super::{MilpModel, Sense, VarKind};
use microlp::{ComparisonOp, OptimizationDirection, Problem};
use std::collections::BTreeMap;
use thiserror::Error;

const TOL: f64 = 1e-9;
const INTEGRAL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnumerationError {
    #[error("model is infeasible")]
    Infeasible,
    #[error("model is unbounded")]
    Unbounded,
    #[error("enumeration stopped after {0} LP solves")]
    LimitReached(usize),
    #[error("LP solver failed: {0}")]
    Lp(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnumerationResult {
    pub objective: f64,
    /// Optimal values, indexed like the model's variables.
    pub values: Vec<f64>,
    pub lp_solves: usize,
}

/// Minimises `model` exactly by enumeration.
///
/// Independent blocks (variables never sharing a row) are solved
/// separately. Within a block, binaries that appear in equality rows made
/// only of binaries are branched on, with interval propagation over all
/// binary-only rows; every surviving assignment leaves an LP in which the
/// other binaries are relaxed to `[0, 1]`. A fractional relaxed binary is branched on as well,
/// so the result is exact. Stops with an error after `max_lp_solves` LPs.
pub fn solve_by_enumeration(
    model: &MilpModel,
    max_lp_solves: usize,
) -> Result<EnumerationResult, EnumerationError> {
    let n = model.variables.len();
    let mut objective_coef = vec![0.0; n];
    for &(v, c) in &model.objective {
        objective_coef[v] = c;
    }

    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut v: usize) -> usize {
        while parent[v] != v {
            parent[v] = parent[parent[v]];
            v = parent[v];
        }
        v
    }
    let mut in_row = vec![false; n];
    for row in &model.constraints {
        if let Some(&(first, _)) = row.terms.first() {
            for &(v, _) in &row.terms {
                in_row[v] = true;
                let (a, b) = (find(&mut parent, first), find(&mut parent, v));
                parent[a] = b;
            }
        } else if !row.sense.holds(0.0, row.rhs, TOL) {
            return Err(EnumerationError::Infeasible);
        }
    }

    let mut values = vec![0.0; n];
    let mut total = 0.0;
    for v in (0..n).filter(|&v| !in_row[v]) {
        let var = &model.variables[v];
        let c = objective_coef[v];
        let x = if c > 0.0 {
            var.lower
        } else if c < 0.0 {
            var.upper
        } else if var.lower.is_finite() {
            var.lower
        } else {
            var.upper.min(0.0)
        };
        if !x.is_finite() && c != 0.0 {
            return Err(EnumerationError::Unbounded);
        }
        values[v] = x;
        total += c * x;
    }

    let mut blocks: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for v in (0..n).filter(|&v| in_row[v]) {
        let root = find(&mut parent, v);
        blocks.entry(root).or_default().push(v);
    }
    let mut block_rows: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (r, row) in model.constraints.iter().enumerate() {
        if let Some(&(first, _)) = row.terms.first() {
            let root = find(&mut parent, first);
            block_rows.entry(root).or_default().push(r);
        }
    }

    let mut lp_solves = 0;
    for (root, vars) in blocks {
        let rows = block_rows.remove(&root).unwrap_or_default();
        let mut block = Block {
            model,
            objective: &objective_coef,
            vars,
            rows,
            lp_solves: &mut lp_solves,
            max_lp_solves,
            best: None,
        };
        block.run()?;
        let (obj, assignment) = block.best.ok_or(EnumerationError::Infeasible)?;
        for (v, x) in assignment {
            values[v] = x;
        }
        total += obj;
    }
    Ok(EnumerationResult {
        objective: total,
        values,
        lp_solves,
    })
}

struct Block<'a> {
    model: &'a MilpModel,
    objective: &'a [f64],
    vars: Vec<usize>,
    rows: Vec<usize>,
    lp_solves: &'a mut usize,
    max_lp_solves: usize,
    best: Option<(f64, BTreeMap<usize, f64>)>,
}

impl Block<'_> {
    fn run(&mut self) -> Result<(), EnumerationError> {
        let model = self.model;
        let binary = |v: usize| model.variables[v].kind == VarKind::Binary;
        let pure_rows: Vec<usize> = self
            .rows
            .iter()
            .copied()
            .filter(|&r| model.constraints[r].terms.iter().all(|&(v, _)| binary(v)))
            .collect();
        let mut branch: Vec<usize> = pure_rows
            .iter()
            .filter(|&&r| model.constraints[r].sense == Sense::Eq)
            .flat_map(|&r| model.constraints[r].terms.iter().map(|&(v, _)| v))
            .collect();
        branch.sort_unstable();
        branch.dedup();
        let mut rows_of: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &r in &pure_rows {
            for &(v, _) in &model.constraints[r].terms {
                rows_of.entry(v).or_default().push(r);
            }
        }
        let mut fixed = BTreeMap::new();
        self.dfs(&branch, 0, &rows_of, &mut fixed)
    }

    fn row_possible(&self, r: usize, fixed: &BTreeMap<usize, f64>) -> bool {
        let row = &self.model.constraints[r];
        let (mut lo, mut hi) = (0.0, 0.0);
        for &(v, c) in &row.terms {
            match fixed.get(&v) {
                Some(&x) => {
                    lo += c * x;
                    hi += c * x;
                }
                None => {
                    lo += c.min(0.0);
                    hi += c.max(0.0);
                }
            }
        }
        match row.sense {
            Sense::Le => lo <= row.rhs + TOL,
            Sense::Ge => hi >= row.rhs - TOL,
            Sense::Eq => lo <= row.rhs + TOL && hi >= row.rhs - TOL,
        }
    }

    fn dfs(
        &mut self,
        branch: &[usize],
        depth: usize,
        rows_of: &BTreeMap<usize, Vec<usize>>,
        fixed: &mut BTreeMap<usize, f64>,
    ) -> Result<(), EnumerationError> {
        if depth == branch.len() {
            return self.leaf(fixed);
        }
        let v = branch[depth];
        for x in [0.0, 1.0] {
            fixed.insert(v, x);
            let ok = rows_of
                .get(&v)
                .is_none_or(|rows| rows.iter().all(|&r| self.row_possible(r, fixed)));
            if ok {
                self.dfs(branch, depth + 1, rows_of, fixed)?;
            }
            fixed.remove(&v);
        }
        Ok(())
    }

    /// Solves the LP left by `fixed`, branching on fractional binaries.
    fn leaf(&mut self, fixed: &mut BTreeMap<usize, f64>) -> Result<(), EnumerationError> {
        if *self.lp_solves >= self.max_lp_solves {
            return Err(EnumerationError::LimitReached(*self.lp_solves));
        }
        *self.lp_solves += 1;
        let Some((obj, assignment)) = self.solve_lp(fixed)? else {
            return Ok(());
        };
        let fractional = assignment.iter().find(|&(&v, &x)| {
            self.model.variables[v].kind == VarKind::Binary
                && (x - x.round()).abs() > INTEGRAL_TOL
        });
        if let Some((&v, _)) = fractional {
            for x in [0.0, 1.0] {
                fixed.insert(v, x);
                self.leaf(fixed)?;
            }
            fixed.remove(&v);
            return Ok(());
        }
        let better = match &self.best {
            None => true,
            Some((best, _)) => obj < best - TOL * best.abs().max(1.0),
        };
        if better {
            self.best = Some((obj, assignment));
        }
        Ok(())
    }

    fn solve_lp(
        &self,
        fixed: &BTreeMap<usize, f64>,
    ) -> Result<Option<(f64, BTreeMap<usize, f64>)>, EnumerationError> {
        let model = self.model;
        let mut problem = Problem::new(OptimizationDirection::Minimize);
        let mut handle = BTreeMap::new();
        let mut constant = 0.0;
        for &v in &self.vars {
            if let Some(&x) = fixed.get(&v) {
                constant += self.objective[v] * x;
            } else {
                let var = &model.variables[v];
                handle.insert(v, problem.add_var(self.objective[v], (var.lower, var.upper)));
            }
        }
        for &r in &self.rows {
            let row = &model.constraints[r];
            let mut rhs = row.rhs;
            let mut expr = Vec::new();
            for &(v, c) in &row.terms {
                match fixed.get(&v) {
                    Some(&x) => rhs -= c * x,
                    None => expr.push((handle[&v], c)),
                }
            }
            if expr.is_empty() {
                if !row.sense.holds(0.0, rhs, TOL) {
                    return Ok(None);
                }
                continue;
            }
            let op = match row.sense {
                Sense::Le => ComparisonOp::Le,
                Sense::Ge => ComparisonOp::Ge,
                Sense::Eq => ComparisonOp::Eq,
            };
            problem.add_constraint(expr.as_slice(), op, rhs);
        }
        let solution = match problem.solve() {
            Ok(outcome) => outcome
                .into_solution()
                .map_err(|e| EnumerationError::Lp(format!("{e:?}")))?,
            Err(microlp::Error::Infeasible) => return Ok(None),
            Err(microlp::Error::Unbounded) => return Err(EnumerationError::Unbounded),
            Err(e) => return Err(EnumerationError::Lp(e.to_string())),
        };
        let mut assignment: BTreeMap<usize, f64> = fixed
            .iter()
            .filter(|(v, _)| self.vars.binary_search(v).is_ok())
            .map(|(&v, &x)| (v, x))
            .collect();
        for (&v, &h) in &handle {
            assignment.insert(v, solution.var_value_raw(h));
        }
        Ok(Some((constant + solution.objective(), assignment)))
    }
}
