//! Linearised robust MILP: construction, LP-format exchange, external
//! solution checking and an exhaustive reference solver for tiny models.
//!
//! The worst-case travel time inside the objective, the shelf-life row and
//! the lateness row is replaced by its LP dual (`Γλ + Σ(t̄x + θ)` with
//! `λ + θ ≥ t̂x`). The earliness row keeps the deviation fractions `u` as
//! variables and linearises the products `u·x` through `ux`.

mod enumerate;
mod lp;
mod solution;

pub use enumerate::{solve_by_enumeration, EnumerationError, EnumerationResult};
pub use lp::{emit_lp, parse_lp, LpParseError};
pub use solution::{
    itinerary_values, parse_solution, parse_values, solution_text, verify_solution, Assignments,
    ClientAssignment, Finding, SolutionError, VerificationReport,
};

use crate::model::{
    ClientId, ClientOrder, CostParams, DisruptionProfile, NodeId, ServiceArcId, ServiceId,
    ServiceNetwork,
};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Binary,
    Continuous,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    /// `f64::INFINITY` when unbounded above.
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        }
    }

    /// Whether `lhs sense rhs` holds with absolute slack `tol`.
    pub fn holds(self, lhs: f64, rhs: f64, tol: f64) -> bool {
        match self {
            Sense::Le => lhs <= rhs + tol,
            Sense::Ge => lhs >= rhs - tol,
            Sense::Eq => (lhs - rhs).abs() <= tol,
        }
    }
}

/// Linear row over variable indices, terms sorted by index.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// Minimisation model. Variables are sorted by name, so an index order is
/// also the name order.
#[derive(Debug, Clone, PartialEq)]
pub struct MilpModel {
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    pub objective: Vec<(usize, f64)>,
    index: BTreeMap<String, usize>,
}

/// Domain entity behind a variable name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarRole {
    Route { client: ClientId, arc: ServiceArcId },
    Transfer { client: ClientId, node: NodeId, from: ServiceId, to: ServiceId },
    Outbound { client: ClientId },
    Deviation { client: ClientId, arc: ServiceArcId },
    DeviationOnRoute { client: ClientId, arc: ServiceArcId },
    Lambda { client: ClientId },
    Theta { client: ClientId, arc: ServiceArcId },
    Early { client: ClientId },
    Late { client: ClientId },
}

fn number(part: &str, prefix: char) -> Option<u64> {
    part.strip_prefix(prefix)?.parse().ok()
}

impl VarRole {
    /// Decodes a name produced by [`build_model`].
    pub fn parse(name: &str) -> Option<VarRole> {
        let parts: Vec<&str> = name.split('_').collect();
        let client = ClientId(number(parts.get(1)?, 'c')? as u32);
        let arc = |i: usize| Some(ServiceArcId(number(parts.get(i)?, 'v')? as usize));
        let role = match (parts[0], parts.len()) {
            ("x", 3) => VarRole::Route { client, arc: arc(2)? },
            ("u", 3) => VarRole::Deviation { client, arc: arc(2)? },
            ("ux", 3) => VarRole::DeviationOnRoute { client, arc: arc(2)? },
            ("th", 3) => VarRole::Theta { client, arc: arc(2)? },
            ("w", 2) => VarRole::Outbound { client },
            ("lam", 2) => VarRole::Lambda { client },
            ("km", 2) => VarRole::Early { client },
            ("kp", 2) => VarRole::Late { client },
            ("z", 5) => VarRole::Transfer {
                client,
                node: NodeId(number(parts[2], 'i')? as u32),
                from: ServiceId(number(parts[3], 's')? as u32),
                to: ServiceId(number(parts[4], 's')? as u32),
            },
            _ => return None,
        };
        Some(role)
    }

    pub fn client(self) -> ClientId {
        match self {
            VarRole::Route { client, .. }
            | VarRole::Transfer { client, .. }
            | VarRole::Outbound { client }
            | VarRole::Deviation { client, .. }
            | VarRole::DeviationOnRoute { client, .. }
            | VarRole::Lambda { client }
            | VarRole::Theta { client, .. }
            | VarRole::Early { client }
            | VarRole::Late { client } => client,
        }
    }
}

impl fmt::Display for VarRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            VarRole::Route { client, arc } => write!(f, "x_{client}_{arc}"),
            VarRole::Transfer {
                client,
                node,
                from,
                to,
            } => write!(f, "z_{client}_i{}_{from}_{to}", node.0),
            VarRole::Outbound { client } => write!(f, "w_{client}"),
            VarRole::Deviation { client, arc } => write!(f, "u_{client}_{arc}"),
            VarRole::DeviationOnRoute { client, arc } => write!(f, "ux_{client}_{arc}"),
            VarRole::Lambda { client } => write!(f, "lam_{client}"),
            VarRole::Theta { client, arc } => write!(f, "th_{client}_{arc}"),
            VarRole::Early { client } => write!(f, "km_{client}"),
            VarRole::Late { client } => write!(f, "kp_{client}"),
        }
    }
}

impl MilpModel {
    /// Assembles a model from unsorted parts; indices in `constraints` and
    /// `objective` refer to positions in `variables`. Duplicate terms are
    /// merged and zero coefficients dropped.
    pub fn from_parts(
        variables: Vec<Variable>,
        constraints: Vec<Constraint>,
        objective: Vec<(usize, f64)>,
    ) -> Self {
        let mut order: Vec<usize> = (0..variables.len()).collect();
        order.sort_by(|&a, &b| variables[a].name.cmp(&variables[b].name));
        let mut new_index = vec![0; variables.len()];
        for (new, &old) in order.iter().enumerate() {
            new_index[old] = new;
        }
        let remap = |terms: Vec<(usize, f64)>| -> Vec<(usize, f64)> {
            let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
            for (v, c) in terms {
                *merged.entry(new_index[v]).or_default() += c;
            }
            merged.into_iter().filter(|&(_, c)| c != 0.0).collect()
        };
        let constraints = constraints
            .into_iter()
            .map(|c| Constraint {
                terms: remap(c.terms),
                ..c
            })
            .collect();
        let objective = remap(objective);
        let mut slots: Vec<Option<Variable>> = variables.into_iter().map(Some).collect();
        let variables: Vec<Variable> = order
            .iter()
            .map(|&old| slots[old].take().expect("each variable moved once"))
            .collect();
        let index = variables
            .iter()
            .enumerate()
            .map(|(i, v)| (v.name.clone(), i))
            .collect();
        Self {
            variables,
            constraints,
            objective,
            index,
        }
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn count(&self, kind: VarKind) -> usize {
        self.variables.iter().filter(|v| v.kind == kind).count()
    }

    pub fn constraint(&self, name: &str) -> Option<&Constraint> {
        self.constraints.iter().find(|c| c.name == name)
    }

    /// Objective value at `values` (indexed like `variables`).
    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().map(|&(v, c)| c * values[v]).sum()
    }

    /// Row activity at `values`.
    pub fn activity(&self, row: &Constraint, values: &[f64]) -> f64 {
        row.terms.iter().map(|&(v, c)| c * values[v]).sum()
    }
}

/// Collects variables and rows in creation order for [`MilpModel::from_parts`].
#[derive(Default)]
struct Builder {
    variables: Vec<Variable>,
    constraints: Vec<Constraint>,
    objective: Vec<(usize, f64)>,
}

impl Builder {
    fn var(&mut self, role: VarRole, kind: VarKind, lower: f64, upper: f64) -> usize {
        self.variables.push(Variable {
            name: role.to_string(),
            kind,
            lower,
            upper,
        });
        self.variables.len() - 1
    }

    fn row(&mut self, name: String, terms: Vec<(usize, f64)>, sense: Sense, rhs: f64) {
        self.constraints.push(Constraint {
            name,
            terms,
            sense,
            rhs,
        });
    }
}

/// Builds the robust MILP for `orders` on `net`.
///
/// Deviations come from `profile`. Rows without any incident service-arc
/// (flow balance at isolated nodes, transfer rows for service pairs that
/// never meet) are vacuous and omitted; every variable is still declared.
pub fn build_model(
    net: &ServiceNetwork,
    orders: &[ClientOrder],
    profile: &DisruptionProfile,
    costs: &CostParams,
) -> MilpModel {
    let mut b = Builder::default();
    let gamma = profile.budget;
    let psi = costs.degradation_cost_per_day();
    let service_ids: Vec<ServiceId> = net
        .services
        .iter()
        .map(|s| s.id)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let arcs: Vec<(ServiceArcId, f64, f64)> = net
        .service_arcs
        .iter()
        .enumerate()
        .map(|(k, arc)| (ServiceArcId(k), arc.nominal_time, profile.deviation(ServiceArcId(k), arc)))
        .collect();

    for order in orders {
        let c = order.id;
        let q = order.quantity;
        let x: Vec<usize> = arcs
            .iter()
            .map(|&(arc, _, _)| b.var(VarRole::Route { client: c, arc }, VarKind::Binary, 0.0, 1.0))
            .collect();
        let u: Vec<usize> = arcs
            .iter()
            .map(|&(arc, _, _)| b.var(VarRole::Deviation { client: c, arc }, VarKind::Continuous, 0.0, 1.0))
            .collect();
        let ux: Vec<usize> = arcs
            .iter()
            .map(|&(arc, _, _)| {
                b.var(VarRole::DeviationOnRoute { client: c, arc }, VarKind::Continuous, 0.0, f64::INFINITY)
            })
            .collect();
        let th: Vec<usize> = arcs
            .iter()
            .map(|&(arc, _, _)| b.var(VarRole::Theta { client: c, arc }, VarKind::Continuous, 0.0, f64::INFINITY))
            .collect();
        let w = b.var(VarRole::Outbound { client: c }, VarKind::Continuous, 0.0, f64::INFINITY);
        let lam = b.var(VarRole::Lambda { client: c }, VarKind::Continuous, 0.0, f64::INFINITY);
        let km = b.var(VarRole::Early { client: c }, VarKind::Continuous, 0.0, f64::INFINITY);
        let kp = b.var(VarRole::Late { client: c }, VarKind::Continuous, 0.0, f64::INFINITY);
        let mut z = BTreeMap::new();
        for &node in &net.nodes {
            for &from in &service_ids {
                for &to in &service_ids {
                    let role = VarRole::Transfer { client: c, node, from, to };
                    z.insert((node, from, to), b.var(role, VarKind::Binary, 0.0, 1.0));
                }
            }
        }

        // Objective.
        for (k, arc) in net.service_arcs.iter().enumerate() {
            b.objective.push((x[k], arc.unit_cost * q + psi * q * arc.nominal_time));
            b.objective.push((th[k], psi * q));
        }
        for (&(node, from, to), &var) in &z {
            if from != to {
                b.objective.push((var, costs.transshipment(node, from, to) * q));
            }
        }
        b.objective.push((w, psi * q));
        b.objective.push((lam, psi * q * gamma));
        b.objective.push((km, costs.early_penalty_per_day * q));
        b.objective.push((kp, costs.late_penalty_per_day * q));

        // Flow conservation and unit flow out of the origin / into the destination.
        for &node in &net.nodes {
            if node == net.origin || node == order.destination {
                continue;
            }
            let mut terms = Vec::new();
            for (k, arc) in net.service_arcs.iter().enumerate() {
                if arc.to == node {
                    terms.push((x[k], 1.0));
                }
                if arc.from == node {
                    terms.push((x[k], -1.0));
                }
            }
            if !terms.is_empty() {
                b.row(format!("flow_{c}_n{}", node.0), terms, Sense::Eq, 0.0);
            }
        }
        let leaving = net.service_arcs.iter().enumerate().filter(|(_, a)| a.from == net.origin);
        b.row(format!("src_{c}"), leaving.map(|(k, _)| (x[k], 1.0)).collect(), Sense::Eq, 1.0);
        let entering = net.service_arcs.iter().enumerate().filter(|(_, a)| a.to == order.destination);
        b.row(format!("snk_{c}"), entering.map(|(k, _)| (x[k], 1.0)).collect(), Sense::Eq, 1.0);

        // z ≥ x_in(s1) + x_out(s2) − 1 wherever s1 arrives at and s2 leaves a node.
        for &node in &net.nodes {
            for &from in &service_ids {
                let inbound: Vec<usize> = (0..arcs.len())
                    .filter(|&k| net.service_arcs[k].to == node && net.service_arcs[k].service == from)
                    .collect();
                if inbound.is_empty() {
                    continue;
                }
                for &to in &service_ids {
                    let outbound: Vec<usize> = (0..arcs.len())
                        .filter(|&k| net.service_arcs[k].from == node && net.service_arcs[k].service == to)
                        .collect();
                    if outbound.is_empty() {
                        continue;
                    }
                    let mut terms = vec![(z[&(node, from, to)], 1.0)];
                    terms.extend(inbound.iter().map(|&k| (x[k], -1.0)));
                    terms.extend(outbound.iter().map(|&k| (x[k], -1.0)));
                    b.row(format!("tr_{c}_i{}_{from}_{to}", node.0), terms, Sense::Ge, -1.0);
                }
            }
        }

        // Dual of the worst-case delay.
        for &(arc, _, deviation) in &arcs {
            let k = arc.0;
            b.row(
                format!("dual_{c}_{arc}"),
                vec![(lam, 1.0), (th[k], 1.0), (x[k], -deviation)],
                Sense::Ge,
                0.0,
            );
        }
        let robust_arrival = |extra: Vec<(usize, f64)>| -> Vec<(usize, f64)> {
            let mut terms = vec![(w, 1.0), (lam, gamma)];
            for &(arc, nominal, _) in &arcs {
                terms.push((x[arc.0], nominal));
                terms.push((th[arc.0], 1.0));
            }
            terms.extend(extra);
            terms
        };
        b.row(format!("shelf_{c}"), robust_arrival(vec![]), Sense::Le, costs.shelf_life);
        b.row(format!("late_{c}"), robust_arrival(vec![(kp, -1.0)]), Sense::Le, order.due_date);

        // Earliness against the scenario chosen through u.
        let mut early = vec![(w, 1.0), (km, 1.0)];
        for &(arc, nominal, deviation) in &arcs {
            early.push((x[arc.0], nominal));
            early.push((ux[arc.0], deviation));
        }
        b.row(format!("early_{c}"), early, Sense::Ge, order.due_date);
        for &(arc, _, _) in &arcs {
            let k = arc.0;
            b.row(format!("uxx_{c}_{arc}"), vec![(ux[k], 1.0), (x[k], -1.0)], Sense::Le, 0.0);
            b.row(format!("uxu_{c}_{arc}"), vec![(ux[k], 1.0), (u[k], -1.0)], Sense::Le, 0.0);
            b.row(
                format!("uxl_{c}_{arc}"),
                vec![(ux[k], 1.0), (u[k], -1.0), (x[k], -1.0)],
                Sense::Ge,
                -1.0,
            );
        }
        b.row(format!("bud_{c}"), u.iter().map(|&v| (v, 1.0)).collect(), Sense::Le, gamma);
    }

    MilpModel::from_parts(b.variables, b.constraints, b.objective)
}
