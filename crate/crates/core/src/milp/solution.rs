use super::{MilpModel, VarKind, VarRole};
use crate::model::{
    ClientId, ClientOrder, CostParams, DisruptionProfile, NodeId, ServiceArcId, ServiceNetwork,
};
use crate::pathsolver::{check_path, path_unit_costs, worst_case_under, InstanceSolution};
use crate::worstcase::{dual_certificate, WorstCaseError};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

/// Half-width of the band around 0.5 inside which binary rounding warns.
const INTEGRALITY_BAND: f64 = 1e-4;
/// Absolute slack for constraint checks.
const FEAS_TOL: f64 = 1e-6;
/// Relative objective gap that is reported.
const GAP_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolutionError {
    #[error("solution line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("solution line {line}: unknown variable {name}")]
    UnknownVariable { line: usize, name: String },
    #[error("solution inconsistent for client {client}: {message}")]
    Inconsistent { client: ClientId, message: String },
}

/// Values read back for one client.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientAssignment {
    pub client: ClientId,
    pub path: Vec<ServiceArcId>,
    pub outbound_day: f64,
    /// Deviation fractions for every service-arc that has a value.
    pub u: BTreeMap<ServiceArcId, f64>,
    pub early: f64,
    pub late: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assignments {
    pub clients: Vec<ClientAssignment>,
    /// Reported objective, or the model objective at the given values.
    pub claimed_objective: f64,
    /// Binaries whose value was close to the rounding threshold.
    pub warnings: Vec<String>,
}

/// Reads `name value` lines. Lines starting with `#` and blank lines are
/// ignored; the reserved name `objective` carries the solver's objective.
pub fn parse_values(text: &str) -> Result<(BTreeMap<String, f64>, Option<f64>), SolutionError> {
    let mut values = BTreeMap::new();
    let mut objective = None;
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let syntax = |message: String| SolutionError::Syntax { line: n + 1, message };
        let mut parts = line.split_whitespace();
        let (Some(name), Some(value), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(syntax(format!("expected `name value`, got {line:?}")));
        };
        let value: f64 = value
            .parse()
            .map_err(|_| syntax(format!("bad value {value:?}")))?;
        if name == "objective" {
            objective = Some(value);
        } else if values.insert(name.to_string(), value).is_some() {
            return Err(syntax(format!("duplicate variable {name}")));
        }
    }
    Ok((values, objective))
}

/// Interprets a solution file for `model` (built from `net` and `orders`).
///
/// Binaries are rounded at 0.5; values within 1e-4 of the threshold are
/// reported in `warnings`. Missing variables count as zero.
pub fn parse_solution(
    model: &MilpModel,
    net: &ServiceNetwork,
    orders: &[ClientOrder],
    text: &str,
) -> Result<Assignments, SolutionError> {
    let (values, objective) = parse_values(text)?;
    let mut dense = vec![0.0; model.variables.len()];
    for (name, &value) in &values {
        let Some(i) = model.var_index(name) else {
            let line = text
                .lines()
                .position(|l| l.split_whitespace().next() == Some(name))
                .map_or(0, |p| p + 1);
            return Err(SolutionError::UnknownVariable { line, name: name.clone() });
        };
        dense[i] = value;
    }

    let mut warnings = Vec::new();
    let mut per_client: BTreeMap<ClientId, ClientValues> = BTreeMap::new();
    for (var, &value) in model.variables.iter().zip(&dense) {
        if var.kind == VarKind::Binary && (value - 0.5).abs() < INTEGRALITY_BAND {
            warnings.push(format!("{} = {value} is within {INTEGRALITY_BAND} of 0.5", var.name));
        }
        let Some(role) = VarRole::parse(&var.name) else {
            continue;
        };
        let entry = per_client.entry(role.client()).or_default();
        match role {
            VarRole::Route { arc, .. } if value > 0.5 => entry.selected.push(arc),
            VarRole::Outbound { .. } => entry.outbound = value,
            VarRole::Deviation { arc, .. } => {
                entry.u.insert(arc, value);
            }
            VarRole::Early { .. } => entry.early = value,
            VarRole::Late { .. } => entry.late = value,
            _ => {}
        }
    }

    let mut clients = Vec::with_capacity(orders.len());
    for order in orders {
        let found = per_client.remove(&order.id).unwrap_or_default();
        let path = trace_path(net, order, &found.selected)?;
        clients.push(ClientAssignment {
            client: order.id,
            path,
            outbound_day: found.outbound,
            u: found.u,
            early: found.early,
            late: found.late,
        });
    }
    Ok(Assignments {
        clients,
        claimed_objective: objective.unwrap_or_else(|| model.objective_value(&dense)),
        warnings,
    })
}

#[derive(Default)]
struct ClientValues {
    selected: Vec<ServiceArcId>,
    outbound: f64,
    u: BTreeMap<ServiceArcId, f64>,
    early: f64,
    late: f64,
}

/// Orders the selected service-arcs into a single origin-destination chain.
fn trace_path(
    net: &ServiceNetwork,
    order: &ClientOrder,
    selected: &[ServiceArcId],
) -> Result<Vec<ServiceArcId>, SolutionError> {
    let inconsistent = |message: String| SolutionError::Inconsistent {
        client: order.id,
        message,
    };
    if selected.is_empty() {
        return Err(inconsistent("no service-arc selected".into()));
    }
    let mut by_tail: BTreeMap<NodeId, Vec<ServiceArcId>> = BTreeMap::new();
    for &id in selected {
        by_tail.entry(net.service_arc(id).from).or_default().push(id);
    }
    let mut path = Vec::new();
    let mut at = net.origin;
    while at != order.destination {
        let leaving = by_tail.remove(&at).unwrap_or_default();
        match leaving.as_slice() {
            [id] => {
                path.push(*id);
                at = net.service_arc(*id).to;
            }
            [] => {
                return Err(inconsistent(format!(
                    "no selected service-arc leaves {at} after {} steps",
                    path.len()
                )))
            }
            many => {
                let list: Vec<String> = many.iter().map(ToString::to_string).collect();
                return Err(inconsistent(format!("{at} is left by {}", list.join(", "))));
            }
        }
        if path.len() > selected.len() {
            return Err(inconsistent("selected service-arcs form a cycle".into()));
        }
    }
    if path.len() != selected.len() {
        let stray: Vec<String> = by_tail.values().flatten().map(ToString::to_string).collect();
        return Err(inconsistent(format!("selected service-arcs off the path: {}", stray.join(", "))));
    }
    Ok(path)
}

/// One verification outcome.
#[derive(Debug, Clone, PartialEq)]
pub enum Finding {
    InvalidPath { client: ClientId, reason: String },
    NegativeOutbound { client: ClientId, value: f64 },
    DeviationOutOfRange { client: ClientId, arc: ServiceArcId, value: f64 },
    BudgetExceeded { client: ClientId, used: f64, budget: f64 },
    ShelfLifeViolated { client: ClientId, arrival: f64, shelf_life: f64 },
    EarlinessUnderstated { client: ClientId, reported: f64, required: f64 },
    LatenessUnderstated { client: ClientId, reported: f64, required: f64 },
    ObjectiveGap { claimed: f64, recomputed: f64 },
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Finding::InvalidPath { client, reason } => write!(f, "{client}: invalid path: {reason}"),
            Finding::NegativeOutbound { client, value } => {
                write!(f, "{client}: negative outbound day {value}")
            }
            Finding::DeviationOutOfRange { client, arc, value } => {
                write!(f, "{client}: u on {arc} = {value} outside [0, 1]")
            }
            Finding::BudgetExceeded {
                client,
                used,
                budget,
            } => write!(f, "{client}: deviations sum to {used}, budget is {budget}"),
            Finding::ShelfLifeViolated {
                client,
                arrival,
                shelf_life,
            } => write!(
                f,
                "{client}: worst-case arrival {arrival:.6} exceeds shelf life {shelf_life}"
            ),
            Finding::EarlinessUnderstated {
                client,
                reported,
                required,
            } => write!(f, "{client}: earliness {reported} below required {required}"),
            Finding::LatenessUnderstated {
                client,
                reported,
                required,
            } => write!(f, "{client}: lateness {reported} below required {required}"),
            Finding::ObjectiveGap {
                claimed,
                recomputed,
            } => write!(
                f,
                "objective gap: claimed {claimed}, recomputed {recomputed}"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub findings: Vec<Finding>,
    pub claimed_objective: f64,
    /// `None` when some path is invalid.
    pub recomputed_objective: Option<f64>,
}

impl VerificationReport {
    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "claimed objective     {}", self.claimed_objective)?;
        match self.recomputed_objective {
            Some(v) => writeln!(f, "recomputed objective  {v}")?,
            None => writeln!(f, "recomputed objective  n/a")?,
        }
        if self.findings.is_empty() {
            write!(f, "status                ok")
        } else {
            write!(f, "status                {} finding(s)", self.findings.len())?;
            for finding in &self.findings {
                write!(f, "\n  - {finding}")?;
            }
            Ok(())
        }
    }
}

/// Checks `assignments` against the robust model without using any dual
/// variable: worst-case times come from the greedy worst-case evaluation.
/// The objective is recomputed with the reported earliness and lateness.
pub fn verify_solution(
    net: &ServiceNetwork,
    orders: &[ClientOrder],
    profile: &DisruptionProfile,
    costs: &CostParams,
    assignments: &Assignments,
) -> VerificationReport {
    let mut findings = Vec::new();
    let mut objective = Some(0.0);
    let psi = costs.degradation_cost_per_day();
    for (order, a) in orders.iter().zip(&assignments.clients) {
        let client = order.id;
        if a.outbound_day < -FEAS_TOL {
            findings.push(Finding::NegativeOutbound { client, value: a.outbound_day });
        }
        for (&arc, &value) in &a.u {
            if !(-FEAS_TOL..=1.0 + FEAS_TOL).contains(&value) {
                findings.push(Finding::DeviationOutOfRange { client, arc, value });
            }
        }
        let used: f64 = a.u.values().sum();
        if used > profile.budget + FEAS_TOL {
            findings.push(Finding::BudgetExceeded { client, used, budget: profile.budget });
        }
        if let Err(e) = check_path(net, order, &a.path) {
            findings.push(Finding::InvalidPath { client, reason: e.to_string() });
            objective = None;
            continue;
        }
        let worst = match worst_case_under(net, &a.path, profile) {
            Ok(w) => w,
            Err(e) => {
                findings.push(Finding::InvalidPath { client, reason: e.to_string() });
                objective = None;
                continue;
            }
        };
        let arrival = a.outbound_day + worst.total_time;
        if arrival > costs.shelf_life + FEAS_TOL {
            findings.push(Finding::ShelfLifeViolated {
                client,
                arrival,
                shelf_life: costs.shelf_life,
            });
        }
        let late = (arrival - order.due_date).max(0.0);
        if a.late < late - FEAS_TOL {
            findings.push(Finding::LatenessUnderstated { client, reported: a.late, required: late });
        }
        // Earliness is measured against the scenario the solution chose.
        let scenario_arrival = a.outbound_day
            + a.path
                .iter()
                .map(|&id| {
                    let arc = net.service_arc(id);
                    let u = a.u.get(&id).copied().unwrap_or(0.0);
                    arc.nominal_time + profile.deviation(id, arc) * u
                })
                .sum::<f64>();
        let early = (order.due_date - scenario_arrival).max(0.0);
        if a.early < early - FEAS_TOL {
            findings.push(Finding::EarlinessUnderstated { client, reported: a.early, required: early });
        }
        let (transport, transfer) = path_unit_costs(net, costs, &a.path);
        let q = order.quantity;
        let cost = q * (transport + transfer)
            + psi * q * arrival
            + costs.early_penalty_per_day * q * a.early
            + costs.late_penalty_per_day * q * a.late;
        objective = objective.map(|o| o + cost);
    }
    let claimed = assignments.claimed_objective;
    if let Some(recomputed) = objective {
        if (recomputed - claimed).abs() > GAP_TOL * claimed.abs().max(1.0) {
            findings.push(Finding::ObjectiveGap { claimed, recomputed });
        }
    }
    VerificationReport {
        findings,
        claimed_objective: claimed,
        recomputed_objective: objective,
    }
}

/// Model variable values realising a pathsolver solution: the chosen arcs
/// and consecutive service pairs, the worst-case `u`, and `λ`, `θ` from the
/// dual certificate. Variables left out are zero.
pub fn itinerary_values(
    net: &ServiceNetwork,
    orders: &[ClientOrder],
    profile: &DisruptionProfile,
    solution: &InstanceSolution,
) -> Result<BTreeMap<String, f64>, WorstCaseError> {
    let deviated = profile.apply(net);
    let mut values = BTreeMap::new();
    let mut set = |role: VarRole, value: f64| {
        if value != 0.0 {
            values.insert(role.to_string(), value);
        }
    };
    for it in &solution.itineraries {
        let client = it.client;
        let Some(order) = orders.iter().find(|o| o.id == client) else {
            continue;
        };
        for (pos, &arc) in it.path.iter().enumerate() {
            set(VarRole::Route { client, arc }, 1.0);
            if pos > 0 {
                let prev = net.service_arc(it.path[pos - 1]);
                let cur = net.service_arc(arc);
                set(
                    VarRole::Transfer { client, node: cur.from, from: prev.service, to: cur.service },
                    1.0,
                );
            }
        }
        for (&arc, &u) in &it.worst_case.u_assignment {
            set(VarRole::Deviation { client, arc }, u);
            set(VarRole::DeviationOnRoute { client, arc }, u);
        }
        let cert = dual_certificate(&deviated, &it.path, profile.budget)?;
        set(VarRole::Lambda { client }, cert.lambda);
        for &(arc, theta) in &cert.theta {
            set(VarRole::Theta { client, arc }, theta);
        }
        set(VarRole::Outbound { client }, it.outbound_day);
        let arrival = it.arrival_day();
        set(VarRole::Early { client }, (order.due_date - arrival).max(0.0));
        set(VarRole::Late { client }, (arrival - order.due_date).max(0.0));
    }
    Ok(values)
}

/// Solution file text: `name value` lines in name order, preceded by the
/// objective when given.
pub fn solution_text(values: &BTreeMap<String, f64>, objective: Option<f64>) -> String {
    let mut out = String::new();
    if let Some(obj) = objective {
        out.push_str(&format!("objective {obj:?}\n"));
    }
    for (name, value) in values {
        out.push_str(&format!("{name} {value:?}\n"));
    }
    out
}
