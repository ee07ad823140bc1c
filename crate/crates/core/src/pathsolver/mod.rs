//! Exact per-client robust itinerary optimisation.
//!
//! The robust model has no constraint coupling two clients, so the instance
//! optimum is the sum of independent per-client optima. Each client is
//! solved by depth-first branch and bound over the transshipment-expanded
//! graph; [`brute_force_oracle`] enumerates the same search space without
//! pruning for verification.

mod oracle;
mod search;

pub use oracle::{brute_force_oracle, ORACLE_MAX_NODES};
pub use search::{solve_client, solve_instance};

use crate::model::{
    ClientId, ClientOrder, CostParams, DisruptionProfile, NodeId, ServiceArc, ServiceArcId,
    ServiceNetwork, EPS,
};
use crate::worstcase::{worst_case_of, WorstCaseError, WorstCaseResult};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use std::ops::{Add, AddAssign};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("client {client}: no itinerary reaches the destination within the shelf life")]
    Infeasible { client: ClientId },
    #[error("infeasible clients: {}", list(.0))]
    InfeasibleClients(Vec<ClientId>),
    #[error("arrival at day {arrival:.6} exceeds the shelf life of {shelf_life} days")]
    ShelfLifeExceeded { arrival: f64, shelf_life: f64 },
    #[error("invalid itinerary: {0}")]
    InvalidItinerary(String),
    #[error("client {client}: destination {destination} is not a reachable node")]
    UnknownDestination { client: ClientId, destination: NodeId },
    #[error("outbound day must be non-negative, got {0}")]
    NegativeOutbound(f64),
    #[error("brute-force oracle is limited to {limit} nodes, network has {nodes}")]
    OracleTooLarge { nodes: usize, limit: usize },
    #[error(transparent)]
    WorstCase(#[from] WorstCaseError),
}

fn list(clients: &[ClientId]) -> String {
    clients
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub transport: f64,
    pub transshipment: f64,
    pub degradation: f64,
    pub earliness_penalty: f64,
    pub lateness_penalty: f64,
    pub total: f64,
}

impl CostBreakdown {
    pub fn new(
        transport: f64,
        transshipment: f64,
        degradation: f64,
        earliness_penalty: f64,
        lateness_penalty: f64,
    ) -> Self {
        Self {
            transport,
            transshipment,
            degradation,
            earliness_penalty,
            lateness_penalty,
            total: transport + transshipment + degradation + earliness_penalty + lateness_penalty,
        }
    }
}

impl Add for CostBreakdown {
    type Output = CostBreakdown;

    fn add(self, rhs: Self) -> Self {
        CostBreakdown::new(
            self.transport + rhs.transport,
            self.transshipment + rhs.transshipment,
            self.degradation + rhs.degradation,
            self.earliness_penalty + rhs.earliness_penalty,
            self.lateness_penalty + rhs.lateness_penalty,
        )
    }
}

impl AddAssign for CostBreakdown {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl std::iter::Sum for CostBreakdown {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(CostBreakdown::default(), Add::add)
    }
}

impl fmt::Display for CostBreakdown {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "  transport        {:>14.4}", self.transport)?;
        writeln!(f, "  transshipment    {:>14.4}", self.transshipment)?;
        writeln!(f, "  degradation      {:>14.4}", self.degradation)?;
        writeln!(f, "  early penalty    {:>14.4}", self.earliness_penalty)?;
        writeln!(f, "  late penalty     {:>14.4}", self.lateness_penalty)?;
        write!(f, "  total            {:>14.4}", self.total)
    }
}

/// Optimal plan for one client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustItinerary {
    pub client: ClientId,
    pub path: Vec<ServiceArcId>,
    pub outbound_day: f64,
    pub worst_case: WorstCaseResult,
    pub costs: CostBreakdown,
}

impl RobustItinerary {
    /// Worst-case arrival day.
    pub fn arrival_day(&self) -> f64 {
        self.outbound_day + self.worst_case.total_time
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSolution {
    pub budget: f64,
    pub itineraries: Vec<RobustItinerary>,
    pub total: CostBreakdown,
}

impl InstanceSolution {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("solution is serializable");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

/// Assembles the cost terms of one client for a worst-case path time
/// `path_time` and outbound day `outbound`. The transport and transfer sums
/// are per unit.
pub(crate) fn assemble_costs(
    order: &ClientOrder,
    costs: &CostParams,
    transport_per_unit: f64,
    transfer_per_unit: f64,
    path_time: f64,
    outbound: f64,
) -> CostBreakdown {
    let q = order.quantity;
    let arrival = outbound + path_time;
    CostBreakdown::new(
        q * transport_per_unit,
        q * transfer_per_unit,
        costs.degradation_cost_per_day() * q * arrival,
        costs.early_penalty_per_day * q * (order.due_date - arrival).max(0.0),
        costs.late_penalty_per_day * q * (arrival - order.due_date).max(0.0),
    )
}

/// Outbound day minimising degradation and penalty costs for a worst-case
/// path time `path_time`.
///
/// The cost is convex piecewise linear in the arrival day with slope
/// `ψ − ω_e` before the due date and `ψ + ω_a` after it, so waiting only
/// pays off when earliness is dearer than degradation. Ties go to the
/// earliest day.
pub fn optimal_outbound(
    path_time: f64,
    order: &ClientOrder,
    costs: &CostParams,
) -> Result<f64, SolveError> {
    if path_time > costs.shelf_life + EPS {
        return Err(SolveError::ShelfLifeExceeded {
            arrival: path_time,
            shelf_life: costs.shelf_life,
        });
    }
    let slack = (costs.shelf_life - path_time).max(0.0);
    if costs.degradation_cost_per_day() < costs.early_penalty_per_day {
        Ok((order.due_date - path_time).clamp(0.0, slack))
    } else {
        Ok(0.0)
    }
}

/// Checks that `path` is a simple chain of service-arcs from the origin to
/// the client's destination.
pub fn check_path(
    net: &ServiceNetwork,
    order: &ClientOrder,
    path: &[ServiceArcId],
) -> Result<(), SolveError> {
    let invalid = |msg: String| Err(SolveError::InvalidItinerary(msg));
    if path.is_empty() {
        return Err(WorstCaseError::EmptyItinerary.into());
    }
    if let Some(bad) = path.iter().find(|id| id.0 >= net.service_arcs.len()) {
        return invalid(format!("unknown service-arc {bad}"));
    }
    let first = net.service_arc(path[0]);
    if first.from != net.origin {
        return invalid(format!("starts at {} instead of the origin", first.from));
    }
    let mut seen = BTreeSet::from([net.origin]);
    let mut at = net.origin;
    for &id in path {
        let arc = net.service_arc(id);
        if arc.from != at {
            return invalid(format!("{id} departs from {} but the order is at {at}", arc.from));
        }
        if !seen.insert(arc.to) {
            return invalid(format!("node {} visited twice", arc.to));
        }
        at = arc.to;
    }
    if at != order.destination {
        return invalid(format!("ends at {at} instead of {}", order.destination));
    }
    Ok(())
}

/// Per-unit transport and transfer sums of a path, accumulated in path order.
pub(crate) fn path_unit_costs(
    net: &ServiceNetwork,
    costs: &CostParams,
    path: &[ServiceArcId],
) -> (f64, f64) {
    let mut transport = 0.0;
    let mut transfer = 0.0;
    let mut prev: Option<&ServiceArc> = None;
    for &id in path {
        let arc = net.service_arc(id);
        if let Some(p) = prev {
            transfer += costs.transshipment(arc.from, p.service, arc.service);
        }
        transport += arc.unit_cost;
        prev = Some(arc);
    }
    (transport, transfer)
}

/// Cost of shipping `order` along `path` leaving on day `outbound`, under
/// the arrival-maximising deviation scenario of `profile`.
pub fn evaluate_itinerary(
    net: &ServiceNetwork,
    order: &ClientOrder,
    path: &[ServiceArcId],
    outbound: f64,
    profile: &DisruptionProfile,
    costs: &CostParams,
) -> Result<CostBreakdown, SolveError> {
    check_path(net, order, path)?;
    if !(outbound >= 0.0) {
        return Err(SolveError::NegativeOutbound(outbound));
    }
    let worst = worst_case_under(net, path, profile)?;
    let arrival = outbound + worst.total_time;
    if arrival > costs.shelf_life + EPS {
        return Err(SolveError::ShelfLifeExceeded {
            arrival,
            shelf_life: costs.shelf_life,
        });
    }
    let (transport, transfer) = path_unit_costs(net, costs, path);
    Ok(assemble_costs(
        order,
        costs,
        transport,
        transfer,
        worst.total_time,
        outbound,
    ))
}

/// Worst case of `path` with deviations taken from `profile`.
pub fn worst_case_under(
    net: &ServiceNetwork,
    path: &[ServiceArcId],
    profile: &DisruptionProfile,
) -> Result<WorstCaseResult, WorstCaseError> {
    let arcs: Vec<(ServiceArcId, ServiceArc)> = path
        .iter()
        .map(|&id| {
            let arc = net.service_arc(id);
            (
                id,
                ServiceArc {
                    max_deviation: profile.deviation(id, arc),
                    ..arc.clone()
                },
            )
        })
        .collect();
    worst_case_of(arcs.iter().map(|(id, arc)| (*id, arc)), profile.budget)
}

/// Tie rule shared by the solver and the oracle: strictly cheaper wins,
/// equal cost within `EPS` goes to the lexicographically smaller path.
pub(crate) fn improves(
    total: f64,
    path: &[ServiceArcId],
    incumbent: Option<(f64, &[ServiceArcId])>,
) -> bool {
    match incumbent {
        None => true,
        Some((best, best_path)) => {
            total < best - EPS || ((total - best).abs() <= EPS && path < best_path)
        }
    }
}

#[cfg(test)]
mod tests;
