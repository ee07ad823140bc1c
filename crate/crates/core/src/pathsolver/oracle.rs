use super::{improves, CostBreakdown, RobustItinerary, SolveError};
use crate::model::{ClientOrder, CostParams, DisruptionProfile, ServiceArcId, ServiceNetwork, EPS};
use crate::worstcase::{WorstCaseError, WorstCaseResult};
use std::collections::BTreeMap;

/// Node-count guard of [`brute_force_oracle`].
pub const ORACLE_MAX_NODES: usize = 10;

/// Exhaustive reference solver.
///
/// Enumerates every simple origin-destination path without pruning. The
/// inner maximisation is solved by enumerating the vertices of
/// `{Σu ≤ Γ, 0 ≤ u ≤ 1}` (all-but-one coordinates integral) and the
/// outbound day by evaluating every breakpoint of the piecewise-linear cost.
/// Shares only the tie rule with [`super::solve_client`].
pub fn brute_force_oracle(
    net: &ServiceNetwork,
    order: &ClientOrder,
    profile: &DisruptionProfile,
    costs: &CostParams,
) -> Result<RobustItinerary, SolveError> {
    if net.nodes.len() > ORACLE_MAX_NODES {
        return Err(SolveError::OracleTooLarge {
            nodes: net.nodes.len(),
            limit: ORACLE_MAX_NODES,
        });
    }
    if !(profile.budget.is_finite() && profile.budget >= 0.0) {
        return Err(WorstCaseError::InvalidBudget(profile.budget.to_string()).into());
    }
    if order.destination == net.origin || !net.nodes.contains(&order.destination) {
        return Err(SolveError::UnknownDestination {
            client: order.id,
            destination: order.destination,
        });
    }

    let mut paths = Vec::new();
    let mut stack = Vec::new();
    let mut visited = vec![net.origin];
    enumerate(net, order, &mut visited, &mut stack, &mut paths);

    let mut best: Option<(f64, RobustItinerary)> = None;
    for path in paths {
        let Some(candidate) = evaluate(net, order, profile, costs, &path) else {
            continue;
        };
        let incumbent = best.as_ref().map(|(t, it)| (*t, it.path.as_slice()));
        if improves(candidate.costs.total, &candidate.path, incumbent) {
            best = Some((candidate.costs.total, candidate));
        }
    }
    best.map(|(_, it)| it)
        .ok_or(SolveError::Infeasible { client: order.id })
}

fn enumerate(
    net: &ServiceNetwork,
    order: &ClientOrder,
    visited: &mut Vec<crate::model::NodeId>,
    stack: &mut Vec<ServiceArcId>,
    out: &mut Vec<Vec<ServiceArcId>>,
) {
    let at = *visited.last().expect("origin is always visited");
    for (k, arc) in net.service_arcs.iter().enumerate() {
        if arc.from != at || visited.contains(&arc.to) {
            continue;
        }
        stack.push(ServiceArcId(k));
        if arc.to == order.destination {
            out.push(stack.clone());
        } else {
            visited.push(arc.to);
            enumerate(net, order, visited, stack, out);
            visited.pop();
        }
        stack.pop();
    }
}

/// Exact `max Σ u·t̂` by vertex enumeration.
fn vertex_max(deviations: &[(ServiceArcId, f64)], budget: f64) -> (f64, BTreeMap<ServiceArcId, f64>) {
    let m = deviations.len();
    let mut best = 0.0;
    let mut best_u = BTreeMap::new();
    for mask in 0u32..(1 << m) {
        let ones = mask.count_ones() as f64;
        if ones > budget {
            continue;
        }
        let base: f64 = (0..m)
            .filter(|&i| mask & (1 << i) != 0)
            .map(|i| deviations[i].1)
            .sum();
        let rest = (budget - ones).min(1.0);
        let mut options: Vec<(f64, Option<usize>)> = vec![(base, None)];
        if rest > 0.0 {
            for j in (0..m).filter(|&j| mask & (1 << j) == 0) {
                options.push((base + rest * deviations[j].1, Some(j)));
            }
        }
        for (value, frac) in options {
            if value > best {
                best = value;
                best_u = (0..m)
                    .filter(|&i| mask & (1 << i) != 0)
                    .map(|i| (deviations[i].0, 1.0))
                    .collect();
                if let Some(j) = frac {
                    best_u.insert(deviations[j].0, rest);
                }
            }
        }
    }
    (best, best_u)
}

fn evaluate(
    net: &ServiceNetwork,
    order: &ClientOrder,
    profile: &DisruptionProfile,
    costs: &CostParams,
    path: &[ServiceArcId],
) -> Option<RobustItinerary> {
    let mut transport = 0.0;
    let mut transfer = 0.0;
    let mut nominal = 0.0;
    let mut deviations = Vec::new();
    for (pos, &id) in path.iter().enumerate() {
        let arc = net.service_arc(id);
        transport += arc.unit_cost;
        nominal += arc.nominal_time;
        if pos > 0 {
            let prev = net.service_arc(path[pos - 1]);
            transfer += costs.transshipment(arc.from, prev.service, arc.service);
        }
        let deviation = profile.deviation(id, arc);
        if deviation > 0.0 {
            deviations.push((id, deviation));
        }
    }
    let (delay, u_assignment) = vertex_max(&deviations, profile.budget);
    let path_time = nominal + delay;
    let shelf_life = costs.shelf_life;
    if path_time > shelf_life + EPS {
        return None;
    }

    let q = order.quantity;
    let psi = costs.product_value * costs.degradation_rate_per_day;
    let cost_at = |w: f64| -> CostBreakdown {
        let arrival = w + path_time;
        let early = (order.due_date - arrival).max(0.0);
        let late = (arrival - order.due_date).max(0.0);
        CostBreakdown::new(
            transport * q,
            transfer * q,
            psi * q * arrival,
            costs.early_penalty_per_day * q * early,
            costs.late_penalty_per_day * q * late,
        )
    };
    let latest = (shelf_life - path_time).max(0.0);
    let mut breakpoints = vec![0.0, latest];
    let due_gap = order.due_date - path_time;
    if due_gap > 0.0 && due_gap < latest {
        breakpoints.push(due_gap);
    }
    breakpoints.sort_by(f64::total_cmp);
    let mut best_w = breakpoints[0];
    let mut best_cost = cost_at(best_w);
    for &w in &breakpoints[1..] {
        let c = cost_at(w);
        if c.total < best_cost.total - EPS {
            best_w = w;
            best_cost = c;
        }
    }

    Some(RobustItinerary {
        client: order.id,
        path: path.to_vec(),
        outbound_day: best_w,
        worst_case: WorstCaseResult {
            total_time: path_time,
            delay,
            u_assignment,
        },
        costs: best_cost,
    })
}
