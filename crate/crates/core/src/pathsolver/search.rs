use super::{
    assemble_costs, improves, optimal_outbound, CostBreakdown, InstanceSolution,
    RobustItinerary, SolveError,
};
use crate::model::{
    ClientOrder, CostParams, DisruptionProfile, ExpandedGraph, SearchVertex, ServiceArcId,
    ServiceNetwork, EPS,
};
use crate::worstcase::{worst_case_of, WorstCaseError, WorstCaseResult};
use rayon::prelude::*;

/// Robust-optimal itinerary for a single client.
pub fn solve_client(
    net: &ServiceNetwork,
    order: &ClientOrder,
    profile: &DisruptionProfile,
    costs: &CostParams,
) -> Result<RobustItinerary, SolveError> {
    Prepared::new(net, profile, costs)?.solve(order)
}

/// Solves every client independently and sums their costs. Clients are
/// solved in parallel; the result does not depend on scheduling.
pub fn solve_instance(
    net: &ServiceNetwork,
    orders: &[ClientOrder],
    profile: &DisruptionProfile,
    costs: &CostParams,
) -> Result<InstanceSolution, SolveError> {
    let prepared = Prepared::new(net, profile, costs)?;
    let results: Vec<Result<RobustItinerary, SolveError>> =
        orders.par_iter().map(|order| prepared.solve(order)).collect();

    let mut itineraries = Vec::with_capacity(orders.len());
    let mut infeasible = Vec::new();
    for result in results {
        match result {
            Ok(itinerary) => itineraries.push(itinerary),
            Err(SolveError::Infeasible { client }) => infeasible.push(client),
            Err(other) => return Err(other),
        }
    }
    if !infeasible.is_empty() {
        return Err(SolveError::InfeasibleClients(infeasible));
    }
    let total = itineraries.iter().map(|it| it.costs).sum();
    Ok(InstanceSolution {
        budget: profile.budget,
        itineraries,
        total,
    })
}

/// Network with deviations applied plus the search graph, shared by all
/// clients of one solve.
struct Prepared<'a> {
    net: ServiceNetwork,
    costs: &'a CostParams,
    budget: f64,
    graph: ExpandedGraph,
    head_pos: Vec<usize>,
    origin_pos: usize,
    n_nodes: usize,
}

impl<'a> Prepared<'a> {
    fn new(
        net: &ServiceNetwork,
        profile: &DisruptionProfile,
        costs: &'a CostParams,
    ) -> Result<Self, SolveError> {
        if !(profile.budget.is_finite() && profile.budget >= 0.0) {
            return Err(WorstCaseError::InvalidBudget(profile.budget.to_string()).into());
        }
        let net = profile.apply(net);
        let positions = net.node_positions();
        let head_pos = net.service_arcs.iter().map(|a| positions[&a.to]).collect();
        let origin_pos = positions[&net.origin];
        let graph = ExpandedGraph::build(&net, costs);
        Ok(Self {
            n_nodes: net.nodes.len(),
            net,
            costs,
            budget: profile.budget,
            graph,
            head_pos,
            origin_pos,
        })
    }

    fn solve(&self, order: &ClientOrder) -> Result<RobustItinerary, SolveError> {
        if order.destination == self.net.origin || !self.net.nodes.contains(&order.destination) {
            return Err(SolveError::UnknownDestination {
                client: order.id,
                destination: order.destination,
            });
        }
        let Some(sink) = self.graph.sink(order.destination) else {
            return Err(SolveError::Infeasible { client: order.id });
        };
        let (h_cost, h_time) = self.completion_bounds(sink);

        let mut search = Search {
            prep: self,
            order,
            h_cost,
            h_time,
            visited: vec![false; self.n_nodes],
            path: Vec::new(),
            deviations: Vec::new(),
            best: None,
        };
        search.visited[self.origin_pos] = true;
        search.expand(ExpandedGraph::SOURCE, 0.0, 0.0, 0.0);

        let best = search.best.ok_or(SolveError::Infeasible { client: order.id })?;
        Ok(RobustItinerary {
            client: order.id,
            path: best.path,
            outbound_day: best.outbound,
            worst_case: best.worst_case,
            costs: best.costs,
        })
    }

    /// Cheapest remaining per-unit cost and shortest remaining nominal time
    /// from every vertex to `sink`, ignoring the simple-path restriction.
    fn completion_bounds(&self, sink: usize) -> (Vec<f64>, Vec<f64>) {
        let step = |v: usize, edge_cost: f64| -> (f64, f64) {
            match self.graph.vertex(v) {
                SearchVertex::Arc(id) => {
                    let arc = self.net.service_arc(id);
                    (edge_cost + arc.unit_cost, arc.nominal_time)
                }
                _ => (edge_cost, 0.0),
            }
        };
        let cost = self.backward_dijkstra(sink, |v, transfer| step(v, transfer).0);
        let time = self.backward_dijkstra(sink, |v, _| step(v, 0.0).1);
        (cost, time)
    }

    /// `dist[u] = min over edges u→v of weight(v, transfer) + dist[v]`.
    fn backward_dijkstra(&self, sink: usize, weight: impl Fn(usize, f64) -> f64) -> Vec<f64> {
        let n = self.graph.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut done = vec![false; n];
        dist[sink] = 0.0;
        loop {
            let mut current = None;
            let mut best = f64::INFINITY;
            for v in 0..n {
                if !done[v] && dist[v] < best {
                    best = dist[v];
                    current = Some(v);
                }
            }
            let Some(v) = current else { break };
            done[v] = true;
            for edge in self.graph.predecessors(v) {
                let candidate = dist[v] + weight(v, edge.transfer_cost);
                if candidate < dist[edge.vertex] {
                    dist[edge.vertex] = candidate;
                }
            }
        }
        dist
    }
}

struct Incumbent {
    total: f64,
    path: Vec<ServiceArcId>,
    outbound: f64,
    worst_case: WorstCaseResult,
    costs: CostBreakdown,
}

struct Search<'s, 'a> {
    prep: &'s Prepared<'a>,
    order: &'s ClientOrder,
    h_cost: Vec<f64>,
    h_time: Vec<f64>,
    visited: Vec<bool>,
    path: Vec<ServiceArcId>,
    /// Positive deviations on the current path, sorted descending.
    deviations: Vec<f64>,
    best: Option<Incumbent>,
}

/// Budgeted sum of the largest deviations, with `extra` merged in.
fn budgeted_sum(sorted_desc: &[f64], extra: f64, budget: f64) -> f64 {
    let mut remaining = budget;
    let mut sum = 0.0;
    let mut pending = Some(extra).filter(|e| *e > 0.0);
    let mut iter = sorted_desc.iter().copied().peekable();
    while remaining > 0.0 {
        let next = match (pending, iter.peek()) {
            (Some(e), Some(&d)) if e > d => pending.take(),
            (_, Some(_)) => iter.next(),
            (Some(_), None) => pending.take(),
            (None, None) => None,
        };
        let Some(d) = next else { break };
        let u = remaining.min(1.0);
        remaining -= u;
        sum += u * d;
    }
    sum
}

impl Search<'_, '_> {
    fn lower_bound(&self, v: usize, transport: f64, transfer: f64, time: f64, delay: f64) -> f64 {
        let costs = self.prep.costs;
        let q = self.order.quantity;
        let arrival = time + self.h_time[v] + delay;
        q * (transport + transfer + self.h_cost[v])
            + costs.degradation_cost_per_day() * q * arrival
            + costs.late_penalty_per_day * q * (arrival - self.order.due_date).max(0.0)
    }

    fn incumbent_total(&self) -> f64 {
        self.best.as_ref().map_or(f64::INFINITY, |b| b.total)
    }

    fn expand(&mut self, v: usize, transport: f64, transfer: f64, time: f64) {
        let prep = self.prep;
        let shelf_life = prep.costs.shelf_life;

        let mut children = Vec::new();
        for edge in prep.graph.successors(v) {
            let SearchVertex::Arc(id) = prep.graph.vertex(edge.vertex) else {
                continue;
            };
            if self.visited[prep.head_pos[id.0]] || self.h_cost[edge.vertex].is_infinite() {
                continue;
            }
            let arc = prep.net.service_arc(id);
            let next_transport = transport + arc.unit_cost;
            let next_transfer = transfer + edge.transfer_cost;
            let next_time = time + arc.nominal_time;
            let delay = budgeted_sum(&self.deviations, arc.max_deviation, prep.budget);
            if next_time + self.h_time[edge.vertex] + delay > shelf_life + EPS {
                continue;
            }
            let bound =
                self.lower_bound(edge.vertex, next_transport, next_transfer, next_time, delay);
            children.push((bound, id, edge.vertex, next_transport, next_transfer, next_time));
        }
        children.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        for (bound, id, vertex, next_transport, next_transfer, next_time) in children {
            if bound > self.incumbent_total() + EPS {
                break;
            }
            let arc = prep.net.service_arc(id);
            self.visited[prep.head_pos[id.0]] = true;
            self.path.push(id);
            let inserted = (arc.max_deviation > 0.0).then(|| {
                let pos = self
                    .deviations
                    .partition_point(|&d| d >= arc.max_deviation);
                self.deviations.insert(pos, arc.max_deviation);
                pos
            });

            if arc.to == self.order.destination {
                self.complete(next_transport, next_transfer);
            } else {
                self.expand(vertex, next_transport, next_transfer, next_time);
            }

            if let Some(pos) = inserted {
                self.deviations.remove(pos);
            }
            self.path.pop();
            self.visited[prep.head_pos[id.0]] = false;
        }
    }

    fn complete(&mut self, transport: f64, transfer: f64) {
        let prep = self.prep;
        let worst = worst_case_of(
            self.path.iter().map(|&id| (id, prep.net.service_arc(id))),
            prep.budget,
        )
        .expect("non-empty path with validated budget");
        let Ok(outbound) = optimal_outbound(worst.total_time, self.order, prep.costs) else {
            return;
        };
        let costs = assemble_costs(
            self.order,
            prep.costs,
            transport,
            transfer,
            worst.total_time,
            outbound,
        );
        let incumbent = self.best.as_ref().map(|b| (b.total, b.path.as_slice()));
        if improves(costs.total, &self.path, incumbent) {
            self.best = Some(Incumbent {
                total: costs.total,
                path: self.path.clone(),
                outbound,
                worst_case: worst,
                costs,
            });
        }
    }
}
