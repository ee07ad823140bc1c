use super::{
    ClientId, ClientOrder, CostParams, DisruptionProfile, NodeId, ServiceArcId, ServiceId,
    ServiceNetwork, EPS,
};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

/// A single well-formedness violation.
#[derive(Debug, Clone, PartialEq)]
pub enum Issue {
    DuplicateNode(NodeId),
    OriginNotInNodes(NodeId),
    ArcEndpointUnknown { from: NodeId, to: NodeId },
    DuplicateService(ServiceId),
    ShortRoute(ServiceId),
    RepeatedRouteNode { service: ServiceId, node: NodeId },
    RouteMismatch(ServiceId),
    ServiceArcUnknownNode { arc: ServiceArcId, node: NodeId },
    ServiceArcNotInArcs(ServiceArcId),
    ServiceArcUnknownService(ServiceArcId),
    DuplicateServiceArc(ServiceArcId),
    InvalidArcParameter { arc: ServiceArcId, field: &'static str, value: f64 },
    InvalidCostParameter { field: &'static str, value: f64 },
    DuplicateClient(ClientId),
    InvalidClient { client: ClientId, reason: String },
    UnreachableDestination { client: ClientId, destination: NodeId },
    ShelfLifeUnreachable { client: ClientId, fastest: f64, shelf_life: f64 },
    UncertainArcOutOfRange(ServiceArcId),
    InvalidDisruption { field: &'static str, value: f64 },
    DeviationMismatch { arc: ServiceArcId, stored: f64, expected: f64 },
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Issue::DuplicateNode(n) => write!(f, "duplicate node {n}"),
            Issue::OriginNotInNodes(n) => write!(f, "origin {n} is not a node"),
            Issue::ArcEndpointUnknown { from, to } => {
                write!(f, "arc ({from},{to}) references an unknown node")
            }
            Issue::DuplicateService(s) => write!(f, "duplicate service {s}"),
            Issue::ShortRoute(s) => write!(f, "service {s} has a route shorter than 2 nodes"),
            Issue::RepeatedRouteNode { service, node } => {
                write!(f, "service {service} visits {node} twice")
            }
            Issue::RouteMismatch(s) => {
                write!(f, "service {s}: route does not match its service-arcs")
            }
            Issue::ServiceArcUnknownNode { arc, node } => {
                write!(f, "service-arc {arc} references unknown node {node}")
            }
            Issue::ServiceArcNotInArcs(a) => write!(f, "service-arc {a} runs on an undeclared arc"),
            Issue::ServiceArcUnknownService(a) => {
                write!(f, "service-arc {a} references an unknown service")
            }
            Issue::DuplicateServiceArc(a) => write!(f, "service-arc {a} is listed twice"),
            Issue::InvalidArcParameter { arc, field, value } => {
                write!(f, "service-arc {arc}: invalid {field} {value}")
            }
            Issue::InvalidCostParameter { field, value } => {
                write!(f, "cost parameter {field} is invalid: {value}")
            }
            Issue::DuplicateClient(c) => write!(f, "duplicate client {c}"),
            Issue::InvalidClient { client, reason } => write!(f, "client {client}: {reason}"),
            Issue::UnreachableDestination {
                client,
                destination,
            } => write!(f, "client {client}: unreachable destination {destination}"),
            Issue::ShelfLifeUnreachable {
                client,
                fastest,
                shelf_life,
            } => write!(
                f,
                "client {client}: fastest nominal arrival {fastest:.3} exceeds shelf life {shelf_life}"
            ),
            Issue::UncertainArcOutOfRange(a) => write!(f, "uncertain arc {a} does not exist"),
            Issue::InvalidDisruption { field, value } => {
                write!(f, "disruption {field} is invalid: {value}")
            }
            Issue::DeviationMismatch {
                arc,
                stored,
                expected,
            } => write!(
                f,
                "service-arc {arc}: max_deviation {stored} disagrees with disruption ({expected})"
            ),
        }
    }
}

/// Findings of a validation pass. Empty means well-formed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn extend(&mut self, other: ValidationReport) {
        self.issues.extend(other.issues);
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for issue in &self.issues {
            writeln!(f, "{issue}")?;
        }
        Ok(())
    }
}

fn bad_nonneg(value: f64) -> bool {
    !value.is_finite() || value < 0.0
}

pub fn validate_network(
    net: &ServiceNetwork,
    orders: &[ClientOrder],
    costs: &CostParams,
) -> ValidationReport {
    let mut issues = Vec::new();

    let mut nodes = BTreeSet::new();
    for &node in &net.nodes {
        if !nodes.insert(node) {
            issues.push(Issue::DuplicateNode(node));
        }
    }
    if !nodes.contains(&net.origin) {
        issues.push(Issue::OriginNotInNodes(net.origin));
    }
    let arcs: BTreeSet<(NodeId, NodeId)> = net.arcs.iter().copied().collect();
    for &(from, to) in &net.arcs {
        if !nodes.contains(&from) || !nodes.contains(&to) {
            issues.push(Issue::ArcEndpointUnknown { from, to });
        }
    }

    let mut services = BTreeSet::new();
    for service in &net.services {
        if !services.insert(service.id) {
            issues.push(Issue::DuplicateService(service.id));
        }
        if service.route.len() < 2 {
            issues.push(Issue::ShortRoute(service.id));
        }
        let mut seen = BTreeSet::new();
        for &node in &service.route {
            if !seen.insert(node) {
                issues.push(Issue::RepeatedRouteNode {
                    service: service.id,
                    node,
                });
            }
        }
    }

    let mut declared: BTreeMap<ServiceId, BTreeSet<(NodeId, NodeId)>> = BTreeMap::new();
    let mut triples = BTreeSet::new();
    for (k, arc) in net.service_arcs.iter().enumerate() {
        let id = ServiceArcId(k);
        for node in [arc.from, arc.to] {
            if !nodes.contains(&node) {
                issues.push(Issue::ServiceArcUnknownNode { arc: id, node });
            }
        }
        if !arcs.contains(&(arc.from, arc.to)) {
            issues.push(Issue::ServiceArcNotInArcs(id));
        }
        if !services.contains(&arc.service) {
            issues.push(Issue::ServiceArcUnknownService(id));
        }
        if !triples.insert((arc.service, arc.from, arc.to)) {
            issues.push(Issue::DuplicateServiceArc(id));
        }
        if !arc.nominal_time.is_finite() || arc.nominal_time <= 0.0 {
            issues.push(Issue::InvalidArcParameter {
                arc: id,
                field: "nominal_time",
                value: arc.nominal_time,
            });
        }
        if bad_nonneg(arc.max_deviation) {
            issues.push(Issue::InvalidArcParameter {
                arc: id,
                field: "max_deviation",
                value: arc.max_deviation,
            });
        }
        if bad_nonneg(arc.unit_cost) {
            issues.push(Issue::InvalidArcParameter {
                arc: id,
                field: "unit_cost",
                value: arc.unit_cost,
            });
        }
        declared
            .entry(arc.service)
            .or_default()
            .insert((arc.from, arc.to));
    }
    for service in &net.services {
        let route: BTreeSet<(NodeId, NodeId)> =
            service.route.windows(2).map(|w| (w[0], w[1])).collect();
        let listed = declared.remove(&service.id).unwrap_or_default();
        if route != listed {
            issues.push(Issue::RouteMismatch(service.id));
        }
    }

    for (field, value) in [
        ("product_value", costs.product_value),
        ("degradation_rate_per_day", costs.degradation_rate_per_day),
        ("early_penalty_per_day", costs.early_penalty_per_day),
        ("late_penalty_per_day", costs.late_penalty_per_day),
        ("default_transshipment_cost", costs.default_transshipment_cost),
    ] {
        if bad_nonneg(value) {
            issues.push(Issue::InvalidCostParameter { field, value });
        }
    }
    if !costs.shelf_life.is_finite() || costs.shelf_life <= 0.0 {
        issues.push(Issue::InvalidCostParameter {
            field: "shelf_life",
            value: costs.shelf_life,
        });
    }
    for entry in costs.transshipment_cost.entries() {
        if bad_nonneg(entry.cost) {
            issues.push(Issue::InvalidCostParameter {
                field: "transshipment_cost",
                value: entry.cost,
            });
        }
    }

    let reachable = reachable_nodes(net);
    let fastest = net.fastest_nominal_times();
    let mut clients = BTreeSet::new();
    for order in orders {
        let client = order.id;
        if !clients.insert(client) {
            issues.push(Issue::DuplicateClient(client));
        }
        let mut invalid = |reason: String| {
            issues.push(Issue::InvalidClient { client, reason });
        };
        if !nodes.contains(&order.destination) {
            invalid(format!("unknown destination {}", order.destination));
            continue;
        }
        if order.destination == net.origin {
            invalid("destination equals origin".into());
        }
        if !order.quantity.is_finite() || order.quantity <= 0.0 {
            invalid(format!("quantity {} must be positive", order.quantity));
        }
        if !order.due_date.is_finite()
            || order.due_date <= 0.0
            || order.due_date > costs.shelf_life + EPS
        {
            invalid(format!(
                "due date {} outside (0, {}]",
                order.due_date, costs.shelf_life
            ));
        }
        if order.destination == net.origin {
            continue;
        }
        if !reachable.contains(&order.destination) {
            issues.push(Issue::UnreachableDestination {
                client,
                destination: order.destination,
            });
        } else if let Some(&t) = fastest.get(&order.destination) {
            if t > costs.shelf_life + EPS {
                issues.push(Issue::ShelfLifeUnreachable {
                    client,
                    fastest: t,
                    shelf_life: costs.shelf_life,
                });
            }
        }
    }

    ValidationReport { issues }
}

/// Breadth-first reachability from the origin over service-arcs.
fn reachable_nodes(net: &ServiceNetwork) -> BTreeSet<NodeId> {
    let mut out: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    for arc in &net.service_arcs {
        out.entry(arc.from).or_default().push(arc.to);
    }
    let mut seen = BTreeSet::from([net.origin]);
    let mut queue = VecDeque::from([net.origin]);
    while let Some(node) = queue.pop_front() {
        for &next in out.get(&node).into_iter().flatten() {
            if seen.insert(next) {
                queue.push_back(next);
            }
        }
    }
    seen
}

/// Checks the profile against the network, including that stored
/// `max_deviation` values agree with it.
pub fn validate_disruption(net: &ServiceNetwork, profile: &DisruptionProfile) -> ValidationReport {
    let mut issues = Vec::new();
    if bad_nonneg(profile.deviation_rate) {
        issues.push(Issue::InvalidDisruption {
            field: "deviation_rate",
            value: profile.deviation_rate,
        });
    }
    if bad_nonneg(profile.budget) {
        issues.push(Issue::InvalidDisruption {
            field: "budget",
            value: profile.budget,
        });
    }
    for &id in &profile.uncertain_arcs {
        if id.0 >= net.service_arcs.len() {
            issues.push(Issue::UncertainArcOutOfRange(id));
        }
    }
    for (k, arc) in net.service_arcs.iter().enumerate() {
        let id = ServiceArcId(k);
        let expected = profile.deviation(id, arc);
        if (arc.max_deviation - expected).abs() > EPS * (1.0 + expected.abs()) {
            issues.push(Issue::DeviationMismatch {
                arc: id,
                stored: arc.max_deviation,
                expected,
            });
        }
    }
    ValidationReport { issues }
}
