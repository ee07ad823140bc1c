//! Domain model of the multi-modal service network.
//!
//! A network is a set of city nodes, directed arcs between them, and
//! services that run along routes of consecutive arcs. The pair of a service
//! and one arc it runs on is a *service-arc*, the atomic routing element.
//! Service-arcs are addressed by their position in
//! [`ServiceNetwork::service_arcs`] ([`ServiceArcId`]).

mod graph;
mod instance;
mod validate;

pub use graph::{ExpandedGraph, SearchEdge, SearchVertex};
pub use instance::{Instance, InstanceError};
pub use validate::{validate_disruption, validate_network, Issue, ValidationReport};

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

/// Absolute tolerance for comparisons of day and currency quantities.
pub const EPS: f64 = 1e-9;

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident($inner:ty), $prefix:literal) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub $inner);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }
    };
}

id_type!(
    /// City node identifier.
    NodeId(u32),
    "n"
);
id_type!(
    /// Transport service identifier.
    ServiceId(u32),
    "s"
);
id_type!(
    /// Client (order) identifier.
    ClientId(u32),
    "c"
);
id_type!(
    /// Index of a service-arc within [`ServiceNetwork::service_arcs`].
    ServiceArcId(usize),
    "v"
);

impl ServiceArcId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Air,
    Rail,
    Water,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Air, Mode::Rail, Mode::Water];
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Air => "air",
            Mode::Rail => "rail",
            Mode::Water => "water",
        })
    }
}

/// A transport service: one mode along a fixed sequence of nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Service {
    pub id: ServiceId,
    pub mode: Mode,
    pub route: Vec<NodeId>,
}

/// Service `service` running on arc `from -> to`.
///
/// Times are in days, `unit_cost` is currency per product unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceArc {
    pub service: ServiceId,
    pub from: NodeId,
    pub to: NodeId,
    pub nominal_time: f64,
    pub max_deviation: f64,
    pub unit_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceNetwork {
    pub nodes: Vec<NodeId>,
    pub arcs: Vec<(NodeId, NodeId)>,
    pub services: Vec<Service>,
    pub service_arcs: Vec<ServiceArc>,
    pub origin: NodeId,
}

impl ServiceNetwork {
    pub fn service_arc(&self, id: ServiceArcId) -> &ServiceArc {
        &self.service_arcs[id.0]
    }

    pub fn service(&self, id: ServiceId) -> Option<&Service> {
        self.services.iter().find(|s| s.id == id)
    }

    pub fn service_arc_ids(&self) -> impl Iterator<Item = ServiceArcId> + '_ {
        (0..self.service_arcs.len()).map(ServiceArcId)
    }

    /// Dense position of every node id, in `nodes` order.
    pub fn node_positions(&self) -> BTreeMap<NodeId, usize> {
        self.nodes
            .iter()
            .enumerate()
            .map(|(pos, &node)| (node, pos))
            .collect()
    }

    /// Minimum nominal travel time from the origin to every node, ignoring
    /// transfers. Unreachable nodes are absent.
    pub fn fastest_nominal_times(&self) -> BTreeMap<NodeId, f64> {
        let mut best: BTreeMap<NodeId, f64> = BTreeMap::new();
        best.insert(self.origin, 0.0);
        // Bellman-Ford style relaxation; networks are small and times positive.
        let mut changed = true;
        while changed {
            changed = false;
            for arc in &self.service_arcs {
                let Some(&start) = best.get(&arc.from) else {
                    continue;
                };
                let candidate = start + arc.nominal_time;
                let entry = best.entry(arc.to).or_insert(f64::INFINITY);
                if candidate < *entry {
                    *entry = candidate;
                    changed = true;
                }
            }
        }
        best
    }
}

/// One client's order. All clients share the network origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientOrder {
    pub id: ClientId,
    pub destination: NodeId,
    pub quantity: f64,
    pub due_date: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransshipmentEntry {
    pub node: NodeId,
    pub from_service: ServiceId,
    pub to_service: ServiceId,
    pub cost: f64,
}

/// Per-unit transshipment cost table keyed by (node, incoming, outgoing).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TransshipmentCosts(BTreeMap<(NodeId, ServiceId, ServiceId), f64>);

impl TransshipmentCosts {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, node: NodeId, from: ServiceId, to: ServiceId, cost: f64) {
        self.0.insert((node, from, to), cost);
    }

    pub fn get(&self, node: NodeId, from: ServiceId, to: ServiceId) -> Option<f64> {
        self.0.get(&(node, from, to)).copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = TransshipmentEntry> + '_ {
        self.0
            .iter()
            .map(|(&(node, from_service, to_service), &cost)| TransshipmentEntry {
                node,
                from_service,
                to_service,
                cost,
            })
    }
}

impl Serialize for TransshipmentCosts {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.entries())
    }
}

impl<'de> Deserialize<'de> for TransshipmentCosts {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let entries = Vec::<TransshipmentEntry>::deserialize(deserializer)?;
        Ok(Self(
            entries
                .into_iter()
                .map(|e| ((e.node, e.from_service, e.to_service), e.cost))
                .collect(),
        ))
    }
}

/// Product and penalty parameters shared by all clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    pub product_value: f64,
    /// Fraction of the product value lost per day.
    pub degradation_rate_per_day: f64,
    /// Currency per unit per day of early arrival.
    pub early_penalty_per_day: f64,
    /// Currency per unit per day of late arrival.
    pub late_penalty_per_day: f64,
    pub shelf_life: f64,
    pub transshipment_cost: TransshipmentCosts,
    /// Charged for transfers between distinct services absent from the table.
    #[serde(default)]
    pub default_transshipment_cost: f64,
}

impl CostParams {
    /// Degradation cost per unit per day.
    #[inline]
    pub fn degradation_cost_per_day(&self) -> f64 {
        self.degradation_rate_per_day * self.product_value
    }

    /// Per-unit cost of moving from service `from` to service `to` at `node`.
    /// Staying aboard the same service is free.
    pub fn transshipment(&self, node: NodeId, from: ServiceId, to: ServiceId) -> f64 {
        if from == to {
            return 0.0;
        }
        self.transshipment_cost
            .get(node, from, to)
            .unwrap_or(self.default_transshipment_cost)
    }
}

/// The uncertain service-arc subset, its deviation rate and the budget.
///
/// Arcs in the set may be delayed by up to `deviation_rate` times their
/// nominal time; every other arc is deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisruptionProfile {
    pub uncertain_arcs: Vec<ServiceArcId>,
    pub deviation_rate: f64,
    pub budget: f64,
}

impl DisruptionProfile {
    pub fn new(mut uncertain_arcs: Vec<ServiceArcId>, deviation_rate: f64, budget: f64) -> Self {
        uncertain_arcs.sort_unstable();
        uncertain_arcs.dedup();
        Self {
            uncertain_arcs,
            deviation_rate,
            budget,
        }
    }

    /// No uncertain arcs.
    pub fn nominal(budget: f64) -> Self {
        Self::new(Vec::new(), 0.0, budget)
    }

    pub fn with_budget(&self, budget: f64) -> Self {
        Self {
            budget,
            ..self.clone()
        }
    }

    pub fn is_uncertain(&self, arc: ServiceArcId) -> bool {
        self.uncertain_arcs.contains(&arc)
    }

    /// Maximum delay of `arc` under this profile.
    pub fn deviation(&self, id: ServiceArcId, arc: &ServiceArc) -> f64 {
        if self.is_uncertain(id) {
            self.deviation_rate * arc.nominal_time
        } else {
            0.0
        }
    }

    /// Copy of `net` with every `max_deviation` set from this profile.
    pub fn apply(&self, net: &ServiceNetwork) -> ServiceNetwork {
        let mut out = net.clone();
        for arc in &mut out.service_arcs {
            arc.max_deviation = 0.0;
        }
        for &id in &self.uncertain_arcs {
            if let Some(arc) = out.service_arcs.get_mut(id.0) {
                arc.max_deviation = self.deviation_rate * arc.nominal_time;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn two_hop() -> ServiceNetwork {
        ServiceNetwork {
            nodes: vec![NodeId(0), NodeId(1), NodeId(2)],
            arcs: vec![(NodeId(0), NodeId(1)), (NodeId(1), NodeId(2))],
            services: vec![
                Service {
                    id: ServiceId(0),
                    mode: Mode::Rail,
                    route: vec![NodeId(0), NodeId(1)],
                },
                Service {
                    id: ServiceId(1),
                    mode: Mode::Air,
                    route: vec![NodeId(1), NodeId(2)],
                },
            ],
            service_arcs: vec![
                ServiceArc {
                    service: ServiceId(0),
                    from: NodeId(0),
                    to: NodeId(1),
                    nominal_time: 4.0,
                    max_deviation: 0.0,
                    unit_cost: 10.0,
                },
                ServiceArc {
                    service: ServiceId(1),
                    from: NodeId(1),
                    to: NodeId(2),
                    nominal_time: 1.0,
                    max_deviation: 0.0,
                    unit_cost: 50.0,
                },
            ],
            origin: NodeId(0),
        }
    }

    #[test]
    fn profile_sets_deviation_on_uncertain_arcs_only() {
        let net = two_hop();
        let profile = DisruptionProfile::new(vec![ServiceArcId(0)], 0.25, 1.0);
        let applied = profile.apply(&net);
        assert_eq!(applied.service_arcs[0].max_deviation, 1.0);
        assert_eq!(applied.service_arcs[1].max_deviation, 0.0);
    }

    #[test]
    fn same_service_transfer_is_free() {
        let mut table = TransshipmentCosts::new();
        table.insert(NodeId(1), ServiceId(0), ServiceId(0), 7.0);
        table.insert(NodeId(1), ServiceId(0), ServiceId(1), 12.0);
        let costs = CostParams {
            product_value: 100.0,
            degradation_rate_per_day: 0.1,
            early_penalty_per_day: 15.0,
            late_penalty_per_day: 20.0,
            shelf_life: 30.0,
            transshipment_cost: table,
            default_transshipment_cost: 3.0,
        };
        assert_eq!(costs.transshipment(NodeId(1), ServiceId(0), ServiceId(0)), 0.0);
        assert_eq!(costs.transshipment(NodeId(1), ServiceId(0), ServiceId(1)), 12.0);
        assert_eq!(costs.transshipment(NodeId(2), ServiceId(0), ServiceId(1)), 3.0);
        assert_eq!(costs.degradation_cost_per_day(), 10.0);
    }

    #[test]
    fn fastest_times_follow_service_arcs() {
        let times = two_hop().fastest_nominal_times();
        assert_eq!(times[&NodeId(2)], 5.0);
    }
}
