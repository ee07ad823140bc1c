use crate::model::{
    ClientId, ClientOrder, CostParams, DisruptionProfile, Instance, Mode, NodeId, Service,
    ServiceArc, ServiceArcId, ServiceId, ServiceNetwork, TransshipmentCosts,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

/// Bounds for [`random_tiny_instance`].
#[derive(Debug, Clone, PartialEq)]
pub struct TinyConfig {
    pub max_nodes: usize,
    pub max_service_arcs: usize,
    pub n_clients: usize,
    /// Budgets to pick from; `None` stands for `|V|`.
    pub budgets: Vec<Option<f64>>,
}

impl Default for TinyConfig {
    fn default() -> Self {
        Self {
            max_nodes: 8,
            max_service_arcs: 20,
            n_clients: 1,
            budgets: vec![Some(0.0), Some(1.0), Some(2.5), None],
        }
    }
}

/// Small random instance for cross-checking solvers.
///
/// Services are random simple routes over 3 to `max_nodes` nodes; one of
/// them always starts at the origin. Times, costs, due dates and the shelf
/// life are drawn wide enough that shelf-life infeasibility, waiting and
/// lateness all occur across seeds.
pub fn random_tiny_instance(seed: u64, cfg: &TinyConfig) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(3..=cfg.max_nodes.max(3));
    let nodes: Vec<NodeId> = (0..n as u32).map(NodeId).collect();
    let origin = NodeId(0);

    let mut services = Vec::new();
    let mut service_arcs = Vec::new();
    let mut arcs = BTreeSet::new();
    while service_arcs.len() < cfg.max_service_arcs {
        let room = cfg.max_service_arcs - service_arcs.len();
        let length = rng.gen_range(1..=room.min(3).min(n - 1));
        let mut order = nodes.clone();
        order.shuffle(&mut rng);
        if services.is_empty() {
            let pos = order.iter().position(|&v| v == origin).expect("origin present");
            order.swap(0, pos);
        }
        let route: Vec<NodeId> = order[..=length].to_vec();
        let id = ServiceId(services.len() as u32);
        let mode = Mode::ALL[rng.gen_range(0..3)];
        for w in route.windows(2) {
            arcs.insert((w[0], w[1]));
            service_arcs.push(ServiceArc {
                service: id,
                from: w[0],
                to: w[1],
                nominal_time: rng.gen_range(0.5..8.0),
                max_deviation: 0.0,
                unit_cost: rng.gen_range(0.0..50.0),
            });
        }
        services.push(Service { id, mode, route });
        if rng.gen_bool(0.15) {
            break;
        }
    }

    let mut transshipment_cost = TransshipmentCosts::new();
    for a in &service_arcs {
        for b in &service_arcs {
            if a.to == b.from && a.service != b.service && rng.gen_bool(0.8) {
                transshipment_cost.insert(a.to, a.service, b.service, rng.gen_range(0.0..20.0));
            }
        }
    }

    let shelf_life = rng.gen_range(8.0..30.0);
    let product_value = rng.gen_range(10.0..100.0);
    let cost_params = CostParams {
        product_value,
        degradation_rate_per_day: rng.gen_range(0.01..0.3),
        early_penalty_per_day: rng.gen_range(0.0..0.3) * product_value,
        late_penalty_per_day: rng.gen_range(0.0..0.4) * product_value,
        shelf_life,
        transshipment_cost,
        default_transshipment_cost: 0.0,
    };

    let mut destinations: Vec<NodeId> = nodes[1..].to_vec();
    destinations.shuffle(&mut rng);
    let clients = destinations
        .into_iter()
        .take(cfg.n_clients)
        .enumerate()
        .map(|(c, destination)| ClientOrder {
            id: ClientId(c as u32),
            destination,
            quantity: rng.gen_range(1..=10) as f64,
            due_date: rng.gen_range(1.0..shelf_life),
        })
        .collect();

    let uncertain: Vec<ServiceArcId> = (0..service_arcs.len())
        .filter(|_| rng.gen_bool(0.6))
        .map(ServiceArcId)
        .collect();
    let budget = cfg
        .budgets
        .get(rng.gen_range(0..cfg.budgets.len().max(1)))
        .copied()
        .flatten()
        .unwrap_or(service_arcs.len() as f64);
    let profile = DisruptionProfile::new(uncertain, rng.gen_range(0.0..1.0), budget);

    let network = ServiceNetwork {
        nodes,
        arcs: arcs.into_iter().collect(),
        services,
        service_arcs,
        origin,
    };
    Instance {
        network: profile.apply(&network),
        clients,
        cost_params,
        disruption: profile,
    }
}
