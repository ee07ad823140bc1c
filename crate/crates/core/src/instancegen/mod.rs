//! Seeded generation of nested benchmark networks, clients and disruption
//! profiles.
//!
//! All randomness comes from ChaCha8 streams derived from the seed and an
//! entity key (see [`substream`]), so every draw is a pure function of the
//! configuration, the seed and the entity it belongs to. Adding clients or
//! larger networks never perturbs what was drawn for smaller ones.

mod tiny;

pub use tiny::{random_tiny_instance, TinyConfig};

use crate::model::{
    ClientId, ClientOrder, CostParams, DisruptionProfile, Instance, Mode, NodeId, Service,
    ServiceArc, ServiceArcId, ServiceId, ServiceNetwork, TransshipmentCosts,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeneratorError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("service-arc target {target} is below the {arcs} base arcs that must each carry a service")]
    TargetBelowArcs { target: usize, arcs: usize },
    #[error("client slot {slot}: no destination with a nominal-feasible path after {attempts} draws")]
    ClientRetriesExhausted { slot: usize, attempts: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        if self.min == self.max {
            self.min
        } else {
            rng.gen_range(self.min..=self.max)
        }
    }

    fn check(&self, name: &str) -> Result<(), GeneratorError> {
        if self.min.is_finite() && self.max.is_finite() && self.min <= self.max {
            Ok(())
        } else {
            Err(GeneratorError::InvalidConfig(format!(
                "range {name} [{}, {}] is empty",
                self.min, self.max
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerMode<T> {
    pub air: T,
    pub rail: T,
    pub water: T,
}

impl<T: Copy> PerMode<T> {
    pub fn get(&self, mode: Mode) -> T {
        match mode {
            Mode::Air => self.air,
            Mode::Rail => self.rail,
            Mode::Water => self.water,
        }
    }
}

/// Generator settings. Every field has a default, so a config file only
/// needs the values it overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub n_nodes: usize,
    pub n_arcs: usize,
    /// Service-arc counts of the nested networks, strictly increasing.
    pub service_arc_targets: Vec<usize>,
    pub n_clients: usize,
    /// Relative weight of each mode when a service is created.
    pub mode_mix: PerMode<f64>,
    pub max_route_arcs: usize,
    pub distance_km: Range,
    pub speed_kmh: PerMode<Range>,
    pub cost_per_km: PerMode<Range>,
    /// Unit transport cost is `cost_per_km × distance / cost_divisor`.
    pub cost_divisor: f64,
    pub quantity_min: u32,
    pub quantity_max: u32,
    pub shelf_life: f64,
    pub product_value: f64,
    /// Fractions of the product value per unit per day.
    pub degradation_rate: f64,
    pub early_penalty_rate: f64,
    pub late_penalty_rate: f64,
    pub transshipment_same_mode: Range,
    pub transshipment_cross_mode: Range,
    /// Due date as a multiple of the fastest nominal arrival.
    pub due_date_factor: Range,
    pub client_retry_cap: usize,
    /// A destination is accepted only if its fastest nominal time times
    /// this factor fits the shelf life. 2 keeps every client feasible when
    /// all arc times double.
    pub feasibility_factor: f64,
    /// Budget as a fraction of the network's service-arc count.
    pub gamma_fraction: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            n_nodes: 27,
            n_arcs: 48,
            service_arc_targets: vec![50, 100, 150],
            n_clients: 5,
            mode_mix: PerMode {
                air: 0.2,
                rail: 0.45,
                water: 0.35,
            },
            max_route_arcs: 4,
            distance_km: Range::new(300.0, 12500.0),
            speed_kmh: PerMode {
                air: Range::new(800.0, 1000.0),
                rail: Range::new(50.0, 70.0),
                water: Range::new(46.3, 50.0),
            },
            cost_per_km: PerMode {
                air: Range::new(1.0, 2.0),
                rail: Range::new(0.15, 0.30),
                water: Range::new(0.05, 0.20),
            },
            cost_divisor: 100.0,
            quantity_min: 5,
            quantity_max: 10,
            shelf_life: 30.0,
            product_value: 100.0,
            degradation_rate: 0.10,
            early_penalty_rate: 0.15,
            late_penalty_rate: 0.20,
            transshipment_same_mode: Range::new(10.0, 15.0),
            transshipment_cross_mode: Range::new(15.0, 25.0),
            due_date_factor: Range::new(0.8, 1.2),
            client_retry_cap: 1000,
            feasibility_factor: 2.0,
            gamma_fraction: 0.5,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), GeneratorError> {
        let invalid = |msg: String| Err(GeneratorError::InvalidConfig(msg));
        if self.n_nodes < 2 {
            return invalid(format!("n_nodes must be at least 2, got {}", self.n_nodes));
        }
        let max_arcs = self.n_nodes * (self.n_nodes - 1);
        if self.n_arcs + 1 < self.n_nodes || self.n_arcs > max_arcs {
            return invalid(format!(
                "n_arcs must lie in [{}, {max_arcs}], got {}",
                self.n_nodes - 1,
                self.n_arcs
            ));
        }
        if self.service_arc_targets.is_empty() {
            return invalid("service_arc_targets is empty".into());
        }
        if self.service_arc_targets.windows(2).any(|w| w[0] >= w[1]) {
            return invalid(format!(
                "service_arc_targets must be strictly increasing, got {:?}",
                self.service_arc_targets
            ));
        }
        if self.max_route_arcs == 0 {
            return invalid("max_route_arcs must be positive".into());
        }
        let weights = [self.mode_mix.air, self.mode_mix.rail, self.mode_mix.water];
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) || weights.iter().sum::<f64>() <= 0.0 {
            return invalid(format!("mode_mix must be non-negative with positive sum: {weights:?}"));
        }
        self.distance_km.check("distance_km")?;
        if self.distance_km.min <= 0.0 {
            return invalid("distances must be positive".into());
        }
        for mode in Mode::ALL {
            self.speed_kmh.get(mode).check(&format!("speed_kmh.{mode}"))?;
            if self.speed_kmh.get(mode).min <= 0.0 {
                return invalid(format!("speed_kmh.{mode} must be positive"));
            }
            self.cost_per_km.get(mode).check(&format!("cost_per_km.{mode}"))?;
        }
        if !(self.cost_divisor > 0.0) {
            return invalid("cost_divisor must be positive".into());
        }
        if self.quantity_min == 0 || self.quantity_min > self.quantity_max {
            return invalid("quantity range is empty or contains zero".into());
        }
        if !(self.shelf_life > 0.0) {
            return invalid("shelf_life must be positive".into());
        }
        self.transshipment_same_mode.check("transshipment_same_mode")?;
        self.transshipment_cross_mode.check("transshipment_cross_mode")?;
        self.due_date_factor.check("due_date_factor")?;
        if !(self.feasibility_factor >= 1.0) {
            return invalid(format!("feasibility_factor must be at least 1, got {}", self.feasibility_factor));
        }
        if self.n_clients + 1 > self.n_nodes {
            return invalid(format!(
                "{} clients need at least {} nodes",
                self.n_clients,
                self.n_clients + 1
            ));
        }
        Ok(())
    }

    pub fn cost_params(&self, net: &ServiceNetwork) -> CostParams {
        CostParams {
            product_value: self.product_value,
            degradation_rate_per_day: self.degradation_rate,
            early_penalty_per_day: self.early_penalty_rate * self.product_value,
            late_penalty_per_day: self.late_penalty_rate * self.product_value,
            shelf_life: self.shelf_life,
            transshipment_cost: transshipment_table(net, self),
            default_transshipment_cost: 0.0,
        }
    }
}

const TAG_GRAPH: u64 = 0x6772_6170_68;
const TAG_SERVICES: u64 = 0x7365_7276;
const TAG_ARC_PARAMS: u64 = 0x7061_7261_6d;
const TAG_TRANSFER: u64 = 0x7472_616e_73;
const TAG_CLIENT: u64 = 0x636c_6965_6e74;
const TAG_DISRUPTION: u64 = 0x6469_7372;

/// SplitMix64 finaliser.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn entity_hash(seed: u64, tag: u64, key: &[u64]) -> u64 {
    key.iter().fold(mix(seed ^ mix(tag)), |h, &k| mix(h ^ k))
}

/// Independent ChaCha8 stream for one entity.
pub fn substream(seed: u64, tag: u64, key: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(entity_hash(seed, tag, key))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseArc {
    pub from: NodeId,
    pub to: NodeId,
    pub distance_km: f64,
}

/// Nodes and directed arcs shared by all nested networks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseGraph {
    pub nodes: Vec<NodeId>,
    pub arcs: Vec<BaseArc>,
    pub origin: NodeId,
}

/// Random directed graph in which every node is reachable from node 0.
///
/// A random recursive tree rooted at the origin guarantees reachability;
/// the remaining arcs are drawn uniformly among absent ordered pairs.
pub fn generate_base_graph(cfg: &GeneratorConfig) -> Result<BaseGraph, GeneratorError> {
    cfg.validate()?;
    let mut rng = substream(cfg.seed, TAG_GRAPH, &[]);
    let n = cfg.n_nodes;
    let mut pairs: Vec<(usize, usize)> = Vec::with_capacity(cfg.n_arcs);
    let mut present = BTreeSet::new();
    for v in 1..n {
        let parent = rng.gen_range(0..v);
        pairs.push((parent, v));
        present.insert((parent, v));
    }
    while pairs.len() < cfg.n_arcs {
        let (i, j) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if i != j && present.insert((i, j)) {
            pairs.push((i, j));
        }
    }
    let arcs = pairs
        .into_iter()
        .map(|(i, j)| BaseArc {
            from: NodeId(i as u32),
            to: NodeId(j as u32),
            distance_km: cfg.distance_km.sample(&mut rng),
        })
        .collect();
    Ok(BaseGraph {
        nodes: (0..n as u32).map(NodeId).collect(),
        arcs,
        origin: NodeId(0),
    })
}

fn pick_mode(cfg: &GeneratorConfig, rng: &mut impl Rng) -> Mode {
    let weights = [cfg.mode_mix.air, cfg.mode_mix.rail, cfg.mode_mix.water];
    let mut x = rng.gen_range(0.0..weights.iter().sum::<f64>());
    for (mode, w) in Mode::ALL.into_iter().zip(weights) {
        if x < w {
            return mode;
        }
        x -= w;
    }
    Mode::Water
}

struct ServiceBuilder<'a> {
    cfg: &'a GeneratorConfig,
    base: &'a BaseGraph,
    services: Vec<Service>,
    service_arcs: Vec<ServiceArc>,
}

impl ServiceBuilder<'_> {
    /// Appends a service along base arcs `route` (indices into base.arcs).
    fn push(&mut self, mode: Mode, route: &[usize]) {
        let id = ServiceId(self.services.len() as u32);
        let mut nodes = vec![self.base.arcs[route[0]].from];
        for (pos, &a) in route.iter().enumerate() {
            let arc = &self.base.arcs[a];
            nodes.push(arc.to);
            let mut rng = substream(self.cfg.seed, TAG_ARC_PARAMS, &[id.0 as u64, pos as u64]);
            let speed = self.cfg.speed_kmh.get(mode).sample(&mut rng);
            let per_km = self.cfg.cost_per_km.get(mode).sample(&mut rng);
            self.service_arcs.push(ServiceArc {
                service: id,
                from: arc.from,
                to: arc.to,
                nominal_time: arc.distance_km / speed / 24.0,
                max_deviation: 0.0,
                unit_cost: per_km * arc.distance_km / self.cfg.cost_divisor,
            });
        }
        self.services.push(Service {
            id,
            mode,
            route: nodes,
        });
    }

    fn snapshot(&self) -> ServiceNetwork {
        ServiceNetwork {
            nodes: self.base.nodes.clone(),
            arcs: self.base.arcs.iter().map(|a| (a.from, a.to)).collect(),
            services: self.services.clone(),
            service_arcs: self.service_arcs.clone(),
            origin: self.base.origin,
        }
    }
}

/// Builds one network per service-arc target, each extending the previous.
///
/// The first network gives every base arc exactly one service (routes are
/// chained along uncovered arcs); later services are random forward walks.
/// The last route of each phase is truncated to hit the target exactly.
pub fn generate_services(
    base: &BaseGraph,
    cfg: &GeneratorConfig,
) -> Result<Vec<ServiceNetwork>, GeneratorError> {
    cfg.validate()?;
    let n_arcs = base.arcs.len();
    if cfg.service_arc_targets[0] < n_arcs {
        return Err(GeneratorError::TargetBelowArcs {
            target: cfg.service_arc_targets[0],
            arcs: n_arcs,
        });
    }
    let mut rng = substream(cfg.seed, TAG_SERVICES, &[]);
    let mut leaving: BTreeMap<NodeId, Vec<usize>> = BTreeMap::new();
    for (a, arc) in base.arcs.iter().enumerate() {
        leaving.entry(arc.from).or_default().push(a);
    }
    let mut builder = ServiceBuilder {
        cfg,
        base,
        services: Vec::new(),
        service_arcs: Vec::new(),
    };

    let mut covered = vec![false; n_arcs];
    for start in 0..n_arcs {
        if covered[start] {
            continue;
        }
        let mode = pick_mode(cfg, &mut rng);
        let length = rng.gen_range(1..=cfg.max_route_arcs);
        covered[start] = true;
        let route = extend_route(base, &leaving, start, length, &mut rng, |a| !covered[a]);
        for &a in &route[1..] {
            covered[a] = true;
        }
        builder.push(mode, &route);
    }

    let mut networks = Vec::with_capacity(cfg.service_arc_targets.len());
    for &target in &cfg.service_arc_targets {
        while builder.service_arcs.len() < target {
            let mode = pick_mode(cfg, &mut rng);
            let length = rng.gen_range(1..=cfg.max_route_arcs);
            let start = rng.gen_range(0..n_arcs);
            let mut route = extend_route(base, &leaving, start, length, &mut rng, |_| true);
            route.truncate(target - builder.service_arcs.len());
            builder.push(mode, &route);
        }
        networks.push(builder.snapshot());
    }
    Ok(networks)
}

/// Forward walk of up to `length` arcs from base arc `start`, never
/// revisiting a node and only using arcs accepted by `allowed`.
fn extend_route(
    base: &BaseGraph,
    leaving: &BTreeMap<NodeId, Vec<usize>>,
    start: usize,
    length: usize,
    rng: &mut impl Rng,
    allowed: impl Fn(usize) -> bool,
) -> Vec<usize> {
    let mut route = vec![start];
    let mut nodes = vec![base.arcs[start].from, base.arcs[start].to];
    while route.len() < length {
        let at = *nodes.last().expect("route has nodes");
        let options: Vec<usize> = leaving
            .get(&at)
            .into_iter()
            .flatten()
            .copied()
            .filter(|&a| allowed(a) && !nodes.contains(&base.arcs[a].to) && !route.contains(&a))
            .collect();
        if options.is_empty() {
            break;
        }
        let next = options[rng.gen_range(0..options.len())];
        route.push(next);
        nodes.push(base.arcs[next].to);
    }
    route
}

/// Transshipment costs for every pair of distinct services meeting at a
/// node. Each entry has its own stream, so nested networks agree on the
/// pairs they share.
fn transshipment_table(net: &ServiceNetwork, cfg: &GeneratorConfig) -> TransshipmentCosts {
    let modes: BTreeMap<ServiceId, Mode> = net.services.iter().map(|s| (s.id, s.mode)).collect();
    let mut incoming: BTreeMap<NodeId, BTreeSet<ServiceId>> = BTreeMap::new();
    let mut outgoing: BTreeMap<NodeId, BTreeSet<ServiceId>> = BTreeMap::new();
    for arc in &net.service_arcs {
        incoming.entry(arc.to).or_default().insert(arc.service);
        outgoing.entry(arc.from).or_default().insert(arc.service);
    }
    let mut table = TransshipmentCosts::new();
    for (node, ins) in &incoming {
        let Some(outs) = outgoing.get(node) else {
            continue;
        };
        for &from in ins {
            for &to in outs {
                if from == to {
                    continue;
                }
                let mut rng = substream(
                    cfg.seed,
                    TAG_TRANSFER,
                    &[node.0 as u64, from.0 as u64, to.0 as u64],
                );
                let range = if modes[&from] == modes[&to] {
                    cfg.transshipment_same_mode
                } else {
                    cfg.transshipment_cross_mode
                };
                table.insert(*node, from, to, range.sample(&mut rng));
            }
        }
    }
    table
}

/// Draws `n` clients with distinct destinations that `net` can reach
/// within the shelf life even after scaling the fastest nominal time by
/// `feasibility_factor`. Slot `k` only depends on slots before
/// it, so smaller client sets are prefixes of larger ones.
pub fn generate_clients(
    net: &ServiceNetwork,
    n: usize,
    cfg: &GeneratorConfig,
) -> Result<Vec<ClientOrder>, GeneratorError> {
    if n + 1 > net.nodes.len() {
        return Err(GeneratorError::InvalidConfig(format!(
            "{n} clients need at least {} nodes",
            n + 1
        )));
    }
    let fastest = net.fastest_nominal_times();
    let mut used = BTreeSet::new();
    let mut clients = Vec::with_capacity(n);
    for slot in 0..n {
        let mut rng = substream(cfg.seed, TAG_CLIENT, &[slot as u64]);
        let mut chosen = None;
        for _ in 0..cfg.client_retry_cap {
            let node = net.nodes[rng.gen_range(0..net.nodes.len())];
            let feasible = fastest.get(&node).is_some_and(|&t| t * cfg.feasibility_factor <= cfg.shelf_life);
            if node != net.origin && !used.contains(&node) && feasible {
                chosen = Some(node);
                break;
            }
        }
        let destination = chosen.ok_or(GeneratorError::ClientRetriesExhausted {
            slot,
            attempts: cfg.client_retry_cap,
        })?;
        used.insert(destination);
        let quantity = rng.gen_range(cfg.quantity_min..=cfg.quantity_max) as f64;
        let due_date = (cfg.due_date_factor.sample(&mut rng) * fastest[&destination])
            .clamp(1.0_f64.min(cfg.shelf_life), cfg.shelf_life);
        clients.push(ClientOrder {
            id: ClientId(slot as u32),
            destination,
            quantity,
            due_date,
        });
    }
    Ok(clients)
}

/// Number of uncertain arcs for a proportion `puv` of `n` service-arcs.
pub fn uncertain_count(puv: f64, n: usize) -> usize {
    let puv = puv.clamp(0.0, 1.0);
    ((puv * n as f64 - 1e-9).ceil().max(0.0) as usize).min(n)
}

/// Disruption profile with `⌈puv·|V|⌉` uncertain arcs and budget
/// `gamma_fraction·|V|`.
///
/// Arcs are ranked by a seeded key of their (service, from, to) identity;
/// taking a prefix of that ranking makes the sets nested across `puv`
/// levels. `puv` is clamped to `[0, 1]`.
pub fn apply_disruption_with_budget(
    net: &ServiceNetwork,
    puv: f64,
    rate: f64,
    seed: u64,
    gamma_fraction: f64,
) -> DisruptionProfile {
    let mut ranked: Vec<(u64, ServiceArcId)> = net
        .service_arcs
        .iter()
        .enumerate()
        .map(|(k, arc)| {
            let key = entity_hash(
                seed,
                TAG_DISRUPTION,
                &[arc.service.0 as u64, arc.from.0 as u64, arc.to.0 as u64],
            );
            (key, ServiceArcId(k))
        })
        .collect();
    ranked.sort_unstable();
    let count = uncertain_count(puv, ranked.len());
    let uncertain = ranked.into_iter().take(count).map(|(_, id)| id).collect();
    DisruptionProfile::new(
        uncertain,
        rate,
        gamma_fraction * net.service_arcs.len() as f64,
    )
}

/// [`apply_disruption_with_budget`] with the default budget `0.5·|V|`.
pub fn apply_disruption(net: &ServiceNetwork, puv: f64, rate: f64, seed: u64) -> DisruptionProfile {
    apply_disruption_with_budget(net, puv, rate, seed, 0.5)
}

/// Everything needed for one seed: nested networks and a shared client set.
#[derive(Debug, Clone)]
pub struct GeneratedSuite {
    pub base: BaseGraph,
    pub networks: Vec<ServiceNetwork>,
    pub costs: Vec<CostParams>,
    pub clients: Vec<ClientOrder>,
}

impl GeneratedSuite {
    /// Instance file for network `index` under the given disruption levels.
    pub fn instance(&self, index: usize, n_clients: usize, puv: f64, rate: f64, cfg: &GeneratorConfig) -> Instance {
        let net = &self.networks[index];
        let profile = apply_disruption_with_budget(net, puv, rate, cfg.seed, cfg.gamma_fraction);
        Instance {
            network: profile.apply(net),
            clients: self.clients[..n_clients.min(self.clients.len())].to_vec(),
            cost_params: self.costs[index].clone(),
            disruption: profile,
        }
    }
}

/// Base graph, nested networks and clients for `cfg`. Clients are drawn
/// against the smallest network so they are feasible in all of them.
pub fn generate_suite(cfg: &GeneratorConfig) -> Result<GeneratedSuite, GeneratorError> {
    let base = generate_base_graph(cfg)?;
    let networks = generate_services(&base, cfg)?;
    let costs = networks.iter().map(|n| cfg.cost_params(n)).collect();
    let clients = generate_clients(&networks[0], cfg.n_clients, cfg)?;
    Ok(GeneratedSuite {
        base,
        networks,
        costs,
        clients,
    })
}
