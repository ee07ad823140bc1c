use super::*;
use crate::instancegen::{random_tiny_instance, TinyConfig};
use crate::model::{Instance, Mode, Service, ServiceId, TransshipmentCosts};
use proptest::prelude::*;

/// Network from `(from, to, service, nominal_time, unit_cost)` tuples; the
/// arcs of one service must be listed in route order.
fn network(n_nodes: u32, arcs: &[(u32, u32, u32, f64, f64)]) -> ServiceNetwork {
    let mut services: Vec<Service> = Vec::new();
    for &(from, to, s, _, _) in arcs {
        match services.iter_mut().find(|x| x.id == ServiceId(s)) {
            Some(service) => service.route.push(NodeId(to)),
            None => services.push(Service {
                id: ServiceId(s),
                mode: Mode::Rail,
                route: vec![NodeId(from), NodeId(to)],
            }),
        }
    }
    let mut pairs: Vec<(NodeId, NodeId)> = arcs.iter().map(|a| (NodeId(a.0), NodeId(a.1))).collect();
    pairs.sort();
    pairs.dedup();
    ServiceNetwork {
        nodes: (0..n_nodes).map(NodeId).collect(),
        arcs: pairs,
        services,
        service_arcs: arcs
            .iter()
            .map(|&(from, to, s, t, c)| ServiceArc {
                service: ServiceId(s),
                from: NodeId(from),
                to: NodeId(to),
                nominal_time: t,
                max_deviation: 0.0,
                unit_cost: c,
            })
            .collect(),
        origin: NodeId(0),
    }
}

/// `psi = value × rate`; penalties are per unit per day.
fn params(psi: f64, early: f64, late: f64, shelf_life: f64) -> CostParams {
    CostParams {
        product_value: 100.0,
        degradation_rate_per_day: psi / 100.0,
        early_penalty_per_day: early,
        late_penalty_per_day: late,
        shelf_life,
        transshipment_cost: TransshipmentCosts::new(),
        default_transshipment_cost: 0.0,
    }
}

fn order(destination: u32, quantity: f64, due_date: f64) -> ClientOrder {
    ClientOrder {
        id: ClientId(0),
        destination: NodeId(destination),
        quantity,
        due_date,
    }
}

const V0: ServiceArcId = ServiceArcId(0);
const V1: ServiceArcId = ServiceArcId(1);
const V2: ServiceArcId = ServiceArcId(2);

#[test]
fn direct_arc_on_time() {
    let net = network(2, &[(0, 1, 0, 10.0, 100.0)]);
    let costs = params(10.0, 15.0, 20.0, 30.0);
    let profile = DisruptionProfile::nominal(0.0);
    let c = evaluate_itinerary(&net, &order(1, 2.0, 10.0), &[V0], 0.0, &profile, &costs).unwrap();
    assert_eq!(c.transport, 200.0);
    assert_eq!(c.degradation, 200.0);
    assert_eq!(c.earliness_penalty, 0.0);
    assert_eq!(c.lateness_penalty, 0.0);
    assert_eq!(c.total, 400.0);
}

#[test]
fn direct_arc_early_arrival_is_penalised() {
    let net = network(2, &[(0, 1, 0, 10.0, 100.0)]);
    let costs = params(10.0, 15.0, 20.0, 30.0);
    let profile = DisruptionProfile::nominal(0.0);
    let c = evaluate_itinerary(&net, &order(1, 2.0, 15.0), &[V0], 0.0, &profile, &costs).unwrap();
    assert_eq!(c.earliness_penalty, 150.0);
    assert_eq!(c.total, 550.0);
}

#[test]
fn late_arrival_is_penalised() {
    let net = network(2, &[(0, 1, 0, 10.0, 100.0)]);
    let costs = params(10.0, 15.0, 20.0, 30.0);
    let profile = DisruptionProfile::nominal(0.0);
    let c = evaluate_itinerary(&net, &order(1, 2.0, 8.0), &[V0], 1.0, &profile, &costs).unwrap();
    assert_eq!(c.degradation, 220.0);
    assert_eq!(c.lateness_penalty, 120.0);
}

#[test]
fn two_arc_worst_case_time() {
    let net = network(3, &[(0, 1, 0, 10.0, 1.0), (1, 2, 0, 8.0, 1.0)]);
    // Deviations 5 and 4 are half the nominal times.
    let profile = DisruptionProfile::new(vec![V0, V1], 0.5, 1.5);
    let wc = worst_case_under(&net, &[V0, V1], &profile).unwrap();
    assert!((wc.total_time - 25.0).abs() < 1e-12);
    assert!((wc.delay - 7.0).abs() < 1e-12);
}

#[test]
fn outbound_reference_values() {
    let costs = params(10.0, 15.0, 20.0, 30.0);
    assert_eq!(optimal_outbound(20.0, &order(1, 1.0, 25.0), &costs).unwrap(), 5.0);
    assert_eq!(optimal_outbound(27.0, &order(1, 1.0, 25.0), &costs).unwrap(), 0.0);
    let costly = params(20.0, 15.0, 20.0, 30.0);
    assert_eq!(optimal_outbound(20.0, &order(1, 1.0, 25.0), &costly).unwrap(), 0.0);
    // Waiting is capped by the shelf life.
    let short = params(10.0, 15.0, 20.0, 22.0);
    assert_eq!(optimal_outbound(20.0, &order(1, 1.0, 25.0), &short).unwrap(), 2.0);
    assert!(matches!(
        optimal_outbound(31.0, &order(1, 1.0, 25.0), &costs),
        Err(SolveError::ShelfLifeExceeded { .. })
    ));
}

#[test]
fn singleton_network_uses_its_only_arc() {
    let net = network(2, &[(0, 1, 0, 3.0, 7.0)]);
    let costs = params(1.0, 2.0, 3.0, 30.0);
    let it = solve_client(&net, &order(1, 4.0, 3.0), &DisruptionProfile::nominal(0.0), &costs)
        .unwrap();
    assert_eq!(it.path, vec![V0]);
    assert_eq!(it.outbound_day, 0.0);
    assert_eq!(it.costs.total, 4.0 * 7.0 + 4.0 * 3.0);
}

#[test]
fn uncertainty_pushes_cargo_to_the_fast_mode() {
    // Slow cheap service and fast dear service between the same nodes.
    let net = network(2, &[(0, 1, 0, 10.0, 20.0), (0, 1, 1, 1.0, 200.0)]);
    let costs = params(1.0, 0.5, 1.0, 12.0);
    let client = order(1, 1.0, 10.0);
    let nominal = solve_client(&net, &client, &DisruptionProfile::new(vec![V0, V1], 0.5, 0.0), &costs)
        .unwrap();
    assert_eq!(nominal.path, vec![V0]);
    for budget in [1.0, 1.5, 2.0] {
        let profile = DisruptionProfile::new(vec![V0, V1], 0.5, budget);
        let robust = solve_client(&net, &client, &profile, &costs).unwrap();
        assert_eq!(robust.path, vec![V1], "budget {budget}");
        assert!(robust.costs.total > nominal.costs.total);
    }
}

#[test]
fn equal_cost_ties_go_to_the_smaller_path() {
    let net = network(2, &[(0, 1, 0, 2.0, 5.0), (0, 1, 1, 2.0, 5.0)]);
    let costs = params(1.0, 2.0, 3.0, 30.0);
    let it = solve_client(&net, &order(1, 1.0, 2.0), &DisruptionProfile::nominal(0.0), &costs)
        .unwrap();
    assert_eq!(it.path, vec![V0]);
}

#[test]
fn transfers_between_services_are_charged() {
    // Same-service continuation versus a cheaper-looking switch.
    let net = network(
        3,
        &[(0, 1, 0, 1.0, 5.0), (1, 2, 0, 1.0, 5.0), (1, 2, 1, 1.0, 4.0)],
    );
    let mut costs = params(1.0, 0.0, 0.0, 30.0);
    costs
        .transshipment_cost
        .insert(NodeId(1), ServiceId(0), ServiceId(1), 2.0);
    let client = order(2, 1.0, 2.0);
    let it = solve_client(&net, &client, &DisruptionProfile::nominal(0.0), &costs).unwrap();
    assert_eq!(it.path, vec![V0, V1]);
    assert_eq!(it.costs.transshipment, 0.0);
    costs
        .transshipment_cost
        .insert(NodeId(1), ServiceId(0), ServiceId(1), 0.5);
    let it = solve_client(&net, &client, &DisruptionProfile::nominal(0.0), &costs).unwrap();
    assert_eq!(it.path, vec![V0, V2]);
    assert_eq!(it.costs.transshipment, 0.5);
}

#[test]
fn shelf_life_makes_client_infeasible() {
    let net = network(2, &[(0, 1, 0, 10.0, 1.0)]);
    let costs = params(1.0, 0.0, 0.0, 12.0);
    let client = order(1, 1.0, 10.0);
    assert!(solve_client(&net, &client, &DisruptionProfile::nominal(1.0), &costs).is_ok());
    let disrupted = DisruptionProfile::new(vec![V0], 0.5, 1.0);
    assert_eq!(
        solve_client(&net, &client, &disrupted, &costs),
        Err(SolveError::Infeasible { client: ClientId(0) })
    );
    assert_eq!(
        brute_force_oracle(&net, &client, &disrupted, &costs),
        Err(SolveError::Infeasible { client: ClientId(0) })
    );
}

#[test]
fn instance_errors_list_infeasible_clients() {
    let net = network(3, &[(0, 1, 0, 10.0, 1.0), (0, 2, 1, 1.0, 1.0)]);
    let costs = params(1.0, 0.0, 0.0, 12.0);
    let clients = vec![
        ClientOrder { id: ClientId(0), ..order(1, 1.0, 10.0) },
        ClientOrder { id: ClientId(1), ..order(2, 1.0, 1.0) },
    ];
    let ok = solve_instance(&net, &clients, &DisruptionProfile::nominal(0.0), &costs).unwrap();
    let sum: f64 = ok.itineraries.iter().map(|i| i.costs.total).sum();
    assert!((ok.total.total - sum).abs() < 1e-12);
    let disrupted = DisruptionProfile::new(vec![V0], 0.5, 1.0);
    assert_eq!(
        solve_instance(&net, &clients, &disrupted, &costs),
        Err(SolveError::InfeasibleClients(vec![ClientId(0)]))
    );
}

#[test]
fn invalid_requests_are_rejected() {
    let net = network(3, &[(0, 1, 0, 1.0, 1.0), (1, 2, 0, 1.0, 1.0)]);
    let costs = params(1.0, 0.0, 0.0, 12.0);
    let nominal = DisruptionProfile::nominal(0.0);
    let client = order(2, 1.0, 2.0);
    assert!(matches!(
        solve_client(&net, &order(0, 1.0, 2.0), &nominal, &costs),
        Err(SolveError::UnknownDestination { .. })
    ));
    assert!(matches!(
        solve_client(&net, &order(9, 1.0, 2.0), &nominal, &costs),
        Err(SolveError::UnknownDestination { .. })
    ));
    assert!(matches!(
        solve_client(&net, &client, &DisruptionProfile::nominal(-1.0), &costs),
        Err(SolveError::WorstCase(_))
    ));
    assert!(matches!(
        evaluate_itinerary(&net, &client, &[V0], 0.0, &nominal, &costs),
        Err(SolveError::InvalidItinerary(_))
    ));
    assert!(matches!(
        evaluate_itinerary(&net, &client, &[V1, V0], 0.0, &nominal, &costs),
        Err(SolveError::InvalidItinerary(_))
    ));
    assert!(matches!(
        evaluate_itinerary(&net, &client, &[], 0.0, &nominal, &costs),
        Err(SolveError::WorstCase(_))
    ));
    assert!(matches!(
        evaluate_itinerary(&net, &client, &[V0, V1], -1.0, &nominal, &costs),
        Err(SolveError::NegativeOutbound(_))
    ));
    assert!(matches!(
        evaluate_itinerary(&net, &client, &[V0, V1], 10.5, &nominal, &costs),
        Err(SolveError::ShelfLifeExceeded { .. })
    ));
}

#[test]
fn oracle_refuses_large_networks() {
    let arcs: Vec<_> = (0..11).map(|i| (i, i + 1, 0, 1.0, 1.0)).collect();
    let net = network(12, &arcs);
    let err = brute_force_oracle(&net, &order(11, 1.0, 5.0), &DisruptionProfile::nominal(0.0), &params(1.0, 0.0, 0.0, 30.0));
    assert!(matches!(err, Err(SolveError::OracleTooLarge { nodes: 12, .. })));
}

fn client_total(inst: &Instance, client: usize, profile: &DisruptionProfile) -> f64 {
    match solve_client(&inst.network, &inst.clients[client], profile, &inst.cost_params) {
        Ok(it) => it.costs.total,
        Err(SolveError::Infeasible { .. }) => f64::INFINITY,
        Err(e) => panic!("{e}"),
    }
}

fn no_worse(a: f64, b: f64) -> bool {
    a <= b + 1e-9 * b.abs().max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn branch_and_bound_matches_oracle(seed in any::<u64>()) {
        let inst = random_tiny_instance(seed, &TinyConfig::default());
        let c = &inst.clients[0];
        let fast = solve_client(&inst.network, c, &inst.disruption, &inst.cost_params);
        let slow = brute_force_oracle(&inst.network, c, &inst.disruption, &inst.cost_params);
        match (fast, slow) {
            (Ok(a), Ok(b)) => {
                prop_assert!((a.costs.total - b.costs.total).abs() <= 1e-6 * b.costs.total.abs().max(1.0));
                prop_assert_eq!(a.path, b.path);
            }
            (Err(a), Err(b)) => prop_assert_eq!(a, b),
            (a, b) => prop_assert!(false, "solver {:?} vs oracle {:?}", a, b),
        }
    }

    #[test]
    fn reported_costs_match_evaluation(seed in any::<u64>()) {
        let inst = random_tiny_instance(seed, &TinyConfig::default());
        let c = &inst.clients[0];
        if let Ok(it) = solve_client(&inst.network, c, &inst.disruption, &inst.cost_params) {
            let again = evaluate_itinerary(&inst.network, c, &it.path, it.outbound_day, &inst.disruption, &inst.cost_params).unwrap();
            prop_assert!((again.total - it.costs.total).abs() <= 1e-9 * again.total.abs().max(1.0));
            prop_assert!(it.arrival_day() <= inst.cost_params.shelf_life + EPS);
        }
    }

    #[test]
    fn cost_is_monotone_in_budget(seed in any::<u64>(), a in 0.0f64..6.0, b in 0.0f64..6.0) {
        let inst = random_tiny_instance(seed, &TinyConfig::default());
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let low = client_total(&inst, 0, &inst.disruption.with_budget(lo));
        let high = client_total(&inst, 0, &inst.disruption.with_budget(hi));
        prop_assert!(no_worse(low, high), "{} > {}", low, high);
    }

    #[test]
    fn cost_is_monotone_in_deviation_rate(seed in any::<u64>(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let inst = random_tiny_instance(seed, &TinyConfig::default());
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let p = &inst.disruption;
        let low = client_total(&inst, 0, &DisruptionProfile::new(p.uncertain_arcs.clone(), lo, p.budget));
        let high = client_total(&inst, 0, &DisruptionProfile::new(p.uncertain_arcs.clone(), hi, p.budget));
        prop_assert!(no_worse(low, high), "{} > {}", low, high);
    }

    #[test]
    fn removing_a_service_never_helps(seed in any::<u64>()) {
        let inst = random_tiny_instance(seed, &TinyConfig::default());
        let last = inst.network.services.last().unwrap().id;
        let mut smaller = inst.clone();
        smaller.network.services.pop();
        smaller.network.service_arcs.retain(|a| a.service != last);
        let kept = smaller.network.service_arcs.len();
        smaller.disruption.uncertain_arcs.retain(|id| id.0 < kept);
        let full = client_total(&inst, 0, &inst.disruption);
        let reduced = client_total(&smaller, 0, &smaller.disruption);
        prop_assert!(no_worse(full, reduced), "{} > {}", full, reduced);
    }

    #[test]
    fn zero_budget_equals_nominal(seed in any::<u64>()) {
        let inst = random_tiny_instance(seed, &TinyConfig::default());
        let zero = client_total(&inst, 0, &inst.disruption.with_budget(0.0));
        let nominal = client_total(&inst, 0, &DisruptionProfile::nominal(0.0));
        prop_assert_eq!(zero, nominal);
    }

    #[test]
    fn outbound_day_beats_a_fine_grid(
        path_time in 0.5f64..30.0,
        due in 1.0f64..30.0,
        psi in 0.0f64..30.0,
        early in 0.0f64..30.0,
        late in 0.0f64..30.0,
    ) {
        let costs = params(psi, early, late, 30.0);
        let client = order(1, 1.0, due);
        let w = optimal_outbound(path_time, &client, &costs).unwrap();
        let slack = 30.0 - path_time;
        prop_assert!(w >= 0.0 && w <= slack + 1e-12);
        let cost = |w: f64| assemble_costs(&client, &costs, 0.0, 0.0, path_time, w).total;
        let best = cost(w);
        let steps = (slack / 1e-3).floor() as usize;
        for k in 0..=steps {
            prop_assert!(best <= cost(k as f64 * 1e-3) + 1e-9);
        }
    }
}
