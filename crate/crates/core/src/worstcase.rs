//! Budgeted worst-case travel time of a fixed itinerary.
//!
//! For a path with nominal times `t̄` and maximum delays `t̂`, the adversary
//! picks `u ∈ [0,1]` per arc with `Σu ≤ Γ` to maximise `Σ u·t̂`. The primal
//! optimum is reached greedily; [`dual_path_time`] evaluates the same value
//! through the dual `min Γλ + Σ max(t̂ − λ, 0)`.

use crate::model::{ServiceArc, ServiceArcId, ServiceNetwork};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

pub use crate::model::EPS;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorstCaseError {
    #[error("empty itinerary")]
    EmptyItinerary,
    #[error("budget must be finite and non-negative, got {0}")]
    InvalidBudget(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstCaseResult {
    /// Nominal path time plus the worst-case delay, in days.
    pub total_time: f64,
    pub delay: f64,
    /// Non-zero deviation fractions, keyed by service-arc.
    pub u_assignment: BTreeMap<ServiceArcId, f64>,
}

/// Optimal dual multipliers of the inner maximisation.
#[derive(Debug, Clone, PartialEq)]
pub struct DualCertificate {
    pub lambda: f64,
    /// `θ` per path arc, in path order.
    pub theta: Vec<(ServiceArcId, f64)>,
    /// `Σ t̄ + Γλ + Σθ`.
    pub path_time: f64,
}

fn check_budget(budget: f64) -> Result<(), WorstCaseError> {
    if budget.is_finite() && budget >= 0.0 {
        Ok(())
    } else {
        Err(WorstCaseError::InvalidBudget(budget.to_string()))
    }
}

/// Worst-case delay of `path` (service-arcs of `net`) under budget `budget`.
///
/// Arcs are ranked by `max_deviation` descending, ties by ascending index.
/// The first `⌊Γ⌋` receive `u = 1` and the next one the fractional rest.
pub fn worst_case_delay(
    net: &ServiceNetwork,
    path: &[ServiceArcId],
    budget: f64,
) -> Result<WorstCaseResult, WorstCaseError> {
    worst_case_of(path.iter().map(|&id| (id, net.service_arc(id))), budget)
}

/// Same as [`worst_case_delay`] for arcs given together with their ids.
pub fn worst_case_of<'a>(
    path: impl IntoIterator<Item = (ServiceArcId, &'a ServiceArc)>,
    budget: f64,
) -> Result<WorstCaseResult, WorstCaseError> {
    check_budget(budget)?;
    let mut nominal = 0.0;
    let mut ranked: Vec<(ServiceArcId, f64)> = Vec::new();
    let mut len = 0usize;
    for (id, arc) in path {
        len += 1;
        nominal += arc.nominal_time;
        if arc.max_deviation > 0.0 {
            ranked.push((id, arc.max_deviation));
        }
    }
    if len == 0 {
        return Err(WorstCaseError::EmptyItinerary);
    }
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let mut remaining = budget;
    let mut delay = 0.0;
    let mut u_assignment = BTreeMap::new();
    for (id, deviation) in ranked {
        if remaining <= 0.0 {
            break;
        }
        let u = remaining.min(1.0);
        remaining -= u;
        delay += u * deviation;
        u_assignment.insert(id, u);
    }
    Ok(WorstCaseResult {
        total_time: nominal + delay,
        delay,
        u_assignment,
    })
}

/// Worst-case path time computed through the dual of the inner problem.
pub fn dual_path_time(
    net: &ServiceNetwork,
    path: &[ServiceArcId],
    budget: f64,
) -> Result<f64, WorstCaseError> {
    dual_certificate(net, path, budget).map(|c| c.path_time)
}

/// Minimises `Γλ + Σ max(t̂ − λ, 0)` over `λ ∈ {0} ∪ {t̂ on the path}`,
/// which contains an optimal basic solution of the dual.
pub fn dual_certificate(
    net: &ServiceNetwork,
    path: &[ServiceArcId],
    budget: f64,
) -> Result<DualCertificate, WorstCaseError> {
    check_budget(budget)?;
    if path.is_empty() {
        return Err(WorstCaseError::EmptyItinerary);
    }
    let arcs: Vec<&ServiceArc> = path.iter().map(|&id| net.service_arc(id)).collect();
    let nominal: f64 = arcs.iter().map(|a| a.nominal_time).sum();

    let dual_value = |lambda: f64| -> f64 {
        budget * lambda
            + arcs
                .iter()
                .map(|a| (a.max_deviation - lambda).max(0.0))
                .sum::<f64>()
    };
    let mut best_lambda = 0.0;
    let mut best = dual_value(0.0);
    for arc in &arcs {
        let value = dual_value(arc.max_deviation);
        if value < best {
            best = value;
            best_lambda = arc.max_deviation;
        }
    }
    let theta = path
        .iter()
        .zip(&arcs)
        .map(|(&id, a)| (id, (a.max_deviation - best_lambda).max(0.0)))
        .collect();
    Ok(DualCertificate {
        lambda: best_lambda,
        theta,
        path_time: nominal + best,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{NodeId, ServiceId};
    use proptest::prelude::*;

    fn path_net(deviations: &[f64], nominal: &[f64]) -> (ServiceNetwork, Vec<ServiceArcId>) {
        let n = deviations.len() as u32;
        let service_arcs: Vec<ServiceArc> = deviations
            .iter()
            .zip(nominal)
            .enumerate()
            .map(|(k, (&d, &t))| ServiceArc {
                service: ServiceId(0),
                from: NodeId(k as u32),
                to: NodeId(k as u32 + 1),
                nominal_time: t,
                max_deviation: d,
                unit_cost: 0.0,
            })
            .collect();
        let net = ServiceNetwork {
            nodes: (0..=n).map(NodeId).collect(),
            arcs: (0..n).map(|k| (NodeId(k), NodeId(k + 1))).collect(),
            services: Vec::new(),
            service_arcs,
            origin: NodeId(0),
        };
        let path = (0..deviations.len()).map(ServiceArcId).collect();
        (net, path)
    }

    /// Maximises Σ u·t̂ over a uniform grid of step 1/`steps` per coordinate.
    fn grid_max(deviations: &[f64], budget: f64, steps: usize) -> f64 {
        let m = deviations.len();
        let mut best = 0.0f64;
        let mut idx = vec![0usize; m];
        loop {
            let u: Vec<f64> = idx.iter().map(|&i| i as f64 / steps as f64).collect();
            if u.iter().sum::<f64>() <= budget + 1e-12 {
                let v: f64 = u.iter().zip(deviations).map(|(a, b)| a * b).sum();
                best = best.max(v);
            }
            let mut pos = 0;
            loop {
                if pos == m {
                    return best;
                }
                idx[pos] += 1;
                if idx[pos] <= steps {
                    break;
                }
                idx[pos] = 0;
                pos += 1;
            }
        }
    }

    #[test]
    fn greedy_matches_grid_oracle_on_reference_paths() {
        let (net, path) = path_net(&[5.0, 4.0, 3.0], &[1.0, 1.0, 1.0]);
        for (budget, delay, u) in [
            (2.0, 9.0, vec![(0, 1.0), (1, 1.0)]),
            (2.5, 10.5, vec![(0, 1.0), (1, 1.0), (2, 0.5)]),
        ] {
            let oracle = grid_max(&[5.0, 4.0, 3.0], budget, 100);
            assert!((oracle - delay).abs() < 1e-9);
            let r = worst_case_delay(&net, &path, budget).unwrap();
            assert!((r.delay - delay).abs() < 1e-12);
            assert_eq!(r.total_time, 3.0 + r.delay);
            let expected: BTreeMap<_, _> =
                u.into_iter().map(|(k, v)| (ServiceArcId(k), v)).collect();
            assert_eq!(r.u_assignment, expected);
        }
    }

    #[test]
    fn zero_budget_gives_nominal_time() {
        let (net, path) = path_net(&[5.0, 4.0, 3.0], &[2.0, 3.0, 4.0]);
        let r = worst_case_delay(&net, &path, 0.0).unwrap();
        assert_eq!(r.delay, 0.0);
        assert_eq!(r.total_time, 9.0);
        assert!(r.u_assignment.is_empty());
        assert_eq!(dual_path_time(&net, &path, 0.0).unwrap(), 9.0);
    }

    #[test]
    fn box_constraint_binds_when_budget_exceeds_path() {
        let (net, path) = path_net(&[5.0, 4.0, 3.0], &[1.0, 1.0, 1.0]);
        assert_eq!(worst_case_delay(&net, &path, 10.0).unwrap().delay, 12.0);
    }

    #[test]
    fn ties_prefer_lower_index() {
        let (net, path) = path_net(&[2.0, 3.0, 3.0], &[1.0, 1.0, 1.0]);
        let r = worst_case_delay(&net, &path, 1.5).unwrap();
        assert_eq!(
            r.u_assignment,
            BTreeMap::from([(ServiceArcId(1), 1.0), (ServiceArcId(2), 0.5)])
        );
    }

    #[test]
    fn dual_reference_value() {
        let (net, path) = path_net(&[5.0, 4.0, 3.0], &[1.0, 2.0, 3.0]);
        // enumerate λ candidates by hand: λ=0→10, 5→10+0+0, 4→8+1=9, 3→6+2+1=9
        let cert = dual_certificate(&net, &path, 2.0).unwrap();
        assert_eq!(cert.path_time, 6.0 + 9.0);
        assert_eq!(cert.lambda, 4.0);
    }

    #[test]
    fn empty_path_and_bad_budget_are_errors() {
        let (net, _) = path_net(&[1.0], &[1.0]);
        assert_eq!(
            worst_case_delay(&net, &[], 1.0),
            Err(WorstCaseError::EmptyItinerary)
        );
        assert_eq!(
            dual_path_time(&net, &[], 1.0),
            Err(WorstCaseError::EmptyItinerary)
        );
        assert!(matches!(
            worst_case_delay(&net, &[ServiceArcId(0)], -1.0),
            Err(WorstCaseError::InvalidBudget(_))
        ));
    }

    fn arb_path() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..8).prop_flat_map(|m| {
            (
                prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..20.0], m),
                prop::collection::vec(0.1f64..15.0, m),
            )
        })
    }

    proptest! {
        #[test]
        fn duality_holds((dev, nom) in arb_path(), budget in 0.0f64..10.0) {
            let (net, path) = path_net(&dev, &nom);
            let primal = worst_case_delay(&net, &path, budget).unwrap();
            let dual = dual_path_time(&net, &path, budget).unwrap();
            let scale = dual.abs().max(1.0);
            prop_assert!((primal.total_time - dual).abs() <= 1e-9 * scale);
        }

        #[test]
        fn delay_is_bounded_and_budgeted((dev, nom) in arb_path(), budget in 0.0f64..10.0) {
            let (net, path) = path_net(&dev, &nom);
            let r = worst_case_delay(&net, &path, budget).unwrap();
            let total_dev: f64 = dev.iter().sum();
            prop_assert!(r.delay >= 0.0 && r.delay <= total_dev + 1e-9);
            prop_assert!(r.u_assignment.values().sum::<f64>() <= budget + 1e-9);
            for (id, u) in &r.u_assignment {
                prop_assert!(*u > 0.0 && *u <= 1.0);
                prop_assert!(dev[id.0] > 0.0);
            }
            let recomputed: f64 = r.u_assignment.iter().map(|(id, u)| u * dev[id.0]).sum();
            prop_assert!((recomputed - r.delay).abs() <= 1e-9);
        }

        #[test]
        fn delay_is_monotone_and_concave_in_budget(
            (dev, nom) in arb_path(),
            a in 0.0f64..8.0,
            step in 0.0f64..2.0,
        ) {
            let (net, path) = path_net(&dev, &nom);
            let d = |g: f64| worst_case_delay(&net, &path, g).unwrap().delay;
            let (lo, mid, hi) = (d(a), d(a + step), d(a + 2.0 * step));
            prop_assert!(lo <= mid + 1e-9 && mid <= hi + 1e-9);
            prop_assert!(mid + 1e-9 >= 0.5 * (lo + hi));
        }

        #[test]
        fn delay_is_monotone_in_deviations(
            (dev, nom) in arb_path(),
            extra in prop::collection::vec(0.0f64..5.0, 8),
            budget in 0.0f64..10.0,
        ) {
            let (net, path) = path_net(&dev, &nom);
            let bigger: Vec<f64> = dev.iter().zip(&extra).map(|(d, e)| d + e).collect();
            let (net2, _) = path_net(&bigger, &nom);
            let small = worst_case_delay(&net, &path, budget).unwrap().delay;
            let large = worst_case_delay(&net2, &path, budget).unwrap().delay;
            prop_assert!(small <= large + 1e-9);
        }
    }
}
