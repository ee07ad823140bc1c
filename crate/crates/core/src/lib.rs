//! Robust routing of perishable shipments over multi-modal service
//! networks with budgeted travel-time uncertainty.

pub mod experiments;
pub mod instancegen;
pub mod milp;
pub mod model;
pub mod pathsolver;
pub mod worstcase;

pub use model::{
    ClientId, ClientOrder, CostParams, DisruptionProfile, Instance, Mode, NodeId, Service,
    ServiceArc, ServiceArcId, ServiceId, ServiceNetwork, TransshipmentCosts, EPS,
};
pub use pathsolver::{
    brute_force_oracle, evaluate_itinerary, optimal_outbound, solve_client, solve_instance,
    CostBreakdown, InstanceSolution, RobustItinerary, SolveError,
};
pub use worstcase::{dual_certificate, dual_path_time, worst_case_delay, WorstCaseResult};
