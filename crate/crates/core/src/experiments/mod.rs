//! Sensitivity sweeps over network size, client count, uncertain-arc share
//! and deviation rate, with resilience metrics and critical-arc ranking.

mod report;

pub use report::{render_report, render_svg, render_table, ReportError, ReportFiles};

use crate::instancegen::{generate_suite, GeneratorConfig, GeneratorError};
use crate::model::{ClientOrder, CostParams, DisruptionProfile, ServiceArcId, ServiceNetwork};
use crate::pathsolver::{solve_instance, CostBreakdown, SolveError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub generator: GeneratorConfig,
    pub seeds: Vec<u64>,
    pub client_levels: Vec<usize>,
    pub puv_levels: Vec<f64>,
    pub rate_levels: Vec<f64>,
    /// Parallel solves; 0 uses every available core.
    pub workers: usize,
    /// Relative change below which a network counts as robust at a rate.
    pub robustness_threshold: f64,
    /// When false, solve times are recorded as zero so outputs are
    /// byte-reproducible.
    pub record_timing: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        let levels = vec![0.0, 0.25, 0.5, 0.75, 1.0];
        Self {
            generator: GeneratorConfig::default(),
            seeds: vec![GeneratorConfig::default().seed],
            client_levels: vec![1, 3, 5],
            puv_levels: levels.clone(),
            rate_levels: levels,
            workers: 0,
            robustness_threshold: 1.0,
            record_timing: true,
        }
    }
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("seed {seed}: {source}")]
    Generation {
        seed: u64,
        #[source]
        source: GeneratorError,
    },
    #[error("invalid sweep config: {0}")]
    InvalidConfig(String),
    #[error("no puv=0 baseline for seed {seed}, |V|={service_arcs}, {clients} clients")]
    MissingBaseline {
        seed: u64,
        service_arcs: usize,
        clients: usize,
    },
    #[error("baseline is infeasible for seed {seed}, |V|={service_arcs}, {clients} clients")]
    InfeasibleBaseline {
        seed: u64,
        service_arcs: usize,
        clients: usize,
    },
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Optimal,
    Infeasible,
}

/// One solved grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub seed: u64,
    pub service_arcs: usize,
    pub clients: usize,
    pub puv: f64,
    pub deviation_rate: f64,
    pub status: CellStatus,
    /// Present when optimal.
    pub costs: Option<CostBreakdown>,
    pub solve_time_seconds: f64,
}

impl SweepCell {
    /// Total cost, `+∞` when infeasible.
    pub fn total_cost(&self) -> f64 {
        self.costs.map_or(f64::INFINITY, |c| c.total)
    }

    fn key(&self) -> (u64, usize, usize, u64, u64) {
        (
            self.seed,
            self.service_arcs,
            self.clients,
            self.puv.to_bits(),
            self.deviation_rate.to_bits(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResults {
    pub config: SweepConfig,
    /// Sorted by seed, network size, client count, puv, rate.
    pub cells: Vec<SweepCell>,
}

impl SweepResults {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("results are serializable");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

fn check_levels(name: &str, levels: &[f64]) -> Result<(), ExperimentError> {
    if levels.iter().any(|l| !(0.0..=1.0).contains(l)) {
        return Err(ExperimentError::InvalidConfig(format!("{name} must lie in [0, 1]: {levels:?}")));
    }
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ExperimentError::InvalidConfig(format!("{name} must be strictly increasing: {levels:?}")));
    }
    Ok(())
}

/// Solves every grid point for every seed.
///
/// Each seed gets its own generated suite; cells are solved in parallel and
/// sorted afterwards, so the output does not depend on scheduling.
/// Infeasible cells are recorded, never fatal.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepResults, ExperimentError> {
    check_levels("puv_levels", &cfg.puv_levels)?;
    check_levels("rate_levels", &cfg.rate_levels)?;
    let max_clients = cfg.client_levels.iter().copied().max().unwrap_or(0);
    if cfg.client_levels.contains(&0) {
        return Err(ExperimentError::InvalidConfig("client levels must be positive".into()));
    }

    let mut jobs = Vec::new();
    let mut suites = Vec::new();
    for &seed in &cfg.seeds {
        let gen = GeneratorConfig {
            seed,
            n_clients: max_clients,
            ..cfg.generator.clone()
        };
        let suite = generate_suite(&gen).map_err(|source| ExperimentError::Generation { seed, source })?;
        suites.push((gen, suite));
    }
    for (s, (gen, suite)) in suites.iter().enumerate() {
        for net in 0..suite.networks.len() {
            for &clients in &cfg.client_levels {
                for &puv in &cfg.puv_levels {
                    for &rate in &cfg.rate_levels {
                        jobs.push((s, gen.seed, net, clients, puv, rate));
                    }
                }
            }
        }
    }

    let solve = |&(s, seed, net, clients, puv, rate): &(usize, u64, usize, usize, f64, f64)| {
        let (gen, suite) = &suites[s];
        let inst = suite.instance(net, clients, puv, rate, gen);
        let start = Instant::now();
        let result = solve_instance(&inst.network, &inst.clients, &inst.disruption, &inst.cost_params);
        let elapsed = if cfg.record_timing { start.elapsed().as_secs_f64() } else { 0.0 };
        let (status, costs) = match result {
            Ok(sol) => (CellStatus::Optimal, Some(sol.total)),
            Err(SolveError::InfeasibleClients(_) | SolveError::Infeasible { .. }) => (CellStatus::Infeasible, None),
            Err(e) => return Err(e),
        };
        Ok(SweepCell {
            seed,
            service_arcs: inst.network.service_arcs.len(),
            clients,
            puv,
            deviation_rate: rate,
            status,
            costs,
            solve_time_seconds: elapsed,
        })
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| ExperimentError::ThreadPool(e.to_string()))?;
    let cells: Result<Vec<SweepCell>, SolveError> = pool.install(|| jobs.par_iter().map(solve).collect());
    let mut cells = cells?;
    cells.sort_by_key(SweepCell::key);
    Ok(SweepResults {
        config: cfg.clone(),
        cells,
    })
}

/// Change of one cell against its puv=0 baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub seed: u64,
    pub service_arcs: usize,
    pub clients: usize,
    pub puv: f64,
    pub deviation_rate: f64,
    pub baseline: f64,
    /// `+∞` when the cell is infeasible.
    pub total: f64,
    pub absolute_change: f64,
    pub relative_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessRow {
    pub seed: u64,
    pub service_arcs: usize,
    pub clients: usize,
    /// Largest rate at full puv such that it and every smaller rate stay
    /// below the threshold; `None` if even the smallest rate does not.
    pub robustness_degree: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ResilienceMetrics {
    pub rows: Vec<MetricRow>,
    pub robustness: Vec<RobustnessRow>,
}

impl ResilienceMetrics {
    /// Mean relative change over seeds at one grid point; `None` if absent.
    pub fn mean_relative_change(&self, service_arcs: usize, clients: usize, puv: f64, rate: f64) -> Option<f64> {
        let values: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.service_arcs == service_arcs && r.clients == clients && r.puv == puv && r.deviation_rate == rate)
            .map(|r| r.relative_change)
            .collect();
        (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Relative and absolute cost change of every cell against the puv=0 cell
/// of the same seed, network and client count, plus robustness degrees.
pub fn resilience_metrics(results: &SweepResults) -> Result<ResilienceMetrics, ExperimentError> {
    let mut baselines: BTreeMap<(u64, usize, usize), f64> = BTreeMap::new();
    let mut strata: Vec<(u64, usize, usize)> = Vec::new();
    for cell in &results.cells {
        let stratum = (cell.seed, cell.service_arcs, cell.clients);
        if strata.last() != Some(&stratum) && !strata.contains(&stratum) {
            strata.push(stratum);
        }
        if cell.puv == 0.0 && !baselines.contains_key(&stratum) {
            if cell.status == CellStatus::Infeasible {
                return Err(ExperimentError::InfeasibleBaseline {
                    seed: cell.seed,
                    service_arcs: cell.service_arcs,
                    clients: cell.clients,
                });
            }
            baselines.insert(stratum, cell.total_cost());
        }
    }

    let mut metrics = ResilienceMetrics::default();
    for cell in &results.cells {
        let stratum = (cell.seed, cell.service_arcs, cell.clients);
        let baseline = *baselines.get(&stratum).ok_or(ExperimentError::MissingBaseline {
            seed: cell.seed,
            service_arcs: cell.service_arcs,
            clients: cell.clients,
        })?;
        let total = cell.total_cost();
        metrics.rows.push(MetricRow {
            seed: cell.seed,
            service_arcs: cell.service_arcs,
            clients: cell.clients,
            puv: cell.puv,
            deviation_rate: cell.deviation_rate,
            baseline,
            total,
            absolute_change: total - baseline,
            relative_change: relative_change(baseline, total),
        });
    }

    let full = results.config.puv_levels.iter().copied().fold(f64::NAN, f64::max);
    for (seed, service_arcs, clients) in strata {
        let mut at_full: Vec<&MetricRow> = metrics
            .rows
            .iter()
            .filter(|r| (r.seed, r.service_arcs, r.clients) == (seed, service_arcs, clients) && r.puv == full)
            .collect();
        at_full.sort_by(|a, b| a.deviation_rate.total_cmp(&b.deviation_rate));
        let robustness_degree = at_full
            .iter()
            .take_while(|r| r.relative_change < results.config.robustness_threshold)
            .last()
            .map(|r| r.deviation_rate);
        metrics.robustness.push(RobustnessRow {
            seed,
            service_arcs,
            clients,
            robustness_degree,
        });
    }
    Ok(metrics)
}

/// `(total − baseline) / baseline`.
pub fn relative_change(baseline: f64, total: f64) -> f64 {
    (total - baseline) / baseline
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArcImpact {
    pub arc: ServiceArcId,
    /// Optimal total with only this arc uncertain minus the nominal total;
    /// `+∞` when that makes some client infeasible.
    pub impact: f64,
}

/// Leave-one-in ranking: every service-arc is made the only uncertain arc
/// at `rate` with budget `gamma`, and ranked by the resulting cost
/// increase (descending, ties by index). Rounding noise below zero is
/// clamped.
pub fn rank_critical_arcs(
    net: &ServiceNetwork,
    orders: &[ClientOrder],
    costs: &CostParams,
    rate: f64,
    gamma: f64,
) -> Result<Vec<ArcImpact>, SolveError> {
    let nominal = solve_instance(net, orders, &DisruptionProfile::nominal(gamma), costs)?.total.total;
    let impacts: Result<Vec<ArcImpact>, SolveError> = net
        .service_arc_ids()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&arc| {
            let profile = DisruptionProfile::new(vec![arc], rate, gamma);
            let impact = match solve_instance(net, orders, &profile, costs) {
                Ok(sol) => (sol.total.total - nominal).max(0.0),
                Err(SolveError::InfeasibleClients(_)) => f64::INFINITY,
                Err(e) => return Err(e),
            };
            Ok(ArcImpact { arc, impact })
        })
        .collect();
    let mut impacts = impacts?;
    impacts.sort_by(|a, b| b.impact.total_cmp(&a.impact).then(a.arc.cmp(&b.arc)));
    Ok(impacts)
}
