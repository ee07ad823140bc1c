//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use servnet::experiments::{render_report, resilience_metrics, run_sweep, CellStatus, SweepConfig, SweepResults};
use servnet::instancegen::{generate_suite, random_tiny_instance, GeneratorConfig, TinyConfig};
use servnet::milp::{build_model, emit_lp, parse_lp, solve_by_enumeration, EnumerationError};
use servnet::{
    brute_force_oracle, dual_path_time, solve_client, solve_instance, worst_case_delay, DisruptionProfile, Instance,
    ServiceArcId, SolveError,
};
use std::process::ExitCode;
use std::time::{Duration, Instant};

type Outcome = Result<String, String>;

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

fn oracle_equivalence() -> Outcome {
    let cfg = TinyConfig::default();
    let (mut compared, mut feasible) = (0, 0);
    for seed in 0..600u64 {
        let inst = random_tiny_instance(seed, &cfg);
        let c = &inst.clients[0];
        let fast = solve_client(&inst.network, c, &inst.disruption, &inst.cost_params);
        let slow = brute_force_oracle(&inst.network, c, &inst.disruption, &inst.cost_params);
        match (fast, slow) {
            (Ok(a), Ok(b)) => {
                if !rel_close(a.costs.total, b.costs.total, 1e-6) {
                    return Err(format!("seed {seed}: {} vs oracle {}", a.costs.total, b.costs.total));
                }
                if a.path != b.path {
                    return Err(format!("seed {seed}: path {:?} vs oracle {:?}", a.path, b.path));
                }
                feasible += 1;
            }
            (Err(a), Err(b)) if a == b => {}
            (a, b) => return Err(format!("seed {seed}: {a:?} vs oracle {b:?}")),
        }
        compared += 1;
    }
    Ok(format!("{compared} instances ({feasible} feasible) agree"))
}

fn duality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut pairs = 0;
    let mut worst = 0.0f64;
    let mut seed = 0u64;
    while pairs < 10_000 {
        let inst = random_tiny_instance(seed, &TinyConfig::default());
        seed += 1;
        let p = &inst.disruption;
        let profile = DisruptionProfile::new(p.uncertain_arcs.clone(), rng.gen_range(0.0..1.0), p.budget);
        let net = profile.apply(&inst.network);
        let n = net.service_arcs.len();
        for _ in 0..10 {
            let len = rng.gen_range(1..=n.min(8));
            let path: Vec<ServiceArcId> = (0..len).map(|_| ServiceArcId(rng.gen_range(0..n))).collect();
            let budget = match rng.gen_range(0..4) {
                0 => 0.0,
                1 => rng.gen_range(0..=len) as f64,
                2 => len as f64,
                _ => rng.gen_range(0.0..len as f64 + 1.0),
            };
            let primal = worst_case_delay(&net, &path, budget).map_err(|e| e.to_string())?;
            let nominal: f64 = path.iter().map(|&a| net.service_arc(a).nominal_time).sum();
            let dual = dual_path_time(&net, &path, budget).map_err(|e| e.to_string())?;
            let expected = nominal + primal.delay;
            let gap = (dual - expected).abs() / expected.abs().max(1.0);
            worst = worst.max(gap);
            if gap > 1e-9 {
                return Err(format!("instance {}: dual {dual} vs primal {expected}", seed - 1));
            }
            pairs += 1;
        }
    }
    Ok(format!("{pairs} pairs, max relative gap {worst:.2e}"))
}

fn milp_agreement() -> Outcome {
    let cfg = TinyConfig {
        max_nodes: 6,
        max_service_arcs: 12,
        n_clients: 2,
        ..TinyConfig::default()
    };
    let (mut matched, mut infeasible) = (0, 0);
    let mut seed = 0u64;
    while matched < 50 {
        if seed >= 500 {
            return Err(format!("only {matched} feasible instances in 500 seeds"));
        }
        let inst = random_tiny_instance(seed, &cfg);
        seed += 1;
        let model = build_model(&inst.network, &inst.clients, &inst.disruption, &inst.cost_params);
        let parsed = parse_lp(&emit_lp(&model)).map_err(|e| format!("seed {}: {e}", seed - 1))?;
        let exact = solve_by_enumeration(&parsed, 200_000);
        let fast = solve_instance(&inst.network, &inst.clients, &inst.disruption, &inst.cost_params);
        match (exact, fast) {
            (Ok(e), Ok(f)) => {
                if !rel_close(e.objective, f.total.total, 1e-6) {
                    return Err(format!("seed {}: MILP {} vs solver {}", seed - 1, e.objective, f.total.total));
                }
                matched += 1;
            }
            (Err(EnumerationError::Infeasible), Err(_)) => infeasible += 1,
            (e, f) => return Err(format!("seed {}: {e:?} vs {f:?}", seed - 1)),
        }
    }
    Ok(format!("{matched} feasible instances match, {infeasible} infeasible in both"))
}

fn client_total(inst: &Instance, profile: &DisruptionProfile) -> Result<f64, String> {
    match solve_client(&inst.network, &inst.clients[0], profile, &inst.cost_params) {
        Ok(it) => Ok(it.costs.total),
        Err(SolveError::Infeasible { .. }) => Ok(f64::INFINITY),
        Err(e) => Err(e.to_string()),
    }
}

fn no_worse(a: f64, b: f64) -> bool {
    a <= b + 1e-9 * b.abs().max(1.0)
}

fn monotonicity() -> Outcome {
    const TRIALS: u64 = 200;
    let cfg = TinyConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut violations = [0usize; 4];
    for trial in 0..TRIALS {
        let inst = random_tiny_instance(10_000 + trial, &cfg);
        let p = &inst.disruption;

        let (a, b) = (rng.gen_range(0.0..6.0), rng.gen_range(0.0..6.0));
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        if !no_worse(client_total(&inst, &p.with_budget(lo))?, client_total(&inst, &p.with_budget(hi))?) {
            violations[0] += 1;
        }

        let (a, b) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let low = client_total(&inst, &DisruptionProfile::new(p.uncertain_arcs.clone(), lo, p.budget))?;
        let high = client_total(&inst, &DisruptionProfile::new(p.uncertain_arcs.clone(), hi, p.budget))?;
        let subset: Vec<ServiceArcId> = p.uncertain_arcs.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
        let fewer = client_total(&inst, &DisruptionProfile::new(subset, hi, p.budget))?;
        if !no_worse(low, high) || !no_worse(fewer, high) {
            violations[1] += 1;
        }

        let last = inst.network.services.last().expect("services").id;
        let mut smaller = inst.clone();
        smaller.network.services.pop();
        smaller.network.service_arcs.retain(|a| a.service != last);
        let kept = smaller.network.service_arcs.len();
        smaller.disruption.uncertain_arcs.retain(|id| id.0 < kept);
        if !no_worse(client_total(&inst, p)?, client_total(&smaller, &smaller.disruption)?) {
            violations[2] += 1;
        }

        if client_total(&inst, &p.with_budget(0.0))? != client_total(&inst, &DisruptionProfile::nominal(0.0))? {
            violations[3] += 1;
        }
    }
    let total: usize = violations.iter().sum();
    let detail = format!(
        "{TRIALS} trials each; violations budget {}, disruption {}, network {}, zero-budget {}",
        violations[0], violations[1], violations[2], violations[3]
    );
    if total == 0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn default_sweep() -> Result<SweepResults, String> {
    run_sweep(&SweepConfig {
        record_timing: false,
        ..SweepConfig::default()
    })
    .map_err(|e| e.to_string())
}

fn table_shape() -> Outcome {
    let results = default_sweep()?;
    let gen = &results.config.generator;
    if gen.gamma_fraction != 0.5 {
        return Err(format!("budget fraction {}", gen.gamma_fraction));
    }
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let files = render_report(&results, dir.path()).map_err(|e| e.to_string())?;
    if files.tables.len() != 3 {
        return Err(format!("{} tables", files.tables.len()));
    }
    let mut expected_index = 1;
    for path in &files.tables {
        let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        if header != "In.,|V|,PUV,0%,25%,50%,75%,100%,time_s" {
            return Err(format!("header {header}"));
        }
        let rows: Vec<&str> = lines.collect();
        if rows.len() != 15 {
            return Err(format!("{}: {} rows", path.display(), rows.len()));
        }
        for row in rows {
            let fields: Vec<&str> = row.split(',').collect();
            if fields.len() != 9 || fields[0] != expected_index.to_string() || fields.contains(&"inf") {
                return Err(format!("row {row}"));
            }
            expected_index += 1;
        }
    }

    let total = |size: usize, clients: usize, puv: f64, rate: f64| {
        results
            .cells
            .iter()
            .find(|c| c.service_arcs == size && c.clients == clients && c.puv == puv && c.deviation_rate == rate)
            .map(|c| c.total_cost())
            .expect("cell present")
    };
    let levels = &results.config.rate_levels;
    let puvs = &results.config.puv_levels;
    for size in [50, 100, 150] {
        for &clients in &results.config.client_levels {
            for (i, &puv) in puvs.iter().enumerate() {
                for (j, &rate) in levels.iter().enumerate() {
                    let here = total(size, clients, puv, rate);
                    if puv == 0.0 && here != total(size, clients, 0.0, levels[0]) {
                        return Err(format!("|V|={size}, {clients} clients: puv=0 row varies with the rate"));
                    }
                    if j > 0 && !no_worse(total(size, clients, puv, levels[j - 1]), here) {
                        return Err(format!("|V|={size}, {clients} clients, puv {puv}: row decreases at rate {rate}"));
                    }
                    if i > 0 && !no_worse(total(size, clients, puvs[i - 1], rate), here) {
                        return Err(format!("|V|={size}, {clients} clients, rate {rate}: column decreases at puv {puv}"));
                    }
                }
            }
        }
    }
    Ok("3 tables x 15 rows, puv=0 rows constant, rows and columns non-decreasing".into())
}

fn size_trend() -> Outcome {
    let cfg = SweepConfig {
        seeds: (1..=20).collect(),
        ..SweepConfig::default()
    };
    let start = Instant::now();
    let results = run_sweep(&cfg).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    if results.cells.len() != 20 * 225 {
        return Err(format!("{} cells", results.cells.len()));
    }
    let infeasible = results.cells.iter().filter(|c| c.status == CellStatus::Infeasible).count();
    let metrics = resilience_metrics(&results).map_err(|e| e.to_string())?;
    let small = metrics.mean_relative_change(50, 5, 1.0, 1.0).ok_or("no |V|=50 cells")?;
    let large = metrics.mean_relative_change(150, 5, 1.0, 1.0).ok_or("no |V|=150 cells")?;
    let detail = format!(
        "mean relative change |V|=50: {small:.4}, |V|=150: {large:.4}; {infeasible} infeasible cells; sweep {:.1}s",
        elapsed.as_secs_f64()
    );
    if small > large && elapsed < Duration::from_secs(30 * 60) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn performance() -> Outcome {
    let cfg = GeneratorConfig::default();
    let suite = generate_suite(&cfg).map_err(|e| e.to_string())?;
    let index = suite.networks.iter().position(|n| n.service_arcs.len() == 150).ok_or("no 150-arc network")?;
    let inst = suite.instance(index, 5, 1.0, 1.0, &cfg);
    let start = Instant::now();
    let solution = solve_instance(&inst.network, &inst.clients, &inst.disruption, &inst.cost_params)
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let detail = format!(
        "150 service-arcs, 5 clients, puv=1, rate=1: total {:.2} in {:.3}s",
        solution.total.total,
        elapsed.as_secs_f64()
    );
    if elapsed < Duration::from_secs(10) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn artifacts() -> Result<Vec<Vec<u8>>, String> {
    let cfg = GeneratorConfig::default();
    let suite = generate_suite(&cfg).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    for index in 0..suite.networks.len() {
        let inst = suite.instance(index, 5, 0.5, 0.75, &cfg);
        out.push(inst.to_json().into_bytes());
        let solution = solve_instance(&inst.network, &inst.clients, &inst.disruption, &inst.cost_params)
            .map_err(|e| e.to_string())?;
        out.push(solution.to_json().into_bytes());
        let model = build_model(&inst.network, &inst.clients, &inst.disruption, &inst.cost_params);
        out.push(emit_lp(&model).into_bytes());
    }
    let results = default_sweep()?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let files = render_report(&results, dir.path()).map_err(|e| e.to_string())?;
    for path in files.all() {
        out.push(std::fs::read(path).map_err(|e| e.to_string())?);
    }
    Ok(out)
}

fn determinism() -> Outcome {
    let (a, b) = (artifacts()?, artifacts()?);
    if a.len() != b.len() {
        return Err("artifact counts differ".into());
    }
    match a.iter().zip(&b).position(|(x, y)| x != y) {
        None => Ok(format!("{} artifacts byte-identical across two runs", a.len())),
        Some(k) => Err(format!("artifact {k} differs")),
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("oracle equivalence", oracle_equivalence),
        ("duality", duality),
        ("MILP agreement", milp_agreement),
        ("monotonicity", monotonicity),
        ("table shape", table_shape),
        ("network-size trend", size_trend),
        ("performance", performance),
        ("determinism", determinism),
    ];
    let limits = [300.0, 30.0, f64::INFINITY, f64::INFINITY, f64::INFINITY, f64::INFINITY, f64::INFINITY, f64::INFINITY];
    let mut failed = 0;
    for (k, ((name, check), limit)) in criteria.into_iter().zip(limits).enumerate() {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        let outcome = match outcome {
            Ok(detail) if secs >= limit => Err(format!("{detail}; took {secs:.1}s, limit {limit}s")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS [{}] {name}: {detail} ({secs:.2}s)", k + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{}] {name}: {detail} ({secs:.2}s)", k + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
