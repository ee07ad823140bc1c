use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use servnet::experiments::{rank_critical_arcs, render_report, run_sweep, SweepConfig, SweepResults};
use servnet::instancegen::{generate_suite, GeneratorConfig};
use servnet::milp::{build_model, emit_lp, itinerary_values, parse_solution, solution_text, verify_solution};
use servnet::{solve_instance, Instance, InstanceSolution, SolveError};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_USAGE: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_VERIFY: u8 = 4;

#[derive(Parser)]
#[command(name = "servnet", version, about = "Robust perishable-goods routing on multi-modal service networks")]
struct Cli {
    /// Directory for outputs written without an explicit path.
    #[arg(long, global = true, env = "SERVNET_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate nested instances, one file per service-arc target.
    Generate(GenerateArgs),
    /// Solve an instance exactly and print the cost breakdown.
    Solve(SolveArgs),
    /// Write the MILP of an instance in LP format.
    EmitMilp(EmitArgs),
    /// Check a solution (JSON or `name value` text) against an instance.
    Verify(VerifyArgs),
    /// Run the sensitivity sweep.
    Sweep(SweepArgs),
    /// Render tables, figure and metrics from sweep results.
    Report(ReportArgs),
    /// Rank service-arcs by the cost increase their uncertainty causes.
    Critical(CriticalArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// JSON generator config; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated service-arc counts, strictly increasing.
    #[arg(long, value_delimiter = ',')]
    targets: Option<Vec<usize>>,
    #[arg(long)]
    clients: Option<usize>,
    /// Share of uncertain service-arcs, in [0, 1].
    #[arg(long, default_value_t = 0.0, value_parser = fraction)]
    puv: f64,
    /// Deviation rate of uncertain arcs, in [0, 1].
    #[arg(long, default_value_t = 0.0, value_parser = fraction)]
    rate: f64,
}

#[derive(Args)]
struct SolveArgs {
    instance: PathBuf,
    /// Override the instance's deviation budget.
    #[arg(long, value_parser = non_negative)]
    gamma: Option<f64>,
    /// Solution JSON path [default: <out-dir>/solution.json].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write MILP variable values as `name value` text.
    #[arg(long)]
    values: Option<PathBuf>,
}

#[derive(Args)]
struct EmitArgs {
    instance: PathBuf,
    #[arg(long, value_parser = non_negative)]
    gamma: Option<f64>,
    /// LP path [default: <out-dir>/model.lp].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    instance: PathBuf,
    solution: PathBuf,
    #[arg(long, value_parser = non_negative)]
    gamma: Option<f64>,
}

#[derive(Args)]
struct SweepArgs {
    /// JSON sweep config; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of consecutive seeds starting at --seed.
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Parallel solves; 0 uses every core.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_parser = non_negative)]
    threshold: Option<f64>,
    /// Record zero solve times so the output is reproducible.
    #[arg(long)]
    no_timing: bool,
    /// Results path [default: <out-dir>/sweep.json].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Sweep results [default: <out-dir>/sweep.json].
    results: Option<PathBuf>,
    /// Override the robustness threshold stored with the results.
    #[arg(long, value_parser = non_negative)]
    threshold: Option<f64>,
}

#[derive(Args)]
struct CriticalArgs {
    instance: PathBuf,
    #[arg(long, default_value_t = 1.0, value_parser = fraction)]
    rate: f64,
    #[arg(long, value_parser = non_negative)]
    gamma: Option<f64>,
    /// Print only the first N arcs.
    #[arg(long)]
    top: Option<usize>,
}

fn fraction(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&x) {
        Ok(x)
    } else {
        Err(format!("{x} is not in [0, 1]"))
    }
}

fn non_negative(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if x >= 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(format!("{x} must be finite and non-negative"))
    }
}

/// Error carrying its exit code.
#[derive(Debug)]
struct Exit(u8, String);

impl std::fmt::Display for Exit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.1)
    }
}

impl std::error::Error for Exit {}

fn usage(message: String) -> anyhow::Error {
    Exit(EXIT_USAGE, message).into()
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

fn load_instance(path: &Path, gamma: Option<f64>) -> Result<Instance> {
    let text = read_text(path)?;
    let mut instance =
        Instance::from_json(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    if let Some(g) = gamma {
        instance.disruption.budget = g;
    }
    Ok(instance)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn solve(instance: &Instance) -> Result<InstanceSolution> {
    solve_instance(&instance.network, &instance.clients, &instance.disruption, &instance.cost_params).map_err(
        |e| match e {
            SolveError::InfeasibleClients(_) | SolveError::Infeasible { .. } => {
                Exit(EXIT_INFEASIBLE, format!("pathsolver: {e}")).into()
            }
            e => anyhow!("pathsolver: {e}"),
        },
    )
}

fn cmd_generate(args: GenerateArgs, out_dir: &Path) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => serde_json::from_str(&read_text(path)?)
            .map_err(|e| usage(format!("{}: {e}", path.display())))?,
        None => GeneratorConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(targets) = args.targets {
        cfg.service_arc_targets = targets;
    }
    if let Some(clients) = args.clients {
        cfg.n_clients = clients;
    }
    cfg.validate().map_err(|e| usage(format!("instancegen: {e}")))?;
    let suite = generate_suite(&cfg).map_err(|e| usage(format!("instancegen: {e}")))?;
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    println!(
        "base graph: {} nodes, {} arcs",
        suite.base.nodes.len(),
        suite.base.arcs.len()
    );
    for (k, net) in suite.networks.iter().enumerate() {
        let instance = suite.instance(k, cfg.n_clients, args.puv, args.rate, &cfg);
        let path = out_dir.join(format!("instance_v{}_c{}.json", net.service_arcs.len(), cfg.n_clients));
        write_file(&path, &instance.to_json())?;
        println!(
            "{}: {} nodes, {} arcs, {} services, {} service-arcs, {} uncertain, budget {}",
            path.display(),
            instance.network.nodes.len(),
            instance.network.arcs.len(),
            instance.network.services.len(),
            instance.network.service_arcs.len(),
            instance.disruption.uncertain_arcs.len(),
            instance.disruption.budget
        );
    }
    Ok(())
}

fn cmd_solve(args: SolveArgs, out_dir: &Path) -> Result<()> {
    let instance = load_instance(&args.instance, args.gamma)?;
    let solution = solve(&instance)?;
    println!("status: optimal");
    println!("budget: {}", solution.budget);
    for it in &solution.itineraries {
        let path: Vec<String> = it.path.iter().map(ToString::to_string).collect();
        println!(
            "{}: path [{}], outbound day {:.4}, worst-case arrival {:.4}, cost {:.4}",
            it.client,
            path.join(" "),
            it.outbound_day,
            it.arrival_day(),
            it.costs.total
        );
    }
    println!("{}", solution.total);
    let out = args.out.unwrap_or_else(|| out_dir.join("solution.json"));
    write_file(&out, &solution.to_json())?;
    if let Some(values_path) = args.values {
        let values = itinerary_values(&instance.network, &instance.clients, &instance.disruption, &solution)
            .map_err(|e| anyhow!("milp: {e}"))?;
        write_file(&values_path, &solution_text(&values, Some(solution.total.total)))?;
    }
    Ok(())
}

fn cmd_emit(args: EmitArgs, out_dir: &Path) -> Result<()> {
    let instance = load_instance(&args.instance, args.gamma)?;
    let model = build_model(&instance.network, &instance.clients, &instance.disruption, &instance.cost_params);
    let out = args.out.unwrap_or_else(|| out_dir.join("model.lp"));
    write_file(&out, &emit_lp(&model))?;
    println!(
        "{}: {} variables, {} constraints",
        out.display(),
        model.variables.len(),
        model.constraints.len()
    );
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Result<()> {
    let instance = load_instance(&args.instance, args.gamma)?;
    let text = read_text(&args.solution)?;
    let model = build_model(&instance.network, &instance.clients, &instance.disruption, &instance.cost_params);
    let values_text = if text.trim_start().starts_with('{') {
        let solution = InstanceSolution::from_json(&text)
            .map_err(|e| usage(format!("{}: {e}", args.solution.display())))?;
        let values = itinerary_values(&instance.network, &instance.clients, &instance.disruption, &solution)
            .map_err(|e| Exit(EXIT_VERIFY, format!("milp: {e}")))?;
        solution_text(&values, Some(solution.total.total))
    } else {
        text
    };
    let assignments = parse_solution(&model, &instance.network, &instance.clients, &values_text)
        .map_err(|e| Exit(EXIT_VERIFY, format!("milp: {e}")))?;
    for warning in &assignments.warnings {
        eprintln!("warning: {warning}");
    }
    let report = verify_solution(
        &instance.network,
        &instance.clients,
        &instance.disruption,
        &instance.cost_params,
        &assignments,
    );
    println!("{report}");
    if report.is_clean() {
        Ok(())
    } else {
        Err(Exit(EXIT_VERIFY, "verification failed".into()).into())
    }
}

fn cmd_sweep(args: SweepArgs, out_dir: &Path) -> Result<()> {
    let mut cfg: SweepConfig = match &args.config {
        Some(path) => serde_json::from_str(&read_text(path)?)
            .map_err(|e| usage(format!("{}: {e}", path.display())))?,
        None => SweepConfig::default(),
    };
    let first = args.seed.unwrap_or_else(|| cfg.seeds.first().copied().unwrap_or(cfg.generator.seed));
    if let Some(n) = args.seeds {
        if n == 0 {
            bail!(usage("--seeds must be positive".into()));
        }
        cfg.seeds = (0..n as u64).map(|k| first + k).collect();
    } else if args.seed.is_some() {
        cfg.seeds = vec![first];
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    if let Some(t) = args.threshold {
        cfg.robustness_threshold = t;
    }
    if args.no_timing {
        cfg.record_timing = false;
    }
    let results = run_sweep(&cfg).map_err(|e| match e {
        servnet::experiments::ExperimentError::InvalidConfig(_) | servnet::experiments::ExperimentError::Generation { .. } => {
            usage(format!("experiments: {e}"))
        }
        e => anyhow!("experiments: {e}"),
    })?;
    let out = args.out.unwrap_or_else(|| out_dir.join("sweep.json"));
    write_file(&out, &results.to_json())?;
    let infeasible = results
        .cells
        .iter()
        .filter(|c| c.status == servnet::experiments::CellStatus::Infeasible)
        .count();
    println!(
        "{}: {} cells over {} seed(s), {} infeasible",
        out.display(),
        results.cells.len(),
        cfg.seeds.len(),
        infeasible
    );
    Ok(())
}

fn cmd_report(args: ReportArgs, out_dir: &Path) -> Result<()> {
    let path = args.results.unwrap_or_else(|| out_dir.join("sweep.json"));
    let mut results = SweepResults::from_json(&read_text(&path)?)
        .map_err(|e| usage(format!("{}: {e}", path.display())))?;
    if let Some(t) = args.threshold {
        results.config.robustness_threshold = t;
    }
    let files = render_report(&results, out_dir).map_err(|e| anyhow!("experiments: {e}"))?;
    for file in files.all() {
        println!("{}", file.display());
    }
    Ok(())
}

fn cmd_critical(args: CriticalArgs) -> Result<()> {
    let instance = load_instance(&args.instance, args.gamma)?;
    let ranked = rank_critical_arcs(
        &instance.network,
        &instance.clients,
        &instance.cost_params,
        args.rate,
        instance.disruption.budget,
    )
    .map_err(|e| match e {
        SolveError::InfeasibleClients(_) => Exit(EXIT_INFEASIBLE, format!("pathsolver: {e}")).into(),
        e => anyhow!("pathsolver: {e}"),
    })?;
    println!("rank,arc,service,from,to,impact");
    for (k, a) in ranked.iter().take(args.top.unwrap_or(usize::MAX)).enumerate() {
        let arc = instance.network.service_arc(a.arc);
        let impact = if a.impact.is_finite() { format!("{:.4}", a.impact) } else { "inf".into() };
        println!("{},{},{},{},{},{impact}", k + 1, a.arc, arc.service, arc.from, arc.to);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out_dir = cli.out_dir;
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a, &out_dir),
        Command::Solve(a) => cmd_solve(a, &out_dir),
        Command::EmitMilp(a) => cmd_emit(a, &out_dir),
        Command::Verify(a) => cmd_verify(a),
        Command::Sweep(a) => cmd_sweep(a, &out_dir),
        Command::Report(a) => cmd_report(a, &out_dir),
        Command::Critical(a) => cmd_critical(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<Exit>().map_or(1, |x| x.0);
            ExitCode::from(code)
        }
    }
}
