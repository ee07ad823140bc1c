use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn servnet(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_servnet"))
        .args(args)
        .env("SERVNET_OUT_DIR", dir)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn generate(dir: &Path, extra: &[&str]) {
    let mut args = vec!["generate", "--seed", "42", "--targets", "50,100,150", "--clients", "5"];
    args.extend_from_slice(extra);
    let out = servnet(dir, &args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

fn objective(solution: &Path) -> f64 {
    let value: serde_json::Value = serde_json::from_str(&fs::read_to_string(solution).unwrap()).unwrap();
    value["total"]["total"].as_f64().unwrap()
}

#[test]
fn generate_writes_three_nested_instances() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), &[]);
    for v in [50, 100, 150] {
        let text = fs::read_to_string(dir.path().join(format!("instance_v{v}_c5.json"))).unwrap();
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(value["service_arcs"].as_array().unwrap().len(), v);
        assert_eq!(value["clients"].as_array().unwrap().len(), 5);
    }
}

#[test]
fn generate_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    generate(a.path(), &["--puv", "0.5", "--rate", "0.75"]);
    generate(b.path(), &["--puv", "0.5", "--rate", "0.75"]);
    for v in [50, 100, 150] {
        let name = format!("instance_v{v}_c5.json");
        assert_eq!(fs::read(a.path().join(&name)).unwrap(), fs::read(b.path().join(&name)).unwrap());
    }
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&servnet(dir.path(), &["generate", "--targets", "50,40"])), 2);
    assert_eq!(code(&servnet(dir.path(), &["generate", "--targets", "10"])), 2);
    assert_eq!(code(&servnet(dir.path(), &["solve", "missing.json"])), 2);
    assert_eq!(code(&servnet(dir.path(), &["solve", "x.json", "--bogus"])), 2);
    assert_eq!(code(&servnet(dir.path(), &["generate", "--puv", "1.5"])), 2);
    assert_eq!(code(&servnet(dir.path(), &["report", "missing.json"])), 2);
    for sub in ["generate", "solve", "emit-milp", "verify", "sweep", "report", "critical"] {
        let out = servnet(dir.path(), &[sub, "--help"]);
        assert_eq!(code(&out), 0);
        assert!(String::from_utf8_lossy(&out.stdout).contains("--out-dir"));
    }
}

#[test]
fn solve_is_optimal_and_budget_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = servnet(d, &["generate", "--clients", "1", "--puv", "1", "--rate", "1"]);
    assert_eq!(code(&out), 0);
    let inst = d.join("instance_v50_c1.json");
    let inst = inst.to_str().unwrap();

    let out = servnet(d, &["solve", inst, "--out", d.join("budgeted.json").to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("status: optimal"));
    let out = servnet(d, &["solve", inst, "--gamma", "0", "--out", d.join("nominal.json").to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(objective(&d.join("nominal.json")) <= objective(&d.join("budgeted.json")));
}

#[test]
fn infeasible_instance_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    generate(d, &[]);
    let path = d.join("instance_v50_c5.json");
    let mut value: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    value["cost_params"]["shelf_life"] = serde_json::json!(0.01);
    fs::write(&path, value.to_string()).unwrap();
    let out = servnet(d, &["solve", path.to_str().unwrap()]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("c0"));
}

#[test]
fn emit_then_verify() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    generate(d, &["--puv", "0.5", "--rate", "0.5"]);
    let inst = d.join("instance_v50_c5.json");
    let inst = inst.to_str().unwrap();
    assert_eq!(code(&servnet(d, &["emit-milp", inst])), 0);
    let lp = fs::read_to_string(d.join("model.lp")).unwrap();
    assert!(lp.starts_with("Minimize\n") && lp.ends_with("End\n"));

    let values = d.join("values.txt");
    assert_eq!(code(&servnet(d, &["solve", inst, "--values", values.to_str().unwrap()])), 0);
    assert_eq!(code(&servnet(d, &["verify", inst, d.join("solution.json").to_str().unwrap()])), 0);
    assert_eq!(code(&servnet(d, &["verify", inst, values.to_str().unwrap()])), 0);

    let mut tampered = fs::read_to_string(&values).unwrap();
    tampered.push_str("w_c0 -1\n");
    let bad = d.join("tampered.txt");
    fs::write(&bad, tampered).unwrap();
    let out = servnet(d, &["verify", inst, bad.to_str().unwrap()]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn sweep_then_report_is_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [a.path(), b.path()] {
        assert_eq!(code(&servnet(d, &["sweep", "--seeds", "2", "--workers", "2", "--no-timing"])), 0);
        assert_eq!(code(&servnet(d, &["report"])), 0);
    }
    for name in [
        "sweep.json",
        "table_1_clients.csv",
        "table_3_clients.csv",
        "table_5_clients.csv",
        "sensitivity.svg",
        "metrics.csv",
        "robustness.csv",
    ] {
        let (x, y) = (fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap());
        assert_eq!(x, y, "{name}");
    }
    let table = fs::read_to_string(a.path().join("table_5_clients.csv")).unwrap();
    assert_eq!(table.lines().count(), 16);
    assert!(table.lines().last().unwrap().starts_with("45,150,100%"));
}

#[test]
fn critical_ranks_every_arc() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&servnet(d, &["generate", "--clients", "3"])), 0);
    let out = servnet(d, &["critical", d.join("instance_v50_c3.json").to_str().unwrap(), "--rate", "1"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 51);
    assert!(text.starts_with("rank,arc,service,from,to,impact\n1,"));
}
