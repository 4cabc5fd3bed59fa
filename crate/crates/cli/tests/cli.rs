use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mfg_epi::scenarios::{catalog, save_scenario};
use serde_json::Value;
use tempfile::TempDir;

fn mfg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfg-epi"))
        .args(args)
        .env("MFG_EPI_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn run_ok(args: &[&str]) -> Output {
    let out = mfg(args);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

struct Rows {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Rows {
    fn read(path: &Path) -> Rows {
        let text = fs::read_to_string(path).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap().split(',').map(String::from).collect();
        let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
        Rows { header, rows }
    }

    fn col(&self, name: &str) -> usize {
        self.header.iter().position(|h| h == name).unwrap()
    }

    /// Values of `column` for one (group, compartment), in time order.
    fn series(&self, group: &str, compartment: &str, column: &str) -> Vec<f64> {
        let (g, c, v) = (self.col("group"), self.col("compartment"), self.col(column));
        self.rows
            .iter()
            .filter(|r| r[g] == group && r[c] == compartment)
            .map(|r| r[v].parse().unwrap())
            .collect()
    }
}

fn dir(tmp: &TempDir, name: &str) -> String {
    tmp.path().join(name).to_str().unwrap().to_string()
}

#[test]
fn run_writes_trajectories_metrics_and_plots() {
    let tmp = TempDir::new().unwrap();
    let out = dir(&tmp, "run");
    run_ok(&["run", "--scenario", "permissive", "--out", &out]);
    let root = Path::new(&out);
    let csv = Rows::read(&root.join("trajectories.csv"));
    assert_eq!(csv.header.join(","), "t,group,compartment,p,u,alpha_S,alpha_I,alpha_R,nu,Z");
    let mut counts: HashMap<(String, String), usize> = HashMap::new();
    for r in &csv.rows {
        *counts.entry((r[1].clone(), r[2].clone())).or_default() += 1;
    }
    assert_eq!(counts.len(), 18);
    assert!(counts.values().all(|&n| n == 1001));
    let groups: std::collections::BTreeSet<_> = counts.keys().map(|k| k.0.clone()).collect();
    assert_eq!(groups.len(), 6);
    for r in &csv.rows {
        let p: f64 = r[3].parse().unwrap();
        assert!((0.0..=1.0).contains(&p));
    }
    for name in ["S", "I", "R", "alpha_S", "nu"] {
        let svg = fs::read_to_string(root.join("plots").join(format!("{name}.svg"))).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 6, "{name}");
    }
    assert!(!root.join("plots/D.svg").exists());
    let metrics = json(&root.join("metrics.json"));
    for key in ["peaks", "peak_time_spans", "group_disparities"] {
        assert!(metrics[key].is_object(), "{key}");
    }
    let manifest = json(&root.join("manifest.json"));
    assert_eq!(manifest["command"], "run");
    assert!(manifest["config_hash"].as_str().unwrap().starts_with("sha256:"));
}

#[test]
fn socialization_peak_is_the_lowest_level() {
    let tmp = TempDir::new().unwrap();
    let out = dir(&tmp, "run");
    run_ok(&["run", "--scenario", "adaptive", "--out", &out]);
    let root = Path::new(&out);
    let csv = Rows::read(&root.join("trajectories.csv"));
    let metrics = json(&root.join("metrics.json"));
    for row in metrics["peaks"]["socialization_s"].as_array().unwrap() {
        let g = row["group"].as_str().unwrap();
        let min = csv.series(g, "S", "alpha_S").into_iter().fold(f64::INFINITY, f64::min);
        assert!((row["value"].as_f64().unwrap() - min).abs() < 1e-8, "{g}");
    }
    for row in metrics["peaks"]["infected_proportion"].as_array().unwrap() {
        let g = row["group"].as_str().unwrap();
        let max = csv.series(g, "I", "p").into_iter().fold(0.0, f64::max);
        assert!((row["value"].as_f64().unwrap() - max).abs() < 1e-8, "{g}");
    }
}

#[test]
fn deceased_compartment_is_written_for_sird() {
    let tmp = TempDir::new().unwrap();
    let out = dir(&tmp, "sird");
    run_ok(&["run", "--scenario", "sird-baseline", "--out", &out]);
    let root = Path::new(&out);
    let csv = Rows::read(&root.join("trajectories.csv"));
    let d = csv.series("LF", "D", "p");
    assert_eq!(d.len(), 1001);
    assert_eq!(d[0], 0.0);
    assert!(d.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    assert!(*d.last().unwrap() > 0.0);
    let u = csv.series("LF", "D", "u");
    assert!((u.last().unwrap() - 80.0).abs() < 1e-9);
    assert!(root.join("plots/D.svg").exists());
}

#[test]
fn finer_step_stays_close_and_output_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let (a, b, c) = (dir(&tmp, "a"), dir(&tmp, "b"), dir(&tmp, "c"));
    run_ok(&["run", "--scenario", "permissive", "--out", &a]);
    run_ok(&["run", "--scenario", "permissive", "--out", &b]);
    run_ok(&["run", "--scenario", "permissive", "--dt", "0.05", "--out", &c]);
    let first = fs::read(Path::new(&a).join("trajectories.csv")).unwrap();
    let second = fs::read(Path::new(&b).join("trajectories.csv")).unwrap();
    assert!(first == second, "repeated runs differ");

    let coarse = Rows::read(&Path::new(&a).join("trajectories.csv"));
    let fine = Rows::read(&Path::new(&c).join("trajectories.csv"));
    let manifest = json(&Path::new(&c).join("manifest.json"));
    assert_eq!(manifest["members"][0]["solver"]["n_steps"], 2000);
    for g in ["LF", "LI", "MF", "MI", "HF", "HI"] {
        let pc = coarse.series(g, "I", "p");
        let pf = fine.series(g, "I", "p");
        assert_eq!(pf.len(), 2001);
        let gap = pc.iter().enumerate().map(|(n, v)| (v - pf[2 * n]).abs()).fold(0.0, f64::max);
        // Forward Euler: halving dt moves the path by O(dt).
        assert!(gap < 0.01, "{g}: {gap}");
    }
}

fn differences(root: &Path) -> Vec<Value> {
    json(&root.join("comparison.json"))["peak_differences"].as_array().unwrap().clone()
}

#[test]
fn compare_reports_signed_peak_differences() {
    let tmp = TempDir::new().unwrap();
    let out = dir(&tmp, "cmp");
    run_ok(&["compare", "--scenario", "permissive-vs-adaptive", "--out", &out]);
    let root = Path::new(&out);
    let diffs = differences(root);
    assert_eq!(diffs.len(), 18);
    for d in &diffs {
        let signed = d["signed"].as_f64().unwrap();
        let gap = d["treatment_peak"].as_f64().unwrap() - d["baseline_peak"].as_f64().unwrap();
        assert!((signed - gap).abs() < 1e-12);
        assert!((d["difference"].as_f64().unwrap() - signed.abs()).abs() < 1e-15);
        if d["quantity"] == "infected_proportion" {
            assert!(signed < 0.0, "{d}");
        }
    }
    let cmp = json(&root.join("comparison.json"));
    let roles: Vec<_> = cmp["members"].as_array().unwrap().iter().map(|m| m["role"].clone()).collect();
    assert_eq!(roles, ["baseline", "treatment"]);
    for member in ["permissive", "adaptive"] {
        assert!(root.join(member).join("trajectories.csv").exists());
    }
    let svg = fs::read_to_string(root.join("plots/compare_I.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 12);
    assert_eq!(json(&root.join("manifest.json"))["command"], "compare");
}

#[test]
fn strict_guideline_lowers_follower_vaccination() {
    let tmp = TempDir::new().unwrap();
    let out = dir(&tmp, "strict");
    run_ok(&["compare", "--scenario", "permissive-vs-strict", "--out", &out]);
    let vacc: Vec<_> = differences(Path::new(&out)).into_iter().filter(|d| d["quantity"] == "vaccination").collect();
    assert_eq!(vacc.len(), 6);
    for d in vacc.iter().filter(|d| d["group"].as_str().unwrap().ends_with('F')) {
        assert!(d["signed"].as_f64().unwrap() < 0.0, "{d}");
    }
}

#[test]
fn all_follower_comparison_maps_groups() {
    let tmp = TempDir::new().unwrap();
    let out = dir(&tmp, "mixed");
    run_ok(&["compare", "--scenario", "mixed-vs-all-follower", "--out", &out]);
    let diffs = differences(Path::new(&out));
    assert_eq!(diffs.len(), 9);
    let pairs: Vec<(String, String)> = diffs
        .iter()
        .filter(|d| d["quantity"] == "infected_proportion")
        .map(|d| (d["group"].as_str().unwrap().into(), d["treatment_group"].as_str().unwrap().into()))
        .collect();
    let expected = [("LF", "L(F)"), ("MF", "M(F)"), ("HF", "H(F)")];
    assert_eq!(pairs, expected.map(|(a, b)| (a.to_string(), b.to_string())));
}

#[test]
fn perturbed_controls_fail_validation() {
    let tmp = TempDir::new().unwrap();
    let out = dir(&tmp, "val");
    let result = mfg(&[
        "validate",
        "--scenario",
        "permissive",
        "--horizon",
        "30",
        "--replicas",
        "4",
        "--agents",
        "2000",
        "--perturb-controls",
        "-0.05",
        "--out",
        &out,
    ]);
    assert_eq!(code(&result), 3, "stderr: {}", String::from_utf8_lossy(&result.stderr));
    let v = json(&Path::new(&out).join("validation.json"));
    let checks = v["checks"].as_array().unwrap();
    let stationarity = checks.iter().find(|c| c["name"] == "stationarity").unwrap();
    assert_eq!(stationarity["passed"], false);
}

#[test]
fn validation_without_flows_has_zero_deviation() {
    let tmp = TempDir::new().unwrap();
    let mut s = catalog::single("permissive").unwrap();
    s.name = "still".into();
    for g in &mut s.groups {
        g.epi.beta = 0.0;
        g.epi.kappa = 0.0;
        g.epi.eta = 0.0;
    }
    for p in &mut s.initial {
        *p = [1.0, 0.0, 0.0, 0.0];
    }
    s.solver.grid = mfg_epi::TimeGrid::new(20.0, 0.1).unwrap();
    let file = tmp.path().join("still.toml");
    save_scenario(&s, &file).unwrap();
    let out = dir(&tmp, "val");
    run_ok(&["validate", "--scenario", file.to_str().unwrap(), "--replicas", "3", "--agents", "500", "--out", &out]);
    let v = json(&Path::new(&out).join("validation.json"));
    let sim = v["checks"].as_array().unwrap().iter().find(|c| c["name"] == "finite_population").unwrap().clone();
    assert_eq!(sim["value"].as_f64().unwrap(), 0.0);
    assert_eq!(sim["passed"], true);
    let csv = Rows::read(&Path::new(&out).join("simulation.csv"));
    assert_eq!(csv.header[..5].join(","), "t,group,compartment,mean,mean_field");
    assert_eq!(csv.header.len(), 5 + 3);
}

#[test]
fn iteration_limit_exits_two_unless_allowed() {
    let tmp = TempDir::new().unwrap();
    let out = dir(&tmp, "short");
    let result = mfg(&["run", "--scenario", "permissive", "--max-iters", "3", "--out", &out]);
    assert_eq!(code(&result), 2);
    assert!(String::from_utf8_lossy(&result.stderr).contains("did not converge"));
    assert!(Path::new(&out).join("trajectories.csv").exists());
    run_ok(&["run", "--scenario", "permissive", "--max-iters", "3", "--allow-nonconverged", "--out", &out]);
    let m = json(&Path::new(&out).join("manifest.json"));
    assert_eq!(m["members"][0]["diagnostics"]["converged"], false);
}

#[test]
fn usage_errors_exit_one() {
    let tmp = TempDir::new().unwrap();
    let out = dir(&tmp, "x");
    let unknown = mfg(&["run", "--scenario", "no-such-thing", "--out", &out]);
    assert_eq!(code(&unknown), 1);
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("permissive"));
    assert_eq!(code(&mfg(&["run", "--scenario", "permissive"])), 1);
    assert_eq!(code(&mfg(&["run", "--scenario", "permissive", "--out", &out, "--damping", "1.5"])), 1);
    assert_eq!(code(&mfg(&["run", "--scenario", "permissive", "--out", &out, "--integrator", "leapfrog"])), 1);
    assert_eq!(code(&mfg(&["run", "--scenario", "permissive-vs-adaptive", "--out", &out])), 1);
    assert_eq!(code(&mfg(&["frobnicate"])), 1);
    assert_eq!(code(&mfg(&["--help"])), 0);
    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "name = \"bad\"\nvariant = \"SIR\"\n[[groups]]\nlabel = \"A\"\nproportion = 0.4\n").unwrap();
    let r = mfg(&["run", "--scenario", bad.to_str().unwrap(), "--out", &out]);
    assert_eq!(code(&r), 1);
}

#[test]
fn thread_variable_must_be_positive() {
    let tmp = TempDir::new().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_mfg-epi"))
        .args(["run", "--scenario", "permissive", "--out", &dir(&tmp, "t")])
        .env("MFG_EPI_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(code(&out), 1);
}

#[test]
fn list_names_every_entry() {
    let out = run_ok(&["list"]);
    let text = String::from_utf8_lossy(&out.stdout);
    for name in catalog::names() {
        assert!(text.contains(&name), "{name}");
    }
}
