use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use chrono::{SecondsFormat, Utc};
use mfg_epi::metrics::{peak, peak_shift, series, Quantity};
use mfg_epi::model::AuthorityKind;
use mfg_epi::scenarios::{catalog, resolve, Builtin};
use mfg_epi::validator::{
    best_response_oracle, deviation_gain, perturb_controls, simulate_finite_n, stationarity_check, ControlTarget,
    SimReport, ORACLE_RESOLUTION, STATIONARITY_TOLERANCE,
};
use mfg_epi::{solve, Compartment, EquilibriumSolution, Scenario};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::output::{self, sig9};
use crate::plot::{self, Dash, Series};
use crate::{SolveArgs, Status};

const NASH_SHIFT: f64 = 0.05;
const NASH_TOLERANCE: f64 = 1e-6;
/// Allowed sup deviation of the simulated infected path at 10,000 agents;
/// scaled by `sqrt(10000 / N)` for other population sizes.
const SIM_TOLERANCE_10K: f64 = 0.02;

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

fn load(args: &SolveArgs) -> Result<Builtin> {
    let mut b = resolve(&args.scenario)?;
    let o = args.overrides();
    for s in b.scenarios_mut() {
        o.apply(s).with_context(|| format!("applying overrides to `{}`", s.name))?;
    }
    Ok(b)
}

fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn manifest(
    command: &str,
    args: &SolveArgs,
    scenarios: &[&Scenario],
    solutions: &[&EquilibriumSolution],
    started: &str,
) -> Result<Value> {
    let (hash, docs) = output::config_hash(scenarios)?;
    let members: Vec<Value> = scenarios
        .iter()
        .zip(solutions)
        .zip(docs)
        .map(|((s, sol), doc)| {
            json!({
                "name": s.name,
                "variant": s.variant,
                "solver": output::solver_json(&s.solver),
                "diagnostics": output::diagnostics_json(sol),
                "config": doc,
            })
        })
        .collect();
    Ok(json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "scenario": args.scenario,
        "output_dir": args.out.display().to_string(),
        "config_hash": hash,
        "started_at": started,
        "finished_at": now(),
        "threads": rayon::current_num_threads(),
        "members": members,
    }))
}

fn quantity_plots(sol: &EquilibriumSolution, scenario: &Scenario) -> Vec<(String, String)> {
    let dash = |k: usize| match scenario.groups[k].kind {
        AuthorityKind::Follower => Dash::Solid,
        AuthorityKind::Indifferent => Dash::Dotted,
    };
    let times: Vec<f64> = sol.times().collect();
    let make = |value: &dyn Fn(usize, usize) -> f64| -> Vec<Series> {
        sol.labels
            .iter()
            .enumerate()
            .map(|(k, label)| Series {
                label: label.clone(),
                color: plot::color_for(label, k),
                dash: dash(k),
                points: times.iter().enumerate().map(|(n, &t)| (t, value(n, k))).collect(),
            })
            .collect()
    };
    let mut out = Vec::new();
    for &e in sol.variant.compartments() {
        let s = make(&|n, k| sol.distributions.get(n, k)[e.index()]);
        let title = format!("{}: proportion in {}", sol.labels.join("/"), e.label());
        out.push((format!("{}.svg", e.label()), plot::line_chart(&title, "t", &format!("p({})", e.label()), &s)));
    }
    let s = make(&|n, k| sol.controls.controls.get(n, k).alpha_s);
    out.push(("alpha_S.svg".into(), plot::line_chart("Socialization of susceptibles", "t", "alpha(S)", &s)));
    let s = make(&|n, k| sol.controls.controls.get(n, k).nu);
    out.push(("nu.svg".into(), plot::line_chart("Vaccination", "t", "nu", &s)));
    out
}

fn write_solution(dir: &Path, sol: &EquilibriumSolution, scenario: &Scenario) -> Result<()> {
    prepare_dir(dir)?;
    output::write(&dir.join("trajectories.csv"), output::trajectories_csv(sol))?;
    let mut metrics = output::solution_metrics(sol)?;
    metrics["scenario"] = json!(scenario.name);
    metrics["converged"] = json!(sol.converged);
    metrics["iterations"] = json!(sol.iterations);
    output::write_json(&dir.join("metrics.json"), &metrics)?;
    let plots = dir.join("plots");
    prepare_dir(&plots)?;
    for (name, svg) in quantity_plots(sol, scenario) {
        output::write(&plots.join(name), svg)?;
    }
    Ok(())
}

fn convergence_status(solutions: &[&EquilibriumSolution], allow: bool) -> Status {
    if solutions.iter().all(|s| s.converged) {
        return Status::Ok;
    }
    for s in solutions.iter().filter(|s| !s.converged) {
        let (rp, ru) = s.final_residual();
        let patch = s.nonconverged_patch.map(|p| format!(", patch {p}")).unwrap_or_default();
        eprintln!("warning: solver did not converge after {} iterations (residual p {rp:.3e}, u {ru:.3e}{patch})", s.iterations);
    }
    if allow {
        Status::Ok
    } else {
        Status::NotConverged
    }
}

pub fn run(args: &SolveArgs) -> Result<Status> {
    let started = now();
    let scenario = match load(args)? {
        Builtin::Single(s) => s,
        other => bail!("`{}` is a comparison; use `mfg-epi compare`", other.name()),
    };
    let sol = solve(&scenario)?;
    write_solution(&args.out, &sol, &scenario)?;
    let m = manifest("run", args, &[&scenario], &[&sol], &started)?;
    output::write_json(&args.out.join("manifest.json"), &m)?;
    eprintln!(
        "{}: {} after {} iterations, wrote {}",
        scenario.name,
        if sol.converged { "converged" } else { "NOT converged" },
        sol.iterations,
        args.out.display()
    );
    Ok(convergence_status(&[&sol], args.allow_nonconverged))
}

struct Members {
    name: String,
    scenarios: Vec<Scenario>,
    /// `group_map[i]` pairs a baseline label with its label in member `i`.
    maps: Vec<Vec<(String, String)>>,
}

fn members(b: Builtin) -> Result<Members> {
    match b {
        Builtin::Pair(p) => Ok(Members {
            name: p.name,
            maps: vec![p.baseline.labels().into_iter().map(|l| (l.clone(), l)).collect(), p.group_map],
            scenarios: vec![p.baseline, p.treatment],
        }),
        Builtin::Set(s) => {
            let labels = s.members[0].labels();
            for m in &s.members[1..] {
                if m.labels() != labels {
                    bail!("members of `{}` have different groups", s.name);
                }
            }
            Ok(Members {
                name: s.name,
                maps: vec![labels.iter().map(|l| (l.clone(), l.clone())).collect(); s.members.len()],
                scenarios: s.members,
            })
        }
        Builtin::Single(s) => bail!("`{}` is a single scenario; use `mfg-epi run`", s.name),
    }
}

fn member_summary(sol: &EquilibriumSolution, scenario: &Scenario, role: &str) -> Result<Value> {
    let metrics = output::solution_metrics(sol)?;
    Ok(json!({
        "name": scenario.name,
        "role": role,
        "converged": sol.converged,
        "iterations": sol.iterations,
        "peak_time_spans": metrics["peak_time_spans"],
        "group_disparities": metrics["group_disparities"],
    }))
}

fn comparison_plots(m: &Members, sols: &[EquilibriumSolution]) -> Vec<(String, String)> {
    let dashes = [Dash::Solid, Dash::Dashed, Dash::Dotted];
    let plots: [(&str, &str, Box<dyn Fn(&EquilibriumSolution, usize, usize) -> f64>); 5] = [
        ("S", "p(S)", Box::new(|s, n, k| s.distributions.get(n, k)[Compartment::S.index()])),
        ("I", "p(I)", Box::new(|s, n, k| s.distributions.get(n, k)[Compartment::I.index()])),
        ("R", "p(R)", Box::new(|s, n, k| s.distributions.get(n, k)[Compartment::R.index()])),
        ("alpha_S", "alpha(S)", Box::new(|s, n, k| s.controls.controls.get(n, k).alpha_s)),
        ("nu", "nu", Box::new(|s, n, k| s.controls.controls.get(n, k).nu)),
    ];
    let mut out = Vec::new();
    for (name, ylabel, value) in plots.iter() {
        let mut series = Vec::new();
        for (i, (sol, map)) in sols.iter().zip(&m.maps).enumerate() {
            for (j, (base_label, label)) in map.iter().enumerate() {
                let Ok(k) = sol.group_index(label) else { continue };
                series.push(Series {
                    label: format!("{label} ({})", m.scenarios[i].name),
                    color: plot::color_for(base_label, j),
                    dash: dashes[i.min(dashes.len() - 1)],
                    points: sol.times().enumerate().map(|(n, t)| (t, value(sol, n, k))).collect(),
                });
            }
        }
        let title = format!("{}: {name}", m.name);
        out.push((format!("compare_{name}.svg"), plot::line_chart(&title, "t", ylabel, &series)));
    }
    out
}

pub fn compare(args: &SolveArgs) -> Result<Status> {
    let started = now();
    let m = members(load(args)?)?;
    let sols: Vec<EquilibriumSolution> = m.scenarios.par_iter().map(solve).collect::<Result<_, _>>()?;
    let baseline = &sols[0];
    let mut diffs = Vec::new();
    for (i, sol) in sols.iter().enumerate().skip(1) {
        for q in Quantity::ALL {
            for (a, b) in &m.maps[i] {
                let sa = series(baseline, baseline.group_index(a)?, q);
                let sb = series(sol, sol.group_index(b)?, q);
                let shift = peak_shift(&sa, &sb, q)?;
                diffs.push(json!({
                    "baseline": m.scenarios[0].name,
                    "treatment": m.scenarios[i].name,
                    "quantity": q.key(),
                    "group": a,
                    "treatment_group": b,
                    "baseline_peak": peak(&sa, q).1,
                    "treatment_peak": peak(&sb, q).1,
                    "difference": shift.abs(),
                    "signed": shift,
                }));
            }
        }
    }
    let summaries: Vec<Value> = sols
        .iter()
        .zip(&m.scenarios)
        .enumerate()
        .map(|(i, (sol, s))| member_summary(sol, s, if i == 0 { "baseline" } else { "treatment" }))
        .collect::<Result<_>>()?;
    let comparison = json!({
        "name": m.name,
        "members": summaries,
        "peak_differences": diffs,
    });
    prepare_dir(&args.out)?;
    output::write_json(&args.out.join("comparison.json"), &comparison)?;
    for (sol, s) in sols.iter().zip(&m.scenarios) {
        write_solution(&args.out.join(&s.name), sol, s)?;
    }
    let plots = args.out.join("plots");
    prepare_dir(&plots)?;
    for (name, svg) in comparison_plots(&m, &sols) {
        output::write(&plots.join(name), svg)?;
    }
    let refs: Vec<&Scenario> = m.scenarios.iter().collect();
    let sol_refs: Vec<&EquilibriumSolution> = sols.iter().collect();
    let manifest = manifest("compare", args, &refs, &sol_refs, &started)?;
    output::write_json(&args.out.join("manifest.json"), &manifest)?;
    eprintln!("{}: compared {} members, wrote {}", m.name, sols.len(), args.out.display());
    Ok(convergence_status(&sol_refs, args.allow_nonconverged))
}

fn check(name: &str, passed: bool, value: f64, threshold: f64, detail: String) -> Value {
    json!({ "name": name, "passed": passed, "value": value, "threshold": threshold, "detail": detail })
}

fn simulation_csv(report: &SimReport, sol: &EquilibriumSolution) -> String {
    let mut out = String::from("t,group,compartment,mean,mean_field");
    for r in 0..report.n_replicas {
        let _ = write!(out, ",replica_{r}");
    }
    out.push('\n');
    for (k, label) in sol.labels.iter().enumerate() {
        for e in sol.variant.compartments() {
            let i = e.index();
            for n in 0..sol.grid.n_nodes() {
                let _ = write!(
                    out,
                    "{},{label},{},{},{}",
                    sig9(sol.grid.time(n)),
                    e.label(),
                    sig9(report.mean.get(n, k)[i]),
                    sig9(sol.distributions.get(n, k)[i].clamp(0.0, 1.0))
                );
                for path in &report.replicas {
                    let _ = write!(out, ",{}", sig9(path.get(n, k)[i]));
                }
                out.push('\n');
            }
        }
    }
    out
}

pub fn validate(args: &SolveArgs, agents: usize, replicas: usize, seed: u64, perturb: Option<f64>) -> Result<Status> {
    let started = now();
    let scenario = match load(args)? {
        Builtin::Single(s) => s,
        other => bail!("`{}` is a comparison; validate its members one at a time", other.name()),
    };
    let solved = solve(&scenario)?;
    let conv = convergence_status(&[&solved], args.allow_nonconverged);
    if conv != Status::Ok {
        prepare_dir(&args.out)?;
        let m = manifest("validate", args, &[&scenario], &[&solved], &started)?;
        output::write_json(&args.out.join("manifest.json"), &m)?;
        return Ok(conv);
    }
    let sol = match perturb {
        Some(d) => perturb_controls(&solved, d),
        None => solved.clone(),
    };

    let mut checks = Vec::new();
    let st = stationarity_check(&sol, &scenario);
    checks.push(check(
        "stationarity",
        st.passed(STATIONARITY_TOLERANCE),
        st.max_residual,
        STATIONARITY_TOLERANCE,
        format!(
            "{} interior and {} boundary controls checked, {} boundary sign violations",
            st.interior_checks, st.boundary_checks, st.boundary_violations
        ),
    ));

    let oracle_gaps: Vec<(String, f64)> = (0..scenario.groups.len())
        .into_par_iter()
        .map(|k| -> Result<(String, f64)> {
            let o = best_response_oracle(&sol.aggregates, k, &scenario)?;
            let gap = o
                .controls
                .controls
                .column(0)
                .zip(sol.controls.controls.column(k))
                .flat_map(|(a, b)| [a.alpha_s - b.alpha_s, a.alpha_i - b.alpha_i, a.alpha_r - b.alpha_r, a.nu - b.nu])
                .fold(0.0f64, |m, d| m.max(d.abs()));
            Ok((sol.labels[k].clone(), gap))
        })
        .collect::<Result<_>>()?;
    for (label, gap) in &oracle_gaps {
        checks.push(check(
            &format!("oracle/{label}"),
            *gap <= ORACLE_RESOLUTION + 1e-12,
            *gap,
            ORACLE_RESOLUTION,
            "sup gap between grid-search best response and equilibrium controls".into(),
        ));
    }

    let n = sol.grid.n_nodes();
    let spans = [(0, n), (0, n / 4), (n / 4, n / 2), (n / 2, n)];
    let mut worst = (f64::INFINITY, String::new());
    for k in 0..scenario.groups.len() {
        for target in ControlTarget::ALL {
            for delta in [-NASH_SHIFT, NASH_SHIFT] {
                for (from, to) in spans {
                    let g = deviation_gain(&sol, &scenario, k, target, delta, from, to)?;
                    if g < worst.0 {
                        worst = (g, format!("{} {target:?} {delta:+} on nodes {from}..{to}", sol.labels[k]));
                    }
                }
            }
        }
    }
    checks.push(check(
        "nash_deviation",
        worst.0 >= -NASH_TOLERANCE,
        worst.0,
        -NASH_TOLERANCE,
        format!("smallest cost change of a unilateral deviation: {}", worst.1),
    ));

    let report = simulate_finite_n(&sol, &scenario, agents, replicas, seed)?;
    let sim_tol = SIM_TOLERANCE_10K * (10_000.0 / agents as f64).sqrt();
    checks.push(check(
        "finite_population",
        report.sup_deviation <= sim_tol,
        report.sup_deviation,
        sim_tol,
        format!("sup deviation of the replica-averaged infected path, N={agents}, {replicas} replicas"),
    ));

    let passed = checks.iter().all(|c| c["passed"] == json!(true));
    let validation = json!({
        "scenario": scenario.name,
        "passed": passed,
        "perturbation": perturb,
        "checks": checks,
        "simulation": {
            "n_agents": report.n_agents,
            "n_replicas": report.n_replicas,
            "seed": report.seed,
            "rng": report.rng,
            "group_sizes": report.group_sizes,
            "sup_deviation": report.sup_deviation,
            "replica_deviations": report.replica_deviations,
            "events": report.events,
        },
    });
    prepare_dir(&args.out)?;
    output::write_json(&args.out.join("validation.json"), &validation)?;
    output::write(&args.out.join("simulation.csv"), simulation_csv(&report, &sol))?;
    let m = manifest("validate", args, &[&scenario], &[&solved], &started)?;
    output::write_json(&args.out.join("manifest.json"), &m)?;
    for c in &checks {
        eprintln!(
            "{} {}: {:.3e} (threshold {:.1e})",
            if c["passed"] == json!(true) { "pass" } else { "FAIL" },
            c["name"].as_str().unwrap_or(""),
            c["value"].as_f64().unwrap_or(f64::NAN),
            c["threshold"].as_f64().unwrap_or(f64::NAN)
        );
    }
    Ok(if passed { Status::Ok } else { Status::ValidationFailed })
}

pub fn list() -> Result<Status> {
    println!("single scenarios:");
    for (name, about) in catalog::SINGLES {
        println!("  {name:<28} {about}");
    }
    println!("comparisons:");
    for (name, a, b) in catalog::PAIRS {
        println!("  {name:<28} {a} vs {b}");
    }
    for (name, members) in catalog::SETS {
        println!("  {name:<28} {}", members.join(", "));
    }
    Ok(Status::Ok)
}
