use super::catalog::{self, single};
use super::*;
use crate::model::AuthorityKind;

// Copy of the survey tables the catalog is built from.
const TABLE_SHARES: &str = "LF 14.7\nLI 17.5\nMF 15.1\nMI 16.6\nHF 18.6\nHI 17.5";
const TABLE_PARAMS: &str = "\
group beta gamma eta kappa c_I c_nu c_lambda xi_I I0
LF 0.4 0.143 0.004 0.03 1.05 1.4 1 - 0.01
LI 0.4 0.143 0.004 0.03 1.05 1.6 1 0.97 0.01
MF 0.35 0.143 0.004 0.03 1 1.2 1 - 0.01
MI 0.35 0.143 0.004 0.03 1 1.4 1 0.97 0.01
HF 0.3 0.143 0.004 0.03 0.8 0.8 1 - 0.01
HI 0.3 0.143 0.004 0.03 0.8 1 1 0.97 0.01";
const TABLE_CONTACTS: &str = "\
1 0.95 0.95 0.9 0.95 0.9
0.95 1 0.9 0.95 0.9 0.95
0.95 0.9 1 0.95 0.95 0.9
0.9 0.95 0.95 1 0.9 0.95
0.95 0.9 0.95 0.9 1 0.95
0.9 0.95 0.9 0.95 0.95 1";

fn minimal(proportions: &[f64]) -> String {
    let mut s = String::from("name = \"mini\"\n\n");
    let labels = ["A", "B"];
    for (label, m) in labels.iter().zip(proportions) {
        s += &format!(
            "[[groups]]\nlabel = \"{label}\"\nkind = \"follower\"\nproportion = {m}\nbeta = 0.4\ngamma = 0.143\n\
             eta = 0.004\nkappa = 0.03\nc_lambda = 1.0\nc_nu = 1.0\nc_infected = 1.0\n\n"
        );
    }
    s += "[contacts]\nmatrix = [[1.0, 0.9], [0.9, 1.0]]\n";
    s
}

#[test]
fn catalog_matches_tables() {
    let s = single("permissive").unwrap();
    let total: f64 = TABLE_SHARES.lines().map(|l| l.split_whitespace().nth(1).unwrap().parse::<f64>().unwrap()).sum();
    for (k, line) in TABLE_SHARES.lines().enumerate() {
        let mut it = line.split_whitespace();
        assert_eq!(s.groups[k].id.label, it.next().unwrap());
        let raw: f64 = it.next().unwrap().parse().unwrap();
        assert_eq!(catalog::RAW_PERCENT[k], raw);
        assert_eq!(s.groups[k].proportion, raw / total);
    }
    for (k, line) in TABLE_PARAMS.lines().skip(1).enumerate() {
        let f: Vec<&str> = line.split_whitespace().collect();
        let num = |i: usize| f[i].parse::<f64>().unwrap();
        let g = &s.groups[k];
        assert_eq!(g.id.label, f[0]);
        assert_eq!(
            [g.epi.beta, g.epi.gamma, g.epi.eta, g.epi.kappa, g.cost.c_infected, g.cost.c_nu, g.cost.c_lambda],
            [num(1), num(2), num(3), num(4), num(5), num(6), num(7)]
        );
        assert_eq!(g.cost.xi_infected, f[8].parse::<f64>().ok());
        assert_eq!(g.kind == AuthorityKind::Indifferent, f[8] != "-");
        assert_eq!(s.initial[k][1], num(9));
        assert_eq!(s.initial[k][0], 1.0 - num(9));
    }
    for (k, line) in TABLE_CONTACTS.lines().enumerate() {
        for (l, v) in line.split_whitespace().enumerate() {
            assert_eq!(s.contacts.get(k, l), v.parse::<f64>().unwrap());
        }
    }
}

#[test]
fn shares_are_renormalized() {
    let m = catalog::proportions();
    assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    assert_eq!(catalog::RAW_PERCENT.iter().sum::<f64>(), 100.0);
}

#[test]
fn guideline_levels() {
    let levels = |name: &str| {
        let s = single(name).unwrap();
        let l = s.policy.levels(0, 50.0);
        (l.s, l.i, l.r)
    };
    assert_eq!(levels("permissive"), (0.9, 0.9, 0.9));
    assert_eq!(levels("adaptive"), (0.9, 0.6, 0.9));
    assert_eq!(levels("strict"), (0.6, 0.6, 0.6));
}

#[test]
fn pair_members_differ_as_described() {
    let Builtin::Pair(p) = builtin("vacc-cost-pair").unwrap() else { panic!("pair expected") };
    assert!(p.treatment.groups.iter().all(|g| g.cost.c_nu == 0.8));
    assert_eq!(p.baseline.groups.iter().map(|g| g.cost.c_nu).collect::<Vec<_>>(), vec![1.4, 1.6, 1.2, 1.4, 0.8, 1.0]);

    let sird = single("sird-baseline").unwrap();
    assert_eq!(sird.variant, Variant::Sird);
    assert!(sird.groups.iter().all(|g| g.epi.rho == 0.005 && g.cost.death_cost == 80.0));

    let expect = |name: &str, check: fn(&GroupSpec) -> bool| {
        let Builtin::Pair(p) = builtin(name).unwrap() else { panic!("{name}") };
        assert!(p.treatment.groups.iter().all(check), "{name}");
        p.validate().unwrap();
    };
    expect("xi-pair", |g| g.cost.xi_infected.is_none_or(|x| x == 0.9));
    expect("kappa-pair", |g| g.epi.kappa == 0.1);
    expect("ci-pair", |g| g.cost.c_infected == 0.8);
    expect("eta-pair", |g| g.epi.eta == 0.01);
    expect("sird-rho-pair", |g| g.epi.rho == 0.002);
    expect("sird-death-cost-pair", |g| g.cost.death_cost == 0.0);
}

#[test]
fn all_follower_averages() {
    let s = single("all-follower").unwrap();
    let m = catalog::proportions();
    let labels: Vec<String> = s.labels();
    assert_eq!(labels, ["L(F)", "M(F)", "H(F)"]);
    // recomputed here from the six-group tables
    let c_nu = [(1.4 + 1.6) / 2.0, (1.2 + 1.4) / 2.0, (0.8 + 1.0) / 2.0];
    let beta = [0.4, 0.35, 0.3];
    let c_i = [1.05, 1.0, 0.8];
    for a in 0..3 {
        let g = &s.groups[a];
        assert!((g.cost.c_nu - [1.5, 1.3, 0.9][a]).abs() < 1e-12);
        assert!((g.cost.c_nu - c_nu[a]).abs() < 1e-15);
        assert!((g.epi.beta - beta[a]).abs() < 1e-15);
        assert!((g.cost.c_infected - c_i[a]).abs() < 1e-15);
        assert_eq!(g.kind, AuthorityKind::Follower);
        assert!((g.proportion - (m[2 * a] + m[2 * a + 1])).abs() < 1e-15);
    }
    for a in 0..3 {
        for b in 0..3 {
            let want = if a == b { 1.0 } else { (0.95 + 0.9 + 0.9 + 0.95) / 4.0 };
            assert!((s.contacts.get(a, b) - want).abs() < 1e-15);
        }
    }
    let Builtin::Pair(p) = builtin("mixed-vs-all-follower").unwrap() else { panic!() };
    assert_eq!(p.group_map[0], ("LF".to_string(), "L(F)".to_string()));
    p.validate().unwrap();
}

#[test]
fn unknown_name_lists_catalog() {
    let err = builtin("no-such-thing").unwrap_err();
    let msg = err.to_string();
    for name in catalog::names() {
        assert!(msg.contains(&name), "{name} missing from {msg}");
    }
    assert!(matches!(resolve("no-such-thing"), Err(Error::UnknownScenario { .. })));
}

#[test]
fn every_entry_validates() {
    for name in catalog::names() {
        match builtin(&name).unwrap() {
            Builtin::Single(s) => s.validate().unwrap(),
            Builtin::Pair(p) => p.validate().unwrap(),
            Builtin::Set(set) => set.members.iter().for_each(|s| s.validate().unwrap()),
        }
    }
}

#[test]
fn toml_round_trip() {
    for name in ["permissive", "adaptive", "all-follower", "sird-baseline", "low-xi"] {
        let s = single(name).unwrap();
        let text = scenario_to_toml(&s).unwrap();
        assert_eq!(parse_scenario(&text).unwrap(), s, "{name}");
    }
}

#[test]
fn minimal_file_uses_defaults() {
    let s = parse_scenario(&minimal(&[0.5, 0.5])).unwrap();
    assert_eq!(s.groups.len(), 2);
    assert_eq!(s.initial[0], [0.99, 0.01, 0.0, 0.0]);
    assert_eq!(s.solver, SolverConfig::default());
    assert_eq!(s.policy.levels(1, 3.0).i, 0.9);
}

#[test]
fn proportions_must_sum_to_one() {
    let err = parse_scenario(&minimal(&[0.5, 0.45])).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("proportion"), "{msg}");
    assert!(matches!(err, Error::Validation { line: Some(_), .. }));
}

#[test]
fn grid_section_overrides_defaults() {
    let text = minimal(&[0.5, 0.5]) + "\n[grid]\nhorizon = 60.0\ndt = 0.05\n";
    let s = parse_scenario(&text).unwrap();
    assert_eq!(s.grid().n_steps, 1200);
    assert_eq!(s.grid().horizon, 60.0);
}

#[test]
fn unknown_keys_are_rejected() {
    let text = minimal(&[0.5, 0.5]).replace("beta = 0.4", "beta = 0.4\nbetta = 0.4");
    let err = parse_scenario(&text).unwrap_err();
    assert!(err.to_string().contains("betta"), "{err}");
    let text = minimal(&[0.5, 0.5]) + "\n[solver]\ntolerance = 1e-6\n";
    assert!(parse_scenario(&text).is_err());
}

#[test]
fn policy_breakpoints_parse() {
    let text = minimal(&[0.5, 0.5])
        + "\n[policy.groups.A]\nS = [[0.0, 0.9], [20.0, 0.6]]\nI = [[0.0, 0.6]]\nR = [[0.0, 0.9]]\n";
    let s = parse_scenario(&text).unwrap();
    assert_eq!(s.policy.levels(0, 10.0).s, 0.9);
    assert_eq!(s.policy.levels(0, 25.0).s, 0.6);
    assert_eq!(s.policy.levels(1, 25.0).s, 0.9);
    let bad = minimal(&[0.5, 0.5]) + "\n[policy.groups.Z]\nS = [[0.0, 0.9]]\nI = [[0.0, 0.6]]\nR = [[0.0, 0.9]]\n";
    let err = parse_scenario(&bad).unwrap_err();
    assert!(err.to_string().contains("policy.groups.Z"), "{err}");
}

#[test]
fn sir_file_rejects_mortality() {
    let text = minimal(&[0.5, 0.5]).replacen("kappa = 0.03", "kappa = 0.03\nrho = 0.01", 1);
    let err = parse_scenario(&text).unwrap_err();
    assert!(err.to_string().contains("rho"), "{err}");
}

#[test]
fn overrides_apply() {
    let mut s = single("permissive").unwrap();
    let o = Overrides { horizon: Some(60.0), dt: Some(0.05), integrator: Some(Integrator::Rk4), ..Overrides::default() };
    o.apply(&mut s).unwrap();
    assert_eq!(s.grid().n_steps, 1200);
    assert_eq!(s.solver.integrator, Integrator::Rk4);
    let bad = Overrides { damping: Some(0.0), ..Overrides::default() };
    assert!(bad.apply(&mut s).is_err());
}

#[test]
fn files_resolve_by_path() {
    let dir = std::env::temp_dir().join(format!("mfg-epi-scn-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("p.toml");
    let s = single("strict").unwrap();
    save_scenario(&s, &path).unwrap();
    let Builtin::Single(back) = resolve(path.to_str().unwrap()).unwrap() else { panic!() };
    assert_eq!(back, s);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn calibration_rejects_bad_range() {
    let s = single("permissive").unwrap();
    assert!(calibrate_horizon(&s, "LI", "HF", 0.0386, (50.0, 40.0), 5.0).is_err());
}
