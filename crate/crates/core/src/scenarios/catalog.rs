//! Built-in scenarios.

use crate::error::{Error, Result};
use crate::metrics::Quantity;
use crate::model::{
    AuthorityKind, ContactMatrix, CostParams, EpidemicParams, GroupId, GroupSpec, PolicySchedule, StateVec, Variant,
};
use crate::solver::SolverConfig;

use super::{Builtin, Scenario, ScenarioPair, ScenarioSet};

pub const LABELS: [&str; 6] = ["LF", "LI", "MF", "MI", "HF", "HI"];

/// Survey shares in percent, before renormalization.
pub const RAW_PERCENT: [f64; 6] = [14.7, 17.5, 15.1, 16.6, 18.6, 17.5];

pub const BETA: [f64; 6] = [0.4, 0.4, 0.35, 0.35, 0.3, 0.3];
pub const GAMMA: f64 = 0.143;
pub const ETA: f64 = 0.004;
pub const KAPPA: f64 = 0.03;
pub const C_INFECTED: [f64; 6] = [1.05, 1.05, 1.0, 1.0, 0.8, 0.8];
pub const C_NU: [f64; 6] = [1.4, 1.6, 1.2, 1.4, 0.8, 1.0];
pub const C_LAMBDA: f64 = 1.0;
pub const XI_INFECTED: f64 = 0.97;
pub const INITIAL_INFECTED: f64 = 0.01;
pub const MORTALITY: f64 = 0.005;
pub const DEATH_COST: f64 = 80.0;

pub const CONTACTS: [[f64; 6]; 6] = [
    [1.0, 0.95, 0.95, 0.9, 0.95, 0.9],
    [0.95, 1.0, 0.9, 0.95, 0.9, 0.95],
    [0.95, 0.9, 1.0, 0.95, 0.95, 0.9],
    [0.9, 0.95, 0.95, 1.0, 0.9, 0.95],
    [0.95, 0.9, 0.95, 0.9, 1.0, 0.95],
    [0.9, 0.95, 0.9, 0.95, 0.95, 1.0],
];

pub const PERMISSIVE: f64 = 0.9;
pub const STRICT: f64 = 0.6;

pub const ALL_FOLLOWER_LABELS: [&str; 3] = ["L(F)", "M(F)", "H(F)"];

pub const SINGLES: &[(&str, &str)] = &[
    ("permissive", "six groups, guideline 0.9 in every state"),
    ("adaptive", "guideline 0.6 for infected, 0.9 otherwise"),
    ("strict", "guideline 0.6 in every state"),
    ("low-vacc-cost", "permissive with uniform vaccination cost 0.8"),
    ("all-follower", "three income groups, all followers, permissive"),
    ("low-xi", "permissive with indifferent infected socialization 0.9"),
    ("high-kappa", "permissive with vaccination efficacy 0.1"),
    ("low-ci", "permissive with uniform infection cost 0.8"),
    ("high-eta", "permissive with waning rate 0.01"),
    ("sird-baseline", "SIRD permissive, mortality 0.5%, death cost 80"),
    ("sird-adaptive", "SIRD with the adaptive guideline"),
    ("sird-strict", "SIRD with the strict guideline"),
    ("sird-low-rho", "SIRD permissive with mortality 0.2%"),
    ("sird-no-death-cost", "SIRD permissive with death cost 0"),
];

pub const PAIRS: &[(&str, &str, &str)] = &[
    ("permissive-vs-adaptive", "permissive", "adaptive"),
    ("permissive-vs-strict", "permissive", "strict"),
    ("vacc-cost-pair", "permissive", "low-vacc-cost"),
    ("mixed-vs-all-follower", "permissive", "all-follower"),
    ("xi-pair", "permissive", "low-xi"),
    ("kappa-pair", "permissive", "high-kappa"),
    ("ci-pair", "permissive", "low-ci"),
    ("eta-pair", "permissive", "high-eta"),
    ("sird-permissive-vs-adaptive", "sird-baseline", "sird-adaptive"),
    ("sird-permissive-vs-strict", "sird-baseline", "sird-strict"),
    ("sird-rho-pair", "sird-baseline", "sird-low-rho"),
    ("sird-death-cost-pair", "sird-baseline", "sird-no-death-cost"),
];

pub const SETS: &[(&str, &[&str])] = &[("guidelines", &["permissive", "adaptive", "strict"])];

pub fn names() -> Vec<String> {
    SINGLES
        .iter()
        .map(|s| s.0)
        .chain(PAIRS.iter().map(|p| p.0))
        .chain(SETS.iter().map(|s| s.0))
        .map(str::to_string)
        .collect()
}

pub fn proportions() -> [f64; 6] {
    let total: f64 = RAW_PERCENT.iter().sum();
    RAW_PERCENT.map(|p| p / total)
}

fn initial_state() -> StateVec {
    [1.0 - INITIAL_INFECTED, INITIAL_INFECTED, 0.0, 0.0]
}

fn kind_of(label: &str) -> AuthorityKind {
    if label.ends_with('I') {
        AuthorityKind::Indifferent
    } else {
        AuthorityKind::Follower
    }
}

fn six_group(name: &str, variant: Variant, s: f64, i: f64, r: f64) -> Scenario {
    let m = proportions();
    let sird = variant == Variant::Sird;
    let groups = LABELS
        .iter()
        .enumerate()
        .map(|(k, label)| {
            let kind = kind_of(label);
            GroupSpec {
                id: GroupId { index: k, label: label.to_string() },
                kind,
                proportion: m[k],
                epi: EpidemicParams {
                    beta: BETA[k],
                    gamma: GAMMA,
                    eta: ETA,
                    kappa: KAPPA,
                    rho: if sird { MORTALITY } else { 0.0 },
                },
                cost: CostParams {
                    c_lambda: C_LAMBDA,
                    c_nu: C_NU[k],
                    c_infected: C_INFECTED[k],
                    xi_infected: (kind == AuthorityKind::Indifferent).then_some(XI_INFECTED),
                    death_cost: if sird { DEATH_COST } else { 0.0 },
                },
            }
        })
        .collect();
    Scenario {
        name: name.to_string(),
        variant,
        groups,
        contacts: ContactMatrix::new(CONTACTS.iter().map(|r| r.to_vec()).collect()).expect("static table"),
        policy: PolicySchedule::uniform(6, s, i, r),
        initial: vec![initial_state(); 6],
        solver: SolverConfig::default(),
    }
}

fn modified(name: &str, base: Scenario, f: impl Fn(&mut GroupSpec)) -> Scenario {
    let mut s = base;
    s.name = name.to_string();
    s.groups.iter_mut().for_each(f);
    s
}

/// Income-only population: parameters that differ by perception are
/// averaged over the two perception classes, shares are summed, and the
/// contact strength between two income groups is the mean of their 2x2
/// block (within-group strength stays 1).
fn all_follower() -> Scenario {
    let m = proportions();
    let mut groups = Vec::with_capacity(3);
    for (a, label) in ALL_FOLLOWER_LABELS.iter().enumerate() {
        let (f, i) = (2 * a, 2 * a + 1);
        groups.push(GroupSpec {
            id: GroupId { index: a, label: label.to_string() },
            kind: AuthorityKind::Follower,
            proportion: m[f] + m[i],
            epi: EpidemicParams { beta: 0.5 * (BETA[f] + BETA[i]), gamma: GAMMA, eta: ETA, kappa: KAPPA, rho: 0.0 },
            cost: CostParams {
                c_lambda: C_LAMBDA,
                c_nu: 0.5 * (C_NU[f] + C_NU[i]),
                c_infected: 0.5 * (C_INFECTED[f] + C_INFECTED[i]),
                xi_infected: None,
                death_cost: 0.0,
            },
        });
    }
    let rows = (0..3)
        .map(|a| {
            (0..3)
                .map(|c| {
                    if a == c {
                        1.0
                    } else {
                        let mut sum = 0.0;
                        for x in 2 * a..2 * a + 2 {
                            for y in 2 * c..2 * c + 2 {
                                sum += CONTACTS[x][y];
                            }
                        }
                        sum / 4.0
                    }
                })
                .collect()
        })
        .collect();
    Scenario {
        name: "all-follower".into(),
        variant: Variant::Sir,
        groups,
        contacts: ContactMatrix::new(rows).expect("static table"),
        policy: PolicySchedule::uniform(3, PERMISSIVE, PERMISSIVE, PERMISSIVE),
        initial: vec![initial_state(); 3],
        solver: SolverConfig::default(),
    }
}

pub fn single(name: &str) -> Option<Scenario> {
    let p = PERMISSIVE;
    let permissive = || six_group("permissive", Variant::Sir, p, p, p);
    let sird = || six_group("sird-baseline", Variant::Sird, p, p, p);
    Some(match name {
        "permissive" => permissive(),
        "adaptive" => six_group(name, Variant::Sir, p, STRICT, p),
        "strict" => six_group(name, Variant::Sir, STRICT, STRICT, STRICT),
        "low-vacc-cost" => modified(name, permissive(), |g| g.cost.c_nu = 0.8),
        "all-follower" => all_follower(),
        "low-xi" => modified(name, permissive(), |g| {
            if g.cost.xi_infected.is_some() {
                g.cost.xi_infected = Some(0.9)
            }
        }),
        "high-kappa" => modified(name, permissive(), |g| g.epi.kappa = 0.1),
        "low-ci" => modified(name, permissive(), |g| g.cost.c_infected = 0.8),
        "high-eta" => modified(name, permissive(), |g| g.epi.eta = 0.01),
        "sird-baseline" => sird(),
        "sird-adaptive" => six_group(name, Variant::Sird, p, STRICT, p),
        "sird-strict" => six_group(name, Variant::Sird, STRICT, STRICT, STRICT),
        "sird-low-rho" => modified(name, sird(), |g| g.epi.rho = 0.002),
        "sird-no-death-cost" => modified(name, sird(), |g| g.cost.death_cost = 0.0),
        _ => return None,
    })
}

pub fn builtin(name: &str) -> Result<Builtin> {
    if let Some(s) = single(name) {
        return Ok(Builtin::Single(s));
    }
    if let Some((_, b, t)) = PAIRS.iter().find(|p| p.0 == name) {
        let baseline = single(b).expect("catalog entry");
        let treatment = single(t).expect("catalog entry");
        let group_map = if *t == "all-follower" {
            ["LF", "MF", "HF"]
                .iter()
                .zip(ALL_FOLLOWER_LABELS)
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect()
        } else {
            baseline.labels().into_iter().map(|l| (l.clone(), l)).collect()
        };
        return Ok(Builtin::Pair(ScenarioPair {
            name: name.to_string(),
            baseline,
            treatment,
            quantities: Quantity::ALL.to_vec(),
            group_map,
        }));
    }
    if let Some((_, members)) = SETS.iter().find(|s| s.0 == name) {
        return Ok(Builtin::Set(ScenarioSet {
            name: name.to_string(),
            members: members.iter().map(|m| single(m).expect("catalog entry")).collect(),
        }));
    }
    Err(Error::UnknownScenario { name: name.to_string(), available: names() })
}
