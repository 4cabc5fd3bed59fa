//! TOML scenario files.
//!
//! Unknown keys are rejected. Validation failures are reported with the
//! line of the offending section.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::error::{Error, Result};
use crate::model::{
    AuthorityKind, ContactMatrix, CostParams, EpidemicParams, GroupId, GroupPolicy, GroupSpec, PolicySchedule,
    Schedule, TimeGrid, Variant,
};
use crate::solver::{Integrator, SolverConfig};

use super::Scenario;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: String,
    #[serde(default = "default_variant")]
    variant: Variant,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grid: Option<Spanned<GridFile>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    solver: Option<Spanned<SolverFile>>,
    groups: Vec<Spanned<GroupFile>>,
    contacts: Spanned<ContactsFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    policy: Option<Spanned<PolicyFile>>,
}

fn default_variant() -> Variant {
    Variant::Sir
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFile {
    horizon: f64,
    dt: f64,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolverFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    damping: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    integrator: Option<Integrator>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    patch_length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nu_cap: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroupFile {
    label: String,
    kind: AuthorityKind,
    proportion: Spanned<f64>,
    beta: f64,
    gamma: f64,
    eta: f64,
    kappa: f64,
    #[serde(default)]
    rho: f64,
    c_lambda: f64,
    c_nu: f64,
    c_infected: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    xi_infected: Option<f64>,
    #[serde(default)]
    death_cost: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    initial: Option<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ContactsFile {
    matrix: Vec<Vec<f64>>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolicyFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lambda_bar: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    default: Option<StatePolicyFile>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    groups: BTreeMap<String, StatePolicyFile>,
}

/// Breakpoint lists `[[t0, value], [t1, value], ...]` per living state.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StatePolicyFile {
    #[serde(rename = "S")]
    s: Vec<(f64, f64)>,
    #[serde(rename = "I")]
    i: Vec<(f64, f64)>,
    #[serde(rename = "R")]
    r: Vec<(f64, f64)>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|b| *b == b'\n').count() + 1
}

fn anchored(key: impl Into<String>, reason: impl Into<String>, line: Option<usize>) -> Error {
    Error::Validation { key: key.into(), reason: reason.into(), line }
}

fn default_policy() -> StatePolicyFile {
    StatePolicyFile { s: vec![(0.0, 0.9)], i: vec![(0.0, 0.9)], r: vec![(0.0, 0.9)] }
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let line = |span: std::ops::Range<usize>| Some(line_of(text, span.start));

    let variant = file.variant;
    let mut groups = Vec::with_capacity(file.groups.len());
    let mut initial = Vec::with_capacity(file.groups.len());
    for (index, sg) in file.groups.iter().enumerate() {
        let g = sg.get_ref();
        let kind = g.kind;
        groups.push(GroupSpec {
            id: GroupId { index, label: g.label.clone() },
            kind,
            proportion: *g.proportion.get_ref(),
            epi: EpidemicParams { beta: g.beta, gamma: g.gamma, eta: g.eta, kappa: g.kappa, rho: g.rho },
            cost: CostParams {
                c_lambda: g.c_lambda,
                c_nu: g.c_nu,
                c_infected: g.c_infected,
                xi_infected: g.xi_infected,
                death_cost: g.death_cost,
            },
        });
        let p0 = match &g.initial {
            None => [0.99, 0.01, 0.0, 0.0],
            Some(v) if v.len() == 3 || v.len() == 4 => [v[0], v[1], v[2], v.get(3).copied().unwrap_or(0.0)],
            Some(v) => {
                return Err(anchored(
                    format!("groups.{}.initial", g.label),
                    format!("expected 3 or 4 entries, found {}", v.len()),
                    line(sg.span()),
                ))
            }
        };
        initial.push(p0);
    }

    let contacts = ContactMatrix::new(file.contacts.get_ref().matrix.clone())
        .map_err(|e| anchored("contacts.matrix", e.to_string(), line(file.contacts.span())))?;

    let policy_file = file.policy.as_ref().map(|p| p.get_ref());
    let policy_line = file.policy.as_ref().and_then(|p| line(p.span()));
    let mut policy_groups = Vec::with_capacity(groups.len());
    if let Some(pf) = policy_file {
        if let Some(unknown) = pf.groups.keys().find(|k| !groups.iter().any(|g| &g.id.label == *k)) {
            return Err(anchored(format!("policy.groups.{unknown}"), "no group with this label", policy_line));
        }
    }
    for g in &groups {
        let sp = policy_file
            .and_then(|pf| pf.groups.get(&g.id.label).or(pf.default.as_ref()))
            .cloned()
            .unwrap_or_else(default_policy);
        policy_groups.push(GroupPolicy {
            s: Schedule::Piecewise(sp.s),
            i: Schedule::Piecewise(sp.i),
            r: Schedule::Piecewise(sp.r),
        });
    }
    let policy = PolicySchedule {
        lambda_bar: policy_file.and_then(|p| p.lambda_bar).unwrap_or(1.0),
        groups: policy_groups,
    };

    let mut solver = SolverConfig::default();
    if let Some(grid) = &file.grid {
        let g = grid.get_ref();
        solver.grid = TimeGrid::new(g.horizon, g.dt).map_err(|e| anchored("grid", e.to_string(), line(grid.span())))?;
    }
    if let Some(sf) = &file.solver {
        let s = sf.get_ref();
        solver.epsilon = s.epsilon.unwrap_or(solver.epsilon);
        solver.max_iters = s.max_iters.unwrap_or(solver.max_iters);
        solver.damping = s.damping.unwrap_or(solver.damping);
        solver.integrator = s.integrator.unwrap_or(solver.integrator);
        solver.patch_length = s.patch_length;
        solver.nu_cap = s.nu_cap.unwrap_or(solver.nu_cap);
    }

    let scenario = Scenario { name: file.name.clone(), variant, groups, contacts, policy, initial, solver };
    scenario.validate().map_err(|e| {
        let group_line = |label: &str| {
            file.groups.iter().find(|g| g.get_ref().label == label).and_then(|g| line(g.span()))
        };
        match e {
            Error::InvalidParameter { ref group, field, .. } => {
                anchored(format!("groups.{group}.{field}"), e.to_string(), group_line(group))
            }
            Error::Validation { key, reason, .. } => {
                let at = if key == "proportion" {
                    file.groups.first().and_then(|g| line(g.get_ref().proportion.span()))
                } else if key.starts_with("policy") {
                    policy_line
                } else if let Some(rest) = key.strip_prefix("groups.") {
                    group_line(rest.split('.').next().unwrap_or(rest))
                } else {
                    None
                };
                anchored(key, reason, at)
            }
            Error::DimensionMismatch { what, .. } if what.starts_with("contact") => {
                anchored("contacts.matrix", e.to_string(), line(file.contacts.span()))
            }
            Error::DimensionMismatch { what, .. } if what.starts_with("policy") => {
                anchored("policy", e.to_string(), policy_line)
            }
            Error::InvalidConfig(_) => {
                anchored("solver", e.to_string(), file.solver.as_ref().and_then(|s| line(s.span())))
            }
            other => other,
        }
    })?;
    Ok(scenario)
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Io { path: path.display().to_string(), message: e.to_string() })?;
    parse_scenario(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn breakpoints(s: &Schedule, key: &str) -> Result<Vec<(f64, f64)>> {
    match s {
        Schedule::Piecewise(points) => Ok(points.clone()),
        Schedule::Sampled { .. } => Err(anchored(key, "sampled schedules cannot be written to a scenario file", None)),
    }
}

fn nospan<T>(value: T) -> Spanned<T> {
    Spanned::new(0..0, value)
}

/// Renders a scenario as a TOML document that [`parse_scenario`] reads back
/// to an equal value.
pub fn scenario_to_toml(scenario: &Scenario) -> Result<String> {
    let cfg = &scenario.solver;
    let groups = scenario
        .groups
        .iter()
        .zip(&scenario.initial)
        .map(|(g, p0)| {
            let initial = if scenario.variant.has_deceased() { p0.to_vec() } else { p0[..3].to_vec() };
            nospan(GroupFile {
                label: g.id.label.clone(),
                kind: g.kind,
                proportion: nospan(g.proportion),
                beta: g.epi.beta,
                gamma: g.epi.gamma,
                eta: g.epi.eta,
                kappa: g.epi.kappa,
                rho: g.epi.rho,
                c_lambda: g.cost.c_lambda,
                c_nu: g.cost.c_nu,
                c_infected: g.cost.c_infected,
                xi_infected: g.cost.xi_infected,
                death_cost: g.cost.death_cost,
                initial: Some(initial),
            })
        })
        .collect();
    let mut policy_groups = BTreeMap::new();
    for (g, gp) in scenario.groups.iter().zip(&scenario.policy.groups) {
        let key = format!("policy.groups.{}", g.id.label);
        policy_groups.insert(
            g.id.label.clone(),
            StatePolicyFile { s: breakpoints(&gp.s, &key)?, i: breakpoints(&gp.i, &key)?, r: breakpoints(&gp.r, &key)? },
        );
    }
    let file = ScenarioFile {
        name: scenario.name.clone(),
        variant: scenario.variant,
        grid: Some(nospan(GridFile { horizon: cfg.grid.horizon, dt: cfg.grid.dt })),
        solver: Some(nospan(SolverFile {
            epsilon: Some(cfg.epsilon),
            max_iters: Some(cfg.max_iters),
            damping: Some(cfg.damping),
            integrator: Some(cfg.integrator),
            patch_length: cfg.patch_length,
            nu_cap: Some(cfg.nu_cap),
        })),
        groups,
        contacts: nospan(ContactsFile { matrix: scenario.contacts.rows() }),
        policy: Some(nospan(PolicyFile {
            lambda_bar: Some(scenario.policy.lambda_bar),
            default: None,
            groups: policy_groups,
        })),
    };
    toml::to_string(&file).map_err(|e| Error::Parse(e.to_string()))
}

pub fn save_scenario(scenario: &Scenario, path: &Path) -> Result<()> {
    let text = scenario_to_toml(scenario)?;
    fs::write(path, text).map_err(|e| Error::Io { path: path.display().to_string(), message: e.to_string() })
}
