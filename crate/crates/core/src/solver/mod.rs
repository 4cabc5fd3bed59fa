//! Damped fixed-point solver for the coupled forward/backward system.

mod patch;
mod sweep;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    AggregatePath, ControlPath, Controls, DistributionPath, GroupSpec, NodeField, PolicySchedule, StateVec,
    TimeGrid, ValuePath, Variant,
};
use crate::scenarios::Scenario;

pub use patch::solve_patched;
pub(crate) use sweep::{Problem, Window};

pub const DEFAULT_NU_CAP: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    #[serde(rename = "euler")]
    ExplicitEuler,
    Rk4,
}

impl fmt::Display for Integrator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Integrator::ExplicitEuler => "euler",
            Integrator::Rk4 => "rk4",
        })
    }
}

impl FromStr for Integrator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "euler" | "explicit-euler" | "expliciteuler" => Ok(Integrator::ExplicitEuler),
            "rk4" => Ok(Integrator::Rk4),
            other => Err(Error::InvalidConfig(format!("unknown integrator `{other}` (expected euler or rk4)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub grid: TimeGrid,
    pub epsilon: f64,
    pub max_iters: usize,
    pub damping: f64,
    pub integrator: Integrator,
    pub patch_length: Option<f64>,
    /// Upper bound `V` of the vaccination box.
    pub nu_cap: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            grid: TimeGrid::new(100.0, 0.1).expect("default grid"),
            epsilon: 1e-6,
            max_iters: 500,
            damping: 0.5,
            integrator: Integrator::ExplicitEuler,
            patch_length: None,
            nu_cap: DEFAULT_NU_CAP,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::InvalidConfig(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be >= 1".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidConfig(format!("damping must lie in (0, 1], got {}", self.damping)));
        }
        if !(self.nu_cap.is_finite() && self.nu_cap > 0.0) {
            return Err(Error::InvalidConfig(format!("nu_cap must be > 0, got {}", self.nu_cap)));
        }
        if let Some(tau) = self.patch_length {
            if !(tau > 0.0 && tau <= self.grid.horizon + 1e-9) {
                return Err(Error::InvalidConfig(format!(
                    "patch length must lie in (0, T={}], got {tau}",
                    self.grid.horizon
                )));
            }
            if tau < self.grid.dt - 1e-12 {
                return Err(Error::InvalidConfig(format!("patch length {tau} is shorter than dt")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EquilibriumSolution {
    pub labels: Vec<String>,
    pub variant: Variant,
    pub grid: TimeGrid,
    pub distributions: DistributionPath,
    pub values: ValuePath,
    pub controls: ControlPath,
    pub aggregates: AggregatePath,
    pub iterations: usize,
    /// `(p, u)` sup-norm change of every iteration, before damping.
    pub residual_history: Vec<(f64, f64)>,
    /// Number of (node, group) pairs where a control hit the box.
    pub clip_events: usize,
    pub converged: bool,
    /// Largest per-step deviation of a slice sum from 1 before renormalizing.
    pub max_drift: f64,
    pub nonconverged_patch: Option<usize>,
}

impl EquilibriumSolution {
    pub fn n_groups(&self) -> usize {
        self.labels.len()
    }

    pub fn group_index(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownGroup(label.to_string()))
    }

    pub fn final_residual(&self) -> (f64, f64) {
        self.residual_history.last().copied().unwrap_or((f64::NAN, f64::NAN))
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.grid.n_nodes()).map(|n| self.grid.time(n))
    }
}

/// Terminal condition of the value function: zero for the living states,
/// the death cost for the deceased one.
pub fn terminal_values_for(group: &GroupSpec, variant: Variant) -> StateVec {
    let d = if variant.has_deceased() { group.cost.death_cost } else { 0.0 };
    [0.0, 0.0, 0.0, d]
}

pub(crate) fn terminal_values(groups: &[GroupSpec], variant: Variant) -> Vec<StateVec> {
    groups.iter().map(|g| terminal_values_for(g, variant)).collect()
}

pub(crate) fn problem<'a>(scenario: &'a Scenario, config: &SolverConfig) -> Problem<'a> {
    Problem::new(
        &scenario.groups,
        &scenario.contacts,
        &scenario.policy,
        config.nu_cap,
        config.grid.dt,
        config.integrator,
    )
}

pub(crate) fn assemble(
    prob: &Problem<'_>,
    scenario: &Scenario,
    grid: TimeGrid,
    p: DistributionPath,
    u: ValuePath,
) -> EquilibriumSolution {
    let win = Window { t0: 0.0, n_steps: grid.n_steps, offset: 0 };
    let (z, c, clips) = prob.node_fields(win, &p, &u);
    EquilibriumSolution {
        labels: scenario.labels(),
        variant: scenario.variant,
        grid,
        distributions: p,
        values: u,
        controls: ControlPath { controls: c, cap: prob.cap },
        aggregates: z,
        iterations: 0,
        residual_history: Vec::new(),
        clip_events: clips,
        converged: false,
        max_drift: 0.0,
        nonconverged_patch: None,
    }
}

/// Solves the equilibrium on the whole horizon at once.
pub fn solve_fixed_point(scenario: &Scenario, config: &SolverConfig) -> Result<EquilibriumSolution> {
    scenario.validate()?;
    config.validate()?;
    let grid = config.grid;
    let prob = problem(scenario, config);
    let terminal = terminal_values(&scenario.groups, scenario.variant);
    let win = Window { t0: 0.0, n_steps: grid.n_steps, offset: 0 };
    let settings = sweep::IterSettings {
        epsilon: config.epsilon,
        max_iters: config.max_iters,
        damping: config.damping,
    };
    let out = sweep::iterate(&prob, win, &scenario.initial, &terminal, None, &settings)?;
    let mut sol = assemble(&prob, scenario, grid, out.p, out.u);
    sol.iterations = out.iterations;
    sol.residual_history = out.history;
    sol.converged = out.converged;
    sol.max_drift = out.drift;
    Ok(sol)
}

/// Solves with the scenario's own solver settings, patched when a patch
/// length shorter than the horizon is configured.
pub fn solve(scenario: &Scenario) -> Result<EquilibriumSolution> {
    solve_with(scenario, &scenario.solver)
}

pub fn solve_with(scenario: &Scenario, config: &SolverConfig) -> Result<EquilibriumSolution> {
    match config.patch_length {
        Some(tau) if tau < config.grid.horizon - 1e-9 => solve_patched(scenario, config),
        _ => solve_fixed_point(scenario, config),
    }
}

fn check_path_dims<T>(what: &'static str, field: &NodeField<T>, grid: &TimeGrid, k: usize) -> Result<()> {
    if field.n_nodes() != grid.n_nodes() {
        return Err(Error::DimensionMismatch { what, expected: grid.n_nodes(), found: field.n_nodes() });
    }
    if field.n_groups() != k {
        return Err(Error::DimensionMismatch { what, expected: k, found: field.n_groups() });
    }
    Ok(())
}

fn linear_midpoints<T: Copy>(field: &NodeField<T>, lerp: impl Fn(&T, &T) -> T) -> NodeField<T> {
    let n = field.n_nodes() - 1;
    let k = field.n_groups();
    let data = (0..n)
        .flat_map(|i| (0..k).map(move |g| (i, g)))
        .map(|(i, g)| lerp(field.get(i, g), field.get(i + 1, g)))
        .collect();
    NodeField::from_vec(n, k, data).expect("sized above")
}

fn lerp_controls(a: &Controls, b: &Controls) -> Controls {
    Controls {
        alpha_s: 0.5 * (a.alpha_s + b.alpha_s),
        alpha_i: 0.5 * (a.alpha_i + b.alpha_i),
        alpha_r: 0.5 * (a.alpha_r + b.alpha_r),
        nu: 0.5 * (a.nu + b.nu),
    }
}

fn check_variant(groups: &[GroupSpec], variant: Variant) -> Result<()> {
    for g in groups {
        g.validate(variant)?;
    }
    Ok(())
}

/// Integrates the distribution forward under given control and aggregate
/// paths. With RK4, midpoint inputs are linearly interpolated.
pub fn forward_sweep(
    controls: &ControlPath,
    aggregates: &AggregatePath,
    initial: &[StateVec],
    groups: &[GroupSpec],
    grid: &TimeGrid,
    variant: Variant,
    integrator: Integrator,
) -> Result<DistributionPath> {
    let k = groups.len();
    check_variant(groups, variant)?;
    check_path_dims("control path", &controls.controls, grid, k)?;
    check_path_dims("aggregate path", aggregates, grid, k)?;
    if initial.len() != k {
        return Err(Error::DimensionMismatch { what: "initial distribution", expected: k, found: initial.len() });
    }
    for p in initial {
        if p.iter().any(|v| *v < 0.0) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!("initial distribution {p:?} is not on the simplex")));
        }
    }
    let contacts = crate::model::ContactMatrix::uniform(k, 0.0)?;
    let policy = PolicySchedule::uniform(k, 1.0, 1.0, 1.0);
    let prob = Problem::new(groups, &contacts, &policy, controls.cap, grid.dt, integrator);
    let win = Window { t0: 0.0, n_steps: grid.n_steps, offset: 0 };
    let mid = match integrator {
        Integrator::Rk4 => Some((
            linear_midpoints(aggregates, |a, b| 0.5 * (a + b)),
            linear_midpoints(&controls.controls, lerp_controls),
        )),
        Integrator::ExplicitEuler => None,
    };
    let mut out = NodeField::filled(grid.n_nodes(), k, [0.0; 4]);
    prob.forward(win, initial, aggregates, &controls.controls, mid.as_ref().map(|(z, c)| (z, c)), &mut out)?;
    Ok(out)
}

/// Integrates the value function backward from its terminal condition under
/// a given aggregate path; returns the values and the best responses to
/// them.
#[allow(clippy::too_many_arguments)]
pub fn backward_sweep(
    aggregates: &AggregatePath,
    groups: &[GroupSpec],
    grid: &TimeGrid,
    policy: &PolicySchedule,
    variant: Variant,
    integrator: Integrator,
    nu_cap: f64,
) -> Result<(ValuePath, ControlPath)> {
    let k = groups.len();
    check_variant(groups, variant)?;
    check_path_dims("aggregate path", aggregates, grid, k)?;
    if policy.groups.len() != k {
        return Err(Error::DimensionMismatch { what: "policy groups", expected: k, found: policy.groups.len() });
    }
    if let Some(bad) = aggregates.as_slice().iter().find(|z| **z < 0.0) {
        return Err(Error::NegativeInput { name: "z", value: *bad });
    }
    let contacts = crate::model::ContactMatrix::uniform(k, 0.0)?;
    let prob = Problem::new(groups, &contacts, policy, nu_cap, grid.dt, integrator);
    let win = Window { t0: 0.0, n_steps: grid.n_steps, offset: 0 };
    let zmid = match integrator {
        Integrator::Rk4 => Some(linear_midpoints(aggregates, |a, b| 0.5 * (a + b))),
        Integrator::ExplicitEuler => None,
    };
    let terminal = terminal_values(groups, variant);
    let mut u = NodeField::filled(grid.n_nodes(), k, [0.0; 4]);
    prob.backward(win, &terminal, aggregates, zmid.as_ref(), &mut u)?;
    let mut c = NodeField::filled(grid.n_nodes(), k, Controls::default());
    for n in 0..grid.n_nodes() {
        prob.controls(u.node(n), aggregates.node(n), grid.time(n), c.node_mut(n));
    }
    Ok((u, ControlPath { controls: c, cap: nu_cap }))
}
