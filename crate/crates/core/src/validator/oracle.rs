//! Brute-force best responses and unilateral-deviation costs against frozen
//! aggregates, on the same time grid as the solver.

use crate::error::{Error, Result};
use crate::model::{hamiltonian, AggregatePath, Compartment, ControlPath, Controls, NodeField, StateVec};
use crate::scenarios::Scenario;
use crate::solver::{terminal_values_for, EquilibriumSolution};

pub const ORACLE_RESOLUTION: f64 = 0.005;

#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    pub controls: ControlPath,
    pub values: NodeField<StateVec>,
}

fn grid_points(hi: f64) -> impl Iterator<Item = f64> {
    let n = (hi / ORACLE_RESOLUTION).round() as usize;
    (0..=n).map(|i| i as f64 * ORACLE_RESOLUTION)
}

fn argmin(points: impl Iterator<Item = f64>, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut best = (f64::NAN, f64::INFINITY);
    for x in points {
        let v = f(x);
        if v < best.1 {
            best = (x, v);
        }
    }
    best
}

/// Best response of one group to frozen aggregates, by backward induction
/// on the grid with exhaustive search over controls at resolution 0.005.
///
/// The Hamiltonian of the susceptible state is a sum of a term in `alpha`
/// and a term in `nu`, so searching each coordinate over its own grid finds
/// the same minimizer as searching the product grid.
pub fn best_response_oracle(aggregates: &AggregatePath, group: usize, scenario: &Scenario) -> Result<OracleResult> {
    let grid = scenario.grid();
    let k = scenario.groups.len();
    if group >= k {
        return Err(Error::UnknownGroup(format!("#{group}")));
    }
    if aggregates.n_nodes() != grid.n_nodes() || aggregates.n_groups() != k {
        return Err(Error::DimensionMismatch {
            what: "aggregate path",
            expected: grid.n_nodes(),
            found: aggregates.n_nodes(),
        });
    }
    let g = &scenario.groups[group];
    let cap = scenario.solver.nu_cap;
    let dt = grid.dt;
    let mut values = NodeField::filled(grid.n_nodes(), 1, [0.0; 4]);
    let mut controls = NodeField::filled(grid.n_nodes(), 1, Controls::default());
    *values.get_mut(grid.n_steps, 0) = terminal_values_for(g, scenario.variant);

    for n in (0..=grid.n_steps).rev() {
        let t = grid.time(n);
        let u = *values.get(n, 0);
        let z = *aggregates.get(n, group);
        let anchors = g.anchors(scenario.policy.levels(group, t));
        let h = |e: Compartment, a: f64, v: f64| hamiltonian(g, anchors, e, &u, z, a, v);
        let (alpha_s, hs_a) = argmin(grid_points(1.0), |a| h(Compartment::S, a, 0.0));
        let (nu, _) = argmin(grid_points(cap), |v| h(Compartment::S, alpha_s, v));
        let hs = h(Compartment::S, alpha_s, nu);
        debug_assert!(hs <= hs_a + 1e-15);
        let (alpha_i, hi) = argmin(grid_points(1.0), |a| h(Compartment::I, a, 0.0));
        let (alpha_r, hr) = argmin(grid_points(1.0), |a| h(Compartment::R, a, 0.0));
        *controls.get_mut(n, 0) = Controls { alpha_s, alpha_i, alpha_r, nu };
        if n > 0 {
            *values.get_mut(n - 1, 0) = [u[0] + dt * hs, u[1] + dt * hi, u[2] + dt * hr, u[3]];
        }
    }
    Ok(OracleResult { controls: ControlPath { controls, cap }, values })
}

/// Expected discrete cost of one agent of `group` who plays `controls`
/// (one entry per node) while everybody else is frozen at `solution`.
pub fn policy_cost(solution: &EquilibriumSolution, scenario: &Scenario, group: usize, controls: &[Controls]) -> Result<f64> {
    let grid = solution.grid;
    if controls.len() != grid.n_nodes() {
        return Err(Error::DimensionMismatch { what: "control path", expected: grid.n_nodes(), found: controls.len() });
    }
    let g = &scenario.groups[group];
    let mut v = terminal_values_for(g, scenario.variant);
    for n in (0..grid.n_steps).rev() {
        let node = n + 1;
        let anchors = g.anchors(scenario.policy.levels(group, grid.time(node)));
        let z = *solution.aggregates.get(node, group);
        let c = &controls[node];
        let next = [
            v[0] + grid.dt * hamiltonian(g, anchors, Compartment::S, &v, z, c.alpha_s, c.nu),
            v[1] + grid.dt * hamiltonian(g, anchors, Compartment::I, &v, z, c.alpha_i, 0.0),
            v[2] + grid.dt * hamiltonian(g, anchors, Compartment::R, &v, z, c.alpha_r, 0.0),
            v[3],
        ];
        v = next;
    }
    let p0 = &scenario.initial[group];
    Ok(p0.iter().zip(&v).map(|(p, u)| p * u).sum())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ControlTarget {
    AlphaS,
    AlphaI,
    AlphaR,
    Nu,
}

impl ControlTarget {
    pub const ALL: [ControlTarget; 4] = [ControlTarget::AlphaS, ControlTarget::AlphaI, ControlTarget::AlphaR, ControlTarget::Nu];
}

/// Cost change of a unilateral deviation: one control of one group shifted
/// by `delta` on nodes `from..to` (kept inside the admissible box).
/// Negative values would contradict the equilibrium property.
#[allow(clippy::too_many_arguments)]
pub fn deviation_gain(
    solution: &EquilibriumSolution,
    scenario: &Scenario,
    group: usize,
    target: ControlTarget,
    delta: f64,
    from: usize,
    to: usize,
) -> Result<f64> {
    let base: Vec<Controls> = solution.controls.controls.column(group).copied().collect();
    let cap = solution.controls.cap;
    let mut dev = base.clone();
    for c in dev.iter_mut().take(to.min(base.len())).skip(from) {
        match target {
            ControlTarget::AlphaS => c.alpha_s = (c.alpha_s + delta).clamp(0.0, 1.0),
            ControlTarget::AlphaI => c.alpha_i = (c.alpha_i + delta).clamp(0.0, 1.0),
            ControlTarget::AlphaR => c.alpha_r = (c.alpha_r + delta).clamp(0.0, 1.0),
            ControlTarget::Nu => c.nu = (c.nu + delta).clamp(0.0, cap),
        }
    }
    Ok(policy_cost(solution, scenario, group, &dev)? - policy_cost(solution, scenario, group, &base)?)
}
