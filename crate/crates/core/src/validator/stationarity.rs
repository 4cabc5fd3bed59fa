//! First-order conditions of the Hamiltonian at the stored controls.

use serde::Serialize;

use crate::model::{hamiltonian, Compartment, Controls};
use crate::scenarios::Scenario;
use crate::solver::EquilibriumSolution;

pub const FD_STEP: f64 = 1e-5;
pub const STATIONARITY_TOLERANCE: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StationarityReport {
    /// Largest |dH/dcontrol| over controls strictly inside their box.
    pub max_residual: f64,
    pub interior_checks: usize,
    pub boundary_checks: usize,
    /// Controls on the boundary whose derivative points into the box.
    pub boundary_violations: usize,
    /// `(node, group, control)` of the largest interior residual.
    pub worst: Option<(usize, String, &'static str)>,
}

impl StationarityReport {
    pub fn passed(&self, tolerance: f64) -> bool {
        self.max_residual < tolerance && self.boundary_violations == 0
    }
}

/// Central finite differences of the Hamiltonian with respect to each
/// control at every node and group.
///
/// Interior controls contribute to `max_residual`. A control sitting on the
/// boundary of its box is only checked for sign: at the lower end the
/// derivative must be nonnegative, at the upper end nonpositive.
pub fn stationarity_check(solution: &EquilibriumSolution, scenario: &Scenario) -> StationarityReport {
    let grid = solution.grid;
    let cap = solution.controls.cap;
    let mut report = StationarityReport {
        max_residual: 0.0,
        interior_checks: 0,
        boundary_checks: 0,
        boundary_violations: 0,
        worst: None,
    };
    let h = FD_STEP;
    for n in 0..grid.n_nodes() {
        let t = grid.time(n);
        for (k, g) in scenario.groups.iter().enumerate() {
            let anchors = g.anchors(scenario.policy.levels(k, t));
            let u = solution.values.get(n, k);
            let z = *solution.aggregates.get(n, k);
            let c: Controls = *solution.controls.controls.get(n, k);
            let ham = |e: Compartment, a: f64, v: f64| hamiltonian(g, anchors, e, u, z, a, v);
            let checks: [(&'static str, f64, f64, f64); 4] = [
                ("alpha_S", c.alpha_s, 1.0, (ham(Compartment::S, c.alpha_s + h, c.nu) - ham(Compartment::S, c.alpha_s - h, c.nu)) / (2.0 * h)),
                ("nu", c.nu, cap, (ham(Compartment::S, c.alpha_s, c.nu + h) - ham(Compartment::S, c.alpha_s, c.nu - h)) / (2.0 * h)),
                ("alpha_I", c.alpha_i, 1.0, (ham(Compartment::I, c.alpha_i + h, 0.0) - ham(Compartment::I, c.alpha_i - h, 0.0)) / (2.0 * h)),
                ("alpha_R", c.alpha_r, 1.0, (ham(Compartment::R, c.alpha_r + h, 0.0) - ham(Compartment::R, c.alpha_r - h, 0.0)) / (2.0 * h)),
            ];
            for (name, value, upper, deriv) in checks {
                if value <= 0.0 || value >= upper {
                    report.boundary_checks += 1;
                    let ok = if value <= 0.0 {
                        deriv >= -STATIONARITY_TOLERANCE
                    } else {
                        deriv <= STATIONARITY_TOLERANCE
                    };
                    if !ok {
                        report.boundary_violations += 1;
                    }
                } else {
                    report.interior_checks += 1;
                    if deriv.abs() > report.max_residual {
                        report.max_residual = deriv.abs();
                        report.worst = Some((n, g.id.label.clone(), name));
                    }
                }
            }
        }
    }
    report
}

/// Copy of `solution` with every susceptible socialization level shifted by
/// `delta` (clipped to [0, 1]). Used to check that the validator notices.
pub fn perturb_controls(solution: &EquilibriumSolution, delta: f64) -> EquilibriumSolution {
    let mut out = solution.clone();
    for c in out.controls.controls.as_mut_slice() {
        c.alpha_s = (c.alpha_s + delta).clamp(0.0, 1.0);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::catalog;
    use crate::solver::solve;

    #[test]
    fn converged_solution_is_stationary() {
        let s = catalog::single("permissive").unwrap();
        let sol = solve(&s).unwrap();
        let r = stationarity_check(&sol, &s);
        assert!(r.passed(STATIONARITY_TOLERANCE), "{r:?}");
        assert!(r.interior_checks > 0);
    }

    #[test]
    fn perturbed_controls_fail() {
        let s = catalog::single("permissive").unwrap();
        let sol = solve(&s).unwrap();
        let r = stationarity_check(&perturb_controls(&sol, 0.1), &s);
        assert!(r.max_residual > 0.01);
        assert!(!r.passed(STATIONARITY_TOLERANCE));
    }

    #[test]
    fn clipped_controls_get_sign_checks() {
        let mut s = catalog::single("permissive").unwrap();
        for g in &mut s.groups {
            g.epi.beta *= 5.0;
            g.cost.c_infected *= 20.0;
        }
        s.solver.patch_length = Some(10.0);
        s.solver.damping = 1.0;
        let sol = solve(&s).unwrap();
        assert!(sol.converged);
        assert!(sol.clip_events > 0);
        let r = stationarity_check(&sol, &s);
        assert!(r.boundary_checks > 0);
        assert_eq!(r.boundary_violations, 0);
        assert!(r.passed(STATIONARITY_TOLERANCE), "{r:?}");
    }
}
