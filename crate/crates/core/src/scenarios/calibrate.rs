//! One-dimensional calibration of the horizon.

use crate::error::{Error, Result};
use crate::metrics::{group_disparity, Quantity};
use crate::model::TimeGrid;
use crate::solver::solve_with;

use super::Scenario;

#[derive(Clone, Debug, PartialEq)]
pub struct Calibration {
    pub horizon: f64,
    pub disparity: f64,
    pub target: f64,
    /// Every `(T, disparity)` evaluated, in search order.
    pub evaluations: Vec<(f64, f64)>,
}

impl Calibration {
    pub fn error(&self) -> f64 {
        self.disparity - self.target
    }
}

fn disparity_at(scenario: &Scenario, horizon: f64, k: &str, l: &str) -> Result<Option<f64>> {
    let mut s = scenario.clone();
    s.solver.grid = TimeGrid::new(horizon, s.solver.grid.dt)?;
    let sol = solve_with(&s, &s.solver)?;
    if !sol.converged {
        return Ok(None);
    }
    group_disparity(&sol, k, l, Quantity::InfectedProportion).map(Some)
}

/// Finds the horizon in `[lo, hi]` whose infected-proportion disparity
/// between groups `k` and `l` is closest to `target`.
///
/// A coarse scan with step `coarse` is refined on the grid step around the
/// best coarse point. Horizons are kept on multiples of the grid step.
pub fn calibrate_horizon(
    scenario: &Scenario,
    k: &str,
    l: &str,
    target: f64,
    (lo, hi): (f64, f64),
    coarse: f64,
) -> Result<Calibration> {
    let dt = scenario.solver.grid.dt;
    if !(lo > 0.0 && hi > lo && coarse >= dt) {
        return Err(Error::InvalidConfig(format!("bad calibration range [{lo}, {hi}] step {coarse}")));
    }
    let snap = |t: f64| (t / dt).round() * dt;
    let mut evaluations: Vec<(f64, f64)> = Vec::new();
    let mut best: Option<(f64, f64)> = None;
    let consider = |t: f64, evaluations: &mut Vec<(f64, f64)>, best: &mut Option<(f64, f64)>| -> Result<()> {
        if evaluations.iter().any(|(x, _)| (x - t).abs() < 0.5 * dt) {
            return Ok(());
        }
        if let Some(d) = disparity_at(scenario, t, k, l)? {
            evaluations.push((t, d));
            if best.is_none_or(|(_, bd)| (d - target).abs() < (bd - target).abs()) {
                *best = Some((t, d));
            }
        }
        Ok(())
    };
    let n = ((hi - lo) / coarse).floor() as usize;
    for i in 0..=n {
        consider(snap(lo + i as f64 * coarse), &mut evaluations, &mut best)?;
    }
    let (center, _) = best.ok_or_else(|| Error::InvalidConfig("no horizon in range converged".into()))?;
    let steps = (coarse / dt).round() as i64;
    for j in -steps..=steps {
        let t = snap(center + j as f64 * dt);
        if t >= lo && t <= hi {
            consider(t, &mut evaluations, &mut best)?;
        }
    }
    let (horizon, disparity) = best.expect("set above");
    Ok(Calibration { horizon, disparity, target, evaluations })
}
