//! Scenario definitions: the built-in catalog and the TOML file format.

mod calibrate;
pub mod catalog;
mod config;

use std::collections::HashSet;
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::Quantity;
use crate::model::{ContactMatrix, GroupSpec, PolicySchedule, StateVec, TimeGrid, Variant};
use crate::solver::{Integrator, SolverConfig};

pub use calibrate::{calibrate_horizon, Calibration};
pub use catalog::builtin;
pub use config::{load_scenario, parse_scenario, save_scenario, scenario_to_toml};

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub variant: Variant,
    pub groups: Vec<GroupSpec>,
    pub contacts: ContactMatrix,
    pub policy: PolicySchedule,
    /// Initial distribution per group, `S, I, R, D` order.
    pub initial: Vec<StateVec>,
    pub solver: SolverConfig,
}

impl Scenario {
    pub fn grid(&self) -> TimeGrid {
        self.solver.grid
    }

    pub fn labels(&self) -> Vec<String> {
        self.groups.iter().map(|g| g.id.label.clone()).collect()
    }

    pub fn group_index(&self, label: &str) -> Result<usize> {
        self.groups
            .iter()
            .position(|g| g.id.label == label)
            .ok_or_else(|| Error::UnknownGroup(label.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.groups.len();
        if k == 0 {
            return Err(Error::Validation { key: "groups".into(), reason: "at least one group is required".into(), line: None });
        }
        let mut seen = HashSet::new();
        for (i, g) in self.groups.iter().enumerate() {
            if g.id.index != i {
                return Err(Error::param(&g.id.label, "index", format!("expected {i}, found {}", g.id.index)));
            }
            if !seen.insert(g.id.label.as_str()) {
                return Err(Error::param(&g.id.label, "label", "duplicate group label"));
            }
            g.validate(self.variant)?;
        }
        let total: f64 = self.groups.iter().map(|g| g.proportion).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Validation {
                key: "proportion".into(),
                reason: format!("group proportions sum to {total}, expected 1"),
                line: None,
            });
        }
        if self.contacts.size() != k {
            return Err(Error::DimensionMismatch { what: "contact matrix", expected: k, found: self.contacts.size() });
        }
        let labels: Vec<&str> = self.groups.iter().map(|g| g.id.label.as_str()).collect();
        self.policy.validate(&labels)?;
        if self.initial.len() != k {
            return Err(Error::DimensionMismatch { what: "initial distributions", expected: k, found: self.initial.len() });
        }
        for (g, p) in self.groups.iter().zip(&self.initial) {
            let bad = |reason: String| Error::Validation { key: format!("groups.{}.initial", g.id.label), reason, line: None };
            if p.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(bad(format!("entries must lie in [0, 1], got {p:?}")));
            }
            if (p.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                return Err(bad(format!("entries must sum to 1, got {p:?}")));
            }
            if !self.variant.has_deceased() && p[3] != 0.0 {
                return Err(bad("SIR scenarios have no deceased compartment".into()));
            }
        }
        self.solver.validate()
    }
}

/// Two scenarios compared on the same grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioPair {
    pub name: String,
    pub baseline: Scenario,
    pub treatment: Scenario,
    pub quantities: Vec<Quantity>,
    /// `(baseline label, treatment label)` pairs to compare.
    pub group_map: Vec<(String, String)>,
}

impl ScenarioPair {
    pub fn validate(&self) -> Result<()> {
        self.baseline.validate()?;
        self.treatment.validate()?;
        let (a, b) = (self.baseline.grid(), self.treatment.grid());
        if a != b {
            return Err(Error::GridMismatch { left: a.n_nodes(), right: b.n_nodes() });
        }
        for (l, r) in &self.group_map {
            self.baseline.group_index(l)?;
            self.treatment.group_index(r)?;
        }
        Ok(())
    }
}

/// Several scenarios compared jointly (peak sizes and times).
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSet {
    pub name: String,
    pub members: Vec<Scenario>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Builtin {
    Single(Scenario),
    Pair(ScenarioPair),
    Set(ScenarioSet),
}

impl Builtin {
    pub fn name(&self) -> &str {
        match self {
            Builtin::Single(s) => &s.name,
            Builtin::Pair(p) => &p.name,
            Builtin::Set(s) => &s.name,
        }
    }

    pub fn into_single(self) -> Result<Scenario> {
        match self {
            Builtin::Single(s) => Ok(s),
            other => Err(Error::InvalidConfig(format!("`{}` is a comparison, not a single scenario", other.name()))),
        }
    }

    pub fn scenarios_mut(&mut self) -> Vec<&mut Scenario> {
        match self {
            Builtin::Single(s) => vec![s],
            Builtin::Pair(p) => vec![&mut p.baseline, &mut p.treatment],
            Builtin::Set(s) => s.members.iter_mut().collect(),
        }
    }
}

/// Resolves a catalog name, or a path to a scenario file.
pub fn resolve(reference: &str) -> Result<Builtin> {
    match builtin(reference) {
        Ok(b) => Ok(b),
        Err(e) => {
            let path = Path::new(reference);
            if path.exists() {
                load_scenario(path).map(Builtin::Single)
            } else {
                Err(e)
            }
        }
    }
}

/// Command-line style overrides of the solver settings.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub horizon: Option<f64>,
    pub dt: Option<f64>,
    pub epsilon: Option<f64>,
    pub damping: Option<f64>,
    pub max_iters: Option<usize>,
    pub integrator: Option<Integrator>,
    pub patch_length: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, scenario: &mut Scenario) -> Result<()> {
        let cfg = &mut scenario.solver;
        let horizon = self.horizon.unwrap_or(cfg.grid.horizon);
        let dt = self.dt.unwrap_or(cfg.grid.dt);
        cfg.grid = TimeGrid::new(horizon, dt)?;
        if let Some(v) = self.epsilon {
            cfg.epsilon = v;
        }
        if let Some(v) = self.damping {
            cfg.damping = v;
        }
        if let Some(v) = self.max_iters {
            cfg.max_iters = v;
        }
        if let Some(v) = self.integrator {
            cfg.integrator = v;
        }
        if self.patch_length.is_some() {
            cfg.patch_length = self.patch_length;
        }
        cfg.validate()
    }
}

#[cfg(test)]
mod tests;
