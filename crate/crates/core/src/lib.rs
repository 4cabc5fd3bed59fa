//! Multi-population mean field game equilibria for SIR and SIRD epidemic
//! models with socialization and vaccination controls.
//!
//! ```no_run
//! use mfg_epi::{scenarios, solver};
//!
//! let scenario = scenarios::builtin("permissive").unwrap().into_single().unwrap();
//! let solution = solver::solve(&scenario).unwrap();
//! assert!(solution.converged);
//! ```

pub mod error;
pub mod metrics;
pub mod model;
pub mod scenarios;
pub mod solver;
pub mod validator;

pub use error::{Error, Result};
pub use model::{Compartment, GroupSpec, StateVec, TimeGrid, Variant};
pub use scenarios::{builtin, load_scenario, Builtin, Scenario, ScenarioPair};
pub use solver::{solve, solve_fixed_point, solve_patched, EquilibriumSolution, Integrator, SolverConfig};
