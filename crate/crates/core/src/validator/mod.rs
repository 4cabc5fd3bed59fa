//! Independent checks of a computed equilibrium.

mod oracle;
mod simulate;
mod stationarity;

pub use oracle::{best_response_oracle, deviation_gain, policy_cost, ControlTarget, OracleResult, ORACLE_RESOLUTION};
pub use simulate::{largest_remainder, simulate_finite_n, SimReport, RNG_NAME};
pub use stationarity::{perturb_controls, stationarity_check, StationarityReport, FD_STEP, STATIONARITY_TOLERANCE};
