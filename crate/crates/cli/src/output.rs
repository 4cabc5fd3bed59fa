use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use mfg_epi::metrics::{largest_disparity, peak, peak_time_span_report, series, Quantity};
use mfg_epi::scenarios::scenario_to_toml;
use mfg_epi::{EquilibriumSolution, Scenario, SolverConfig};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

/// Fixed decimal rendering with 9 significant digits.
pub fn sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.8e}");
    let exp: i32 = sci.rsplit('e').next().and_then(|e| e.parse().ok()).unwrap_or(0);
    if (-20..=20).contains(&exp) {
        format!("{:.*}", (8 - exp).max(0) as usize, x)
    } else {
        sci
    }
}

pub const TRAJECTORY_HEADER: &str = "t,group,compartment,p,u,alpha_S,alpha_I,alpha_R,nu,Z";

pub fn trajectories_csv(sol: &EquilibriumSolution) -> String {
    let mut out = String::with_capacity(sol.grid.n_nodes() * sol.n_groups() * 4 * 90);
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for (k, label) in sol.labels.iter().enumerate() {
        for e in sol.variant.compartments() {
            let i = e.index();
            for n in 0..sol.grid.n_nodes() {
                let p = sol.distributions.get(n, k)[i].clamp(0.0, 1.0);
                let u = sol.values.get(n, k)[i];
                let c = sol.controls.controls.get(n, k);
                let z = *sol.aggregates.get(n, k);
                let _ = writeln!(
                    out,
                    "{},{label},{},{},{},{},{},{},{},{}",
                    sig9(sol.grid.time(n)),
                    e.label(),
                    sig9(p),
                    sig9(u),
                    sig9(c.alpha_s),
                    sig9(c.alpha_i),
                    sig9(c.alpha_r),
                    sig9(c.nu),
                    sig9(z),
                );
            }
        }
    }
    out
}

pub fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write(path, text)
}

/// Git-style content hash of the resolved scenario documents.
pub fn config_hash(scenarios: &[&Scenario]) -> Result<(String, Vec<String>)> {
    let docs: Vec<String> = scenarios.iter().map(|s| scenario_to_toml(s)).collect::<Result<_, _>>()?;
    let body = docs.join("\n");
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", body.len()).as_bytes());
    h.update(body.as_bytes());
    let hex: String = h.finalize().iter().map(|b| format!("{b:02x}")).collect();
    Ok((format!("sha256:{hex}"), docs))
}

pub fn solver_json(cfg: &SolverConfig) -> Value {
    json!({
        "horizon": cfg.grid.horizon,
        "dt": cfg.grid.dt,
        "n_steps": cfg.grid.n_steps,
        "epsilon": cfg.epsilon,
        "max_iters": cfg.max_iters,
        "damping": cfg.damping,
        "integrator": cfg.integrator.to_string(),
        "patch_length": cfg.patch_length,
        "nu_cap": cfg.nu_cap,
    })
}

pub fn diagnostics_json(sol: &EquilibriumSolution) -> Value {
    let (rp, ru) = sol.final_residual();
    json!({
        "converged": sol.converged,
        "iterations": sol.iterations,
        "final_residual": { "p": rp, "u": ru },
        "clip_events": sol.clip_events,
        "max_drift": sol.max_drift,
        "nonconverged_patch": sol.nonconverged_patch,
        "residual_history": sol.residual_history.iter().map(|(p, u)| [p, u]).collect::<Vec<_>>(),
    })
}

fn has(sol: &EquilibriumSolution, label: &str) -> bool {
    sol.labels.iter().any(|l| l == label)
}

/// Peaks, peak time spans and group disparities of one solution.
pub fn solution_metrics(sol: &EquilibriumSolution) -> Result<Value> {
    let mut peaks = serde_json::Map::new();
    let mut spans = serde_json::Map::new();
    let mut disparities = serde_json::Map::new();
    for q in Quantity::ALL {
        let rows: Vec<Value> = sol
            .labels
            .iter()
            .enumerate()
            .map(|(k, label)| {
                let (i, v) = peak(&series(sol, k, q), q);
                json!({ "group": label, "value": v, "time": i as f64 * sol.grid.dt })
            })
            .collect();
        peaks.insert(q.key().into(), Value::Array(rows));
        spans.insert(q.key().into(), serde_json::to_value(peak_time_span_report(sol, q))?);
        let (k, l, v) = largest_disparity(sol, q);
        let mut d = json!({ "largest": { "k": k, "l": l, "value": v } });
        if has(sol, "LI") && has(sol, "HF") {
            d["LI-HF"] = json!(mfg_epi::metrics::group_disparity(sol, "LI", "HF", q)?);
        }
        disparities.insert(q.key().into(), d);
    }
    Ok(json!({
        "peaks": peaks,
        "peak_time_spans": spans,
        "group_disparities": disparities,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(sig9(0.0), "0");
        assert_eq!(sig9(1.0), "1.00000000");
        assert_eq!(sig9(0.0123456789012), "0.0123456789");
        assert_eq!(sig9(80.0), "80.0000000");
        assert_eq!(sig9(-1.5e-3), "-0.00150000000");
        assert_eq!(sig9(99.99999999), "100.000000");
        assert_eq!(sig9(1e-30), "1.00000000e-30");
    }
}
