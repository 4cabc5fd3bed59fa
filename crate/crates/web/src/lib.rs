//! Browser bindings for the demo page in `www/`.
//!
//! Every exported function returns a JSON string; errors become a thrown
//! JS string.

use mfg_epi::metrics::{peak, peak_shift, series, Quantity};
use mfg_epi::model::Compartment;
use mfg_epi::scenarios::{catalog, Overrides};
use mfg_epi::validator::simulate_finite_n;
use mfg_epi::{builtin, solve, Builtin, EquilibriumSolution, Scenario};
use serde::Deserialize;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Points per curve sent to the page.
const PLOT_POINTS: usize = 250;

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Knobs {
    pub horizon: Option<f64>,
    pub dt: Option<f64>,
    /// Multiplies every group's transmission rate.
    pub beta_scale: Option<f64>,
    /// Multiplies every group's infection cost.
    pub infection_cost_scale: Option<f64>,
    /// Multiplies every group's vaccination cost.
    pub vaccination_cost_scale: Option<f64>,
}

impl Knobs {
    fn parse(text: &str) -> Result<Knobs, String> {
        if text.trim().is_empty() {
            return Ok(Knobs::default());
        }
        serde_json::from_str(text).map_err(|e| format!("bad settings: {e}"))
    }

    fn apply(&self, s: &mut Scenario) -> Result<(), String> {
        for g in &mut s.groups {
            g.epi.beta *= self.beta_scale.unwrap_or(1.0);
            g.cost.c_infected *= self.infection_cost_scale.unwrap_or(1.0);
            g.cost.c_nu *= self.vaccination_cost_scale.unwrap_or(1.0);
        }
        let o = Overrides { horizon: self.horizon, dt: self.dt, ..Overrides::default() };
        o.apply(s).map_err(|e| e.to_string())?;
        s.validate().map_err(|e| e.to_string())
    }
}

fn single(name: &str) -> Result<Scenario, String> {
    catalog::single(name).ok_or_else(|| format!("unknown scenario `{name}`"))
}

fn thin(sol: &EquilibriumSolution, f: impl Fn(usize) -> f64) -> Vec<[f64; 2]> {
    let n = sol.grid.n_nodes();
    let stride = n.div_ceil(PLOT_POINTS).max(1);
    let mut out: Vec<[f64; 2]> = (0..n).step_by(stride).map(|i| [sol.grid.time(i), f(i)]).collect();
    if (n - 1) % stride != 0 {
        out.push([sol.grid.time(n - 1), f(n - 1)]);
    }
    out
}

fn curves(sol: &EquilibriumSolution) -> Value {
    let groups: Vec<Value> = sol
        .labels
        .iter()
        .enumerate()
        .map(|(k, label)| {
            let p = |c: Compartment| thin(sol, |n| sol.distributions.get(n, k)[c.index()]);
            json!({
                "label": label,
                "S": p(Compartment::S),
                "I": p(Compartment::I),
                "R": p(Compartment::R),
                "alpha_S": thin(sol, |n| sol.controls.controls.get(n, k).alpha_s),
                "nu": thin(sol, |n| sol.controls.controls.get(n, k).nu),
            })
        })
        .collect();
    json!(groups)
}

fn peaks(sol: &EquilibriumSolution) -> Value {
    let mut out = serde_json::Map::new();
    for q in Quantity::ALL {
        let rows: Vec<Value> = (0..sol.n_groups())
            .map(|k| {
                let (i, v) = peak(&series(sol, k, q), q);
                json!({ "group": sol.labels[k], "value": v, "time": sol.grid.time(i) })
            })
            .collect();
        out.insert(q.key().into(), json!(rows));
    }
    Value::Object(out)
}

fn summary(sol: &EquilibriumSolution) -> Value {
    let (rp, ru) = sol.final_residual();
    json!({
        "converged": sol.converged,
        "iterations": sol.iterations,
        "residual": [rp, ru],
        "peaks": peaks(sol),
        "groups": curves(sol),
    })
}

/// Built-in single scenarios and comparisons.
pub fn catalog_json() -> Value {
    json!({
        "scenarios": catalog::SINGLES.iter().map(|(n, d)| json!({ "name": n, "description": d })).collect::<Vec<_>>(),
        "comparisons": catalog::PAIRS.iter().map(|(n, b, t)| json!({ "name": n, "baseline": b, "treatment": t })).collect::<Vec<_>>(),
    })
}

pub fn solve_json(name: &str, knobs: &str) -> Result<Value, String> {
    let mut s = single(name)?;
    Knobs::parse(knobs)?.apply(&mut s)?;
    let sol = solve(&s).map_err(|e| e.to_string())?;
    let mut v = summary(&sol);
    v["name"] = json!(s.name);
    Ok(v)
}

pub fn compare_json(name: &str, knobs: &str) -> Result<Value, String> {
    let knobs = Knobs::parse(knobs)?;
    let Builtin::Pair(mut pair) = builtin(name).map_err(|e| e.to_string())? else {
        return Err(format!("`{name}` is not a comparison pair"));
    };
    knobs.apply(&mut pair.baseline)?;
    knobs.apply(&mut pair.treatment)?;
    let base = solve(&pair.baseline).map_err(|e| e.to_string())?;
    let treat = solve(&pair.treatment).map_err(|e| e.to_string())?;
    let mut diffs = Vec::new();
    for q in Quantity::ALL {
        for (a, b) in &pair.group_map {
            let sa = series(&base, base.group_index(a).map_err(|e| e.to_string())?, q);
            let sb = series(&treat, treat.group_index(b).map_err(|e| e.to_string())?, q);
            diffs.push(json!({
                "quantity": q.key(),
                "group": a,
                "treatment_group": b,
                "signed": peak_shift(&sa, &sb, q).map_err(|e| e.to_string())?,
            }));
        }
    }
    Ok(json!({
        "name": pair.name,
        "baseline": { "name": pair.baseline.name, "result": summary(&base) },
        "treatment": { "name": pair.treatment.name, "result": summary(&treat) },
        "peak_differences": diffs,
    }))
}

pub fn simulate_json(name: &str, knobs: &str, agents: usize, replicas: usize, seed: u64) -> Result<Value, String> {
    let mut s = single(name)?;
    Knobs::parse(knobs)?.apply(&mut s)?;
    let sol = solve(&s).map_err(|e| e.to_string())?;
    let report = simulate_finite_n(&sol, &s, agents, replicas, seed).map_err(|e| e.to_string())?;
    let i = Compartment::I.index();
    let groups: Vec<Value> = sol
        .labels
        .iter()
        .enumerate()
        .map(|(k, label)| {
            json!({
                "label": label,
                "mean_field": thin(&sol, |n| sol.distributions.get(n, k)[i]),
                "simulated": thin(&sol, |n| report.mean.get(n, k)[i]),
            })
        })
        .collect();
    Ok(json!({
        "name": s.name,
        "agents": report.n_agents,
        "replicas": report.n_replicas,
        "seed": report.seed,
        "group_sizes": report.group_sizes,
        "sup_deviation": report.sup_deviation,
        "groups": groups,
    }))
}

fn out(r: Result<Value, String>) -> Result<String, JsValue> {
    r.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn scenarios() -> String {
    catalog_json().to_string()
}

/// Solve one built-in scenario. `knobs` is a JSON object (may be empty).
#[wasm_bindgen]
pub fn run_scenario(name: &str, knobs: &str) -> Result<String, JsValue> {
    out(solve_json(name, knobs))
}

#[wasm_bindgen]
pub fn compare_pair(name: &str, knobs: &str) -> Result<String, JsValue> {
    out(compare_json(name, knobs))
}

#[wasm_bindgen]
pub fn simulate(name: &str, knobs: &str, agents: usize, replicas: usize, seed: u32) -> Result<String, JsValue> {
    out(simulate_json(name, knobs, agents, replicas, seed as u64))
}
