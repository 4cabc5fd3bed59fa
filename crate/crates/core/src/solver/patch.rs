//! Time patching: the horizon is cut into short windows that are solved one
//! at a time and stitched together.
//!
//! Each outer iteration runs a backward pass over the patches (terminal
//! values handed from the later patch) and then a forward pass (initial
//! distribution handed from the earlier patch). Every patch solve is an
//! ordinary damped fixed point, warm-started from the previous outer
//! iteration.

use crate::error::{Error, Result};
use crate::model::{NodeField, StateVec};
use crate::scenarios::Scenario;

use super::sweep::{iterate, sup_change, IterSettings, Window};
use super::{assemble, problem, solve_fixed_point, terminal_values, EquilibriumSolution, SolverConfig};

type Fields = (NodeField<StateVec>, NodeField<StateVec>);

fn stitch(sols: &[Option<Fields>], n_nodes: usize, k: usize) -> Fields {
    let mut p = NodeField::filled(n_nodes, k, [0.0; 4]);
    let mut u = NodeField::filled(n_nodes, k, [0.0; 4]);
    let mut at = 0;
    for (j, sol) in sols.iter().enumerate() {
        let (sp, su) = sol.as_ref().expect("every patch solved");
        let take = if j + 1 == sols.len() { sp.n_nodes() } else { sp.n_nodes() - 1 };
        for n in 0..take {
            p.node_mut(at + n).copy_from_slice(sp.node(n));
            u.node_mut(at + n).copy_from_slice(su.node(n));
        }
        at += take;
    }
    (p, u)
}

/// Solves the equilibrium patch by patch. With a patch length equal to the
/// horizon this is exactly [`solve_fixed_point`].
pub fn solve_patched(scenario: &Scenario, config: &SolverConfig) -> Result<EquilibriumSolution> {
    scenario.validate()?;
    config.validate()?;
    let tau = config
        .patch_length
        .ok_or_else(|| Error::InvalidConfig("patched solve needs a patch length".into()))?;
    let grid = config.grid;
    if tau >= grid.horizon - 1e-9 {
        return solve_fixed_point(scenario, config);
    }
    let len = ((tau / grid.dt).round() as usize).max(1);
    let windows: Vec<Window> = (0..grid.n_steps)
        .step_by(len)
        .map(|a| Window { t0: grid.time(a), n_steps: len.min(grid.n_steps - a), offset: a })
        .collect();
    let np = windows.len();
    let k = scenario.groups.len();
    let prob = problem(scenario, config);
    let terminal = terminal_values(&scenario.groups, scenario.variant);
    let inner = IterSettings {
        epsilon: 0.1 * config.epsilon,
        max_iters: config.max_iters,
        damping: config.damping,
    };

    let mut starts: Vec<Vec<StateVec>> = vec![scenario.initial.clone(); np];
    let mut ends: Vec<Vec<StateVec>> = vec![terminal.clone(); np];
    let mut sols: Vec<Option<Fields>> = vec![None; np];
    let mut prev: Option<Fields> = None;
    let mut history = Vec::new();
    let mut drift: f64 = 0.0;
    let mut failed_patch = None;
    let mut outer_converged = false;

    for _ in 0..config.max_iters {
        failed_patch = None;
        let mut solve_patch = |j: usize, sols: &mut Vec<Option<Fields>>, starts: &[Vec<StateVec>], ends: &[Vec<StateVec>]| {
            let out = iterate(&prob, windows[j], &starts[j], &ends[j], sols[j].take(), &inner)?;
            if !out.converged && failed_patch.is_none() {
                failed_patch = Some(j);
            }
            drift = drift.max(out.drift);
            sols[j] = Some((out.p, out.u));
            Ok::<_, Error>(())
        };
        for j in (0..np).rev() {
            solve_patch(j, &mut sols, &starts, &ends)?;
            if j > 0 {
                ends[j - 1] = sols[j].as_ref().expect("solved").1.node(0).to_vec();
            }
        }
        for j in 0..np {
            solve_patch(j, &mut sols, &starts, &ends)?;
            if j + 1 < np {
                let p = &sols[j].as_ref().expect("solved").0;
                starts[j + 1] = p.node(p.n_nodes() - 1).to_vec();
            }
        }
        let stitched = stitch(&sols, grid.n_nodes(), k);
        if let Some((pp, pu)) = &prev {
            let rp = sup_change(&stitched.0, pp);
            let ru = sup_change(&stitched.1, pu);
            history.push((rp, ru));
            if rp < config.epsilon && ru < config.epsilon {
                outer_converged = true;
                prev = Some(stitched);
                break;
            }
        }
        prev = Some(stitched);
    }

    let (p, u) = prev.expect("at least one outer iteration");
    // one undamped application of the global map measures the stitched
    // solution against the unpatched criterion
    let whole = Window { t0: 0.0, n_steps: grid.n_steps, offset: 0 };
    let mut gp = p.clone();
    let mut gu = u.clone();
    prob.sweep_once(whole, &scenario.initial, &terminal, &p, &u, &mut gp, &mut gu)?;
    let global = (sup_change(&gp, &p), sup_change(&gu, &u));

    let outer_iters = history.len() + 1;
    history.push(global);
    let mut sol = assemble(&prob, scenario, grid, p, u);
    sol.iterations = outer_iters;
    sol.residual_history = history;
    sol.max_drift = drift;
    sol.nonconverged_patch = failed_patch;
    sol.converged =
        outer_converged && failed_patch.is_none() && global.0 < config.epsilon && global.1 < config.epsilon;
    Ok(sol)
}
