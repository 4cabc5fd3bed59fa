//! Forward and backward integrators and the single fixed-point map.

use crate::error::{Error, Result};
use crate::model::{
    aggregate_into, best_response, infected_control, Controls, ContactMatrix, EpidemicParams, GroupSpec,
    GuidelineLevels, NodeField, PolicySchedule, StateVec, NUM_COMPARTMENTS,
};

use super::Integrator;

const P_BLOWUP: f64 = 2.0;
const U_BLOWUP: f64 = 1e9;

#[inline]
pub(crate) fn p_dot(epi: &EpidemicParams, p: &StateVec, c: &Controls, z: f64) -> StateVec {
    let inf = epi.beta * c.alpha_s * z * p[0];
    let vac = epi.kappa * c.nu * p[0];
    let wane = epi.eta * p[2];
    let rec = epi.gamma * p[1];
    [
        -inf - vac + wane,
        inf - rec,
        (1.0 - epi.rho) * rec + vac - wane,
        epi.rho * rec,
    ]
}

/// Right-hand side of the value equation with the controls recomputed from
/// `u` itself.
#[inline]
pub(crate) fn u_dot(group: &GroupSpec, guideline: GuidelineLevels, u: &StateVec, z: f64, cap: f64) -> StateVec {
    let epi = &group.epi;
    let cost = &group.cost;
    let anchors = group.anchors(guideline);
    let br = best_response(group, guideline, u, z, cap).controls;
    let a = br.alpha_s;
    let v = br.nu;
    [
        epi.beta * a * z * (u[0] - u[1]) + epi.kappa * v * (u[0] - u[2])
            - cost.c_lambda * (anchors.s - a).powi(2)
            - cost.c_nu * v * v,
        (1.0 - epi.rho) * epi.gamma * (u[1] - u[2]) + epi.rho * epi.gamma * (u[1] - u[3])
            - (anchors.i - br.alpha_i).powi(2)
            - cost.c_infected,
        epi.eta * (u[2] - u[0]) - (anchors.r - br.alpha_r).powi(2),
        0.0,
    ]
}

#[inline]
fn axpy(x: &StateVec, a: f64, y: &StateVec) -> StateVec {
    let mut out = *x;
    for i in 0..NUM_COMPARTMENTS {
        out[i] += a * y[i];
    }
    out
}

/// Everything a sweep needs that does not change between iterations.
pub(crate) struct Problem<'a> {
    pub groups: &'a [GroupSpec],
    pub contacts: &'a ContactMatrix,
    pub policy: &'a PolicySchedule,
    pub proportions: Vec<f64>,
    pub cap: f64,
    pub dt: f64,
    pub integrator: Integrator,
}

/// A contiguous run of grid steps starting at time `t0`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Window {
    pub t0: f64,
    pub n_steps: usize,
    /// Global index of the first node, for diagnostics.
    pub offset: usize,
}

impl Window {
    pub fn time(&self, node: usize, dt: f64) -> f64 {
        self.t0 + node as f64 * dt
    }
}

impl<'a> Problem<'a> {
    pub fn new(
        groups: &'a [GroupSpec],
        contacts: &'a ContactMatrix,
        policy: &'a PolicySchedule,
        cap: f64,
        dt: f64,
        integrator: Integrator,
    ) -> Self {
        Self {
            groups,
            contacts,
            policy,
            proportions: groups.iter().map(|g| g.proportion).collect(),
            cap,
            dt,
            integrator,
        }
    }

    pub fn k(&self) -> usize {
        self.groups.len()
    }

    #[inline]
    pub fn guideline(&self, k: usize, t: f64) -> GuidelineLevels {
        self.policy.levels(k, t)
    }

    pub fn aggregate(&self, p: &[StateVec], t: f64, out: &mut [f64]) {
        aggregate_into(
            |l| p[l][1],
            |l| infected_control(&self.groups[l], self.guideline(l, t)),
            self.contacts,
            &self.proportions,
            out,
        );
    }

    /// Best responses at one instant; returns the number of clipped groups.
    pub fn controls(&self, u: &[StateVec], z: &[f64], t: f64, out: &mut [Controls]) -> usize {
        let mut clipped = 0;
        for (k, slot) in out.iter_mut().enumerate() {
            let br = best_response(&self.groups[k], self.guideline(k, t), &u[k], z[k], self.cap);
            clipped += br.clipped() as usize;
            *slot = br.controls;
        }
        clipped
    }

    /// Aggregates and controls at every node of a window.
    pub fn node_fields(
        &self,
        win: Window,
        p: &NodeField<StateVec>,
        u: &NodeField<StateVec>,
    ) -> (NodeField<f64>, NodeField<Controls>, usize) {
        let k = self.k();
        let n_nodes = win.n_steps + 1;
        let mut z = NodeField::filled(n_nodes, k, 0.0);
        let mut c = NodeField::filled(n_nodes, k, Controls::default());
        let mut clips = 0;
        for n in 0..n_nodes {
            let t = win.time(n, self.dt);
            self.aggregate(p.node(n), t, z.node_mut(n));
            clips += self.controls(u.node(n), z.node(n), t, c.node_mut(n));
        }
        (z, c, clips)
    }

    /// Midpoint aggregates and controls from cubic Hermite interpolation of
    /// the previous iterate, with node slopes taken from the right-hand sides.
    fn midpoint_fields(
        &self,
        win: Window,
        p: &NodeField<StateVec>,
        u: &NodeField<StateVec>,
        z: &NodeField<f64>,
        c: &NodeField<Controls>,
    ) -> (NodeField<f64>, NodeField<Controls>) {
        let k = self.k();
        let dt = self.dt;
        let n_nodes = win.n_steps + 1;
        let mut pd = NodeField::filled(n_nodes, k, [0.0; NUM_COMPARTMENTS]);
        let mut ud = NodeField::filled(n_nodes, k, [0.0; NUM_COMPARTMENTS]);
        for n in 0..n_nodes {
            let t = win.time(n, dt);
            for g in 0..k {
                *pd.get_mut(n, g) = p_dot(&self.groups[g].epi, p.get(n, g), c.get(n, g), *z.get(n, g));
                *ud.get_mut(n, g) = u_dot(&self.groups[g], self.guideline(g, t), u.get(n, g), *z.get(n, g), self.cap);
            }
        }
        let hermite = |a: &StateVec, b: &StateVec, da: &StateVec, db: &StateVec| {
            let mut out = [0.0; NUM_COMPARTMENTS];
            for i in 0..NUM_COMPARTMENTS {
                out[i] = 0.5 * (a[i] + b[i]) + dt / 8.0 * (da[i] - db[i]);
            }
            out
        };
        let mut zm = NodeField::filled(win.n_steps, k, 0.0);
        let mut cm = NodeField::filled(win.n_steps, k, Controls::default());
        let mut pm = vec![[0.0; NUM_COMPARTMENTS]; k];
        let mut um = vec![[0.0; NUM_COMPARTMENTS]; k];
        for n in 0..win.n_steps {
            for g in 0..k {
                pm[g] = hermite(p.get(n, g), p.get(n + 1, g), pd.get(n, g), pd.get(n + 1, g));
                um[g] = hermite(u.get(n, g), u.get(n + 1, g), ud.get(n, g), ud.get(n + 1, g));
            }
            let t = win.time(n, dt) + 0.5 * dt;
            self.aggregate(&pm, t, zm.node_mut(n));
            self.controls(&um, zm.node(n), t, cm.node_mut(n));
        }
        (zm, cm)
    }

    /// Integrates the distribution forward under frozen controls and
    /// aggregates. Returns the largest pre-renormalization drift of any
    /// per-group slice.
    pub fn forward(
        &self,
        win: Window,
        initial: &[StateVec],
        z: &NodeField<f64>,
        c: &NodeField<Controls>,
        mid: Option<(&NodeField<f64>, &NodeField<Controls>)>,
        out: &mut NodeField<StateVec>,
    ) -> Result<f64> {
        let dt = self.dt;
        let mut drift: f64 = 0.0;
        out.node_mut(0).copy_from_slice(initial);
        for n in 0..win.n_steps {
            for g in 0..self.k() {
                let epi = &self.groups[g].epi;
                let p = *out.get(n, g);
                let k1 = p_dot(epi, &p, c.get(n, g), *z.get(n, g));
                let mut next = match (self.integrator, mid) {
                    (Integrator::Rk4, Some((zm, cm))) => {
                        let (cmid, zmid) = (cm.get(n, g), *zm.get(n, g));
                        let k2 = p_dot(epi, &axpy(&p, 0.5 * dt, &k1), cmid, zmid);
                        let k3 = p_dot(epi, &axpy(&p, 0.5 * dt, &k2), cmid, zmid);
                        let k4 = p_dot(epi, &axpy(&p, dt, &k3), c.get(n + 1, g), *z.get(n + 1, g));
                        let mut incr = [0.0; NUM_COMPARTMENTS];
                        for i in 0..NUM_COMPARTMENTS {
                            incr[i] = k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i];
                        }
                        axpy(&p, dt / 6.0, &incr)
                    }
                    _ => axpy(&p, dt, &k1),
                };
                let sum: f64 = next.iter().sum();
                if let Some(bad) = next.iter().find(|v| !v.is_finite() || v.abs() > P_BLOWUP) {
                    return Err(Error::BlowUp { sweep: "forward", node: win.offset + n + 1, group: g, value: bad.abs() });
                }
                drift = drift.max((sum - 1.0).abs());
                for v in next.iter_mut() {
                    *v /= sum;
                }
                *out.get_mut(n + 1, g) = next;
            }
        }
        Ok(drift)
    }

    /// Integrates the value function backward from `terminal`, recomputing
    /// the controls from the current `u` at every stage.
    pub fn backward(
        &self,
        win: Window,
        terminal: &[StateVec],
        z: &NodeField<f64>,
        zmid: Option<&NodeField<f64>>,
        out: &mut NodeField<StateVec>,
    ) -> Result<()> {
        let dt = self.dt;
        let last = win.n_steps;
        out.node_mut(last).copy_from_slice(terminal);
        for n in (0..last).rev() {
            let t1 = win.time(n + 1, dt);
            for g in 0..self.k() {
                let group = &self.groups[g];
                let u = *out.get(n + 1, g);
                let k1 = u_dot(group, self.guideline(g, t1), &u, *z.get(n + 1, g), self.cap);
                let prev = match (self.integrator, zmid) {
                    (Integrator::Rk4, Some(zm)) => {
                        let tm = t1 - 0.5 * dt;
                        let lm = self.guideline(g, tm);
                        let zz = *zm.get(n, g);
                        let k2 = u_dot(group, lm, &axpy(&u, -0.5 * dt, &k1), zz, self.cap);
                        let k3 = u_dot(group, lm, &axpy(&u, -0.5 * dt, &k2), zz, self.cap);
                        let k4 = u_dot(
                            group,
                            self.guideline(g, win.time(n, dt)),
                            &axpy(&u, -dt, &k3),
                            *z.get(n, g),
                            self.cap,
                        );
                        let mut incr = [0.0; NUM_COMPARTMENTS];
                        for i in 0..NUM_COMPARTMENTS {
                            incr[i] = k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i];
                        }
                        axpy(&u, -dt / 6.0, &incr)
                    }
                    _ => axpy(&u, -dt, &k1),
                };
                if let Some(bad) = prev.iter().find(|v| !v.is_finite() || v.abs() > U_BLOWUP) {
                    return Err(Error::BlowUp { sweep: "backward", node: win.offset + n, group: g, value: bad.abs() });
                }
                *out.get_mut(n, g) = prev;
            }
        }
        Ok(())
    }

    /// One application of the fixed-point map: aggregates and controls from
    /// the old iterate, then a forward and a backward sweep.
    #[allow(clippy::too_many_arguments)]
    pub fn sweep_once(
        &self,
        win: Window,
        initial: &[StateVec],
        terminal: &[StateVec],
        p_old: &NodeField<StateVec>,
        u_old: &NodeField<StateVec>,
        p_new: &mut NodeField<StateVec>,
        u_new: &mut NodeField<StateVec>,
    ) -> Result<f64> {
        let (z, c, _) = self.node_fields(win, p_old, u_old);
        let mid = match self.integrator {
            Integrator::Rk4 => Some(self.midpoint_fields(win, p_old, u_old, &z, &c)),
            Integrator::ExplicitEuler => None,
        };
        let drift = self.forward(win, initial, &z, &c, mid.as_ref().map(|(zm, cm)| (zm, cm)), p_new)?;
        self.backward(win, terminal, &z, mid.as_ref().map(|(zm, _)| zm), u_new)?;
        Ok(drift)
    }
}

pub(crate) struct IterOutcome {
    pub p: NodeField<StateVec>,
    pub u: NodeField<StateVec>,
    pub iterations: usize,
    pub history: Vec<(f64, f64)>,
    pub converged: bool,
    pub drift: f64,
}

pub(crate) struct IterSettings {
    pub epsilon: f64,
    pub max_iters: usize,
    pub damping: f64,
}

fn sup_diff(a: &NodeField<StateVec>, b: &NodeField<StateVec>) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}

fn damp(old: &mut NodeField<StateVec>, new: &NodeField<StateVec>, delta: f64) {
    if delta == 1.0 {
        old.as_mut_slice().copy_from_slice(new.as_slice());
        return;
    }
    for (o, n) in old.as_mut_slice().iter_mut().zip(new.as_slice()) {
        for i in 0..NUM_COMPARTMENTS {
            o[i] = (1.0 - delta) * o[i] + delta * n[i];
        }
    }
}

/// Damped fixed-point iteration on one window.
pub(crate) fn iterate(
    prob: &Problem<'_>,
    win: Window,
    initial: &[StateVec],
    terminal: &[StateVec],
    warm: Option<(NodeField<StateVec>, NodeField<StateVec>)>,
    settings: &IterSettings,
) -> Result<IterOutcome> {
    let n_nodes = win.n_steps + 1;
    let (mut p, mut u) = match warm {
        Some(w) => w,
        None => (NodeField::repeated(n_nodes, initial), NodeField::repeated(n_nodes, terminal)),
    };
    let mut p_new = p.clone();
    let mut u_new = u.clone();
    let mut history = Vec::new();
    let mut drift: f64 = 0.0;
    let mut converged = false;
    for _ in 0..settings.max_iters {
        drift = drift.max(prob.sweep_once(win, initial, terminal, &p, &u, &mut p_new, &mut u_new)?);
        let rp = sup_diff(&p_new, &p);
        let ru = sup_diff(&u_new, &u);
        history.push((rp, ru));
        damp(&mut p, &p_new, settings.damping);
        damp(&mut u, &u_new, settings.damping);
        if rp < settings.epsilon && ru < settings.epsilon {
            converged = true;
            break;
        }
    }
    Ok(IterOutcome { p, u, iterations: history.len(), history, converged, drift })
}

pub(crate) fn sup_change(a: &NodeField<StateVec>, b: &NodeField<StateVec>) -> f64 {
    sup_diff(a, b)
}
