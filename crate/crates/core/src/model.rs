//! Domain types and the pointwise pieces of the epidemic game.
//!
//! Every group is described by a [`GroupSpec`]; the population interacts only
//! through the infected-pressure aggregate `Z`, so everything in this module
//! is a pure function of its arguments. SIR is handled as SIRD with zero
//! mortality, which keeps a single state layout of four compartments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_COMPARTMENTS: usize = 4;

/// Per-compartment values in `S, I, R, D` order.
pub type StateVec = [f64; NUM_COMPARTMENTS];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Compartment {
    S,
    I,
    R,
    D,
}

impl Compartment {
    pub const ALL: [Compartment; NUM_COMPARTMENTS] =
        [Compartment::S, Compartment::I, Compartment::R, Compartment::D];

    pub const fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Compartment::S => "S",
            Compartment::I => "I",
            Compartment::R => "R",
            Compartment::D => "D",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "SIR")]
    Sir,
    #[serde(rename = "SIRD")]
    Sird,
}

impl Variant {
    pub fn compartments(self) -> &'static [Compartment] {
        match self {
            Variant::Sir => &Compartment::ALL[..3],
            Variant::Sird => &Compartment::ALL,
        }
    }

    pub fn has_deceased(self) -> bool {
        matches!(self, Variant::Sird)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AuthorityKind {
    Follower,
    Indifferent,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GroupId {
    pub index: usize,
    pub label: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpidemicParams {
    pub beta: f64,
    pub gamma: f64,
    pub eta: f64,
    pub kappa: f64,
    /// Share of recoveries that end in death; zero for SIR.
    pub rho: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    pub c_lambda: f64,
    pub c_nu: f64,
    pub c_infected: f64,
    /// Intrinsic socialization when infected. Indifferent groups only.
    pub xi_infected: Option<f64>,
    /// Terminal cost of ending the horizon deceased.
    pub death_cost: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub id: GroupId,
    pub kind: AuthorityKind,
    pub proportion: f64,
    pub epi: EpidemicParams,
    pub cost: CostParams,
}

/// Guideline (or intrinsic) socialization levels for the three living states.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GuidelineLevels {
    pub s: f64,
    pub i: f64,
    pub r: f64,
}

impl GroupSpec {
    pub fn label(&self) -> &str {
        &self.id.label
    }

    /// Levels the group's running cost is anchored to: the guideline for
    /// followers, full socialization (and `xi_infected` when sick) for
    /// indifferents.
    pub fn anchors(&self, guideline: GuidelineLevels) -> GuidelineLevels {
        match self.kind {
            AuthorityKind::Follower => guideline,
            AuthorityKind::Indifferent => GuidelineLevels {
                s: 1.0,
                i: self.cost.xi_infected.unwrap_or(1.0),
                r: 1.0,
            },
        }
    }

    pub fn validate(&self, variant: Variant) -> Result<()> {
        let g = self.label();
        let epi = &self.epi;
        let cost = &self.cost;
        let finite_nonneg = |field: &'static str, v: f64| {
            if !v.is_finite() || v < 0.0 {
                Err(Error::param(g, field, format!("must be finite and >= 0, got {v}")))
            } else {
                Ok(())
            }
        };
        if !(self.proportion > 0.0 && self.proportion <= 1.0) {
            return Err(Error::param(g, "proportion", format!("must lie in (0, 1], got {}", self.proportion)));
        }
        finite_nonneg("beta", epi.beta)?;
        finite_nonneg("eta", epi.eta)?;
        finite_nonneg("kappa", epi.kappa)?;
        if !(epi.gamma.is_finite() && epi.gamma > 0.0) {
            return Err(Error::param(g, "gamma", format!("must be > 0, got {}", epi.gamma)));
        }
        if !(0.0..=1.0).contains(&epi.rho) {
            return Err(Error::param(g, "rho", format!("must lie in [0, 1], got {}", epi.rho)));
        }
        for (field, v) in [("c_lambda", cost.c_lambda), ("c_nu", cost.c_nu)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(g, field, format!("must be > 0, got {v}")));
            }
        }
        finite_nonneg("c_infected", cost.c_infected)?;
        finite_nonneg("death_cost", cost.death_cost)?;
        match (self.kind, cost.xi_infected) {
            (AuthorityKind::Indifferent, Some(xi)) if (0.0..=1.0).contains(&xi) => {}
            (AuthorityKind::Indifferent, Some(xi)) => {
                return Err(Error::param(g, "xi_infected", format!("must lie in [0, 1], got {xi}")))
            }
            (AuthorityKind::Indifferent, None) => {
                return Err(Error::param(g, "xi_infected", "required for indifferent groups"))
            }
            (AuthorityKind::Follower, Some(_)) => {
                return Err(Error::param(g, "xi_infected", "only defined for indifferent groups"))
            }
            (AuthorityKind::Follower, None) => {}
        }
        if variant == Variant::Sir && (epi.rho != 0.0 || cost.death_cost != 0.0) {
            return Err(Error::param(g, "rho", "SIR scenarios require rho = 0 and death_cost = 0"));
        }
        Ok(())
    }
}

/// Dense `K x K` matrix of connection strengths `w(k, l)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ContactMatrix {
    size: usize,
    w: Vec<f64>,
}

impl ContactMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let size = rows.len();
        if size == 0 {
            return Err(Error::DimensionMismatch { what: "contact matrix", expected: 1, found: 0 });
        }
        let mut w = Vec::with_capacity(size * size);
        for row in &rows {
            if row.len() != size {
                return Err(Error::DimensionMismatch {
                    what: "contact matrix row",
                    expected: size,
                    found: row.len(),
                });
            }
            for &v in row {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::Validation {
                        key: "contacts".into(),
                        reason: format!("connection strength {v} outside [0, 1]"),
                        line: None,
                    });
                }
            }
            w.extend_from_slice(row);
        }
        Ok(Self { size, w })
    }

    pub fn uniform(size: usize, value: f64) -> Result<Self> {
        Self::new(vec![vec![value; size]; size])
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.w[k * self.size + l]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.w.chunks(self.size).map(<[f64]>::to_vec).collect()
    }
}

/// A scalar guideline over time.
///
/// `Piecewise` holds `(start_time, value)` breakpoints, each value holding
/// until the next breakpoint. `Sampled` is linearly interpolated between
/// equally spaced samples and clamped at both ends.
#[derive(Clone, Debug, PartialEq)]
pub enum Schedule {
    Piecewise(Vec<(f64, f64)>),
    Sampled { dt: f64, values: Vec<f64> },
}

impl Schedule {
    pub fn constant(value: f64) -> Self {
        Schedule::Piecewise(vec![(0.0, value)])
    }

    pub fn value_at(&self, t: f64) -> f64 {
        match self {
            Schedule::Piecewise(points) => {
                let mut value = points[0].1;
                for &(start, v) in points.iter().skip(1) {
                    if t >= start {
                        value = v;
                    } else {
                        break;
                    }
                }
                value
            }
            Schedule::Sampled { dt, values } => {
                let x = (t / dt).max(0.0);
                let i = x.floor() as usize;
                if i + 1 >= values.len() {
                    return *values.last().expect("validated non-empty");
                }
                let frac = x - i as f64;
                values[i] + frac * (values[i + 1] - values[i])
            }
        }
    }

    fn values(&self) -> Box<dyn Iterator<Item = f64> + '_> {
        match self {
            Schedule::Piecewise(points) => Box::new(points.iter().map(|p| p.1)),
            Schedule::Sampled { values, .. } => Box::new(values.iter().copied()),
        }
    }

    pub fn validate(&self, lambda_bar: f64, key: &str) -> Result<()> {
        let bad = |reason: String| Error::Validation { key: key.to_string(), reason, line: None };
        match self {
            Schedule::Piecewise(points) => {
                if points.is_empty() {
                    return Err(bad("schedule needs at least one breakpoint".into()));
                }
                if points[0].0 > 0.0 {
                    return Err(bad("first breakpoint must start at t <= 0".into()));
                }
                if points.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(bad("breakpoint times must be strictly increasing".into()));
                }
            }
            Schedule::Sampled { dt, values } => {
                if values.is_empty() || !(*dt > 0.0) {
                    return Err(bad("sampled schedule needs dt > 0 and at least one value".into()));
                }
            }
        }
        if let Some(v) = self.values().find(|v| !(0.0..=lambda_bar).contains(v)) {
            return Err(bad(format!("guideline level {v} outside [0, {lambda_bar}]")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroupPolicy {
    pub s: Schedule,
    pub i: Schedule,
    pub r: Schedule,
}

impl GroupPolicy {
    pub fn constant(s: f64, i: f64, r: f64) -> Self {
        Self { s: Schedule::constant(s), i: Schedule::constant(i), r: Schedule::constant(r) }
    }
}

/// Social distancing guidelines `lambda(t, k, e)`, one entry per group.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicySchedule {
    pub lambda_bar: f64,
    pub groups: Vec<GroupPolicy>,
}

impl PolicySchedule {
    pub fn uniform(n_groups: usize, s: f64, i: f64, r: f64) -> Self {
        Self { lambda_bar: 1.0, groups: vec![GroupPolicy::constant(s, i, r); n_groups] }
    }

    #[inline]
    pub fn levels(&self, k: usize, t: f64) -> GuidelineLevels {
        let g = &self.groups[k];
        GuidelineLevels { s: g.s.value_at(t), i: g.i.value_at(t), r: g.r.value_at(t) }
    }

    pub fn validate(&self, labels: &[&str]) -> Result<()> {
        if self.groups.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                what: "policy groups",
                expected: labels.len(),
                found: self.groups.len(),
            });
        }
        if !(self.lambda_bar.is_finite() && self.lambda_bar > 0.0) {
            return Err(Error::Validation {
                key: "lambda_bar".into(),
                reason: format!("must be > 0, got {}", self.lambda_bar),
                line: None,
            });
        }
        for (g, label) in self.groups.iter().zip(labels) {
            g.s.validate(self.lambda_bar, &format!("policy.{label}.S"))?;
            g.i.validate(self.lambda_bar, &format!("policy.{label}.I"))?;
            g.r.validate(self.lambda_bar, &format!("policy.{label}.R"))?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    pub horizon: f64,
    pub dt: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, dt: f64) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0 && dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidGrid(format!("need T > 0 and dt > 0, got T={horizon}, dt={dt}")));
        }
        let n_steps = (horizon / dt).round() as usize;
        if n_steps == 0 || (n_steps as f64 * dt - horizon).abs() > 1e-9 {
            return Err(Error::InvalidGrid(format!("T={horizon} is not a whole number of steps dt={dt}")));
        }
        Ok(Self { horizon, dt, n_steps })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_steps + 1
    }

    #[inline]
    pub fn time(&self, node: usize) -> f64 {
        node as f64 * self.dt
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Controls {
    pub alpha_s: f64,
    pub alpha_i: f64,
    pub alpha_r: f64,
    pub nu: f64,
}

impl Controls {
    pub fn alpha(&self, compartment: Compartment) -> Option<f64> {
        match compartment {
            Compartment::S => Some(self.alpha_s),
            Compartment::I => Some(self.alpha_i),
            Compartment::R => Some(self.alpha_r),
            Compartment::D => None,
        }
    }
}

/// Values laid out per time node, then per group.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeField<T> {
    n_nodes: usize,
    n_groups: usize,
    data: Vec<T>,
}

impl<T: Clone> NodeField<T> {
    pub fn filled(n_nodes: usize, n_groups: usize, value: T) -> Self {
        Self { n_nodes, n_groups, data: vec![value; n_nodes * n_groups] }
    }

    /// Repeats one per-group slice at every node.
    pub fn repeated(n_nodes: usize, slice: &[T]) -> Self {
        let mut data = Vec::with_capacity(n_nodes * slice.len());
        for _ in 0..n_nodes {
            data.extend_from_slice(slice);
        }
        Self { n_nodes, n_groups: slice.len(), data }
    }
}

impl<T> NodeField<T> {
    pub fn from_vec(n_nodes: usize, n_groups: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != n_nodes * n_groups {
            return Err(Error::DimensionMismatch {
                what: "node field",
                expected: n_nodes * n_groups,
                found: data.len(),
            });
        }
        Ok(Self { n_nodes, n_groups, data })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_groups(&self) -> usize {
        self.n_groups
    }

    #[inline]
    pub fn get(&self, node: usize, group: usize) -> &T {
        &self.data[node * self.n_groups + group]
    }

    #[inline]
    pub fn get_mut(&mut self, node: usize, group: usize) -> &mut T {
        &mut self.data[node * self.n_groups + group]
    }

    pub fn node(&self, node: usize) -> &[T] {
        &self.data[node * self.n_groups..(node + 1) * self.n_groups]
    }

    pub fn node_mut(&mut self, node: usize) -> &mut [T] {
        &mut self.data[node * self.n_groups..(node + 1) * self.n_groups]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn column(&self, group: usize) -> impl Iterator<Item = &T> + '_ {
        (0..self.n_nodes).map(move |n| self.get(n, group))
    }
}

pub type DistributionPath = NodeField<StateVec>;
pub type ValuePath = NodeField<StateVec>;
pub type AggregatePath = NodeField<f64>;

#[derive(Clone, Debug, PartialEq)]
pub struct ControlPath {
    pub controls: NodeField<Controls>,
    /// Upper end of the admissible vaccination interval `[0, V]`.
    pub cap: f64,
}

/// Closed-form best response plus whether the box constraint was active.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BestResponse {
    pub controls: Controls,
    pub clipped_alpha: bool,
    pub clipped_nu: bool,
}

impl BestResponse {
    pub fn clipped(&self) -> bool {
        self.clipped_alpha || self.clipped_nu
    }
}

/// Off-diagonal outflow rates from `compartment`, diagonal set to minus the
/// row sum. No validation.
#[inline]
pub(crate) fn rate_row(epi: &EpidemicParams, compartment: Compartment, alpha_s: f64, nu: f64, z: f64) -> StateVec {
    let mut row = [0.0; NUM_COMPARTMENTS];
    match compartment {
        Compartment::S => {
            row[1] = epi.beta * alpha_s * z;
            row[2] = epi.kappa * nu;
            row[0] = -(row[1] + row[2]);
        }
        Compartment::I => {
            row[2] = (1.0 - epi.rho) * epi.gamma;
            row[3] = epi.rho * epi.gamma;
            row[1] = -(row[2] + row[3]);
        }
        Compartment::R => {
            row[0] = epi.eta;
            row[2] = -epi.eta;
        }
        Compartment::D => {}
    }
    row
}

/// Transition-rate row of the controlled chain for a living compartment.
pub fn transition_rates(
    group: &GroupSpec,
    compartment: Compartment,
    alpha: f64,
    nu: f64,
    z: f64,
    variant: Variant,
) -> Result<StateVec> {
    if compartment == Compartment::D {
        return Err(Error::DeceasedControl);
    }
    for (name, value) in [("alpha", alpha), ("nu", nu), ("z", z)] {
        if value < 0.0 || value.is_nan() {
            return Err(Error::NegativeInput { name, value });
        }
    }
    if alpha > 1.0 {
        return Err(Error::InvalidConfig(format!("socialization level {alpha} above 1")));
    }
    let mut epi = group.epi;
    if variant == Variant::Sir {
        epi.rho = 0.0;
    }
    Ok(rate_row(&epi, compartment, alpha, nu, z))
}

#[inline]
pub(crate) fn running_cost_at(
    group: &GroupSpec,
    anchors: GuidelineLevels,
    compartment: Compartment,
    alpha: f64,
    nu: f64,
) -> f64 {
    let c = &group.cost;
    match compartment {
        Compartment::S => c.c_lambda * (anchors.s - alpha).powi(2) + c.c_nu * nu * nu,
        Compartment::I => (anchors.i - alpha).powi(2) + c.c_infected,
        Compartment::R => (anchors.r - alpha).powi(2),
        Compartment::D => 0.0,
    }
}

/// Instantaneous cost rate of a representative agent of `group`.
pub fn running_cost(
    group: &GroupSpec,
    compartment: Compartment,
    t: f64,
    alpha: f64,
    nu: f64,
    policy: &PolicySchedule,
) -> Result<f64> {
    if compartment == Compartment::D {
        return Err(Error::DeceasedControl);
    }
    if alpha < 0.0 {
        return Err(Error::NegativeInput { name: "alpha", value: alpha });
    }
    if nu < 0.0 {
        return Err(Error::NegativeInput { name: "nu", value: nu });
    }
    let anchors = group.anchors(policy.levels(group.id.index, t));
    // vaccination is only available to susceptibles
    let nu = if compartment == Compartment::S { nu } else { 0.0 };
    Ok(running_cost_at(group, anchors, compartment, alpha, nu))
}

/// Hamiltonian of a living compartment: running cost plus expected change of
/// the value function under the controlled rates.
pub fn hamiltonian(
    group: &GroupSpec,
    anchors: GuidelineLevels,
    compartment: Compartment,
    u: &StateVec,
    z: f64,
    alpha: f64,
    nu: f64,
) -> f64 {
    let row = rate_row(&group.epi, compartment, alpha, nu, z);
    let e = compartment.index();
    let mut h = running_cost_at(group, anchors, compartment, alpha, nu);
    for (j, &q) in row.iter().enumerate() {
        if j != e {
            h += q * (u[j] - u[e]);
        }
    }
    h
}

/// Socialization level of infected agents, which does not depend on the
/// value function.
#[inline]
pub fn infected_control(group: &GroupSpec, guideline: GuidelineLevels) -> f64 {
    group.anchors(guideline).i.clamp(0.0, 1.0)
}

/// Minimizer of the Hamiltonian over `[0, 1] x [0, cap]` for one group.
pub fn best_response(
    group: &GroupSpec,
    guideline: GuidelineLevels,
    u: &StateVec,
    z: f64,
    cap: f64,
) -> BestResponse {
    let anchors = group.anchors(guideline);
    let raw_alpha = anchors.s + group.epi.beta * z * (u[0] - u[1]) / (2.0 * group.cost.c_lambda);
    let raw_nu = group.epi.kappa * (u[0] - u[2]) / (2.0 * group.cost.c_nu);
    let alpha_s = raw_alpha.clamp(0.0, 1.0);
    let nu = raw_nu.clamp(0.0, cap);
    BestResponse {
        controls: Controls {
            alpha_s,
            alpha_i: anchors.i.clamp(0.0, 1.0),
            alpha_r: anchors.r.clamp(0.0, 1.0),
            nu,
        },
        clipped_alpha: alpha_s != raw_alpha,
        clipped_nu: nu != raw_nu,
    }
}

/// Best responses of every group at one time node.
pub fn best_response_controls(
    t: f64,
    values: &[StateVec],
    z: &[f64],
    groups: &[GroupSpec],
    policy: &PolicySchedule,
    cap: f64,
) -> Result<Vec<BestResponse>> {
    let k = groups.len();
    for (what, found) in [("value slice", values.len()), ("aggregate slice", z.len()), ("policy groups", policy.groups.len())] {
        if found != k {
            return Err(Error::DimensionMismatch { what, expected: k, found });
        }
    }
    if let Some(&bad) = z.iter().find(|v| **v < 0.0 || v.is_nan()) {
        return Err(Error::NegativeInput { name: "z", value: bad });
    }
    if let Some(bad) = values.iter().flatten().find(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig(format!("non-finite value function entry {bad}")));
    }
    Ok(groups
        .iter()
        .enumerate()
        .map(|(i, g)| best_response(g, policy.levels(i, t), &values[i], z[i], cap))
        .collect())
}

/// `Z^k = sum_l w(k, l) alpha^l(I) p^l(I) m^l` into `out`.
#[inline]
pub(crate) fn aggregate_into(
    p_infected: impl Fn(usize) -> f64,
    alpha_infected: impl Fn(usize) -> f64,
    contacts: &ContactMatrix,
    proportions: &[f64],
    out: &mut [f64],
) {
    let k = proportions.len();
    for (kk, slot) in out.iter_mut().enumerate().take(k) {
        let mut z = 0.0;
        for l in 0..k {
            z += contacts.get(kk, l) * alpha_infected(l) * p_infected(l) * proportions[l];
        }
        *slot = z;
    }
}

/// Infected-pressure aggregate felt by each group at node `t_index`.
pub fn compute_aggregate(
    t_index: usize,
    distributions: &DistributionPath,
    infected_controls: &[f64],
    contacts: &ContactMatrix,
    groups: &[GroupSpec],
) -> Result<Vec<f64>> {
    let k = groups.len();
    if contacts.size() != k {
        return Err(Error::DimensionMismatch { what: "contact matrix", expected: k, found: contacts.size() });
    }
    if infected_controls.len() != k || distributions.n_groups() != k {
        return Err(Error::DimensionMismatch {
            what: "aggregate inputs",
            expected: k,
            found: infected_controls.len().min(distributions.n_groups()),
        });
    }
    if t_index >= distributions.n_nodes() {
        return Err(Error::DimensionMismatch {
            what: "time index",
            expected: distributions.n_nodes(),
            found: t_index,
        });
    }
    let proportions: Vec<f64> = groups.iter().map(|g| g.proportion).collect();
    let slice = distributions.node(t_index);
    let mut out = vec![0.0; k];
    aggregate_into(|l| slice[l][1], |l| infected_controls[l], contacts, &proportions, &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn follower(beta: f64) -> GroupSpec {
        GroupSpec {
            id: GroupId { index: 0, label: "LF".into() },
            kind: AuthorityKind::Follower,
            proportion: 1.0,
            epi: EpidemicParams { beta, gamma: 0.143, eta: 0.004, kappa: 0.03, rho: 0.0 },
            cost: CostParams { c_lambda: 1.0, c_nu: 1.4, c_infected: 1.05, xi_infected: None, death_cost: 0.0 },
        }
    }

    fn indifferent() -> GroupSpec {
        let mut g = follower(0.4);
        g.kind = AuthorityKind::Indifferent;
        g.id.label = "LI".into();
        g.cost.xi_infected = Some(0.97);
        g
    }

    #[test]
    fn infection_rate_is_product() {
        let row = transition_rates(&follower(0.4), Compartment::S, 0.9, 0.0, 0.009, Variant::Sir).unwrap();
        assert!((row[1] - 0.00324).abs() < 1e-15);
    }

    #[test]
    fn recovery_split_by_mortality() {
        let mut g = follower(0.4);
        let sir = transition_rates(&g, Compartment::I, 0.9, 0.0, 0.0, Variant::Sir).unwrap();
        assert_eq!(sir[2], 0.143);
        assert_eq!(sir[3], 0.0);
        g.epi.rho = 0.005;
        let sird = transition_rates(&g, Compartment::I, 0.9, 0.0, 0.0, Variant::Sird).unwrap();
        assert!((sird[2] - 0.142285).abs() < 1e-15);
        assert!((sird[3] - 0.000715).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_rate_inputs() {
        let g = follower(0.4);
        assert_eq!(
            transition_rates(&g, Compartment::D, 0.5, 0.0, 0.0, Variant::Sird),
            Err(Error::DeceasedControl)
        );
        assert!(matches!(
            transition_rates(&g, Compartment::S, -0.1, 0.0, 0.0, Variant::Sir),
            Err(Error::NegativeInput { name: "alpha", .. })
        ));
        assert!(transition_rates(&g, Compartment::S, 0.5, -1.0, 0.0, Variant::Sir).is_err());
    }

    #[test]
    fn running_cost_examples() {
        let policy = PolicySchedule::uniform(1, 0.9, 0.9, 0.9);
        let g = follower(0.4);
        assert_eq!(running_cost(&g, Compartment::S, 0.0, 0.9, 0.0, &policy).unwrap(), 0.0);
        let c = running_cost(&g, Compartment::S, 3.0, 0.8, 0.1, &policy).unwrap();
        assert!((c - 0.024).abs() < 1e-15);
        let ind = indifferent();
        let c = running_cost(&ind, Compartment::I, 1.0, 0.97, 0.0, &policy).unwrap();
        assert!((c - 1.05).abs() < 1e-15);
        assert_eq!(running_cost(&g, Compartment::D, 0.0, 0.9, 0.0, &policy), Err(Error::DeceasedControl));
    }

    #[test]
    fn best_response_zero_values() {
        let g = follower(0.4);
        let br = best_response(&g, GuidelineLevels { s: 0.9, i: 0.9, r: 0.9 }, &[0.0; 4], 0.01, 10.0);
        assert_eq!(br.controls.alpha_s, 0.9);
        assert_eq!(br.controls.nu, 0.0);
        assert!(!br.clipped());
    }

    #[test]
    fn best_response_interior_example() {
        // beta Z (uS - uI) / (2 c_lambda) = 0.4 * 0.009 * -5 / 2
        let g = follower(0.4);
        let u = [1.0, 6.0, 0.5, 0.0];
        let br = best_response(&g, GuidelineLevels { s: 0.9, i: 0.9, r: 0.9 }, &u, 0.009, 10.0);
        assert!((br.controls.alpha_s - 0.891).abs() < 1e-14);
        // numerical minimization of H over a fine alpha grid
        let anchors = g.anchors(GuidelineLevels { s: 0.9, i: 0.9, r: 0.9 });
        let (best, _) = (0..=100_000)
            .map(|i| i as f64 * 1e-5)
            .map(|a| (a, hamiltonian(&g, anchors, Compartment::S, &u, 0.009, a, br.controls.nu)))
            .fold((0.0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
        assert!((best - 0.891).abs() < 2e-5);
    }

    #[test]
    fn equal_values_mean_no_vaccination() {
        let mut g = follower(0.4);
        g.epi.kappa = 3.7;
        g.cost.c_nu = 0.2;
        let br = best_response(&g, GuidelineLevels { s: 0.9, i: 0.9, r: 0.9 }, &[2.0, 3.0, 2.0, 0.0], 0.1, 10.0);
        assert_eq!(br.controls.nu, 0.0);
    }

    #[test]
    fn clipping_is_flagged() {
        let g = follower(0.4);
        let br = best_response(&g, GuidelineLevels { s: 0.9, i: 0.9, r: 0.9 }, &[0.0, 1e4, 0.0, 0.0], 1.0, 10.0);
        assert_eq!(br.controls.alpha_s, 0.0);
        assert!(br.clipped_alpha);
    }

    #[test]
    fn single_group_aggregate() {
        let dist = NodeField::repeated(2, &[[0.99, 0.01, 0.0, 0.0]]);
        let contacts = ContactMatrix::uniform(1, 1.0).unwrap();
        let z = compute_aggregate(1, &dist, &[0.9], &contacts, &[follower(0.4)]).unwrap();
        assert!((z[0] - 0.009).abs() < 1e-15);
        let empty = NodeField::repeated(1, &[[1.0, 0.0, 0.0, 0.0]]);
        assert_eq!(compute_aggregate(0, &empty, &[0.9], &contacts, &[follower(0.4)]).unwrap(), vec![0.0]);
        let two = ContactMatrix::uniform(2, 1.0).unwrap();
        assert!(matches!(
            compute_aggregate(0, &empty, &[0.9], &two, &[follower(0.4)]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn grid_arithmetic() {
        let g = TimeGrid::new(60.0, 0.05).unwrap();
        assert_eq!(g.n_steps, 1200);
        assert!(TimeGrid::new(1.0, 0.3).is_err());
        assert!(TimeGrid::new(0.0, 0.1).is_err());
    }

    #[test]
    fn schedules() {
        let s = Schedule::Piecewise(vec![(0.0, 0.9), (10.0, 0.6)]);
        assert_eq!(s.value_at(9.99), 0.9);
        assert_eq!(s.value_at(10.0), 0.6);
        let s = Schedule::Sampled { dt: 1.0, values: vec![0.0, 1.0] };
        assert_eq!(s.value_at(0.25), 0.25);
        assert_eq!(s.value_at(5.0), 1.0);
        assert!(Schedule::constant(1.2).validate(1.0, "x").is_err());
    }

    #[test]
    fn group_validation() {
        let mut g = follower(0.4);
        assert!(g.validate(Variant::Sir).is_ok());
        g.cost.xi_infected = Some(0.9);
        assert!(g.validate(Variant::Sir).is_err());
        let mut i = indifferent();
        i.cost.xi_infected = None;
        assert!(i.validate(Variant::Sir).is_err());
        let mut d = follower(0.4);
        d.epi.rho = 0.01;
        assert!(d.validate(Variant::Sir).is_err());
        assert!(d.validate(Variant::Sird).is_ok());
    }
}
