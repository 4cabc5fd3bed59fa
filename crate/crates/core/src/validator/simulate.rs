//! Finite-population simulation under frozen equilibrium controls.
//!
//! Agents of one group in one compartment are exchangeable, so the chain is
//! simulated on per-group compartment counts. This has the same law as the
//! agent-level chain. Time-varying rates are handled by thinning against a
//! majorant that is fixed per grid interval and per state.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::model::{Controls, NodeField, StateVec};
use crate::scenarios::Scenario;
use crate::solver::EquilibriumSolution;

pub const RNG_NAME: &str = "ChaCha8 (rand_chacha 0.9), seed_from_u64(seed), stream = replica index";

/// Safety factor applied to the per-interval majorant.
const MAJORANT_FACTOR: f64 = 1.1;

#[derive(Clone, Debug, PartialEq)]
pub struct SimReport {
    pub n_agents: usize,
    pub n_replicas: usize,
    pub seed: u64,
    pub rng: &'static str,
    pub group_sizes: Vec<usize>,
    /// Empirical proportions per replica, on the solution grid.
    pub replicas: Vec<NodeField<StateVec>>,
    /// Plain mean over replicas.
    pub mean: NodeField<StateVec>,
    /// Sup-norm distance of the mean infected proportion from the mean-field
    /// one.
    pub sup_deviation: f64,
    /// The same distance for each replica on its own.
    pub replica_deviations: Vec<f64>,
    pub events: Vec<u64>,
}

/// Largest-remainder split of `total` according to `weights`.
pub fn largest_remainder(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.partial_cmp(&fa).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

struct Frozen<'a> {
    solution: &'a EquilibriumSolution,
    scenario: &'a Scenario,
    sizes: Vec<usize>,
    n: usize,
}

impl Frozen<'_> {
    #[inline]
    fn controls_at(&self, node: usize, frac: f64, k: usize) -> Controls {
        let c = &self.solution.controls.controls;
        let a = c.get(node, k);
        if frac == 0.0 {
            return *a;
        }
        let b = c.get(node + 1, k);
        Controls {
            alpha_s: a.alpha_s + frac * (b.alpha_s - a.alpha_s),
            alpha_i: a.alpha_i + frac * (b.alpha_i - a.alpha_i),
            alpha_r: a.alpha_r + frac * (b.alpha_r - a.alpha_r),
            nu: a.nu + frac * (b.nu - a.nu),
        }
    }

    /// Finite-N aggregate `Z^k = (1/N) sum_l w(k, l) alpha^l(I) I_l`.
    fn aggregate(&self, k: usize, alpha_i: impl Fn(usize) -> f64, counts: &[[u64; 4]]) -> f64 {
        let mut z = 0.0;
        for (l, c) in counts.iter().enumerate() {
            z += self.scenario.contacts.get(k, l) * alpha_i(l) * c[1] as f64;
        }
        z / self.n as f64
    }

    fn record(&self, counts: &[[u64; 4]], out: &mut [StateVec]) {
        for (k, c) in counts.iter().enumerate() {
            let nk = self.sizes[k] as f64;
            out[k] = [c[0] as f64 / nk, c[1] as f64 / nk, c[2] as f64 / nk, c[3] as f64 / nk];
        }
    }

    fn run(&self, rng: &mut ChaCha8Rng) -> (NodeField<StateVec>, u64) {
        let grid = self.solution.grid;
        let k_groups = self.sizes.len();
        let groups = &self.scenario.groups;
        let mut counts: Vec<[u64; 4]> = self
            .scenario
            .initial
            .iter()
            .zip(&self.sizes)
            .map(|(p0, &nk)| {
                let c = largest_remainder(nk, p0);
                [c[0] as u64, c[1] as u64, c[2] as u64, c[3] as u64]
            })
            .collect();
        let mut out = NodeField::filled(grid.n_nodes(), k_groups, [0.0; 4]);
        self.record(&counts, out.node_mut(0));
        let mut events = 0u64;
        // per group: infection, vaccination, recovery, death, waning
        let mut bound = vec![[0.0f64; 5]; k_groups];
        for n in 0..grid.n_steps {
            let t0 = grid.time(n);
            let c0 = self.solution.controls.controls.node(n);
            let c1 = self.solution.controls.controls.node(n + 1);
            let a_s: Vec<f64> = (0..k_groups).map(|k| c0[k].alpha_s.max(c1[k].alpha_s)).collect();
            let a_i: Vec<f64> = (0..k_groups).map(|k| c0[k].alpha_i.max(c1[k].alpha_i)).collect();
            let nu: Vec<f64> = (0..k_groups).map(|k| c0[k].nu.max(c1[k].nu)).collect();
            let mut t = t0;
            let mut refresh = true;
            let mut total = 0.0;
            loop {
                if refresh {
                    total = 0.0;
                    for k in 0..k_groups {
                        let epi = &groups[k].epi;
                        let c = &counts[k];
                        let z_hi = self.aggregate(k, |l| a_i[l], &counts);
                        bound[k] = [
                            MAJORANT_FACTOR * epi.beta * a_s[k] * z_hi * c[0] as f64,
                            MAJORANT_FACTOR * epi.kappa * nu[k] * c[0] as f64,
                            (1.0 - epi.rho) * epi.gamma * c[1] as f64,
                            epi.rho * epi.gamma * c[1] as f64,
                            epi.eta * c[2] as f64,
                        ];
                        total += bound[k].iter().sum::<f64>();
                    }
                    refresh = false;
                }
                if total <= 0.0 {
                    break;
                }
                let wait: f64 = Exp1.sample(rng);
                t += wait / total;
                if t >= t0 + grid.dt {
                    break;
                }
                // pick a candidate channel proportionally to its majorant
                let mut target = rng.random::<f64>() * total;
                let mut pick = None;
                'outer: for (k, b) in bound.iter().enumerate() {
                    for (ch, &r) in b.iter().enumerate() {
                        if target < r {
                            pick = Some((k, ch));
                            break 'outer;
                        }
                        target -= r;
                    }
                }
                let Some((k, ch)) = pick else { continue };
                let frac = ((t - t0) / grid.dt).clamp(0.0, 1.0);
                let accept = match ch {
                    0 | 1 => {
                        let ck = self.controls_at(n, frac, k);
                        let epi = &groups[k].epi;
                        let actual = if ch == 0 {
                            let z = self.aggregate(k, |l| self.controls_at(n, frac, l).alpha_i, &counts);
                            epi.beta * ck.alpha_s * z * counts[k][0] as f64
                        } else {
                            epi.kappa * ck.nu * counts[k][0] as f64
                        };
                        rng.random::<f64>() * bound[k][ch] < actual
                    }
                    _ => true,
                };
                if !accept {
                    continue;
                }
                let (from, to) = match ch {
                    0 => (0, 1),
                    1 => (0, 2),
                    2 => (1, 2),
                    3 => (1, 3),
                    _ => (2, 0),
                };
                counts[k][from] -= 1;
                counts[k][to] += 1;
                events += 1;
                refresh = true;
            }
            self.record(&counts, out.node_mut(n + 1));
        }
        (out, events)
    }
}

fn sup_infected_deviation(path: &NodeField<StateVec>, reference: &NodeField<StateVec>) -> f64 {
    path.as_slice()
        .iter()
        .zip(reference.as_slice())
        .map(|(a, b)| (a[1] - b[1]).abs())
        .fold(0.0, f64::max)
}

/// Simulates `n_replicas` independent finite populations of `n_agents`
/// agents who all play the frozen equilibrium controls of `solution`.
pub fn simulate_finite_n(
    solution: &EquilibriumSolution,
    scenario: &Scenario,
    n_agents: usize,
    n_replicas: usize,
    seed: u64,
) -> Result<SimReport> {
    let k = scenario.groups.len();
    if solution.n_groups() != k {
        return Err(Error::DimensionMismatch { what: "solution groups", expected: k, found: solution.n_groups() });
    }
    if n_agents < k {
        return Err(Error::InvalidSimulation(format!("need at least one agent per group ({k}), got {n_agents}")));
    }
    if n_replicas == 0 {
        return Err(Error::InvalidSimulation("need at least one replica".into()));
    }
    let proportions: Vec<f64> = scenario.groups.iter().map(|g| g.proportion).collect();
    let sizes = largest_remainder(n_agents, &proportions);
    if sizes.contains(&0) {
        return Err(Error::InvalidSimulation(format!("{n_agents} agents leave a group empty")));
    }
    let frozen = Frozen { solution, scenario, sizes: sizes.clone(), n: n_agents };
    let run = |r: usize| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(r as u64);
        frozen.run(&mut rng)
    };
    #[cfg(feature = "parallel")]
    let runs: Vec<(NodeField<StateVec>, u64)> = {
        use rayon::prelude::*;
        (0..n_replicas).into_par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let runs: Vec<(NodeField<StateVec>, u64)> = (0..n_replicas).map(run).collect();

    let reference = &solution.distributions;
    let mut mean = NodeField::filled(reference.n_nodes(), k, [0.0; 4]);
    for (path, _) in &runs {
        for (m, p) in mean.as_mut_slice().iter_mut().zip(path.as_slice()) {
            for i in 0..4 {
                m[i] += p[i];
            }
        }
    }
    for m in mean.as_mut_slice() {
        for v in m.iter_mut() {
            *v /= n_replicas as f64;
        }
    }
    let replica_deviations = runs.iter().map(|(p, _)| sup_infected_deviation(p, reference)).collect();
    Ok(SimReport {
        n_agents,
        n_replicas,
        seed,
        rng: RNG_NAME,
        group_sizes: sizes,
        sup_deviation: sup_infected_deviation(&mean, reference),
        replica_deviations,
        events: runs.iter().map(|r| r.1).collect(),
        replicas: runs.into_iter().map(|r| r.0).collect(),
        mean,
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::scenarios::catalog;
    use crate::solver::solve;

    #[test]
    fn largest_remainder_splits() {
        assert_eq!(largest_remainder(10, &[0.5, 0.25, 0.25]), vec![5, 3, 2]);
        assert_eq!(largest_remainder(100, &[0.99, 0.01, 0.0]), vec![99, 1, 0]);
        let sizes = largest_remainder(10_000, &catalog::proportions());
        assert_eq!(sizes, vec![1470, 1750, 1510, 1660, 1860, 1750]);
    }

    proptest! {
        #[test]
        fn largest_remainder_is_exact(total in 1usize..100_000, w in prop::collection::vec(0.01f64..1.0, 1..8)) {
            let c = largest_remainder(total, &w);
            prop_assert_eq!(c.iter().sum::<usize>(), total);
            let sum: f64 = w.iter().sum();
            for (ci, wi) in c.iter().zip(&w) {
                prop_assert!((*ci as f64 - total as f64 * wi / sum).abs() < 1.0);
            }
        }
    }

    fn still() -> Scenario {
        let mut s = catalog::single("permissive").unwrap();
        for g in &mut s.groups {
            g.epi.beta = 0.0;
            g.epi.kappa = 0.0;
            g.epi.eta = 0.0;
        }
        s.initial = vec![[1.0, 0.0, 0.0, 0.0]; 6];
        s.solver.grid = crate::model::TimeGrid::new(20.0, 0.1).unwrap();
        s
    }

    #[test]
    fn no_rates_no_events() {
        let s = still();
        let sol = solve(&s).unwrap();
        let r = simulate_finite_n(&sol, &s, 1000, 4, 7).unwrap();
        assert_eq!(r.sup_deviation, 0.0);
        assert!(r.events.iter().all(|e| *e == 0));
        assert!(r.mean.as_slice().iter().all(|p| *p == [1.0, 0.0, 0.0, 0.0]));
    }

    #[test]
    fn same_seed_same_report() {
        let mut s = catalog::single("permissive").unwrap();
        s.solver.grid = crate::model::TimeGrid::new(30.0, 0.1).unwrap();
        let sol = solve(&s).unwrap();
        let a = simulate_finite_n(&sol, &s, 2000, 3, 11).unwrap();
        let b = simulate_finite_n(&sol, &s, 2000, 3, 11).unwrap();
        assert_eq!(a, b);
        let c = simulate_finite_n(&sol, &s, 2000, 3, 12).unwrap();
        assert_ne!(a.events, c.events);
        for path in &a.replicas {
            for (n, p) in path.as_slice().iter().enumerate() {
                let k = n % 6;
                let counts: Vec<f64> = p.iter().map(|x| x * a.group_sizes[k] as f64).collect();
                assert!(counts.iter().all(|c| (c - c.round()).abs() < 1e-9));
                assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_sizes() {
        let s = still();
        let sol = solve(&s).unwrap();
        assert!(matches!(simulate_finite_n(&sol, &s, 5, 1, 0), Err(Error::InvalidSimulation(_))));
        assert!(matches!(simulate_finite_n(&sol, &s, 100, 0, 0), Err(Error::InvalidSimulation(_))));
    }
}
