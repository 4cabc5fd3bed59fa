//! Comparison metrics over solved trajectories.
//!
//! "Peak" means the maximum for infected proportions and vaccination, and
//! the minimum (trough) for susceptible socialization. Peaks are taken on
//! the grid, earliest index first when tied.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::EquilibriumSolution;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    InfectedProportion,
    SocializationS,
    Vaccination,
}

impl Quantity {
    pub const ALL: [Quantity; 3] = [Quantity::InfectedProportion, Quantity::SocializationS, Quantity::Vaccination];

    pub fn uses_trough(self) -> bool {
        matches!(self, Quantity::SocializationS)
    }

    pub fn key(self) -> &'static str {
        match self {
            Quantity::InfectedProportion => "infected_proportion",
            Quantity::SocializationS => "socialization_s",
            Quantity::Vaccination => "vaccination",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    PeakDifference,
    PeakTimeSpan,
    GroupDisparity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric: Metric,
    pub quantity: Quantity,
    pub subjects: Vec<String>,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peak_times: Option<Vec<(String, f64)>>,
}

/// Time series of one quantity for one group.
pub fn series(solution: &EquilibriumSolution, group: usize, quantity: Quantity) -> Vec<f64> {
    match quantity {
        Quantity::InfectedProportion => solution.distributions.column(group).map(|p| p[1]).collect(),
        Quantity::SocializationS => solution.controls.controls.column(group).map(|c| c.alpha_s).collect(),
        Quantity::Vaccination => solution.controls.controls.column(group).map(|c| c.nu).collect(),
    }
}

/// `(index, value)` of the peak, earliest index on ties.
pub fn peak(series: &[f64], quantity: Quantity) -> (usize, f64) {
    let mut best = (0, series[0]);
    for (i, &v) in series.iter().enumerate().skip(1) {
        let better = if quantity.uses_trough() { v < best.1 } else { v > best.1 };
        if better {
            best = (i, v);
        }
    }
    best
}

fn check_grids(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::GridMismatch { left: a.len(), right: b.len() });
    }
    Ok(())
}

/// Absolute difference between the peaks of two series.
pub fn peak_difference(series_a: &[f64], series_b: &[f64], quantity: Quantity) -> Result<f64> {
    peak_shift(series_a, series_b, quantity).map(f64::abs)
}

/// Peak of `b` minus peak of `a`; the sign says which direction the
/// treatment moved the peak.
pub fn peak_shift(series_a: &[f64], series_b: &[f64], quantity: Quantity) -> Result<f64> {
    check_grids(series_a, series_b)?;
    Ok(peak(series_b, quantity).1 - peak(series_a, quantity).1)
}

/// Peak times of each series.
pub fn peak_times(all: &[Vec<f64>], dt: f64, quantity: Quantity) -> Vec<f64> {
    all.iter().map(|s| peak(s, quantity).0 as f64 * dt).collect()
}

/// Latest minus earliest peak time over a set of series on a grid of step
/// `dt`.
pub fn peak_time_span_of(all: &[Vec<f64>], dt: f64, quantity: Quantity) -> f64 {
    let idx: Vec<usize> = all.iter().map(|s| peak(s, quantity).0).collect();
    match (idx.iter().max(), idx.iter().min()) {
        (Some(hi), Some(lo)) => (hi - lo) as f64 * dt,
        _ => 0.0,
    }
}

pub fn peak_time_span(solution: &EquilibriumSolution, quantity: Quantity) -> f64 {
    let all: Vec<Vec<f64>> = (0..solution.n_groups()).map(|k| series(solution, k, quantity)).collect();
    peak_time_span_of(&all, solution.grid.dt, quantity)
}

/// `max_t (a_t - b_t)`, signed.
pub fn disparity(a: &[f64], b: &[f64]) -> Result<f64> {
    check_grids(a, b)?;
    Ok(a.iter().zip(b).map(|(x, y)| x - y).fold(f64::NEG_INFINITY, f64::max))
}

pub fn group_disparity(solution: &EquilibriumSolution, k: &str, l: &str, quantity: Quantity) -> Result<f64> {
    let ki = solution.group_index(k)?;
    let li = solution.group_index(l)?;
    disparity(&series(solution, ki, quantity), &series(solution, li, quantity))
}

/// Peak differences of every mapped group pair for one quantity.
pub fn peak_difference_reports(
    baseline: &EquilibriumSolution,
    treatment: &EquilibriumSolution,
    group_map: &[(String, String)],
    quantity: Quantity,
) -> Result<Vec<MetricReport>> {
    group_map
        .iter()
        .map(|(a, b)| {
            let sa = series(baseline, baseline.group_index(a)?, quantity);
            let sb = series(treatment, treatment.group_index(b)?, quantity);
            let subjects = if a == b { vec![a.clone()] } else { vec![a.clone(), b.clone()] };
            Ok(MetricReport {
                metric: Metric::PeakDifference,
                quantity,
                subjects,
                value: peak_difference(&sa, &sb, quantity)?,
                peak_times: None,
            })
        })
        .collect()
}

pub fn peak_time_span_report(solution: &EquilibriumSolution, quantity: Quantity) -> MetricReport {
    let all: Vec<Vec<f64>> = (0..solution.n_groups()).map(|k| series(solution, k, quantity)).collect();
    let times = peak_times(&all, solution.grid.dt, quantity);
    MetricReport {
        metric: Metric::PeakTimeSpan,
        quantity,
        subjects: solution.labels.clone(),
        value: peak_time_span_of(&all, solution.grid.dt, quantity),
        peak_times: Some(solution.labels.iter().cloned().zip(times).collect()),
    }
}

pub fn group_disparity_report(
    solution: &EquilibriumSolution,
    k: &str,
    l: &str,
    quantity: Quantity,
) -> Result<MetricReport> {
    Ok(MetricReport {
        metric: Metric::GroupDisparity,
        quantity,
        subjects: vec![k.to_string(), l.to_string()],
        value: group_disparity(solution, k, l, quantity)?,
        peak_times: None,
    })
}

/// The pair with the largest disparity for a quantity, as `(k, l, value)`.
pub fn largest_disparity(solution: &EquilibriumSolution, quantity: Quantity) -> (String, String, f64) {
    let n = solution.n_groups();
    let all: Vec<Vec<f64>> = (0..n).map(|k| series(solution, k, quantity)).collect();
    let mut best = (0, 0, f64::NEG_INFINITY);
    for k in 0..n {
        for l in 0..n {
            if k != l {
                let d = disparity(&all[k], &all[l]).expect("same grid");
                if d > best.2 {
                    best = (k, l, d);
                }
            }
        }
    }
    if n < 2 {
        best = (0, 0, 0.0);
    }
    (solution.labels[best.0].clone(), solution.labels[best.1].clone(), best.2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn peak_difference_examples() {
        let a = [0.0, 0.10, 0.05];
        let b = [0.0, 0.20, 0.10];
        assert!((peak_difference(&a, &b, Quantity::InfectedProportion).unwrap() - 0.10).abs() < 1e-15);
        assert_eq!(peak_difference(&a, &a, Quantity::InfectedProportion).unwrap(), 0.0);
        assert!(matches!(
            peak_difference(&a, &b[..2], Quantity::Vaccination),
            Err(Error::GridMismatch { .. })
        ));
    }

    #[test]
    fn socialization_uses_troughs() {
        let a = [0.9, 0.8, 0.85];
        let b = [0.9, 0.85, 0.88];
        assert!((peak_difference(&a, &b, Quantity::SocializationS).unwrap() - 0.05).abs() < 1e-12);
        assert_eq!(peak(&a, Quantity::SocializationS), (1, 0.8));
    }

    #[test]
    fn ties_pick_earliest() {
        assert_eq!(peak(&[0.0, 1.0, 1.0], Quantity::InfectedProportion).0, 1);
    }

    #[test]
    fn time_span_fixture() {
        let mk = |at: usize| {
            let mut s = vec![0.0; 200];
            s[at] = 1.0;
            s
        };
        let all = vec![mk(100), mk(115), mk(119)];
        assert!((peak_time_span_of(&all, 0.1, Quantity::InfectedProportion) - 1.9).abs() < 1e-12);
        let same = vec![mk(7), mk(7)];
        assert_eq!(peak_time_span_of(&same, 0.1, Quantity::InfectedProportion), 0.0);
        let two = vec![mk(120), mk(162)];
        assert!((peak_time_span_of(&two, 0.1, Quantity::InfectedProportion) - 4.2).abs() < 1e-12);
    }

    #[test]
    fn disparity_examples() {
        assert!((disparity(&[0.1, 0.3], &[0.2, 0.1]).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(disparity(&[0.1, 0.3], &[0.1, 0.3]).unwrap(), 0.0);
    }

    fn series_strategy(len: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-1.0f64..1.0, len)
    }

    proptest! {
        #[test]
        fn peak_difference_is_a_metric(
            a in series_strategy(16), b in series_strategy(16), c in series_strategy(16),
            q in prop::sample::select(Quantity::ALL.to_vec())
        ) {
            prop_assert_eq!(peak_difference(&a, &a, q).unwrap(), 0.0);
            prop_assert_eq!(peak_difference(&a, &b, q).unwrap(), peak_difference(&b, &a, q).unwrap());
            let ab = peak_difference(&a, &b, q).unwrap();
            let bc = peak_difference(&b, &c, q).unwrap();
            let ac = peak_difference(&a, &c, q).unwrap();
            prop_assert!(ac <= ab + bc + 1e-12);
        }

        #[test]
        fn span_is_shift_invariant(
            a in series_strategy(12), b in series_strategy(12), shift in -5.0f64..5.0
        ) {
            let all = vec![a.clone(), b.clone()];
            let span = peak_time_span_of(&all, 0.5, Quantity::InfectedProportion);
            prop_assert!(span >= 0.0);
            let moved: Vec<Vec<f64>> = all.iter().map(|s| s.iter().map(|v| v + shift).collect()).collect();
            // adding a constant can reorder exact ties only through rounding
            let a_idx = peak(&a, Quantity::InfectedProportion).0;
            let m_idx = peak(&moved[0], Quantity::InfectedProportion).0;
            if a_idx == m_idx && peak(&b, Quantity::InfectedProportion).0 == peak(&moved[1], Quantity::InfectedProportion).0 {
                prop_assert_eq!(span, peak_time_span_of(&moved, 0.5, Quantity::InfectedProportion));
            }
        }

        #[test]
        fn disparity_pairs_are_consistent(a in series_strategy(10), b in series_strategy(10)) {
            prop_assert_eq!(disparity(&a, &a).unwrap(), 0.0);
            let kl = disparity(&a, &b).unwrap();
            let lk = disparity(&b, &a).unwrap();
            let crosses = a.iter().zip(&b).any(|(x, y)| x > y) && a.iter().zip(&b).any(|(x, y)| x < y);
            if crosses {
                prop_assert!(kl + lk >= 0.0);
            }
            // kl >= -lk always: max(a-b) >= min(a-b) = -max(b-a)
            prop_assert!(kl >= -lk - 1e-15);
        }
    }
}
