//! Performance measures over run results.

use serde::{Deserialize, Serialize};

use crate::bitstring::{hamming, BitString};
use crate::error::{Error, Result};
use crate::ga::{RunResult, TrajectoryPoint};

/// Reference thresholds on the mutation factor from runtime theory.
/// Documentation only; nothing checks against them at run time.
pub mod thresholds {
    /// Phase transition of the (1+1) EA on Dynamic BinVal.
    pub const CHI0_DBV: f64 = 2.13;
    /// Phase transition of the (1+1) EA on HotTopic.
    pub const CHI0_HOTTOPIC: f64 = 1.59;
    /// Marker drawn in the mutation-rate plots of the rank version.
    pub const RANK_PLOT_MARKER: f64 = 1.6;
}

pub fn fraction_correct(x: &BitString, optimum: &BitString) -> Result<f64> {
    let n = x.len();
    Ok((n - hamming(x, optimum)?) as f64 / n as f64)
}

/// First logged evaluation count at which the best-so-far fraction reaches `phi`.
pub fn evals_to_fraction(trajectory: &[TrajectoryPoint], phi: f64) -> Option<u64> {
    trajectory
        .iter()
        .find(|p| p.best_fraction_correct >= phi)
        .map(|p| p.evaluations)
}

/// Runs of one configuration.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSet {
    pub label: String,
    pub budget: u64,
    pub results: Vec<RunResult>,
}

impl RunSet {
    pub fn new(label: impl Into<String>, budget: u64, results: Vec<RunResult>) -> Self {
        RunSet {
            label: label.into(),
            budget,
            results,
        }
    }

    fn hits(&self, phi: f64) -> impl Iterator<Item = Option<u64>> + '_ {
        self.results
            .iter()
            .map(move |r| evals_to_fraction(&r.trajectory, phi))
    }

    /// Mean hitting time over the runs that reached `phi`.
    pub fn mean_hitting_time(&self, phi: f64) -> Option<f64> {
        let hits: Vec<u64> = self.hits(phi).flatten().collect();
        (!hits.is_empty()).then(|| hits.iter().sum::<u64>() as f64 / hits.len() as f64)
    }
}

/// Expected running time to reach fraction `phi`.
///
/// Unsuccessful runs contribute the full budget; the total is divided by the
/// number of successful runs. Returns `f64::INFINITY` when no run succeeded.
pub fn ert(runs: &RunSet, phi: f64) -> Result<f64> {
    if runs.results.is_empty() {
        return Err(Error::contract("ERT of an empty run set"));
    }
    let (mut total, mut hits) = (0u64, 0u64);
    for t in runs.hits(phi) {
        match t {
            Some(t) => {
                total += t;
                hits += 1;
            }
            None => total += runs.budget,
        }
    }
    Ok(if hits == 0 {
        f64::INFINITY
    } else {
        total as f64 / hits as f64
    })
}

pub fn success_rate(runs: &RunSet, phi: f64) -> Result<f64> {
    if runs.results.is_empty() {
        return Err(Error::contract("success rate of an empty run set"));
    }
    let hits = runs.hits(phi).flatten().count();
    Ok(hits as f64 / runs.results.len() as f64)
}

/// Formats an ERT value, writing `inf` for runs sets without a success.
pub fn format_ert(value: f64) -> String {
    if value.is_finite() {
        format!("{value:.1}")
    } else {
        "inf".to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn point(e: u64, f: f64) -> TrajectoryPoint {
        TrajectoryPoint {
            evaluations: e,
            best_fraction_correct: f,
            generation: 0,
        }
    }

    fn result(traj: Vec<TrajectoryPoint>) -> RunResult {
        let last = traj.last().copied().unwrap_or(point(1, 0.0));
        RunResult {
            success: last.best_fraction_correct >= 1.0,
            evals_to_optimum: (last.best_fraction_correct >= 1.0).then_some(last.evaluations),
            evals_used: last.evaluations,
            generations: 0,
            trajectory: traj,
            final_population_best_fraction: last.best_fraction_correct,
        }
    }

    #[test]
    fn fraction_correct_cases() {
        let opt = BitString::ones(1000);
        assert_eq!(fraction_correct(&opt, &opt).unwrap(), 1.0);
        assert_eq!(fraction_correct(&opt.complement(), &opt).unwrap(), 0.0);
        let mut x = opt.clone();
        for i in 0..200 {
            x.flip(i * 5);
        }
        assert_eq!(fraction_correct(&x, &opt).unwrap(), 0.8);
        assert!(fraction_correct(&BitString::ones(3), &opt).is_err());
    }

    #[test]
    fn evals_to_fraction_cases() {
        let t = vec![point(10, 0.6), point(40, 0.7)];
        assert_eq!(evals_to_fraction(&t, 0.0), Some(10));
        assert_eq!(evals_to_fraction(&t, 0.65), Some(40));
        assert_eq!(evals_to_fraction(&t, 0.71), None);
    }

    #[test]
    fn ert_cases() {
        let all = RunSet::new("a", 1000, vec![result(vec![point(100, 1.0)]); 5]);
        assert_eq!(ert(&all, 1.0).unwrap(), 100.0);
        assert_eq!(success_rate(&all, 1.0).unwrap(), 1.0);

        let mixed = RunSet::new(
            "m",
            1000,
            vec![result(vec![point(100, 1.0)]), result(vec![point(1003, 0.9)])],
        );
        assert_eq!(ert(&mixed, 1.0).unwrap(), 1100.0);
        assert_eq!(success_rate(&mixed, 1.0).unwrap(), 0.5);

        let none = RunSet::new("n", 1000, vec![result(vec![point(1000, 0.5)]); 3]);
        assert!(ert(&none, 1.0).unwrap().is_infinite());
        assert_eq!(format_ert(ert(&none, 1.0).unwrap()), "inf");
        assert_eq!(success_rate(&none, 1.0).unwrap(), 0.0);

        let partial = RunSet::new(
            "p",
            10,
            vec![
                result(vec![point(1, 1.0)]),
                result(vec![point(1, 1.0)]),
                result(vec![point(1, 1.0)]),
                result(vec![point(1, 0.2)]),
            ],
        );
        assert_eq!(success_rate(&partial, 1.0).unwrap(), 0.75);
        assert!(ert(&RunSet::new("e", 10, vec![]), 1.0).is_err());
    }

    fn arb_trajectory() -> impl Strategy<Value = Vec<TrajectoryPoint>> {
        prop::collection::vec((1u64..50, 1u32..20), 1..8).prop_map(|steps| {
            let (mut e, mut c) = (0u64, 0u32);
            steps
                .into_iter()
                .map(|(de, dc)| {
                    e += de;
                    c = (c + dc).min(100);
                    point(e, c as f64 / 100.0)
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn ert_is_pessimistic_and_monotone(trajs in prop::collection::vec(arb_trajectory(), 1..10), a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let runs = RunSet::new("x", 500, trajs.into_iter().map(result).collect());
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let (e_lo, e_hi) = (ert(&runs, lo).unwrap(), ert(&runs, hi).unwrap());
            prop_assert!(e_lo <= e_hi);
            if let Some(mean) = runs.mean_hitting_time(lo) {
                prop_assert!(e_lo >= mean - 1e-9);
            }
        }
    }
}
