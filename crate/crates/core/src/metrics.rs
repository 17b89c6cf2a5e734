//! Numeric error against the exact solution and ensemble statistics over
//! repeated runs.

use std::time::Duration;

use crate::{Error, Result};

/// One complete training outcome.
///
/// Diverged runs keep `delta_u` and `final_cost` as NaN and set the flag;
/// they are recorded, never discarded, so ensembles can report them.
#[derive(Debug, Clone)]
pub struct RunRecord {
    /// Hash of the full run configuration, stable across platforms.
    pub fingerprint: String,
    pub seed: u64,
    /// l1 error `Σ_i |u(x_i) - u_t(x_i)|` on the training grid.
    pub delta_u: f64,
    pub final_cost: f64,
    pub diverged: bool,
    pub wall: Duration,
    /// Cost/error trajectory at logarithmically subsampled epochs, when the
    /// run was asked to record one.
    pub history: Option<Vec<HistoryPoint>>,
}

/// One point of a recorded training trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryPoint {
    pub epoch: u64,
    pub cost: f64,
    pub delta_u: f64,
}

/// l1 distance `Σ_i |exact_i - trial_i|`; no averaging over points.
pub fn numeric_error(exact: &[f64], trial: &[f64]) -> Result<f64> {
    if exact.len() != trial.len() {
        return Err(Error::LengthMismatch {
            expected: exact.len(),
            got: trial.len(),
        });
    }
    Ok(exact
        .iter()
        .zip(trial)
        .map(|(e, t)| (e - t).abs())
        .sum())
}

/// Statistics of the non-diverged `delta_u` values of an ensemble.
///
/// Mean and sample standard deviation (divisor `n-1`, zero for a single
/// record), quantiles by nearest rank: the value at index `⌈q·n⌉` of the
/// ascending sort.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSummary {
    /// Number of non-diverged records the statistics cover.
    pub count: usize,
    /// Number of diverged records, excluded from the moments.
    pub diverged: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub q10: f64,
    pub q20: f64,
    pub q30: f64,
}

fn nearest_rank(sorted: &[f64], num: usize, denom: usize) -> f64 {
    // index ⌈num·n/denom⌉, 1-based, in integer arithmetic
    let n = sorted.len();
    let rank = (num * n).div_ceil(denom).max(1);
    sorted[rank - 1]
}

/// Summarises an ensemble; `None` when every record diverged (or the input
/// is empty), since there is nothing to take moments over.
pub fn summarize(records: &[RunRecord]) -> Option<EnsembleSummary> {
    let diverged = records.iter().filter(|r| r.diverged).count();
    let mut values: Vec<f64> = records
        .iter()
        .filter(|r| !r.diverged)
        .map(|r| r.delta_u)
        .collect();
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let std_dev = if n > 1 {
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        (ss / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Some(EnsembleSummary {
        count: n,
        diverged,
        mean,
        std_dev,
        q10: nearest_rank(&values, 1, 10),
        q20: nearest_rank(&values, 2, 10),
        q30: nearest_rank(&values, 3, 10),
    })
}

/// Mean `delta_u` over the non-diverged members of an ensemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanError {
    /// NaN when every member diverged.
    pub value: f64,
    /// Set when at least one member diverged and was excluded.
    pub contaminated: bool,
}

/// Arithmetic mean of `delta_u` over non-diverged records. Divergence of any
/// member marks the result contaminated rather than poisoning the mean.
pub fn average_error(records: &[RunRecord]) -> MeanError {
    let mut sum = 0.0;
    let mut n = 0usize;
    let mut contaminated = false;
    for r in records {
        if r.diverged {
            contaminated = true;
        } else {
            sum += r.delta_u;
            n += 1;
        }
    }
    MeanError {
        value: if n == 0 { f64::NAN } else { sum / n as f64 },
        contaminated,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record(delta_u: f64, diverged: bool) -> RunRecord {
        RunRecord {
            fingerprint: "test".into(),
            seed: 0,
            delta_u,
            final_cost: 0.0,
            diverged,
            wall: Duration::ZERO,
            history: None,
        }
    }

    #[test]
    fn numeric_error_examples() {
        assert_eq!(numeric_error(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(numeric_error(&[1.0, 1.0], &[0.5, 1.25]).unwrap(), 0.75);
        assert!(numeric_error(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn numeric_error_of_flat_trial_against_decay() {
        // TSM with zero parameters is constant 1; Δu = Σ |e^{-5x_i} - 1|
        let ivp = crate::ode::StiffLinearIvp::new(-5.0, 1.0, 2.0).unwrap();
        let grid = crate::ode::Grid::uniform(2.0, 10).unwrap();
        let exact: Vec<f64> = grid.points().iter().map(|&x| ivp.exact_solution(x)).collect();
        let trial = vec![1.0; 10];
        let expected: f64 = grid
            .points()
            .iter()
            .map(|&x| ((-5.0 * x).exp() - 1.0).abs())
            .sum();
        assert_eq!(numeric_error(&exact, &trial).unwrap(), expected);
    }

    #[test]
    fn summarize_single_record() {
        let s = summarize(&[record(0.25, false)]).unwrap();
        assert_eq!(s.count, 1);
        assert_eq!(s.mean, 0.25);
        assert_eq!(s.std_dev, 0.0);
        assert_eq!((s.q10, s.q20, s.q30), (0.25, 0.25, 0.25));
    }

    #[test]
    fn summarize_nearest_rank_quantiles() {
        let records: Vec<RunRecord> = (1..=10).map(|i| record(i as f64, false)).collect();
        let s = summarize(&records).unwrap();
        assert_eq!(s.q10, 1.0);
        assert_eq!(s.q20, 2.0);
        assert_eq!(s.q30, 3.0);
        assert_eq!(s.mean, 5.5);
    }

    #[test]
    fn summarize_excludes_diverged() {
        let records = vec![record(1.0, false), record(f64::NAN, true), record(3.0, false)];
        let s = summarize(&records).unwrap();
        assert_eq!(s.count, 2);
        assert_eq!(s.diverged, 1);
        assert_eq!(s.mean, 2.0);
        assert!(s.mean.is_finite() && s.std_dev.is_finite());
    }

    #[test]
    fn summarize_all_diverged_is_empty() {
        assert!(summarize(&[record(f64::NAN, true)]).is_none());
        assert!(summarize(&[]).is_none());
    }

    #[test]
    fn average_error_flags_contamination() {
        let records: Vec<RunRecord> = (0..99)
            .map(|_| record(2.0, false))
            .chain(std::iter::once(record(f64::NAN, true)))
            .collect();
        let m = average_error(&records);
        assert!(m.contaminated);
        assert_eq!(m.value, 2.0);

        let clean = average_error(&records[..99]);
        assert!(!clean.contaminated);
        assert_eq!(clean.value, 2.0);
    }

    proptest! {
        #[test]
        fn summarize_is_permutation_invariant(mut values in prop::collection::vec(0.0f64..10.0, 1..40)) {
            let records: Vec<RunRecord> = values.iter().map(|&v| record(v, false)).collect();
            let a = summarize(&records).unwrap();
            let third = values.len() / 3;
            values.reverse();
            values.rotate_left(third);
            let records: Vec<RunRecord> = values.iter().map(|&v| record(v, false)).collect();
            let b = summarize(&records).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn quantiles_are_monotone(values in prop::collection::vec(0.0f64..10.0, 1..60)) {
            let records: Vec<RunRecord> = values.iter().map(|&v| record(v, false)).collect();
            let s = summarize(&records).unwrap();
            let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(s.q10 <= s.q20 && s.q20 <= s.q30 && s.q30 <= max);
        }

        #[test]
        fn numeric_error_is_a_metric(
            a in prop::collection::vec(-5.0f64..5.0, 6),
            b in prop::collection::vec(-5.0f64..5.0, 6),
            c in prop::collection::vec(-5.0f64..5.0, 6),
        ) {
            let dab = numeric_error(&a, &b).unwrap();
            let dba = numeric_error(&b, &a).unwrap();
            prop_assert!((dab - dba).abs() < 1e-12, "symmetry");
            prop_assert_eq!(numeric_error(&a, &a).unwrap(), 0.0, "identity");
            let dac = numeric_error(&a, &c).unwrap();
            let dcb = numeric_error(&c, &b).unwrap();
            prop_assert!(dab <= dac + dcb + 1e-12, "triangle inequality");
        }
    }
}
