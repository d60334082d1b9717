//! Fixed-length resampling of entropy trajectories and band statistics.

use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::entropy::EntropyTrajectory;
use crate::par::{self, Exec};

pub const DEFAULT_INTERP_POINTS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedTrajectory {
    pub values: Vec<f64>,
    /// Length of the trajectory before resampling (T + 1).
    pub origin_length: usize,
}

/// Piecewise-linear resampling at `n` evenly spaced points over [0, T].
/// A single-value trajectory is replicated.
pub fn interpolate_values(values: &[f64], n: usize) -> Result<Vec<f64>, AnalysisError> {
    if n < 2 {
        return Err(AnalysisError::TooFewPoints(n));
    }
    match values {
        [] => Err(AnalysisError::Empty("trajectory")),
        [only] => Ok(vec![*only; n]),
        _ => {
            let last = values.len() - 1;
            let span = last as f64;
            let out = (0..n)
                .map(|i| {
                    if i == 0 {
                        return values[0];
                    }
                    if i == n - 1 {
                        return values[last];
                    }
                    let x = i as f64 * span / (n - 1) as f64;
                    let j = (x.floor() as usize).min(last - 1);
                    let frac = x - j as f64;
                    let (a, b) = (values[j], values[j + 1]);
                    if frac == 0.0 || a == b {
                        a
                    } else {
                        (a + (b - a) * frac).clamp(a.min(b), a.max(b))
                    }
                })
                .collect();
            Ok(out)
        }
    }
}

pub fn interpolate_trajectory(
    traj: &EntropyTrajectory,
    n: usize,
) -> Result<NormalizedTrajectory, AnalysisError> {
    Ok(NormalizedTrajectory {
        values: interpolate_values(traj.values(), n)?,
        origin_length: traj.values().len(),
    })
}

pub fn interpolate_all(
    trajs: &[EntropyTrajectory],
    n: usize,
    exec: Exec,
) -> Result<Vec<NormalizedTrajectory>, AnalysisError> {
    par::try_map(exec, trajs, |t| interpolate_trajectory(t, n))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupTrajectoryStats {
    pub mean: Vec<f64>,
    /// Population standard deviation per position.
    pub std: Vec<f64>,
    pub count: usize,
    pub mean_first_error_position: Option<f64>,
}

/// Positionwise running mean and sum of squared deviations. Partial
/// accumulators merge with Chan's pairwise update, so any partition of the
/// input gives the same statistics up to rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct BandAccumulator {
    count: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl BandAccumulator {
    pub fn new(width: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; width],
            m2: vec![0.0; width],
        }
    }

    pub fn push(&mut self, values: &[f64]) {
        debug_assert_eq!(values.len(), self.mean.len());
        self.count += 1;
        let n = self.count as f64;
        for ((m, s), &x) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(values) {
            let delta = x - *m;
            *m += delta / n;
            *s += delta * (x - *m);
        }
    }

    pub fn merge(mut self, other: Self) -> Self {
        if other.count == 0 {
            return self;
        }
        if self.count == 0 {
            return other;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        for i in 0..self.mean.len() {
            let delta = other.mean[i] - self.mean[i];
            self.mean[i] += delta * nb / n;
            self.m2[i] += other.m2[i] + delta * delta * na * nb / n;
        }
        self.count += other.count;
        self
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn population_std(&self) -> Vec<f64> {
        let n = self.count.max(1) as f64;
        self.m2.iter().map(|s| (s.max(0.0) / n).sqrt()).collect()
    }
}

/// Mean and ±1 population-std band over same-length trajectories, plus the
/// mean of the supplied fractional first-error positions.
pub fn aggregate_group(
    trajs: &[NormalizedTrajectory],
    first_error_fracs: Option<&[f64]>,
    exec: Exec,
) -> Result<GroupTrajectoryStats, AnalysisError> {
    let width = trajs.first().ok_or(AnalysisError::Empty("trajectory group"))?.values.len();
    if let Some(bad) = trajs.iter().find(|t| t.values.len() != width) {
        return Err(AnalysisError::MixedLengths {
            expected: width,
            found: bad.values.len(),
        });
    }
    let acc = par::fold_merge(
        exec,
        trajs,
        || BandAccumulator::new(width),
        |mut acc, t| {
            acc.push(&t.values);
            acc
        },
        BandAccumulator::merge,
    );
    let mean_first_error_position = match first_error_fracs {
        Some(fr) if !fr.is_empty() => Some(fr.iter().sum::<f64>() / fr.len() as f64),
        _ => None,
    };
    Ok(GroupTrajectoryStats {
        std: acc.population_std(),
        mean: acc.mean,
        count: acc.count,
        mean_first_error_position,
    })
}

/// Position of first-error step `e` among `steps` steps on the [0, 1] axis.
pub fn first_error_fraction(e: usize, steps: usize) -> f64 {
    if steps <= 1 {
        0.0
    } else {
        e as f64 / (steps - 1) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::build_trajectory;
    use proptest::prelude::*;

    fn nt(v: Vec<f64>) -> NormalizedTrajectory {
        NormalizedTrajectory {
            origin_length: v.len(),
            values: v,
        }
    }

    #[test]
    fn interpolation_cases() {
        assert_eq!(interpolate_values(&[2.0, 1.0, 0.0], 5).unwrap(), [2.0, 1.5, 1.0, 0.5, 0.0]);
        let v = [3.0, 1.0, 2.5, 0.1];
        assert_eq!(interpolate_values(&v, 4).unwrap(), v);
        assert_eq!(interpolate_values(&[0.7, 0.7, 0.7], 9).unwrap(), vec![0.7; 9]);
        assert_eq!(interpolate_values(&[1.2], 3).unwrap(), [1.2, 1.2, 1.2]);
        assert_eq!(interpolate_values(&[1.0, 0.0], 1), Err(AnalysisError::TooFewPoints(1)));
        let t = build_trajectory("x", vec![2.0, 1.0]).unwrap();
        assert_eq!(interpolate_trajectory(&t, 3).unwrap().origin_length, 2);
    }

    #[test]
    fn aggregate_cases() {
        let s = aggregate_group(&[nt(vec![1.0, 2.0, 3.0])], None, Exec::Sequential).unwrap();
        assert_eq!(s.mean, [1.0, 2.0, 3.0]);
        assert_eq!(s.std, [0.0; 3]);
        assert_eq!(s.count, 1);
        assert_eq!(s.mean_first_error_position, None);

        let s = aggregate_group(
            &[nt(vec![1.0; 4]), nt(vec![3.0; 4])],
            Some(&[0.25, 0.75]),
            Exec::Sequential,
        )
        .unwrap();
        assert_eq!(s.mean, [2.0; 4]);
        assert_eq!(s.std, [1.0; 4]);
        assert_eq!(s.mean_first_error_position, Some(0.5));

        assert!(matches!(
            aggregate_group(&[nt(vec![1.0; 4]), nt(vec![1.0; 3])], None, Exec::Sequential),
            Err(AnalysisError::MixedLengths { .. })
        ));
        assert!(aggregate_group(&[], None, Exec::Sequential).is_err());
    }

    #[test]
    fn identical_copies_have_zero_std() {
        let copies: Vec<_> = (0..100).map(|_| nt(vec![0.3, 1.7, 2.9])).collect();
        for exec in [Exec::Sequential, Exec::Parallel] {
            let s = aggregate_group(&copies, None, exec).unwrap();
            assert_eq!(s.mean, [0.3, 1.7, 2.9]);
            assert_eq!(s.std, [0.0; 3]);
        }
    }

    #[test]
    fn fractions() {
        assert_eq!(first_error_fraction(0, 1), 0.0);
        assert_eq!(first_error_fraction(2, 5), 0.5);
        assert_eq!(first_error_fraction(3, 4), 1.0);
    }

    proptest! {
        #[test]
        fn interpolation_stays_in_bounds(
            v in proptest::collection::vec(0.0f64..10.0, 1..15),
            n in 2usize..40,
        ) {
            let out = interpolate_values(&v, n).unwrap();
            let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(out.len(), n);
            prop_assert_eq!(out[0], v[0]);
            prop_assert_eq!(out[n - 1], v[v.len() - 1]);
            for x in out {
                prop_assert!(x >= lo && x <= hi);
            }
        }

        #[test]
        fn merged_accumulators_match_sequential(
            rows in proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, 3), 1..40),
            split in 0usize..40,
        ) {
            let split = split.min(rows.len());
            let mut whole = BandAccumulator::new(3);
            rows.iter().for_each(|r| whole.push(r));
            let mut a = BandAccumulator::new(3);
            let mut b = BandAccumulator::new(3);
            rows[..split].iter().for_each(|r| a.push(r));
            rows[split..].iter().for_each(|r| b.push(r));
            let merged = a.merge(b);
            for i in 0..3 {
                prop_assert!((merged.mean()[i] - whole.mean()[i]).abs() < 1e-9);
                prop_assert!((merged.population_std()[i] - whole.population_std()[i]).abs() < 1e-9);
            }
        }
    }
}
