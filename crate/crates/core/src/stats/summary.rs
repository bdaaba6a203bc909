use serde::{Deserialize, Serialize};

use crate::error::{DyneError, Result};
use crate::phase::PhaseAngle;

use super::circular::{resultant, DEGENERATE_RESULTANT};

/// Number of batches used for batch-means standard errors.
pub const DEFAULT_BATCHES: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotEntry {
    /// Trajectory (stream) index within the ensemble.
    pub index: u64,
    pub phi_hat: PhaseAngle,
    pub ambiguous: bool,
}

/// The single-shot estimates of one estimator over an ensemble, held in
/// trajectory-index order.
///
/// Statistics are computed from the ordered sample, so merging partial sets
/// in any grouping or order gives bit-identical results.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ShotSet {
    entries: Vec<ShotEntry>,
}

impl ShotSet {
    pub fn from_entries(mut entries: Vec<ShotEntry>) -> Result<Self> {
        entries.sort_by_key(|e| e.index);
        if entries.windows(2).any(|w| w[0].index == w[1].index) {
            return Err(DyneError::Domain(
                "duplicate trajectory index in shot set".into(),
            ));
        }
        Ok(ShotSet { entries })
    }

    pub fn merge(self, other: ShotSet) -> Result<Self> {
        let mut entries = self.entries;
        entries.extend(other.entries);
        ShotSet::from_entries(entries)
    }

    pub fn entries(&self) -> &[ShotEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn phases(&self) -> Vec<PhaseAngle> {
        self.entries.iter().map(|e| e.phi_hat).collect()
    }

    pub fn ambiguous_count(&self) -> usize {
        self.entries.iter().filter(|e| e.ambiguous).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub n: usize,
    pub circular_mean: PhaseAngle,
    pub holevo_variance: f64,
    pub wrapped_variance: f64,
    /// Batch-means standard error of `wrapped_variance`.
    pub wrapped_variance_stderr: f64,
    pub resultant_length: f64,
    pub ambiguous_count: usize,
}

impl EnsembleStats {
    /// Summarises a sample. Ambiguous shots enter at their substitute value.
    pub fn from_shots(shots: &ShotSet) -> Result<Self> {
        let phases = shots.phases();
        Self::from_phases(&phases, shots.ambiguous_count())
    }

    pub fn from_phases(phases: &[PhaseAngle], ambiguous_count: usize) -> Result<Self> {
        let (r, dir) = resultant(phases)?;
        if r <= DEGENERATE_RESULTANT {
            return Err(DyneError::DegenerateMean { resultant: r });
        }
        let mean = PhaseAngle::new(dir)?;
        let squared: Vec<f64> = phases
            .iter()
            .map(|p| p.deviation_from(mean).powi(2))
            .collect();
        let wrapped = squared.iter().sum::<f64>() / squared.len() as f64;
        Ok(EnsembleStats {
            n: phases.len(),
            circular_mean: mean,
            holevo_variance: (r.powi(-2) - 1.0).max(0.0),
            wrapped_variance: wrapped,
            wrapped_variance_stderr: batch_stderr(&squared, DEFAULT_BATCHES),
            resultant_length: r,
            ambiguous_count,
        })
    }

    /// Standard error of the circular mean, from the wrapped spread.
    pub fn mean_stderr(&self) -> f64 {
        (self.wrapped_variance / self.n as f64).sqrt()
    }
}

/// Batch-means standard error of the mean of `values`.
///
/// The series is cut into `min(n_batches, len)` contiguous batches of nearly
/// equal size; the error is the spread of the batch means over √batches.
/// Returns NaN for fewer than two values.
pub fn batch_stderr(values: &[f64], n_batches: usize) -> f64 {
    let batches = n_batches.min(values.len());
    if batches < 2 {
        return f64::NAN;
    }
    let len = values.len();
    let means: Vec<f64> = (0..batches)
        .map(|b| {
            let chunk = &values[b * len / batches..(b + 1) * len / batches];
            chunk.iter().sum::<f64>() / chunk.len() as f64
        })
        .collect();
    let k = batches as f64;
    let grand = means.iter().sum::<f64>() / k;
    let ss: f64 = means.iter().map(|m| (m - grand).powi(2)).sum();
    (ss / (k * (k - 1.0))).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(pairs: &[(u64, f64)]) -> ShotSet {
        ShotSet::from_entries(
            pairs
                .iter()
                .map(|&(index, x)| ShotEntry {
                    index,
                    phi_hat: PhaseAngle::new(x).unwrap(),
                    ambiguous: x > 2.0,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn duplicate_indices_rejected() {
        let a = set(&[(0, 0.1), (1, 0.2)]);
        let b = set(&[(1, 0.3)]);
        assert!(a.merge(b).is_err());
    }

    #[test]
    fn batch_stderr_of_constant_is_zero() {
        assert_eq!(batch_stderr(&[2.0; 90], 30), 0.0);
        assert!(batch_stderr(&[1.0], 30).is_nan());
    }

    #[test]
    fn batch_stderr_iid_scale() {
        // Alternating ±1: every batch of even length has mean 0.
        let v: Vec<f64> = (0..60)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        assert_eq!(batch_stderr(&v, 30), 0.0);
        // Two batches with means 0 and 1: sd of means 1/√2, over √2.
        let v: Vec<f64> = [0.0; 10].iter().chain([1.0; 10].iter()).copied().collect();
        assert!((batch_stderr(&v, 2) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn counts_ambiguous() {
        let s = set(&[(0, 0.1), (1, 2.5), (2, -0.2)]);
        let stats = EnsembleStats::from_shots(&s).unwrap();
        assert_eq!(stats.ambiguous_count, 1);
        assert_eq!(stats.n, 3);
    }

    proptest! {
        #[test]
        fn merge_is_grouping_independent(
            xs in prop::collection::vec(-1.0f64..1.0, 6..80),
            cut1 in 0usize..100, cut2 in 0usize..100,
        ) {
            let pairs: Vec<(u64, f64)> = xs.iter().enumerate().map(|(i, &x)| (i as u64, x)).collect();
            let n = pairs.len();
            let (c1, c2) = { let a = cut1 % n; let b = cut2 % n; (a.min(b), a.max(b)) };
            let (p, q, r) = (set(&pairs[..c1]), set(&pairs[c1..c2]), set(&pairs[c2..]));
            let left = p.clone().merge(q.clone()).unwrap().merge(r.clone()).unwrap();
            let right = r.merge(p.merge(q).unwrap()).unwrap();
            let whole = set(&pairs);
            prop_assert_eq!(&left, &whole);
            prop_assert_eq!(EnsembleStats::from_shots(&left).unwrap(), EnsembleStats::from_shots(&right).unwrap());
        }

        #[test]
        fn holevo_nonnegative(xs in prop::collection::vec(-3.0f64..3.0, 2..60)) {
            let s = set(&xs.iter().enumerate().map(|(i, &x)| (i as u64, x)).collect::<Vec<_>>());
            if let Ok(stats) = EnsembleStats::from_shots(&s) {
                prop_assert!(stats.holevo_variance >= 0.0);
                prop_assert!(stats.resultant_length <= 1.0 + 1e-12);
            }
        }
    }
}
