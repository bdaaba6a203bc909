use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{DyneError, Result};
use crate::phase::{wrap, PhaseAngle};

/// Resultant lengths at or below this have no meaningful mean direction.
pub const DEGENERATE_RESULTANT: f64 = 1e-9;

fn require_nonempty(phases: &[PhaseAngle]) -> Result<()> {
    if phases.is_empty() {
        return Err(DyneError::Domain("phase sample is empty".into()));
    }
    Ok(())
}

/// Mean resultant `(R, direction)` of the unit phasors `e^{iφ_j}`.
pub fn resultant(phases: &[PhaseAngle]) -> Result<(f64, f64)> {
    require_nonempty(phases)?;
    let (c, s) = phases.iter().fold((0.0, 0.0), |(c, s), p| {
        let (pc, ps) = p.phasor();
        (c + pc, s + ps)
    });
    let n = phases.len() as f64;
    let (c, s) = (c / n, s / n);
    Ok((c.hypot(s), s.atan2(c)))
}

fn concentrated(phases: &[PhaseAngle]) -> Result<(f64, PhaseAngle)> {
    let (r, dir) = resultant(phases)?;
    if r <= DEGENERATE_RESULTANT {
        return Err(DyneError::DegenerateMean { resultant: r });
    }
    Ok((r, PhaseAngle::from_finite(dir)))
}

pub fn circular_mean(phases: &[PhaseAngle]) -> Result<PhaseAngle> {
    concentrated(phases).map(|(_, mean)| mean)
}

/// Holevo phase variance `R⁻² − 1`.
pub fn holevo_variance(phases: &[PhaseAngle]) -> Result<f64> {
    concentrated(phases).map(|(r, _)| (r.powi(-2) - 1.0).max(0.0))
}

/// Mean squared deviation from the circular mean, deviations wrapped into (−π, π].
pub fn wrapped_variance(phases: &[PhaseAngle]) -> Result<f64> {
    let mean = circular_mean(phases)?;
    let sum: f64 = phases.iter().map(|p| p.deviation_from(mean).powi(2)).sum();
    Ok(sum / phases.len() as f64)
}

/// Fraction of the sample whose wrapped deviation from `center` exceeds `threshold`.
pub fn tail_fraction(phases: &[PhaseAngle], center: PhaseAngle, threshold: f64) -> Result<f64> {
    require_nonempty(phases)?;
    if !(threshold > 0.0 && threshold < PI) {
        return Err(DyneError::Domain(format!(
            "tail threshold must lie in (0, π), got {threshold}"
        )));
    }
    let hits = phases
        .iter()
        .filter(|p| p.deviation_from(center).abs() > threshold)
        .count();
    Ok(hits as f64 / phases.len() as f64)
}

/// Distance between the first and third quartiles of the wrapped deviations
/// from `center` (linear interpolation between order statistics).
pub fn interquartile_width(phases: &[PhaseAngle], center: PhaseAngle) -> Result<f64> {
    require_nonempty(phases)?;
    let mut dev: Vec<f64> = phases.iter().map(|p| p.deviation_from(center)).collect();
    dev.sort_by(f64::total_cmp);
    Ok(quantile_sorted(&dev, 0.75) - quantile_sorted(&dev, 0.25))
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Equal-width histogram of deviations over (−π, π]. Bins are left-open,
/// `(edge_i, edge_{i+1}]`, so a deviation of exactly π falls in the top bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl Histogram {
    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn bin_width(&self) -> f64 {
        TAU / self.n_bins() as f64
    }

    /// Probability density per radian in each bin.
    pub fn densities(&self) -> Vec<f64> {
        let norm = self.total.max(1) as f64 * self.bin_width();
        self.counts.iter().map(|&c| c as f64 / norm).collect()
    }

    pub fn bin_of(&self, deviation: f64) -> usize {
        let idx = ((deviation + PI) / self.bin_width()).ceil() as isize - 1;
        idx.clamp(0, self.n_bins() as isize - 1) as usize
    }
}

pub fn build_histogram(
    phases: &[PhaseAngle],
    center: PhaseAngle,
    n_bins: usize,
) -> Result<Histogram> {
    if n_bins < 2 {
        return Err(DyneError::Domain(format!(
            "need at least 2 bins, got {n_bins}"
        )));
    }
    let width = TAU / n_bins as f64;
    let mut bin_edges: Vec<f64> = (0..=n_bins).map(|i| -PI + i as f64 * width).collect();
    bin_edges[n_bins] = PI;
    let mut hist = Histogram {
        bin_edges,
        counts: vec![0; n_bins],
        total: phases.len() as u64,
    };
    for p in phases {
        let bin = hist.bin_of(wrap(p.radians() - center.radians()));
        hist.counts[bin] += 1;
    }
    Ok(hist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn phases(xs: &[f64]) -> Vec<PhaseAngle> {
        xs.iter().map(|&x| PhaseAngle::new(x).unwrap()).collect()
    }

    #[test]
    fn symmetric_pair_mean() {
        assert_abs_diff_eq!(
            circular_mean(&phases(&[0.1, -0.1])).unwrap().radians(),
            0.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn mean_across_seam() {
        let m = circular_mean(&phases(&[PI - 0.05, -PI + 0.05])).unwrap();
        assert!(m.deviation_from(PhaseAngle::PI).abs() < 1e-12);
    }

    #[test]
    fn balanced_sample_is_degenerate() {
        let p = phases(&[0.0, PI / 2.0, PI, -PI / 2.0]);
        assert!(matches!(
            circular_mean(&p),
            Err(DyneError::DegenerateMean { .. })
        ));
        assert!(matches!(
            holevo_variance(&p),
            Err(DyneError::DegenerateMean { .. })
        ));
        assert!(matches!(
            wrapped_variance(&p),
            Err(DyneError::DegenerateMean { .. })
        ));
    }

    #[test]
    fn empty_sample_is_a_domain_error() {
        assert!(matches!(circular_mean(&[]), Err(DyneError::Domain(_))));
    }

    #[test]
    fn holevo_values() {
        assert_abs_diff_eq!(
            holevo_variance(&phases(&[0.4; 5])).unwrap(),
            0.0,
            epsilon = 1e-14
        );
        // Resultant cos(π/4), so R⁻² − 1 = tan²(π/4) = 1.
        assert_abs_diff_eq!(
            holevo_variance(&phases(&[PI / 4.0, -PI / 4.0])).unwrap(),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn wrapped_values() {
        assert_eq!(wrapped_variance(&phases(&[0.0, 0.0, 0.0])).unwrap(), 0.0);
        assert_abs_diff_eq!(
            wrapped_variance(&phases(&[PI - 0.1, -PI + 0.1])).unwrap(),
            0.01,
            epsilon = 1e-12
        );
    }

    #[test]
    fn wrapped_variance_matches_gaussian_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let normal = Normal::new(0.0, 0.05).unwrap();
        let raw: Vec<f64> = (0..100_000).map(|_| normal.sample(&mut rng)).collect();
        // Oracle: plain sample statistics on the unwrapped draws.
        let n = raw.len() as f64;
        let mean = raw.iter().sum::<f64>() / n;
        let oracle = raw.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let sd_of_var = (raw
            .iter()
            .map(|x| ((x - mean).powi(2) - oracle).powi(2))
            .sum::<f64>()
            / n)
            .sqrt()
            / n.sqrt();

        let wv = wrapped_variance(&phases(&raw)).unwrap();
        assert!((wv - oracle).abs() < 1e-9);
        assert!(
            (wv - 2.5e-3).abs() < 3.0 * sd_of_var,
            "wv {wv}, se {sd_of_var}"
        );
    }

    #[test]
    fn holevo_and_wrapped_agree_when_concentrated() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for sigma in [0.02, 0.05, 0.1] {
            let normal = Normal::new(0.0, sigma).unwrap();
            let p: Vec<PhaseAngle> = (0..50_000)
                .map(|_| PhaseAngle::new(normal.sample(&mut rng)).unwrap())
                .collect();
            let h = holevo_variance(&p).unwrap();
            let w = wrapped_variance(&p).unwrap();
            assert!(
                ((h - w) / w).abs() < 0.05,
                "sigma {sigma}: holevo {h} wrapped {w}"
            );
        }
    }

    #[test]
    fn histogram_single_point() {
        let h = build_histogram(&phases(&[0.0]), PhaseAngle::ZERO, 4).unwrap();
        assert_eq!(h.counts, vec![0, 1, 0, 0]);
        assert!(h.bin_edges[1] < 0.0 && h.bin_edges[2] >= 0.0);
        assert_eq!(h.total, 1);
    }

    #[test]
    fn histogram_top_boundary() {
        let h = build_histogram(&phases(&[PI]), PhaseAngle::ZERO, 8).unwrap();
        assert_eq!(h.counts[7], 1);
        let h = build_histogram(&phases(&[0.5]), PhaseAngle::new(0.5 - PI).unwrap(), 8).unwrap();
        assert_eq!(h.counts[7], 1);
    }

    #[test]
    fn histogram_rejects_one_bin() {
        assert!(build_histogram(&phases(&[0.0]), PhaseAngle::ZERO, 1).is_err());
    }

    #[test]
    fn tail_values() {
        let c = PhaseAngle::new(0.7).unwrap();
        assert_eq!(tail_fraction(&[c; 10], c, 0.1).unwrap(), 0.0);
        assert_eq!(tail_fraction(&[c.rotate(PI)], c, 2.5).unwrap(), 1.0);
        assert!(tail_fraction(&[c], c, PI).is_err());
        assert!(tail_fraction(&[c], c, 0.0).is_err());
    }

    #[test]
    fn interquartile_of_uniform_grid() {
        let p = phases(
            &(0..=100)
                .map(|i| -1.0 + 0.02 * i as f64)
                .collect::<Vec<_>>(),
        );
        assert_abs_diff_eq!(
            interquartile_width(&p, PhaseAngle::ZERO).unwrap(),
            1.0,
            epsilon = 1e-12
        );
    }

    fn sample() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-0.8f64..0.8, 2..60)
    }

    proptest! {
        #[test]
        fn histogram_conserves_counts(xs in prop::collection::vec(-10.0f64..10.0, 0..200), c in -4.0f64..4.0, bins in 2usize..50) {
            let h = build_histogram(&phases(&xs), PhaseAngle::new(c).unwrap(), bins).unwrap();
            prop_assert_eq!(h.counts.iter().sum::<u64>(), h.total);
            prop_assert_eq!(h.total as usize, xs.len());
            prop_assert!(h.bin_edges.windows(2).all(|w| w[0] < w[1]));
        }

        #[test]
        fn statistics_rotate_with_sample(xs in sample(), delta in -PI..PI) {
            let p = phases(&xs);
            let q: Vec<PhaseAngle> = p.iter().map(|x| x.rotate(delta)).collect();
            let m0 = circular_mean(&p).unwrap();
            let m1 = circular_mean(&q).unwrap();
            prop_assert!(m1.deviation_from(m0.rotate(delta)).abs() < 1e-12);
            prop_assert!((holevo_variance(&p).unwrap() - holevo_variance(&q).unwrap()).abs() < 1e-12);
            prop_assert!((wrapped_variance(&p).unwrap() - wrapped_variance(&q).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn tail_nonincreasing(xs in prop::collection::vec(-4.0f64..4.0, 1..100), t1 in 0.01f64..3.1, t2 in 0.01f64..3.1) {
            let p = phases(&xs);
            let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
            prop_assert!(tail_fraction(&p, PhaseAngle::ZERO, hi).unwrap() <= tail_fraction(&p, PhaseAngle::ZERO, lo).unwrap());
        }

        #[test]
        fn wrapped_variance_bounded(xs in prop::collection::vec(-4.0f64..4.0, 1..100)) {
            if let Ok(v) = wrapped_variance(&phases(&xs)) {
                prop_assert!((0.0..=PI * PI).contains(&v));
            }
        }
    }
}
