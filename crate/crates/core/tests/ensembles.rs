use dynelab_core::engine::*;
use dynelab_core::stats::inference::mean_sd;
use dynelab_core::stats::*;
use dynelab_core::{DyneError, PhaseAngle};

fn ph(x: f64) -> PhaseAngle {
    PhaseAngle::new(x).unwrap()
}

fn both() -> Vec<PolicyKind> {
    vec![
        PolicyKind::AdaptiveDyne,
        PolicyKind::Heterodyne { beat_cycles: 90.0 },
    ]
}

#[test]
fn worker_count_does_not_change_results() {
    let mut spec = EnsembleSpec::new(PulseParams::new(5.0, ph(1.0)), both());
    spec.n_steps = 256;
    let one = run_ensemble_with_workers(&spec, 300, 8, 1).unwrap();
    let eight = run_ensemble_with_workers(&spec, 300, 8, 8).unwrap();
    assert_eq!(one, eight);
    for (a, b) in one.reports.iter().zip(&eight.reports) {
        assert_eq!(a.stats().unwrap(), b.stats().unwrap());
    }
}

#[test]
fn partial_ensembles_merge_to_the_whole() {
    let mut spec = EnsembleSpec::new(
        PulseParams::new(5.0, ph(1.0)),
        vec![PolicyKind::AdaptiveDyne],
    );
    spec.n_steps = 128;
    let whole = run_ensemble(&spec, 40, 8).unwrap();
    let shots = &whole.headline("adaptive").unwrap().shots;
    let (left, right) = shots.entries().split_at(17);
    let merged = ShotSet::from_entries(right.to_vec())
        .unwrap()
        .merge(ShotSet::from_entries(left.to_vec()).unwrap())
        .unwrap();
    assert_eq!(&merged, shots);
}

#[test]
fn adaptive_is_unbiased_at_moderate_n() {
    let spec = EnsembleSpec::new(
        PulseParams::new(50.0, ph(-2.2)),
        vec![PolicyKind::AdaptiveDyne],
    );
    let report = run_ensemble(&spec, 5_000, 21).unwrap();
    let stats = report.headline("adaptive").unwrap().stats().unwrap();
    let err = stats.circular_mean.deviation_from(ph(-2.2)).abs();
    assert!(
        err < 3.0 * stats.mean_stderr(),
        "mean error {err}, se {}",
        stats.mean_stderr()
    );
}

#[test]
fn ensemble_variances_scatter_around_pooled_value() {
    // 20 ensembles of 150 shots, each at its own random signal phase.
    let mut per_ensemble = Vec::new();
    let mut pooled_sq = Vec::new();
    for e in 0..20u64 {
        let phi = ph(-3.0 + 6.0 * ((derive_seed(4, e) >> 11) as f64 / (1u64 << 53) as f64));
        let mut spec =
            EnsembleSpec::new(PulseParams::new(20.0, phi), vec![PolicyKind::AdaptiveDyne]);
        spec.n_steps = 1024;
        let rep = run_ensemble(&spec, 150, derive_seed(4, e)).unwrap();
        let r = rep.headline("adaptive").unwrap();
        let stats = r.stats().unwrap();
        per_ensemble.push(stats.wrapped_variance);
        pooled_sq.extend(r.deviations(stats.circular_mean).iter().map(|d| d * d));
    }
    let pooled = pooled_sq.iter().sum::<f64>() / pooled_sq.len() as f64;
    let (mean, sd) = mean_sd(&per_ensemble);
    assert!((mean - pooled).abs() < 1e-12);
    assert!(per_ensemble.iter().any(|&v| v < pooled) && per_ensemble.iter().any(|&v| v > pooled));
    assert!(per_ensemble.iter().all(|&v| (v - pooled).abs() < 4.0 * sd));
}

#[test]
fn run_ensemble_validates_first() {
    let spec = EnsembleSpec::new(PulseParams::new(-1.0, ph(0.0)), both());
    assert!(matches!(
        run_ensemble(&spec, 10, 0),
        Err(DyneError::InvalidParameter { .. })
    ));
    let spec = EnsembleSpec::new(PulseParams::new(1.0, ph(0.0)), both());
    assert!(run_ensemble(&spec, 1, 0).is_err());
    let spec = EnsembleSpec::new(PulseParams::new(1.0, ph(0.0)), vec![]);
    assert!(run_ensemble(&spec, 10, 0).is_err());
}

#[test]
fn sweep_orders_policies_and_photon_numbers() {
    let mut spec = EnsembleSpec::new(PulseParams::new(1.0, ph(0.5)), both());
    spec.n_steps = 1024;
    let rows: Vec<SweepRow> = sweep_photon_number(&spec, &[10.0, 50.0, 300.0], 3_000, 12)
        .unwrap()
        .into_iter()
        .collect::<Result<_, _>>()
        .unwrap();
    assert_eq!(rows.len(), 3);
    for row in &rows {
        let a = row.point("adaptive").unwrap().stats.wrapped_variance;
        let h = row.point("heterodyne").unwrap().stats.wrapped_variance;
        assert!(
            a < h,
            "N={}: adaptive {a} heterodyne {h}",
            row.mean_photon_number
        );
        assert_eq!(
            row.reference.heterodyne_limit,
            2.0 * row.reference.fundamental_limit
        );
    }
    for label in ["adaptive", "heterodyne"] {
        let v: Vec<f64> = rows
            .iter()
            .map(|r| r.point(label).unwrap().stats.wrapped_variance)
            .collect();
        assert!(v.windows(2).all(|w| w[0] > w[1]), "{label}: {v:?}");
    }
}

#[test]
fn sweep_single_point_and_bad_grids() {
    let mut spec = EnsembleSpec::new(PulseParams::new(1.0, ph(0.5)), both());
    spec.n_steps = 64;
    assert_eq!(sweep_photon_number(&spec, &[4.0], 20, 1).unwrap().len(), 1);
    assert!(sweep_photon_number(&spec, &[], 20, 1).is_err());
    assert!(sweep_photon_number(&spec, &[5.0, 4.0], 20, 1).is_err());
    assert!(sweep_photon_number(&spec, &[0.0, 4.0], 20, 1).is_err());
}

#[test]
fn sweep_row_errors_do_not_abort_other_rows() {
    let mut spec = EnsembleSpec::new(PulseParams::new(1.0, ph(0.5)), both());
    spec.n_steps = 64;
    // A bad policy parameter fails every row individually, not the sweep.
    spec.policies = vec![PolicyKind::Heterodyne { beat_cycles: -1.0 }];
    let rows = sweep_photon_number(&spec, &[1.0, 2.0], 20, 1).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.is_err()));
}
