//! Circular statistics and ensemble machinery.

mod circular;
mod ensemble;
pub mod inference;
mod summary;
mod sweep;

pub use circular::{
    build_histogram, circular_mean, holevo_variance, interquartile_width, resultant, tail_fraction,
    wrapped_variance, Histogram, DEGENERATE_RESULTANT,
};
pub use ensemble::{
    run_ensemble, run_ensemble_with_workers, EnsembleReport, EnsembleSpec, PolicyReport,
};
pub use summary::{batch_stderr, EnsembleStats, ShotEntry, ShotSet, DEFAULT_BATCHES};
pub use sweep::{reference_curves, sweep_photon_number, ReferenceCurves, SweepPoint, SweepRow};
