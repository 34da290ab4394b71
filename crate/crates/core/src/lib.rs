//! Sparse linear array toolkit: IMISC and baseline array constructions,
//! difference-coarray analysis with closed-form cross-checks, a banded
//! mutual-coupling model, and a coarray-MUSIC direction-finding pipeline
//! with deterministic Monte-Carlo experiment drivers.
//!
//! All positions are integer multiples of the half-wavelength unit spacing;
//! angles are in degrees measured from broadside, physical range (−90°, 90°).

pub use nalgebra;
pub use num_complex;

pub mod coarray;
pub mod crossdiff;
pub mod error;
pub mod estimation;
pub mod experiments;
pub mod geometry;
pub mod music;

pub use coarray::{
    coupling_leakage, coupling_matrix, difference_coarray, imisc_udof_closed_form,
    imisc_udof_residue_form, imisc_weights_closed_form, misc_udof_closed_form,
    misc_weights_closed_form, CoarrayProfile, CouplingModel,
};
pub use crossdiff::{verify_coverage, CoverageReport};
pub use error::{Error, Result};
pub use estimation::{
    analytic_covariance, lag_average, sample_covariance, smoothed_coarray_covariance,
    steering_matrix, steering_vector, synthesize_snapshots, SnapshotSet, SourceScene,
};
pub use experiments::{
    coprime_params, leakage_sweep, nested_params, run_rmse_sweep, trial_seed, udof_sweep,
    verify_formulas, verify_geometry_against_imisc, ArrayKind, FormulaReport, GeometryReport,
    LeakageRow, RmseReport, Scenario, SweepAxis, SweepPoint, SweepSpec, UdofRow,
};
pub use geometry::{
    coprime_geometry, imisc_geometry, imisc_ies, imisc_sub_ulas, max_ies, misc_geometry,
    nested_geometry, ArrayGeometry,
};
pub use music::{coarray_steering, music_estimate, rmse, MusicGrid, MusicResult};
