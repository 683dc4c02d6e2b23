//! Fluorescence detection of single atoms: the collection budget, Poisson
//! photon-count discrimination, collisional-blockade telegraph traces and
//! synthetic CCD imaging with Gaussian spot fitting.

mod counting;
mod imaging;
mod telegraph;

use thiserror::Error;

pub use counting::{
    lifetime_estimate, optimal_threshold, overall_efficiency, poisson_lower_tail,
    poisson_upper_tail, solid_angle_fraction, threshold_errors, EfficiencyBudget, LifetimeFit,
    PhotonRates, Threshold,
};
pub use imaging::{
    fit_single_gaussian, fit_spots, fit_two_gaussians, render_ccd, CcdImage, CcdModel, Spot,
    SpotFit,
};
pub use telegraph::{
    bin_counts, simulate_survival, simulate_telegraph, trace_to_histogram, BinnedCounts,
    CountHistogram, TelegraphConfig, TelegraphTrace,
};

use crate::fit::FitError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectionError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("atom at ({x:.3e}, {y:.3e}) m lies outside the sensor")]
    OutsideSensor { x: f64, y: f64 },
    #[error("lifetime data does not decay")]
    NotDecaying,
    #[error("spots are not resolved: separation {separation:.3e} m < fitted waist {waist:.3e} m")]
    Unresolved { separation: f64, waist: f64 },
    #[error("found {found} local maxima, need {needed}")]
    TooFewMaxima { found: usize, needed: usize },
    #[error(transparent)]
    Fit(#[from] FitError),
}
