//! Scalar diffraction of an apodized, possibly aberrated circular pupil:
//! focal intensity maps, on-axis profiles, Strehl ratios and MTFs.
//!
//! Intensities use the peak-unity convention: the aberration-free uniform
//! pupil peaks at exactly 1, and every pupil is normalised to the same power,
//! so maps of different pupils carry the same total flux.

mod map;
mod mtf;
mod psf;
mod pupil;
mod strehl;

use thiserror::Error;

pub use map::{profile_first_minimum, profile_fwhm, IntensityMap, Normalization};
pub use mtf::{mtf_diffraction_limited, mtf_from_psf, MtfCurve, MAX_TRUNCATED_ENERGY};
pub use psf::{airy_intensity, axial_intensity, focal_intensity, focal_intensity_with, FocalGrid};
pub use pupil::{AberrationSpec, Apodization, Pupil, BESSEL_J1_FIRST_ZERO, DEFAULT_PUPIL_SAMPLES};
pub use strehl::{calibrate_coma, strehl_empirical, strehl_from_rms, ComaCalibration};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiffractionError {
    #[error("invalid pupil: {0}")]
    InvalidPupil(String),
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("focal grid under-resolved: spacing {spacing:.3e} m exceeds λ/(8 NA) = {limit:.3e} m")]
    UnderResolved { spacing: f64, limit: f64 },
    #[error("intensity maps do not share grid geometry")]
    GridMismatch,
    #[error("PSF window truncates {:.2}% of the energy", fraction * 100.0)]
    Truncated { fraction: f64 },
    #[error("no convergence: {0}")]
    NoConvergence(String),
}
