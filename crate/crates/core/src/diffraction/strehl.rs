//! Strehl ratio: Maréchal estimate, flux-matched peak ratio, and the
//! linear-in-field coma model calibrated against one off-axis point.

use std::f64::consts::PI;

use serde::Serialize;

use super::psf::{focal_intensity_with, FocalGrid};
use super::pupil::{AberrationSpec, Pupil, DEFAULT_PUPIL_SAMPLES};
use super::{DiffractionError, IntensityMap};

/// `max(0, 1 − 4π² Δ²/λ²)`.
pub fn strehl_from_rms(rms_wavefront: f64, wavelength: f64) -> Result<f64, DiffractionError> {
    if !(rms_wavefront >= 0.0) || !(wavelength > 0.0) {
        return Err(DiffractionError::InvalidPupil(format!(
            "need rms_wavefront >= 0 and wavelength > 0, got {rms_wavefront}, {wavelength}"
        )));
    }
    let x = rms_wavefront / wavelength;
    Ok((1.0 - 4.0 * PI * PI * x * x).max(0.0))
}

/// Peak of `map` over peak of `reference` after rescaling `map` to the
/// reference's total flux.
pub fn strehl_empirical(
    map: &IntensityMap,
    reference: &IntensityMap,
) -> Result<f64, DiffractionError> {
    if !map.same_grid(reference) {
        return Err(DiffractionError::GridMismatch);
    }
    let flux_scale = reference.flux() / map.flux();
    Ok(map.peak() * flux_scale / reference.peak())
}

/// Small focal window around the axis, enough to locate a comatic peak.
fn probe_grid(pupil: &Pupil) -> FocalGrid {
    FocalGrid {
        half_extent: 0.75 * pupil.wavelength / pupil.numerical_aperture,
        n_samples: 64,
        defocus: 0.0,
    }
}

/// Evaluates the flux-matched Strehl ratio of `pupil` with `aberration`.
fn strehl_of(
    pupil: &Pupil,
    aberration: AberrationSpec,
    reference: &IntensityMap,
) -> Result<f64, DiffractionError> {
    let aberrated = pupil.with_aberration(aberration)?;
    let map = focal_intensity_with(&aberrated, &probe_grid(pupil), DEFAULT_PUPIL_SAMPLES)?;
    strehl_empirical(&map, reference)
}

/// Coma growing linearly with field height, pinned so that the Strehl ratio
/// hits a target at one field point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComaCalibration {
    /// `a_c / h`, meters of wavefront per meter of field height.
    pub coefficient_per_field: f64,
    pub calibration_field: f64,
    pub target_strehl: f64,
    /// Strehl ratio reached at `calibration_field`.
    pub achieved_strehl: f64,
}

impl ComaCalibration {
    pub fn coefficient_at(&self, field_height: f64) -> f64 {
        self.coefficient_per_field * field_height.abs()
    }

    pub fn aberration_at(&self, field_height: f64) -> AberrationSpec {
        AberrationSpec::coma(self.coefficient_at(field_height))
    }

    pub fn strehl_at(&self, pupil: &Pupil, field_height: f64) -> Result<f64, DiffractionError> {
        let pupil = pupil.unaberrated();
        let reference = focal_intensity_with(&pupil, &probe_grid(&pupil), DEFAULT_PUPIL_SAMPLES)?;
        strehl_of(&pupil, self.aberration_at(field_height), &reference)
    }

    /// Field height at which the Strehl ratio falls to `strehl`.
    pub fn field_for_strehl(&self, pupil: &Pupil, strehl: f64) -> Result<f64, DiffractionError> {
        if self.coefficient_per_field == 0.0 {
            return Err(DiffractionError::NoConvergence(
                "aberration-free model never degrades".into(),
            ));
        }
        let pupil = pupil.unaberrated();
        let reference = focal_intensity_with(&pupil, &probe_grid(&pupil), DEFAULT_PUPIL_SAMPLES)?;
        let coefficient = solve_coma(&pupil, strehl, &reference)?;
        Ok(coefficient / self.coefficient_per_field)
    }
}

/// Finds the coma coefficient, scaled linearly with field height, such that
/// the flux-matched Strehl ratio at `field_height` equals `target_strehl`.
pub fn calibrate_coma(
    pupil: &Pupil,
    target_strehl: f64,
    field_height: f64,
) -> Result<ComaCalibration, DiffractionError> {
    if !(target_strehl > 0.0 && target_strehl <= 1.0) {
        return Err(DiffractionError::InvalidPupil(format!(
            "target Strehl must be in (0, 1], got {target_strehl}"
        )));
    }
    if !(field_height > 0.0) {
        return Err(DiffractionError::InvalidPupil(format!(
            "calibration field height must be positive, got {field_height}"
        )));
    }
    let pupil = pupil.unaberrated();
    if target_strehl == 1.0 {
        return Ok(ComaCalibration {
            coefficient_per_field: 0.0,
            calibration_field: field_height,
            target_strehl,
            achieved_strehl: 1.0,
        });
    }
    let reference = focal_intensity_with(&pupil, &probe_grid(&pupil), DEFAULT_PUPIL_SAMPLES)?;
    let coefficient = solve_coma(&pupil, target_strehl, &reference)?;
    let achieved = strehl_of(&pupil, AberrationSpec::coma(coefficient), &reference)?;
    Ok(ComaCalibration {
        coefficient_per_field: coefficient / field_height,
        calibration_field: field_height,
        target_strehl,
        achieved_strehl: achieved,
    })
}

/// Bisection on the coma coefficient; the Strehl ratio decreases with it.
fn solve_coma(
    pupil: &Pupil,
    target: f64,
    reference: &IntensityMap,
) -> Result<f64, DiffractionError> {
    let s = |a: f64| strehl_of(pupil, AberrationSpec::coma(a), reference);
    let mut lo = 0.0;
    let mut hi = 0.05 * pupil.wavelength;
    while s(hi)? > target {
        lo = hi;
        hi *= 2.0;
        if hi > 10.0 * pupil.wavelength {
            return Err(DiffractionError::NoConvergence(format!(
                "no coma below 10 wavelengths reaches Strehl {target}"
            )));
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let v = s(mid)?;
        if (v - target).abs() < 1e-6 {
            return Ok(mid);
        }
        if v > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mid = 0.5 * (lo + hi);
    if (s(mid)? - target).abs() < 5e-3 {
        Ok(mid)
    } else {
        Err(DiffractionError::NoConvergence(
            "coma bisection stalled".into(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffraction::focal_intensity;

    #[test]
    fn marechal_values() {
        let l = 850e-9;
        assert_eq!(strehl_from_rms(0.0, l).unwrap(), 1.0);
        // 1 − 4π²/196
        assert!((strehl_from_rms(l / 14.0, l).unwrap() - 0.798_579_5).abs() < 1e-6);
        // 1 − 4π²/900
        assert!((strehl_from_rms(l / 30.0, l).unwrap() - 0.956_135).abs() < 1e-6);
        assert_eq!(strehl_from_rms(l, l).unwrap(), 0.0);
        assert!(strehl_from_rms(-1.0, l).is_err());
    }

    #[test]
    fn identical_maps_give_unity() {
        let p = Pupil::new(0.5, 850e-9).unwrap();
        let m = focal_intensity(&p, 2e-6, 64, 0.0).unwrap();
        assert_eq!(strehl_empirical(&m, &m).unwrap(), 1.0);
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let p = Pupil::new(0.5, 850e-9).unwrap();
        let a = focal_intensity(&p, 2e-6, 64, 0.0).unwrap();
        let b = focal_intensity(&p, 2e-6, 128, 0.0).unwrap();
        assert_eq!(
            strehl_empirical(&a, &b),
            Err(DiffractionError::GridMismatch)
        );
    }

    #[test]
    fn unit_target_needs_no_coma() {
        let p = Pupil::new(0.5, 850e-9).unwrap();
        let c = calibrate_coma(&p, 1.0, 30e-6).unwrap();
        assert_eq!(c.coefficient_at(30e-6), 0.0);
        assert!(calibrate_coma(&p, 0.0, 30e-6).is_err());
        assert!(calibrate_coma(&p, 1.2, 30e-6).is_err());
    }

    #[test]
    fn strehl_decreases_with_coma() {
        let p = Pupil::new(0.5, 850e-9).unwrap();
        let reference = focal_intensity_with(&p, &probe_grid(&p), DEFAULT_PUPIL_SAMPLES).unwrap();
        let mut last = 1.0 + 1e-12;
        for k in 0..8 {
            let a = k as f64 * 25e-9;
            let s = strehl_of(&p, AberrationSpec::coma(a), &reference).unwrap();
            assert!(s <= last, "S({a}) = {s} > {last}");
            last = s;
        }
    }
}
