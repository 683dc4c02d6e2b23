//! Circular pupil description and its sampled complex field.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::DiffractionError;
use crate::rng;

/// Pupil samples across the diameter used when callers do not choose.
pub const DEFAULT_PUPIL_SAMPLES: usize = 256;

/// First zero of the Bessel function J1.
pub const BESSEL_J1_FIRST_ZERO: f64 = 3.831_705_970_207_512;

const SCREEN_COMPONENTS: usize = 64;
const SCREEN_BLOCK: u64 = 0x5c2e_e000;

/// Amplitude profile across the pupil.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Apodization {
    Uniform,
    /// Gaussian beam whose 1/e² intensity radius is `waist_over_radius`
    /// times the pupil radius: field amplitude `exp(-ρ²/β²)`.
    Gaussian {
        waist_over_radius: f64,
    },
}

/// Wavefront error of the pupil, all coefficients in meters of optical path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AberrationSpec {
    /// RMS of the random-phase screen added to the structured terms.
    pub rms_wavefront: f64,
    /// Peak coma `a_c` in `W = a_c ρ³ cos φ`, with φ measured from +x.
    pub coma_coefficient: f64,
    /// Primary spherical `a_s` in `W = a_s ρ⁴`.
    pub spherical_coefficient: f64,
    /// Realisation of the random-phase screen.
    pub screen_seed: u64,
}

impl Default for AberrationSpec {
    fn default() -> Self {
        Self::none()
    }
}

impl AberrationSpec {
    pub const fn none() -> Self {
        Self {
            rms_wavefront: 0.0,
            coma_coefficient: 0.0,
            spherical_coefficient: 0.0,
            screen_seed: 0,
        }
    }

    pub fn random(rms_wavefront: f64, screen_seed: u64) -> Self {
        Self {
            rms_wavefront,
            screen_seed,
            ..Self::none()
        }
    }

    pub fn coma(coefficient: f64) -> Self {
        Self {
            coma_coefficient: coefficient,
            ..Self::none()
        }
    }

    pub fn is_zero(&self) -> bool {
        self.rms_wavefront == 0.0
            && self.coma_coefficient == 0.0
            && self.spherical_coefficient == 0.0
    }

    fn validate(&self) -> Result<(), DiffractionError> {
        let coeffs = [
            ("rms_wavefront", self.rms_wavefront),
            ("coma_coefficient", self.coma_coefficient),
            ("spherical_coefficient", self.spherical_coefficient),
        ];
        for (name, v) in coeffs {
            if !(v.is_finite() && v >= 0.0) {
                return Err(DiffractionError::InvalidPupil(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Exit pupil of the focusing system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pupil {
    pub numerical_aperture: f64,
    /// Vacuum wavelength, m.
    pub wavelength: f64,
    pub apodization: Apodization,
    pub aberration: AberrationSpec,
}

impl Pupil {
    /// Uniformly illuminated, aberration-free pupil.
    pub fn new(numerical_aperture: f64, wavelength: f64) -> Result<Self, DiffractionError> {
        let pupil = Self {
            numerical_aperture,
            wavelength,
            apodization: Apodization::Uniform,
            aberration: AberrationSpec::none(),
        };
        pupil.validate()?;
        Ok(pupil)
    }

    pub fn with_apodization(mut self, apodization: Apodization) -> Result<Self, DiffractionError> {
        self.apodization = apodization;
        self.validate()?;
        Ok(self)
    }

    pub fn with_aberration(mut self, aberration: AberrationSpec) -> Result<Self, DiffractionError> {
        self.aberration = aberration;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), DiffractionError> {
        let na = self.numerical_aperture;
        if !(na > 0.0 && na < 1.0) {
            return Err(DiffractionError::InvalidPupil(format!(
                "numerical aperture must be in (0, 1), got {na}"
            )));
        }
        if !(self.wavelength > 0.0 && self.wavelength.is_finite()) {
            return Err(DiffractionError::InvalidPupil(format!(
                "wavelength must be positive, got {}",
                self.wavelength
            )));
        }
        if let Apodization::Gaussian { waist_over_radius } = self.apodization {
            if !(waist_over_radius > 0.0 && waist_over_radius.is_finite()) {
                return Err(DiffractionError::InvalidPupil(format!(
                    "gaussian waist_over_radius must be positive, got {waist_over_radius}"
                )));
            }
        }
        self.aberration.validate()
    }

    /// The same pupil without any wavefront error.
    pub fn unaberrated(&self) -> Self {
        Self {
            aberration: AberrationSpec::none(),
            ..*self
        }
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self.apodization, Apodization::Uniform)
    }

    /// Incoherent cutoff frequency `2 NA / λ`, cycles per meter.
    pub fn cutoff_frequency(&self) -> f64 {
        2.0 * self.numerical_aperture / self.wavelength
    }

    /// Radius of the first dark ring of the Airy pattern, `0.61 λ / NA`.
    pub fn airy_first_zero(&self) -> f64 {
        BESSEL_J1_FIRST_ZERO * self.wavelength / (2.0 * PI * self.numerical_aperture)
    }

    /// Amplitude at normalised radius `rho` (before power normalisation).
    pub(crate) fn amplitude(&self, rho: f64) -> f64 {
        match self.apodization {
            Apodization::Uniform => 1.0,
            Apodization::Gaussian { waist_over_radius } => {
                (-(rho * rho) / (waist_over_radius * waist_over_radius)).exp()
            }
        }
    }
}

/// Pupil field on a square grid of normalised coordinates `(u, v) ∈ [-1, 1]²`.
///
/// Amplitudes are scaled so that `Σ|P|²` equals the number of in-pupil
/// samples, which makes every pupil carry the same power as the uniform one.
#[derive(Debug, Clone)]
pub(crate) struct SampledPupil {
    pub n: usize,
    /// Normalised sample coordinates, symmetric about zero.
    pub coords: Vec<f64>,
    /// Row-major `field[m * n + k]`, row index along v (y), column along u (x).
    pub field: Vec<Complex64>,
    /// Inclusive column range covered by the disc on each row.
    pub row_spans: Vec<Option<(usize, usize)>>,
    pub inside: usize,
    /// Physical spatial frequency per normalised unit, `NA / λ`.
    pub frequency_scale: f64,
}

impl SampledPupil {
    /// Samples `pupil` at focal-plane defocus `defocus` (paraxial quadratic phase).
    pub fn new(pupil: &Pupil, n: usize, defocus: f64) -> Result<Self, DiffractionError> {
        pupil.validate()?;
        if n < 16 {
            return Err(DiffractionError::InvalidGrid(format!(
                "pupil needs at least 16 samples, got {n}"
            )));
        }
        let step = 2.0 / n as f64;
        let coords: Vec<f64> = (0..n)
            .map(|k| (k as f64 - n as f64 / 2.0 + 0.5) * step)
            .collect();
        let k_wave = 2.0 * PI / pupil.wavelength;
        let defocus_phase = PI * pupil.numerical_aperture.powi(2) * defocus / pupil.wavelength;
        let ab = pupil.aberration;

        let mut row_spans = vec![None; n];
        let mut inside_mask = vec![false; n * n];
        let mut inside = 0usize;
        for (m, &v) in coords.iter().enumerate() {
            for (k, &u) in coords.iter().enumerate() {
                if u * u + v * v <= 1.0 {
                    inside_mask[m * n + k] = true;
                    inside += 1;
                    row_spans[m] = Some(match row_spans[m] {
                        None => (k, k),
                        Some((lo, _)) => (lo, k),
                    });
                }
            }
        }

        let screen = if ab.rms_wavefront > 0.0 {
            Some(random_screen(
                &coords,
                &inside_mask,
                ab.rms_wavefront,
                ab.screen_seed,
            ))
        } else {
            None
        };

        let mut amp = vec![0.0; n * n];
        let mut power = 0.0;
        for m in 0..n {
            for k in 0..n {
                let idx = m * n + k;
                if inside_mask[idx] {
                    let (u, v) = (coords[k], coords[m]);
                    let a = pupil.amplitude((u * u + v * v).sqrt());
                    amp[idx] = a;
                    power += a * a;
                }
            }
        }
        let norm = (inside as f64 / power).sqrt();

        let mut field = vec![Complex64::new(0.0, 0.0); n * n];
        for m in 0..n {
            for k in 0..n {
                let idx = m * n + k;
                if !inside_mask[idx] {
                    continue;
                }
                let (u, v) = (coords[k], coords[m]);
                let rho2 = u * u + v * v;
                let mut w = ab.spherical_coefficient * rho2 * rho2 + ab.coma_coefficient * rho2 * u;
                if let Some(screen) = &screen {
                    w += screen[idx];
                }
                let phase = k_wave * w + defocus_phase * rho2;
                field[idx] = Complex64::from_polar(amp[idx] * norm, phase);
            }
        }

        Ok(Self {
            n,
            coords,
            field,
            row_spans,
            inside,
            frequency_scale: pupil.numerical_aperture / pupil.wavelength,
        })
    }

    /// Physical frequency spacing between pupil samples, cycles per meter.
    pub fn frequency_step(&self) -> f64 {
        2.0 / self.n as f64 * self.frequency_scale
    }

    /// Focal-plane flux over the full plane for peak-unity normalisation,
    /// from Parseval's theorem on the pupil side.
    pub fn total_flux(&self) -> f64 {
        let df = self.frequency_step();
        1.0 / (self.inside as f64 * df * df)
    }
}

/// Isotropic random wavefront (meters) on the in-pupil samples, piston and
/// tilt removed and scaled to exactly `rms` over the disc. Tilt only moves
/// the focal spot, so leaving it in would count as error that the peak
/// never sees.
fn random_screen(coords: &[f64], inside: &[bool], rms: f64, seed: u64) -> Vec<f64> {
    let n = coords.len();
    let mut rng = rng::stream(seed, SCREEN_BLOCK, 0);
    let waves: Vec<(f64, f64, f64)> = (0..SCREEN_COMPONENTS)
        .map(|_| {
            let kmag = rng.gen_range(0.2..2.0);
            let dir = rng.gen_range(0.0..2.0 * PI);
            let phase = rng.gen_range(0.0..2.0 * PI);
            (
                2.0 * PI * kmag * dir.cos(),
                2.0 * PI * kmag * dir.sin(),
                phase,
            )
        })
        .collect();

    let mut screen = vec![0.0; n * n];
    let mut normal = Matrix3::<f64>::zeros();
    let mut rhs = Vector3::<f64>::zeros();
    for m in 0..n {
        for k in 0..n {
            let idx = m * n + k;
            if inside[idx] {
                let (u, v) = (coords[k], coords[m]);
                let s: f64 = waves
                    .iter()
                    .map(|(kx, ky, p)| (kx * u + ky * v + p).cos())
                    .sum();
                screen[idx] = s;
                let basis = Vector3::new(1.0, u, v);
                normal += basis * basis.transpose();
                rhs += basis * s;
            }
        }
    }
    let plane = normal.lu().solve(&rhs).unwrap_or_else(Vector3::zeros);
    let mut ss = 0.0;
    let mut count = 0usize;
    for m in 0..n {
        for k in 0..n {
            let idx = m * n + k;
            if inside[idx] {
                screen[idx] -= plane[0] + plane[1] * coords[k] + plane[2] * coords[m];
                ss += screen[idx] * screen[idx];
                count += 1;
            }
        }
    }
    let scale = rms / (ss / count as f64).sqrt();
    for s in &mut screen {
        *s *= scale;
    }
    screen
}
