//! Focal-plane and on-axis intensity of a focused circular pupil.
//!
//! The focal field is the Fraunhofer (Debye, scalar) transform of the pupil
//! field. It is evaluated with a separable matrix Fourier transform, so the
//! focal grid spacing is independent of the pupil sampling.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use super::pupil::{Apodization, Pupil, SampledPupil, DEFAULT_PUPIL_SAMPLES};
use super::{DiffractionError, IntensityMap};

/// `(2 J1(ζ)/ζ)²` with `ζ = 2π r NA / λ`.
pub fn airy_intensity(r: f64, pupil: &Pupil) -> Result<f64, DiffractionError> {
    pupil.validate()?;
    if !pupil.is_uniform() || !pupil.aberration.is_zero() {
        return Err(DiffractionError::NotApplicable(
            "closed-form Airy pattern needs a uniform, aberration-free pupil".into(),
        ));
    }
    if !(r >= 0.0) {
        return Err(DiffractionError::InvalidGrid(format!(
            "radius must be >= 0, got {r}"
        )));
    }
    Ok(airy(
        2.0 * PI * r * pupil.numerical_aperture / pupil.wavelength,
    ))
}

pub(crate) fn airy(zeta: f64) -> f64 {
    if zeta.abs() < 1e-8 {
        return 1.0 - zeta * zeta / 4.0;
    }
    let a = 2.0 * puruspe::Jn(1, zeta) / zeta;
    a * a
}

/// Focal-plane sampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocalGrid {
    pub half_extent: f64,
    pub n_samples: usize,
    pub defocus: f64,
}

impl FocalGrid {
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_extent / self.n_samples as f64
    }

    fn validate(&self, pupil: &Pupil) -> Result<(), DiffractionError> {
        let n = self.n_samples;
        if n < 64 || !n.is_multiple_of(2) {
            return Err(DiffractionError::InvalidGrid(format!(
                "focal grid needs an even sample count >= 64, got {n}"
            )));
        }
        if !(self.half_extent >= pupil.airy_first_zero()) {
            return Err(DiffractionError::InvalidGrid(format!(
                "half extent {:.3e} m does not reach the first dark ring at {:.3e} m",
                self.half_extent,
                pupil.airy_first_zero()
            )));
        }
        let limit = pupil.wavelength / (8.0 * pupil.numerical_aperture);
        if self.spacing() > limit {
            return Err(DiffractionError::UnderResolved {
                spacing: self.spacing(),
                limit,
            });
        }
        if !self.defocus.is_finite() {
            return Err(DiffractionError::InvalidGrid(
                "defocus must be finite".into(),
            ));
        }
        Ok(())
    }
}

/// Focal intensity map with the default pupil sampling.
pub fn focal_intensity(
    pupil: &Pupil,
    half_extent: f64,
    n_samples: usize,
    defocus: f64,
) -> Result<IntensityMap, DiffractionError> {
    focal_intensity_with(
        pupil,
        &FocalGrid {
            half_extent,
            n_samples,
            defocus,
        },
        DEFAULT_PUPIL_SAMPLES,
    )
}

/// Focal intensity map on `grid`, sampling the pupil with `pupil_samples`
/// points across its diameter.
pub fn focal_intensity_with(
    pupil: &Pupil,
    grid: &FocalGrid,
    pupil_samples: usize,
) -> Result<IntensityMap, DiffractionError> {
    grid.validate(pupil)?;
    let sampled = SampledPupil::new(pupil, pupil_samples, grid.defocus)?;
    let n = grid.n_samples;
    let dx = grid.spacing();
    let xs: Vec<f64> = (0..n).map(|i| (i as f64 - (n / 2) as f64) * dx).collect();
    let field = matrix_fourier_transform(&sampled, &xs);
    let norm = 1.0 / (sampled.inside as f64).powi(2);
    let samples: Vec<f64> = field.iter().map(|e| e.norm_sqr() * norm).collect();
    Ok(IntensityMap::computed(
        n,
        dx,
        samples,
        grid.defocus,
        sampled.total_flux(),
    ))
}

/// `E(x_i, y_j) = Σ_{m,k} P[m,k] exp(i2π (x_i f_k + y_j f_m))` on the square
/// grid `xs × xs`, returned row-major in `j`.
fn matrix_fourier_transform(pupil: &SampledPupil, xs: &[f64]) -> Vec<Complex64> {
    let np = pupil.n;
    let nx = xs.len();
    let freqs: Vec<f64> = pupil
        .coords
        .iter()
        .map(|u| u * pupil.frequency_scale)
        .collect();

    // kernel[i * np + k] = exp(i 2π x_i f_k)
    let kernel: Vec<Complex64> = xs
        .iter()
        .flat_map(|&x| {
            freqs
                .iter()
                .map(move |&f| Complex64::from_polar(1.0, 2.0 * PI * x * f))
        })
        .collect();

    // Transform along u: partial[m * nx + i] = Σ_k P[m,k] kernel[i,k]
    let mut partial = vec![Complex64::new(0.0, 0.0); np * nx];
    partial.par_chunks_mut(nx).enumerate().for_each(|(m, out)| {
        let Some((lo, hi)) = pupil.row_spans[m] else {
            return;
        };
        let row = &pupil.field[m * np..(m + 1) * np];
        for (i, o) in out.iter_mut().enumerate() {
            let ker = &kernel[i * np..(i + 1) * np];
            let mut acc = Complex64::new(0.0, 0.0);
            for k in lo..=hi {
                acc += row[k] * ker[k];
            }
            *o = acc;
        }
    });

    // Transform along v.
    let mut field = vec![Complex64::new(0.0, 0.0); nx * nx];
    field.par_chunks_mut(nx).enumerate().for_each(|(j, out)| {
        let ker = &kernel[j * np..(j + 1) * np];
        for m in 0..np {
            if pupil.row_spans[m].is_none() {
                continue;
            }
            let c = ker[m];
            let src = &partial[m * nx..(m + 1) * nx];
            for (o, s) in out.iter_mut().zip(src) {
                *o += c * s;
            }
        }
    });
    field
}

/// On-axis intensity against defocus `z`.
///
/// Aberration-free pupils use the paraxial closed form (for a uniform pupil
/// `[sin(u/4)/(u/4)]²`, `u = 2π NA² z / λ`), normalised to 1 at focus.
/// Aberrated pupils are summed over the sampled pupil and normalised to the
/// aberration-free focus of the same apodization.
pub fn axial_intensity(pupil: &Pupil, z_values: &[f64]) -> Result<Vec<f64>, DiffractionError> {
    pupil.validate()?;
    if pupil.aberration.is_zero() {
        return Ok(z_values.iter().map(|&z| paraxial_axial(pupil, z)).collect());
    }
    let reference = on_axis_amplitude(&SampledPupil::new(
        &pupil.unaberrated(),
        DEFAULT_PUPIL_SAMPLES,
        0.0,
    )?);
    z_values
        .iter()
        .map(|&z| {
            let s = SampledPupil::new(pupil, DEFAULT_PUPIL_SAMPLES, z)?;
            Ok((on_axis_amplitude(&s) / reference).norm_sqr())
        })
        .collect()
}

fn on_axis_amplitude(pupil: &SampledPupil) -> Complex64 {
    pupil.field.iter().sum()
}

fn paraxial_axial(pupil: &Pupil, z: f64) -> f64 {
    let u = 2.0 * PI * pupil.numerical_aperture.powi(2) * z / pupil.wavelength;
    match pupil.apodization {
        Apodization::Uniform => {
            let a = u / 4.0;
            if a.abs() < 1e-8 {
                1.0
            } else {
                (a.sin() / a).powi(2)
            }
        }
        Apodization::Gaussian { waist_over_radius } => {
            // ∫₀¹ exp(c t) dt with t = ρ², c = −1/β² + i u/2
            let b2 = waist_over_radius * waist_over_radius;
            let c = Complex64::new(-1.0 / b2, u / 2.0);
            let focus = b2 * (1.0 - (-1.0 / b2).exp());
            let val = if c.norm() < 1e-12 {
                Complex64::new(1.0, 0.0)
            } else {
                (c.exp() - 1.0) / c
            };
            val.norm_sqr() / (focus * focus)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffraction::AberrationSpec;

    fn pupil() -> Pupil {
        Pupil::new(0.5, 850e-9).unwrap()
    }

    #[test]
    fn airy_is_one_on_axis() {
        assert_eq!(airy_intensity(0.0, &pupil()).unwrap(), 1.0);
    }

    #[test]
    fn airy_vanishes_at_first_ring() {
        let p = pupil();
        assert!(airy_intensity(p.airy_first_zero(), &p).unwrap() < 1e-12);
        assert!((p.airy_first_zero() - 1.0366e-6).abs() < 1e-9);
    }

    #[test]
    fn airy_rejects_apodized_or_aberrated_pupil() {
        let g = pupil()
            .with_apodization(Apodization::Gaussian {
                waist_over_radius: 1.0,
            })
            .unwrap();
        assert!(matches!(
            airy_intensity(0.1e-6, &g),
            Err(DiffractionError::NotApplicable(_))
        ));
        let a = pupil()
            .with_aberration(AberrationSpec::coma(50e-9))
            .unwrap();
        assert!(airy_intensity(0.1e-6, &a).is_err());
    }

    #[test]
    fn under_resolved_grid_is_rejected() {
        // 64 samples over ±8 µm: 250 nm spacing > λ/(8 NA) = 212.5 nm.
        let err = focal_intensity(&pupil(), 8e-6, 64, 0.0).unwrap_err();
        assert!(matches!(err, DiffractionError::UnderResolved { .. }));
        assert!(focal_intensity(&pupil(), 4e-6, 63, 0.0).is_err());
        assert!(focal_intensity(&pupil(), 0.5e-6, 64, 0.0).is_err());
    }

    #[test]
    fn focal_map_peaks_at_unity_on_axis() {
        let m = focal_intensity(&pupil(), 2e-6, 64, 0.0).unwrap();
        let c = m.size() / 2;
        assert!((m.at(c, c) - 1.0).abs() < 1e-12);
        assert!(m.samples().iter().all(|&v| v <= 1.0 + 1e-12));
    }

    #[test]
    fn defocused_map_centre_matches_axial_profile() {
        let p = pupil();
        let z = 2.5e-6;
        let m = focal_intensity(&p, 2e-6, 64, z).unwrap();
        let c = m.size() / 2;
        let axial = axial_intensity(&p, &[z]).unwrap()[0];
        assert!(
            (m.at(c, c) - axial).abs() < 5e-3,
            "{} vs {}",
            m.at(c, c),
            axial
        );
    }

    #[test]
    fn gaussian_axial_closed_form_matches_pupil_sum() {
        let g = pupil()
            .with_apodization(Apodization::Gaussian {
                waist_over_radius: 1.0,
            })
            .unwrap();
        let zs = [0.0, 1e-6, 3e-6, 6e-6];
        let closed = axial_intensity(&g, &zs).unwrap();
        // A vanishing aberration forces the sampled-pupil route.
        let tiny = g
            .with_aberration(AberrationSpec {
                spherical_coefficient: 1e-15,
                ..AberrationSpec::none()
            })
            .unwrap();
        let summed = axial_intensity(&tiny, &zs).unwrap();
        for (a, b) in closed.iter().zip(&summed) {
            assert!((a - b).abs() < 2e-3, "{a} vs {b}");
        }
        assert_eq!(closed[0], 1.0);
    }
}
