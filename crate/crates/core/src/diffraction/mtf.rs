//! Modulation transfer function: measured from a sampled PSF, and the
//! aberration-free circular-aperture reference.

use std::f64::consts::PI;
use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;

use super::pupil::Pupil;
use super::{DiffractionError, IntensityMap};

/// Largest fraction of the PSF energy allowed outside the map window.
pub const MAX_TRUNCATED_ENERGY: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct MtfCurve {
    /// Cycles per meter.
    pub frequencies: Vec<f64>,
    pub values: Vec<f64>,
}

impl MtfCurve {
    /// First sampled frequency at which the curve drops below `threshold`.
    pub fn cutoff(&self, threshold: f64) -> Option<f64> {
        self.frequencies
            .iter()
            .zip(&self.values)
            .find(|(_, &v)| v < threshold)
            .map(|(&f, _)| f)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "frequency_cycles_per_um,mtf")?;
        for (f, v) in self.frequencies.iter().zip(&self.values) {
            writeln!(out, "{},{}", f * 1e-6, v)?;
        }
        Ok(())
    }
}

/// `|DFT{I}|` along the direction `azimuth` (radians from +x), normalised to
/// the zero-frequency value. Frequencies are the DFT bins `k / (n·Δx)` up to
/// the grid Nyquist frequency.
pub fn mtf_from_psf(map: &IntensityMap, azimuth: f64) -> Result<MtfCurve, DiffractionError> {
    if let Some(total) = map.total_flux {
        let truncated = 1.0 - map.window_flux() / total;
        if truncated > MAX_TRUNCATED_ENERGY {
            return Err(DiffractionError::Truncated {
                fraction: truncated,
            });
        }
    }
    let n = map.size();
    let dx = map.grid_spacing();
    let df = 1.0 / (n as f64 * dx);
    let coords: Vec<f64> = (0..n).map(|i| map.coordinate(i)).collect();
    let (ca, sa) = (azimuth.cos(), azimuth.sin());
    let samples = map.samples();
    let dc: f64 = samples.iter().sum();
    if !(dc > 0.0) {
        return Err(DiffractionError::InvalidGrid(
            "PSF carries no energy".into(),
        ));
    }

    let values: Vec<f64> = (0..=n / 2)
        .into_par_iter()
        .map(|k| {
            let nu = k as f64 * df;
            let phx: Vec<Complex64> = coords
                .iter()
                .map(|x| Complex64::from_polar(1.0, -2.0 * PI * nu * ca * x))
                .collect();
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, y) in coords.iter().enumerate() {
                let row = &samples[j * n..(j + 1) * n];
                let mut line = Complex64::new(0.0, 0.0);
                for (s, p) in row.iter().zip(&phx) {
                    line += p * *s;
                }
                acc += line * Complex64::from_polar(1.0, -2.0 * PI * nu * sa * y);
            }
            acc.norm() / dc
        })
        .collect();

    Ok(MtfCurve {
        frequencies: (0..=n / 2).map(|k| k as f64 * df).collect(),
        values,
    })
}

/// Autocorrelation of a uniform circular aperture:
/// `(2/π)(arccos x − x√(1−x²))` with `x = ν / (2 NA/λ)`, zero beyond cutoff.
pub fn mtf_diffraction_limited(frequency: f64, pupil: &Pupil) -> Result<f64, DiffractionError> {
    pupil.validate()?;
    if !pupil.is_uniform() {
        return Err(DiffractionError::NotApplicable(
            "circular-aperture MTF assumes uniform illumination".into(),
        ));
    }
    let x = frequency.abs() / pupil.cutoff_frequency();
    if x >= 1.0 {
        return Ok(0.0);
    }
    Ok(2.0 / PI * (x.acos() - x * (1.0 - x * x).sqrt()))
}
