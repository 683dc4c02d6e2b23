//! Sampled focal-plane intensity and profile metrics.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::DiffractionError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Scaled so that the aberration-free uniform pupil peaks at 1 with the
    /// same total flux as every other map from this normalisation.
    PeakUnityReference,
    Raw,
}

/// Square intensity map centred on the optical axis.
///
/// Sample `(i, j)` sits at `x = (i − n/2)·spacing`, `y = (j − n/2)·spacing`,
/// so the axis falls on sample `(n/2, n/2)`. Storage is row-major in `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityMap {
    n: usize,
    grid_spacing: f64,
    samples: Vec<f64>,
    pub defocus: f64,
    pub normalization: Normalization,
    /// Flux over the whole focal plane when known independently of the
    /// window (computed maps); `None` for maps built from raw samples.
    pub total_flux: Option<f64>,
}

impl IntensityMap {
    pub fn from_samples(
        n: usize,
        grid_spacing: f64,
        samples: Vec<f64>,
    ) -> Result<Self, DiffractionError> {
        if samples.len() != n * n {
            return Err(DiffractionError::InvalidGrid(format!(
                "expected {} samples for an {n}x{n} grid, got {}",
                n * n,
                samples.len()
            )));
        }
        if !(grid_spacing > 0.0) {
            return Err(DiffractionError::InvalidGrid(
                "grid spacing must be positive".into(),
            ));
        }
        if samples.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return Err(DiffractionError::InvalidGrid(
                "intensity samples must be finite and >= 0".into(),
            ));
        }
        Ok(Self {
            n,
            grid_spacing,
            samples,
            defocus: 0.0,
            normalization: Normalization::Raw,
            total_flux: None,
        })
    }

    pub(crate) fn computed(
        n: usize,
        grid_spacing: f64,
        samples: Vec<f64>,
        defocus: f64,
        total_flux: f64,
    ) -> Self {
        Self {
            n,
            grid_spacing,
            samples,
            defocus,
            normalization: Normalization::PeakUnityReference,
            total_flux: Some(total_flux),
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn grid_spacing(&self) -> f64 {
        self.grid_spacing
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn coordinate(&self, index: usize) -> f64 {
        (index as f64 - (self.n / 2) as f64) * self.grid_spacing
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.samples[j * self.n + i]
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.n == other.n
            && (self.grid_spacing - other.grid_spacing).abs() <= 1e-12 * self.grid_spacing
    }

    /// Largest sample and its `(i, j)` position.
    pub fn max_sample(&self) -> (f64, usize, usize) {
        let (idx, v) = self
            .samples
            .iter()
            .enumerate()
            .fold(
                (0, f64::MIN),
                |acc, (k, &v)| if v > acc.1 { (k, v) } else { acc },
            );
        (v, idx % self.n, idx / self.n)
    }

    /// Peak value with a three-point parabolic refinement along x and y.
    pub fn peak(&self) -> f64 {
        let (c, i, j) = self.max_sample();
        if i == 0 || j == 0 || i + 1 >= self.n || j + 1 >= self.n {
            return c;
        }
        let lift = |l: f64, r: f64| {
            let curv = l - 2.0 * c + r;
            if curv < 0.0 {
                let delta = 0.5 * (l - r) / curv;
                -0.25 * (l - r) * delta
            } else {
                0.0
            }
        };
        c + lift(self.at(i - 1, j), self.at(i + 1, j)) + lift(self.at(i, j - 1), self.at(i, j + 1))
    }

    /// Riemann sum of the samples over the window, `Σ I · spacing²`.
    pub fn window_flux(&self) -> f64 {
        self.samples.iter().sum::<f64>() * self.grid_spacing * self.grid_spacing
    }

    /// Full-plane flux if known, otherwise the window flux.
    pub fn flux(&self) -> f64 {
        self.total_flux.unwrap_or_else(|| self.window_flux())
    }

    /// `(r, I)` along +x from the axis sample.
    pub fn radial_profile(&self) -> Vec<(f64, f64)> {
        let c = self.n / 2;
        (c..self.n)
            .map(|i| (self.coordinate(i), self.at(i, c)))
            .collect()
    }

    /// Full width at half maximum along x through the brightest sample,
    /// with linear interpolation between bracketing samples.
    pub fn fwhm(&self) -> Result<f64, DiffractionError> {
        let (peak, i0, j0) = self.max_sample();
        let row: Vec<f64> = (0..self.n).map(|i| self.at(i, j0)).collect();
        let half = 0.5 * peak;
        let right = (i0..self.n - 1)
            .find(|&i| row[i + 1] < half)
            .map(|i| i as f64 + (row[i] - half) / (row[i] - row[i + 1]))
            .ok_or_else(|| {
                DiffractionError::InvalidGrid(
                    "profile does not fall to half maximum on the right".into(),
                )
            })?;
        let left = (1..=i0)
            .rev()
            .find(|&i| row[i - 1] < half)
            .map(|i| i as f64 - (row[i] - half) / (row[i] - row[i - 1]))
            .ok_or_else(|| {
                DiffractionError::InvalidGrid(
                    "profile does not fall to half maximum on the left".into(),
                )
            })?;
        Ok((right - left) * self.grid_spacing)
    }

    /// Radius of the first local minimum along +x, refined by a parabola
    /// through the three samples around it.
    pub fn first_dark_ring(&self) -> Result<f64, DiffractionError> {
        let profile = self.radial_profile();
        for k in 1..profile.len() - 1 {
            let (l, c, r) = (profile[k - 1].1, profile[k].1, profile[k + 1].1);
            if c <= l && c < r {
                let curv = l - 2.0 * c + r;
                let delta = 0.5 * (l - r) / curv;
                return Ok(profile[k].0 + delta * self.grid_spacing);
            }
        }
        Err(DiffractionError::InvalidGrid(
            "no dark ring inside the window".into(),
        ))
    }

    /// CSV with one row per sample: `x_um,y_um,intensity`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "x_um,y_um,intensity")?;
        for j in 0..self.n {
            let y = self.coordinate(j) * 1e6;
            for i in 0..self.n {
                writeln!(out, "{},{},{}", self.coordinate(i) * 1e6, y, self.at(i, j))?;
            }
        }
        Ok(())
    }

    /// JSON envelope `{metadata, grid, samples}` with samples as rows of y.
    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<&[f64]> = self.samples.chunks(self.n).collect();
        json!({
            "metadata": {
                "normalization": self.normalization,
                "defocus_m": self.defocus,
                "total_flux_m2": self.total_flux,
                "peak": self.peak(),
            },
            "grid": {
                "n": self.n,
                "spacing_m": self.grid_spacing,
                "origin_m": self.coordinate(0),
            },
            "samples": rows,
        })
    }
}

/// FWHM of a sampled 1D profile `(coordinate, value)` with a single maximum,
/// by linear interpolation at the half-maximum crossings.
pub fn profile_fwhm(profile: &[(f64, f64)]) -> Option<f64> {
    let (imax, &(_, peak)) = profile
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))?;
    let half = 0.5 * peak;
    let cross = |a: (f64, f64), b: (f64, f64)| a.0 + (a.1 - half) / (a.1 - b.1) * (b.0 - a.0);
    let right = (imax..profile.len() - 1)
        .find(|&k| profile[k + 1].1 < half)
        .map(|k| cross(profile[k], profile[k + 1]))?;
    let left = (1..=imax)
        .rev()
        .find(|&k| profile[k - 1].1 < half)
        .map(|k| cross(profile[k], profile[k - 1]))?;
    Some(right - left)
}

/// Position of the first local minimum of a sampled profile after its
/// maximum, refined by a parabola through the three samples around it.
pub fn profile_first_minimum(profile: &[(f64, f64)]) -> Option<f64> {
    let (imax, _) = profile
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))?;
    for k in imax + 1..profile.len().saturating_sub(1) {
        let (l, c, r) = (profile[k - 1].1, profile[k].1, profile[k + 1].1);
        if c <= l && c < r {
            let curv = l - 2.0 * c + r;
            let h = profile[k + 1].0 - profile[k].0;
            return Some(profile[k].0 + 0.5 * (l - r) / curv * h);
        }
    }
    None
}
