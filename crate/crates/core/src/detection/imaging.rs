use std::io::{self, Write};

use puruspe::erf;
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::DetectionError;
use crate::diffraction::IntensityMap;
use crate::fit::LevenbergMarquardt;
use crate::rng;

const PIXEL_BLOCK: u64 = 0xccd0_0000_0000_0000;

/// Camera and imaging optics. Lengths in the object plane unless noted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CcdModel {
    pub magnification: f64,
    /// Physical pixel size on the sensor, m.
    pub pixel_pitch: f64,
    /// s
    pub exposure: f64,
    /// 1/e² intensity radius of an atom's image, referred to the object plane.
    pub spot_waist: f64,
    /// Detected photons per atom per exposure.
    pub photon_budget: f64,
    pub width: usize,
    pub height: usize,
    /// Mean background counts per pixel per exposure.
    pub background: f64,
    /// Gaussian read noise, counts rms.
    pub read_noise: f64,
}

impl Default for CcdModel {
    fn default() -> Self {
        Self {
            magnification: 25.0,
            pixel_pitch: 13e-6,
            exposure: 0.1,
            spot_waist: 0.9e-6,
            photon_budget: 1000.0,
            width: 24,
            height: 16,
            background: 5.0,
            read_noise: 0.0,
        }
    }
}

impl CcdModel {
    pub fn validate(&self) -> Result<(), DetectionError> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        let nonneg = |v: f64| v >= 0.0 && v.is_finite();
        if !pos(self.magnification) || !pos(self.pixel_pitch) || !pos(self.spot_waist) {
            return Err(DetectionError::InvalidParameter(
                "magnification, pixel pitch and spot waist must be positive".into(),
            ));
        }
        if !nonneg(self.exposure)
            || !nonneg(self.photon_budget)
            || !nonneg(self.background)
            || !nonneg(self.read_noise)
        {
            return Err(DetectionError::InvalidParameter(
                "exposure, photon budget, background and read noise must be >= 0".into(),
            ));
        }
        if self.width < 3 || self.height < 3 {
            return Err(DetectionError::InvalidParameter(
                "sensor must be at least 3x3 pixels".into(),
            ));
        }
        Ok(())
    }

    /// Pixel pitch referred to the object plane.
    pub fn object_pitch(&self) -> f64 {
        self.pixel_pitch / self.magnification
    }

    /// Object-plane coordinate of the left (lower) edge of column (row) 0.
    fn origin(&self) -> (f64, f64) {
        let p = self.object_pitch();
        (-0.5 * self.width as f64 * p, -0.5 * self.height as f64 * p)
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        let (x0, y0) = self.origin();
        x >= x0 && x < -x0 && y >= y0 && y < -y0
    }
}

/// Sensor frame in counts, row-major in y.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CcdImage {
    pub width: usize,
    pub height: usize,
    /// Object-plane pixel pitch, m.
    pub pitch: f64,
    pub pixels: Vec<f64>,
}

impl CcdImage {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.pixels[j * self.width + i]
    }

    /// Object-plane centre of pixel `(i, j)`.
    pub fn pixel_center(&self, i: usize, j: usize) -> (f64, f64) {
        (
            (i as f64 + 0.5 - 0.5 * self.width as f64) * self.pitch,
            (j as f64 + 0.5 - 0.5 * self.height as f64) * self.pitch,
        )
    }

    pub fn total(&self) -> f64 {
        self.pixels.iter().sum()
    }

    /// Row `j` as `(x, value)`.
    pub fn cross_section(&self, j: usize) -> Vec<(f64, f64)> {
        (0..self.width)
            .map(|i| (self.pixel_center(i, j).0, self.at(i, j)))
            .collect()
    }

    /// ASCII portable grey map; values rounded and clamped at zero.
    pub fn write_pgm<W: Write>(&self, mut out: W) -> io::Result<()> {
        let vals: Vec<u64> = self
            .pixels
            .iter()
            .map(|v| v.round().max(0.0) as u64)
            .collect();
        let maxval = vals.iter().copied().max().unwrap_or(0).clamp(1, 65535);
        writeln!(out, "P2\n{} {}\n{}", self.width, self.height, maxval)?;
        for row in vals.chunks(self.width) {
            let line: Vec<String> = row.iter().map(|v| v.min(&maxval).to_string()).collect();
            writeln!(out, "{}", line.join(" "))?;
        }
        Ok(())
    }
}

/// Shape of a single atom's image.
#[derive(Debug, Clone, Copy)]
pub enum Spot<'a> {
    /// Gaussian with the model's `spot_waist`.
    Gaussian,
    /// Sampled focal intensity, object-plane coordinates.
    Map(&'a IntensityMap),
}

/// Fraction of a Gaussian of 1/e² radius `w` centred at `c` falling in `[a, b]`.
fn gaussian_fraction(a: f64, b: f64, c: f64, w: f64) -> f64 {
    let s = std::f64::consts::SQRT_2 / w;
    0.5 * (erf((b - c) * s) - erf((a - c) * s))
}

/// Mean counts per pixel before noise.
fn expected_image(positions: &[(f64, f64)], spot: Spot, ccd: &CcdModel) -> Vec<f64> {
    let (w, h) = (ccd.width, ccd.height);
    let p = ccd.object_pitch();
    let (x0, y0) = ccd.origin();
    let mut mean = vec![ccd.background; w * h];
    for &(ax, ay) in positions {
        match spot {
            Spot::Gaussian => {
                let fx: Vec<f64> = (0..w)
                    .map(|i| {
                        gaussian_fraction(
                            x0 + i as f64 * p,
                            x0 + (i + 1) as f64 * p,
                            ax,
                            ccd.spot_waist,
                        )
                    })
                    .collect();
                let fy: Vec<f64> = (0..h)
                    .map(|j| {
                        gaussian_fraction(
                            y0 + j as f64 * p,
                            y0 + (j + 1) as f64 * p,
                            ay,
                            ccd.spot_waist,
                        )
                    })
                    .collect();
                for j in 0..h {
                    for i in 0..w {
                        mean[j * w + i] += ccd.photon_budget * fx[i] * fy[j];
                    }
                }
            }
            Spot::Map(map) => {
                let total: f64 = map.samples().iter().sum();
                if total <= 0.0 {
                    continue;
                }
                let n = map.size();
                for mj in 0..n {
                    let y = ay + map.coordinate(mj);
                    let j = ((y - y0) / p).floor();
                    if j < 0.0 || j >= h as f64 {
                        continue;
                    }
                    for mi in 0..n {
                        let x = ax + map.coordinate(mi);
                        let i = ((x - x0) / p).floor();
                        if i < 0.0 || i >= w as f64 {
                            continue;
                        }
                        mean[j as usize * w + i as usize] +=
                            ccd.photon_budget * map.at(mi, mj) / total;
                    }
                }
            }
        }
    }
    mean
}

/// Synthetic frame of atoms at object-plane `positions` (m), with Poisson
/// noise on signal plus background and optional Gaussian read noise.
pub fn render_ccd(
    positions: &[(f64, f64)],
    spot: Spot,
    ccd: &CcdModel,
    seed: u64,
) -> Result<CcdImage, DetectionError> {
    ccd.validate()?;
    if let Some(&(x, y)) = positions.iter().find(|(x, y)| !ccd.contains(*x, *y)) {
        return Err(DetectionError::OutsideSensor { x, y });
    }
    let mean = expected_image(positions, spot, ccd);
    let pixels = mean
        .par_iter()
        .enumerate()
        .map(|(k, &m)| {
            let mut rng = rng::stream(seed, PIXEL_BLOCK, k as u64);
            let counts = if m > 0.0 {
                Poisson::new(m).map(|d| d.sample(&mut rng)).unwrap_or(0.0)
            } else {
                0.0
            };
            if ccd.read_noise > 0.0 {
                let z: f64 = StandardNormal.sample(&mut rng);
                counts + ccd.read_noise * z
            } else {
                let _ = rng.gen::<u8>();
                counts
            }
        })
        .collect();
    Ok(CcdImage {
        width: ccd.width,
        height: ccd.height,
        pitch: ccd.object_pitch(),
        pixels,
    })
}

/// Fitted Gaussian spots, object-plane lengths in m.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpotFit {
    pub centers: Vec<(f64, f64)>,
    pub waists: Vec<f64>,
    /// Total counts per spot.
    pub amplitudes: Vec<f64>,
    /// Counts per pixel.
    pub background_level: f64,
    /// RMS of the residuals in units of the expected pixel noise.
    pub residual_rms: f64,
    /// Standard errors of the centres, m.
    pub center_errors: Vec<(f64, f64)>,
    pub waist_errors: Vec<f64>,
}

impl SpotFit {
    /// Distance between the first two centres.
    pub fn separation(&self) -> Option<f64> {
        if self.centers.len() < 2 {
            return None;
        }
        let (a, b) = (self.centers[0], self.centers[1]);
        Some((a.0 - b.0).hypot(a.1 - b.1))
    }
}

/// 3×3 box sums, zero outside the frame.
fn box_sums(img: &CcdImage) -> Vec<f64> {
    let (w, h) = (img.width as isize, img.height as isize);
    let mut out = vec![0.0; img.pixels.len()];
    for j in 0..h {
        for i in 0..w {
            let mut s = 0.0;
            for dj in -1..=1 {
                for di in -1..=1 {
                    let (ii, jj) = (i + di, j + dj);
                    if ii >= 0 && jj >= 0 && ii < w && jj < h {
                        s += img.pixels[(jj * w + ii) as usize];
                    }
                }
            }
            out[(j * w + i) as usize] = s;
        }
    }
    out
}

/// Candidate spots `(i, j, box excess)` in decreasing brightness.
fn local_maxima(img: &CcdImage, background: f64) -> Vec<(usize, usize, f64)> {
    let (w, h) = (img.width, img.height);
    let sums = box_sums(img);
    let floor = 9.0 * background + 5.0 * (9.0 * background.max(1.0)).sqrt();
    let mut found = Vec::new();
    for j in 1..h - 1 {
        for i in 1..w - 1 {
            let c = sums[j * w + i];
            if c <= floor {
                continue;
            }
            let mut is_max = true;
            for (di, dj) in [
                (-1, -1),
                (0, -1),
                (1, -1),
                (-1, 0),
                (1, 0),
                (-1, 1),
                (0, 1),
                (1, 1),
            ] {
                let k = ((j as isize + dj) as usize) * w + (i as isize + di) as usize;
                // Ties go to the earlier pixel in scan order.
                let earlier = dj < 0 || (dj == 0 && di < 0);
                if sums[k] > c || (earlier && sums[k] == c) {
                    is_max = false;
                }
            }
            if is_max {
                found.push((i, j, c - 9.0 * background));
            }
        }
    }
    found.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.1.cmp(&b.1)).then(a.0.cmp(&b.0)));
    found
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

/// Least-squares fit of `n_spots` (1 or 2) pixel-integrated Gaussians plus
/// a constant background.
pub fn fit_spots(
    img: &CcdImage,
    ccd: &CcdModel,
    n_spots: usize,
) -> Result<SpotFit, DetectionError> {
    if !(1..=2).contains(&n_spots) {
        return Err(DetectionError::InvalidParameter(format!(
            "can fit 1 or 2 spots, not {n_spots}"
        )));
    }
    ccd.validate()?;
    let (w, h) = (img.width, img.height);
    // Work in µm so that positions, waists and counts are all O(1..1000).
    let um = 1e6;
    let pitch = img.pitch * um;
    let x0 = -0.5 * w as f64 * pitch;
    let y0 = -0.5 * h as f64 * pitch;

    let bg0 = median(&img.pixels);
    let mut peaks: Vec<(usize, usize, f64)> = Vec::new();
    for cand in local_maxima(img, bg0) {
        let apart = peaks
            .iter()
            .all(|p| p.0.abs_diff(cand.0).max(p.1.abs_diff(cand.1)) >= 2);
        if apart {
            peaks.push(cand);
        }
        if peaks.len() == n_spots {
            break;
        }
    }
    if peaks.len() < n_spots {
        return Err(DetectionError::TooFewMaxima {
            found: peaks.len(),
            needed: n_spots,
        });
    }

    let mut init = vec![bg0];
    let mut scales = vec![bg0.max(1.0)];
    for &(i, j, excess) in &peaks {
        let (mut sx, mut sy, mut s) = (0.0, 0.0, 0.0);
        for jj in j - 1..=j + 1 {
            for ii in i - 1..=i + 1 {
                let v = (img.at(ii, jj) - bg0).max(0.0);
                let (cx, cy) = img.pixel_center(ii, jj);
                sx += v * cx * um;
                sy += v * cy * um;
                s += v;
            }
        }
        let a = excess.max(1.0);
        init.extend([a, sx / s, sy / s, ccd.spot_waist * um]);
        scales.extend([a, pitch, pitch, ccd.spot_waist * um]);
    }

    let model = |p: &[f64], out: &mut [f64]| {
        let mut fx = vec![0.0; w];
        let mut fy = vec![0.0; h];
        out.iter_mut().for_each(|o| *o = p[0]);
        for s in 0..n_spots {
            let q = &p[1 + 4 * s..5 + 4 * s];
            if !(q[3] > 0.0) {
                out.iter_mut().for_each(|o| *o = f64::NAN);
                return;
            }
            for (i, f) in fx.iter_mut().enumerate() {
                *f = gaussian_fraction(
                    x0 + i as f64 * pitch,
                    x0 + (i + 1) as f64 * pitch,
                    q[1],
                    q[3],
                );
            }
            for (j, f) in fy.iter_mut().enumerate() {
                *f = gaussian_fraction(
                    y0 + j as f64 * pitch,
                    y0 + (j + 1) as f64 * pitch,
                    q[2],
                    q[3],
                );
            }
            for j in 0..h {
                for i in 0..w {
                    out[j * w + i] += q[0] * fx[i] * fy[j];
                }
            }
        }
    };
    let fit_with = |start: &[f64], weights: &[f64]| {
        LevenbergMarquardt::default().minimize(
            start,
            &scales,
            w * h,
            |p: &[f64], out: &mut [f64]| {
                model(p, out);
                for ((o, d), wt) in out.iter_mut().zip(&img.pixels).zip(weights) {
                    *o = (*o - d) * wt;
                }
            },
        )
    };
    // Unweighted pass, then reweighted by the Poisson plus read-noise
    // variance of that model so the covariance reflects the pixel noise.
    let first = fit_with(&init, &vec![1.0; w * h])?;
    let mut variance = vec![0.0; w * h];
    model(&first.params, &mut variance);
    let weights: Vec<f64> = variance
        .iter()
        .map(|v| 1.0 / (v.max(1.0) + ccd.read_noise * ccd.read_noise).sqrt())
        .collect();
    let sol = fit_with(&first.params, &weights)?;
    let p = &sol.params;
    let var = &sol.covariance_diagonal;

    let mut fit = SpotFit {
        centers: Vec::new(),
        waists: Vec::new(),
        amplitudes: Vec::new(),
        background_level: p[0],
        residual_rms: sol.residual_rms,
        center_errors: Vec::new(),
        waist_errors: Vec::new(),
    };
    for s in 0..n_spots {
        let k = 1 + 4 * s;
        fit.amplitudes.push(p[k]);
        fit.centers.push((p[k + 1] / um, p[k + 2] / um));
        fit.waists.push(p[k + 3].abs() / um);
        fit.center_errors
            .push((var[k + 1].sqrt() / um, var[k + 2].sqrt() / um));
        fit.waist_errors.push(var[k + 3].sqrt() / um);
    }
    if let Some(sep) = fit.separation() {
        let widest = fit.waists.iter().cloned().fold(0.0, f64::max);
        if sep < widest {
            return Err(DetectionError::Unresolved {
                separation: sep,
                waist: widest,
            });
        }
    }
    Ok(fit)
}

pub fn fit_two_gaussians(img: &CcdImage, ccd: &CcdModel) -> Result<SpotFit, DetectionError> {
    fit_spots(img, ccd, 2)
}

pub fn fit_single_gaussian(img: &CcdImage, ccd: &CcdModel) -> Result<SpotFit, DetectionError> {
    fit_spots(img, ccd, 1)
}
