use std::f64::consts::PI;
use std::io::Write;

use serde_json::json;

use super::params::*;
use super::{CliError, Outputs};
use crate::atomdyn::{fit_damped_sine, recapture_curve};
use crate::detection::{
    bin_counts, fit_two_gaussians, optimal_threshold, render_ccd, simulate_telegraph, CcdModel,
    CountHistogram, PhotonRates, Spot, TelegraphConfig,
};
use crate::diffraction::{
    airy_intensity, axial_intensity, focal_intensity_with, mtf_diffraction_limited, mtf_from_psf,
    profile_first_minimum, profile_fwhm, strehl_empirical, AberrationSpec, Apodization, FocalGrid,
    Pupil,
};
use crate::tweezer::{waist_from_frequency, AtomSpecies, TrapBeam, TrapCharacteristics};

fn apodization(kind: &str, waist_over_radius: f64) -> Result<Apodization, CliError> {
    match kind {
        "uniform" => Ok(Apodization::Uniform),
        "gaussian" => Ok(Apodization::Gaussian { waist_over_radius }),
        other => Err(CliError::Config(format!(
            "apodization must be 'uniform' or 'gaussian', got '{other}'"
        ))),
    }
}

fn pupil(
    na: f64,
    wavelength_nm: f64,
    apod: Apodization,
    aberration: AberrationSpec,
) -> Result<Pupil, CliError> {
    Ok(Pupil::new(na, wavelength_nm * 1e-9)?
        .with_apodization(apod)?
        .with_aberration(aberration)?)
}

/// Radius where the Airy pattern falls to one half, by bisection.
fn airy_half_radius(p: &Pupil) -> Result<f64, CliError> {
    let (mut lo, mut hi) = (0.0, p.airy_first_zero());
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if airy_intensity(mid, p)? > 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub(super) fn fig_psf(p: &PsfParams, seed: u64, out: &mut Outputs) -> Result<(), CliError> {
    let aberration = AberrationSpec {
        rms_wavefront: p.rms_wavefront_nm * 1e-9,
        coma_coefficient: p.coma_nm * 1e-9,
        spherical_coefficient: p.spherical_nm * 1e-9,
        screen_seed: seed,
    };
    let pupil = pupil(
        p.numerical_aperture,
        p.wavelength_nm,
        apodization(&p.apodization, p.waist_over_radius)?,
        aberration,
    )?;
    let grid = FocalGrid {
        half_extent: p.half_extent_um * 1e-6,
        n_samples: p.samples,
        defocus: p.defocus_um * 1e-6,
    };
    let map = focal_intensity_with(&pupil, &grid, p.pupil_samples)?;
    let airy_applies = pupil.is_uniform() && pupil.aberration.is_zero();
    let reference = pupil.unaberrated();

    out.write_with("psf_profile.csv", |w| {
        writeln!(w, "r_um,intensity,airy")?;
        for (r, v) in map.radial_profile() {
            let airy = if airy_applies {
                airy_intensity(r, &pupil)
                    .map(|a| a.to_string())
                    .unwrap_or_default()
            } else {
                String::new()
            };
            writeln!(w, "{},{},{}", r * 1e6, v, airy)?;
        }
        Ok(())
    })?;

    let fwhm = map.fwhm()?;
    let ring = map.first_dark_ring().ok();
    let strehl = if pupil.aberration.is_zero() {
        None
    } else {
        let ref_map = focal_intensity_with(&reference, &grid, p.pupil_samples)?;
        Some(strehl_empirical(&map, &ref_map)?)
    };
    let analytic_fwhm = if reference.is_uniform() {
        Some(2.0 * airy_half_radius(&reference)?)
    } else {
        None
    };
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    out.write_with("psf_metrics.csv", |w| {
        writeln!(w, "fwhm_um,first_dark_ring_um,peak,window_flux_fraction,strehl,airy_fwhm_um,airy_first_zero_um")?;
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            fwhm * 1e6,
            opt(ring.map(|r| r * 1e6)),
            map.peak(),
            map.window_flux() / map.flux(),
            opt(strehl),
            opt(analytic_fwhm.map(|f| f * 1e6)),
            reference.airy_first_zero() * 1e6
        )
    })?;
    if p.write_map {
        out.write_with("psf_map.csv", |w| map.write_csv(w))?;
        out.write_json("psf_map.json", &map.to_json())?;
    }
    Ok(())
}

pub(super) fn fig_axial(p: &AxialParams, seed: u64, out: &mut Outputs) -> Result<(), CliError> {
    if p.points < 3 || !(p.z_max_um > 0.0) {
        return Err(CliError::Config("need points >= 3 and z_max_um > 0".into()));
    }
    let aberration = AberrationSpec {
        rms_wavefront: p.rms_wavefront_nm * 1e-9,
        spherical_coefficient: p.spherical_nm * 1e-9,
        screen_seed: seed,
        ..AberrationSpec::none()
    };
    let pupil = pupil(
        p.numerical_aperture,
        p.wavelength_nm,
        apodization(&p.apodization, p.waist_over_radius)?,
        aberration,
    )?;
    let step = 2.0 * p.z_max_um / (p.points - 1) as f64;
    let z_um: Vec<f64> = (0..p.points)
        .map(|k| -p.z_max_um + k as f64 * step)
        .collect();
    let z: Vec<f64> = z_um.iter().map(|z| z * 1e-6).collect();
    let values = axial_intensity(&pupil, &z)?;
    let profile: Vec<(f64, f64)> = z_um.iter().copied().zip(values.iter().copied()).collect();
    out.write_with("axial_profile.csv", |w| {
        writeln!(w, "z_um,intensity")?;
        for (z, v) in &profile {
            writeln!(w, "{z},{v}")?;
        }
        Ok(())
    })?;
    let fwhm = profile_fwhm(&profile);
    let zero = profile_first_minimum(&profile);
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    out.write_with("axial_metrics.csv", |w| {
        writeln!(w, "fwhm_um,first_minimum_um")?;
        writeln!(w, "{},{}", opt(fwhm), opt(zero))
    })
}

pub(super) fn fig_mtf(p: &MtfParams, seed: u64, out: &mut Outputs) -> Result<(), CliError> {
    let aberration = AberrationSpec {
        rms_wavefront: p.rms_wavefront_nm * 1e-9,
        coma_coefficient: p.coma_nm * 1e-9,
        screen_seed: seed,
        ..AberrationSpec::none()
    };
    let pupil = pupil(
        p.numerical_aperture,
        p.wavelength_nm,
        apodization(&p.apodization, p.waist_over_radius)?,
        aberration,
    )?;
    let grid = FocalGrid {
        half_extent: p.half_extent_um * 1e-6,
        n_samples: p.samples,
        defocus: 0.0,
    };
    let map = focal_intensity_with(&pupil, &grid, crate::diffraction::DEFAULT_PUPIL_SAMPLES)?;
    let curve = mtf_from_psf(&map, p.azimuth_deg.to_radians())?;
    let reference_pupil = pupil.unaberrated();
    let reference: Option<Vec<f64>> = if reference_pupil.is_uniform() {
        Some(
            curve
                .frequencies
                .iter()
                .map(|&f| mtf_diffraction_limited(f, &reference_pupil))
                .collect::<Result<_, _>>()?,
        )
    } else {
        None
    };
    out.write_with("mtf.csv", |w| {
        writeln!(w, "frequency_cycles_per_um,mtf,reference")?;
        for (k, (f, v)) in curve.frequencies.iter().zip(&curve.values).enumerate() {
            let r = reference
                .as_ref()
                .map(|r| r[k].to_string())
                .unwrap_or_default();
            writeln!(w, "{},{},{}", f * 1e-6, v, r)?;
        }
        Ok(())
    })?;
    let cutoff = curve.cutoff(p.cutoff_threshold);
    let deviation = reference.as_ref().map(|r| {
        r.iter()
            .zip(&curve.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    });
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    out.write_with("mtf_metrics.csv", |w| {
        writeln!(
            w,
            "cutoff_cycles_per_um,reference_cutoff_cycles_per_um,bin_cycles_per_um,max_abs_deviation,truncated_fraction"
        )?;
        writeln!(
            w,
            "{},{},{},{},{}",
            opt(cutoff.map(|c| c * 1e-6)),
            reference_pupil.cutoff_frequency() * 1e-6,
            1e-6 / (map.size() as f64 * map.grid_spacing()),
            opt(deviation),
            1.0 - map.window_flux() / map.flux()
        )
    })
}

fn trap(
    species: &AtomSpecies,
    power_mw: f64,
    wavelength_nm: f64,
    waist_um: f64,
    radial_frequency_khz: f64,
) -> Result<(TrapBeam, TrapCharacteristics), CliError> {
    let power = power_mw * 1e-3;
    let wavelength = wavelength_nm * 1e-9;
    let waist = if waist_um > 0.0 {
        waist_um * 1e-6
    } else {
        waist_from_frequency(
            power,
            2.0 * PI * radial_frequency_khz * 1e3,
            species,
            wavelength,
        )?
    };
    let beam = TrapBeam::new(power, waist, wavelength)?;
    Ok((beam, TrapCharacteristics::from_beam(&beam, species)?))
}

pub(super) fn fig_recapture(
    p: &RecaptureParams,
    seed: u64,
    out: &mut Outputs,
) -> Result<(), CliError> {
    let species = AtomSpecies::rubidium_87();
    let (beam, trap) = trap(
        &species,
        p.power_mw,
        p.trap_wavelength_nm,
        p.waist_um,
        p.radial_frequency_khz,
    )?;
    let gaps: Vec<f64> = parse_range(&p.gaps_us)
        .map_err(CliError::Config)?
        .iter()
        .map(|g| g * 1e-6)
        .collect();
    let curve = recapture_curve(
        &trap,
        &species,
        p.temperature_uk * 1e-6,
        p.first_off_us * 1e-6,
        p.second_off_us * 1e-6,
        &gaps,
        p.trials,
        seed,
    )?;
    out.write_with("recapture_curve.csv", |w| curve.write_csv(w))?;
    out.write_json("recapture_curve.json", &curve)?;
    let fit = fit_damped_sine(&curve)?;
    let khz = |w: f64| w / (2.0 * PI) * 1e-3;
    let dominant = curve.dominant_frequency();
    let waist_from_fit =
        waist_from_frequency(beam.power, fit.atom_frequency, &species, beam.wavelength)?;
    out.write_json(
        "recapture_fit.json",
        &json!({
            "fit": fit,
            "atom_frequency_kHz": khz(fit.atom_frequency),
            "harmonic_radial_frequency_kHz": khz(trap.radial_frequency),
            "waist_from_fit_um": waist_from_fit * 1e6,
            "dominant_frequency_kHz": dominant.map(|d| d.0 * 1e-3),
            "frequency_bin_kHz": dominant.map(|d| d.1 * 1e-3),
            "trap": trap.report(&beam),
        }),
    )
}

pub(super) fn fig_histogram(
    p: &HistogramParams,
    seed: u64,
    out: &mut Outputs,
) -> Result<(), CliError> {
    let cfg = TelegraphConfig {
        loading_rate: p.loading_rate,
        one_body_loss_rate: p.loss_rate,
        blockade: p.blockade,
        duration: p.duration_s,
        seed,
        initial_occupancy: 0,
    };
    let rates = PhotonRates::new(p.background_rate, p.atom_rate, p.bin_ms * 1e-3)?;
    if !(rates.bin_time > 0.0) {
        return Err(CliError::Config("bin_ms must be positive".into()));
    }
    let trace = simulate_telegraph(&cfg)?;
    let n_bins = (p.duration_s / rates.bin_time + 1e-9).floor() as usize;
    let binned = bin_counts(&trace, &rates, n_bins, seed)?;
    let histogram = CountHistogram::from_counts(&binned.counts, Some(&binned.occupancy));
    out.write_with("telegraph_trace.csv", |w| trace.write_csv(w))?;
    out.write_with("counts.csv", |w| binned.write_csv(w))?;
    out.write_with("histogram.csv", |w| histogram.write_csv(w))?;

    let (l0, l1) = rates.means();
    let threshold = if l0 > 0.0 && l1 > l0 {
        Some(optimal_threshold(l0, l1)?)
    } else {
        None
    };
    let mode = |occ: f64| {
        binned.mode_statistics(occ).map(
            |(n, mean, var)| json!({"bins": n, "mean": mean, "variance": var, "fano": var / mean}),
        )
    };
    out.write_json(
        "detection_summary.json",
        &json!({
            "lambda0": l0,
            "lambda1": l1,
            "threshold": threshold,
            "empty_mode": mode(0.0),
            "single_atom_mode": mode(1.0),
            "time_fraction_single": trace.time_fraction(1),
            "stationary_single": cfg.stationary_single_occupancy(),
            "max_occupancy": trace.max_occupancy(),
            "transitions": trace.events.len() - 1,
        }),
    )
}

pub(super) fn fig_image(p: &ImageParams, seed: u64, out: &mut Outputs) -> Result<(), CliError> {
    let ccd = CcdModel {
        magnification: p.magnification,
        pixel_pitch: p.pixel_um * 1e-6,
        exposure: p.exposure_ms * 1e-3,
        spot_waist: p.spot_waist_um * 1e-6,
        photon_budget: p.photon_budget,
        width: p.width,
        height: p.height,
        background: p.background,
        read_noise: p.read_noise,
    };
    let half = 0.5 * p.separation_um * 1e-6;
    let positions = [(-half, 0.0), (half, 0.0)];
    let img = render_ccd(&positions, Spot::Gaussian, &ccd, seed)?;
    out.write_with("ccd_image.pgm", |w| img.write_pgm(w))?;
    out.write_json(
        "ccd_image.json",
        &json!({
            "width": img.width,
            "height": img.height,
            "object_pixel_pitch_um": img.pitch * 1e6,
            "atom_positions_um": positions.iter().map(|(x, y)| [x * 1e6, y * 1e6]).collect::<Vec<_>>(),
            "model": ccd,
            "total_counts": img.total(),
        }),
    )?;
    let row = img.height / 2;
    out.write_with("cross_section.csv", |w| {
        writeln!(w, "x_um,counts")?;
        for (x, v) in img.cross_section(row) {
            writeln!(w, "{},{}", x * 1e6, v)?;
        }
        Ok(())
    })?;
    let fit = fit_two_gaussians(&img, &ccd)?;
    out.write_json(
        "spot_fit.json",
        &json!({
            "fit": fit,
            "separation_um": fit.separation().map(|s| s * 1e6),
            "waists_um": fit.waists.iter().map(|w| w * 1e6).collect::<Vec<_>>(),
        }),
    )
}

pub(super) fn trap_report(p: &TrapParams, _seed: u64, out: &mut Outputs) -> Result<(), CliError> {
    let species = match p.detunings.as_str() {
        "quoted" => AtomSpecies::rubidium_87(),
        "lines" => AtomSpecies::rubidium_87_spectroscopic(),
        other => {
            return Err(CliError::Config(format!(
                "detunings must be 'quoted' or 'lines', got '{other}'"
            )))
        }
    };
    let (beam, trap) = trap(
        &species,
        p.power_mw,
        p.trap_wavelength_nm,
        p.waist_um,
        p.radial_frequency_khz,
    )?;
    out.write_json("trap_report.json", &trap.report(&beam))
}
