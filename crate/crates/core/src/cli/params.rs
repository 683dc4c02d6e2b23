//! Typed parameters of each command, with their defaults.
//!
//! Every command has a resolved parameter struct and a matching flag struct
//! whose fields are all optional. Values are merged as JSON objects (config
//! file first, then flags) and deserialised with unknown keys rejected.

use serde::{Deserialize, Serialize};

macro_rules! params {
    ($name:ident / $flags:ident { $($(#[doc = $d:literal])* $field:ident : $ty:ty = $default:expr),* $(,)? }) => {
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        #[serde(deny_unknown_fields, default)]
        pub struct $name {
            $($(#[doc = $d])* pub $field: $ty,)*
        }

        impl Default for $name {
            fn default() -> Self {
                Self { $($field: $default,)* }
            }
        }

        #[derive(Debug, Clone, Default, clap::Args, Serialize)]
        pub struct $flags {
            $(
                $(#[doc = $d])*
                #[arg(long)]
                #[serde(skip_serializing_if = "Option::is_none")]
                pub $field: Option<$ty>,
            )*
        }
    };
}

params!(
    PsfParams
        / PsfFlags {
            /// Numerical aperture of the lens
            numerical_aperture: f64 = 0.5,
            /// Wavelength in nm
            wavelength_nm: f64 = 850.0,
            /// Half width of the focal window in µm
            half_extent_um: f64 = 4.0,
            /// Focal samples per side
            samples: usize = 512,
            /// Pupil samples across the diameter
            pupil_samples: usize = 256,
            /// Defocus in µm
            defocus_um: f64 = 0.0,
            /// Pupil illumination: uniform or gaussian
            apodization: String = "uniform".into(),
            /// Gaussian 1/e² intensity radius over pupil radius
            waist_over_radius: f64 = 1.0,
            /// Rms of the random wavefront screen in nm
            rms_wavefront_nm: f64 = 0.0,
            /// Coma coefficient in nm
            coma_nm: f64 = 0.0,
            /// Spherical coefficient in nm
            spherical_nm: f64 = 0.0,
            /// Also write the full map as CSV and JSON
            write_map: bool = false,
        }
);

params!(
    AxialParams
        / AxialFlags {
            /// Numerical aperture of the lens
            numerical_aperture: f64 = 0.5,
            /// Wavelength in nm
            wavelength_nm: f64 = 850.0,
            /// Profile spans ±z_max_um
            z_max_um: f64 = 15.0,
            /// Number of points along z
            points: usize = 601,
            /// Pupil illumination: uniform or gaussian
            apodization: String = "uniform".into(),
            /// Gaussian 1/e² intensity radius over pupil radius
            waist_over_radius: f64 = 1.0,
            /// Rms of the random wavefront screen in nm
            rms_wavefront_nm: f64 = 0.0,
            /// Spherical coefficient in nm
            spherical_nm: f64 = 0.0,
        }
);

params!(
    MtfParams
        / MtfFlags {
            /// Numerical aperture of the lens
            numerical_aperture: f64 = 0.5,
            /// Wavelength in nm
            wavelength_nm: f64 = 850.0,
            /// Half width of the focal window in µm
            half_extent_um: f64 = 25.6,
            /// Focal samples per side
            samples: usize = 512,
            /// Direction of the MTF cut in degrees from +x
            azimuth_deg: f64 = 0.0,
            /// Pupil illumination: uniform or gaussian
            apodization: String = "uniform".into(),
            /// Gaussian 1/e² intensity radius over pupil radius
            waist_over_radius: f64 = 1.0,
            /// Rms of the random wavefront screen in nm
            rms_wavefront_nm: f64 = 0.0,
            /// Coma coefficient in nm
            coma_nm: f64 = 0.0,
            /// MTF level that defines the measured cutoff
            cutoff_threshold: f64 = 1e-3,
        }
);

params!(
    RecaptureParams
        / RecaptureFlags {
            /// Trap power in mW
            power_mw: f64 = 5.6,
            /// Radial trap frequency ω_r/2π in kHz, used to infer the waist
            radial_frequency_khz: f64 = 119.0,
            /// Beam waist in µm; 0 infers it from radial_frequency_khz
            waist_um: f64 = 0.0,
            /// Trap wavelength in nm
            trap_wavelength_nm: f64 = 850.0,
            /// Atom temperature in µK
            temperature_uk: f64 = 50.0,
            /// First release in µs
            first_off_us: f64 = 1.3,
            /// Second release in µs
            second_off_us: f64 = 6.2,
            /// Gaps between releases as start:stop:step in µs, stop inclusive
            gaps_us: String = "0:19.5:0.5".into(),
            /// Monte-Carlo trials per gap
            trials: usize = 10_000,
        }
);

params!(
    HistogramParams
        / HistogramFlags {
            /// Loading rate R in 1/s
            loading_rate: f64 = 0.5,
            /// One-body loss rate γ in 1/s
            loss_rate: f64 = 0.1,
            /// Collisional blockade
            blockade: bool = true,
            /// Trace length in s
            duration_s: f64 = 100.0,
            /// Background count rate in 1/s
            background_rate: f64 = 1.3e4,
            /// Count rate added by one atom in 1/s
            atom_rate: f64 = 2.7e4,
            /// Counting bin in ms
            bin_ms: f64 = 10.0,
        }
);

params!(
    ImageParams
        / ImageFlags {
            /// Distance between the two atoms in µm
            separation_um: f64 = 2.2,
            /// Object-plane 1/e² spot radius in µm
            spot_waist_um: f64 = 0.9,
            /// Detected photons per atom per exposure
            photon_budget: f64 = 1000.0,
            /// Background counts per pixel per exposure
            background: f64 = 5.0,
            /// Read noise in counts rms
            read_noise: f64 = 0.0,
            /// Imaging magnification
            magnification: f64 = 25.0,
            /// Sensor pixel size in µm
            pixel_um: f64 = 13.0,
            /// Sensor width in pixels
            width: usize = 24,
            /// Sensor height in pixels
            height: usize = 16,
            /// Exposure in ms
            exposure_ms: f64 = 100.0,
        }
);

params!(
    TrapParams
        / TrapFlags {
            /// Trap power in mW
            power_mw: f64 = 5.6,
            /// Trap wavelength in nm
            trap_wavelength_nm: f64 = 850.0,
            /// Radial trap frequency ω_r/2π in kHz, used when waist_um is 0
            radial_frequency_khz: f64 = 119.0,
            /// Beam waist in µm; 0 infers it from radial_frequency_khz
            waist_um: f64 = 0.0,
            /// Detunings: quoted (rounded values at 850 nm) or lines (from line frequencies)
            detunings: String = "quoted".into(),
        }
);

/// Parses `start:stop:step` (stop inclusive) into values.
pub fn parse_range(spec: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("range '{spec}' is not start:stop:step"));
    }
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|e| format!("range '{spec}': {e}"))
    };
    let (start, stop, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
    if !(step > 0.0) || !(stop >= start) {
        return Err(format!("range '{spec}' needs step > 0 and stop >= start"));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|k| start + k as f64 * step).collect())
}
