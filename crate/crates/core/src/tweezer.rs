//! Far-red-detuned dipole trap of a focused Gaussian beam.
//!
//! Light shift from the D1 and D2 lines with line-strength weights 1/3 and
//! 2/3 and one shared linewidth Γ:
//!
//! ```text
//! U0 = (ħΓ/4) · P/(π w0² I_sat) · (Γ/(3δ1) + 2Γ/(3δ2))
//! ```
//!
//! which gives `ω_r² = 4 U0 / (m w0²)` and `ω_z² = 2 U0 / (m z_R²)` in the
//! harmonic approximation, with `z_R = π w0² / λ`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::{
    angular_frequency, ATOMIC_MASS_UNIT, BOLTZMANN, HBAR, PLANCK, RB87_D1_WAVELENGTH,
    RB87_D2_WAVELENGTH, RB87_MASS_U,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrapError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("trap light at {wavelength:.4e} m is not red-detuned from both lines")]
    BlueDetuned { wavelength: f64 },
}

/// Detunings (rad/s) of the trap light from the D1 and D2 lines, positive
/// for red detuning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detunings {
    pub d1: f64,
    pub d2: f64,
}

/// Where the trap-depth formula takes its detunings from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DetuningSource {
    /// Line frequency minus trap-light frequency.
    LineFrequencies,
    /// Fixed values, used when the trap wavelength equals `wavelength`.
    Quoted {
        wavelength: f64,
        detunings: Detunings,
    },
}

/// Two-line alkali atom.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomSpecies {
    /// kg
    pub mass: f64,
    /// Γ, rad/s, shared by both lines.
    pub linewidth: f64,
    /// W/m²
    pub saturation_intensity: f64,
    /// rad/s
    pub d1_frequency: f64,
    /// rad/s
    pub d2_frequency: f64,
    pub detuning_source: DetuningSource,
}

impl AtomSpecies {
    /// Rb-87 with Γ = 2π×6 MHz, I_sat = 1.67 mW/cm² and, at 850 nm, the
    /// rounded detunings δ1 = 2π×2.4×10¹³ and δ2 = 2π×3.2×10¹³ rad/s.
    pub fn rubidium_87() -> Self {
        Self {
            detuning_source: DetuningSource::Quoted {
                wavelength: 850e-9,
                detunings: Detunings {
                    d1: 2.0 * PI * 2.4e13,
                    d2: 2.0 * PI * 3.2e13,
                },
            },
            ..Self::rubidium_87_spectroscopic()
        }
    }

    /// Rb-87 with detunings always derived from the D1/D2 line frequencies.
    pub fn rubidium_87_spectroscopic() -> Self {
        Self {
            mass: RB87_MASS_U * ATOMIC_MASS_UNIT,
            linewidth: 2.0 * PI * 6e6,
            saturation_intensity: 16.7,
            d1_frequency: angular_frequency(RB87_D1_WAVELENGTH),
            d2_frequency: angular_frequency(RB87_D2_WAVELENGTH),
            detuning_source: DetuningSource::LineFrequencies,
        }
    }

    pub fn validate(&self) -> Result<(), TrapError> {
        let fields = [
            ("mass", self.mass),
            ("linewidth", self.linewidth),
            ("saturation_intensity", self.saturation_intensity),
            ("d1_frequency", self.d1_frequency),
            ("d2_frequency", self.d2_frequency),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(TrapError::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.d2_frequency <= self.d1_frequency {
            return Err(TrapError::InvalidParameter("D2 must lie above D1".into()));
        }
        Ok(())
    }

    /// Detunings entering the light-shift formula at `trap_wavelength`.
    pub fn light_shift_detunings(&self, trap_wavelength: f64) -> Result<Detunings, TrapError> {
        match self.detuning_source {
            DetuningSource::Quoted {
                wavelength,
                detunings,
            } if (wavelength - trap_wavelength).abs() <= 1e-6 * wavelength => Ok(detunings),
            _ => detunings(self, trap_wavelength),
        }
    }

    /// `Γ/(3δ1) + 2Γ/(3δ2)`
    fn line_weight(&self, trap_wavelength: f64) -> Result<f64, TrapError> {
        let d = self.light_shift_detunings(trap_wavelength)?;
        let g = self.linewidth;
        Ok(g / (3.0 * d.d1) + 2.0 * g / (3.0 * d.d2))
    }
}

/// Trapping laser at the focus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapBeam {
    /// W
    pub power: f64,
    /// 1/e² intensity radius, m.
    pub waist: f64,
    /// m
    pub wavelength: f64,
}

impl TrapBeam {
    pub fn new(power: f64, waist: f64, wavelength: f64) -> Result<Self, TrapError> {
        let beam = Self {
            power,
            waist,
            wavelength,
        };
        beam.validate()?;
        Ok(beam)
    }

    pub fn validate(&self) -> Result<(), TrapError> {
        if !(self.power >= 0.0 && self.power.is_finite()) {
            return Err(TrapError::InvalidParameter(format!(
                "power must be >= 0, got {}",
                self.power
            )));
        }
        if !(self.wavelength > 0.0) {
            return Err(TrapError::InvalidParameter(
                "wavelength must be positive".into(),
            ));
        }
        if !(self.waist > self.wavelength / 4.0) {
            return Err(TrapError::InvalidParameter(format!(
                "waist {:.3e} m is below λ/4 where the Gaussian-beam model fails",
                self.waist
            )));
        }
        Ok(())
    }

    /// `π w0² / λ`
    pub fn rayleigh_range(&self) -> f64 {
        PI * self.waist * self.waist / self.wavelength
    }
}

/// D1/D2 detunings of light at `trap_wavelength`, from the line frequencies.
pub fn detunings(species: &AtomSpecies, trap_wavelength: f64) -> Result<Detunings, TrapError> {
    species.validate()?;
    if !(trap_wavelength > 0.0) {
        return Err(TrapError::InvalidParameter(
            "trap wavelength must be positive".into(),
        ));
    }
    let w = angular_frequency(trap_wavelength);
    let d = Detunings {
        d1: species.d1_frequency - w,
        d2: species.d2_frequency - w,
    };
    if d.d1 <= 0.0 || d.d2 <= 0.0 {
        return Err(TrapError::BlueDetuned {
            wavelength: trap_wavelength,
        });
    }
    Ok(d)
}

/// Depth `U0` (J) of the attractive potential at the focus.
pub fn trap_depth(beam: &TrapBeam, species: &AtomSpecies) -> Result<f64, TrapError> {
    beam.validate()?;
    species.validate()?;
    let weight = species.line_weight(beam.wavelength)?;
    let g = species.linewidth;
    Ok(
        HBAR * g / 4.0 * beam.power / (PI * beam.waist * beam.waist * species.saturation_intensity)
            * weight,
    )
}

/// Beam waist from the radial oscillation frequency:
/// `w0 = [ħΓ/(m ω_r²) · P/(π I_sat) · (Γ/3δ1 + 2Γ/3δ2)]^{1/4}`.
pub fn waist_from_frequency(
    power: f64,
    radial_frequency: f64,
    species: &AtomSpecies,
    trap_wavelength: f64,
) -> Result<f64, TrapError> {
    species.validate()?;
    if !(power > 0.0) || !(radial_frequency > 0.0) {
        return Err(TrapError::InvalidParameter(format!(
            "power and radial frequency must be positive, got {power}, {radial_frequency}"
        )));
    }
    let weight = species.line_weight(trap_wavelength)?;
    let g = species.linewidth;
    let w4 = HBAR * g / (species.mass * radial_frequency * radial_frequency) * power
        / (PI * species.saturation_intensity)
        * weight;
    Ok(w4.powf(0.25))
}

/// Harmonic radial and axial angular frequencies `(ω_r, ω_z)` for depth `depth`.
pub fn oscillation_frequencies(
    depth: f64,
    beam: &TrapBeam,
    species: &AtomSpecies,
) -> Result<(f64, f64), TrapError> {
    beam.validate()?;
    species.validate()?;
    if !(depth > 0.0) {
        return Err(TrapError::InvalidParameter(format!(
            "depth must be positive, got {depth}"
        )));
    }
    let m = species.mass;
    let w0 = beam.waist;
    let zr = beam.rayleigh_range();
    Ok((
        (4.0 * depth / (m * w0 * w0)).sqrt(),
        (2.0 * depth / (m * zr * zr)).sqrt(),
    ))
}

/// `U(r, z) = −U0 exp(−2r²/w(z)²) / (1 + (z/z_R)²)`.
pub fn potential(r: f64, z: f64, depth: f64, beam: &TrapBeam) -> f64 {
    let zr = beam.rayleigh_range();
    let q = 1.0 + (z / zr).powi(2);
    let w2 = beam.waist * beam.waist * q;
    -depth * (-2.0 * r * r / w2).exp() / q
}

/// Summary of a trap, SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapCharacteristics {
    /// J
    pub depth: f64,
    /// m
    pub waist: f64,
    /// m
    pub rayleigh_range: f64,
    /// rad/s
    pub radial_frequency: f64,
    /// rad/s
    pub longitudinal_frequency: f64,
    /// rad/s
    pub detuning_d1: f64,
    /// rad/s
    pub detuning_d2: f64,
}

impl TrapCharacteristics {
    pub fn from_beam(beam: &TrapBeam, species: &AtomSpecies) -> Result<Self, TrapError> {
        let depth = trap_depth(beam, species)?;
        let d = species.light_shift_detunings(beam.wavelength)?;
        let (radial_frequency, longitudinal_frequency) = if depth > 0.0 {
            oscillation_frequencies(depth, beam, species)?
        } else {
            (0.0, 0.0)
        };
        Ok(Self {
            depth,
            waist: beam.waist,
            rayleigh_range: beam.rayleigh_range(),
            radial_frequency,
            longitudinal_frequency,
            detuning_d1: d.d1,
            detuning_d2: d.d2,
        })
    }

    /// Trap for `power` whose waist is inferred from a measured `ω_r`.
    pub fn from_radial_frequency(
        power: f64,
        radial_frequency: f64,
        trap_wavelength: f64,
        species: &AtomSpecies,
    ) -> Result<(TrapBeam, Self), TrapError> {
        let waist = waist_from_frequency(power, radial_frequency, species, trap_wavelength)?;
        let beam = TrapBeam::new(power, waist, trap_wavelength)?;
        Ok((beam, Self::from_beam(&beam, species)?))
    }

    pub fn depth_millikelvin(&self) -> f64 {
        self.depth / BOLTZMANN * 1e3
    }

    pub fn depth_megahertz(&self) -> f64 {
        self.depth / PLANCK * 1e-6
    }

    pub fn report(&self, beam: &TrapBeam) -> TrapReport {
        let khz = |w: f64| w / (2.0 * PI) * 1e-3;
        TrapReport {
            power_mW: beam.power * 1e3,
            trap_wavelength_nm: beam.wavelength * 1e9,
            waist_um: self.waist * 1e6,
            rayleigh_range_um: self.rayleigh_range * 1e6,
            depth_J: self.depth,
            depth_mK: self.depth_millikelvin(),
            depth_MHz: self.depth_megahertz(),
            omega_r_kHz: khz(self.radial_frequency),
            omega_z_kHz: khz(self.longitudinal_frequency),
            delta1_THz: self.detuning_d1 / (2.0 * PI) * 1e-12,
            delta2_THz: self.detuning_d2 / (2.0 * PI) * 1e-12,
        }
    }
}

/// JSON form of [`TrapCharacteristics`] with the unit in every key.
/// Frequencies and detunings are reported as ω/2π.
#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapReport {
    pub power_mW: f64,
    pub trap_wavelength_nm: f64,
    pub waist_um: f64,
    pub rayleigh_range_um: f64,
    pub depth_J: f64,
    pub depth_mK: f64,
    pub depth_MHz: f64,
    pub omega_r_kHz: f64,
    pub omega_z_kHz: f64,
    pub delta1_THz: f64,
    pub delta2_THz: f64,
}
