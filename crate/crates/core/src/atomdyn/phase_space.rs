use nalgebra::Vector3;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use super::DynamicsError;
use crate::constants::BOLTZMANN;
use crate::rng;
use crate::tweezer::{AtomSpecies, TrapCharacteristics};

pub(crate) const THERMAL_BLOCK: u64 = 0x7e57_0000_0000_0000;

/// Position (x, y radial; z along the beam) and velocity, SI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSpaceState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
}

impl PhaseSpaceState {
    pub fn at_rest() -> Self {
        Self {
            position: Vector3::zeros(),
            velocity: Vector3::zeros(),
        }
    }

    pub fn new(position: [f64; 3], velocity: [f64; 3]) -> Self {
        Self {
            position: Vector3::from(position),
            velocity: Vector3::from(velocity),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.position
            .iter()
            .chain(self.velocity.iter())
            .all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThermalEnsemble {
    /// K
    pub temperature: f64,
    pub count: usize,
    pub seed: u64,
}

/// Per-axis standard deviations of a thermal state in the harmonic trap.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ThermalWidths {
    pub radial: f64,
    pub axial: f64,
    pub velocity: f64,
}

impl ThermalWidths {
    pub fn new(
        temperature: f64,
        trap: &TrapCharacteristics,
        species: &AtomSpecies,
    ) -> Result<Self, DynamicsError> {
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(DynamicsError::InvalidParameter(format!(
                "temperature must be positive, got {temperature}"
            )));
        }
        let kt = BOLTZMANN * temperature;
        if kt >= trap.depth {
            return Err(DynamicsError::Unbound {
                thermal: kt,
                depth: trap.depth,
            });
        }
        let m = species.mass;
        Ok(Self {
            radial: (kt / (m * trap.radial_frequency.powi(2))).sqrt(),
            axial: (kt / (m * trap.longitudinal_frequency.powi(2))).sqrt(),
            velocity: (kt / m).sqrt(),
        })
    }

    pub fn draw<R: rand::Rng>(&self, rng: &mut R) -> PhaseSpaceState {
        let mut g = || -> f64 { StandardNormal.sample(rng) };
        let position = Vector3::new(self.radial * g(), self.radial * g(), self.axial * g());
        let velocity = Vector3::new(
            self.velocity * g(),
            self.velocity * g(),
            self.velocity * g(),
        );
        PhaseSpaceState { position, velocity }
    }
}

/// Thermal states in the harmonic approximation of the trap: Gaussian
/// positions with `σ = √(k_B T/(m ω²))` per axis and Gaussian velocities
/// with `σ_v = √(k_B T/m)`. Atom `i` uses its own keyed random stream.
pub fn sample_thermal(
    ensemble: &ThermalEnsemble,
    trap: &TrapCharacteristics,
    species: &AtomSpecies,
) -> Result<Vec<PhaseSpaceState>, DynamicsError> {
    if ensemble.count == 0 {
        return Err(DynamicsError::InvalidParameter(
            "ensemble count must be >= 1".into(),
        ));
    }
    let widths = ThermalWidths::new(ensemble.temperature, trap, species)?;
    Ok((0..ensemble.count)
        .into_par_iter()
        .map(|i| widths.draw(&mut rng::stream(ensemble.seed, THERMAL_BLOCK, i as u64)))
        .collect())
}

/// Ballistic motion with the trap off.
pub fn free_flight(state: &PhaseSpaceState, duration: f64) -> PhaseSpaceState {
    PhaseSpaceState {
        position: state.position + state.velocity * duration,
        velocity: state.velocity,
    }
}

/// Shape of the radial phase-space distribution after a free flight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EllipseStats {
    /// Angle of the long axis to the position axis, degrees, in (0, 45].
    pub angle: f64,
    /// Long over short standard deviation, >= 1.
    pub axis_ratio: f64,
}

impl EllipseStats {
    /// Long-axis angle and axis ratio of a symmetric 2×2 covariance
    /// `[[a, b], [b, c]]`.
    pub fn from_covariance(a: f64, b: f64, c: f64) -> Self {
        let mean = 0.5 * (a + c);
        let diff = (0.25 * (a - c).powi(2) + b * b).sqrt();
        let (big, small) = (mean + diff, mean - diff);
        // An isotropic distribution has no preferred axis; report 45°.
        let angle = if diff <= 1e-12 * mean {
            45.0
        } else {
            (0.5 * (2.0 * b).atan2(a - c)).to_degrees()
        };
        Self {
            angle,
            axis_ratio: (big / small).sqrt(),
        }
    }
}

/// Analytic shear of an isotropic `(x, v_x/ω_r)` distribution by a free
/// flight: with `s = ω_r t` the unit covariance becomes `[[1+s², s], [s, 1]]`.
pub fn ellipse_stats(
    radial_frequency: f64,
    free_flight: f64,
) -> Result<EllipseStats, DynamicsError> {
    if !(free_flight >= 0.0) || !(radial_frequency > 0.0) {
        return Err(DynamicsError::InvalidParameter(
            "need free_flight >= 0 and radial_frequency > 0".into(),
        ));
    }
    let s = radial_frequency * free_flight;
    Ok(EllipseStats::from_covariance(1.0 + s * s, s, 1.0))
}

/// Sample covariance `[var x, cov, var v/ω]` of `(x, v_x/ω_r)` about the mean.
pub fn scaled_covariance(states: &[PhaseSpaceState], radial_frequency: f64) -> [f64; 3] {
    let n = states.len() as f64;
    let xs = states.iter().map(|s| s.position.x);
    let vs = states.iter().map(|s| s.velocity.x / radial_frequency);
    let mx = xs.clone().sum::<f64>() / n;
    let mv = vs.clone().sum::<f64>() / n;
    let (mut sxx, mut sxv, mut svv) = (0.0, 0.0, 0.0);
    for (x, v) in xs.zip(vs) {
        sxx += (x - mx) * (x - mx);
        sxv += (x - mx) * (v - mv);
        svv += (v - mv) * (v - mv);
    }
    [sxx / n, sxv / n, svv / n]
}
