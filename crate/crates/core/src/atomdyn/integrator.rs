use std::f64::consts::PI;

use nalgebra::Vector3;

use super::{DynamicsError, PhaseSpaceState};
use crate::tweezer::{AtomSpecies, TrapCharacteristics};

/// Lower bound on integration steps per radial period.
pub const MIN_STEPS_PER_PERIOD: f64 = 50.0;

/// Gaussian-beam dipole potential with its analytic force, for one species.
///
/// `U(r, z) = −U0 · exp(−2r²/(w0² q)) / q` with `q = 1 + z²/z_R²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianTrap {
    pub depth: f64,
    pub waist: f64,
    pub rayleigh_range: f64,
    pub mass: f64,
    pub radial_frequency: f64,
}

impl GaussianTrap {
    pub fn new(trap: &TrapCharacteristics, species: &AtomSpecies) -> Self {
        Self {
            depth: trap.depth,
            waist: trap.waist,
            rayleigh_range: trap.rayleigh_range,
            mass: species.mass,
            radial_frequency: trap.radial_frequency,
        }
    }

    pub fn potential(&self, p: &Vector3<f64>) -> f64 {
        let q = 1.0 + (p.z / self.rayleigh_range).powi(2);
        let r2 = p.x * p.x + p.y * p.y;
        -self.depth * (-2.0 * r2 / (self.waist * self.waist * q)).exp() / q
    }

    pub fn acceleration(&self, p: &Vector3<f64>) -> Vector3<f64> {
        let w2 = self.waist * self.waist;
        let zr2 = self.rayleigh_range * self.rayleigh_range;
        let q = 1.0 + p.z * p.z / zr2;
        let a = 2.0 * (p.x * p.x + p.y * p.y) / w2;
        let u = -self.depth * (-a / q).exp() / q;
        let radial = 4.0 * u / (w2 * q);
        let axial = -u * (a / q - 1.0) * 2.0 / (q * zr2);
        Vector3::new(radial * p.x, radial * p.y, axial * p.z) / self.mass
    }

    pub fn energy(&self, s: &PhaseSpaceState) -> f64 {
        0.5 * self.mass * s.velocity.norm_squared() + self.potential(&s.position)
    }

    /// Largest allowed step, `1/(50 f_r)`.
    pub fn max_step(&self) -> f64 {
        2.0 * PI / (MIN_STEPS_PER_PERIOD * self.radial_frequency)
    }
}

/// Velocity-Verlet integration for `duration`, in equal steps no longer
/// than `step`.
pub fn evolve_trapped(
    state: &PhaseSpaceState,
    trap: &GaussianTrap,
    duration: f64,
    step: f64,
) -> Result<PhaseSpaceState, DynamicsError> {
    let limit = trap.max_step();
    if !(step > 0.0) || step > limit * (1.0 + 1e-12) {
        return Err(DynamicsError::StepTooLarge { step, limit });
    }
    if !(duration >= 0.0) || !duration.is_finite() {
        return Err(DynamicsError::InvalidParameter(format!(
            "duration must be >= 0, got {duration}"
        )));
    }
    Ok(verlet(state, trap, duration, step))
}

pub(crate) fn verlet(
    state: &PhaseSpaceState,
    trap: &GaussianTrap,
    duration: f64,
    step: f64,
) -> PhaseSpaceState {
    let n = (duration / step).ceil() as usize;
    if n == 0 {
        return *state;
    }
    let dt = duration / n as f64;
    let mut x = state.position;
    let mut v = state.velocity;
    let mut a = trap.acceleration(&x);
    for _ in 0..n {
        v += a * (0.5 * dt);
        x += v * dt;
        a = trap.acceleration(&x);
        v += a * (0.5 * dt);
    }
    PhaseSpaceState {
        position: x,
        velocity: v,
    }
}
