//! Classical motion of a single atom in the tweezer: thermal sampling,
//! free flight, symplectic integration in the Gaussian-beam potential,
//! the two-pulse release-recapture sequence and its damped-sine analysis.
//!
//! Gravity is neglected throughout: over a few microseconds of free flight
//! it displaces the atom by well under a nanometre.

mod integrator;
mod phase_space;
mod recapture;
mod sine_fit;

use thiserror::Error;

pub use integrator::{evolve_trapped, GaussianTrap, MIN_STEPS_PER_PERIOD};
pub use phase_space::{
    ellipse_stats, free_flight, sample_thermal, scaled_covariance, EllipseStats, PhaseSpaceState,
    ThermalEnsemble,
};
pub use recapture::{
    recapture_curve, simulate_release_recapture, PulseSequence, RecaptureCurve, STEPS_PER_PERIOD,
};
pub use sine_fit::{fit_damped_sine, DampedSineFit};

use crate::fit::FitError;
use crate::tweezer::TrapError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("k_B·T = {thermal:.3e} J is not below the trap depth {depth:.3e} J")]
    Unbound { thermal: f64, depth: f64 },
    #[error("step {step:.3e} s exceeds the limit {limit:.3e} s (50 steps per radial period)")]
    StepTooLarge { step: f64, limit: f64 },
    #[error(transparent)]
    Trap(#[from] TrapError),
    #[error(transparent)]
    Fit(#[from] FitError),
}
