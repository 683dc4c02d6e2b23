use thiserror::Error;

use crate::atomdyn::DynamicsError;
use crate::detection::DetectionError;
use crate::diffraction::DiffractionError;
use crate::fit::FitError;
use crate::tweezer::TrapError;

/// Union of the per-module error types.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Diffraction(#[from] DiffractionError),
    #[error(transparent)]
    Trap(#[from] TrapError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Detection(#[from] DetectionError),
    #[error(transparent)]
    Fit(#[from] FitError),
}
