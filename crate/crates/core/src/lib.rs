//! Simulation and analysis toolkit for a diffraction-limited single-atom
//! optical tweezer.
//!
//! The crate is split along the physics:
//!
//! - [`diffraction`]: scalar focal-spot calculations (PSF, axial profile,
//!   Strehl ratio, MTF) for an apodized and possibly aberrated circular pupil.
//! - [`tweezer`]: far-detuned dipole trap of a focused Gaussian beam acting
//!   on Rb-87, including the waist-from-oscillation-frequency inversion.
//! - [`atomdyn`]: Monte-Carlo release-recapture dynamics and the damped-sine
//!   analysis of the resulting survival curve.
//! - [`detection`]: photon-counting statistics, collisional-blockade telegraph
//!   traces and synthetic CCD imaging with Gaussian spot fitting.
//! - [`cli`]: the `tweezer` command-line front-end.
//!
//! All quantities are SI unless a name says otherwise.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod atomdyn;
pub mod cli;
pub mod constants;
pub mod detection;
pub mod diffraction;
pub mod fit;
pub mod rng;
pub mod tweezer;

mod error;

pub use error::Error;
