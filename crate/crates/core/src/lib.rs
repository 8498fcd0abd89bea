//! Coupled magnetic (spin orientation) and optomechanical (density)
//! self-organization of a cold atomic cloud in front of a feedback mirror.
//!
//! * [`physics`]: constants, parameters and closed-form derived quantities.
//! * [`lsa`]: growth rates and thresholds of the homogeneous state.
//! * [`optics`]: phase imprint, diffraction to the mirror and pump rates.
//! * [`dynamics`]: nonlinear (ρ, w) integration with the optical loop.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod lsa;
pub mod optics;
pub mod physics;
pub mod roots;
pub mod spectral;

pub use error::{Error, Result};
pub use physics::{AtomSpecies, SystemParams};
