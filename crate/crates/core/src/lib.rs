//! Geometric phases of an atom–two-mode-cavity system driven around closed
//! loops of drive polarization, and the Ramsey experiment that reads them out.
//!
//! Units: time in ms, angular frequencies in rad/ms, ħ = 1.

#![no_std]

extern crate alloc;

pub mod dynamics;
pub mod error;
pub mod hilbert;
pub mod model;
pub mod phases;
pub mod poincare_path;
pub mod ramsey;

pub use error::{Error, Result};
