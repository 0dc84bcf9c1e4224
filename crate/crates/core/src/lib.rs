//! Maximum power point tracking toolkit.
//!
//! Everything in this crate is pure computation over plain values and builds
//! without `std` (only `alloc` is required). The pieces compose as:
//!
//! - [`pv_model`]: single-diode panel, implicit current solver, MPP oracle and
//!   datasheet-style calibration.
//! - [`buck`]: averaged buck converter dynamics with a fixed-step RK4 integrator.
//! - [`inverter`]: three-phase voltage-source inverter voltage algebra and a
//!   sine-PWM modulator.
//! - [`controllers`]: classic perturb-and-observe, the sign-based adaptive
//!   variant and its neural-assisted form.
//! - [`neural`]: feedforward networks trained with Levenberg-Marquardt to
//!   estimate the MPP voltage and current from irradiance and temperature.
//! - [`sim`]: scenario profiles, the closed-loop engine and comparison metrics.
#![cfg_attr(all(not(feature = "std"), not(test)), no_std)]
// Negated float comparisons are how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod buck;
pub mod controllers;
pub mod error;
pub mod inverter;
pub mod neural;
pub mod pv_model;
pub mod sim;

pub use error::{Error, Result};
