//! Link-level simulation of a reconfigurable intelligent surface (RIS) shared
//! between radar target localization and downlink MIMO communication.
//!
//! The numeric core is generic over the real scalar ([`Real`], implemented for
//! `f32` and `f64`); the `*64` aliases below fix double precision, which the
//! Monte Carlo paths need because received radar powers span hundreds of dB.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channels;
pub mod codebook;
pub mod comms;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod localization;
pub mod rng;
pub mod scalar;
pub mod stats;

pub use error::{Error, Result};
pub use scalar::Real;

pub type C64 = num_complex::Complex<f64>;
pub type C32 = num_complex::Complex<f32>;
pub type Scene64 = channels::Scene<f64>;
pub type Scene32 = channels::Scene<f32>;
pub type Codebook64 = codebook::Codebook<f64>;
pub type Codebook32 = codebook::Codebook<f32>;
pub type PhaseProfile64 = channels::PhaseProfile<f64>;
pub type ChannelSet64 = channels::ChannelSet<f64>;
