#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Outage-minimizing design of a dual-hop decode-and-forward underwater
//! acoustic relay link.
//!
//! The crate models a frequency-selective acoustic channel (Thorp absorption,
//! four-source ambient noise, geometric spreading) under Rician fading, and
//! jointly chooses the relay position and the per-sub-band source/relay
//! powers that minimize the probability that the half-duplex rate falls
//! below a target.
//!
//! Modules, bottom-up:
//!
//! - [`acoustics`]: absorption, noise PSD and mean link SNR.
//! - [`fading`]: stretched-exponential fit of the Rician CCDF, sampling and
//!   min-of-two-links combining.
//! - [`outage`]: sub-band grid, designs, Monte Carlo outage and the
//!   deterministic surrogate objective.
//! - [`approx_opt`]: per-band split, closed-form band allocation and a 1-D
//!   relay-placement search.
//! - [`joint_opt`]: damped Newton solve of the full KKT system and the
//!   bordered-Hessian pseudoconcavity certificate.
//! - [`scenario`]: configuration, scheme runner, sweeps and CSV output used
//!   by the `uan-relay` binary.

pub mod acoustics;
pub mod approx_opt;
mod error;
pub mod fading;
pub mod joint_opt;
mod numeric;
pub mod outage;
pub mod scenario;

pub use error::{Error, Result};
