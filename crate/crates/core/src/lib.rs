//! Simulation and analysis core for time-gated heralded single photons from a
//! pulse-pumped optical parametric oscillator.
//!
//! The crate covers the whole chain on synthetic data:
//!
//! * [`signal`]: pump-pulse profiles and single-pole Lorentzian cavity filters.
//! * [`clicks`]: APD click-delay Monte Carlo, histograms, acceptance gating.
//! * [`homodyne`]: heralded homodyne time windows for a known Fock mixture.
//! * [`fock`]: Fock-state quadrature marginals and a mixture sampler.
//! * [`tomography`]: variance traces, mode estimation, projection, the
//!   constrained Fock-mixture fit and the Wigner center value.
//!
//! Time is measured in ns throughout, angular frequencies in rad/ns.
//! Quadratures use the convention where vacuum has variance 1/2.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod error;
mod math;

pub mod clicks;
pub mod fock;
pub mod homodyne;
pub mod signal;
pub mod tomography;

pub use error::{Error, Result};
pub use math::pairwise_sum;
