//! Simulator and solver library for IAB-assisted UAV mmWave networks.
//!
//! The library models a two-tier UAV deployment: an IAB-donor UAV serving
//! aerial users plus a wireless backhaul link to an IAB-node UAV, which in
//! turn serves terrestrial users. It provides:
//!
//! - randomized scenario generation ([`scenario`]),
//! - LoS mmWave channel construction on uniform planar arrays ([`channel`]),
//! - zero-forcing and hybrid analog-digital precoder design ([`beamforming`]),
//! - per-link spectral efficiencies and the backhaul-bottlenecked network
//!   sum-rate ([`rates`]),
//! - bandwidth-split solvers: closed form, SCA under bandwidth-dependent
//!   noise, a GA benchmark, and a fixed non-IAB baseline ([`allocation`]),
//! - Monte Carlo sweep harnesses and energy-efficiency metrics
//!   ([`experiments`]).
//!
//! All randomness is derived from a single seed through named substreams
//! ([`rng`]), so every artifact the `iabsim` binary emits is reproducible
//! byte for byte.

pub mod allocation;
pub mod beamforming;
pub mod channel;
pub mod config;
pub mod error;
pub mod experiments;
pub mod io;
pub mod rates;
pub mod rng;
pub mod scenario;

pub use config::ScenarioConfig;
pub use error::{Error, Result};

/// Complex scalar used throughout the library.
pub type C64 = nalgebra::Complex<f64>;
/// Dense complex matrix.
pub type CMat = nalgebra::DMatrix<C64>;
/// Dense complex vector.
pub type CVec = nalgebra::DVector<C64>;
