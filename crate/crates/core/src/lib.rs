//! Simulation and analysis toolkit for continuous momentum-state lasing of
//! cold atoms in a ring cavity.
//!
//! The crate is organised around the feedback loop between the intracavity
//! atom number and the emitted light: recoil gain from the thermal momentum
//! distribution ([`gain`]), the atom-dressed cavity resonance ([`cavity`]),
//! the atom-number rate equation and its equilibria ([`equilibrium`]),
//! time-domain integration ([`dynamics`]), and the estimators used to
//! characterise the emitted light ([`photon_stats`], [`spectra`]).
//!
//! All frequencies are ordinary frequencies in Hz. Quantities quoted as
//! angular (2π×X) elsewhere are converted once, at configuration ingestion
//! (see [`config`]).

pub mod cavity;
pub mod config;
pub mod constants;
pub mod dynamics;
pub mod equilibrium;
pub mod error;
pub mod gain;
pub mod photon_stats;
pub mod spectra;

pub use config::{PumpLine, SweepDirection, SweepSpec, SystemParams};
pub use constants::PhysicalConstants;
pub use error::{Error, Result};
