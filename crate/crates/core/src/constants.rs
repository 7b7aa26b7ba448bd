//! Physical constants for the Sr-88 ring-cavity system.
//!
//! SI units throughout. CODATA values for ħ, k_B and the atomic mass unit;
//! the wavelengths are the nominal cooling (689 nm) and lattice (813 nm)
//! lines.

use crate::error::{Error, Result};

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Planck constant, J·s.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;
/// Atomic mass unit, kg.
pub const AMU: f64 = 1.660_539_066_60e-27;

/// Bundle of the constants the model depends on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Reduced Planck constant, J·s.
    pub hbar: f64,
    /// Boltzmann constant, J/K.
    pub k_b: f64,
    /// Mass of a Sr-88 atom (88 atomic mass units), kg.
    pub m_sr88: f64,
    /// Cooling/lasing wavelength, m.
    pub lambda_689: f64,
    /// Lattice wavelength, m.
    pub lambda_813: f64,
}

impl PhysicalConstants {
    pub const SR88: PhysicalConstants = PhysicalConstants {
        hbar: HBAR,
        k_b: K_B,
        m_sr88: 88.0 * AMU,
        lambda_689: 689e-9,
        lambda_813: 813e-9,
    };

    /// Validated constructor: every constant must be strictly positive.
    pub fn new(hbar: f64, k_b: f64, m_sr88: f64, lambda_689: f64, lambda_813: f64) -> Result<Self> {
        let c = PhysicalConstants {
            hbar,
            k_b,
            m_sr88,
            lambda_689,
            lambda_813,
        };
        for (name, v) in [
            ("hbar", c.hbar),
            ("k_b", c.k_b),
            ("m_sr88", c.m_sr88),
            ("lambda_689", c.lambda_689),
            ("lambda_813", c.lambda_813),
        ] {
            if v <= 0.0 || !v.is_finite() {
                return Err(Error::domain(format!(
                    "physical constant {name} must be strictly positive, got {v}"
                )));
            }
        }
        Ok(c)
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        PhysicalConstants::SR88
    }
}
