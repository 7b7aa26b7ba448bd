//! Recoil gain from the thermal momentum distribution.
//!
//! The pump transfers atoms between radial momentum classes; the thermal
//! occupation gradient supplies the inversion. [`rir_gain`] converts that
//! inversion into a gain density over the frequency offset Δf of the
//! emitted light from the pump, normalised so the sign of Δf with net gain
//! is positive. The peak sits near √(k_B·T/m)/λ with a small recoil
//! correction; [`rir_peak`] locates it numerically.
//!
//! The equilibrium model does not evaluate this curve point-wise. It uses
//! a Lorentzian stand-in parmetrised by `gain_fwhm` and `gain_shift`; this
//! module exists to derive and validate those two numbers from the
//! temperature.

use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};

/// Sampled gain density versus emission-frequency offset from the pump.
#[derive(Debug, Clone, PartialEq)]
pub struct GainCurve {
    /// Frequency offsets, Hz, strictly increasing.
    pub delta_f: Vec<f64>,
    /// Gain density at each offset, 1/Hz.
    pub gain: Vec<f64>,
    /// Temperature the curve was evaluated at, K.
    pub temperature: f64,
    /// Photon-recoil multiplier.
    pub recoil_order: f64,
}

impl GainCurve {
    /// CSV export with header `delta_f_hz,gain`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("delta_f_hz,gain\n");
        for (f, g) in self.delta_f.iter().zip(&self.gain) {
            out.push_str(&format!("{f:?},{g:?}\n"));
        }
        out
    }
}

fn check_thermal_args(temperature: f64, lambda: f64, recoil_order: f64) -> Result<()> {
    if temperature <= 0.0 || temperature.is_nan() {
        return Err(Error::domain(format!(
            "temperature must be > 0, got {temperature}"
        )));
    }
    if lambda <= 0.0 || lambda.is_nan() {
        return Err(Error::domain(format!(
            "wavelength must be > 0, got {lambda}"
        )));
    }
    if recoil_order <= 0.0 || recoil_order.is_nan() {
        return Err(Error::domain(format!(
            "recoil order must be > 0, got {recoil_order}"
        )));
    }
    Ok(())
}

/// Maxwell-Boltzmann momentum density (1/√(2π·m·k_B·T))·exp(−p²/(2·m·k_B·T)),
/// in s/(kg·m).
pub fn mb_density(p: f64, temperature: f64) -> Result<f64> {
    if temperature <= 0.0 || temperature.is_nan() {
        return Err(Error::domain(format!(
            "temperature must be > 0, got {temperature}"
        )));
    }
    let c = PhysicalConstants::SR88;
    let var = c.m_sr88 * c.k_b * temperature;
    Ok((-p * p / (2.0 * var)).exp() / (std::f64::consts::TAU * var).sqrt())
}

/// Recoil gain density at emission offset `delta_f` (Hz) from the pump.
///
/// Difference of the two momentum Gaussians displaced by half the recoil
/// momentum n·ħk/2, scaled by √(m/(2π·k_B·T))·(λ/n). Odd in `delta_f`,
/// positive for `delta_f > 0`, and vanishing at large offset.
pub fn rir_gain(delta_f: f64, temperature: f64, lambda: f64, recoil_order: f64) -> Result<f64> {
    check_thermal_args(temperature, lambda, recoil_order)?;
    let c = PhysicalConstants::SR88;
    let m = c.m_sr88;
    let var2 = 2.0 * m * c.k_b * temperature; // 2·m·k_B·T
    let k = std::f64::consts::TAU / lambda;
    // momentum-space coordinate of the emission offset
    let x = std::f64::consts::TAU * m * delta_f / (recoil_order * k);
    let half_recoil = recoil_order * c.hbar * k / 2.0;
    let prefactor =
        (m / (std::f64::consts::TAU * c.k_b * temperature)).sqrt() * lambda / recoil_order;
    let lower = (-(x - half_recoil).powi(2) / var2).exp();
    let upper = (-(x + half_recoil).powi(2) / var2).exp();
    Ok(prefactor * (lower - upper))
}

/// Location and height of the gain maximum on the positive-offset side.
///
/// Golden-section search over Δf ∈ (0, 20·√(k_B·T/m)/λ], absolute
/// tolerance 1 Hz.
pub fn rir_peak(temperature: f64, lambda: f64, recoil_order: f64) -> Result<(f64, f64)> {
    check_thermal_args(temperature, lambda, recoil_order)?;
    let c = PhysicalConstants::SR88;
    let thermal_f = (c.k_b * temperature / c.m_sr88).sqrt() / lambda;

    let g = |f: f64| rir_gain(f, temperature, lambda, recoil_order).unwrap_or(f64::NAN);

    let mut lo = 0.0_f64;
    let mut hi = 20.0 * thermal_f;
    const INVPHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = hi - INVPHI * (hi - lo);
    let mut x2 = lo + INVPHI * (hi - lo);
    let mut f1 = g(x1);
    let mut f2 = g(x2);
    let mut iterations = 0usize;
    while hi - lo > 1.0 {
        if !f1.is_finite() || !f2.is_finite() {
            return Err(Error::numerical(format!(
                "gain evaluation produced non-finite value during peak search \
                 (interval [{lo}, {hi}], T = {temperature} K)"
            )));
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INVPHI * (hi - lo);
            f2 = g(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INVPHI * (hi - lo);
            f1 = g(x1);
        }
        iterations += 1;
        if iterations > 200 {
            return Err(Error::numerical(format!(
                "peak search failed to converge after {iterations} iterations \
                 (interval [{lo}, {hi}], T = {temperature} K)"
            )));
        }
    }
    let peak_f = 0.5 * (lo + hi);
    let peak_gain = g(peak_f);
    if peak_gain.is_nan() || peak_gain <= 0.0 {
        return Err(Error::numerical(format!(
            "peak search converged to non-positive gain {peak_gain} at {peak_f} Hz"
        )));
    }
    Ok((peak_f, peak_gain))
}

/// Evaluate the gain curve on a caller-supplied offset grid.
pub fn sample_gain_curve(
    temperature: f64,
    lambda: f64,
    recoil_order: f64,
    grid: &[f64],
) -> Result<GainCurve> {
    check_thermal_args(temperature, lambda, recoil_order)?;
    if grid.is_empty() {
        return Err(Error::domain("gain curve grid is empty"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("gain curve grid must be strictly increasing"));
    }
    let gain = grid
        .iter()
        .map(|&f| rir_gain(f, temperature, lambda, recoil_order))
        .collect::<Result<Vec<f64>>>()?;
    Ok(GainCurve {
        delta_f: grid.to_vec(),
        gain,
        temperature,
        recoil_order,
    })
}
