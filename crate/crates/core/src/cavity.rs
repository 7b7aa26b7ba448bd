//! Dispersive light shift and the atom-dressed cavity resonance.
//!
//! All detunings are referenced to the atomic resonance and expressed as
//! ordinary frequencies in Hz. The two dressed-mode branches obey the
//! product identity δ₊·δ₋ = −g²·N_eff, which the tests rely on.

use crate::error::{Error, Result};

/// Branch of the atom-cavity avoided crossing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// (δ_ca − √(δ_ca² + 4g²N))/2 — always ≤ 0.
    Lower,
    /// (δ_ca + √(δ_ca² + 4g²N))/2 — always ≥ 0.
    Upper,
}

/// A dressed-cavity evaluation at one operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DressedCavityResult {
    /// Bare cavity detuning from the atom, Hz.
    pub delta_ca: f64,
    /// Inversion-corrected atom number.
    pub n_eff: f64,
    pub branch: Branch,
    /// Dressed-cavity detuning from the atom, Hz.
    pub delta_dressed: f64,
}

/// Single-atom dispersive light shift U₀ = g²·δ_ca/(δ_ca² + γ²), Hz.
///
/// `gamma_atom` is the atomic linewidth (FWHM) in ordinary frequency.
pub fn single_atom_light_shift(coupling: f64, delta_ca: f64, gamma_atom: f64) -> Result<f64> {
    if gamma_atom <= 0.0 || gamma_atom.is_nan() {
        return Err(Error::domain(format!(
            "atom linewidth must be > 0, got {gamma_atom}"
        )));
    }
    Ok(coupling * coupling * delta_ca / (delta_ca * delta_ca + gamma_atom * gamma_atom))
}

/// Collective dispersive cavity shift N·U₀, Hz.
pub fn collective_shift(n_atoms: f64, light_shift: f64) -> Result<f64> {
    if n_atoms < 0.0 {
        return Err(Error::domain(format!(
            "atom number must be >= 0, got {n_atoms}"
        )));
    }
    Ok(n_atoms * light_shift)
}

/// Threshold diagnostic: the collective shift dominates the bare cavity
/// line once |N·U₀| exceeds the cavity linewidth.
pub fn shift_exceeds_linewidth(collective_shift: f64, cavity_linewidth: f64) -> bool {
    collective_shift.abs() > cavity_linewidth
}

/// Inversion-corrected atom number N·(1 − 2·f_e) = N_g − N_e.
pub fn effective_atom_number(n_atoms: f64, excited_fraction: f64) -> Result<f64> {
    if n_atoms < 0.0 {
        return Err(Error::domain(format!(
            "atom number must be >= 0, got {n_atoms}"
        )));
    }
    if !(0.0..0.5).contains(&excited_fraction) {
        return Err(Error::domain(format!(
            "excited fraction must lie in [0, 0.5), got {excited_fraction} \
             (optical inversion is outside the model)"
        )));
    }
    Ok(n_atoms * (1.0 - 2.0 * excited_fraction))
}

/// Dressed-cavity detuning from the atom for the requested branch.
pub fn dressed_cavity_detuning(delta_ca: f64, coupling: f64, n_eff: f64, branch: Branch) -> f64 {
    debug_assert!(n_eff >= 0.0);
    let root = (delta_ca * delta_ca + 4.0 * coupling * coupling * n_eff).sqrt();
    match branch {
        Branch::Lower => 0.5 * (delta_ca - root),
        Branch::Upper => 0.5 * (delta_ca + root),
    }
}

/// Both branches at once, packaged with their inputs.
pub fn dressed_cavity(
    delta_ca: f64,
    coupling: f64,
    n_eff: f64,
) -> Result<[DressedCavityResult; 2]> {
    if n_eff < 0.0 {
        return Err(Error::domain(format!(
            "effective atom number must be >= 0, got {n_eff}"
        )));
    }
    Ok(
        [Branch::Lower, Branch::Upper].map(|branch| DressedCavityResult {
            delta_ca,
            n_eff,
            branch,
            delta_dressed: dressed_cavity_detuning(delta_ca, coupling, n_eff, branch),
        }),
    )
}

/// Infer the excited fraction during lasing from the offset between the
/// dressed-cavity detuning measured during lasing and the one measured
/// after the excited state has decayed (f_e = 0).
///
/// Solves dressed(δ_ca, g, N·(1 − 2f_e)) = `delta_dressed_lasing` for
/// f_e ∈ [0, 0.5) by bisection to |f_e| tolerance 1e-6, on the branch the
/// probe value sits on.
pub fn infer_excited_fraction(
    delta_ca: f64,
    coupling: f64,
    n_atoms: f64,
    delta_dressed_lasing: f64,
    delta_dressed_probe: f64,
) -> Result<f64> {
    if n_atoms < 0.0 {
        return Err(Error::domain(format!(
            "atom number must be >= 0, got {n_atoms}"
        )));
    }
    if delta_dressed_lasing == delta_dressed_probe {
        return Ok(0.0);
    }
    // branch is determined by sign: lower ≤ 0 ≤ upper
    if delta_dressed_lasing.signum() != delta_dressed_probe.signum() {
        return Err(Error::domain(format!(
            "probe ({delta_dressed_probe} Hz) and lasing ({delta_dressed_lasing} Hz) \
             dressed detunings lie on different branches"
        )));
    }
    let branch = if delta_dressed_probe < 0.0 {
        Branch::Lower
    } else {
        Branch::Upper
    };

    let offset = |f_e: f64| {
        dressed_cavity_detuning(delta_ca, coupling, n_atoms * (1.0 - 2.0 * f_e), branch)
            - delta_dressed_lasing
    };

    let mut lo = 0.0_f64;
    let mut hi = 0.5 - f64::EPSILON;
    let f_lo = offset(lo);
    let f_hi = offset(hi);
    if f_lo == 0.0 {
        return Ok(0.0);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::Inconsistent(format!(
            "no excited fraction in [0, 0.5) reproduces the lasing dressed detuning \
             {delta_dressed_lasing} Hz (f_e = 0 gives {} Hz, f_e → 0.5 gives {} Hz)",
            f_lo + delta_dressed_lasing,
            f_hi + delta_dressed_lasing,
        )));
    }
    while hi - lo > 1e-7 {
        let mid = 0.5 * (lo + hi);
        if offset(mid).signum() == f_lo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
