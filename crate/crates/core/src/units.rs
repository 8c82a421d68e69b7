//! Unit conventions and the Gaussian drive pulse.
//!
//! Every externally visible frequency, linewidth, and coupling is a
//! spectroscopic wavenumber in cm⁻¹; time is in picoseconds.  Internally all
//! dynamics run in angular units (rad/ps), and the single bridge between the
//! two is [`wavenumber_to_angular`]: ω = 2πc·ν̃ with c in cm/ps.  The 2π
//! belongs to *every* conversion, linewidths and couplings included — mixing
//! conventions silently rescales Rabi splittings by 2π, so all call sites go
//! through this module.

use std::f64::consts::TAU;

/// Speed of light in cm/ps.
pub const C_CM_PER_PS: f64 = 0.029_979_245_8;

/// Convert a wavenumber (cm⁻¹) to an angular frequency (rad/ps).
///
/// Applies uniformly to oscillation frequencies, linewidths, couplings, and
/// dephasing rates: ω = 2π·c·ν̃.
#[inline]
pub fn wavenumber_to_angular(wavenumber_cm: f64) -> f64 {
    TAU * C_CM_PER_PS * wavenumber_cm
}

/// Convert an angular frequency (rad/ps) back to a wavenumber (cm⁻¹).
///
/// Exact inverse of [`wavenumber_to_angular`] up to floating-point rounding.
#[inline]
pub fn angular_to_wavenumber(omega_rad_ps: f64) -> f64 {
    omega_rad_ps / (TAU * C_CM_PER_PS)
}

/// Normalized Gaussian pulse envelope f(t) = (2πτ_w²)^(−1/2)·exp[−t²/(2τ_w²)].
///
/// `t` is the time offset from the pulse center in ps and `tau_w` the Gaussian
/// width in ps.  The envelope integrates to 1 over the real line, so its value
/// has units of ps⁻¹ and its Fourier transform is 1 at zero frequency.
#[inline]
pub fn pulse_envelope(t: f64, tau_w: f64) -> f64 {
    (TAU * tau_w * tau_w).sqrt().recip() * (-t * t / (2.0 * tau_w * tau_w)).exp()
}

/// Fourier transform of [`pulse_envelope`] under the e^{+iωt} convention:
/// f̃(ω) = exp(−ω²τ_w²/2).
///
/// `omega` is an angular frequency offset (rad/ps) relative to the pulse
/// carrier.  Real, positive, unity at ω = 0; used both as the spectral drive
/// profile and as the denominator that normalizes detected spectra per unit
/// input.
#[inline]
pub fn pulse_spectrum(omega: f64, tau_w: f64) -> f64 {
    (-omega * omega * tau_w * tau_w / 2.0).exp()
}
