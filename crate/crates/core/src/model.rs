//! Rotating-frame rates derived from the physical configuration.
//!
//! Everything downstream of the configuration works in the frame rotating at
//! the common pulse carrier `omega_l`.  In that frame each coherence decays
//! with a complex rate λ (so that x' = −λx when undriven) whose real part is
//! an amplitude decay in rad/ps and whose imaginary part is minus the angular
//! detuning.  This module holds the derivation of those rates — including
//! concentration and cavity-length scaling — in one place, in cm⁻¹, with
//! accessors that convert to angular units for the integrators.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::config::SystemParams;
use crate::units::wavenumber_to_angular;

/// Detunings, couplings, and linewidths in the rotating frame, cm⁻¹.
///
/// Detunings are signed as `omega_l − omega_transition`, so a laser above a
/// transition gives a positive detuning.  Couplings and linewidths include
/// the concentration and cavity-length scale factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedRates {
    /// Cavity detuning ω_ℓ − ω_c, cm⁻¹.
    pub delta_c: f64,
    /// Fundamental detuning ω_ℓ − ω_e, cm⁻¹.
    pub delta_ge: f64,
    /// Overtone-step detuning ω_ℓ − ω_fe, cm⁻¹.
    pub delta_ef: f64,
    /// Effective collective coupling on g↔e, cm⁻¹.
    pub g_ge: f64,
    /// Effective collective coupling on e↔f: √2·(1+δ)·g_ge, cm⁻¹.
    pub g_ef: f64,
    /// Effective cavity linewidth, cm⁻¹.
    pub kappa: f64,
    /// g↔e dephasing linewidth, cm⁻¹.
    pub gamma_ge: f64,
    /// e↔f dephasing linewidth, cm⁻¹.
    pub gamma_ef: f64,
    /// g↔f (two-quantum) dephasing linewidth γ_ge + γ_ef, cm⁻¹.
    pub gamma_fg: f64,
    /// Excitation-induced-dephasing slope, cm⁻¹ per unit excited population.
    pub beta_eid: f64,
}

impl DerivedRates {
    /// Derive all rotating-frame rates from system parameters and the
    /// carrier frequency (cm⁻¹).
    pub fn derive(system: &SystemParams, omega_l: f64) -> Self {
        let g_ge = system.effective_g();
        Self {
            delta_c: omega_l - system.omega_c,
            delta_ge: omega_l - system.omega_e,
            delta_ef: omega_l - system.omega_fe,
            g_ge,
            g_ef: std::f64::consts::SQRT_2 * g_ge * (1.0 + system.delta_el),
            kappa: system.effective_kappa(),
            gamma_ge: system.gamma_ge,
            gamma_ef: system.gamma_ef,
            gamma_fg: system.gamma_ge + system.gamma_ef,
            beta_eid: system.beta_eid,
        }
    }

    /// Complex decay rate of the cavity amplitude: κ/2 − iΔ_c, rad/ps.
    pub fn cavity_rate(&self) -> C64 {
        C64::new(
            wavenumber_to_angular(self.kappa) / 2.0,
            -wavenumber_to_angular(self.delta_c),
        )
    }

    /// Complex decay rate of the g↔e coherence: γ_ge/2 − iΔ_ge, rad/ps.
    pub fn eg_rate(&self) -> C64 {
        C64::new(
            wavenumber_to_angular(self.gamma_ge) / 2.0,
            -wavenumber_to_angular(self.delta_ge),
        )
    }

    /// Complex decay rate of the e↔f coherence: γ_ef/2 − iΔ_ef, rad/ps.
    pub fn fe_rate(&self) -> C64 {
        C64::new(
            wavenumber_to_angular(self.gamma_ef) / 2.0,
            -wavenumber_to_angular(self.delta_ef),
        )
    }

    /// Complex decay rate of the two-quantum g↔f coherence:
    /// (γ_ge + γ_ef) − i(Δ_ge + Δ_ef), rad/ps.
    ///
    /// The two-quantum linewidth is the full sum of the one-quantum
    /// linewidths, not the mean.
    pub fn fg_rate(&self) -> C64 {
        C64::new(
            wavenumber_to_angular(self.gamma_fg),
            -wavenumber_to_angular(self.delta_ge + self.delta_ef),
        )
    }

    /// Angular g↔e coupling, rad/ps.
    pub fn coupling_ge(&self) -> f64 {
        wavenumber_to_angular(self.g_ge)
    }

    /// Angular e↔f coupling, rad/ps.
    pub fn coupling_ef(&self) -> f64 {
        wavenumber_to_angular(self.g_ef)
    }

    /// Angular excitation-induced-dephasing slope, rad/ps per unit ρ_ee.
    pub fn beta_angular(&self) -> f64 {
        wavenumber_to_angular(self.beta_eid)
    }

    /// Population-dependent g↔e linewidth γ_ge + β·ρ_ee, cm⁻¹ (affine in
    /// the excited population by construction).
    pub fn eid_gamma_ge(&self, rho_ee: f64) -> f64 {
        self.gamma_ge + self.beta_eid * rho_ee
    }
}
