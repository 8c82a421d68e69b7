//! Configuration schema, defaults, loading, and command-line overrides.
//!
//! The configuration is a flat TOML document with three sections — `[system]`,
//! `[pulses]`, `[scan]` — plus an optional `[mask]` section selecting
//! third-order pathway contributions.  Keys are named exactly as the struct
//! fields below.  Any key can be overridden from the command line with
//! `--set section.key=value`; unknown keys are rejected in both paths.
//!
//! All frequencies, linewidths, and couplings are wavenumbers in cm⁻¹; times
//! are picoseconds; `delta_el`, the scale factors, and drive amplitudes are
//! dimensionless.

use serde::{Deserialize, Serialize};

use crate::engine::PathwayMask;
use crate::error::{CoreError, Result};
use crate::units::wavenumber_to_angular;

/// Stability budget for the fixed-step integrator: `dt × (fastest angular
/// rate)` must not exceed this.  At the default step of 0.5 fs the margin for
/// typical parameters is two orders of magnitude.
pub const DT_STABILITY_BUDGET: f64 = 0.1;

fn default_omega_c() -> f64 {
    1983.0
}
fn default_kappa() -> f64 {
    11.0
}
fn default_omega_e() -> f64 {
    1983.0
}
fn default_omega_fe() -> f64 {
    1968.0
}
fn default_g_collective() -> f64 {
    18.5
}
fn default_delta_el() -> f64 {
    -0.25
}
fn default_gamma_ge() -> f64 {
    6.0
}
fn default_gamma_ef() -> f64 {
    9.0
}

/// Cavity and molecular parameters.
///
/// Defaults are the W(CO)₆-in-hexane working point used throughout: resonant
/// cavity and laser at the fundamental, 15 cm⁻¹ mechanical anharmonicity,
/// δ = −0.25 electrical anharmonicity, split coherence linewidths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemParams {
    /// Cavity resonance frequency, cm⁻¹.
    pub omega_c: f64,
    /// Cavity amplitude decay rate (linewidth) κ, cm⁻¹.
    pub kappa: f64,
    /// Fundamental (g→e) transition frequency ω_e, cm⁻¹.
    pub omega_e: f64,
    /// Overtone step (e→f) transition frequency ω_f − ω_e, cm⁻¹.
    pub omega_fe: f64,
    /// Collective light–matter coupling g_ge·√N, cm⁻¹.
    pub g_collective: f64,
    /// Electrical anharmonicity δ in μ_ef = √2·μ_ge·(1+δ), dimensionless.
    pub delta_el: f64,
    /// Pure-dephasing linewidth of the g↔e coherence γ_ge, cm⁻¹.
    pub gamma_ge: f64,
    /// Pure-dephasing linewidth of the e↔f coherence γ_ef, cm⁻¹.
    pub gamma_ef: f64,
    /// Excitation-induced-dephasing slope β in γ_ge(ρ_ee) = γ_ge + β·ρ_ee, cm⁻¹.
    pub beta_eid: f64,
    /// Concentration multiplier n/n₀; multiplies `g_collective`.
    pub conc_scale: f64,
    /// Cavity-length multiplier L/L₀; divides `kappa` and scales each drive
    /// amplitude by √(1/L) (transmission through a longer cavity is pumped
    /// more weakly at fixed input power).
    pub kappa_scale: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            omega_c: default_omega_c(),
            kappa: default_kappa(),
            omega_e: default_omega_e(),
            omega_fe: default_omega_fe(),
            g_collective: default_g_collective(),
            delta_el: default_delta_el(),
            gamma_ge: default_gamma_ge(),
            gamma_ef: default_gamma_ef(),
            beta_eid: 0.0,
            conc_scale: 1.0,
            kappa_scale: 1.0,
        }
    }
}

impl SystemParams {
    /// Collective coupling after concentration scaling, cm⁻¹.
    pub fn effective_g(&self) -> f64 {
        self.g_collective * self.conc_scale
    }

    /// Cavity linewidth after cavity-length scaling, cm⁻¹.
    pub fn effective_kappa(&self) -> f64 {
        self.kappa / self.kappa_scale
    }

    /// Molecule number relative to the reference configuration:
    /// N/N₀ = (n/n₀)·(V/V₀) = conc_scale · kappa_scale, because the density
    /// multiplier fills a mode volume that grows linearly with cavity length.
    ///
    /// The propagated equations close in the collective coupling alone, so
    /// their differential (third-order) signals are quoted for the reference
    /// ensemble; comparisons across density or cavity length divide by this
    /// factor to put every run on a per-reference-ensemble footing.
    pub fn relative_molecule_number(&self) -> f64 {
        self.conc_scale * self.kappa_scale
    }

    /// Mechanical anharmonicity Δ = (ω_f − ω_e) − ω_e, cm⁻¹ (negative for a
    /// softening ladder).
    pub fn delta_mech(&self) -> f64 {
        self.omega_fe - self.omega_e
    }
}

/// The three-pulse drive: amplitudes, common width and carrier, arrival
/// times, and phase tags.
///
/// Pulse ordering is 1 → 2 → 3 with delays τ = t_2 − t_1 (excitation) and
/// T = t_3 − t_2 (waiting); scans overwrite `t_2`/`t_3` per grid point.
/// The phase tags `phi_j` enter the explicit mean-field propagation only; the
/// perturbative engine carries them as component indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PulseTrain {
    /// Drive amplitude of pulse 1 (arbitrary field units).
    pub eta_1: f64,
    /// Drive amplitude of pulse 2.
    pub eta_2: f64,
    /// Drive amplitude of pulse 3 (probe).
    pub eta_3: f64,
    /// Common Gaussian width τ_w, ps.
    pub tau_w: f64,
    /// Arrival time of pulse 1, ps.
    pub t_1: f64,
    /// Arrival time of pulse 2, ps.
    pub t_2: f64,
    /// Arrival time of pulse 3, ps.
    pub t_3: f64,
    /// Common carrier frequency ω_ℓ (rotating-frame reference), cm⁻¹.
    pub omega_l: f64,
    /// Phase tag of pulse 1, rad.
    pub phi_1: f64,
    /// Phase tag of pulse 2, rad.
    pub phi_2: f64,
    /// Phase tag of pulse 3, rad.
    pub phi_3: f64,
}

impl Default for PulseTrain {
    fn default() -> Self {
        Self {
            eta_1: 1e-3,
            eta_2: 1e-3,
            eta_3: 1e-3,
            tau_w: 0.1,
            t_1: 0.0,
            t_2: 0.0,
            t_3: 0.0,
            omega_l: 1983.0,
            phi_1: 0.0,
            phi_2: 0.0,
            phi_3: 0.0,
        }
    }
}

impl PulseTrain {
    /// Pulse centers as an array indexed by pulse (0-based).
    pub fn centers(&self) -> [f64; 3] {
        [self.t_1, self.t_2, self.t_3]
    }

    /// Drive amplitudes as an array indexed by pulse (0-based).
    pub fn amplitudes(&self) -> [f64; 3] {
        [self.eta_1, self.eta_2, self.eta_3]
    }

    /// Phase tags as an array indexed by pulse (0-based).
    pub fn phases(&self) -> [f64; 3] {
        [self.phi_1, self.phi_2, self.phi_3]
    }

    /// Drive amplitudes after cavity-length scaling: η_j·√(1/kappa_scale).
    pub fn effective_amplitudes(&self, kappa_scale: f64) -> [f64; 3] {
        let s = kappa_scale.sqrt().recip();
        [self.eta_1 * s, self.eta_2 * s, self.eta_3 * s]
    }

    /// Return a copy with pulse times set from delays (τ, T) relative to t_1.
    pub fn with_delays(&self, tau: f64, t_wait: f64) -> Self {
        Self {
            t_2: self.t_1 + tau,
            t_3: self.t_1 + tau + t_wait,
            ..self.clone()
        }
    }
}

/// Which scan the runner executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanKind {
    /// Probe-only transmission spectrum.
    Linear,
    /// Single differential-transmission trace at τ = 0 and fixed T.
    PumpProbe,
    /// Excitation scan: τ grid at fixed T, transformed to (ω₁, ω₃).
    #[serde(rename = "scan_1q")]
    Scan1q,
    /// Waiting scan: T grid at fixed τ, transformed to (ω₂, ω₃).
    #[serde(rename = "scan_2qc")]
    Scan2qc,
    /// Brute-force mean-field comparison on a discrete phase grid.
    OracleValidate,
    /// Analytic long-delay pathway decomposition curves.
    Stationary,
}

impl ScanKind {
    /// Stable lower-case name used in output metadata and file names.
    pub fn name(self) -> &'static str {
        match self {
            Self::Linear => "linear",
            Self::PumpProbe => "pump_probe",
            Self::Scan1q => "scan_1q",
            Self::Scan2qc => "scan_2qc",
            Self::OracleValidate => "oracle_validate",
            Self::Stationary => "stationary",
        }
    }
}

/// Window applied to delay-domain data before the half-sided transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Apodization {
    /// No window (plain rectangle rule); the energy-conserving default.
    None,
    /// Half Hann window falling from 1 at zero delay to 0 at the last sample.
    Hann,
    /// Exponential window e^{−rate·delay} with `apod_rate` in ps⁻¹.
    Exp,
}

/// Delay grids, transform settings, and output options for one scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSpec {
    /// Which scan to run.
    pub scan_kind: ScanKind,
    /// Fixed excitation delay τ (ps) where the scan does not vary it
    /// (`scan_2qc`); `pump_probe` always runs at τ = 0.
    pub tau: f64,
    /// Fixed waiting delay T (ps) where the scan does not vary it
    /// (`scan_1q`, `pump_probe`).
    pub t_wait: f64,
    /// Upper end of the τ grid, ps (`scan_1q`).
    pub tau_max: f64,
    /// τ grid step, ps.
    pub tau_step: f64,
    /// Upper end of the T grid, ps (`scan_2qc`).
    pub t_wait_max: f64,
    /// T grid step, ps.
    pub t_wait_step: f64,
    /// Detection window after the probe pulse, ps.
    pub detection_window: f64,
    /// Fixed integrator step, ps.
    pub dt: f64,
    /// Record every n-th integrator step for transforms and dumps.
    pub record_stride: usize,
    /// Zero-padding factor for every discrete Fourier transform.
    pub pad_factor: usize,
    /// Delay-domain window choice.
    pub apodization: Apodization,
    /// Decay rate of the exponential window, ps⁻¹ (used when
    /// `apodization = "exp"`).
    pub apod_rate: f64,
    /// Detection-band mask threshold: ω₃ points where the probe spectrum
    /// falls below this fraction of its peak are zeroed.
    pub mask_eps: f64,
    /// Stationary excited-state population for the analytic decomposition
    /// (`stationary` scan), dimensionless.
    pub rho_ee: f64,
    /// Phase-grid points per pulse for the mean-field comparison
    /// (`oracle_validate`); must be ≥ 3 to resolve |v| ≤ 1 signatures.
    pub n_phi: usize,
    /// Emitted ω₁ half-span about the carrier, cm⁻¹.
    pub omega1_halfwidth: f64,
    /// Emitted ω₂ half-span about twice the carrier, cm⁻¹.
    pub omega2_halfwidth: f64,
    /// Emitted ω₃ half-span about the carrier, cm⁻¹ (further narrowed by the
    /// probe-band mask).
    pub omega3_halfwidth: f64,
    /// Allowed ratio of the last delay trace's peak to the global peak
    /// before the half-sided delay transform is considered unconverged;
    /// 1.0 disables the check.
    pub decay_tol: f64,
    /// Output directory.
    pub out_dir: String,
    /// Also write each grid in the raw binary format.
    pub emit_binary: bool,
    /// Also write the raw component trajectory of the first grid point.
    pub emit_trajectory: bool,
}

impl Default for ScanSpec {
    fn default() -> Self {
        Self {
            scan_kind: ScanKind::PumpProbe,
            tau: 0.026,
            t_wait: 8.0,
            tau_max: 6.0,
            tau_step: 0.012,
            t_wait_max: 6.0,
            t_wait_step: 0.012,
            detection_window: 30.0,
            dt: 5e-4,
            record_stride: 40,
            pad_factor: 4,
            apodization: Apodization::None,
            apod_rate: 1.0,
            mask_eps: 1e-3,
            rho_ee: 1e-3,
            n_phi: 5,
            omega1_halfwidth: 120.0,
            omega2_halfwidth: 150.0,
            omega3_halfwidth: 110.0,
            decay_tol: 0.05,
            out_dir: "out".to_string(),
            emit_binary: false,
            emit_trajectory: false,
        }
    }
}

impl ScanSpec {
    /// Number of τ grid points (inclusive of both ends).
    pub fn tau_points(&self) -> usize {
        (self.tau_max / self.tau_step).round() as usize + 1
    }

    /// Number of T grid points (inclusive of both ends).
    pub fn t_wait_points(&self) -> usize {
        (self.t_wait_max / self.t_wait_step).round() as usize + 1
    }
}

/// Complete run configuration.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Cavity and molecular parameters.
    pub system: SystemParams,
    /// Drive pulses.
    pub pulses: PulseTrain,
    /// Scan definition and numerics.
    pub scan: ScanSpec,
    /// Third-order pathway selection.
    pub mask: PathwayMask,
}

impl Config {
    /// Parse a TOML document; unknown keys are rejected.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Config =
            toml::from_str(text).map_err(|e| CoreError::ConfigParse(e.to_string()))?;
        Ok(cfg)
    }

    /// Serialize to canonical TOML (stable key order; used for echoes and
    /// content hashing).
    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serialization cannot fail")
    }

    /// Apply a `section.key=value` override in place.
    ///
    /// The value string is parsed according to the type the key already has
    /// in the schema, so `--set system.kappa=13` and
    /// `--set scan.scan_kind=scan_2qc` both work and a type mismatch is
    /// reported rather than silently coerced.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, raw_value) = assignment.split_once('=').ok_or_else(|| {
            CoreError::OverrideInvalid {
                key: assignment.to_string(),
                reason: "expected section.key=value".to_string(),
            }
        })?;
        let key = key.trim();
        let raw_value = raw_value.trim();
        let mut parts = key.splitn(2, '.');
        let (section, field) = match (parts.next(), parts.next()) {
            (Some(s), Some(f)) if !s.is_empty() && !f.is_empty() => (s, f),
            _ => {
                return Err(CoreError::OverrideInvalid {
                    key: key.to_string(),
                    reason: "expected section.key=value".to_string(),
                })
            }
        };

        let mut tree = toml::Value::try_from(&*self)
            .map_err(|e| CoreError::ConfigParse(e.to_string()))?;
        let table = tree
            .get_mut(section)
            .and_then(|v| v.as_table_mut())
            .ok_or_else(|| CoreError::OverrideInvalid {
                key: key.to_string(),
                reason: format!("unknown section '{section}'"),
            })?;
        let slot = table.get_mut(field).ok_or_else(|| CoreError::OverrideInvalid {
            key: key.to_string(),
            reason: format!("unknown key '{field}' in section '{section}'"),
        })?;

        let parsed = match slot {
            toml::Value::Float(_) => raw_value
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(toml::Value::Float),
            toml::Value::Integer(_) => raw_value.parse::<i64>().ok().map(toml::Value::Integer),
            toml::Value::Boolean(_) => raw_value.parse::<bool>().ok().map(toml::Value::Boolean),
            toml::Value::String(_) => Some(toml::Value::String(raw_value.to_string())),
            _ => None,
        };
        *slot = parsed.ok_or_else(|| CoreError::OverrideInvalid {
            key: key.to_string(),
            reason: format!("cannot parse '{raw_value}' as the type of '{section}.{field}'"),
        })?;

        *self = tree
            .try_into()
            .map_err(|e: toml::de::Error| CoreError::OverrideInvalid {
                key: key.to_string(),
                reason: e.to_string(),
            })?;
        Ok(())
    }

    /// Effective drive amplitudes after cavity-length scaling.
    pub fn effective_amplitudes(&self) -> [f64; 3] {
        self.pulses.effective_amplitudes(self.system.kappa_scale)
    }

    /// Validate all schema constraints, including integrator stability.
    pub fn validate(&self) -> Result<()> {
        let s = &self.system;
        let require = |ok: bool, msg: &str| -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(CoreError::ConfigInvalid(msg.to_string()))
            }
        };

        require(s.kappa > 0.0, "system.kappa must be positive (cm^-1)")?;
        require(s.g_collective >= 0.0, "system.g_collective must be nonnegative")?;
        require(s.gamma_ge >= 0.0, "system.gamma_ge must be nonnegative")?;
        require(s.gamma_ef >= 0.0, "system.gamma_ef must be nonnegative")?;
        require(s.conc_scale > 0.0, "system.conc_scale must be positive")?;
        require(s.kappa_scale > 0.0, "system.kappa_scale must be positive")?;
        for v in [
            s.omega_c,
            s.omega_e,
            s.omega_fe,
            s.delta_el,
            s.beta_eid,
        ] {
            require(v.is_finite(), "system parameters must be finite")?;
        }

        let p = &self.pulses;
        require(p.tau_w > 0.0, "pulses.tau_w must be positive (ps)")?;
        for eta in p.amplitudes() {
            require(eta >= 0.0 && eta.is_finite(), "pulses.eta_j must be nonnegative")?;
        }
        require(p.omega_l > 0.0, "pulses.omega_l must be positive (cm^-1)")?;
        require(
            p.t_1 <= p.t_2 && p.t_2 <= p.t_3,
            "pulses must be ordered: t_1 <= t_2 <= t_3",
        )?;

        let sc = &self.scan;
        require(sc.tau >= 0.0, "scan.tau must be nonnegative (half-sided protocol)")?;
        require(sc.t_wait >= 0.0, "scan.t_wait must be nonnegative")?;
        require(sc.tau_max >= 0.0, "scan.tau_max must be nonnegative")?;
        require(sc.tau_step > 0.0, "scan.tau_step must be positive")?;
        require(sc.t_wait_max >= 0.0, "scan.t_wait_max must be nonnegative")?;
        require(sc.t_wait_step > 0.0, "scan.t_wait_step must be positive")?;
        require(sc.detection_window > 0.0, "scan.detection_window must be positive")?;
        require(sc.dt > 0.0, "scan.dt must be positive")?;
        require(sc.record_stride >= 1, "scan.record_stride must be at least 1")?;
        require(sc.pad_factor >= 1, "scan.pad_factor must be at least 1")?;
        require(
            sc.mask_eps > 0.0 && sc.mask_eps < 1.0,
            "scan.mask_eps must lie in (0, 1)",
        )?;
        require(sc.rho_ee >= 0.0, "scan.rho_ee must be nonnegative")?;
        require(sc.n_phi >= 3, "scan.n_phi must be at least 3 to resolve |v| <= 1")?;
        require(sc.omega1_halfwidth > 0.0, "scan.omega1_halfwidth must be positive")?;
        require(sc.omega2_halfwidth > 0.0, "scan.omega2_halfwidth must be positive")?;
        require(sc.omega3_halfwidth > 0.0, "scan.omega3_halfwidth must be positive")?;
        require(
            sc.decay_tol > 0.0 && sc.decay_tol <= 1.0,
            "scan.decay_tol must lie in (0, 1]",
        )?;

        // Fixed-step stability: the fastest angular scale in the rotating
        // frame must be resolved with margin.
        let max_rate = self.fastest_angular_rate();
        let product = sc.dt * max_rate;
        if product > DT_STABILITY_BUDGET {
            return Err(CoreError::StepTooLarge {
                dt: sc.dt,
                max_rate,
                product,
                budget: DT_STABILITY_BUDGET,
            });
        }
        Ok(())
    }

    /// Fastest angular rate (rad/ps) of the effective rotating-frame system.
    pub fn fastest_angular_rate(&self) -> f64 {
        let s = &self.system;
        let wl = self.pulses.omega_l;
        let g = s.effective_g();
        let g_ef = std::f64::consts::SQRT_2 * g * (1.0 + s.delta_el);
        [
            (wl - s.omega_c).abs(),
            (wl - s.omega_e).abs(),
            (wl - s.omega_fe).abs(),
            g.abs(),
            g_ef.abs(),
            s.effective_kappa(),
            s.gamma_ge,
            s.gamma_ef,
            s.gamma_ge + s.gamma_ef,
        ]
        .into_iter()
        .map(wavenumber_to_angular)
        .fold(0.0_f64, f64::max)
    }
}

/// Load a configuration from optional TOML text plus `--set` overrides, then
/// validate.  `text = None` starts from the documented defaults.
pub fn load_config(text: Option<&str>, overrides: &[String]) -> Result<Config> {
    let mut cfg = match text {
        Some(t) => Config::from_toml_str(t)?,
        None => Config::default(),
    };
    for assignment in overrides {
        cfg.apply_override(assignment)?;
    }
    cfg.validate()?;
    Ok(cfg)
}
