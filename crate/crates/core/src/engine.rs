//! Perturbative phase-tagged propagation of the coupled cavity–molecule
//! system.
//!
//! Instead of running the mean-field equations once per phase combination and
//! sorting the results afterwards, this engine expands the dynamics in powers
//! of the three pulse fields and propagates one complex amplitude per
//! (species, per-pulse order, phase signature) combination — 24 components in
//! total through third order.  Phases never appear in the integration: each
//! component is the coefficient of e^{−i v·Φ} for its signature v, so a
//! single propagation yields every phase-cycled signal at once, exactly.
//!
//! Components kept (one per pulse or pulse pair where applicable):
//!
//! * linear cavity field and g↔e coherence driven by each pulse,
//! * excited-state population and two-quantum g↔f coherence built from each
//!   ordered/unordered pulse pair,
//! * third-order g↔e and f↔e coherences and cavity fields at the three
//!   detectable signatures: double-quantum (Φ₁+Φ₂−Φ₃), non-rephasing
//!   (Φ₁−Φ₂+Φ₃), and rephasing (−Φ₁+Φ₂+Φ₃).
//!
//! Negative-signature partners are exact conjugates and are reconstructed,
//! never propagated.  The cavity field has no even-order component in pulse
//! amplitudes: light enters only through odd matter coherences.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::config::{PulseTrain, SystemParams};
use crate::error::{CoreError, Result};
use crate::model::DerivedRates;
use crate::units::pulse_envelope;

/// Number of propagated complex components.
pub const N_COMPONENTS: usize = 24;

/// Propagated state: one complex amplitude per component.
pub type State = [C64; N_COMPONENTS];

const CZERO: C64 = C64::new(0.0, 0.0);

/// How many Gaussian widths before the earliest pulse the integration starts.
pub const START_PAD_WIDTHS: f64 = 8.0;

// Component indices.  Pulses are numbered 1–3 in arrival order; pairs are
// ordered as (bra-side, ket-side) for populations.
pub const A1: usize = 0;
pub const A2: usize = 1;
pub const A3: usize = 2;
pub const C1: usize = 3;
pub const C2: usize = 4;
pub const C3: usize = 5;
pub const P12: usize = 6;
pub const P21: usize = 7;
pub const P13: usize = 8;
pub const P31: usize = 9;
pub const P23: usize = 10;
pub const P32: usize = 11;
pub const F12: usize = 12;
pub const F13: usize = 13;
pub const F23: usize = 14;
pub const E_DQC: usize = 15;
pub const E_NR: usize = 16;
pub const E_R: usize = 17;
pub const H_DQC: usize = 18;
pub const H_NR: usize = 19;
pub const H_R: usize = 20;
pub const B_DQC: usize = 21;
pub const B_NR: usize = 22;
pub const B_R: usize = 23;

/// Phase signatures of the three third-order detection channels, in the
/// fixed order (double-quantum, non-rephasing, rephasing) used everywhere a
/// `[T; 3]` of channels appears.
pub const CHANNEL_SIGNATURES: [[i8; 3]; 3] = [[1, 1, -1], [1, -1, 1], [-1, 1, 1]];

/// Names of the three third-order channels in canonical order.
pub const CHANNEL_NAMES: [&str; 3] = ["dqc", "nr", "r"];

/// Which dynamical variable a component belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Species {
    /// Intracavity field amplitude α.
    Cavity,
    /// Collective g↔e coherence.
    EgCoherence,
    /// Excited-state population ρ_ee.
    Population,
    /// Two-quantum g↔f coherence.
    FgCoherence,
    /// f↔e coherence.
    FeCoherence,
}

impl Species {
    /// Net excitation quanta the species carries in the rotating frame;
    /// every valid phase signature must sum to this.
    pub fn net_quanta(self) -> i8 {
        match self {
            Species::Cavity | Species::EgCoherence | Species::FeCoherence => 1,
            Species::FgCoherence => 2,
            Species::Population => 0,
        }
    }
}

/// Identity of one propagated component: species, perturbative order in each
/// pulse, and phase signature v (the component multiplies e^{−i v·Φ}).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ComponentKey {
    /// Dynamical variable.
    pub species: Species,
    /// Order in each pulse's field amplitude.
    pub order: [u8; 3],
    /// Phase signature (units of each pulse's phase).
    pub signature: [i8; 3],
}

impl ComponentKey {
    /// Build a key, rejecting structurally impossible combinations:
    /// per-pulse signature beyond the order or of the wrong parity, and a
    /// signature that does not sum to the species' net quanta (which also
    /// rules out any cavity component of even total order).
    pub fn new(species: Species, order: [u8; 3], signature: [i8; 3]) -> Result<Self> {
        for j in 0..3 {
            let o = i16::from(order[j]);
            let v = i16::from(signature[j]);
            if v.abs() > o {
                return Err(CoreError::InvalidComponent(format!(
                    "signature {v} exceeds order {o} in pulse {}",
                    j + 1
                )));
            }
            if (v - o) % 2 != 0 {
                return Err(CoreError::InvalidComponent(format!(
                    "signature {v} and order {o} differ in parity in pulse {}",
                    j + 1
                )));
            }
        }
        let net: i8 = signature.iter().sum();
        if net != species.net_quanta() {
            return Err(CoreError::InvalidComponent(format!(
                "signature sums to {net} but {species:?} carries {} net quanta",
                species.net_quanta()
            )));
        }
        Ok(Self {
            species,
            order,
            signature,
        })
    }

    /// Total perturbative order.
    pub fn total_order(&self) -> u8 {
        self.order.iter().sum()
    }
}

/// One row of the canonical component table.
#[derive(Debug, Clone, Copy)]
pub struct ComponentInfo {
    /// Position in the propagated state vector.
    pub index: usize,
    /// Stable name used in trajectory dumps and reports.
    pub name: &'static str,
    /// Structural identity.
    pub key: ComponentKey,
}

/// The canonical table of all 24 propagated components, in state order.
pub fn component_table() -> &'static [ComponentInfo; N_COMPONENTS] {
    use Species::*;
    static TABLE: std::sync::OnceLock<[ComponentInfo; N_COMPONENTS]> = std::sync::OnceLock::new();
    TABLE.get_or_init(|| {
        let k = |s, o, v| ComponentKey::new(s, o, v).expect("table entries are valid");
        [
            ComponentInfo { index: A1, name: "alpha_1", key: k(Cavity, [1, 0, 0], [1, 0, 0]) },
            ComponentInfo { index: A2, name: "alpha_2", key: k(Cavity, [0, 1, 0], [0, 1, 0]) },
            ComponentInfo { index: A3, name: "alpha_3", key: k(Cavity, [0, 0, 1], [0, 0, 1]) },
            ComponentInfo { index: C1, name: "rho_eg_1", key: k(EgCoherence, [1, 0, 0], [1, 0, 0]) },
            ComponentInfo { index: C2, name: "rho_eg_2", key: k(EgCoherence, [0, 1, 0], [0, 1, 0]) },
            ComponentInfo { index: C3, name: "rho_eg_3", key: k(EgCoherence, [0, 0, 1], [0, 0, 1]) },
            ComponentInfo { index: P12, name: "rho_ee_12", key: k(Population, [1, 1, 0], [1, -1, 0]) },
            ComponentInfo { index: P21, name: "rho_ee_21", key: k(Population, [1, 1, 0], [-1, 1, 0]) },
            ComponentInfo { index: P13, name: "rho_ee_13", key: k(Population, [1, 0, 1], [1, 0, -1]) },
            ComponentInfo { index: P31, name: "rho_ee_31", key: k(Population, [1, 0, 1], [-1, 0, 1]) },
            ComponentInfo { index: P23, name: "rho_ee_23", key: k(Population, [0, 1, 1], [0, 1, -1]) },
            ComponentInfo { index: P32, name: "rho_ee_32", key: k(Population, [0, 1, 1], [0, -1, 1]) },
            ComponentInfo { index: F12, name: "rho_fg_12", key: k(FgCoherence, [1, 1, 0], [1, 1, 0]) },
            ComponentInfo { index: F13, name: "rho_fg_13", key: k(FgCoherence, [1, 0, 1], [1, 0, 1]) },
            ComponentInfo { index: F23, name: "rho_fg_23", key: k(FgCoherence, [0, 1, 1], [0, 1, 1]) },
            ComponentInfo { index: E_DQC, name: "rho_eg_dqc", key: k(EgCoherence, [1, 1, 1], [1, 1, -1]) },
            ComponentInfo { index: E_NR, name: "rho_eg_nr", key: k(EgCoherence, [1, 1, 1], [1, -1, 1]) },
            ComponentInfo { index: E_R, name: "rho_eg_r", key: k(EgCoherence, [1, 1, 1], [-1, 1, 1]) },
            ComponentInfo { index: H_DQC, name: "rho_fe_dqc", key: k(FeCoherence, [1, 1, 1], [1, 1, -1]) },
            ComponentInfo { index: H_NR, name: "rho_fe_nr", key: k(FeCoherence, [1, 1, 1], [1, -1, 1]) },
            ComponentInfo { index: H_R, name: "rho_fe_r", key: k(FeCoherence, [1, 1, 1], [-1, 1, 1]) },
            ComponentInfo { index: B_DQC, name: "alpha_dqc", key: k(Cavity, [1, 1, 1], [1, 1, -1]) },
            ComponentInfo { index: B_NR, name: "alpha_nr", key: k(Cavity, [1, 1, 1], [1, -1, 1]) },
            ComponentInfo { index: B_R, name: "alpha_r", key: k(Cavity, [1, 1, 1], [-1, 1, 1]) },
        ]
    })
}

/// Third-order pathway selection.
///
/// Each flag keeps (true) or removes (false) one class of source terms; the
/// linear and second-order dynamics are never masked.  `gsb_se` gates the
/// ground-state-bleach / stimulated-emission sources (population acting back
/// on the one-quantum coherence; accepted under the alias `contraction`),
/// `esa` the excited-state-absorption sources (population promoted onto the
/// f↔e coherence), and `dqc_feed` the two-quantum coherence feeding both
/// one-quantum channels.  `eid` gates the excitation-induced-dephasing
/// sources in the rephasing/non-rephasing channels; `eid_in_2qc` extends
/// them to the double-quantum channel.  `disable_ef_coupling` removes the
/// e↔f transition dipole entirely, truncating the ladder to two levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathwayMask {
    /// Keep ground-state-bleach and stimulated-emission sources.
    #[serde(alias = "contraction")]
    pub gsb_se: bool,
    /// Keep excited-state-absorption sources.
    pub esa: bool,
    /// Keep the two-quantum-coherence feed-down sources.
    pub dqc_feed: bool,
    /// Keep excitation-induced dephasing (rephasing and non-rephasing).
    pub eid: bool,
    /// Also apply excitation-induced dephasing in the double-quantum channel.
    pub eid_in_2qc: bool,
    /// Remove the e↔f transition dipole (two-level truncation).
    pub disable_ef_coupling: bool,
}

impl Default for PathwayMask {
    fn default() -> Self {
        Self {
            gsb_se: true,
            esa: true,
            dqc_feed: true,
            eid: true,
            eid_in_2qc: false,
            disable_ef_coupling: false,
        }
    }
}

/// Everything the derivative needs, with angular rates pre-computed.
#[derive(Debug, Clone)]
pub struct EngineContext {
    /// Rotating-frame rates in cm⁻¹ (kept for reporting).
    pub rates: DerivedRates,
    /// Pathway selection.
    pub mask: PathwayMask,
    /// Gaussian pulse width, ps.
    pub tau_w: f64,
    /// Pulse center times, ps.
    pub centers: [f64; 3],
    /// Per-pulse multiplier on the drive envelope; 1 for a physical run.
    /// Zeroing entries switches pulses off (e.g. probe-only linear runs).
    pub drive_scale: [f64; 3],
    // Cached angular quantities (rad/ps).
    r_c: C64,
    r_eg: C64,
    r_fe: C64,
    r_fg: C64,
    g: f64,
    g_ef: f64,
    beta_half: f64,
}

impl EngineContext {
    /// Build a context from configuration pieces; all three pulses active.
    pub fn new(system: &SystemParams, pulses: &PulseTrain, mask: PathwayMask) -> Self {
        let rates = DerivedRates::derive(system, pulses.omega_l);
        let g_ef = if mask.disable_ef_coupling {
            0.0
        } else {
            rates.coupling_ef()
        };
        Self {
            rates,
            mask,
            tau_w: pulses.tau_w,
            centers: pulses.centers(),
            drive_scale: [1.0; 3],
            r_c: rates.cavity_rate(),
            r_eg: rates.eg_rate(),
            r_fe: rates.fe_rate(),
            r_fg: rates.fg_rate(),
            g: rates.coupling_ge(),
            g_ef,
            beta_half: rates.beta_angular() / 2.0,
        }
    }

    /// Same context with per-pulse drive multipliers replaced.
    pub fn with_drive_scale(mut self, scale: [f64; 3]) -> Self {
        self.drive_scale = scale;
        self
    }

    /// Time at which the integration starts: comfortably before the earliest
    /// active pulse.
    pub fn start_time(&self) -> f64 {
        let earliest = self
            .centers
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        earliest - START_PAD_WIDTHS * self.tau_w
    }

    /// Time derivative of the full component vector.
    #[inline]
    pub fn derivative(&self, t: f64, y: &State, dy: &mut State) {
        let ig = C64::new(0.0, self.g);
        let ig_ef = C64::new(0.0, self.g_ef);
        let m = &self.mask;

        let f1 = pulse_envelope(t - self.centers[0], self.tau_w) * self.drive_scale[0];
        let f2 = pulse_envelope(t - self.centers[1], self.tau_w) * self.drive_scale[1];
        let f3 = pulse_envelope(t - self.centers[2], self.tau_w) * self.drive_scale[2];

        let (a1, a2, a3) = (y[A1], y[A2], y[A3]);
        let (c1, c2, c3) = (y[C1], y[C2], y[C3]);

        // Linear: driven cavity field and the coherence it dresses.
        dy[A1] = -self.r_c * a1 - ig * c1 - f1;
        dy[A2] = -self.r_c * a2 - ig * c2 - f2;
        dy[A3] = -self.r_c * a3 - ig * c3 - f3;
        dy[C1] = -self.r_eg * c1 - ig * a1;
        dy[C2] = -self.r_eg * c2 - ig * a2;
        dy[C3] = -self.r_eg * c3 - ig * a3;

        // Second order, excited population: undamped and detuning-free —
        // field against conjugate coherence, pairwise phase-tagged.
        dy[P12] = -ig * (a1 * c2.conj() - a2.conj() * c1);
        dy[P21] = -ig * (a2 * c1.conj() - a1.conj() * c2);
        dy[P13] = -ig * (a1 * c3.conj() - a3.conj() * c1);
        dy[P31] = -ig * (a3 * c1.conj() - a1.conj() * c3);
        dy[P23] = -ig * (a2 * c3.conj() - a3.conj() * c2);
        dy[P32] = -ig * (a3 * c2.conj() - a2.conj() * c3);

        // Second order, two-quantum coherence: climbing the ladder.
        dy[F12] = -self.r_fg * y[F12] - ig_ef * (a1 * c2 + a2 * c1);
        dy[F13] = -self.r_fg * y[F13] - ig_ef * (a1 * c3 + a3 * c1);
        dy[F23] = -self.r_fg * y[F23] - ig_ef * (a2 * c3 + a3 * c2);

        // Third order, one-quantum coherence.  Sources per channel:
        // bleach/stimulated emission (+2ig·α·ρ_ee), two-quantum feed-down
        // (−iG·α*·ρ_fg), and excitation-induced dephasing (−β/2·ρ_ee·ρ_eg).
        let two_ig = 2.0 * ig;
        let mut de_dqc = -self.r_eg * y[E_DQC] - ig * y[B_DQC];
        let mut de_nr = -self.r_eg * y[E_NR] - ig * y[B_NR];
        let mut de_r = -self.r_eg * y[E_R] - ig * y[B_R];
        if m.gsb_se {
            de_dqc += two_ig * (a1 * y[P23] + a2 * y[P13]);
            de_nr += two_ig * (a1 * y[P32] + a3 * y[P12]);
            de_r += two_ig * (a2 * y[P31] + a3 * y[P21]);
        }
        if m.dqc_feed {
            de_dqc -= ig_ef * a3.conj() * y[F12];
            de_nr -= ig_ef * a2.conj() * y[F13];
            de_r -= ig_ef * a1.conj() * y[F23];
        }
        if m.eid {
            if m.eid_in_2qc {
                de_dqc -= self.beta_half * (c1 * y[P23] + c2 * y[P13]);
            }
            de_nr -= self.beta_half * (c1 * y[P32] + c3 * y[P12]);
            de_r -= self.beta_half * (c3 * y[P21] + c2 * y[P31]);
        }
        dy[E_DQC] = de_dqc;
        dy[E_NR] = de_nr;
        dy[E_R] = de_r;

        // Third order, f↔e coherence.  Sources: excited-state absorption
        // (−iG·α·ρ_ee) and the same two-quantum coherence releasing a
        // one-quantum photon (+ig·α*·ρ_fg).
        let mut dh_dqc = -self.r_fe * y[H_DQC];
        let mut dh_nr = -self.r_fe * y[H_NR];
        let mut dh_r = -self.r_fe * y[H_R];
        if m.esa {
            dh_dqc -= ig_ef * (a2 * y[P13] + a1 * y[P23]);
            dh_nr -= ig_ef * (a3 * y[P12] + a1 * y[P32]);
            dh_r -= ig_ef * (a3 * y[P21] + a2 * y[P31]);
        }
        if m.dqc_feed {
            dh_dqc += ig * a3.conj() * y[F12];
            dh_nr += ig * a2.conj() * y[F13];
            dh_r += ig * a1.conj() * y[F23];
        }
        dy[H_DQC] = dh_dqc;
        dy[H_NR] = dh_nr;
        dy[H_R] = dh_r;

        // Third order, cavity field: radiated by both coherences.
        dy[B_DQC] = -self.r_c * y[B_DQC] - ig * y[E_DQC] - ig_ef * y[H_DQC];
        dy[B_NR] = -self.r_c * y[B_NR] - ig * y[E_NR] - ig_ef * y[H_NR];
        dy[B_R] = -self.r_c * y[B_R] - ig * y[E_R] - ig_ef * y[H_R];
    }
}

/// One classical Runge–Kutta step of width `dt` for any fixed-size complex
/// system, advancing `y` in place.
pub fn rk4_step<const N: usize, F>(mut f: F, t: f64, dt: f64, y: &mut [C64; N])
where
    F: FnMut(f64, &[C64; N], &mut [C64; N]),
{
    let mut k1 = [CZERO; N];
    let mut k2 = [CZERO; N];
    let mut k3 = [CZERO; N];
    let mut k4 = [CZERO; N];
    let mut tmp = [CZERO; N];

    f(t, y, &mut k1);
    for i in 0..N {
        tmp[i] = y[i] + k1[i] * (0.5 * dt);
    }
    f(t + 0.5 * dt, &tmp, &mut k2);
    for i in 0..N {
        tmp[i] = y[i] + k2[i] * (0.5 * dt);
    }
    f(t + 0.5 * dt, &tmp, &mut k3);
    for i in 0..N {
        tmp[i] = y[i] + k3[i] * dt;
    }
    f(t + dt, &tmp, &mut k4);
    let w = dt / 6.0;
    for i in 0..N {
        y[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * w;
    }
}

/// Time-stepping controls for one propagation.
#[derive(Debug, Clone, Copy)]
pub struct Numerics {
    /// Integrator step, ps.
    pub dt: f64,
    /// Record every n-th step during the detection window.
    pub record_stride: usize,
    /// Length of the detection window after the probe center, ps.
    pub detection_window: f64,
}

/// Full component trajectory sampled at the recording stride.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Absolute times, ps.
    pub times: Vec<f64>,
    /// Component vectors at those times.
    pub states: Vec<State>,
}

/// Result of one propagation.
#[derive(Debug, Clone)]
pub struct PropagationOutput {
    /// Spacing of the detection samples, ps.
    pub sample_period: f64,
    /// Detection times relative to the probe center, ps; the first few are
    /// negative (the lead-in covering the probe's rise).
    pub detection_times: Vec<f64>,
    /// Linear cavity field of each pulse over the detection window.
    pub linear_fields: [Vec<C64>; 3],
    /// Third-order cavity fields over the detection window, in channel order
    /// (double-quantum, non-rephasing, rephasing).
    pub third_fields: [Vec<C64>; 3],
    /// Total excited population at the probe center: the (1,2)+(2,1) pair
    /// sum, real up to integration noise.
    pub population_at_probe: C64,
    /// Full sampled trajectory, when requested.
    pub full_trajectory: Option<Trajectory>,
}

impl PropagationOutput {
    /// Linear cavity field of the probe (third pulse).
    pub fn probe_field(&self) -> &[C64] {
        &self.linear_fields[2]
    }
}

/// Shared step/recording layout for one propagation: the grid is anchored to
/// the probe center so detection samples land exactly on integrator steps,
/// and it starts early enough that every pulse lies inside the window.
/// Detection recording begins a lead-in interval *before* the probe center —
/// the probe and the nonlinear response switch on with the probe pulse, so
/// the recorded span holds the complete emitted fields and their Fourier
/// transforms are whole-line transforms to floating-point accuracy.  The
/// engine and the mean-field reference route both build their grids here, so
/// their detection samples are directly comparable.
#[derive(Debug, Clone, Copy)]
pub struct GridPlan {
    /// First integration time, ps.
    pub t_start: f64,
    /// Steps from `t_start` to the probe center (a multiple of the stride).
    pub n_pre: usize,
    /// Recording stride in steps.
    pub stride: usize,
    /// Detection samples recorded before the probe center.
    pub n_before: usize,
    /// Total number of detection samples.
    pub n_samples: usize,
    /// Total integration steps.
    pub n_steps: usize,
    /// Detection sample spacing, ps.
    pub sample_period: f64,
}

impl GridPlan {
    /// Lay out the grid for a probe at `t_probe`, starting no later than
    /// `raw_start`, with detection recording beginning `lead_in` ps before
    /// the probe center.
    pub fn new(t_probe: f64, raw_start: f64, lead_in: f64, numerics: &Numerics) -> Self {
        let dt = numerics.dt;
        let stride = numerics.record_stride.max(1);
        let pre_steps = ((t_probe - raw_start) / dt).ceil().max(1.0) as usize;
        // round up to a whole number of strides so every recorded time is an
        // exact multiple of the sample period relative to the probe center
        let n_pre = pre_steps.div_ceil(stride) * stride;
        let t_start = t_probe - n_pre as f64 * dt;
        let sample_period = stride as f64 * dt;
        let n_before = ((lead_in / sample_period).ceil().max(0.0) as usize).min(n_pre / stride);
        let n_after = (numerics.detection_window / sample_period).floor() as usize + 1;
        let n_samples = n_before + n_after;
        let n_steps = n_pre + (n_after - 1) * stride;
        Self {
            t_start,
            n_pre,
            stride,
            n_before,
            n_samples,
            n_steps,
            sample_period,
        }
    }

    /// First recorded integration step.
    pub fn record_from(&self) -> usize {
        self.n_pre - self.n_before * self.stride
    }
}

/// Propagate from rest through all pulses and the detection window.
pub fn propagate(
    ctx: &EngineContext,
    numerics: &Numerics,
    record_full: bool,
) -> Result<PropagationOutput> {
    let dt = numerics.dt;
    let plan = GridPlan::new(
        ctx.centers[2],
        ctx.start_time(),
        START_PAD_WIDTHS * ctx.tau_w,
        numerics,
    );
    let GridPlan {
        t_start,
        n_pre,
        stride,
        n_samples,
        n_steps,
        sample_period,
        ..
    } = plan;
    let record_from = plan.record_from();

    let mut y: State = [CZERO; N_COMPONENTS];
    let mut detection_times = Vec::with_capacity(n_samples);
    let mut linear: [Vec<C64>; 3] = [
        Vec::with_capacity(n_samples),
        Vec::with_capacity(n_samples),
        Vec::with_capacity(n_samples),
    ];
    let mut third: [Vec<C64>; 3] = [
        Vec::with_capacity(n_samples),
        Vec::with_capacity(n_samples),
        Vec::with_capacity(n_samples),
    ];
    let mut population_at_probe = CZERO;
    let mut full = if record_full {
        Some(Trajectory {
            times: Vec::new(),
            states: Vec::new(),
        })
    } else {
        None
    };

    for step in 0..=n_steps {
        let t = t_start + step as f64 * dt;
        if let Some(traj) = full.as_mut() {
            if step % stride == 0 {
                traj.times.push(t);
                traj.states.push(y);
            }
        }
        if step >= record_from && (step - record_from) % stride == 0 {
            let rel = (step as f64 - n_pre as f64) * dt;
            if step == n_pre {
                population_at_probe = y[P12] + y[P21];
            }
            if !(y[A3].is_finite() && y[B_DQC].is_finite() && y[B_NR].is_finite() && y[B_R].is_finite())
            {
                return Err(CoreError::InvalidTrajectory(format!(
                    "non-finite amplitude at t = {t:.6} ps"
                )));
            }
            detection_times.push(rel);
            linear[0].push(y[A1]);
            linear[1].push(y[A2]);
            linear[2].push(y[A3]);
            third[0].push(y[B_DQC]);
            third[1].push(y[B_NR]);
            third[2].push(y[B_R]);
        }
        if step < n_steps {
            rk4_step(|t, y, dy| ctx.derivative(t, y, dy), t, dt, &mut y);
        }
    }

    Ok(PropagationOutput {
        sample_period,
        detection_times,
        linear_fields: linear,
        third_fields: third,
        population_at_probe,
        full_trajectory: full,
    })
}
