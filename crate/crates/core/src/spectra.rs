//! Fourier analysis: detected fields → transmission spectra → 2D maps.
//!
//! Conventions used throughout (and tested against closed forms below):
//!
//! * Every transform uses the kernel e^{+iωt} with t measured from the probe
//!   center, so a component rotating as e^{−iδt} in the carrier frame peaks
//!   at ω = −δ… i.e. at its physical offset from the carrier.  Frequencies
//!   are angular offsets in rad/ps internally; axes are emitted as absolute
//!   wavenumbers (carrier + offset, twice the carrier for the two-quantum
//!   axis).
//! * Time integrals are plain rectangle sums (`Δt·Σ`), which keep Parseval's
//!   identity exact on the discrete grid; windows other than the default
//!   rectangular one are opt-in.
//! * Zero padding refines the frequency grid; it never adds information.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;
use rustfft::FftPlanner;

use crate::config::Apodization;
use crate::engine::PropagationOutput;
use crate::error::{CoreError, Result};
use crate::model::DerivedRates;
use crate::units::{angular_to_wavenumber, pulse_spectrum, wavenumber_to_angular};

const CZERO: C64 = C64::new(0.0, 0.0);

/// A field spectrum on the shifted FFT grid: ascending angular offsets from
/// the carrier (rad/ps) and complex values.
#[derive(Debug, Clone)]
pub struct DetectionSpectrum {
    /// Angular frequency offsets, ascending, rad/ps.
    pub omega: Vec<f64>,
    /// Complex spectral values, Δt·Σ x(t)e^{+iωt}.
    pub values: Vec<C64>,
}

impl DetectionSpectrum {
    /// Index of the grid point closest to the angular offset `omega`.
    pub fn index_of(&self, omega: f64) -> usize {
        let step = self.omega[1] - self.omega[0];
        let i = ((omega - self.omega[0]) / step).round();
        (i.max(0.0) as usize).min(self.omega.len() - 1)
    }
}

/// Whole-line Fourier transform of a sampled detection series.
///
/// `times` must be uniformly spaced and referenced to the probe center (the
/// lead-in entries are negative); the result is Δt·Σ_k x_k e^{+iω t_k} on
/// the FFT grid of `pad_factor × len` bins, shifted to ascending order.
pub fn detection_transform(times: &[f64], samples: &[C64], pad_factor: usize) -> DetectionSpectrum {
    assert_eq!(times.len(), samples.len());
    assert!(samples.len() >= 2, "need at least two samples");
    let n = samples.len();
    let dt = times[1] - times[0];
    let big_n = n * pad_factor.max(1);

    let mut buf = vec![CZERO; big_n];
    buf[..n].copy_from_slice(samples);
    FftPlanner::new().plan_fft_inverse(big_n).process(&mut buf);

    let t0 = times[0];
    let half = big_n / 2;
    let shift = big_n - half;
    let domega = std::f64::consts::TAU / (big_n as f64 * dt);
    let mut omega = Vec::with_capacity(big_n);
    let mut values = Vec::with_capacity(big_n);
    for q in 0..big_n {
        let w = (q as f64 - half as f64) * domega;
        let j = (q + shift) % big_n;
        omega.push(w);
        // re-reference the transform to t = 0 at the probe center
        values.push(buf[j] * dt * C64::from_polar(1.0, w * t0));
    }
    DetectionSpectrum { omega, values }
}

/// Parameters for turning one propagation into transmission spectra.
#[derive(Debug, Clone, Copy)]
pub struct DetectionParams {
    /// Gaussian pulse width, ps.
    pub tau_w: f64,
    /// Carrier frequency, cm⁻¹ (absolute axis origin).
    pub omega_l: f64,
    /// Zero-padding factor for the detection transform.
    pub pad_factor: usize,
    /// Probe-band mask threshold (fraction of the probe spectral peak).
    pub mask_eps: f64,
    /// Emitted half-span about the carrier, cm⁻¹.
    pub halfwidth_cm: f64,
    /// Effective drive amplitudes of the three pulses.
    pub amplitudes: [f64; 3],
}

/// Transmission-side analysis of one propagation: the probe's linear
/// transmission spectrum and the differential transmission of each
/// third-order channel, on a common cropped frequency axis.
#[derive(Debug, Clone)]
pub struct DetectionAnalysis {
    /// Angular offsets from the carrier, rad/ps, ascending.
    pub omega: Vec<f64>,
    /// Absolute detection axis, cm⁻¹.
    pub nu_abs: Vec<f64>,
    /// Complex transmission amplitude of the probe, κ/2 · A₁(ω)/f̃(ω).
    pub linear_amplitude: Vec<C64>,
    /// Linear power transmission of the probe, |linear_amplitude|².
    pub linear_transmission: Vec<f64>,
    /// Complex differential transmission per channel (double-quantum,
    /// non-rephasing, rephasing).  The real part is the measured signal; the
    /// imaginary part is its dispersive partner.
    pub dt_channels: [Vec<C64>; 3],
    /// True where the probe spectrum is below the mask threshold and the
    /// values were zeroed.
    pub masked: Vec<bool>,
}

impl DetectionAnalysis {
    /// Measured pump–probe signal: the real parts of all channels summed.
    pub fn total_dt(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.omega.len()];
        for ch in &self.dt_channels {
            for (o, v) in out.iter_mut().zip(ch) {
                *o += v.re;
            }
        }
        out
    }

    /// Peak linear transmission over the emitted band.
    pub fn peak_linear_transmission(&self) -> f64 {
        self.linear_transmission.iter().cloned().fold(0.0, f64::max)
    }

    /// Peak |signal| over all channels and frequencies.
    pub fn peak_abs_dt(&self) -> f64 {
        self.dt_channels
            .iter()
            .flat_map(|ch| ch.iter())
            .map(|v| v.re.abs())
            .fold(0.0, f64::max)
    }
}

/// Heterodyne differential transmission of one third-order channel against
/// the probe's linear field:
///
/// ΔT(ω) = (κ/2)²·η₁η₂ · 2·conj(A₁(ω))·A₃(ω) / f̃(ω)²
///
/// (pump-on minus pump-off; the probe's own amplitude cancels between
/// numerator and denominator).  Both spectra must share one frequency grid.
/// Frequencies where the probe pulse spectrum is below `mask_eps` of its
/// peak are zeroed and flagged rather than divided through.  The returned
/// values are complex; the measured signal is the real part, asserted to be
/// exactly the real part of the stored value.
pub fn differential_transmission(
    alpha1_probe: &DetectionSpectrum,
    alpha3_v: &DetectionSpectrum,
    tau_w: f64,
    kappa_cm: f64,
    eta1: f64,
    eta2: f64,
    mask_eps: f64,
) -> (Vec<C64>, Vec<bool>) {
    assert_eq!(
        alpha1_probe.omega, alpha3_v.omega,
        "probe and third-order spectra must share one grid"
    );
    let half_kappa = wavenumber_to_angular(kappa_cm) / 2.0;
    let weight = half_kappa * half_kappa * eta1 * eta2 * 2.0;
    let mut values = Vec::with_capacity(alpha1_probe.omega.len());
    let mut masked = Vec::with_capacity(alpha1_probe.omega.len());
    for (i, &w) in alpha1_probe.omega.iter().enumerate() {
        let f = pulse_spectrum(w, tau_w);
        if f < mask_eps {
            values.push(CZERO);
            masked.push(true);
        } else {
            values.push(weight * alpha1_probe.values[i].conj() * alpha3_v.values[i] / (f * f));
            masked.push(false);
        }
    }
    (values, masked)
}

/// Compute transmission spectra from one propagation: the probe's linear
/// transmission plus [`differential_transmission`] of every channel, on a
/// common axis cropped to the requested band.
pub fn analyze_detection(
    out: &PropagationOutput,
    rates: &DerivedRates,
    p: &DetectionParams,
) -> DetectionAnalysis {
    let probe = detection_transform(&out.detection_times, out.probe_field(), p.pad_factor);
    let thirds: [DetectionSpectrum; 3] = [
        detection_transform(&out.detection_times, &out.third_fields[0], p.pad_factor),
        detection_transform(&out.detection_times, &out.third_fields[1], p.pad_factor),
        detection_transform(&out.detection_times, &out.third_fields[2], p.pad_factor),
    ];
    let channels: Vec<(Vec<C64>, Vec<bool>)> = thirds
        .iter()
        .map(|spec| {
            differential_transmission(
                &probe,
                spec,
                p.tau_w,
                rates.kappa,
                p.amplitudes[0],
                p.amplitudes[1],
                p.mask_eps,
            )
        })
        .collect();

    let half_kappa = wavenumber_to_angular(rates.kappa) / 2.0;
    let span = wavenumber_to_angular(p.halfwidth_cm);

    let mut omega = Vec::new();
    let mut nu_abs = Vec::new();
    let mut linear_amplitude = Vec::new();
    let mut linear_transmission = Vec::new();
    let mut dt_channels: [Vec<C64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    let mut masked = Vec::new();

    for (i, &w) in probe.omega.iter().enumerate() {
        if w.abs() > span {
            continue;
        }
        let f = pulse_spectrum(w, p.tau_w);
        omega.push(w);
        nu_abs.push(p.omega_l + angular_to_wavenumber(w));
        let is_masked = channels[0].1[i];
        masked.push(is_masked);
        let t_amp = if is_masked { CZERO } else { half_kappa * probe.values[i] / f };
        linear_amplitude.push(t_amp);
        linear_transmission.push(t_amp.norm_sqr());
        for (ch, (values, _)) in dt_channels.iter_mut().zip(&channels) {
            ch.push(values[i]);
        }
    }

    DetectionAnalysis {
        omega,
        nu_abs,
        linear_amplitude,
        linear_transmission,
        dt_channels,
        masked,
    }
}

/// Closed-form linear intracavity response to one pulse:
///
/// α(ω) = −f̃(ω) / [κ/2 − i(ω+Δ_c) + g²/(γ_ge/2 − i(ω+Δ_ge))]
///
/// with everything angular; ω is the offset from the carrier.
pub fn linear_cavity_response(rates: &DerivedRates, tau_w: f64, omega: f64) -> C64 {
    let f = pulse_spectrum(omega, tau_w);
    -f / cavity_resolvent(rates, omega)
}

/// The dressed-cavity denominator κ/2 − i(ω+Δ_c) + g²/(γ_ge/2 − i(ω+Δ_ge)).
fn cavity_resolvent(rates: &DerivedRates, omega: f64) -> C64 {
    let g = rates.coupling_ge();
    let d_ge = C64::new(
        wavenumber_to_angular(rates.gamma_ge) / 2.0,
        -(omega + wavenumber_to_angular(rates.delta_ge)),
    );
    C64::new(
        wavenumber_to_angular(rates.kappa) / 2.0,
        -(omega + wavenumber_to_angular(rates.delta_c)),
    ) + g * g / d_ge
}

/// The two normal modes of the coupled cavity–coherence system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolaritonModes {
    /// Lower-polariton absolute frequency, cm⁻¹.
    pub lower_cm: f64,
    /// Upper-polariton absolute frequency, cm⁻¹.
    pub upper_cm: f64,
    /// Lower-polariton half-linewidth, cm⁻¹.
    pub lower_halfwidth_cm: f64,
    /// Upper-polariton half-linewidth, cm⁻¹.
    pub upper_halfwidth_cm: f64,
    /// Frequency splitting upper − lower, cm⁻¹.
    pub splitting_cm: f64,
}

/// Diagonalize the linear cavity–coherence block.
///
/// The free evolution of (α, collective coherence) is ẋ = Mx with
///
/// M = [[−κ/2 + iΔ_c, −ig], [−ig, −γ_ge/2 + iΔ_ge]]
///
/// Each eigenvalue λ gives a mode at absolute frequency carrier − Im(λ)
/// with half-linewidth −Re(λ).  Degenerate modes (vanishing discriminant)
/// are rejected: mode-resolved quantities are meaningless there.
pub fn polariton_frequencies(rates: &DerivedRates, omega_l: f64) -> Result<PolaritonModes> {
    let m00 = C64::new(
        -wavenumber_to_angular(rates.kappa) / 2.0,
        wavenumber_to_angular(rates.delta_c),
    );
    let m11 = C64::new(
        -wavenumber_to_angular(rates.gamma_ge) / 2.0,
        wavenumber_to_angular(rates.delta_ge),
    );
    let off = C64::new(0.0, -rates.coupling_ge());

    let half_tr = (m00 + m11) / 2.0;
    let disc = ((m00 - m11) / 2.0).powi(2) + off * off;
    let root = disc.sqrt();
    let lam = [half_tr + root, half_tr - root];

    let splitting = angular_to_wavenumber((lam[0] - lam[1]).norm());
    if splitting < 1e-9 {
        return Err(CoreError::DegeneratePolaritons { splitting });
    }

    let mut modes: Vec<(f64, f64)> = lam
        .iter()
        .map(|l| {
            (
                omega_l - angular_to_wavenumber(l.im),
                -angular_to_wavenumber(l.re),
            )
        })
        .collect();
    modes.sort_by(|a, b| a.0.total_cmp(&b.0));

    Ok(PolaritonModes {
        lower_cm: modes[0].0,
        upper_cm: modes[1].0,
        lower_halfwidth_cm: modes[0].1,
        upper_halfwidth_cm: modes[1].1,
        splitting_cm: modes[1].0 - modes[0].0,
    })
}

/// Analytic stationary-limit third-order field decomposed by pathway.
#[derive(Debug, Clone)]
pub struct StationaryCurves {
    /// Angular offsets, rad/ps.
    pub omega: Vec<f64>,
    /// Bleach/stimulated-emission field spectrum (∝ supplied population).
    pub gsb_se: Vec<C64>,
    /// Excited-state-absorption field spectrum (∝ supplied population).
    pub esa: Vec<C64>,
    /// Two-quantum-coherence field spectrum (population-independent; driven
    /// by the two-quantum coherence resolvent at doubled frequency).
    pub dqc: Vec<C64>,
}

/// Stationary-limit pathway decomposition of the third-order cavity field.
///
/// In the stationary limit the second-order quantities are replaced by their
/// static forms — a constant excited population P for the bleach and
/// absorption pathways, and the single-frequency two-quantum coherence for
/// the remaining pathway — and the coupled field–coherence response solves in
/// closed form.  With den_x(ω) = γ_x/2 − i(ω+Δ_x), the dressed-cavity
/// resolvent den(ω) from the linear response, and
/// den_fg(u) = (γ_ge+γ_ef) − i(u+Δ_ge+Δ_ef):
///
/// * bleach/stimulated emission: 2g²·P·α₁(ω)/den_ge(ω) / den(ω),
/// * excited-state absorption: −G²·P·α₁(ω)/den_ef(ω) / den(ω),
/// * two-quantum coherence:
///   g²G²·conj(α₁)·α₁²·(1/den_ge − 1/den_ef)/(den_ge·den_fg(2ω)) / den(ω).
///
/// With an equally spaced ladder, harmonic dipole ratio, and equal
/// linewidths, den_ge ≡ den_ef: the first two terms cancel against each
/// other and the third vanishes through its resolvent difference.
pub fn stationary_contributions(
    rates: &DerivedRates,
    tau_w: f64,
    rho_ee: f64,
    omega: &[f64],
) -> StationaryCurves {
    let g = rates.coupling_ge();
    let g_ef = rates.coupling_ef();
    let gamma_fg = wavenumber_to_angular(rates.gamma_ge + rates.gamma_ef);
    let delta_sum = wavenumber_to_angular(rates.delta_ge + rates.delta_ef);
    let mut gsb_se = Vec::with_capacity(omega.len());
    let mut esa = Vec::with_capacity(omega.len());
    let mut dqc = Vec::with_capacity(omega.len());
    for &w in omega {
        let alpha1 = linear_cavity_response(rates, tau_w, w);
        let pref = (cavity_resolvent(rates, w)).inv();
        let d_ge = C64::new(
            wavenumber_to_angular(rates.gamma_ge) / 2.0,
            -(w + wavenumber_to_angular(rates.delta_ge)),
        );
        let d_ef = C64::new(
            wavenumber_to_angular(rates.gamma_ef) / 2.0,
            -(w + wavenumber_to_angular(rates.delta_ef)),
        );
        let d_fg = C64::new(gamma_fg, -(2.0 * w + delta_sum));
        gsb_se.push(pref * 2.0 * g * g * rho_ee * alpha1 / d_ge);
        esa.push(pref * (-g_ef * g_ef) * rho_ee * alpha1 / d_ef);
        dqc.push(
            pref * g * g * g_ef * g_ef * alpha1.conj() * alpha1 * alpha1
                * (d_ge.inv() - d_ef.inv())
                / (d_ge * d_fg),
        );
    }
    StationaryCurves {
        omega: omega.to_vec(),
        gsb_se,
        esa,
        dqc,
    }
}

/// A 2D spectrum on absolute-wavenumber axes, stored row-major as
/// `values[i1 · axis3.len() + i3]`.
#[derive(Debug, Clone)]
pub struct SpectrumGrid {
    /// What the grid holds (e.g. `scan_1q_nr`).
    pub kind: String,
    /// Excitation/waiting axis, cm⁻¹ (absolute).
    pub axis1: Vec<f64>,
    /// Detection axis, cm⁻¹ (absolute).
    pub axis3: Vec<f64>,
    /// Complex values; the real part is the absorptive spectrum.
    pub values: Vec<C64>,
    /// Divisor already applied to the values (1 for a raw grid).
    pub normalization: f64,
    /// Free-form provenance entries written into the output header.
    pub metadata: BTreeMap<String, String>,
}

impl SpectrumGrid {
    /// Value at (excitation index, detection index).
    pub fn at(&self, i1: usize, i3: usize) -> C64 {
        self.values[i1 * self.axis3.len() + i3]
    }

    /// Largest |Re| over the grid.
    pub fn peak_abs_real(&self) -> f64 {
        self.values.iter().map(|v| v.re.abs()).fold(0.0, f64::max)
    }

    /// Copy of the grid divided by its absorptive peak, with the divisor
    /// recorded in `normalization` and the metadata.
    pub fn normalized(&self) -> SpectrumGrid {
        let peak = self.peak_abs_real();
        let divisor = if peak > 0.0 { peak } else { 1.0 };
        let mut g = self.clone();
        g.values.iter_mut().for_each(|v| *v /= divisor);
        g.normalization = self.normalization * divisor;
        g.metadata
            .insert("normalization".to_string(), format!("{divisor:.16e}"));
        g
    }
}

/// Delay-domain window weights for `n` samples at spacing `step`.
pub fn apodization_weights(kind: Apodization, rate: f64, n: usize, step: f64) -> Vec<f64> {
    match kind {
        Apodization::None => vec![1.0; n],
        Apodization::Hann => (0..n)
            .map(|k| {
                let x = k as f64 / (n - 1).max(1) as f64;
                0.5 * (1.0 + (std::f64::consts::PI * x).cos())
            })
            .collect(),
        Apodization::Exp => (0..n).map(|k| (-rate * k as f64 * step).exp()).collect(),
    }
}

/// Settings for the delay-direction transform of a scan.
#[derive(Debug, Clone)]
pub struct DelayTransformParams {
    /// Delay step, ps.
    pub delay_step: f64,
    /// Zero-padding factor.
    pub pad_factor: usize,
    /// Delay-domain window.
    pub apodization: Apodization,
    /// Exponential window rate, ps⁻¹.
    pub apod_rate: f64,
    /// Absolute origin of the delay-frequency axis, cm⁻¹ (the carrier for
    /// one-quantum scans, twice the carrier for the two-quantum scan).
    pub axis_offset_cm: f64,
    /// Emitted half-span about the origin, cm⁻¹.
    pub halfwidth_cm: f64,
}

/// Half-sided transform of a stack of differential-transmission traces over
/// the delay axis: S(ω₁, ω₃) = Δτ·Σ_k w_k·ΔT(τ_k, ω₃)·e^{+iω₁τ_k}.
///
/// `rows` holds one real trace per delay (equally spaced from zero), all on
/// the detection axis `axis3_cm`.  The result is cropped to the requested
/// band about the axis origin.
pub fn delay_transform_grid(
    kind: &str,
    rows: &[Vec<f64>],
    axis3_cm: &[f64],
    p: &DelayTransformParams,
) -> SpectrumGrid {
    assert!(rows.len() >= 2, "need at least two delay points");
    let n = rows.len();
    let n_cols = axis3_cm.len();
    for r in rows {
        assert_eq!(r.len(), n_cols, "all traces share one detection axis");
    }
    let weights = apodization_weights(p.apodization, p.apod_rate, n, p.delay_step);
    let big_n = n * p.pad_factor.max(1);
    let domega = std::f64::consts::TAU / (big_n as f64 * p.delay_step);
    let half = big_n / 2;
    let shift = big_n - half;
    let span = wavenumber_to_angular(p.halfwidth_cm);

    // which shifted bins fall inside the emitted band
    let kept: Vec<usize> = (0..big_n)
        .filter(|&q| ((q as f64 - half as f64) * domega).abs() <= span)
        .collect();
    let axis1: Vec<f64> = kept
        .iter()
        .map(|&q| p.axis_offset_cm + angular_to_wavenumber((q as f64 - half as f64) * domega))
        .collect();

    let fft = FftPlanner::new().plan_fft_inverse(big_n);
    let mut values = vec![CZERO; axis1.len() * n_cols];
    let mut buf = vec![CZERO; big_n];
    for col in 0..n_cols {
        for slot in buf.iter_mut() {
            *slot = CZERO;
        }
        for (k, row) in rows.iter().enumerate() {
            buf[k] = C64::new(row[col] * weights[k], 0.0);
        }
        fft.process(&mut buf);
        for (i1, &q) in kept.iter().enumerate() {
            let j = (q + shift) % big_n;
            values[i1 * n_cols + col] = buf[j] * p.delay_step;
        }
    }

    let mut metadata = BTreeMap::new();
    metadata.insert("delay_points".into(), n.to_string());
    metadata.insert("delay_step_ps".into(), format!("{:.6}", p.delay_step));
    metadata.insert("pad_factor".into(), p.pad_factor.to_string());
    metadata.insert(
        "apodization".into(),
        format!("{:?}", p.apodization).to_lowercase(),
    );
    SpectrumGrid {
        kind: kind.to_string(),
        axis1,
        axis3: axis3_cm.to_vec(),
        values,
        normalization: 1.0,
        metadata,
    }
}

/// Check that the signal has decayed by the end of the delay span: the
/// half-sided transform silently wraps any surviving tail into ringing.
/// `decay_tol` is the allowed ratio of the last trace's peak to the global
/// peak; 1.0 disables the check.
fn check_delay_decay(kind: &str, rows: &[Vec<f64>], decay_tol: f64) -> Result<()> {
    let peak = rows
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0_f64, |m, &v| m.max(v.abs()));
    let tail = rows
        .last()
        .map(|r| r.iter().fold(0.0_f64, |m, &v| m.max(v.abs())))
        .unwrap_or(0.0);
    if peak > 0.0 && tail > decay_tol * peak {
        return Err(CoreError::ValidationFailed(format!(
            "{kind}: delay span too short — signal at the last delay is still \
             {:.1}% of its peak (allowed {:.1}%); extend the scan or apodize",
            100.0 * tail / peak,
            100.0 * decay_tol
        )));
    }
    Ok(())
}

/// Transform a stack of traces over the excitation delay into a
/// single-quantum 2D grid (axis origin at the carrier).
pub fn ft_excitation(
    kind: &str,
    rows: &[Vec<f64>],
    axis3_cm: &[f64],
    p: &DelayTransformParams,
    decay_tol: f64,
) -> Result<SpectrumGrid> {
    check_delay_decay(kind, rows, decay_tol)?;
    Ok(delay_transform_grid(kind, rows, axis3_cm, p))
}

/// Transform a stack of traces over the waiting delay into a
/// two-quantum-coherence 2D grid (axis origin at twice the carrier).
pub fn ft_waiting(
    kind: &str,
    rows: &[Vec<f64>],
    axis3_cm: &[f64],
    p: &DelayTransformParams,
    decay_tol: f64,
) -> Result<SpectrumGrid> {
    check_delay_decay(kind, rows, decay_tol)?;
    Ok(delay_transform_grid(kind, rows, axis3_cm, p))
}
