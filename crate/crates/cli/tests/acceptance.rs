//! Acceptance gate for the simulation: ten headline physics and hygiene
//! checks, one test per criterion, each printing a single
//! `[acceptance] …: PASS/FAIL` line (run with `--nocapture` to see them all).
//!
//! Every numeric tolerance is pinned as a named constant inside the test
//! that uses it.  Expensive reference scans are computed once and shared.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;

use num_complex::Complex64 as C64;
use polspec_core::io::read_grid_text;
use polspec_core::oracle::{extract_component, run_phase_grid};
use polspec_core::spectra::SpectrumGrid;
use polspec_core::units::wavenumber_to_angular;
use polspec_core::{
    detection_transform, linear_cavity_response, polariton_frequencies, propagate,
    stationary_contributions, validate_against_mean_field, DerivedRates, EngineContext, Numerics,
    PathwayMask, PolaritonModes, PulseTrain, SystemParams,
};

/// Carrier / bare-transition frequency of the reference working point, cm⁻¹.
const OMEGA_L: f64 = 1983.0;
/// Full single-polariton linewidth at the reference point (two half-widths
/// of (κ/2 + γ_ge/2)/2 = 4.25 cm⁻¹).
const LINEWIDTH: f64 = 8.5;
/// Full two-quantum linewidth γ_ge + γ_ef at the reference point, cm⁻¹.
const LINEWIDTH_2Q: f64 = 15.0;

// ---------------------------------------------------------------------------
// harness helpers
// ---------------------------------------------------------------------------

/// Print the one-line verdict for a criterion, then enforce it.
fn report(criterion: &str, passed: bool, detail: &str) {
    println!(
        "[acceptance] {criterion}: {} — {detail}",
        if passed { "PASS" } else { "FAIL" }
    );
    assert!(passed, "{criterion}: {detail}");
}

fn polspec() -> Command {
    Command::new(env!("CARGO_BIN_EXE_polspec"))
}

/// Run the binary, demanding success; returns stdout.
fn run_ok(args: &[&str]) -> String {
    let out = polspec().args(args).output().expect("binary runs");
    assert!(
        out.status.code() == Some(0),
        "`polspec {}` exited {:?}\nstdout:\n{}\nstderr:\n{}",
        args.join(" "),
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr),
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// Fresh scratch directory under the system temp root.
fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir()
        .join("polspec-acceptance")
        .join(std::process::id().to_string())
        .join(name);
    std::fs::create_dir_all(&dir).expect("scratch dir");
    dir
}

fn manifest(dir: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(dir.join("manifest.json")).expect("manifest exists");
    serde_json::from_str(&text).expect("manifest is JSON")
}

/// Look up a named check in a run manifest: (passed, detail).
fn manifest_check(m: &serde_json::Value, name: &str) -> (bool, String) {
    let checks = m["checks"].as_array().expect("checks array");
    let c = checks
        .iter()
        .find(|c| c["name"] == name)
        .unwrap_or_else(|| panic!("manifest lists check {name}"));
    (
        c["passed"].as_bool().expect("passed flag"),
        c["detail"].as_str().unwrap_or_default().to_string(),
    )
}

/// Parse the first number following `word` in a check detail string.
fn number_after(detail: &str, word: &str) -> f64 {
    let mut tokens = detail.split_whitespace();
    while let Some(t) = tokens.next() {
        if t.trim_end_matches(':') == word {
            let value = tokens.next().expect("value follows the word");
            return value
                .trim_end_matches(',')
                .parse()
                .unwrap_or_else(|_| panic!("numeric value after {word:?} in {detail:?}"));
        }
    }
    panic!("no {word:?} in {detail:?}");
}

/// Parse a `header\nx, re, im` three-column CSV.
fn read_csv3(path: &Path) -> Vec<(f64, f64, f64)> {
    let text = std::fs::read_to_string(path).expect("csv exists");
    text.lines()
        .skip(1)
        .map(|line| {
            let mut it = line.split(',').map(|t| t.trim().parse::<f64>().unwrap());
            (it.next().unwrap(), it.next().unwrap(), it.next().unwrap())
        })
        .collect()
}

fn nearest(xs: &[f64], x: f64) -> usize {
    let mut best = 0;
    for (i, v) in xs.iter().enumerate() {
        if (v - x).abs() < (xs[best] - x).abs() {
            best = i;
        }
    }
    best
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// Normal modes of the reference working point.
fn modes() -> PolaritonModes {
    let rates = DerivedRates::derive(&SystemParams::default(), OMEGA_L);
    polariton_frequencies(&rates, OMEGA_L).expect("strong coupling")
}

/// A three-level configuration with equal ladder spacing, harmonic dipole
/// ratio, and equal one-quantum linewidths: every third-order pathway pair
/// cancels identically there.
fn harmonic_system() -> SystemParams {
    SystemParams {
        omega_fe: 1983.0,
        delta_el: 0.0,
        gamma_ef: 6.0,
        ..SystemParams::default()
    }
}

/// Step/stride settings that keep full 2D scans affordable in this suite
/// while staying far inside the integrator's stability budget.
const COARSE: [&str; 4] = ["--set", "scan.dt=2e-3", "--set", "scan.record_stride=10"];

/// Run a 2D scan through the binary and parse one emitted grid.
fn run_grid(subcommand: &str, dir_name: &str, extra: &[&str], grid_file: &str) -> SpectrumGrid {
    let dir = scratch(dir_name);
    let out = dir.to_str().unwrap().to_string();
    let mut args: Vec<&str> = vec![subcommand, "--out", &out];
    args.extend_from_slice(&COARSE);
    args.extend_from_slice(extra);
    run_ok(&args);
    read_grid_text(&dir.join(grid_file)).expect("grid parses")
}

/// Shared reference excitation scan (reference parameters, T = 8 ps,
/// delay span long enough for the delay-decay check): summed
/// rephasing + non-rephasing grid.
fn reference_oneq() -> &'static SpectrumGrid {
    static GRID: OnceLock<SpectrumGrid> = OnceLock::new();
    GRID.get_or_init(|| {
        run_grid(
            "scan-1q",
            "ref-oneq",
            &["--set", "scan.tau_max=6"],
            "oneq_sum.txt",
        )
    })
}

/// Shared reference waiting-time scan (reference parameters): the
/// double-quantum grid.
fn reference_twoqc() -> &'static SpectrumGrid {
    static GRID: OnceLock<SpectrumGrid> = OnceLock::new();
    GRID.get_or_init(|| {
        run_grid(
            "scan-2qc",
            "ref-twoqc",
            &["--set", "scan.t_wait_max=2.4"],
            "twoqc.txt",
        )
    })
}

fn peak_norm(values: &[C64]) -> f64 {
    values.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Indices of grid points whose |Re| is a (plateau-tolerant) local maximum
/// over the 8-neighborhood and at least `fraction` of the grid's peak.
fn strong_local_maxima(g: &SpectrumGrid, fraction: f64) -> Vec<(usize, usize)> {
    let (n1, n3) = (g.axis1.len(), g.axis3.len());
    let v = |i1: usize, i3: usize| g.values[i1 * n3 + i3].re.abs();
    let floor = fraction * g.peak_abs_real();
    let mut out = Vec::new();
    for i1 in 0..n1 {
        for i3 in 0..n3 {
            let c = v(i1, i3);
            if c < floor {
                continue;
            }
            let mut is_max = true;
            for d1 in -1i64..=1 {
                for d3 in -1i64..=1 {
                    if d1 == 0 && d3 == 0 {
                        continue;
                    }
                    let (j1, j3) = (i1 as i64 + d1, i3 as i64 + d3);
                    if j1 >= 0
                        && j3 >= 0
                        && (j1 as usize) < n1
                        && (j3 as usize) < n3
                        && v(j1 as usize, j3 as usize) > c
                    {
                        is_max = false;
                    }
                }
            }
            if is_max {
                out.push((i1, i3));
            }
        }
    }
    out
}

/// Real-part row of a grid at the axis1 value closest to `at`.
fn grid_row(g: &SpectrumGrid, at: f64) -> (f64, Vec<f64>) {
    let i1 = nearest(&g.axis1, at);
    let n3 = g.axis3.len();
    (
        g.axis1[i1],
        (0..n3).map(|i3| g.values[i1 * n3 + i3].re).collect(),
    )
}

// ---------------------------------------------------------------------------
// the ten criteria
// ---------------------------------------------------------------------------

/// With an equally spaced ladder, harmonic dipole ratio, and equal
/// linewidths, all third-order pathways cancel: every nonlinear field
/// component and every differential spectrum collapses to integration noise
/// relative to the anharmonic reference.
#[test]
fn c01_harmonic_ladder_cancels_every_nonlinear_output() {
    const RESIDUAL_RATIO: f64 = 1e-6;

    // Field components at a single delay point.
    let num = Numerics {
        dt: 5e-4,
        record_stride: 40,
        detection_window: 30.0,
    };
    let pulses = PulseTrain::default().with_delays(0.026, 0.5);
    let channel_peaks = |sys: &SystemParams| -> [f64; 3] {
        let ctx = EngineContext::new(sys, &pulses, PathwayMask::default());
        let out = propagate(&ctx, &num, false).expect("propagation succeeds");
        [0, 1, 2].map(|ch| peak_norm(&out.third_fields[ch]))
    };
    let reference = channel_peaks(&SystemParams::default());
    let harmonic = channel_peaks(&harmonic_system());
    let field_ratio = (0..3)
        .map(|ch| harmonic[ch] / reference[ch])
        .fold(0.0_f64, f64::max);

    // Differential spectra through the binary: 1D trace and both 2D maps.
    const HARMONIC_SET: [&str; 6] = [
        "--set",
        "system.omega_fe=1983",
        "--set",
        "system.delta_el=0",
        "--set",
        "system.gamma_ef=6",
    ];
    let pp_peak = |dir_name: &str, extra: &[&str]| -> f64 {
        let dir = scratch(dir_name);
        let out = dir.to_str().unwrap().to_string();
        let mut args: Vec<&str> = vec!["pump-probe", "--out", &out];
        args.extend_from_slice(extra);
        run_ok(&args);
        read_csv3(&dir.join("pump_probe.csv"))
            .iter()
            .map(|&(_, re, im)| re.hypot(im))
            .fold(0.0, f64::max)
    };
    let pp_ratio = pp_peak("c01-harm-pp", &HARMONIC_SET) / pp_peak("c01-ref-pp", &[]);

    // The zero-signal delay scans cannot satisfy a tail-decay fraction, so
    // that check is disabled for the harmonic runs only.
    let mut harm_1q: Vec<&str> = vec!["--set", "scan.tau_max=6", "--set", "scan.decay_tol=1.0"];
    harm_1q.extend_from_slice(&HARMONIC_SET);
    let oneq_ratio = peak_norm(&run_grid("scan-1q", "c01-harm-1q", &harm_1q, "oneq_sum.txt").values)
        / peak_norm(&reference_oneq().values);

    let mut harm_2q: Vec<&str> = vec![
        "--set",
        "scan.t_wait_max=2.4",
        "--set",
        "scan.decay_tol=1.0",
    ];
    harm_2q.extend_from_slice(&HARMONIC_SET);
    let twoqc_ratio = peak_norm(&run_grid("scan-2qc", "c01-harm-2q", &harm_2q, "twoqc.txt").values)
        / peak_norm(&reference_twoqc().values);

    let worst = field_ratio.max(pp_ratio).max(oneq_ratio).max(twoqc_ratio);
    report(
        "C1 harmonic-ladder cancellation",
        worst <= RESIDUAL_RATIO,
        &format!(
            "worst residual ratio {worst:.2e} (fields {field_ratio:.1e}, pump-probe {pp_ratio:.1e}, \
             excitation map {oneq_ratio:.1e}, two-quantum map {twoqc_ratio:.1e}; tolerance {RESIDUAL_RATIO:.0e})"
        ),
    );
}

/// The phase-tagged engine and the independent phase-cycled mean-field
/// propagation agree on every detectable component: linear fields to 1e-3,
/// third-order channels to 1e-2 (small-amplitude contamination allowed).
#[test]
fn c02_engine_matches_phase_cycled_mean_field() {
    const LINEAR_TOL: f64 = 1e-3;
    const THIRD_ORDER_TOL: f64 = 1e-2;

    let num = Numerics {
        dt: 5e-4,
        record_stride: 40,
        detection_window: 10.0,
    };
    let pulses = PulseTrain::default().with_delays(0.5, 0.5); // η = 1e-3 defaults
    let outcome = validate_against_mean_field(&SystemParams::default(), &pulses, &num, 5)
        .expect("comparison runs");

    let mut worst_linear = 0.0_f64;
    let mut worst_third = 0.0_f64;
    for c in &outcome.comparisons {
        let order: i32 = c.signature.iter().map(|v| i32::from(v.abs())).sum();
        if order > 1 {
            worst_third = worst_third.max(c.relative_error);
        } else {
            worst_linear = worst_linear.max(c.relative_error);
        }
    }
    let passed =
        outcome.passed && worst_linear <= LINEAR_TOL && worst_third <= THIRD_ORDER_TOL;
    report(
        "C2 dual-route field equivalence",
        passed,
        &format!(
            "{} components over a 5^3 phase grid: linear worst {worst_linear:.2e} (tol {LINEAR_TOL:.0e}), \
             third-order worst {worst_third:.2e} (tol {THIRD_ORDER_TOL:.0e})",
            outcome.comparisons.len()
        ),
    );
}

/// Probe-only transmission peaks on the two polaritons within one frequency
/// step, with the expected normal-mode splitting, and the propagated linear
/// field matches its closed form over the detection band.
///
/// Peak locations are judged at one-grid-step resolution on a grid whose
/// step (≈ 1.1 cm⁻¹) dominates the small (≈ 0.5 cm⁻¹) displacement that
/// interference between the overlapping polariton lines and the molecular
/// zero imposes on the true transmission maxima; the exact curve itself is
/// pinned separately by the closed-form comparison.  The Rabi splitting is
/// the eigenvalue splitting the run derives and reports.
#[test]
fn c03_linear_transmission_sits_on_the_polaritons() {
    const SPLITTING_CM: f64 = 36.9;
    const SPLITTING_TOL: f64 = 0.5;
    const CLOSED_FORM_TOL: f64 = 1e-4;
    const BAND_CM: f64 = 60.0;

    let modes = modes();

    // End-to-end transmission curve at one-wavenumber sampling.
    let dir = scratch("c03-linear");
    run_ok(&[
        "linear",
        "--out",
        dir.to_str().unwrap(),
        "--set",
        "scan.detection_window=30",
        "--set",
        "scan.pad_factor=1",
    ]);
    let rows = read_csv3(&dir.join("linear.csv"));
    let power: Vec<f64> = rows.iter().map(|&(_, re, im)| re * re + im * im).collect();
    let nu: Vec<f64> = rows.iter().map(|&(x, _, _)| x).collect();
    let step = nu[1] - nu[0];
    let mut maxima: Vec<(f64, f64)> = (1..nu.len() - 1)
        .filter(|&i| power[i] > power[i - 1] && power[i] > power[i + 1])
        .map(|i| (power[i], nu[i]))
        .collect();
    maxima.sort_by(|a, b| b.0.total_cmp(&a.0));
    assert!(maxima.len() >= 2, "two transmission peaks expected");
    let mut top: [f64; 2] = [maxima[0].1, maxima[1].1];
    top.sort_by(f64::total_cmp);
    let (lp_err, up_err) = (
        (top[0] - modes.lower_cm).abs(),
        (top[1] - modes.upper_cm).abs(),
    );
    let reported: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.join("polaritons.json")).expect("polariton report"),
    )
    .expect("polariton report is JSON");
    let splitting = reported["splitting_cm"].as_f64().expect("splitting_cm");

    // Propagated linear field vs. its closed form.
    let system = SystemParams::default();
    let ctx = EngineContext::new(&system, &PulseTrain::default(), PathwayMask::default())
        .with_drive_scale([0.0, 0.0, 1.0]);
    let num = Numerics {
        dt: 5e-4,
        record_stride: 40,
        detection_window: 30.0,
    };
    let out = propagate(&ctx, &num, false).expect("propagation succeeds");
    let spec = detection_transform(&out.detection_times, out.probe_field(), 4);
    let rates = DerivedRates::derive(&system, OMEGA_L);
    let band = wavenumber_to_angular(BAND_CM);
    let (mut peak, mut worst) = (0.0_f64, 0.0_f64);
    for (i, &w) in spec.omega.iter().enumerate() {
        if w.abs() > band {
            continue;
        }
        let expect = linear_cavity_response(&rates, 0.1, w);
        peak = peak.max(expect.norm());
        worst = worst.max((spec.values[i] - expect).norm());
    }
    let closed_form_err = worst / peak;

    let passed = lp_err <= step
        && up_err <= step
        && (splitting - SPLITTING_CM).abs() <= SPLITTING_TOL
        && closed_form_err <= CLOSED_FORM_TOL;
    report(
        "C3 linear response",
        passed,
        &format!(
            "peaks off by {lp_err:.2}/{up_err:.2} cm^-1 (grid step {step:.2}), derived splitting \
             {splitting:.2} cm^-1 (want {SPLITTING_CM} ± {SPLITTING_TOL}), closed-form deviation \
             {closed_form_err:.2e} (tol {CLOSED_FORM_TOL:.0e})"
        ),
    );
}

/// Long-waiting-time excitation map: the global minimum of the summed
/// rephasing + non-rephasing real part sits on the (lower, lower) polariton
/// coordinate — delay rows are real, so the minimum is a mirror-symmetric
/// tie and one member must land there — and the upper-polariton row changes
/// sign along detection (derivative lineshape).
#[test]
fn c04_excitation_map_structure_at_long_waiting_time() {
    /// Relative slack for collecting exact mirror ties of the minimum.
    const TIE_REL: f64 = 1e-9;

    let modes = modes();
    let g = reference_oneq();
    let n3 = g.axis3.len();
    let re: Vec<f64> = g.values.iter().map(|v| v.re).collect();
    let vmin = re.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut best_offset = f64::INFINITY;
    for (idx, &v) in re.iter().enumerate() {
        if (v - vmin).abs() <= TIE_REL * vmin.abs() {
            let (a1, a3) = (g.axis1[idx / n3], g.axis3[idx % n3]);
            best_offset = best_offset.min(
                (a1 - modes.lower_cm)
                    .abs()
                    .max((a3 - modes.lower_cm).abs()),
            );
        }
    }
    let min_on_lower = best_offset <= LINEWIDTH;

    let (row_at, row) = grid_row(g, modes.upper_cm);
    let window: Vec<f64> = g
        .axis3
        .iter()
        .zip(&row)
        .filter(|(&w, _)| (w - modes.upper_cm).abs() <= LINEWIDTH)
        .map(|(_, &v)| v)
        .collect();
    let sign_change = window.iter().any(|&v| v > 0.0) && window.iter().any(|&v| v < 0.0);

    report(
        "C4 excitation-map structure at T = 8 ps",
        min_on_lower && sign_change,
        &format!(
            "global minimum within {best_offset:.2} cm^-1 of (LP, LP) (allowed {LINEWIDTH}); \
             detection sign change within {LINEWIDTH} cm^-1 of UP on the row at {row_at:.1} cm^-1: {sign_change}"
        ),
    );
}

/// Two-quantum map topology for a softened ladder (Δ = −10 cm⁻¹): strong
/// |Re| maxima on the weighted (ω₂, ω₃) intersections, all three
/// double-polariton lines present on ω₂, and the derivative features trade
/// places between Δ = −10 and Δ = +10.
#[test]
fn c05_two_quantum_topology_and_ladder_sign_flip() {
    const PEAK_FRACTION: f64 = 0.20;
    const ANTICORRELATION_MAX: f64 = -0.3;

    let modes = modes();
    let (lp, up) = (modes.lower_cm, modes.upper_cm);
    let lines = [2.0 * lp, lp + up, 2.0 * up];

    let soft = run_grid(
        "scan-2qc",
        "c05-soft",
        &[
            "--set",
            "system.omega_fe=1973",
            "--set",
            "scan.t_wait_max=2.4",
        ],
        "twoqc.txt",
    );
    let stiff = run_grid(
        "scan-2qc",
        "c05-stiff",
        &[
            "--set",
            "system.omega_fe=1993",
            "--set",
            "scan.t_wait_max=2.4",
        ],
        "twoqc.txt",
    );

    // (a) every weighted intersection hosts a strong local maximum.
    let maxima = strong_local_maxima(&soft, PEAK_FRACTION);
    let targets = [
        (2.0 * lp, lp),
        (lp + up, lp),
        (lp + up, up),
        (2.0 * up, up),
    ];
    let mut worst_d2 = 0.0_f64;
    let mut worst_d3 = 0.0_f64;
    let intersections_ok = targets.iter().all(|&(w2, w3)| {
        let hit = maxima
            .iter()
            .map(|&(i1, i3)| {
                (
                    (soft.axis1[i1] - w2).abs(),
                    (soft.axis3[i3] - w3).abs(),
                )
            })
            .filter(|&(d2, d3)| d2 <= LINEWIDTH_2Q && d3 <= LINEWIDTH)
            .min_by(|a, b| (a.0 + a.1).total_cmp(&(b.0 + b.1)));
        if let Some((d2, d3)) = hit {
            worst_d2 = worst_d2.max(d2);
            worst_d3 = worst_d3.max(d3);
            true
        } else {
            false
        }
    });

    // (b) the ω₂ profile carries all three double-polariton lines.
    let n3 = soft.axis3.len();
    let profile: Vec<f64> = (0..soft.axis1.len())
        .map(|i1| {
            (0..n3)
                .map(|i3| soft.values[i1 * n3 + i3].re.abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let profile_peak = profile.iter().cloned().fold(0.0, f64::max);
    let lines_ok = lines.iter().all(|&w2| {
        (1..profile.len() - 1).any(|i| {
            profile[i] >= profile[i - 1]
                && profile[i] >= profile[i + 1]
                && profile[i] >= PEAK_FRACTION * profile_peak
                && (soft.axis1[i] - w2).abs() <= LINEWIDTH_2Q
        })
    });

    // (c) softened vs. stiffened ladder: the shared-line strip
    // anticorrelates and its dominant peak moves from UP to LP.
    let (_, strip_soft) = grid_row(&soft, lp + up);
    let (_, strip_stiff) = grid_row(&stiff, lp + up);
    let corr = pearson(&strip_soft, &strip_stiff);
    let argmax_abs = |axis: &[f64], row: &[f64]| -> f64 {
        let mut best = 0;
        for (i, v) in row.iter().enumerate() {
            if v.abs() > row[best].abs() {
                best = i;
            }
        }
        axis[best]
    };
    let soft_peak_at = argmax_abs(&soft.axis3, &strip_soft);
    let stiff_peak_at = argmax_abs(&stiff.axis3, &strip_stiff);
    let flip_ok = corr < ANTICORRELATION_MAX
        && (soft_peak_at - up).abs() <= LINEWIDTH
        && (stiff_peak_at - lp).abs() <= LINEWIDTH;

    report(
        "C5 two-quantum peak topology",
        intersections_ok && lines_ok && flip_ok,
        &format!(
            "intersections hit within ({worst_d2:.1}, {worst_d3:.1}) cm^-1 (allowed {LINEWIDTH_2Q}/{LINEWIDTH}); \
             all three two-quantum lines ≥ {PEAK_FRACTION:.0e} of peak: {lines_ok}; strip correlation {corr:.2} \
             with dominant peak at {soft_peak_at:.1} (soft) vs {stiff_peak_at:.1} (stiff) cm^-1"
        ),
    );
}

/// Pure dipole anharmonicity at equal ladder spacing: the signal vanishes
/// at δ = 0, and δ = ±0.2 give mirror-image derivative features with
/// reduced transmission on the shared line for δ > 0 and enhanced for δ < 0.
#[test]
fn c06_dipole_anharmonicity_null_and_sign() {
    const NULL_RATIO: f64 = 1e-6;
    const ANTICORRELATION_MAX: f64 = -0.9;
    const DOMINANCE: f64 = 2.0;

    let modes = modes();
    let shared_line = modes.lower_cm + modes.upper_cm;
    const EQUAL_LADDER: [&str; 6] = [
        "--set",
        "system.omega_fe=1983",
        "--set",
        "system.gamma_ef=6",
        "--set",
        "scan.t_wait_max=2.4",
    ];
    let run_delta = |name: &str, extra: &[&str]| -> SpectrumGrid {
        let mut args: Vec<&str> = EQUAL_LADDER.to_vec();
        args.extend_from_slice(extra);
        run_grid("scan-2qc", name, &args, "twoqc.txt")
    };
    let plus = run_delta("c06-plus", &["--set", "system.delta_el=0.2"]);
    let minus = run_delta("c06-minus", &["--set", "system.delta_el=-0.2"]);
    let null = run_delta(
        "c06-null",
        &[
            "--set",
            "system.delta_el=0",
            "--set",
            "scan.decay_tol=1.0",
        ],
    );

    let null_ratio = peak_norm(&null.values) / peak_norm(&plus.values);
    let (_, strip_plus) = grid_row(&plus, shared_line);
    let (_, strip_minus) = grid_row(&minus, shared_line);
    let corr = pearson(&strip_plus, &strip_minus);

    let signed_peaks = |row: &[f64]| -> (f64, f64) {
        let pos = row.iter().cloned().filter(|v| *v > 0.0).fold(0.0, f64::max);
        let neg = row
            .iter()
            .cloned()
            .filter(|v| *v < 0.0)
            .fold(0.0, |a: f64, v| a.max(-v));
        (pos, neg)
    };
    let (plus_pos, plus_neg) = signed_peaks(&strip_plus);
    let (minus_pos, minus_neg) = signed_peaks(&strip_minus);
    let signs_ok = plus_neg > DOMINANCE * plus_pos && minus_pos > DOMINANCE * minus_neg;

    report(
        "C6 dipole-anharmonicity sweep",
        null_ratio <= NULL_RATIO && corr < ANTICORRELATION_MAX && signs_ok,
        &format!(
            "null ratio {null_ratio:.1e} (tol {NULL_RATIO:.0e}); strip correlation {corr:.3} \
             (< {ANTICORRELATION_MAX}); shared-line extrema −{plus_neg:.2e}/+{plus_pos:.2e} at δ=+0.2 \
             and +{minus_pos:.2e}/−{minus_neg:.2e} at δ=−0.2 (dominance ×{DOMINANCE})"
        ),
    );
}

/// Excitation-induced dephasing: isolated (two-level, contraction off) it
/// bleaches both polaritons at zero waiting time; in the full model at
/// T = 8 ps the upper-polariton derivative structure survives.
#[test]
fn c07_dephasing_bleach_and_retained_contraction() {
    let modes = modes();

    let bleach_dir = scratch("c07-bleach");
    run_ok(&[
        "pump-probe",
        "--out",
        bleach_dir.to_str().unwrap(),
        "--set",
        "system.beta_eid=10",
        "--set",
        "scan.t_wait=0",
        "--set",
        "mask.gsb_se=false",
        "--set",
        "mask.disable_ef_coupling=true",
    ]);
    let rows = read_csv3(&bleach_dir.join("pump_probe.csv"));
    let nu: Vec<f64> = rows.iter().map(|&(x, _, _)| x).collect();
    let re: Vec<f64> = rows.iter().map(|&(_, re, _)| re).collect();
    let at_lower = re[nearest(&nu, modes.lower_cm)];
    let at_upper = re[nearest(&nu, modes.upper_cm)];
    let bleach_ok = at_lower < 0.0 && at_upper < 0.0;

    let full_dir = scratch("c07-full");
    run_ok(&[
        "pump-probe",
        "--out",
        full_dir.to_str().unwrap(),
        "--set",
        "system.beta_eid=10",
    ]);
    let rows = read_csv3(&full_dir.join("pump_probe.csv"));
    let window: Vec<f64> = rows
        .iter()
        .filter(|&&(x, _, _)| (x - modes.upper_cm).abs() <= LINEWIDTH)
        .map(|&(_, re, _)| re)
        .collect();
    let derivative_ok =
        window.iter().any(|&v| v > 0.0) && window.iter().any(|&v| v < 0.0);

    report(
        "C7 dephasing-induced bleach",
        bleach_ok && derivative_ok,
        &format!(
            "isolated bleach at T = 0: ΔT(LP) = {at_lower:.2e}, ΔT(UP) = {at_upper:.2e} (both < 0); \
             full model at T = 8 ps keeps a sign change within {LINEWIDTH} cm^-1 of UP: {derivative_ok}"
        ),
    );
}

/// Bleach size per reference ensemble falls monotonically both with density
/// (splitting grows, pathways detune) and with cavity length (weaker,
/// narrower drive), once each run is normalized by its own linear peak and
/// relative molecule number.
#[test]
fn c08_bleach_shrinks_with_density_and_cavity_length() {
    /// Strictness margin: each successive value must drop by at least 5%.
    const DECREASE_MARGIN: f64 = 0.95;

    let config = scratch("c08").join("bleach.toml");
    std::fs::write(
        &config,
        "[system]\nbeta_eid = 10.0\n\n[scan]\nscan_kind = \"pump_probe\"\nt_wait = 0.0\n\n\
         [mask]\ngsb_se = false\ndisable_ef_coupling = true\n",
    )
    .expect("config written");

    let normalized_series = |key: &str, dir_name: &str| -> Vec<f64> {
        let dir = scratch(dir_name);
        run_ok(&[
            "sweep",
            "--key",
            key,
            "--values",
            "0.5,1,2",
            "--config",
            config.to_str().unwrap(),
            "--out",
            dir.to_str().unwrap(),
        ]);
        let text = std::fs::read_to_string(dir.join("sweep_summary.csv")).expect("summary");
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().expect("header").split(',').map(str::trim).collect();
        let col = header
            .iter()
            .position(|h| *h == "normalized_peak")
            .expect("normalized_peak column");
        lines
            .map(|l| l.split(',').nth(col).unwrap().trim().parse().unwrap())
            .collect()
    };

    let density = normalized_series("system.conc_scale", "c08-density");
    let length = normalized_series("system.kappa_scale", "c08-length");
    let decreasing = |v: &[f64]| v.windows(2).all(|w| w[1] < DECREASE_MARGIN * w[0]);
    let passed = density.len() == 3
        && length.len() == 3
        && decreasing(&density)
        && decreasing(&length);
    let fmt = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x:.3e}"))
            .collect::<Vec<_>>()
            .join(", ")
    };
    report(
        "C8 bleach trends",
        passed,
        &format!(
            "normalized bleach over density ×{{0.5,1,2}}: [{}]; over cavity length \
             ×{{0.5,1,2}}: [{}] (each step must fall by ≥ {:.0}%)",
            fmt(&density),
            fmt(&length),
            (1.0 - DECREASE_MARGIN) * 100.0
        ),
    );
}

/// Stationary-population limit: the numerically propagated isolated
/// pathways match their closed-form resolvent curves within 5%, and the
/// closed-form pathway pair cancels in the harmonic configuration.
#[test]
fn c09_stationary_decomposition_matches_closed_form() {
    const MATCH_TOL: f64 = 0.05;
    const HARMONIC_RATIO: f64 = 1e-6;

    let dir = scratch("c09-stationary");
    run_ok(&["stationary", "--out", dir.to_str().unwrap()]);
    let m = manifest(&dir);
    let (gsb_ok, gsb_detail) = manifest_check(&m, "stationary_match_gsb_se");
    let (esa_ok, esa_detail) = manifest_check(&m, "stationary_match_esa");
    let gsb_dev = number_after(&gsb_detail, "deviation");
    let esa_dev = number_after(&esa_detail, "deviation");
    let match_ok = gsb_ok && esa_ok && gsb_dev <= MATCH_TOL && esa_dev <= MATCH_TOL;

    // Closed-form harmonic cancellation of the pathway pair and of the
    // two-quantum term, referenced against the anharmonic curves.
    let omega: Vec<f64> = (-600..=600)
        .map(|k| wavenumber_to_angular(k as f64 * 0.1))
        .collect();
    let rho_ee = 1e-3;
    let harm = stationary_contributions(
        &DerivedRates::derive(&harmonic_system(), OMEGA_L),
        0.1,
        rho_ee,
        &omega,
    );
    let reference = stationary_contributions(
        &DerivedRates::derive(&SystemParams::default(), OMEGA_L),
        0.1,
        rho_ee,
        &omega,
    );
    let pair_sum: Vec<C64> = harm
        .gsb_se
        .iter()
        .zip(&harm.esa)
        .map(|(a, b)| a + b)
        .collect();
    let pair_ratio = peak_norm(&pair_sum) / peak_norm(&harm.gsb_se);
    let dqc_ratio = peak_norm(&harm.dqc) / peak_norm(&reference.dqc);
    let harmonic_ok = pair_ratio <= HARMONIC_RATIO && dqc_ratio <= HARMONIC_RATIO;

    report(
        "C9 stationary decomposition",
        match_ok && harmonic_ok,
        &format!(
            "pathway deviations {gsb_dev:.2e}/{esa_dev:.2e} (tol {MATCH_TOL}); harmonic pair-sum \
             ratio {pair_ratio:.1e}, two-quantum term ratio {dqc_ratio:.1e} (tol {HARMONIC_RATIO:.0e})"
        ),
    );
}

/// Numerical hygiene: step-halving leaves all reported spectra unchanged to
/// 1e-5, the phase transform obeys its conjugation symmetry to round-off,
/// and grid outputs are byte-identical across worker counts.
#[test]
fn c10_numerical_hygiene() {
    const DRIFT_TOL: f64 = 1e-5;
    const SYMMETRY_TOL: f64 = 1e-12;

    // (a) dt-halving drift through the binary's built-in check.
    let dir = scratch("c10-convergence");
    run_ok(&[
        "pump-probe",
        "--out",
        dir.to_str().unwrap(),
        "--convergence-check",
    ]);
    let (conv_ok, conv_detail) = manifest_check(&manifest(&dir), "convergence_dt_halving");
    let drift = number_after(&conv_detail, "drift");
    let drift_ok = conv_ok && drift <= DRIFT_TOL;

    // (b) conjugation symmetry of the phase transform on a real phase grid:
    // extracting −v from the conjugated runs equals the conjugate of +v.
    let num = Numerics {
        dt: 1e-3,
        record_stride: 20,
        detection_window: 2.0,
    };
    let pulses = PulseTrain::default().with_delays(0.05, 0.1);
    let set = run_phase_grid(&SystemParams::default(), &pulses, &num, 3).expect("phase grid");
    let mut conj_set = set.clone();
    conj_set.alpha_series = set
        .alpha_series
        .iter()
        .map(|s| s.iter().map(|z| z.conj()).collect())
        .collect();
    let mut worst_symmetry = 0.0_f64;
    let cases: [([i8; 3], [u8; 3]); 5] = [
        ([1, 0, 0], [1, 0, 0]),
        ([0, 0, 1], [0, 0, 1]),
        ([1, 1, -1], [1, 1, 1]),
        ([1, -1, 1], [1, 1, 1]),
        ([-1, 1, 1], [1, 1, 1]),
    ];
    for (sig, order) in cases {
        let direct = extract_component(&set, sig, order);
        let mirrored = extract_component(&conj_set, sig.map(|v| -v), order);
        let scale = peak_norm(&direct).max(f64::MIN_POSITIVE);
        let dev = direct
            .iter()
            .zip(&mirrored)
            .map(|(a, b)| (a.conj() - b).norm())
            .fold(0.0, f64::max);
        worst_symmetry = worst_symmetry.max(dev / scale);
    }
    let symmetry_ok = worst_symmetry <= SYMMETRY_TOL;

    // (c) byte-identical grids across worker counts.
    let grid_bytes = |dir_name: &str, threads: &str| -> BTreeMap<String, Vec<u8>> {
        let dir = scratch(dir_name);
        let out = dir.to_str().unwrap().to_string();
        let mut args: Vec<&str> = vec!["scan-1q", "--out", &out, "--threads", threads];
        args.extend_from_slice(&COARSE);
        args.extend_from_slice(&[
            "--set",
            "scan.tau_max=0.12",
            "--set",
            "scan.decay_tol=1.0",
        ]);
        run_ok(&args);
        ["oneq_nr.txt", "oneq_r.txt", "oneq_sum.txt"]
            .iter()
            .map(|f| (f.to_string(), std::fs::read(dir.join(f)).expect("grid file")))
            .collect()
    };
    let single = grid_bytes("c10-threads-1", "1");
    let double = grid_bytes("c10-threads-2", "2");
    let determinism_ok = single == double;

    report(
        "C10 numerical hygiene",
        drift_ok && symmetry_ok && determinism_ok,
        &format!(
            "step-halving drift {drift:.2e} (tol {DRIFT_TOL:.0e}); phase-transform conjugation \
             residual {worst_symmetry:.1e} (tol {SYMMETRY_TOL:.0e}); grids byte-identical across \
             1 vs 2 workers: {determinism_ok}"
        ),
    );
}
