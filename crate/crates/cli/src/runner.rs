//! Scan orchestration: load a configuration, run the requested scan, and
//! write every output plus a manifest into the output directory.
//!
//! All propagation and assembly lives in `polspec_core`; this module owns
//! file layout, parallel dispatch over delay grids, built-in checks
//! (convergence, reference comparisons, axis coverage), and reporting.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use polspec_core::engine::{GridPlan, START_PAD_WIDTHS};
use polspec_core::io::{write_csv3, write_grid_binary, write_grid_text, write_trajectory};
use polspec_core::spectra::{detection_transform, linear_cavity_response, DetectionSpectrum};
use polspec_core::units::{pulse_spectrum, wavenumber_to_angular};
use polspec_core::{
    analyze_detection, ft_excitation, ft_waiting, polariton_frequencies, propagate,
    stationary_contributions, validate_against_mean_field, Config, CoreError, DelayTransformParams,
    DerivedRates, DetectionAnalysis, DetectionParams, EngineContext, Numerics, PathwayMask,
    PolaritonModes, PropagationOutput, PulseTrain, Result, ScanKind, SpectrumGrid,
};

use crate::{heatmap, load_cli_config, Command, SweepArgs, CONVERGENCE_TOL, STATIONARY_MATCH_TOL};

/// Fixed column headers of every 1D spectrum file.
pub const CSV_HEADERS: [&str; 3] = ["omega_cm1", "dT_real", "dT_imag"];

/// Channel indices in detection analyses (double-quantum, non-rephasing,
/// rephasing).
const CH_DQC: usize = 0;
const CH_NR: usize = 1;
const CH_R: usize = 2;

/// Headline numbers of a finished run, reused by `sweep` summaries.
#[derive(Debug, Clone)]
pub struct RunStats {
    /// Scan that produced the numbers.
    pub kind: ScanKind,
    /// Peak magnitude: |Re ΔT| for differential scans, peak power
    /// transmission for `linear`, worst relative error for `oracle_validate`.
    pub peak_value: f64,
    /// First-axis position of the peak, cm⁻¹ (2D scans only).
    pub peak_axis1_cm: Option<f64>,
    /// Detection-axis position of the peak, cm⁻¹ (when meaningful).
    pub peak_axis3_cm: Option<f64>,
    /// Peak linear power transmission of the probe.
    pub peak_linear_transmission: f64,
    /// Molecule number relative to the reference configuration (N/N₀,
    /// density × mode-volume bookkeeping) for differential scans; 1 for
    /// intensive transfer-function scans.
    pub molecule_number: f64,
}

impl RunStats {
    /// Peak differential signal per linear-transmission peak and per
    /// relative molecule number: the bleach-size metric used by parameter
    /// sweeps.  Differential signals are extensive in the number of
    /// molecules sharing the bright mode, so comparisons across density or
    /// cavity length refer them to the reference ensemble; the linear
    /// transmission peak is intensive and needs no such referral.
    pub fn normalized_peak(&self) -> f64 {
        if self.peak_linear_transmission > 0.0 && self.molecule_number > 0.0 {
            self.peak_value / (self.peak_linear_transmission * self.molecule_number)
        } else {
            f64::NAN
        }
    }
}

/// Top-level dispatch for a parsed command line.
pub fn run(cmd: &Command) -> Result<()> {
    let common = cmd.common();
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(CoreError::ConfigInvalid(
                "--threads must be at least 1".into(),
            ));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CoreError::ConfigInvalid(format!("cannot size the thread pool: {e}")))?;
    }
    match cmd {
        Command::Sweep(args) => run_sweep(args),
        _ => {
            let cfg = load_cli_config(common, cmd.scan_kind())?;
            run_scan(&cfg, common.heatmap, common.convergence_check).map(|_| ())
        }
    }
}

/// Run one configured scan into its output directory and return its headline
/// numbers.  The manifest is written even when a built-in check fails; the
/// failure is then returned so the process exits with the check-failure code.
pub fn run_scan(cfg: &Config, heatmap: bool, convergence: bool) -> Result<RunStats> {
    let mut rc = RunContext::new(cfg, heatmap, convergence)?;
    let stats = match cfg.scan.scan_kind {
        ScanKind::Linear => linear(&mut rc),
        ScanKind::PumpProbe => pump_probe(&mut rc),
        ScanKind::Scan1q => scan_1q(&mut rc),
        ScanKind::Scan2qc => scan_2qc(&mut rc),
        ScanKind::Stationary => stationary(&mut rc),
        ScanKind::OracleValidate => oracle_validate(&mut rc),
    }?;
    rc.finish()?;
    Ok(stats)
}

// ---------------------------------------------------------------------------
// run context: output directory, manifest bookkeeping, shared helpers
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
struct FileRecord {
    name: String,
    kind: String,
    bytes: u64,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct CheckRecord {
    name: String,
    passed: bool,
    detail: String,
}

#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    tool: &'a str,
    version: &'a str,
    scan: &'a str,
    config_sha256: &'a str,
    threads: usize,
    trajectories: usize,
    integration_steps: usize,
    wall_clock_seconds: f64,
    checks: &'a [CheckRecord],
    files: &'a [FileRecord],
    passed: bool,
}

struct RunContext {
    cfg: Config,
    out_dir: PathBuf,
    heatmap: bool,
    convergence_check: bool,
    files: Vec<FileRecord>,
    checks: Vec<CheckRecord>,
    config_sha256: String,
    trajectories: usize,
    integration_steps: usize,
    started: Instant,
}

fn io_error(path: &Path, source: std::io::Error) -> CoreError {
    CoreError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

impl RunContext {
    fn new(cfg: &Config, heatmap: bool, convergence_check: bool) -> Result<Self> {
        let out_dir = PathBuf::from(&cfg.scan.out_dir);
        fs::create_dir_all(&out_dir).map_err(|e| io_error(&out_dir, e))?;
        let echo = cfg.to_toml_string();
        let config_sha256 = sha256_hex(echo.as_bytes());
        let mut rc = Self {
            cfg: cfg.clone(),
            out_dir,
            heatmap,
            convergence_check,
            files: Vec::new(),
            checks: Vec::new(),
            config_sha256,
            trajectories: 0,
            integration_steps: 0,
            started: Instant::now(),
        };
        let path = rc.out_dir.join("resolved_config.toml");
        fs::write(&path, echo.as_bytes()).map_err(|e| io_error(&path, e))?;
        rc.record(&path, "config_echo")?;
        Ok(rc)
    }

    /// Hash and list an already-written file.
    fn record(&mut self, path: &Path, kind: &str) -> Result<()> {
        let bytes = fs::read(path).map_err(|e| io_error(path, e))?;
        let name = path
            .strip_prefix(&self.out_dir)
            .unwrap_or(path)
            .display()
            .to_string();
        self.files.push(FileRecord {
            name,
            kind: kind.to_string(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    fn write_bytes(&mut self, name: &str, kind: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.out_dir.join(name);
        fs::write(&path, bytes).map_err(|e| io_error(&path, e))?;
        self.record(&path, kind)?;
        Ok(path)
    }

    fn write_spectrum_csv(&mut self, name: &str, axis: &[f64], values: &[C64]) -> Result<()> {
        let path = self.out_dir.join(name);
        write_csv3(&path, CSV_HEADERS, axis, values)?;
        self.record(&path, "spectrum_csv")
    }

    /// Record a check outcome; failures are surfaced again by `finish`.
    fn check(&mut self, name: &str, passed: bool, detail: String) {
        println!(
            "check {name}: {} ({detail})",
            if passed { "ok" } else { "FAIL" }
        );
        self.checks.push(CheckRecord {
            name: name.to_string(),
            passed,
            detail,
        });
    }

    fn count_trajectories(&mut self, n: usize, steps_each: usize) {
        self.trajectories += n;
        self.integration_steps += n * steps_each;
    }

    /// Polariton modes of the configured system, written to
    /// `polaritons.json`.
    fn write_polaritons(&mut self) -> Result<PolaritonModes> {
        let rates = DerivedRates::derive(&self.cfg.system, self.cfg.pulses.omega_l);
        let modes = polariton_frequencies(&rates, self.cfg.pulses.omega_l)?;
        let json = serde_json::json!({
            "lower_cm": modes.lower_cm,
            "upper_cm": modes.upper_cm,
            "lower_halfwidth_cm": modes.lower_halfwidth_cm,
            "upper_halfwidth_cm": modes.upper_halfwidth_cm,
            "splitting_cm": modes.splitting_cm,
        });
        let text = serde_json::to_string_pretty(&json).expect("plain object");
        self.write_bytes("polaritons.json", "polariton_modes", text.as_bytes())?;
        Ok(modes)
    }

    /// Raw grid, normalized copy, and the optional binary and heatmap views.
    fn write_grid_set(&mut self, grid: &SpectrumGrid, modes: &PolaritonModes) -> Result<()> {
        let stem = grid.kind.clone();
        let path = self.out_dir.join(format!("{stem}.txt"));
        write_grid_text(&path, grid)?;
        self.record(&path, "grid_text")?;

        let norm = grid.normalized();
        let path = self.out_dir.join(format!("{stem}_norm.txt"));
        write_grid_text(&path, &norm)?;
        self.record(&path, "grid_text_normalized")?;

        if self.cfg.scan.emit_binary {
            let path = self.out_dir.join(format!("{stem}.bin"));
            write_grid_binary(&path, grid)?;
            self.record(&path, "grid_binary")?;
        }
        if self.heatmap {
            let bmp = heatmap::render_bmp(grid, Some(modes))?;
            self.write_bytes(&format!("{stem}.bmp"), "heatmap", &bmp)?;
        }
        Ok(())
    }

    fn maybe_trajectory(&mut self, out: &PropagationOutput) -> Result<()> {
        if let Some(traj) = &out.full_trajectory {
            let path = self.out_dir.join("trajectory.txt");
            write_trajectory(&path, traj)?;
            self.record(&path, "trajectory")?;
        }
        Ok(())
    }

    /// Step-halving drift of a representative propagation, recorded as a
    /// check against [`CONVERGENCE_TOL`].
    fn convergence_check(
        &mut self,
        pulses: &PulseTrain,
        mask: PathwayMask,
        drive: [f64; 3],
    ) -> Result<()> {
        if !self.convergence_check {
            return Ok(());
        }
        let cfg = self.cfg.clone();
        let ctx = EngineContext::new(&cfg.system, pulses, mask).with_drive_scale(drive);
        let coarse_num = numerics(&cfg);
        let mut fine_num = coarse_num;
        fine_num.dt /= 2.0;
        fine_num.record_stride *= 2; // identical detection sampling
        let params = detection_params(&cfg);
        let coarse = analyze_detection(&propagate(&ctx, &coarse_num, false)?, &ctx.rates, &params);
        let fine = analyze_detection(&propagate(&ctx, &fine_num, false)?, &ctx.rates, &params);
        self.count_trajectories(1, plan_steps(&cfg, &coarse_num, pulses));
        self.count_trajectories(1, plan_steps(&cfg, &fine_num, pulses));
        let drift = spectral_drift(&coarse, &fine);
        self.check(
            "convergence_dt_halving",
            drift <= CONVERGENCE_TOL,
            format!("relative drift {drift:.3e}, tolerance {CONVERGENCE_TOL:.0e}"),
        );
        Ok(())
    }

    /// Write the manifest; a failed check then aborts with the check-failure
    /// exit path so the run directory still documents what happened.
    fn finish(self) -> Result<()> {
        let passed = self.checks.iter().all(|c| c.passed);
        let manifest = RunManifest {
            tool: "polspec",
            version: env!("CARGO_PKG_VERSION"),
            scan: self.cfg.scan.scan_kind.name(),
            config_sha256: &self.config_sha256,
            threads: rayon::current_num_threads(),
            trajectories: self.trajectories,
            integration_steps: self.integration_steps,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
            checks: &self.checks,
            files: &self.files,
            passed,
        };
        let path = self.out_dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).expect("manifest is a plain tree");
        fs::write(&path, text.as_bytes()).map_err(|e| io_error(&path, e))?;
        println!(
            "{}: {} files in {} ({:.2} s)",
            self.cfg.scan.scan_kind.name(),
            self.files.len(),
            self.out_dir.display(),
            self.started.elapsed().as_secs_f64()
        );
        if passed {
            Ok(())
        } else {
            let failed: Vec<&str> = self
                .checks
                .iter()
                .filter(|c| !c.passed)
                .map(|c| c.name.as_str())
                .collect();
            Err(CoreError::ValidationFailed(format!(
                "checks failed: {}",
                failed.join(", ")
            )))
        }
    }
}

// ---------------------------------------------------------------------------
// shared small helpers
// ---------------------------------------------------------------------------

fn numerics(cfg: &Config) -> Numerics {
    Numerics {
        dt: cfg.scan.dt,
        record_stride: cfg.scan.record_stride,
        detection_window: cfg.scan.detection_window,
    }
}

fn detection_params(cfg: &Config) -> DetectionParams {
    DetectionParams {
        tau_w: cfg.pulses.tau_w,
        omega_l: cfg.pulses.omega_l,
        pad_factor: cfg.scan.pad_factor,
        mask_eps: cfg.scan.mask_eps,
        halfwidth_cm: cfg.scan.omega3_halfwidth,
        amplitudes: cfg.effective_amplitudes(),
    }
}

/// Integration steps of one propagation under the shared grid layout.
fn plan_steps(cfg: &Config, num: &Numerics, pulses: &PulseTrain) -> usize {
    let ctx = EngineContext::new(&cfg.system, pulses, cfg.mask);
    GridPlan::new(
        ctx.centers[2],
        ctx.start_time(),
        START_PAD_WIDTHS * pulses.tau_w,
        num,
    )
    .n_steps
}

/// Everything the output headers should echo: the flattened configuration
/// plus the fixed sign conventions of the computation.  Output-routing
/// fields are left out so the same physics produces the same bytes
/// wherever the run lands.
fn config_metadata(cfg: &Config) -> BTreeMap<String, String> {
    const ROUTING_KEYS: [&str; 3] = ["scan.out_dir", "scan.emit_binary", "scan.emit_trajectory"];
    let mut out = BTreeMap::new();
    if let Ok(toml::Value::Table(sections)) = toml::Value::try_from(cfg) {
        for (section, value) in sections {
            match value {
                toml::Value::Table(fields) => {
                    for (k, v) in fields {
                        let key = format!("{section}.{k}");
                        if !ROUTING_KEYS.contains(&key.as_str()) {
                            out.insert(key, toml_scalar(&v));
                        }
                    }
                }
                other => {
                    out.insert(section, toml_scalar(&other));
                }
            }
        }
    }
    out.insert(
        "sign_convention.delta_t".into(),
        "pump_on_minus_pump_off".into(),
    );
    out.insert(
        "sign_convention.detection_kernel".into(),
        "exp(+i*omega*t)".into(),
    );
    out.insert(
        "sign_convention.delay_kernel".into(),
        "exp(+i*omega*delay)".into(),
    );
    out.insert(
        "sign_convention.fg_feed_to_eg".into(),
        "-i*g_ef*conj(alpha)*rho_fg".into(),
    );
    out.insert(
        "sign_convention.fg_feed_to_fe".into(),
        "+i*g_ge*conj(alpha)*rho_fg".into(),
    );
    out
}

fn toml_scalar(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Worst per-channel relative L∞ difference between two detection analyses
/// on one frequency axis.  Channels that are zero in both (relative to the
/// overall scale) are skipped rather than divided by nothing.
fn spectral_drift(a: &DetectionAnalysis, b: &DetectionAnalysis) -> f64 {
    let channels_a: Vec<&Vec<C64>> = std::iter::once(&a.linear_amplitude)
        .chain(a.dt_channels.iter())
        .collect();
    let channels_b: Vec<&Vec<C64>> = std::iter::once(&b.linear_amplitude)
        .chain(b.dt_channels.iter())
        .collect();
    let global = channels_a
        .iter()
        .chain(channels_b.iter())
        .flat_map(|ch| ch.iter())
        .map(|z| z.norm())
        .fold(0.0_f64, f64::max);
    if global == 0.0 {
        return 0.0;
    }
    let mut worst = 0.0_f64;
    for (ca, cb) in channels_a.iter().zip(&channels_b) {
        let peak = ca.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if peak < 1e-9 * global {
            continue;
        }
        let diff = ca
            .iter()
            .zip(cb.iter())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        worst = worst.max(diff / peak);
    }
    worst
}

/// Attach the grid-point coordinates to a numerical failure so an aborted
/// scan names the offending delays.
fn at_grid_point(e: CoreError, tau: f64, t_wait: f64) -> CoreError {
    match e {
        CoreError::InvalidTrajectory(msg) => CoreError::InvalidTrajectory(format!(
            "grid point tau = {tau:.6} ps, T = {t_wait:.6} ps: {msg}"
        )),
        CoreError::ValidationFailed(msg) => CoreError::ValidationFailed(format!(
            "grid point tau = {tau:.6} ps, T = {t_wait:.6} ps: {msg}"
        )),
        other => other,
    }
}

fn peak_and_position(axis: &[f64], values: &[f64]) -> (f64, Option<f64>) {
    let mut peak = 0.0_f64;
    let mut pos = None;
    for (x, v) in axis.iter().zip(values) {
        if v.abs() > peak {
            peak = v.abs();
            pos = Some(*x);
        }
    }
    (peak, pos)
}

/// Peak |Re| of a grid with its (axis1, axis3) location.
fn grid_peak(grid: &SpectrumGrid) -> (f64, Option<f64>, Option<f64>) {
    let mut peak = 0.0_f64;
    let mut where_ = (None, None);
    for i1 in 0..grid.axis1.len() {
        for i3 in 0..grid.axis3.len() {
            let v = grid.at(i1, i3).re.abs();
            if v > peak {
                peak = v;
                where_ = (Some(grid.axis1[i1]), Some(grid.axis3[i3]));
            }
        }
    }
    (peak, where_.0, where_.1)
}

// ---------------------------------------------------------------------------
// subcommands
// ---------------------------------------------------------------------------

fn linear(rc: &mut RunContext) -> Result<RunStats> {
    let cfg = rc.cfg.clone();
    let ctx = EngineContext::new(&cfg.system, &cfg.pulses, cfg.mask).with_drive_scale([
        0.0, 0.0, 1.0,
    ]);
    let num = numerics(&cfg);
    let out = propagate(&ctx, &num, cfg.scan.emit_trajectory)?;
    rc.count_trajectories(1, plan_steps(&cfg, &num, &cfg.pulses));
    let analysis = analyze_detection(&out, &ctx.rates, &detection_params(&cfg));

    let modes = rc.write_polaritons()?;
    rc.write_spectrum_csv("linear.csv", &analysis.nu_abs, &analysis.linear_amplitude)?;
    rc.maybe_trajectory(&out)?;
    rc.convergence_check(&cfg.pulses, cfg.mask, [0.0, 0.0, 1.0])?;

    let (peak, pos) = peak_and_position(&analysis.nu_abs, &analysis.linear_transmission);
    println!(
        "linear: LP {:.2} cm^-1 (hw {:.2}), UP {:.2} cm^-1 (hw {:.2}), splitting {:.2} cm^-1",
        modes.lower_cm,
        modes.lower_halfwidth_cm,
        modes.upper_cm,
        modes.upper_halfwidth_cm,
        modes.splitting_cm
    );
    println!(
        "linear: peak transmission {:.4} at {:.2} cm^-1 over {} detection points",
        peak,
        pos.unwrap_or(f64::NAN),
        analysis.nu_abs.len()
    );
    Ok(RunStats {
        kind: ScanKind::Linear,
        peak_value: peak,
        peak_axis1_cm: None,
        peak_axis3_cm: pos,
        peak_linear_transmission: peak,
        molecule_number: 1.0,
    })
}

fn pump_probe(rc: &mut RunContext) -> Result<RunStats> {
    let cfg = rc.cfg.clone();
    let pulses = cfg.pulses.with_delays(0.0, cfg.scan.t_wait);
    let ctx = EngineContext::new(&cfg.system, &pulses, cfg.mask);
    let num = numerics(&cfg);
    let out = propagate(&ctx, &num, cfg.scan.emit_trajectory)?;
    rc.count_trajectories(1, plan_steps(&cfg, &num, &pulses));
    let analysis = analyze_detection(&out, &ctx.rates, &detection_params(&cfg));

    let modes = rc.write_polaritons()?;
    let total: Vec<C64> = (0..analysis.nu_abs.len())
        .map(|i| {
            analysis.dt_channels[CH_DQC][i]
                + analysis.dt_channels[CH_NR][i]
                + analysis.dt_channels[CH_R][i]
        })
        .collect();
    rc.write_spectrum_csv("pump_probe.csv", &analysis.nu_abs, &total)?;
    for (name, ch) in [
        ("pump_probe_dqc.csv", CH_DQC),
        ("pump_probe_nr.csv", CH_NR),
        ("pump_probe_r.csv", CH_R),
    ] {
        rc.write_spectrum_csv(name, &analysis.nu_abs, &analysis.dt_channels[ch])?;
    }
    rc.write_spectrum_csv("linear.csv", &analysis.nu_abs, &analysis.linear_amplitude)?;
    rc.maybe_trajectory(&out)?;
    rc.convergence_check(&pulses, cfg.mask, [1.0, 1.0, 1.0])?;

    let total_re: Vec<f64> = total.iter().map(|z| z.re).collect();
    let (peak, pos) = peak_and_position(&analysis.nu_abs, &total_re);
    let lp = analysis
        .nu_abs
        .iter()
        .position(|&x| (x - modes.lower_cm).abs() < 1.0)
        .map(|i| total_re[i]);
    let up = analysis
        .nu_abs
        .iter()
        .position(|&x| (x - modes.upper_cm).abs() < 1.0)
        .map(|i| total_re[i]);
    println!(
        "pump-probe: T = {:.3} ps, peak |dT| {:.3e} at {:.2} cm^-1; dT(LP) = {:.3e}, dT(UP) = {:.3e}",
        cfg.scan.t_wait,
        peak,
        pos.unwrap_or(f64::NAN),
        lp.unwrap_or(f64::NAN),
        up.unwrap_or(f64::NAN)
    );
    Ok(RunStats {
        kind: ScanKind::PumpProbe,
        peak_value: peak,
        peak_axis1_cm: None,
        peak_axis3_cm: pos,
        peak_linear_transmission: analysis.peak_linear_transmission(),
        molecule_number: cfg.system.relative_molecule_number(),
    })
}

/// One computed delay row of a 2D scan.
struct ScanRow {
    nr: Vec<f64>,
    r: Vec<f64>,
    dqc: Vec<f64>,
    axis3: Option<Vec<f64>>,
    linear_peak: f64,
    trajectory: Option<PropagationOutput>,
}

/// Propagate all delay rows of a scan in parallel.  `delays(k)` gives the
/// (τ, T) of row `k`; rows are assembled in index order so the output is
/// independent of the worker count.
fn compute_rows(
    rc: &mut RunContext,
    n_rows: usize,
    delays: impl Fn(usize) -> (f64, f64) + Sync,
) -> Result<Vec<ScanRow>> {
    let cfg = rc.cfg.clone();
    let num = numerics(&cfg);
    let params = detection_params(&cfg);
    let rows: Result<Vec<ScanRow>> = (0..n_rows)
        .into_par_iter()
        .map(|k| {
            let (tau, t_wait) = delays(k);
            let pulses = cfg.pulses.with_delays(tau, t_wait);
            let ctx = EngineContext::new(&cfg.system, &pulses, cfg.mask);
            let record_full = cfg.scan.emit_trajectory && k == 0;
            let out = propagate(&ctx, &num, record_full)
                .map_err(|e| at_grid_point(e, tau, t_wait))?;
            let analysis = analyze_detection(&out, &ctx.rates, &params);
            Ok(ScanRow {
                nr: analysis.dt_channels[CH_NR].iter().map(|z| z.re).collect(),
                r: analysis.dt_channels[CH_R].iter().map(|z| z.re).collect(),
                dqc: analysis.dt_channels[CH_DQC].iter().map(|z| z.re).collect(),
                axis3: (k == 0).then(|| analysis.nu_abs.clone()),
                linear_peak: analysis.peak_linear_transmission(),
                trajectory: record_full.then_some(out),
            })
        })
        .collect();
    let rows = rows?;
    let (tau_last, t_last) = delays(n_rows - 1);
    let pulses_last = cfg.pulses.with_delays(tau_last, t_last);
    rc.count_trajectories(n_rows, plan_steps(&cfg, &num, &pulses_last));
    Ok(rows)
}

fn scan_1q(rc: &mut RunContext) -> Result<RunStats> {
    let cfg = rc.cfg.clone();
    let n_tau = cfg.scan.tau_points();
    let t_wait = cfg.scan.t_wait;
    let rows = compute_rows(rc, n_tau, |k| (k as f64 * cfg.scan.tau_step, t_wait))?;

    let axis3 = rows[0].axis3.clone().expect("first row carries the axis");
    let rows_nr: Vec<Vec<f64>> = rows.iter().map(|r| r.nr.clone()).collect();
    let rows_r: Vec<Vec<f64>> = rows.iter().map(|r| r.r.clone()).collect();
    let rows_sum: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| r.nr.iter().zip(&r.r).map(|(a, b)| a + b).collect())
        .collect();

    let p = DelayTransformParams {
        delay_step: cfg.scan.tau_step,
        pad_factor: cfg.scan.pad_factor,
        apodization: cfg.scan.apodization,
        apod_rate: cfg.scan.apod_rate,
        axis_offset_cm: cfg.pulses.omega_l,
        halfwidth_cm: cfg.scan.omega1_halfwidth,
    };
    let mut meta = config_metadata(&cfg);
    meta.insert("fixed_t_wait_ps".into(), format!("{t_wait:.6}"));

    let modes = rc.write_polaritons()?;
    let mut sum_peak = (0.0, None, None);
    for (kind, data) in [
        ("oneq_nr", &rows_nr),
        ("oneq_r", &rows_r),
        ("oneq_sum", &rows_sum),
    ] {
        let mut grid = ft_excitation(kind, data, &axis3, &p, cfg.scan.decay_tol)?;
        grid.metadata.extend(meta.clone());
        rc.write_grid_set(&grid, &modes)?;
        if kind == "oneq_sum" {
            sum_peak = grid_peak(&grid);
        }
    }
    if let Some(traj) = rows.first().and_then(|r| r.trajectory.as_ref()) {
        rc.maybe_trajectory(traj)?;
    }
    rc.convergence_check(&cfg.pulses.with_delays(0.0, t_wait), cfg.mask, [1.0; 3])?;

    println!(
        "scan-1q: {} delay rows x {} detection points; peak |Re dT| {:.3e} at ({:.2}, {:.2}) cm^-1",
        n_tau,
        axis3.len(),
        sum_peak.0,
        sum_peak.1.unwrap_or(f64::NAN),
        sum_peak.2.unwrap_or(f64::NAN)
    );
    Ok(RunStats {
        kind: ScanKind::Scan1q,
        peak_value: sum_peak.0,
        peak_axis1_cm: sum_peak.1,
        peak_axis3_cm: sum_peak.2,
        peak_linear_transmission: rows[0].linear_peak,
        molecule_number: cfg.system.relative_molecule_number(),
    })
}

fn scan_2qc(rc: &mut RunContext) -> Result<RunStats> {
    let cfg = rc.cfg.clone();
    let n_t = cfg.scan.t_wait_points();
    let tau = cfg.scan.tau;
    let rows = compute_rows(rc, n_t, |k| (tau, k as f64 * cfg.scan.t_wait_step))?;

    let axis3 = rows[0].axis3.clone().expect("first row carries the axis");
    let rows_dqc: Vec<Vec<f64>> = rows.iter().map(|r| r.dqc.clone()).collect();

    let p = DelayTransformParams {
        delay_step: cfg.scan.t_wait_step,
        pad_factor: cfg.scan.pad_factor,
        apodization: cfg.scan.apodization,
        apod_rate: cfg.scan.apod_rate,
        axis_offset_cm: 2.0 * cfg.pulses.omega_l,
        halfwidth_cm: cfg.scan.omega2_halfwidth,
    };
    let mut grid = ft_waiting("twoqc", &rows_dqc, &axis3, &p, cfg.scan.decay_tol)?;
    let mut meta = config_metadata(&cfg);
    meta.insert("fixed_tau_ps".into(), format!("{tau:.6}"));
    grid.metadata.extend(meta);

    let modes = rc.write_polaritons()?;
    // the two-quantum axis must cover the double-polariton band
    let lo_need = 2.0 * modes.lower_cm - 4.0 * modes.lower_halfwidth_cm;
    let hi_need = 2.0 * modes.upper_cm + 4.0 * modes.upper_halfwidth_cm;
    let lo = grid.axis1.first().copied().unwrap_or(f64::NAN);
    let hi = grid.axis1.last().copied().unwrap_or(f64::NAN);
    rc.check(
        "twoqc_axis_span",
        lo <= lo_need && hi >= hi_need,
        format!("axis [{lo:.1}, {hi:.1}] cm^-1 must cover [{lo_need:.1}, {hi_need:.1}]"),
    );

    rc.write_grid_set(&grid, &modes)?;
    if let Some(traj) = rows.first().and_then(|r| r.trajectory.as_ref()) {
        rc.maybe_trajectory(traj)?;
    }
    rc.convergence_check(&cfg.pulses.with_delays(tau, 0.0), cfg.mask, [1.0; 3])?;

    let peak = grid_peak(&grid);
    println!(
        "scan-2qc: {} delay rows x {} detection points; peak |Re dT| {:.3e} at ({:.2}, {:.2}) cm^-1",
        n_t,
        axis3.len(),
        peak.0,
        peak.1.unwrap_or(f64::NAN),
        peak.2.unwrap_or(f64::NAN)
    );
    Ok(RunStats {
        kind: ScanKind::Scan2qc,
        peak_value: peak.0,
        peak_axis1_cm: peak.1,
        peak_axis3_cm: peak.2,
        peak_linear_transmission: rows[0].linear_peak,
        molecule_number: cfg.system.relative_molecule_number(),
    })
}

fn stationary(rc: &mut RunContext) -> Result<RunStats> {
    let cfg = rc.cfg.clone();
    let pulses = cfg.pulses.with_delays(0.0, cfg.scan.t_wait);
    let num = numerics(&cfg);
    let band = wavenumber_to_angular(cfg.scan.omega3_halfwidth);
    let base_mask = PathwayMask {
        gsb_se: false,
        esa: false,
        dqc_feed: false,
        eid: false,
        eid_in_2qc: false,
        disable_ef_coupling: cfg.mask.disable_ef_coupling,
    };

    // one isolated propagation per population-driven pathway
    let run_isolated = |mask: PathwayMask| -> Result<(PropagationOutput, DetectionSpectrum)> {
        let ctx = EngineContext::new(&cfg.system, &pulses, mask);
        let out = propagate(&ctx, &num, false)?;
        let mut nr_plus_r =
            detection_transform(&out.detection_times, &out.third_fields[CH_NR], cfg.scan.pad_factor);
        let reph =
            detection_transform(&out.detection_times, &out.third_fields[CH_R], cfg.scan.pad_factor);
        for (t, r) in nr_plus_r.values.iter_mut().zip(&reph.values) {
            *t += r;
        }
        Ok((out, nr_plus_r))
    };
    let (out_g, num_gsb) = run_isolated(PathwayMask {
        gsb_se: true,
        ..base_mask
    })?;
    let (_, num_esa) = run_isolated(PathwayMask {
        esa: true,
        ..base_mask
    })?;
    rc.count_trajectories(2, plan_steps(&cfg, &num, &pulses));

    // population surviving at the probe (per unit pump amplitudes); the
    // configured value stands in when the pump is off
    let measured = out_g.population_at_probe.re;
    let rho_ee = if measured.abs() > 0.0 {
        measured
    } else {
        cfg.scan.rho_ee
    };

    let rates = DerivedRates::derive(&cfg.system, cfg.pulses.omega_l);
    let kept: Vec<usize> = (0..num_gsb.omega.len())
        .filter(|&i| num_gsb.omega[i].abs() <= band)
        .collect();
    let omega_kept: Vec<f64> = kept.iter().map(|&i| num_gsb.omega[i]).collect();
    let curves = stationary_contributions(&rates, pulses.tau_w, rho_ee, &omega_kept);

    // field-level comparison: propagated pathway vs. its closed form
    let mut compare = |name: &str, numerical: &DetectionSpectrum, analytic: &[C64]| {
        let peak = analytic.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let worst = kept
            .iter()
            .enumerate()
            .map(|(j, &i)| (numerical.values[i] - analytic[j]).norm())
            .fold(0.0, f64::max);
        let rel = if peak > 0.0 { worst / peak } else { 0.0 };
        rc.check(
            name,
            rel <= STATIONARY_MATCH_TOL,
            format!("relative deviation {rel:.3e}, tolerance {STATIONARY_MATCH_TOL:.0e}"),
        );
        rel
    };
    let rel_g = compare("stationary_match_gsb_se", &num_gsb, &curves.gsb_se);
    let rel_e = compare("stationary_match_esa", &num_esa, &curves.esa);

    // emit everything as differential transmission on the absolute axis
    let eta = cfg.effective_amplitudes();
    let half_kappa = wavenumber_to_angular(rates.kappa) / 2.0;
    let weight = half_kappa * half_kappa * eta[0] * eta[1] * 2.0;
    let nu_abs: Vec<f64> = omega_kept
        .iter()
        .map(|&w| cfg.pulses.omega_l + polspec_core::units::angular_to_wavenumber(w))
        .collect();
    let to_dt = |field: &dyn Fn(usize) -> C64| -> Vec<C64> {
        omega_kept
            .iter()
            .enumerate()
            .map(|(j, &w)| {
                let f = pulse_spectrum(w, pulses.tau_w);
                if f < cfg.scan.mask_eps {
                    C64::new(0.0, 0.0)
                } else {
                    let alpha1 = linear_cavity_response(&rates, pulses.tau_w, w);
                    weight * alpha1.conj() * field(j) / (f * f)
                }
            })
            .collect()
    };
    rc.write_spectrum_csv(
        "stationary_gsb_se.csv",
        &nu_abs,
        &to_dt(&|j| curves.gsb_se[j]),
    )?;
    rc.write_spectrum_csv("stationary_esa.csv", &nu_abs, &to_dt(&|j| curves.esa[j]))?;
    rc.write_spectrum_csv("stationary_dqc.csv", &nu_abs, &to_dt(&|j| curves.dqc[j]))?;
    rc.write_spectrum_csv(
        "numerical_gsb_se.csv",
        &nu_abs,
        &to_dt(&|j| num_gsb.values[kept[j]]),
    )?;
    rc.write_spectrum_csv(
        "numerical_esa.csv",
        &nu_abs,
        &to_dt(&|j| num_esa.values[kept[j]]),
    )?;
    rc.write_polaritons()?;
    rc.convergence_check(&pulses, cfg.mask, [1.0; 3])?;

    println!(
        "stationary: T = {:.3} ps, rho_ee = {rho_ee:.4e}; field deviations gsb_se {rel_g:.3e}, esa {rel_e:.3e}",
        cfg.scan.t_wait
    );
    let total_re: Vec<f64> = (0..omega_kept.len())
        .map(|j| (num_gsb.values[kept[j]] + num_esa.values[kept[j]]).re)
        .collect();
    let (peak, pos) = peak_and_position(&nu_abs, &total_re);
    Ok(RunStats {
        kind: ScanKind::Stationary,
        peak_value: peak,
        peak_axis1_cm: None,
        peak_axis3_cm: pos,
        peak_linear_transmission: f64::NAN,
        molecule_number: cfg.system.relative_molecule_number(),
    })
}

fn oracle_validate(rc: &mut RunContext) -> Result<RunStats> {
    let cfg = rc.cfg.clone();
    let pulses = cfg.pulses.with_delays(cfg.scan.tau, cfg.scan.t_wait);
    let num = numerics(&cfg);
    let report = validate_against_mean_field(&cfg.system, &pulses, &num, cfg.scan.n_phi)?;
    let n_runs = cfg.scan.n_phi.pow(3) + 1;
    rc.count_trajectories(n_runs, plan_steps(&cfg, &num, &pulses));

    let verdict = if report.passed { "ok" } else { "FAIL" };
    let text = format!("{}overall: {verdict}\n", report.summary());
    print!("{text}");
    rc.write_bytes("oracle_report.txt", "report_text", text.as_bytes())?;
    let json = serde_json::to_string_pretty(&report).expect("report is a plain tree");
    rc.write_bytes("oracle_report.json", "report_json", json.as_bytes())?;

    let worst = report
        .comparisons
        .iter()
        .map(|c| c.relative_error)
        .fold(0.0_f64, f64::max);
    rc.check(
        "oracle_match",
        report.passed,
        format!(
            "worst relative error {worst:.3e} over {} components, phase grid {}^3",
            report.comparisons.len(),
            report.n_phi
        ),
    );
    Ok(RunStats {
        kind: ScanKind::OracleValidate,
        peak_value: worst,
        peak_axis1_cm: None,
        peak_axis3_cm: None,
        peak_linear_transmission: f64::NAN,
        molecule_number: 1.0,
    })
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
struct SubRunRecord {
    dir: String,
    value: f64,
    manifest_sha256: String,
}

#[derive(Debug, Serialize)]
struct SweepManifest<'a> {
    tool: &'a str,
    version: &'a str,
    scan: &'a str,
    key: &'a str,
    values: &'a [f64],
    config_sha256: &'a str,
    files: &'a [FileRecord],
    sub_runs: &'a [SubRunRecord],
}

fn run_sweep(args: &SweepArgs) -> Result<()> {
    let base = load_cli_config(&args.common, None)?;
    let values: Vec<f64> = args
        .values
        .split(',')
        .map(|s| {
            let s = s.trim();
            s.parse::<f64>().map_err(|_| {
                CoreError::ConfigInvalid(format!("--values entry '{s}' is not a number"))
            })
        })
        .collect::<Result<_>>()?;
    if values.is_empty() {
        return Err(CoreError::ConfigInvalid(
            "--values must list at least one number".into(),
        ));
    }
    // reject unknown keys before any work happens
    {
        let mut probe = base.clone();
        probe.apply_override(&format!("{}={}", args.key, values[0]))?;
    }

    let parent = PathBuf::from(&base.scan.out_dir);
    fs::create_dir_all(&parent).map_err(|e| io_error(&parent, e))?;
    let echo = base.to_toml_string();
    let base_sha = sha256_hex(echo.as_bytes());
    let echo_path = parent.join("resolved_config.toml");
    fs::write(&echo_path, echo.as_bytes()).map_err(|e| io_error(&echo_path, e))?;

    let mut stats = Vec::new();
    let mut sub_runs = Vec::new();
    for &v in &values {
        let mut cfg = base.clone();
        cfg.apply_override(&format!("{}={v}", args.key))?;
        cfg.validate()?;
        let dir = parent.join(sweep_dir_name(&args.key, v));
        cfg.scan.out_dir = dir.display().to_string();
        println!("sweep: {} = {v}", args.key);
        let s = run_scan(&cfg, args.common.heatmap, args.common.convergence_check)?;
        let manifest_bytes =
            fs::read(dir.join("manifest.json")).map_err(|e| io_error(&dir, e))?;
        sub_runs.push(SubRunRecord {
            dir: sweep_dir_name(&args.key, v),
            value: v,
            manifest_sha256: sha256_hex(&manifest_bytes),
        });
        stats.push(s);
    }

    // comparison table
    let mut table = String::from(
        "value, peak_value, peak_axis1_cm, peak_axis3_cm, peak_linear_transmission, \
         molecule_number, normalized_peak\n",
    );
    println!("sweep summary for {}:", args.key);
    for (v, s) in values.iter().zip(&stats) {
        let fmt = |x: Option<f64>| x.map(|x| format!("{x:.6}")).unwrap_or_default();
        table.push_str(&format!(
            "{v}, {:.9e}, {}, {}, {:.9e}, {:.6}, {:.9e}\n",
            s.peak_value,
            fmt(s.peak_axis1_cm),
            fmt(s.peak_axis3_cm),
            s.peak_linear_transmission,
            s.molecule_number,
            s.normalized_peak()
        ));
        println!(
            "  {v:>10}: peak {:.3e}, normalized {:.3e}",
            s.peak_value,
            s.normalized_peak()
        );
    }
    let summary_path = parent.join("sweep_summary.csv");
    fs::write(&summary_path, table.as_bytes()).map_err(|e| io_error(&summary_path, e))?;

    let mut files = Vec::new();
    for (path, kind) in [(&echo_path, "config_echo"), (&summary_path, "summary_csv")] {
        let bytes = fs::read(path).map_err(|e| io_error(path, e))?;
        files.push(FileRecord {
            name: path
                .strip_prefix(&parent)
                .unwrap_or(path)
                .display()
                .to_string(),
            kind: kind.to_string(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(&bytes),
        });
    }
    let manifest = SweepManifest {
        tool: "polspec",
        version: env!("CARGO_PKG_VERSION"),
        scan: base.scan.scan_kind.name(),
        key: &args.key,
        values: &values,
        config_sha256: &base_sha,
        files: &files,
        sub_runs: &sub_runs,
    };
    let path = parent.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest is a plain tree");
    fs::write(&path, text.as_bytes()).map_err(|e| io_error(&path, e))?;
    println!(
        "sweep: {} runs of {} under {}",
        values.len(),
        base.scan.scan_kind.name(),
        parent.display()
    );
    Ok(())
}

/// Filesystem-safe subdirectory name for one sweep value.
fn sweep_dir_name(key: &str, value: f64) -> String {
    let v = value.to_string().replace('-', "m").replace('.', "p");
    format!("{}_{v}", key.replace('.', "_"))
}
