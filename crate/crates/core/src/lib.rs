//! Semiclassical simulation of nonlinear spectroscopy in an anharmonic
//! vibration–cavity system.
//!
//! The library propagates the coupled equations of motion for a cavity mode
//! and a three-level molecular ensemble, with each field component tagged by
//! its order in the three drive pulses and by its pulse-phase signature.
//! Recorded cavity fields are Fourier-analyzed into linear transmission,
//! pump–probe differential transmission, and 2D maps over the inter-pulse
//! delays (one-quantum scans over the pump gap, two-quantum-coherence scans
//! over the waiting period).
//!
//! Module map:
//!
//! * [`units`] — wavenumber/angular conversions and pulse envelopes.
//! * [`config`] — the TOML-backed run configuration and its validation.
//! * [`model`] — rotating-frame rates derived from the physical parameters.
//! * [`engine`] — the phase-tagged perturbative equations of motion and
//!   their fixed-step integrator.
//! * [`oracle`] — an independent mean-field propagator plus explicit phase
//!   cycling, used to cross-validate the tagged engine.
//! * [`spectra`] — Fourier assembly of detected fields into 1D and 2D
//!   spectra, closed-form references, and normal-mode analysis.
//! * [`io`] — on-disk formats for grids, spectra, and trajectories.

pub mod config;
pub mod engine;
pub mod error;
pub mod io;
pub mod model;
pub mod oracle;
pub mod spectra;
pub mod units;

pub use config::{Apodization, Config, PulseTrain, ScanKind, ScanSpec, SystemParams};
pub use engine::{propagate, EngineContext, Numerics, PathwayMask, PropagationOutput};
pub use error::{CoreError, Result};
pub use model::DerivedRates;
pub use oracle::{validate_against_mean_field, ValidationReport};
pub use spectra::{
    analyze_detection, delay_transform_grid, detection_transform, differential_transmission,
    ft_excitation, ft_waiting, linear_cavity_response, polariton_frequencies,
    stationary_contributions, DetectionAnalysis, DetectionParams, DelayTransformParams,
    DetectionSpectrum, PolaritonModes, SpectrumGrid, StationaryCurves,
};
