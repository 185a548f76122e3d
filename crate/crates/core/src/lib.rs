//! Simulation core for an optically cooled LC circuit coupled to a
//! nanomechanical membrane through a wire-grid capacitor.
//!
//! The crate is organized along the physical pipeline:
//!
//! * [`electrostatics`]: 2D finite-element solve of the wire-grid capacitor,
//!   normalized capacitance curves c(x_m) and the characteristic length
//!   zeta = -C / (dC/dx_m).
//! * [`model`]: bias equilibrium of the membrane under a DC voltage,
//!   electromechanical coupling g, normal modes and the stability boundary.
//! * [`cooling`]: steady-state and transient occupations of the coupled
//!   membrane/LC modes under optical cold damping, both exact (Lyapunov)
//!   and via the weak/strong-coupling closed forms.
//! * [`readout`]: signal-to-noise spectrum of the optical readout against
//!   the rf amplifier baseline, detection bandwidth, and a homodyne
//!   Monte-Carlo estimator for cross-checking the analytic spectrum.
//!
//! All quantities are SI; rates are amplitude-damping rates in rad/s
//! (a mode amplitude decays as exp(-gamma t), its energy as exp(-2 gamma t)).

pub mod constants;
pub mod cooling;
pub mod electrostatics;
pub mod error;
pub mod model;
pub mod ode;
pub mod readout;

pub use cooling::{
    cooling_limit, cooling_rate, lyapunov_steady_state, occupation_strong, occupation_weak,
    thermal_occupation, transient_occupations, CoolingParams, CoolingRegime, SteadyStateResult,
    TransientSample,
};
pub use electrostatics::{
    capacitance, capacitance_curve, solve_potential, CapacitanceCurve, CapacitorGeometry,
    PotentialField, ZetaEstimate,
};
pub use error::{Error, Result};
pub use model::{
    absolute_capacitance, check_stability, coupling_constant, coupling_constant_from_dc,
    normal_modes, resonant_inductance, solve_equilibrium, solve_equilibrium_for_displacement,
    BiasEquilibrium, CircuitParams, MembraneParams, NormalModes,
};
pub use readout::{
    detection_bandwidth, rf_baseline_snr, simulate_homodyne, snr_spectrum, snr_value,
    voltage_series_to_signal, voltage_to_signal, Bandwidth, EmpiricalSnr, HomodyneConfig,
    HomodyneEstimate, ReadoutParams, SignalSpec, SnrSample, SnrSpectrum, RNG_ALGORITHM,
};

/// Version string embedded in exported artifacts.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
