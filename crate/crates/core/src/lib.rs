//! Linearized multimode optomechanics for a microwave-to-optical transducer
//! built from two cavities sharing one mechanical mode.
//!
//! All model-level quantities are normalized to the mechanical frequency.
//! SI units only appear in [`SystemConfig`] and the sensitivity budget.

pub mod config;
pub mod error;
pub mod evolution;
pub mod fock;
pub(crate) mod linalg;
pub mod models;
pub mod normal_modes;
pub mod params;
pub mod spectra;
pub mod steady;

pub use config::{config_to_string, load_config, parse_config, save_config};
pub use error::{Error, Result};
pub use params::{
    denormalize, normalize, thermal_occupation, validate_regime, Drive, FiveModeParams,
    ModelParams, ProtocolConfig, RegimeReport, SystemConfig,
};
pub use steady::{balance_pumps, scattering_noise_estimate, solve_steady, SteadyState};
pub use models::{
    build, build_five_mode, build_three_mode, build_two_mode_adiabatic, squeezing_params,
    stability_check, LinearModel, ModelKind, NoiseChannel, NoiseModel, StabilityReport,
};
pub use normal_modes::{crossing_gap, diagonalize, spectrum_sweep, Crossing, CrossingGap, PolaritonSpectrum};
pub use spectra::{
    adaptive_grid, conversion_frequencies, mean_occupation_from_psd, mech_noise_term,
    mechanical_noise_correlation, noise_budget, peak_check, peak_maximum, peak_mismatch, psd,
    response_matrix, transfer_function, BudgetReport, OccupationEstimate, PeakCheck, PsdResult,
};
pub use evolution::{
    evolve_covariance, lyapunov_steady, project_polaritons, run_protocol, CovarianceState, Feasibility,
    Protocol, ProtocolOptions, ProtocolRun, Trajectory,
};
pub use fock::{compare_with_gaussian, fock_oracle, FockTrajectory, OracleReport};
