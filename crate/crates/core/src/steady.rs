//! Classical steady state of the driven five-mode system and the
//! intermode-scattering noise estimates.
//!
//! To leading order every amplitude is an explicit function of the static
//! mechanical displacement `x_c`, so the steady state reduces to a scalar
//! fixed point `x_c = F(x_c)`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::{Drive, ModelParams, SystemConfig};

const TOLERANCE: f64 = 1e-12;
const MAX_ITERATIONS: usize = 200_000;

/// Relative threshold on `|x_c g_0|` against `min(|Delta_a|, |Delta_b|)`
/// below which the radiation-pressure forces count as cancelled.
pub const BALANCE_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteadyState {
    pub alpha: Complex64,
    pub alpha_p: Complex64,
    pub beta: Complex64,
    pub beta_p: Complex64,
    /// Mechanical amplitude; `x_c = c + c*`.
    pub c: Complex64,
    pub x_c: f64,
    pub iterations: usize,
    pub residual: f64,
}

impl SteadyState {
    /// Linearized couplings `(G_a, G_b)` in rad/s.
    ///
    /// The pump phases are taken as locked so that both couplings are real;
    /// their signs follow the single-photon couplings.
    pub fn couplings(&self, config: &SystemConfig) -> (f64, f64) {
        (
            self.alpha_p.norm() * config.g_a0,
            self.beta_p.norm() * config.g_b0,
        )
    }

    /// Largest residual of the five leading-order steady-state relations.
    pub fn relation_residual(&self, config: &SystemConfig) -> Result<f64> {
        let (eta_a, eta_b) = pump_amplitudes(config)?;
        let i = Complex64::i();
        let x = self.x_c;
        let r = [
            (self.beta_p * (config.kappa_b + i * config.g_b0 * x) - eta_b).norm(),
            (self.beta * config.detuning_b - config.g_b0 * self.beta_p * x).norm(),
            (self.alpha_p * (config.kappa_a + i * config.g_a0 * x) - eta_a).norm(),
            (self.alpha * config.detuning_a - config.g_a0 * self.alpha_p * x).norm(),
            (x + (config.g_b0 * self.beta_p.norm_sqr() + config.g_a0 * self.alpha_p.norm_sqr())
                / config.omega_m)
                .abs(),
        ];
        Ok(r.into_iter().fold(0.0, f64::max))
    }
}

fn pump_amplitudes(config: &SystemConfig) -> Result<(f64, f64)> {
    match config.drive {
        Drive::Pump { eta_a, eta_b } => Ok((eta_a, eta_b)),
        Drive::Coupling { .. } => Err(Error::Dependency(
            "the classical steady state needs a pump-specified drive (eta_a, eta_b)".into(),
        )),
    }
}

/// Right-hand side of the scalar self-consistency `x_c = F(x_c)`.
fn displacement_map(config: &SystemConfig, eta_a: f64, eta_b: f64, x: f64) -> f64 {
    let beta_p_sq = eta_b * eta_b / (config.kappa_b.powi(2) + (config.g_b0 * x).powi(2));
    let alpha_p_sq = eta_a * eta_a / (config.kappa_a.powi(2) + (config.g_a0 * x).powi(2));
    -(config.g_b0 * beta_p_sq + config.g_a0 * alpha_p_sq) / config.omega_m
}

fn amplitudes_at(
    config: &SystemConfig,
    eta_a: f64,
    eta_b: f64,
    x: f64,
) -> Result<(Complex64, Complex64, Complex64, Complex64)> {
    let i = Complex64::i();
    let beta_p = Complex64::from(eta_b) / (config.kappa_b + i * config.g_b0 * x);
    let alpha_p = Complex64::from(eta_a) / (config.kappa_a + i * config.g_a0 * x);
    let side = |delta: f64, g0: f64, pump: Complex64, name: &str| {
        let num = g0 * pump * x;
        if num == Complex64::new(0.0, 0.0) {
            Ok(Complex64::new(0.0, 0.0))
        } else if delta == 0.0 {
            Err(Error::Singular(format!(
                "{name} detuning is zero while x_c g0 is nonzero"
            )))
        } else {
            Ok(num / delta)
        }
    };
    let beta = side(config.detuning_b, config.g_b0, beta_p, "microwave")?;
    let alpha = side(config.detuning_a, config.g_a0, alpha_p, "optical")?;
    Ok((alpha, alpha_p, beta, beta_p))
}

/// Solve the leading-order classical steady state by damped fixed-point
/// iteration on `x_c`.
pub fn solve_steady(config: &SystemConfig) -> Result<SteadyState> {
    config.validate()?;
    let (eta_a, eta_b) = pump_amplitudes(config)?;

    let mut x = 0.0_f64;
    let mut damping = 1.0_f64;
    let mut last_step = 0.0_f64;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let fx = displacement_map(config, eta_a, eta_b, x);
        let step = fx - x;
        residual = step.abs();
        if residual <= TOLERANCE * x.abs().max(1.0) {
            x = fx;
            break;
        }
        if step * last_step < 0.0 {
            // oscillating around the root
            damping = (damping * 0.5).max(1e-4);
        }
        last_step = step;
        x += damping * step;
    }
    if iterations >= MAX_ITERATIONS {
        return Err(Error::NoConvergence {
            iterations,
            residual,
        });
    }

    let (alpha, alpha_p, beta, beta_p) = amplitudes_at(config, eta_a, eta_b, x)?;
    Ok(SteadyState {
        alpha,
        alpha_p,
        beta,
        beta_p,
        c: Complex64::new(x / 2.0, 0.0),
        x_c: x,
        iterations,
        residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PumpBalance {
    pub eta_a: f64,
    pub eta_b: f64,
    pub steady: SteadyState,
    /// `x_c` implied by the target couplings. It is fixed by the targets, so
    /// it is also the smallest achievable displacement.
    pub x_c: f64,
    /// Whether `|x_c g_0|` is below [`BALANCE_THRESHOLD`] times the smaller detuning.
    pub cancelled: bool,
}

/// Choose pump strengths that realize the target couplings `(G_a, G_b)` (rad/s).
pub fn balance_pumps(config: &SystemConfig, target_g_a: f64, target_g_b: f64) -> Result<PumpBalance> {
    config.validate()?;
    let amplitude = |target: f64, g0: f64, name: &str| -> Result<f64> {
        if target == 0.0 {
            return Ok(0.0);
        }
        if g0 == 0.0 || target * g0 < 0.0 {
            return Err(Error::Infeasible(format!(
                "target G_{name} = {target:e} needs a single-photon coupling of the same sign, got g_{name}0 = {g0:e}"
            )));
        }
        Ok(target / g0)
    };
    let alpha_p = amplitude(target_g_a, config.g_a0, "a")?;
    let beta_p = amplitude(target_g_b, config.g_b0, "b")?;

    let x_c = -(config.g_b0 * beta_p * beta_p + config.g_a0 * alpha_p * alpha_p) / config.omega_m;
    let eta_a = alpha_p * config.kappa_a.hypot(config.g_a0 * x_c);
    let eta_b = beta_p * config.kappa_b.hypot(config.g_b0 * x_c);

    let driven = SystemConfig {
        drive: Drive::Pump { eta_a, eta_b },
        ..config.clone()
    };
    let steady = solve_steady(&driven)?;

    let g0 = config.g_a0.abs().max(config.g_b0.abs());
    let detuning = config.detuning_a.abs().min(config.detuning_b.abs());
    let cancelled = (x_c * g0).abs() <= BALANCE_THRESHOLD * detuning;

    Ok(PumpBalance {
        eta_a,
        eta_b,
        steady,
        x_c,
        cancelled,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    Optical,
    Microwave,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScatteringEstimate {
    /// Occupation added by scattering of the pumped ancilla's fluctuations.
    pub scattering_occupation: f64,
    /// Occupation from the off-resonant radiation-pressure coupling.
    pub radiation_pressure_occupation: f64,
    /// `scattering / radiation_pressure = nbar_pump kappa / (|pump|^2 gamma)`.
    pub ratio: f64,
}

/// Compare the ancilla-scattering noise with the radiation-pressure noise
/// for one cavity (normalized units).
pub fn scattering_noise_estimate(
    params: &ModelParams,
    side: Side,
    nbar_pump: f64,
) -> Result<ScatteringEstimate> {
    let five = params.five_mode.ok_or_else(|| {
        Error::Dependency("scattering estimate needs single-photon couplings (five-mode parameters)".into())
    })?;
    let (g0, g, kappa) = match side {
        Side::Optical => (five.g_a0, params.g_a, params.kappa_a),
        Side::Microwave => (five.g_b0, params.g_b, params.kappa_b),
    };
    let thermal = 2.0 * params.nbar_c + 1.0;
    let scattering_occupation = g0 * g0 * nbar_pump * thermal;
    let radiation_pressure_occupation = g * g * (params.gamma / kappa) * thermal;
    let ratio = if radiation_pressure_occupation == 0.0 {
        if scattering_occupation == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        scattering_occupation / radiation_pressure_occupation
    };
    Ok(ScatteringEstimate {
        scattering_occupation,
        radiation_pressure_occupation,
        ratio,
    })
}
