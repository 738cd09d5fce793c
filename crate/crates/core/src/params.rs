//! Physical parameter sets and the normalized model parameters.
//!
//! All model math runs in units of the mechanical frequency (`omega_m = 1`).
//! [`SystemConfig`] holds SI angular frequencies (rad/s) and temperatures (K);
//! [`normalize`] is the only place where the two unit systems meet.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::steady::SteadyState;

/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant (J/K).
pub const K_B: f64 = 1.380_649e-23;

/// Ratio used to decide a "much greater than" inequality.
pub const REGIME_MARGIN: f64 = 5.0;

pub const TWO_PI: f64 = 2.0 * PI;

/// Bose-Einstein occupation of a reservoir at angular frequency `omega` (rad/s)
/// and temperature `temperature` (K).
pub fn thermal_occupation(omega: f64, temperature: f64) -> Result<f64> {
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(Error::Domain(format!(
            "thermal occupation needs omega > 0, got {omega}"
        )));
    }
    if !(temperature >= 0.0) {
        return Err(Error::Domain(format!(
            "temperature must be >= 0, got {temperature}"
        )));
    }
    if temperature == 0.0 {
        return Ok(0.0);
    }
    let x = HBAR * omega / (K_B * temperature);
    Ok(1.0 / x.exp_m1())
}

/// How the two pumps are specified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Drive {
    /// Pump drive strengths (rad/s); couplings follow from the classical steady state.
    Pump { eta_a: f64, eta_b: f64 },
    /// Target linearized couplings (rad/s, signed).
    Coupling { g_a: f64, g_b: f64 },
}

/// Optional detection-protocol timing, in normalized units (1/omega_m and omega_m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub tau_r: f64,
    pub tau: f64,
    pub tau_d: f64,
    pub delta_a_start: f64,
    pub delta_a_end: f64,
}

/// Full device description in SI units.
///
/// Pump frequencies are stored as pump-cavity detunings (`omega_ap - omega_a`)
/// so that a GHz detuning on top of a THz carrier keeps full precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub omega_m: f64,
    pub gamma: f64,
    pub omega_a: f64,
    pub omega_b: f64,
    /// `omega_ap - omega_a` (rad/s).
    pub detuning_a: f64,
    /// `omega_bp - omega_b` (rad/s).
    pub detuning_b: f64,
    pub g_a0: f64,
    pub g_b0: f64,
    pub kappa_a: f64,
    pub kappa_b: f64,
    pub temp_a: f64,
    pub temp_b: f64,
    pub temp_c: f64,
    /// Occupation overrides; when set they replace the Bose-Einstein value.
    pub nbar_a: Option<f64>,
    pub nbar_b: Option<f64>,
    pub nbar_c: Option<f64>,
    pub nbar_ap: Option<f64>,
    pub nbar_bp: Option<f64>,
    pub drive: Drive,
    pub protocol: Option<ProtocolConfig>,
}

impl SystemConfig {
    pub fn omega_ap(&self) -> f64 {
        self.omega_a + self.detuning_a
    }

    pub fn omega_bp(&self) -> f64 {
        self.omega_b + self.detuning_b
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mechanics.omega_m_hz", self.omega_m),
            ("mechanics.gamma_hz", self.gamma),
            ("optical.kappa_a_hz", self.kappa_a),
            ("microwave.kappa_b_hz", self.kappa_b),
            ("optical.omega_a_hz", self.omega_a),
            ("microwave.omega_b_hz", self.omega_b),
        ];
        for (key, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(key, format!("must be a positive number, got {v}")));
            }
        }
        let temps = [
            ("optical.T_a_k", self.temp_a),
            ("microwave.T_b_k", self.temp_b),
            ("mechanics.T_c_k", self.temp_c),
        ];
        for (key, v) in temps {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::config(key, format!("must be >= 0, got {v}")));
            }
        }
        let overrides = [
            ("optical.nbar", self.nbar_a),
            ("microwave.nbar", self.nbar_b),
            ("mechanics.nbar_c", self.nbar_c),
            ("optical.nbar_pump", self.nbar_ap),
            ("microwave.nbar_pump", self.nbar_bp),
        ];
        for (key, v) in overrides {
            if let Some(v) = v {
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(Error::config(key, format!("must be >= 0, got {v}")));
                }
            }
        }
        for (key, v) in [
            ("optical.detuning_hz", self.detuning_a),
            ("microwave.detuning_hz", self.detuning_b),
            ("optical.g_a0_hz", self.g_a0),
            ("microwave.g_b0_hz", self.g_b0),
        ] {
            if !v.is_finite() {
                return Err(Error::config(key, "must be finite"));
            }
        }
        Ok(())
    }
}

/// Extra parameters needed by the five-mode (ancilla-resolved) model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FiveModeParams {
    /// Single-photon couplings in units of omega_m.
    pub g_a0: f64,
    pub g_b0: f64,
    /// Static mechanical displacement quadrature (dimensionless).
    pub x_c: f64,
    pub nbar_ap: f64,
    pub nbar_bp: f64,
}

/// Normalized parameter set (every rate in units of omega_m).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub delta_a: f64,
    pub delta_b: f64,
    pub g_a: f64,
    pub g_b: f64,
    pub kappa_a: f64,
    pub kappa_b: f64,
    pub gamma: f64,
    pub nbar_a: f64,
    pub nbar_b: f64,
    pub nbar_c: f64,
    pub five_mode: Option<FiveModeParams>,
}

impl ModelParams {
    /// Rates must be non-negative (zero gives the purely Hamiltonian limit)
    /// and occupations non-negative.
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("delta_a", self.delta_a),
            ("delta_b", self.delta_b),
            ("g_a", self.g_a),
            ("g_b", self.g_b),
        ];
        for (key, v) in all {
            if !v.is_finite() {
                return Err(Error::Domain(format!("{key} must be finite, got {v}")));
            }
        }
        let nonneg = [
            ("kappa_a", self.kappa_a),
            ("kappa_b", self.kappa_b),
            ("gamma", self.gamma),
            ("nbar_a", self.nbar_a),
            ("nbar_b", self.nbar_b),
            ("nbar_c", self.nbar_c),
        ];
        for (key, v) in nonneg {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Domain(format!("{key} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn with_delta_a(mut self, delta_a: f64) -> Self {
        self.delta_a = delta_a;
        self
    }

    /// Same couplings and detunings with all dissipation switched off.
    pub fn without_dissipation(mut self) -> Self {
        self.kappa_a = 0.0;
        self.kappa_b = 0.0;
        self.gamma = 0.0;
        self
    }
}

/// Normalized parameters scaled back to SI angular frequencies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalRates {
    pub delta_a: f64,
    pub delta_b: f64,
    pub g_a: f64,
    pub g_b: f64,
    pub kappa_a: f64,
    pub kappa_b: f64,
    pub gamma: f64,
}

pub fn denormalize(params: &ModelParams, omega_m: f64) -> PhysicalRates {
    PhysicalRates {
        delta_a: params.delta_a * omega_m,
        delta_b: params.delta_b * omega_m,
        g_a: params.g_a * omega_m,
        g_b: params.g_b * omega_m,
        kappa_a: params.kappa_a * omega_m,
        kappa_b: params.kappa_b * omega_m,
        gamma: params.gamma * omega_m,
    }
}

/// Convert an SI configuration to model units.
///
/// A pump-specified drive needs the classical steady state to know the
/// couplings and the static displacement `x_c`; a coupling-specified drive
/// takes `x_c = 0` unless a steady state is supplied.
pub fn normalize(config: &SystemConfig, steady: Option<&SteadyState>) -> Result<ModelParams> {
    config.validate()?;
    let wm = config.omega_m;
    let (g_a, g_b) = match (config.drive, steady) {
        (Drive::Coupling { g_a, g_b }, _) => (g_a, g_b),
        (Drive::Pump { .. }, Some(s)) => s.couplings(config),
        (Drive::Pump { .. }, None) => {
            return Err(Error::Dependency(
                "pump-specified drive requires a solved steady state to derive G_a, G_b".into(),
            ))
        }
    };
    let x_c = steady.map_or(0.0, |s| s.x_c);

    let occupation = |over: Option<f64>, omega: f64, t: f64| -> Result<f64> {
        match over {
            Some(n) => Ok(n),
            None => thermal_occupation(omega, t),
        }
    };
    let nbar_a = occupation(config.nbar_a, config.omega_a, config.temp_a)?;
    let nbar_b = occupation(config.nbar_b, config.omega_b, config.temp_b)?;
    let nbar_c = occupation(config.nbar_c, config.omega_m, config.temp_c)?;
    let nbar_ap = occupation(config.nbar_ap, config.omega_ap(), config.temp_a)?;
    let nbar_bp = occupation(config.nbar_bp, config.omega_bp(), config.temp_b)?;

    Ok(ModelParams {
        delta_a: (config.detuning_a + x_c * config.g_a0) / wm,
        delta_b: (config.detuning_b + x_c * config.g_b0) / wm,
        g_a: g_a / wm,
        g_b: g_b / wm,
        kappa_a: config.kappa_a / wm,
        kappa_b: config.kappa_b / wm,
        gamma: config.gamma / wm,
        nbar_a,
        nbar_b,
        nbar_c,
        five_mode: Some(FiveModeParams {
            g_a0: config.g_a0 / wm,
            g_b0: config.g_b0 / wm,
            x_c,
            nbar_ap,
            nbar_bp: nbar_bp,
        }),
    })
}

/// Which of the approximations behind the reduced models hold for a parameter set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeReport {
    pub adiabatic_elimination_ok: bool,
    /// `omega_m / max(|Delta|, |G|, kappa, gamma)`.
    pub adiabatic_elimination_margin: f64,
    pub sideband_resolved_ok: bool,
    /// `min(omega_m, |Delta_a|, |Delta_b|) / max(kappa_a, kappa_b, gamma)`.
    pub sideband_resolved_margin: f64,
    pub coupling_weak_ok: bool,
    /// `omega_m / max(|G_a|, |G_b|)`.
    pub coupling_weak_margin: f64,
    pub messages: Vec<String>,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

pub fn validate_regime(params: &ModelParams) -> RegimeReport {
    let p = params;
    let fast = [
        p.delta_a.abs(),
        p.delta_b.abs(),
        p.g_a.abs(),
        p.g_b.abs(),
        p.kappa_a,
        p.kappa_b,
        p.gamma,
    ]
    .into_iter()
    .fold(0.0, f64::max);
    let rates = p.kappa_a.max(p.kappa_b).max(p.gamma);
    let slowest_freq = 1.0_f64.min(p.delta_a.abs()).min(p.delta_b.abs());
    let coupling = p.g_a.abs().max(p.g_b.abs());

    let adiabatic_elimination_margin = ratio(1.0, fast);
    let sideband_resolved_margin = ratio(slowest_freq, rates);
    let coupling_weak_margin = ratio(1.0, coupling);

    let adiabatic_elimination_ok = adiabatic_elimination_margin >= REGIME_MARGIN;
    let sideband_resolved_ok = sideband_resolved_margin >= REGIME_MARGIN;
    let coupling_weak_ok = coupling_weak_margin >= REGIME_MARGIN;

    let mut messages = Vec::new();
    let mut note = |ok: bool, what: &str, margin: f64| {
        messages.push(format!(
            "{what}: {} (margin {margin:.4}, required {REGIME_MARGIN})",
            if ok { "ok" } else { "violated" }
        ));
    };
    note(
        adiabatic_elimination_ok,
        "omega_m >> |Delta|, |G|, kappa, gamma",
        adiabatic_elimination_margin,
    );
    note(
        sideband_resolved_ok,
        "omega_m, |Delta_a|, |Delta_b| >> kappa_a, kappa_b, gamma",
        sideband_resolved_margin,
    );
    note(coupling_weak_ok, "|G_a,b| << omega_m", coupling_weak_margin);

    RegimeReport {
        adiabatic_elimination_ok,
        adiabatic_elimination_margin,
        sideband_resolved_ok,
        sideband_resolved_margin,
        coupling_weak_ok,
        coupling_weak_margin,
        messages,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ghz(f: f64) -> f64 {
        TWO_PI * f * 1e9
    }

    #[test]
    fn thermal_occupation_reference_points() {
        let n = thermal_occupation(ghz(300.0), 300.0).unwrap();
        assert!((n - 20.0).abs() / 20.0 < 0.05, "{n}");
        let n = thermal_occupation(ghz(300.0), 3.0).unwrap();
        assert!((n - 0.008).abs() / 0.008 < 0.10, "{n}");
        let n = thermal_occupation(ghz(4.0), 14.0).unwrap();
        assert!((n - 72.0).abs() / 72.0 < 0.05, "{n}");
        assert_eq!(thermal_occupation(ghz(4.0), 0.0).unwrap(), 0.0);
    }

    #[test]
    fn thermal_occupation_rejects_nonpositive_frequency() {
        assert!(matches!(thermal_occupation(0.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(thermal_occupation(-1.0, 1.0), Err(Error::Domain(_))));
        assert!(thermal_occupation(1.0, -1.0).is_err());
    }

    #[test]
    fn thermal_occupation_classical_limit() {
        // hbar*omega / kT = 1e-3
        let t = 10.0;
        let omega = 1e-3 * K_B * t / HBAR;
        let n = thermal_occupation(omega, t).unwrap();
        let classical = K_B * t / (HBAR * omega);
        assert!((n - classical).abs() / classical < 1e-3);
    }

    #[test]
    fn regime_flags() {
        let fig2 = ModelParams {
            delta_a: -1.0,
            delta_b: -0.4,
            g_a: -0.1,
            g_b: 0.1,
            kappa_a: 0.01,
            kappa_b: 0.01,
            gamma: 0.01,
            ..Default::default()
        };
        let r = validate_regime(&fig2);
        assert!(!r.adiabatic_elimination_ok);
        assert!((r.adiabatic_elimination_margin - 1.0).abs() < 1e-12);

        let s1 = ModelParams {
            delta_a: -0.5,
            delta_b: -0.4,
            g_a: 0.08,
            g_b: -0.08,
            kappa_a: 0.01,
            kappa_b: 0.01,
            gamma: 0.01,
            ..Default::default()
        };
        let r = validate_regime(&s1);
        assert!(r.sideband_resolved_ok);
        assert!((r.sideband_resolved_margin - 40.0).abs() < 1e-9);

        let free = ModelParams {
            delta_a: -0.5,
            delta_b: -0.4,
            kappa_a: 0.01,
            kappa_b: 0.01,
            gamma: 0.01,
            ..Default::default()
        };
        let r = validate_regime(&free);
        assert!(r.coupling_weak_ok);
        assert!(r.coupling_weak_margin.is_infinite());
        assert_eq!(r.messages.len(), 3);
    }
}
