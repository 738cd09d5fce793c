//! Structured-text configuration files.
//!
//! The file is TOML with four sections (`[mechanics]`, `[optical]`,
//! `[microwave]`, `[drive]`) and an optional `[protocol]`. Every `*_hz` key is
//! an ordinary frequency; the loader multiplies it by 2π.
//!
//! ```toml
//! [mechanics]
//! omega_m_hz = 4.0e9
//! Q = 87.0e3          # or gamma_hz
//! T_c_k = 14.0
//!
//! [optical]
//! omega_a_hz = 1.93e14
//! kappa_a_hz = 850.0e3
//! g_a0_hz = -1.0e3    # default 0
//! T_a_k = 0.0         # default 0
//! detuning_hz = -2.0e9  # or pump_hz
//!
//! [microwave]
//! omega_b_hz = 300.0e9
//! kappa_b_hz = 850.0e3
//! T_b_k = 3.0
//! detuning_hz = -1.6e9
//!
//! [drive]
//! G_a_hz = -200.0e6   # or eta_a_hz / eta_b_hz
//! G_b_hz = 300.0e6
//! ```
//!
//! Optional occupation overrides (`nbar`, `nbar_pump` in the cavity sections,
//! `nbar_c` in `[mechanics]`) replace the Bose-Einstein value computed from
//! the temperature.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{Drive, ProtocolConfig, SystemConfig, TWO_PI};

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    mechanics: Option<RawMechanics>,
    optical: Option<RawOptical>,
    microwave: Option<RawMicrowave>,
    drive: Option<RawDrive>,
    protocol: Option<ProtocolConfig>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMechanics {
    #[serde(skip_serializing_if = "Option::is_none")]
    omega_m_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma_hz: Option<f64>,
    #[serde(rename = "Q", skip_serializing_if = "Option::is_none")]
    q: Option<f64>,
    #[serde(rename = "T_c_k", skip_serializing_if = "Option::is_none")]
    t_c_k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    nbar_c: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOptical {
    #[serde(skip_serializing_if = "Option::is_none")]
    omega_a_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    kappa_a_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    g_a0_hz: Option<f64>,
    #[serde(rename = "T_a_k", skip_serializing_if = "Option::is_none")]
    t_a_k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    detuning_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pump_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    nbar: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    nbar_pump: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMicrowave {
    #[serde(skip_serializing_if = "Option::is_none")]
    omega_b_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    kappa_b_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    g_b0_hz: Option<f64>,
    #[serde(rename = "T_b_k", skip_serializing_if = "Option::is_none")]
    t_b_k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    detuning_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pump_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    nbar: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    nbar_pump: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDrive {
    #[serde(skip_serializing_if = "Option::is_none")]
    eta_a_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    eta_b_hz: Option<f64>,
    #[serde(rename = "G_a_hz", skip_serializing_if = "Option::is_none")]
    g_a_hz: Option<f64>,
    #[serde(rename = "G_b_hz", skip_serializing_if = "Option::is_none")]
    g_b_hz: Option<f64>,
}

pub fn load_config(path: impl AsRef<Path>) -> Result<SystemConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
    parse_config(&text)
}

pub fn save_config(config: &SystemConfig, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, config_to_string(config))
        .map_err(|e| Error::config(path.display().to_string(), e.to_string()))
}

pub fn parse_config(text: &str) -> Result<SystemConfig> {
    let raw: RawConfig =
        toml::from_str(text).map_err(|e| Error::config("<file>", e.message().to_string()))?;

    let mech = raw.mechanics.unwrap_or_default();
    let opt = raw.optical.unwrap_or_default();
    let mw = raw.microwave.unwrap_or_default();
    let drive = raw.drive.unwrap_or_default();

    let mut missing = Vec::new();
    let mut need = |key: &str, v: Option<f64>| {
        if v.is_none() {
            missing.push(key.to_string());
        }
        v.unwrap_or(f64::NAN)
    };
    let omega_m_hz = need("mechanics.omega_m_hz", mech.omega_m_hz);
    let omega_a_hz = need("optical.omega_a_hz", opt.omega_a_hz);
    let kappa_a_hz = need("optical.kappa_a_hz", opt.kappa_a_hz);
    let omega_b_hz = need("microwave.omega_b_hz", mw.omega_b_hz);
    let kappa_b_hz = need("microwave.kappa_b_hz", mw.kappa_b_hz);
    if mech.gamma_hz.is_none() && mech.q.is_none() {
        missing.push("mechanics.gamma_hz (or mechanics.Q)".into());
    }
    if opt.detuning_hz.is_none() && opt.pump_hz.is_none() {
        missing.push("optical.detuning_hz (or optical.pump_hz)".into());
    }
    if mw.detuning_hz.is_none() && mw.pump_hz.is_none() {
        missing.push("microwave.detuning_hz (or microwave.pump_hz)".into());
    }
    let has_eta = drive.eta_a_hz.is_some() || drive.eta_b_hz.is_some();
    let has_g = drive.g_a_hz.is_some() || drive.g_b_hz.is_some();
    if !has_eta && !has_g {
        missing.push("drive.eta_a_hz/eta_b_hz (or drive.G_a_hz/G_b_hz)".into());
    }
    if !missing.is_empty() {
        return Err(Error::config(
            missing.join(", "),
            "missing required keys",
        ));
    }

    let gamma = match (mech.gamma_hz, mech.q) {
        (Some(_), Some(_)) => {
            return Err(Error::config(
                "mechanics",
                "give either gamma_hz or Q, not both",
            ))
        }
        (Some(g), None) => TWO_PI * g,
        (None, Some(q)) => {
            if !(q > 0.0) {
                return Err(Error::config("mechanics.Q", format!("must be > 0, got {q}")));
            }
            TWO_PI * omega_m_hz / q
        }
        (None, None) => unreachable!(),
    };

    let detuning = |section: &str, d: Option<f64>, pump: Option<f64>, carrier_hz: f64| {
        match (d, pump) {
            (Some(_), Some(_)) => Err(Error::config(
                section.to_string(),
                "give either detuning_hz or pump_hz, not both",
            )),
            (Some(d), None) => Ok(TWO_PI * d),
            (None, Some(p)) => Ok(TWO_PI * (p - carrier_hz)),
            (None, None) => unreachable!(),
        }
    };
    let detuning_a = detuning("optical", opt.detuning_hz, opt.pump_hz, omega_a_hz)?;
    let detuning_b = detuning("microwave", mw.detuning_hz, mw.pump_hz, omega_b_hz)?;

    let drive = match (has_eta, has_g) {
        (true, true) => {
            return Err(Error::config(
                "drive",
                "eta_a_hz/eta_b_hz and G_a_hz/G_b_hz are mutually exclusive",
            ))
        }
        (true, false) => match (drive.eta_a_hz, drive.eta_b_hz) {
            (Some(a), Some(b)) => Drive::Pump {
                eta_a: TWO_PI * a,
                eta_b: TWO_PI * b,
            },
            _ => return Err(Error::config("drive", "eta_a_hz and eta_b_hz must both be given")),
        },
        (false, true) => match (drive.g_a_hz, drive.g_b_hz) {
            (Some(a), Some(b)) => Drive::Coupling {
                g_a: TWO_PI * a,
                g_b: TWO_PI * b,
            },
            _ => return Err(Error::config("drive", "G_a_hz and G_b_hz must both be given")),
        },
        (false, false) => unreachable!(),
    };

    let config = SystemConfig {
        omega_m: TWO_PI * omega_m_hz,
        gamma,
        omega_a: TWO_PI * omega_a_hz,
        omega_b: TWO_PI * omega_b_hz,
        detuning_a,
        detuning_b,
        g_a0: TWO_PI * opt.g_a0_hz.unwrap_or(0.0),
        g_b0: TWO_PI * mw.g_b0_hz.unwrap_or(0.0),
        kappa_a: TWO_PI * kappa_a_hz,
        kappa_b: TWO_PI * kappa_b_hz,
        temp_a: opt.t_a_k.unwrap_or(0.0),
        temp_b: mw.t_b_k.unwrap_or(0.0),
        temp_c: mech.t_c_k.unwrap_or(0.0),
        nbar_a: opt.nbar,
        nbar_b: mw.nbar,
        nbar_c: mech.nbar_c,
        nbar_ap: opt.nbar_pump,
        nbar_bp: mw.nbar_pump,
        drive,
        protocol: raw.protocol,
    };
    config.validate()?;
    Ok(config)
}

pub fn config_to_string(config: &SystemConfig) -> String {
    let hz = |w: f64| Some(w / TWO_PI);
    let (eta_a_hz, eta_b_hz, g_a_hz, g_b_hz) = match config.drive {
        Drive::Pump { eta_a, eta_b } => (hz(eta_a), hz(eta_b), None, None),
        Drive::Coupling { g_a, g_b } => (None, None, hz(g_a), hz(g_b)),
    };
    let raw = RawConfig {
        mechanics: Some(RawMechanics {
            omega_m_hz: hz(config.omega_m),
            gamma_hz: hz(config.gamma),
            q: None,
            t_c_k: Some(config.temp_c),
            nbar_c: config.nbar_c,
        }),
        optical: Some(RawOptical {
            omega_a_hz: hz(config.omega_a),
            kappa_a_hz: hz(config.kappa_a),
            g_a0_hz: hz(config.g_a0),
            t_a_k: Some(config.temp_a),
            detuning_hz: hz(config.detuning_a),
            pump_hz: None,
            nbar: config.nbar_a,
            nbar_pump: config.nbar_ap,
        }),
        microwave: Some(RawMicrowave {
            omega_b_hz: hz(config.omega_b),
            kappa_b_hz: hz(config.kappa_b),
            g_b0_hz: hz(config.g_b0),
            t_b_k: Some(config.temp_b),
            detuning_hz: hz(config.detuning_b),
            pump_hz: None,
            nbar: config.nbar_b,
            nbar_pump: config.nbar_bp,
        }),
        drive: Some(RawDrive {
            eta_a_hz,
            eta_b_hz,
            g_a_hz,
            g_b_hz,
        }),
        protocol: config.protocol,
    };
    toml::to_string(&raw).expect("config serializes to TOML")
}

#[cfg(test)]
mod tests {
    use super::*;

    const SENSITIVITY: &str = r#"
[mechanics]
omega_m_hz = 4.0e9
Q = 87.0e3
T_c_k = 14.0

[optical]
omega_a_hz = 1.93e14
kappa_a_hz = 850.0e3
detuning_hz = -2.0e9

[microwave]
omega_b_hz = 300.0e9
kappa_b_hz = 850.0e3
T_b_k = 3.0
detuning_hz = -1.6e9

[drive]
G_a_hz = -200.0e6
G_b_hz = 300.0e6
"#;

    #[test]
    fn loads_minimal_file() {
        let c = parse_config(SENSITIVITY).unwrap();
        assert!((c.omega_m - TWO_PI * 4e9).abs() < 1e-3);
        assert!((c.gamma / TWO_PI - 4e9 / 87e3).abs() < 1e-6);
        assert_eq!(c.temp_a, 0.0);
        assert_eq!(c.g_a0, 0.0);
        match c.drive {
            Drive::Coupling { g_a, g_b } => {
                assert!((g_a / TWO_PI + 200e6).abs() < 1e-6);
                assert!((g_b / TWO_PI - 300e6).abs() < 1e-6);
            }
            _ => panic!("expected coupling drive"),
        }
        assert!(c.protocol.is_none());
    }

    #[test]
    fn both_drive_specifications_rejected() {
        let text = SENSITIVITY.replace("[drive]", "[drive]\neta_a_hz = 1.0\neta_b_hz = 1.0");
        let err = parse_config(&text).unwrap_err();
        match err {
            Error::Config { key, .. } => assert_eq!(key, "drive"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn empty_file_lists_required_keys() {
        let err = parse_config("").unwrap_err();
        let Error::Config { key, message } = err else {
            panic!("expected config error")
        };
        assert_eq!(message, "missing required keys");
        for k in [
            "mechanics.omega_m_hz",
            "optical.omega_a_hz",
            "optical.kappa_a_hz",
            "microwave.omega_b_hz",
            "microwave.kappa_b_hz",
            "mechanics.gamma_hz",
            "drive.",
        ] {
            assert!(key.contains(k), "{key} lacks {k}");
        }
    }

    #[test]
    fn unknown_key_is_a_schema_violation() {
        let text = SENSITIVITY.replace("T_c_k = 14.0", "T_c_k = 14.0\ntemperature = 3");
        assert!(matches!(parse_config(&text), Err(Error::Config { .. })));
    }

    #[test]
    fn pump_frequency_alternative() {
        let text = SENSITIVITY.replace("detuning_hz = -1.6e9", "pump_hz = 298.4e9");
        let c = parse_config(&text).unwrap();
        assert!((c.detuning_b / TWO_PI + 1.6e9).abs() < 1.0);
    }

    #[test]
    fn gamma_and_q_are_exclusive() {
        let text = SENSITIVITY.replace("Q = 87.0e3", "Q = 87.0e3\ngamma_hz = 46.0e3");
        assert!(parse_config(&text).is_err());
    }

    #[test]
    fn save_then_load_roundtrip() {
        let c = parse_config(SENSITIVITY).unwrap();
        let back = parse_config(&config_to_string(&c)).unwrap();
        assert_close_config(&c, &back);
    }

    pub(crate) fn assert_close_config(a: &SystemConfig, b: &SystemConfig) {
        let close = |x: f64, y: f64| x == y || (x - y).abs() <= 1e-14 * x.abs().max(y.abs());
        let fields = |c: &SystemConfig| {
            vec![
                c.omega_m, c.gamma, c.omega_a, c.omega_b, c.detuning_a, c.detuning_b, c.g_a0,
                c.g_b0, c.kappa_a, c.kappa_b, c.temp_a, c.temp_b, c.temp_c,
            ]
        };
        for (x, y) in fields(a).into_iter().zip(fields(b)) {
            assert!(close(x, y), "{x} vs {y}");
        }
        assert_eq!(a.nbar_a, b.nbar_a);
        assert_eq!(a.nbar_c, b.nbar_c);
        assert_eq!(a.protocol, b.protocol);
        match (a.drive, b.drive) {
            (Drive::Coupling { g_a, g_b }, Drive::Coupling { g_a: h_a, g_b: h_b })
            | (Drive::Pump { eta_a: g_a, eta_b: g_b }, Drive::Pump { eta_a: h_a, eta_b: h_b }) => {
                assert!(close(g_a, h_a) && close(g_b, h_b));
            }
            _ => panic!("drive kind changed"),
        }
    }
}
