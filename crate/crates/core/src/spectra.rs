//! Frequency-domain solution of a [`LinearModel`]: response functions,
//! normally ordered spectral densities, the colored mechanical noise kernel,
//! the two-port conversion transfer function and the sensitivity budget.
//!
//! Spectra use `S_oo(omega) = (1/2 pi) int dtau e^{-i omega tau} <o^dag(tau) o(0)>`,
//! so a mode rotating as `e^{-i w t}` peaks at `+w` and `int S = <o^dag o>`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::{require_stable, LinearModel};
use crate::params::{ModelParams, SystemConfig, REGIME_MARGIN, TWO_PI};

/// `X(omega) = (-i omega I - A)^{-1} N` with `N` the noise injection matrix.
pub fn response_matrix(model: &LinearModel, omega: f64) -> Result<DMatrix<Complex64>> {
    let inv = resolvent(model, omega)?;
    Ok(inv * model.injection())
}

/// `(-i omega I - A)^{-1}`.
fn resolvent(model: &LinearModel, omega: f64) -> Result<DMatrix<Complex64>> {
    let dim = model.drift.nrows();
    let m = DMatrix::from_fn(dim, dim, |r, c| {
        let diag = if r == c { Complex64::new(0.0, -omega) } else { Complex64::new(0.0, 0.0) };
        diag - model.drift[(r, c)]
    });
    let lu = m.lu();
    let inv = lu
        .try_inverse()
        .ok_or_else(|| Error::Singular(format!("-i omega I - A is singular at omega = {omega}")))?;
    if inv.iter().any(|z| !z.is_finite()) {
        return Err(Error::Singular(format!("-i omega I - A is singular at omega = {omega}")));
    }
    Ok(inv)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsdResult {
    pub model: String,
    pub mode: String,
    pub omega: Vec<f64>,
    pub s: Vec<f64>,
}

/// Row vector picking `o^dag = (x - i p)/2` of mode `idx`.
fn creation_row(dim: usize, idx: usize) -> DVector<Complex64> {
    let mut r = DVector::zeros(dim);
    r[2 * idx] = Complex64::new(0.5, 0.0);
    r[2 * idx + 1] = Complex64::new(0.0, -0.5);
    r
}

/// Normally ordered spectral density of `mode` on `omega_grid`.
pub fn psd(model: &LinearModel, omega_grid: &[f64], mode: &str) -> Result<PsdResult> {
    require_stable(model)?;
    let idx = model.mode_index(mode)?;
    let w = model.noise_correlation();
    let r = creation_row(model.drift.nrows(), idx);
    let s: Result<Vec<f64>> = omega_grid
        .par_iter()
        .map(|&om| {
            // the creation operator responds at -omega
            let y = r.transpose() * resolvent(model, -om)?;
            let val = (&y * &w * y.adjoint())[(0, 0)].re / TWO_PI;
            Ok(val)
        })
        .collect();
    Ok(PsdResult {
        model: model.kind.name().to_string(),
        mode: mode.to_string(),
        omega: omega_grid.to_vec(),
        s: s?,
    })
}

/// Uniform grid on `[lo, hi]` plus refinement of spacing `width/10` within
/// `+-30 width` of every drift eigenfrequency, `width` being the eigenvalue's
/// damping rate.
pub fn adaptive_grid(model: &LinearModel, lo: f64, hi: f64, base_points: usize) -> Vec<f64> {
    let n = base_points.max(2);
    let mut grid: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    for z in model.drift.complex_eigenvalues().iter() {
        // peaks of S sit at -Im(lambda) of the creation-operator response; both signs occur
        let width = z.re.abs().max(1e-9);
        let step = width / 10.0;
        let span = 30.0 * width;
        let count = (2.0 * span / step).round() as usize;
        for center in [z.im, -z.im] {
            for k in 0..=count {
                let x = center - span + step * k as f64;
                if x > lo && x < hi {
                    grid.push(x);
                }
            }
        }
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|a, b| (*a - *b).abs() < 1e-13);
    grid
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OccupationEstimate {
    pub occupation: f64,
    pub warning: Option<String>,
}

/// Trapezoidal `int S d omega`, with a warning when the grid edges do not
/// reach the tails (`S_edge >= 1e-6 max S`).
pub fn mean_occupation_from_psd(psd: &PsdResult) -> OccupationEstimate {
    let (w, s) = (&psd.omega, &psd.s);
    let occupation: f64 = w
        .windows(2)
        .zip(s.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum();
    let max = s.iter().copied().fold(0.0, f64::max);
    let edge = s.first().copied().unwrap_or(0.0).max(s.last().copied().unwrap_or(0.0));
    let warning = (max > 0.0 && edge >= 1e-6 * max).then(|| {
        format!(
            "spectral density at the grid edge is {:.3e} of its maximum; widen the grid",
            edge / max
        )
    });
    OccupationEstimate { occupation, warning }
}

/// Largest sample of `S` with `|omega - center| <= half_width`, as `(omega, S)`.
pub fn peak_maximum(psd: &PsdResult, center: f64, half_width: f64) -> Option<(f64, f64)> {
    psd.omega
        .iter()
        .zip(&psd.s)
        .filter(|(w, _)| (**w - center).abs() <= half_width)
        .map(|(w, s)| (*w, *s))
        .max_by(|a, b| a.1.total_cmp(&b.1))
}

/// Relative difference `|S_test - S_ref| / S_ref` of the maxima near `center`.
pub fn peak_mismatch(reference: &PsdResult, test: &PsdResult, center: f64, half_width: f64) -> Result<f64> {
    let none = || Error::Domain(format!("no grid points within {half_width} of {center}"));
    let (_, r) = peak_maximum(reference, center, half_width).ok_or_else(none)?;
    let (_, t) = peak_maximum(test, center, half_width).ok_or_else(none)?;
    Ok((t - r).abs() / r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeakCheck {
    pub center: f64,
    pub position: f64,
    pub height: f64,
    pub background: f64,
    /// The maximum lies strictly inside the search window.
    pub interior: bool,
}

/// Maximum near `center` against the median of `S` within
/// `background_half_width` of it.
pub fn peak_check(psd: &PsdResult, center: f64, half_width: f64, background_half_width: f64) -> Option<PeakCheck> {
    let (position, height) = peak_maximum(psd, center, half_width)?;
    let mut around: Vec<f64> = psd
        .omega
        .iter()
        .zip(&psd.s)
        .filter(|(w, _)| (**w - position).abs() <= background_half_width)
        .map(|(_, s)| *s)
        .collect();
    around.sort_by(f64::total_cmp);
    let background = around[around.len() / 2];
    let inside: Vec<f64> = psd.omega.iter().copied().filter(|w| (w - center).abs() <= half_width).collect();
    let interior = inside.first().is_some_and(|&w| w < position) && inside.last().is_some_and(|&w| w > position);
    Some(PeakCheck {
        center,
        position,
        height,
        background,
        interior,
    })
}

/// Two-time correlation of the mechanical noise delivered to the optical
/// cavity, as a function of `tau = t_2 - t_1`.
pub fn mechanical_noise_correlation(params: &ModelParams, tau: f64) -> Complex64 {
    let p = params;
    if p.g_a == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let pref = p.g_a * p.g_a / (2.0 * p.kappa_a);
    let i = Complex64::i();
    let envelope = (-p.gamma * tau.abs()).exp();
    pref * envelope * (p.nbar_c * (-i * tau).exp() + (p.nbar_c + 1.0) * (i * tau).exp())
}

/// Microwave-to-optical gain `kappa/(kappa + i omega)` and optical reflection
/// `-i omega/(kappa + i omega)` of the symmetric two-port cavity.
pub fn transfer_function(omega: f64, kappa: f64) -> Result<(Complex64, Complex64)> {
    if !(kappa > 0.0) {
        return Err(Error::Domain(format!("kappa must be positive, got {kappa}")));
    }
    let den = Complex64::new(kappa, omega);
    Ok((Complex64::new(kappa, 0.0) / den, Complex64::new(0.0, -omega) / den))
}

/// Signal and output carrier frequencies `(omega_s, omega_o)` in rad/s.
pub fn conversion_frequencies(config: &SystemConfig, x_c: f64, params: &ModelParams) -> (f64, f64) {
    let wm = config.omega_m;
    let shift = |g: f64| 2.0 * (g * wm).powi(2) / wm;
    (
        config.omega_b - x_c * config.g_b0 - shift(params.g_b),
        config.omega_a - x_c * config.g_a0 - shift(params.g_a),
    )
}

/// Added noise `(G_a^2 + G_b^2) gamma (2 nbar_c + 1) / kappa` (normalized units).
pub fn mech_noise_term(params: &ModelParams) -> f64 {
    let p = params;
    (p.g_a * p.g_a + p.g_b * p.g_b) * p.gamma * (2.0 * p.nbar_c + 1.0) / p.kappa_a
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetReport {
    /// Input microwave occupation.
    pub n_s: f64,
    /// Predicted output optical occupation.
    pub n_o: f64,
    pub mech_noise_term: f64,
    /// Carrier frequencies (rad/s).
    pub omega_s: f64,
    pub omega_o: f64,
    /// `(tau_min, tau_max)` of the adiabatic transfer window (s).
    pub adiabatic_window: (f64, f64),
    pub window_ratio: f64,
    pub window_feasible: bool,
    /// `1/kappa` (s).
    pub dead_time: f64,
    /// `5 max(1/kappa, 1/gamma)` and `5/kappa` (s).
    pub min_receive_window: f64,
    pub min_detect_window: f64,
    /// Margins of a configured protocol, when present.
    pub protocol_tau_ok: Option<bool>,
    pub protocol_receive_ok: Option<bool>,
    pub protocol_detect_ok: Option<bool>,
}

/// Sensitivity budget for symmetric cavity linewidths. `n_s` defaults to the
/// microwave bath occupation.
pub fn noise_budget(config: &SystemConfig, params: &ModelParams, n_s: Option<f64>) -> Result<BudgetReport> {
    let p = params;
    if (p.kappa_a - p.kappa_b).abs() > 1e-12 * p.kappa_a.max(p.kappa_b) {
        return Err(Error::Unsupported(format!(
            "the budget assumes kappa_a = kappa_b; got {} and {} (units of omega_m); choose symmetric linewidths",
            p.kappa_a, p.kappa_b
        )));
    }
    if !(p.kappa_a > 0.0) {
        return Err(Error::Domain("the budget needs a positive cavity linewidth".into()));
    }
    let wm = config.omega_m;
    let n_s = n_s.unwrap_or(p.nbar_b);
    let mech = mech_noise_term(p);
    let x_c = p.five_mode.map_or(0.0, |f| f.x_c);
    let (omega_s, omega_o) = conversion_frequencies(config, x_c, p);

    let coupling = (p.g_a * p.g_b).abs();
    let tau_min = if coupling > 0.0 { 1.0 / (4.0 * coupling) } else { f64::INFINITY };
    let tau_max = 1.0 / p.kappa_a;
    let receive = 5.0 * tau_max.max(if p.gamma > 0.0 { 1.0 / p.gamma } else { f64::INFINITY });
    let detect = 5.0 * tau_max;
    let proto = config.protocol;

    Ok(BudgetReport {
        n_s,
        n_o: n_s + mech,
        mech_noise_term: mech,
        omega_s,
        omega_o,
        adiabatic_window: (tau_min / wm, tau_max / wm),
        window_ratio: tau_max / tau_min,
        window_feasible: tau_min < tau_max,
        dead_time: tau_max / wm,
        min_receive_window: receive / wm,
        min_detect_window: detect / wm,
        protocol_tau_ok: proto.map(|q| q.tau / tau_min >= REGIME_MARGIN && tau_max / q.tau >= REGIME_MARGIN),
        protocol_receive_ok: proto.map(|q| q.tau_r >= receive),
        protocol_detect_ok: proto.map(|q| q.tau_d >= detect),
    })
}
