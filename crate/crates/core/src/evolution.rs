//! Gaussian time evolution: Lyapunov steady states, fixed-step RK4
//! integration of the covariance under a time-dependent drift, and the
//! three-phase detection protocol with polariton tracking.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{min_hermitian_eigenvalue, symplectic_form};
use crate::models::{build_three_mode, require_stable, LinearModel};
use crate::normal_modes::{diagonalize, PolaritonSpectrum};
use crate::params::{ModelParams, ProtocolConfig, REGIME_MARGIN};

/// Allowed negative excursion of the smallest eigenvalue of `sigma + i Omega`.
pub const PHYSICALITY_TOLERANCE: f64 = 1e-8;

/// Largest `dt * max|lambda(A)|` accepted by the integrator.
pub const MAX_STEP_PHASE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceState {
    pub sigma: DMatrix<f64>,
    pub t: f64,
    pub labels: Vec<String>,
}

/// Normally ordered occupation `(sigma_xx + sigma_pp - 2)/4` of mode `k`.
pub fn occupation(sigma: &DMatrix<f64>, k: usize) -> f64 {
    (sigma[(2 * k, 2 * k)] + sigma[(2 * k + 1, 2 * k + 1)] - 2.0) / 4.0
}

impl CovarianceState {
    /// Uncorrelated thermal state.
    pub fn thermal(labels: &[String], nbar: &[f64]) -> Result<Self> {
        if labels.len() != nbar.len() {
            return Err(Error::DimensionMismatch {
                expected: labels.len(),
                actual: nbar.len(),
            });
        }
        let mut sigma = DMatrix::zeros(2 * nbar.len(), 2 * nbar.len());
        for (k, n) in nbar.iter().enumerate() {
            sigma[(2 * k, 2 * k)] = 2.0 * n + 1.0;
            sigma[(2 * k + 1, 2 * k + 1)] = 2.0 * n + 1.0;
        }
        Ok(CovarianceState {
            sigma,
            t: 0.0,
            labels: labels.to_vec(),
        })
    }

    pub fn occupations(&self) -> Vec<f64> {
        (0..self.labels.len()).map(|k| occupation(&self.sigma, k)).collect()
    }

    /// Smallest eigenvalue of `sigma + i Omega`; nonnegative for physical states.
    pub fn physicality(&self) -> f64 {
        physicality(&self.sigma)
    }
}

pub fn physicality(sigma: &DMatrix<f64>) -> f64 {
    let n = sigma.nrows() / 2;
    let omega = symplectic_form(n);
    let m = DMatrix::from_fn(2 * n, 2 * n, |r, c| num_complex::Complex64::new(sigma[(r, c)], omega[(r, c)]));
    min_hermitian_eigenvalue(&m)
}

/// Solve `A sigma + sigma A^T + D = 0` by a Kronecker-product linear solve.
pub fn lyapunov_steady(model: &LinearModel) -> Result<CovarianceState> {
    require_stable(model)?;
    let a = &model.drift;
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let op = eye.kronecker(a) + a.kronecker(&eye);
    let rhs = -DMatrix::from_column_slice(n * n, 1, model.diffusion.as_slice());
    let sol = op
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("Lyapunov operator is singular".into()))?;
    let sigma = DMatrix::from_column_slice(n, n, sol.as_slice());
    let sigma = (&sigma + sigma.transpose()) * 0.5;
    let residual = (a * &sigma + &sigma * a.transpose() + &model.diffusion).norm();
    let scale = model.diffusion.norm().max(1.0);
    if residual > 1e-10 * scale {
        return Err(Error::NoConvergence {
            iterations: 1,
            residual,
        });
    }
    Ok(CovarianceState {
        sigma,
        t: f64::INFINITY,
        labels: model.labels.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub labels: Vec<String>,
    pub times: Vec<f64>,
    /// `bare[i][k]`: occupation of mode `k` at `times[i]`.
    pub bare: Vec<Vec<f64>>,
    /// `n_A, n_B, n_C` at each sample; empty when not tracked.
    pub polariton: Vec<[f64; 3]>,
    /// Detuning of the optical mode at each sample; empty when not tracked.
    pub delta_a: Vec<f64>,
    /// Smallest physicality eigenvalue seen at the samples.
    pub min_physicality: f64,
    #[serde(skip)]
    pub states: Vec<DMatrix<f64>>,
}

impl Trajectory {
    fn new(labels: Vec<String>) -> Self {
        Trajectory {
            labels,
            times: Vec::new(),
            bare: Vec::new(),
            polariton: Vec::new(),
            delta_a: Vec::new(),
            min_physicality: f64::INFINITY,
            states: Vec::new(),
        }
    }

    fn record(&mut self, t: f64, sigma: &DMatrix<f64>) -> Result<()> {
        let phys = physicality(sigma);
        if phys < -PHYSICALITY_TOLERANCE {
            return Err(Error::Unphysical {
                time: t,
                min_eigenvalue: phys,
            });
        }
        self.min_physicality = self.min_physicality.min(phys);
        self.times.push(t);
        self.bare.push((0..self.labels.len()).map(|k| occupation(sigma, k)).collect());
        self.states.push(sigma.clone());
        Ok(())
    }
}

type MatrixOfTime<'a> = dyn Fn(f64) -> Result<DMatrix<f64>> + Sync + 'a;

fn derivative(a: &DMatrix<f64>, d: &DMatrix<f64>, sigma: &DMatrix<f64>) -> DMatrix<f64> {
    let a_sigma = a * sigma;
    &a_sigma + a_sigma.transpose() + d
}

/// Integrate `steps` RK4 steps of size `dt` from `t0`, recording every
/// `stride` steps and at the end.
#[allow(clippy::too_many_arguments)]
fn integrate(
    drift: &MatrixOfTime,
    diffusion: &MatrixOfTime,
    sigma: &mut DMatrix<f64>,
    t0: f64,
    dt: f64,
    steps: usize,
    stride: usize,
    on_sample: &mut dyn FnMut(f64, &DMatrix<f64>) -> Result<()>,
) -> Result<()> {
    let stride = stride.max(1);
    for step in 0..steps {
        let t = t0 + dt * step as f64;
        let (a0, d0) = (drift(t)?, diffusion(t)?);
        let (am, dm) = (drift(t + 0.5 * dt)?, diffusion(t + 0.5 * dt)?);
        let (a1, d1) = (drift(t + dt)?, diffusion(t + dt)?);
        let k1 = derivative(&a0, &d0, sigma);
        let k2 = derivative(&am, &dm, &(&*sigma + &k1 * (0.5 * dt)));
        let k3 = derivative(&am, &dm, &(&*sigma + &k2 * (0.5 * dt)));
        let k4 = derivative(&a1, &d1, &(&*sigma + &k3 * dt));
        *sigma += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        let done = step + 1;
        if done % stride == 0 || done == steps {
            on_sample(t0 + dt * done as f64, sigma)?;
        }
    }
    Ok(())
}

fn check_step(a: &DMatrix<f64>, dt: f64) -> Result<()> {
    let fastest = a
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if dt * fastest > MAX_STEP_PHASE * (1.0 + 1e-12) {
        return Err(Error::Domain(format!(
            "time step {dt} does not resolve the fastest scale {fastest:.4}; need dt <= {:.4e}",
            MAX_STEP_PHASE / fastest
        )));
    }
    Ok(())
}

/// Evolve `sigma' = A(t) sigma + sigma A(t)^T + D(t)` from `initial` for a
/// duration `t_span` with RK4 steps of about `dt`, sampling every
/// `sample_every` steps.
pub fn evolve_covariance(
    model_of_t: &(dyn Fn(f64) -> Result<LinearModel> + Sync),
    initial: &CovarianceState,
    t_span: f64,
    dt: f64,
    sample_every: usize,
) -> Result<Trajectory> {
    if !(t_span >= 0.0) || !(dt > 0.0) {
        return Err(Error::Domain("t_span must be >= 0 and dt > 0".into()));
    }
    let first = model_of_t(initial.t)?;
    if first.drift.nrows() != initial.sigma.nrows() {
        return Err(Error::DimensionMismatch {
            expected: first.drift.nrows(),
            actual: initial.sigma.nrows(),
        });
    }
    check_step(&first.drift, dt)?;
    let steps = (t_span / dt).ceil() as usize;
    let h = if steps == 0 { 0.0 } else { t_span / steps as f64 };

    let drift = |t: f64| model_of_t(t).map(|m| m.drift);
    let diffusion = |t: f64| model_of_t(t).map(|m| m.diffusion);
    let mut traj = Trajectory::new(initial.labels.clone());
    let mut sigma = initial.sigma.clone();
    traj.record(initial.t, &sigma)?;
    integrate(&drift, &diffusion, &mut sigma, initial.t, h, steps, sample_every, &mut |t, s| {
        traj.record(t, s)
    })?;
    Ok(traj)
}

/// Normal-mode occupations of a three-mode state.
pub fn project_polaritons(state: &CovarianceState, spectrum: &PolaritonSpectrum) -> Result<[f64; 3]> {
    project_sigma(&state.sigma, spectrum)
}

fn project_sigma(sigma: &DMatrix<f64>, spectrum: &PolaritonSpectrum) -> Result<[f64; 3]> {
    if sigma.nrows() != 6 || sigma.ncols() != 6 {
        return Err(Error::DimensionMismatch {
            expected: 6,
            actual: sigma.nrows(),
        });
    }
    let s = &spectrum.transform;
    let rotated = s * sigma * s.transpose();
    Ok([0, 1, 2].map(|k| occupation(&rotated, k)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Protocol {
    pub tau_r: f64,
    pub tau: f64,
    pub tau_d: f64,
    pub delta_a_start: f64,
    pub delta_a_end: f64,
    /// Start of the ramp.
    pub t0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Feasibility {
    /// `1/(4 |G_a G_b|)`.
    pub tau_min: f64,
    /// `1/max(kappa_a, kappa_b)`.
    pub tau_max: f64,
    /// `tau / tau_min` and `tau_max / tau`.
    pub lower_margin: f64,
    pub upper_margin: f64,
    pub feasible: bool,
    pub message: String,
}

impl Protocol {
    pub fn new(tau_r: f64, tau: f64, tau_d: f64, delta_a_start: f64, delta_a_end: f64) -> Result<Self> {
        for (name, v) in [("tau_r", tau_r), ("tau", tau), ("tau_d", tau_d)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Protocol {
            tau_r,
            tau,
            tau_d,
            delta_a_start,
            delta_a_end,
            t0: tau_r,
        })
    }

    pub fn from_config(config: &ProtocolConfig) -> Result<Self> {
        Protocol::new(config.tau_r, config.tau, config.tau_d, config.delta_a_start, config.delta_a_end)
    }

    pub fn duration(&self) -> f64 {
        self.t0 + self.tau + self.tau_d
    }

    /// Linear ramp between `t0` and `t0 + tau`, constant outside.
    pub fn delta_a(&self, t: f64) -> f64 {
        let s = ((t - self.t0) / self.tau).clamp(0.0, 1.0);
        self.delta_a_start + (self.delta_a_end - self.delta_a_start) * s
    }

    pub fn feasibility(&self, params: &ModelParams) -> Feasibility {
        let coupling = (params.g_a * params.g_b).abs();
        let tau_min = if coupling > 0.0 { 1.0 / (4.0 * coupling) } else { f64::INFINITY };
        let kappa = params.kappa_a.max(params.kappa_b);
        let tau_max = if kappa > 0.0 { 1.0 / kappa } else { f64::INFINITY };
        let lower_margin = self.tau / tau_min;
        let upper_margin = tau_max / self.tau;
        let feasible = lower_margin >= REGIME_MARGIN && upper_margin >= REGIME_MARGIN;
        let message = if feasible {
            format!("1/kappa = {tau_max:.4e} >> tau = {} >> 1/(4|G_a G_b|) = {tau_min:.4e}", self.tau)
        } else {
            format!(
                "ramp duration {} outside the adiabatic window: tau/tau_min = {lower_margin:.3}, tau_max/tau = {upper_margin:.3} (each should be >= {REGIME_MARGIN})",
                self.tau
            )
        };
        Feasibility {
            tau_min,
            tau_max,
            lower_margin,
            upper_margin,
            feasible,
            message,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProtocolOptions {
    pub dt: f64,
    pub samples_per_phase: usize,
    /// Accepted population difference between the `dt` and `dt/2` runs.
    pub tolerance: f64,
    pub max_halvings: usize,
}

impl Default for ProtocolOptions {
    fn default() -> Self {
        ProtocolOptions {
            dt: 0.04,
            samples_per_phase: 200,
            tolerance: 1e-4,
            max_halvings: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProtocolRun {
    pub trajectory: Trajectory,
    pub feasibility: Feasibility,
    /// Step size of the accepted run.
    pub dt: f64,
    /// Largest population difference against the run at half the step.
    pub halving_deviation: f64,
    /// Sample indices at the start and end of the ramp.
    pub ramp_start: usize,
    pub ramp_end: usize,
}

impl ProtocolRun {
    /// Polariton occupations at the start and end of the ramp.
    pub fn ramp_polaritons(&self) -> ([f64; 3], [f64; 3]) {
        (
            self.trajectory.polariton[self.ramp_start],
            self.trajectory.polariton[self.ramp_end],
        )
    }

    pub fn ramp_bare(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.trajectory.bare[self.ramp_start].clone(),
            self.trajectory.bare[self.ramp_end].clone(),
        )
    }
}

fn protocol_pass(
    protocol: &Protocol,
    params: &ModelParams,
    initial: &CovarianceState,
    phases: &[(f64, usize, usize)],
) -> Result<(Trajectory, usize, usize)> {
    let base = build_three_mode(&params.with_delta_a(protocol.delta_a_start));
    let drift = |t: f64| -> Result<DMatrix<f64>> {
        let mut a = base.drift.clone();
        let d = protocol.delta_a(t);
        // optical rotation block: x' = -Delta p, p' = Delta x
        a[(0, 1)] = -d;
        a[(1, 0)] = d;
        Ok(a)
    };
    let diffusion = |_: f64| Ok(base.diffusion.clone());

    let mut traj = Trajectory::new(base.labels.clone());
    let record = |traj: &mut Trajectory, t: f64, s: &DMatrix<f64>| -> Result<()> {
        traj.record(t, s)?;
        let d = protocol.delta_a(t);
        let spectrum = diagonalize(&params.with_delta_a(d))?;
        traj.polariton.push(project_sigma(s, &spectrum)?);
        traj.delta_a.push(d);
        Ok(())
    };
    let mut sigma = initial.sigma.clone();
    record(&mut traj, 0.0, &sigma)?;
    let mut t = 0.0;
    let mut boundaries = Vec::new();
    for &(length, steps, stride) in phases {
        integrate(&drift, &diffusion, &mut sigma, t, length / steps as f64, steps, stride, &mut |tt, s| {
            record(&mut traj, tt, s)
        })?;
        t += length;
        boundaries.push(traj.times.len() - 1);
    }
    Ok((traj, boundaries[0], boundaries[1]))
}

fn max_population_difference(coarse: &Trajectory, fine: &Trajectory) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, (bc, bf)) in coarse.bare.iter().zip(&fine.bare).enumerate() {
        for (x, y) in bc.iter().zip(bf) {
            worst = worst.max((x - y).abs());
        }
        for (x, y) in coarse.polariton[i].iter().zip(&fine.polariton[i]) {
            worst = worst.max((x - y).abs());
        }
    }
    worst
}

/// Static receive window, linear ramp of `Delta_a`, static detect window,
/// on the three-mode model. Each run is repeated at half the step; the step
/// is halved until the two agree within `options.tolerance`.
pub fn run_protocol(
    protocol: &Protocol,
    params: &ModelParams,
    initial: Option<&CovarianceState>,
    options: &ProtocolOptions,
) -> Result<ProtocolRun> {
    params.validate()?;
    let feasibility = protocol.feasibility(params);
    let labels: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
    let initial = match initial {
        Some(s) => s.clone(),
        None => CovarianceState::thermal(&labels, &[params.nbar_a, params.nbar_b, params.nbar_c])?,
    };
    if initial.sigma.nrows() != 6 {
        return Err(Error::DimensionMismatch {
            expected: 6,
            actual: initial.sigma.nrows(),
        });
    }
    for d in [protocol.delta_a_start, protocol.delta_a_end] {
        check_step(&build_three_mode(&params.with_delta_a(d)).drift, options.dt)?;
    }

    let lengths = [protocol.tau_r, protocol.tau, protocol.tau_d];
    let phases_at = |level: u32| -> Vec<(f64, usize, usize)> {
        lengths
            .iter()
            .map(|&len| {
                let steps = (len / options.dt).ceil().max(1.0) as usize;
                let stride = (steps / options.samples_per_phase.max(1)).max(1);
                (len, steps << level, stride << level)
            })
            .collect()
    };

    let mut level = 0;
    loop {
        let (coarse, fine) = rayon::join(
            || protocol_pass(protocol, params, &initial, &phases_at(level)),
            || protocol_pass(protocol, params, &initial, &phases_at(level + 1)),
        );
        let (coarse, ramp_start, ramp_end) = coarse?;
        let (fine, _, _) = fine?;
        let deviation = max_population_difference(&coarse, &fine);
        if deviation < options.tolerance {
            return Ok(ProtocolRun {
                trajectory: coarse,
                feasibility,
                dt: options.dt / (1u32 << level) as f64,
                halving_deviation: deviation,
                ramp_start,
                ramp_end,
            });
        }
        if level as usize >= options.max_halvings {
            return Err(Error::NoConvergence {
                iterations: level as usize + 1,
                residual: deviation,
            });
        }
        level += 1;
    }
}
