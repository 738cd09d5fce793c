//! Fock-truncated Lindblad integrator for the three-mode model, kept as an
//! independent check on the Gaussian covariance engine.
//!
//! The state is the full density matrix on `(a, b, c)` number states with
//! `n_k <= cutoff[k]`. Damping at rate `kappa` (amplitude) with occupation
//! `n` enters as `2 kappa (n + 1) L[o] + 2 kappa n L[o^dag]`, which matches
//! the quadrature drift `-kappa` and diffusion `2 kappa (2n + 1)`.

use nalgebra::DMatrix;
use nalgebra_sparse::ops::serial::spmm_csr_dense;
use nalgebra_sparse::ops::Op;
use nalgebra_sparse::{CooMatrix, CsrMatrix};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolution::{evolve_covariance, CovarianceState};
use crate::models::build_three_mode;
use crate::params::ModelParams;

/// Largest total Hilbert-space dimension accepted.
pub const MAX_DIMENSION: usize = 216;
/// Top-level population that aborts the integration.
pub const LEAKAGE_LIMIT: f64 = 1e-3;
/// Largest thermal weight allowed to fall outside the truncated space.
pub const MAX_TRUNCATION_LOSS: f64 = 1e-3;
/// Largest `dt` times the Gershgorin bound of `H` accepted by the integrator.
const MAX_FOCK_STEP_PHASE: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FockTrajectory {
    pub cutoff: [usize; 3],
    pub times: Vec<f64>,
    /// `populations[i][k]`: `tr(rho o_k^dag o_k)` at `times[i]`.
    pub populations: Vec<[f64; 3]>,
    /// Largest population found in the top level of any mode.
    pub max_leakage: f64,
    /// Thermal weight dropped by truncating the initial state.
    pub initial_truncation_loss: f64,
}

struct Basis {
    dims: [usize; 3],
}

impl Basis {
    fn new(cutoff: [usize; 3]) -> Self {
        Basis {
            dims: cutoff.map(|c| c + 1),
        }
    }

    fn len(&self) -> usize {
        self.dims.iter().product()
    }

    fn index(&self, n: [usize; 3]) -> usize {
        (n[0] * self.dims[1] + n[1]) * self.dims[2] + n[2]
    }

    fn state(&self, mut i: usize) -> [usize; 3] {
        let c = i % self.dims[2];
        i /= self.dims[2];
        [i / self.dims[1], i % self.dims[1], c]
    }

    /// Apply `o_k` (`raise = false`) or `o_k^dag` to `n`: target and amplitude.
    fn ladder(&self, n: [usize; 3], k: usize, raise: bool) -> Option<([usize; 3], f64)> {
        let mut m = n;
        if raise {
            if n[k] + 1 >= self.dims[k] {
                return None;
            }
            m[k] += 1;
            Some((m, ((n[k] + 1) as f64).sqrt()))
        } else {
            if n[k] == 0 {
                return None;
            }
            m[k] -= 1;
            Some((m, (n[k] as f64).sqrt()))
        }
    }

    fn csr(&self, mut fill: impl FnMut([usize; 3], &mut dyn FnMut([usize; 3], Complex64))) -> CsrMatrix<Complex64> {
        let dim = self.len();
        let mut coo = CooMatrix::new(dim, dim);
        for col in 0..dim {
            let n = self.state(col);
            fill(n, &mut |m, v| coo.push(self.index(m), col, v));
        }
        CsrMatrix::from(&coo)
    }
}

/// A jump operator `sqrt(w) o` as the map `row -> (source column, amplitude)`.
type Jump = Vec<Option<(usize, f64)>>;

struct Lindbladian {
    /// `-i H - (1/2) sum L^dag L`.
    k: CsrMatrix<Complex64>,
    jumps: Vec<Jump>,
    /// Gershgorin bound on the spectrum of `H`.
    energy_bound: f64,
}

fn lindbladian(basis: &Basis, p: &ModelParams) -> Lindbladian {
    let freqs = [-p.delta_a, -p.delta_b, 1.0];
    let couplings = [(0, 2, p.g_a), (1, 2, p.g_b)];
    let i = Complex64::i();

    let hamiltonian = |n: [usize; 3], push: &mut dyn FnMut([usize; 3], Complex64)| {
        let diag: f64 = (0..3).map(|k| freqs[k] * n[k] as f64).sum();
        push(n, Complex64::new(diag, 0.0));
        for &(j, k, g) in &couplings {
            if g == 0.0 {
                continue;
            }
            for rj in [false, true] {
                for rk in [false, true] {
                    if let Some((m, aj)) = basis.ladder(n, j, rj) {
                        if let Some((m, ak)) = basis.ladder(m, k, rk) {
                            push(m, Complex64::new(g * aj * ak, 0.0));
                        }
                    }
                }
            }
        }
    };
    let h = basis.csr(hamiltonian);
    let energy_bound = (0..h.nrows())
        .map(|r| h.row(r).values().iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max);

    let baths = [(p.kappa_a, p.nbar_a), (p.kappa_b, p.nbar_b), (p.gamma, p.nbar_c)];
    let mut jumps = Vec::new();
    let mut decay = vec![0.0; basis.len()];
    for (k, &(rate, nbar)) in baths.iter().enumerate() {
        for (raise, weight) in [(false, 2.0 * rate * (nbar + 1.0)), (true, 2.0 * rate * nbar)] {
            if weight == 0.0 {
                continue;
            }
            let amp = weight.sqrt();
            // row m of o is fed by the column n with o|n> = a|m>, i.e. n = o^dag-shifted m
            jumps.push(
                (0..basis.len())
                    .map(|row| {
                        basis
                            .ladder(basis.state(row), k, !raise)
                            .map(|(n, _)| {
                                let col = basis.index(n);
                                let (_, a) = basis.ladder(n, k, raise).expect("ladder steps are reversible");
                                (col, amp * a)
                            })
                    })
                    .collect(),
            );
            // L^dag L is diagonal for a single ladder operator
            for (s, d) in decay.iter_mut().enumerate() {
                if let Some((_, a)) = basis.ladder(basis.state(s), k, raise) {
                    *d += weight * a * a;
                }
            }
        }
    }
    let k = basis.csr(|n, push| {
        hamiltonian(n, &mut |m, v| push(m, -i * v));
        push(n, Complex64::new(-0.5 * decay[basis.index(n)], 0.0));
    });
    Lindbladian { k, jumps, energy_bound }
}

impl Lindbladian {
    /// `out = K rho + (K rho)^dag + sum L rho L^dag` for Hermitian `rho`.
    fn apply(&self, rho: &DMatrix<Complex64>, out: &mut DMatrix<Complex64>) {
        let zero = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        spmm_csr_dense(zero, &mut *out, one, Op::NoOp(&self.k), Op::NoOp(rho));
        let dim = rho.nrows();
        for c in 0..dim {
            for r in 0..=c {
                let sum = out[(r, c)] + out[(c, r)].conj();
                out[(r, c)] = sum;
                out[(c, r)] = sum.conj();
            }
        }
        for jump in &self.jumps {
            for (c, src_c) in jump.iter().enumerate() {
                let Some((sc, ac)) = *src_c else { continue };
                for (r, src_r) in jump.iter().enumerate() {
                    if let Some((sr, ar)) = *src_r {
                        out[(r, c)] += rho[(sr, sc)] * (ar * ac);
                    }
                }
            }
        }
    }
}

fn thermal_distribution(nbar: f64, cutoff: usize) -> (Vec<f64>, f64) {
    let ratio = nbar / (nbar + 1.0);
    let raw: Vec<f64> = (0..=cutoff).map(|n| ratio.powi(n as i32) / (nbar + 1.0)).collect();
    let kept: f64 = raw.iter().sum();
    (raw.iter().map(|x| x / kept).collect(), 1.0 - kept)
}

/// Bare populations and top-level weights read off the diagonal of `rho`.
fn diagonal_moments(basis: &Basis, rho: &DMatrix<Complex64>) -> ([f64; 3], f64) {
    let mut pops = [0.0; 3];
    let mut top = [0.0; 3];
    for s in 0..basis.len() {
        let n = basis.state(s);
        let w = rho[(s, s)].re;
        for k in 0..3 {
            pops[k] += w * n[k] as f64;
            if n[k] + 1 == basis.dims[k] {
                top[k] += w;
            }
        }
    }
    (pops, top.into_iter().fold(0.0, f64::max))
}

fn validate_cutoff(cutoff: [usize; 3]) -> Result<Basis> {
    let basis = Basis::new(cutoff);
    if cutoff.iter().any(|&c| c == 0) {
        return Err(Error::Domain("Fock cutoff must be at least 1 for every mode".into()));
    }
    if basis.len() > MAX_DIMENSION {
        return Err(Error::Domain(format!(
            "Hilbert-space dimension {} exceeds {MAX_DIMENSION}",
            basis.len()
        )));
    }
    Ok(basis)
}

/// Occupations of the truncated, renormalized thermal start and the weight
/// it drops.
pub fn truncated_thermal(params: &ModelParams, cutoff: [usize; 3]) -> ([f64; 3], f64) {
    let nbar = [params.nbar_a, params.nbar_b, params.nbar_c];
    let mut kept = 1.0;
    let mut means = [0.0; 3];
    for k in 0..3 {
        let (dist, loss) = thermal_distribution(nbar[k], cutoff[k]);
        kept *= 1.0 - loss;
        means[k] = dist.iter().enumerate().map(|(n, w)| n as f64 * w).sum();
    }
    (means, 1.0 - kept)
}

/// Integrate the three-mode master equation from the truncated thermal state
/// at the bath occupations over `[0, t_end]`, sampling every `sample_every`
/// steps.
pub fn fock_oracle(
    params: &ModelParams,
    cutoff: [usize; 3],
    t_end: f64,
    dt: f64,
    sample_every: usize,
) -> Result<FockTrajectory> {
    params.validate()?;
    let basis = validate_cutoff(cutoff)?;
    if !(t_end >= 0.0) || !(dt > 0.0) {
        return Err(Error::Domain("t_end must be >= 0 and dt > 0".into()));
    }
    let (_, loss) = truncated_thermal(params, cutoff);
    if loss >= MAX_TRUNCATION_LOSS {
        return Err(Error::Domain(format!(
            "initial thermal weight outside the cutoff is {loss:.3e}; raise the cutoff or lower the occupations"
        )));
    }
    let liouville = lindbladian(&basis, params);
    if dt * liouville.energy_bound > MAX_FOCK_STEP_PHASE {
        return Err(Error::Domain(format!(
            "time step {dt} does not resolve energies up to {:.3}; need dt <= {:.3e}",
            liouville.energy_bound,
            MAX_FOCK_STEP_PHASE / liouville.energy_bound
        )));
    }

    let nbar = [params.nbar_a, params.nbar_b, params.nbar_c];
    let dists: Vec<Vec<f64>> = (0..3).map(|k| thermal_distribution(nbar[k], cutoff[k]).0).collect();
    let dim = basis.len();
    let mut rho = DMatrix::from_fn(dim, dim, |r, c| {
        if r != c {
            return Complex64::new(0.0, 0.0);
        }
        let n = basis.state(r);
        Complex64::new((0..3).map(|k| dists[k][n[k]]).product(), 0.0)
    });

    let steps = (t_end / dt).ceil() as usize;
    let h = if steps == 0 { 0.0 } else { t_end / steps as f64 };
    let stride = sample_every.max(1);
    let mut traj = FockTrajectory {
        cutoff,
        times: Vec::new(),
        populations: Vec::new(),
        max_leakage: 0.0,
        initial_truncation_loss: loss,
    };
    let record = |traj: &mut FockTrajectory, t: f64, rho: &DMatrix<Complex64>| -> Result<()> {
        let (pops, top) = diagonal_moments(&basis, rho);
        if top > LEAKAGE_LIMIT {
            return Err(Error::Leakage {
                leakage: top,
                limit: LEAKAGE_LIMIT,
                time: t,
            });
        }
        traj.max_leakage = traj.max_leakage.max(top);
        traj.times.push(t);
        traj.populations.push(pops);
        Ok(())
    };
    record(&mut traj, 0.0, &rho)?;
    let mut k = [(); 4].map(|_| DMatrix::zeros(dim, dim));
    let mut probe = DMatrix::zeros(dim, dim);
    for step in 0..steps {
        liouville.apply(&rho, &mut k[0]);
        for (stage, weight) in [(1, 0.5 * h), (2, 0.5 * h), (3, h)] {
            probe.copy_from(&rho);
            probe.zip_apply(&k[stage - 1], |x, d| *x += d * weight);
            liouville.apply(&probe, &mut k[stage]);
        }
        for (stage, weight) in [(0, 1.0), (1, 2.0), (2, 2.0), (3, 1.0)] {
            rho.zip_apply(&k[stage], |x, d| *x += d * (weight * h / 6.0));
        }
        let done = step + 1;
        if done % stride == 0 || done == steps {
            record(&mut traj, h * done as f64, &rho)?;
        }
    }
    Ok(traj)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub cutoff: [usize; 3],
    pub t_end: f64,
    pub dt: f64,
    pub times: Vec<f64>,
    pub fock: Vec<[f64; 3]>,
    pub gaussian: Vec<[f64; 3]>,
    /// Largest `|n_fock - n_gauss|` per bare mode.
    pub max_deviation: [f64; 3],
    /// `0.02 max n + max_leakage`.
    pub tolerance: f64,
    pub max_leakage: f64,
    pub initial_truncation_loss: f64,
    pub agree: bool,
}

/// Run the Fock oracle and the Gaussian engine on the same static
/// three-mode model and compare bare populations sample by sample. The
/// Gaussian run starts from the occupations of the truncated Fock state.
pub fn compare_with_gaussian(
    params: &ModelParams,
    cutoff: [usize; 3],
    t_end: f64,
    dt: f64,
    sample_every: usize,
) -> Result<OracleReport> {
    let (start, _) = truncated_thermal(params, cutoff);
    let (fock, gaussian) = rayon::join(
        || fock_oracle(params, cutoff, t_end, dt, sample_every),
        || {
            let model = build_three_mode(params);
            let initial = CovarianceState::thermal(&model.labels, &start)?;
            evolve_covariance(&|_| Ok(model.clone()), &initial, t_end, dt, sample_every)
        },
    );
    let (fock, gaussian) = (fock?, gaussian?);
    if fock.times.len() != gaussian.times.len() {
        return Err(Error::DimensionMismatch {
            expected: fock.times.len(),
            actual: gaussian.times.len(),
        });
    }
    let gauss: Vec<[f64; 3]> = gaussian.bare.iter().map(|n| [n[0], n[1], n[2]]).collect();
    let mut max_deviation = [0.0f64; 3];
    let mut largest = 0.0f64;
    for (f, g) in fock.populations.iter().zip(&gauss) {
        for k in 0..3 {
            max_deviation[k] = max_deviation[k].max((f[k] - g[k]).abs());
            largest = largest.max(g[k].abs());
        }
    }
    let tolerance = 0.02 * largest + fock.max_leakage;
    let agree = max_deviation.iter().all(|&d| d <= tolerance);
    Ok(OracleReport {
        cutoff,
        t_end,
        dt,
        times: fock.times,
        fock: fock.populations,
        gaussian: gauss,
        max_deviation,
        tolerance,
        max_leakage: fock.max_leakage,
        initial_truncation_loss: fock.initial_truncation_loss,
        agree,
    })
}
