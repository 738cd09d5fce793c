//! Drift and diffusion matrices of the linearized models in the quadrature
//! basis `v = (x_1, p_1, x_2, p_2, ...)`, `x = a + a^dag`, `p = -i(a - a^dag)`.
//!
//! Second moments evolve as `sigma' = A sigma + sigma A^T + D` with
//! `sigma_ij = <{v_i, v_j}>/2`, so an isolated thermal mode relaxes to
//! `(2 nbar + 1) I`. The conservative part of `A` always comes from a
//! quadratic Hamiltonian `H = v^T H_q v / 2` through `A_0 = 2 Omega H_q`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{eigenvector_near, symplectic_form, to_complex};
use crate::params::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ModelKind {
    FiveMode,
    ThreeMode,
    TwoModeAdiabatic,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::FiveMode => "five-mode",
            ModelKind::ThreeMode => "three-mode",
            ModelKind::TwoModeAdiabatic => "two-mode-adiabatic",
        }
    }
}

/// One white-noise bath `b` with occupation `nbar`, entering the ladder
/// equation of mode `j` as `u_j b + v_j b^dag`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseChannel {
    pub label: String,
    /// Decay rate the bath is associated with (informational).
    pub rate: f64,
    pub occupation: f64,
    pub u: Vec<Complex64>,
    pub v: Vec<Complex64>,
}

impl NoiseChannel {
    fn thermal(n_modes: usize, mode: usize, label: &str, rate: f64, occupation: f64) -> Self {
        let mut u = vec![Complex64::new(0.0, 0.0); n_modes];
        u[mode] = Complex64::new((2.0 * rate).sqrt(), 0.0);
        NoiseChannel {
            label: label.to_string(),
            rate,
            occupation,
            u,
            v: vec![Complex64::new(0.0, 0.0); n_modes],
        }
    }

    /// Quadrature weights `q`: the noise on quadrature `k` is `q_k b + conj(q_k) b^dag`.
    pub fn quadrature_weights(&self) -> DVector<Complex64> {
        let n = self.u.len();
        let i = Complex64::i();
        DVector::from_fn(2 * n, |k, _| {
            let (u, v) = (self.u[k / 2], self.v[k / 2].conj());
            if k % 2 == 0 {
                u + v
            } else {
                -i * (u - v)
            }
        })
    }
}

/// Squeezed-reservoir parameters of the two-mode model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseModel {
    pub m_a: f64,
    pub m_b: f64,
    pub m_ab: f64,
    pub delta_a_prime: f64,
    pub delta_b_prime: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub kind: ModelKind,
    pub labels: Vec<String>,
    pub drift: DMatrix<f64>,
    pub diffusion: DMatrix<f64>,
    /// Quadratic Hamiltonian `H_q` of the conservative part.
    pub hamiltonian: DMatrix<f64>,
    pub channels: Vec<NoiseChannel>,
}

impl LinearModel {
    pub fn n_modes(&self) -> usize {
        self.labels.len()
    }

    pub fn mode_index(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::Domain(format!("{} model has no mode `{label}`", self.kind.name())))
    }

    /// `W` with `<xi_k(t) xi_l(t')> = W_kl delta(t - t')`. Its real part is
    /// the diffusion matrix, its imaginary part carries the commutators.
    pub fn noise_correlation(&self) -> DMatrix<Complex64> {
        let dim = 2 * self.n_modes();
        let mut w = DMatrix::zeros(dim, dim);
        for ch in &self.channels {
            let q = ch.quadrature_weights();
            let qq = &q * q.adjoint();
            w += qq.map(|z| z * (ch.occupation + 1.0)) + qq.map(|z| z.conj() * ch.occupation);
        }
        w
    }

    /// Injection matrix `N` mapping the bath vector `(b_1, b_1^dag, b_2, ...)`
    /// to the quadrature noise.
    pub fn injection(&self) -> DMatrix<Complex64> {
        let dim = 2 * self.n_modes();
        let mut n = DMatrix::zeros(dim, 2 * self.channels.len());
        for (k, ch) in self.channels.iter().enumerate() {
            let q = ch.quadrature_weights();
            for r in 0..dim {
                n[(r, 2 * k)] = q[r];
                n[(r, 2 * k + 1)] = q[r].conj();
            }
        }
        n
    }

    /// `<beta beta^T>` for the bath vector of [`LinearModel::injection`].
    pub fn bath_correlation(&self) -> DMatrix<Complex64> {
        let k = self.channels.len();
        let mut c = DMatrix::zeros(2 * k, 2 * k);
        for (j, ch) in self.channels.iter().enumerate() {
            c[(2 * j, 2 * j + 1)] = Complex64::new(ch.occupation + 1.0, 0.0);
            c[(2 * j + 1, 2 * j)] = Complex64::new(ch.occupation, 0.0);
        }
        c
    }
}

struct Builder {
    labels: Vec<String>,
    h: DMatrix<f64>,
    damping: Vec<f64>,
    channels: Vec<NoiseChannel>,
}

impl Builder {
    fn new(labels: &[&str]) -> Self {
        let n = labels.len();
        Builder {
            labels: labels.iter().map(|s| s.to_string()).collect(),
            h: DMatrix::zeros(2 * n, 2 * n),
            damping: vec![0.0; n],
            channels: Vec::new(),
        }
    }

    fn add(&mut self, r: usize, c: usize, value: f64) {
        self.h[(r, c)] += value;
        if r != c {
            self.h[(c, r)] += value;
        }
    }

    /// `w a^dag a`.
    fn oscillator(&mut self, i: usize, w: f64) {
        self.add(2 * i, 2 * i, w / 2.0);
        self.add(2 * i + 1, 2 * i + 1, w / 2.0);
    }

    /// `g x_i x_j`.
    fn position_coupling(&mut self, i: usize, j: usize, g: f64) {
        if i == j {
            self.add(2 * i, 2 * i, 2.0 * g);
        } else {
            self.add(2 * i, 2 * j, g);
        }
    }

    /// `J (a_i^dag a_j + a_j^dag a_i)`.
    fn beam_splitter(&mut self, i: usize, j: usize, coupling: f64) {
        self.add(2 * i, 2 * j, coupling / 2.0);
        self.add(2 * i + 1, 2 * j + 1, coupling / 2.0);
    }

    fn thermal_bath(&mut self, i: usize, rate: f64, occupation: f64) {
        self.damping[i] += rate;
        let label = format!("{}_in", self.labels[i]);
        let ch = NoiseChannel::thermal(self.labels.len(), i, &label, rate, occupation);
        self.channels.push(ch);
    }

    fn finish(self, kind: ModelKind) -> LinearModel {
        let n = self.labels.len();
        let mut drift = 2.0 * symplectic_form(n) * &self.h;
        for (i, rate) in self.damping.iter().enumerate() {
            drift[(2 * i, 2 * i)] -= rate;
            drift[(2 * i + 1, 2 * i + 1)] -= rate;
        }
        let mut diffusion = DMatrix::zeros(2 * n, 2 * n);
        for ch in &self.channels {
            let q = ch.quadrature_weights();
            let qq = (&q * q.adjoint()).map(|z| z.re);
            diffusion += qq * (2.0 * ch.occupation + 1.0);
        }
        LinearModel {
            kind,
            labels: self.labels,
            drift,
            diffusion,
            hamiltonian: self.h,
            channels: self.channels,
        }
    }
}

/// Cavities `a`, `b` and phonon `c` with the counter-rotating optomechanical
/// terms kept.
pub fn build_three_mode(params: &ModelParams) -> LinearModel {
    let p = params;
    let mut b = Builder::new(&["a", "b", "c"]);
    b.oscillator(0, -p.delta_a);
    b.oscillator(1, -p.delta_b);
    b.oscillator(2, 1.0);
    b.position_coupling(0, 2, p.g_a);
    b.position_coupling(1, 2, p.g_b);
    b.thermal_bath(0, p.kappa_a, p.nbar_a);
    b.thermal_bath(1, p.kappa_b, p.nbar_b);
    b.thermal_bath(2, p.gamma, p.nbar_c);
    b.finish(ModelKind::ThreeMode)
}

/// Adds the pumped ancilla modes `a_p`, `b_p` and their scattering into
/// `a`, `b` through the static displacement `x_c`.
///
/// Terms of second order in the fluctuations are dropped.
pub fn build_five_mode(params: &ModelParams) -> Result<LinearModel> {
    let p = params;
    let f = p.five_mode.ok_or_else(|| {
        Error::config(
            "five_mode",
            "the five-mode model needs g_a0, g_b0, x_c and ancilla occupations",
        )
    })?;
    let (ja, jb) = (f.g_a0 * f.x_c, f.g_b0 * f.x_c);
    let mut b = Builder::new(&["a", "b", "c", "a_p", "b_p"]);
    b.oscillator(0, -p.delta_a);
    b.oscillator(1, -p.delta_b);
    b.oscillator(2, 1.0);
    b.oscillator(3, ja);
    b.oscillator(4, jb);
    b.beam_splitter(0, 3, ja);
    b.beam_splitter(1, 4, jb);
    b.position_coupling(0, 2, p.g_a);
    b.position_coupling(1, 2, p.g_b);
    b.position_coupling(3, 2, p.g_a);
    b.position_coupling(4, 2, p.g_b);
    b.thermal_bath(0, p.kappa_a, p.nbar_a);
    b.thermal_bath(1, p.kappa_b, p.nbar_b);
    b.thermal_bath(2, p.gamma, p.nbar_c);
    b.thermal_bath(3, p.kappa_a, f.nbar_ap);
    b.thermal_bath(4, p.kappa_b, f.nbar_bp);
    Ok(b.finish(ModelKind::FiveMode))
}

pub fn squeezing_params(params: &ModelParams) -> NoiseModel {
    let p = params;
    let thermal = p.gamma * (2.0 * p.nbar_c + 1.0);
    let ratio = |num: f64, den: f64| if num == 0.0 { 0.0 } else { num / den };
    NoiseModel {
        m_a: ratio(p.g_a * p.g_a * thermal, p.kappa_a),
        m_b: ratio(p.g_b * p.g_b * thermal, p.kappa_b),
        m_ab: ratio(p.g_a * p.g_b * thermal, (p.kappa_a * p.kappa_b).sqrt()),
        delta_a_prime: p.delta_a + 2.0 * p.g_a * p.g_a,
        delta_b_prime: p.delta_b + 2.0 * p.g_b * p.g_b,
    }
}

/// Cavities only, with the phonon adiabatically eliminated. The mechanical
/// bath reaches both cavities through `G sqrt(2 gamma) (c_in - c_in^dag)`,
/// which yields the squeezed correlations `m_a`, `m_b`, `m_ab`.
pub fn build_two_mode_adiabatic(params: &ModelParams) -> LinearModel {
    let p = params;
    let mut b = Builder::new(&["a", "b"]);
    b.oscillator(0, -p.delta_a);
    b.oscillator(1, -p.delta_b);
    b.position_coupling(0, 0, -p.g_a * p.g_a);
    b.position_coupling(1, 1, -p.g_b * p.g_b);
    b.position_coupling(0, 1, -2.0 * p.g_a * p.g_b);
    b.thermal_bath(0, p.kappa_a, p.nbar_a);
    b.thermal_bath(1, p.kappa_b, p.nbar_b);

    let s = (2.0 * p.gamma).sqrt();
    let u = vec![Complex64::new(p.g_a * s, 0.0), Complex64::new(p.g_b * s, 0.0)];
    let v = u.iter().map(|z| -z).collect();
    b.channels.push(NoiseChannel {
        label: "c_in".into(),
        rate: p.gamma,
        occupation: p.nbar_c,
        u,
        v,
    });
    b.finish(ModelKind::TwoModeAdiabatic)
}

pub fn build(kind: ModelKind, params: &ModelParams) -> Result<LinearModel> {
    match kind {
        ModelKind::FiveMode => build_five_mode(params),
        ModelKind::ThreeMode => Ok(build_three_mode(params)),
        ModelKind::TwoModeAdiabatic => Ok(build_two_mode_adiabatic(params)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    /// Largest real part among the drift eigenvalues.
    pub abscissa: f64,
    pub stable: bool,
    /// Mode carrying most of the weight of the least-damped eigenvector.
    pub dominant_mode: String,
    pub eigenvalues: Vec<Complex64>,
}

pub fn stability_check(model: &LinearModel) -> StabilityReport {
    let eig = model.drift.complex_eigenvalues();
    let lead = eig
        .iter()
        .copied()
        .max_by(|x, y| x.re.total_cmp(&y.re))
        .unwrap_or_default();
    let vec = eigenvector_near(&to_complex(&model.drift), lead);
    let dominant = (0..model.n_modes())
        .max_by(|&i, &j| {
            let w = |k: usize| vec[2 * k].norm_sqr() + vec[2 * k + 1].norm_sqr();
            w(i).total_cmp(&w(j))
        })
        .unwrap_or(0);
    let tolerance = 1e-13 * model.drift.norm().max(1.0);
    StabilityReport {
        abscissa: lead.re,
        stable: lead.re < -tolerance,
        dominant_mode: model.labels[dominant].clone(),
        eigenvalues: eig.iter().copied().collect(),
    }
}

/// Stability report, or [`Error::Unstable`] if any drift eigenvalue is not damped.
pub fn require_stable(model: &LinearModel) -> Result<StabilityReport> {
    let report = stability_check(model);
    if report.stable {
        Ok(report)
    } else {
        Err(Error::Unstable {
            abscissa: report.abscissa,
            mode: report.dominant_mode,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::min_symmetric_eigenvalue;
    use crate::params::FiveModeParams;
    use proptest::prelude::*;

    fn s1a() -> ModelParams {
        ModelParams {
            delta_a: -0.5,
            delta_b: -0.4,
            g_a: 0.08,
            g_b: -0.08,
            kappa_a: 0.01,
            kappa_b: 0.01,
            gamma: 0.01,
            nbar_a: 0.0,
            nbar_b: 0.04,
            nbar_c: 0.1,
            five_mode: Some(FiveModeParams {
                g_a0: -1e-3,
                g_b0: 2e-3,
                x_c: 0.03,
                nbar_ap: 0.0,
                nbar_bp: 0.04,
            }),
        }
    }

    /// `x = a + a^dag`, `p = -i(a - a^dag)` applied mode by mode to the
    /// ladder vector `(a_1, a_1^dag, ...)`.
    fn ladder_to_quadrature(n: usize) -> DMatrix<Complex64> {
        let i = Complex64::i();
        let one = Complex64::new(1.0, 0.0);
        let mut t = DMatrix::zeros(2 * n, 2 * n);
        for k in 0..n {
            t[(2 * k, 2 * k)] = one;
            t[(2 * k, 2 * k + 1)] = one;
            t[(2 * k + 1, 2 * k)] = -i;
            t[(2 * k + 1, 2 * k + 1)] = i;
        }
        t
    }

    /// Drift in the ladder basis, filled row by row from `d a_j / dt`; the
    /// `a^dag` rows are the conjugates.
    fn ladder_drift(n: usize, rows: &[(usize, Vec<(usize, bool, Complex64)>)]) -> DMatrix<f64> {
        let mut m = DMatrix::<Complex64>::zeros(2 * n, 2 * n);
        for (j, terms) in rows {
            for &(k, dagger, coef) in terms {
                let col = 2 * k + dagger as usize;
                m[(2 * j, col)] += coef;
                let conj_col = 2 * k + (!dagger) as usize;
                m[(2 * j + 1, conj_col)] += coef.conj();
            }
        }
        let t = ladder_to_quadrature(n);
        let tinv = t.clone().try_inverse().unwrap();
        let q = &t * m * tinv;
        assert!(q.iter().all(|z| z.im.abs() < 1e-12));
        q.map(|z| z.re)
    }

    fn both(k: usize, coef: Complex64) -> [(usize, bool, Complex64); 2] {
        [(k, false, coef), (k, true, coef)]
    }

    #[test]
    fn three_mode_matches_ladder_equations() {
        let p = s1a();
        let i = Complex64::i();
        let c = |x: f64| Complex64::new(x, 0.0);
        let mut ra = vec![(0, false, i * p.delta_a - p.kappa_a)];
        ra.extend(both(2, -i * p.g_a));
        let mut rb = vec![(1, false, i * p.delta_b - p.kappa_b)];
        rb.extend(both(2, -i * p.g_b));
        let mut rc = vec![(2, false, -i - c(p.gamma))];
        rc.extend(both(0, -i * p.g_a));
        rc.extend(both(1, -i * p.g_b));
        let expected = ladder_drift(3, &[(0, ra), (1, rb), (2, rc)]);
        let model = build_three_mode(&p);
        assert!((model.drift - expected).norm() < 1e-14);
    }

    #[test]
    fn five_mode_matches_ladder_equations() {
        let p = s1a();
        let f = p.five_mode.unwrap();
        let i = Complex64::i();
        let (ja, jb) = (f.g_a0 * f.x_c, f.g_b0 * f.x_c);
        let mut ra = vec![(0, false, i * p.delta_a - p.kappa_a), (3, false, -i * ja)];
        ra.extend(both(2, -i * p.g_a));
        let mut rb = vec![(1, false, i * p.delta_b - p.kappa_b), (4, false, -i * jb)];
        rb.extend(both(2, -i * p.g_b));
        let mut rc = vec![(2, false, -i - p.gamma)];
        for (k, g) in [(0, p.g_a), (3, p.g_a), (1, p.g_b), (4, p.g_b)] {
            rc.extend(both(k, -i * g));
        }
        let mut rap = vec![(3, false, -i * ja - p.kappa_a), (0, false, -i * ja)];
        rap.extend(both(2, -i * p.g_a));
        let mut rbp = vec![(4, false, -i * jb - p.kappa_b), (1, false, -i * jb)];
        rbp.extend(both(2, -i * p.g_b));
        let expected = ladder_drift(5, &[(0, ra), (1, rb), (2, rc), (3, rap), (4, rbp)]);
        let model = build_five_mode(&p).unwrap();
        assert!((model.drift - expected).norm() < 1e-14);
    }

    #[test]
    fn two_mode_matches_ladder_equations() {
        let p = s1a();
        let i = Complex64::i();
        let mut ra = vec![(0, false, i * p.delta_a - p.kappa_a)];
        ra.extend(both(0, i * 2.0 * p.g_a * p.g_a));
        ra.extend(both(1, i * 2.0 * p.g_a * p.g_b));
        let mut rb = vec![(1, false, i * p.delta_b - p.kappa_b)];
        rb.extend(both(1, i * 2.0 * p.g_b * p.g_b));
        rb.extend(both(0, i * 2.0 * p.g_a * p.g_b));
        let expected = ladder_drift(2, &[(0, ra), (1, rb)]);
        let model = build_two_mode_adiabatic(&p);
        assert!((model.drift - expected).norm() < 1e-14);
    }

    #[test]
    fn hand_built_two_mode_exchange() {
        // two oscillators with an x-x coupling, written out by hand
        let (w1, w2, g) = (0.7, 1.3, 0.05);
        let mut b = Builder::new(&["u", "v"]);
        b.oscillator(0, w1);
        b.oscillator(1, w2);
        b.position_coupling(0, 1, g);
        let m = b.finish(ModelKind::ThreeMode);
        #[rustfmt::skip]
        let expected = DMatrix::from_row_slice(4, 4, &[
            0.0, w1, 0.0, 0.0,
            -w1, 0.0, -2.0 * g, 0.0,
            0.0, 0.0, 0.0, w2,
            -2.0 * g, 0.0, -w2, 0.0,
        ]);
        assert_eq!(m.drift, expected);
        // no x-x or p-p self coupling beyond the rotation
        assert_eq!(m.drift[(0, 0)], 0.0);
        assert_eq!(m.drift[(1, 1)], 0.0);
    }

    #[test]
    fn decoupled_eigenvalues() {
        let p = ModelParams {
            delta_a: -0.5,
            delta_b: -0.4,
            kappa_a: 0.01,
            kappa_b: 0.02,
            gamma: 0.003,
            ..Default::default()
        };
        let m = build_three_mode(&p);
        let mut eig: Vec<_> = m.drift.complex_eigenvalues().iter().copied().collect();
        eig.sort_by(|x, y| x.im.total_cmp(&y.im));
        let expected = [(-0.003, -1.0), (-0.01, -0.5), (-0.02, -0.4), (-0.02, 0.4), (-0.01, 0.5), (-0.003, 1.0)];
        for (z, (re, im)) in eig.iter().zip(expected) {
            assert!((z.re - re).abs() < 1e-12 && (z.im - im).abs() < 1e-12, "{z}");
        }
        let report = stability_check(&m);
        assert!(report.stable);
        assert!((report.abscissa + 0.003).abs() < 1e-12);
    }

    #[test]
    fn decoupled_modes_have_thermal_steady_state() {
        let mut p = s1a();
        p.g_a = 0.0;
        p.g_b = 0.0;
        p.five_mode = Some(FiveModeParams {
            nbar_ap: 0.2,
            nbar_bp: 0.04,
            ..Default::default()
        });
        for model in [build_three_mode(&p), build_five_mode(&p).unwrap()] {
            let nbar: Vec<f64> = model.channels.iter().map(|c| c.occupation).collect();
            let sigma = DMatrix::from_fn(model.drift.nrows(), model.drift.ncols(), |r, c| {
                if r == c {
                    2.0 * nbar[r / 2] + 1.0
                } else {
                    0.0
                }
            });
            let residual = &model.drift * &sigma + &sigma * model.drift.transpose() + &model.diffusion;
            assert!(residual.norm() < 1e-14);
        }
    }

    #[test]
    fn five_mode_contains_three_mode() {
        let p = s1a();
        let three = build_three_mode(&p);
        let five = build_five_mode(&p).unwrap();
        // the a-a_p and b-b_p scattering sits outside the (a, b, c) block
        assert_eq!(five.drift.view((0, 0), (6, 6)), three.drift);
        let mut decoupled = p;
        decoupled.five_mode = Some(FiveModeParams {
            x_c: 0.0,
            g_a0: 0.0,
            g_b0: 0.0,
            ..p.five_mode.unwrap()
        });
        let five = build_five_mode(&decoupled).unwrap();
        assert_eq!(five.drift.view((0, 0), (6, 6)), three.drift);
        assert_eq!(five.diffusion.view((0, 0), (6, 6)), three.diffusion);
    }

    #[test]
    fn five_mode_requires_its_parameters() {
        let p = ModelParams {
            five_mode: None,
            ..s1a()
        };
        assert!(matches!(build_five_mode(&p), Err(Error::Config { .. })));
    }

    #[test]
    fn squeezing_reference_values() {
        let n = squeezing_params(&s1a());
        assert!((n.m_a - 0.00768).abs() < 1e-15);
        assert!((n.m_ab + 0.00768).abs() < 1e-15);
        let ramp_end = ModelParams {
            g_a: -0.05,
            g_b: 0.05,
            kappa_a: 1e-3,
            kappa_b: 1e-3,
            gamma: 1e-3,
            nbar_c: 0.1,
            ..Default::default()
        };
        let n = squeezing_params(&ramp_end);
        assert!((n.m_a - 0.003).abs() < 1e-15 && (n.m_b - 0.003).abs() < 1e-15);
        let n = squeezing_params(&ModelParams { g_a: 0.0, ..s1a() });
        assert_eq!((n.m_a, n.m_ab), (0.0, 0.0));
        let n = squeezing_params(&s1a());
        assert!((n.delta_a_prime - (-0.5 + 2.0 * 0.0064)).abs() < 1e-15);
    }

    #[test]
    fn two_mode_reservoir_correlations() {
        // <a'^dag a'> = nbar_a + m_a and <a' a'> = -m_a, rebuilt from W
        let p = s1a();
        let model = build_two_mode_adiabatic(&p);
        let w = model.noise_correlation();
        let nm = squeezing_params(&p);
        let half = Complex64::new(0.5, 0.0);
        let i = Complex64::i();
        // ladder noise xi_a = (xi_x + i xi_p) / 2
        let lad = |j: usize, dag: bool| {
            let mut r = DVector::<Complex64>::zeros(4);
            r[2 * j] = half;
            r[2 * j + 1] = if dag { -i * half } else { i * half };
            r
        };
        let corr = |l: &DVector<Complex64>, r: &DVector<Complex64>| (l.transpose() * &w * r)[(0, 0)];
        let (ka, kb) = (p.kappa_a, p.kappa_b);
        let ad_a = corr(&lad(0, true), &lad(0, false)) / (2.0 * ka);
        assert!((ad_a.re - (p.nbar_a + nm.m_a)).abs() < 1e-14 && ad_a.im.abs() < 1e-14);
        let aa = corr(&lad(0, false), &lad(0, false)) / (2.0 * ka);
        assert!((aa.re + nm.m_a).abs() < 1e-14);
        let ad_b = corr(&lad(0, true), &lad(1, false)) / (2.0 * (ka * kb).sqrt());
        assert!((ad_b.re - nm.m_ab).abs() < 1e-14);
        let ab = corr(&lad(0, false), &lad(1, false)) / (2.0 * (ka * kb).sqrt());
        assert!((ab.re + nm.m_ab).abs() < 1e-14);
        // the excess is all in p
        let d = &model.diffusion;
        assert!((d[(0, 0)] - 2.0 * ka * (2.0 * p.nbar_a + 1.0)).abs() < 1e-15);
        assert!((d[(1, 1)] - 2.0 * ka * (2.0 * p.nbar_a + 1.0) - 8.0 * ka * nm.m_a).abs() < 1e-15);
        assert!((d[(1, 3)] - 8.0 * (ka * kb).sqrt() * nm.m_ab).abs() < 1e-15);
    }

    #[test]
    fn injection_reproduces_correlation() {
        let model = build_five_mode(&s1a()).unwrap();
        let n = model.injection();
        let w = &n * model.bath_correlation() * n.transpose();
        assert!((w - model.noise_correlation()).norm() < 1e-14);
        let re = model.noise_correlation().map(|z| z.re);
        assert!((re - &model.diffusion).norm() < 1e-14);
    }

    #[test]
    fn two_mode_frequencies_follow_three_mode_branches() {
        for (ga, gb, da, db) in [(-0.05, 0.05, -0.5, -0.4), (0.03, 0.05, -0.3, -0.45), (-0.05, 0.02, -0.2, -0.35)] {
            let p = ModelParams {
                delta_a: da,
                delta_b: db,
                g_a: ga,
                g_b: gb,
                ..Default::default()
            };
            let pos = |m: &LinearModel| {
                let mut f: Vec<f64> = m.drift.complex_eigenvalues().iter().map(|z| z.im).filter(|x| *x > 0.0).collect();
                f.sort_by(f64::total_cmp);
                f
            };
            let three = pos(&build_three_mode(&p));
            let two = pos(&build_two_mode_adiabatic(&p));
            assert_eq!(two.len(), 2);
            for (x, y) in two.iter().zip(&three) {
                assert!((x - y).abs() < 5e-3, "{two:?} vs {three:?}");
            }
        }
    }

    #[test]
    fn blue_detuned_strong_coupling_is_unstable() {
        let p = ModelParams {
            delta_a: 1.0,
            delta_b: -0.4,
            g_a: 0.1,
            g_b: 0.0,
            kappa_a: 0.01,
            kappa_b: 0.01,
            gamma: 0.01,
            ..Default::default()
        };
        let m = build_three_mode(&p);
        let r = stability_check(&m);
        assert!(!r.stable && r.abscissa > 0.0);
        assert!(r.dominant_mode == "a" || r.dominant_mode == "c");
        assert!(matches!(require_stable(&m), Err(Error::Unstable { .. })));
    }

    #[test]
    fn figure_polariton_params_are_stable() {
        let p = ModelParams {
            delta_a: -1.0,
            delta_b: -0.4,
            g_a: -0.1,
            g_b: 0.1,
            kappa_a: 0.01,
            kappa_b: 0.01,
            gamma: 0.01,
            ..Default::default()
        };
        assert!(stability_check(&build_three_mode(&p)).stable);
    }

    fn params_strategy() -> impl Strategy<Value = ModelParams> {
        (
            (-1.5..-0.05f64, -1.5..-0.05f64, -0.15..0.15f64, -0.15..0.15f64),
            (0.0..0.05f64, 0.0..0.05f64, 0.0..0.05f64),
            (0.0..2.0f64, 0.0..2.0f64, 0.0..5.0f64),
            (-0.01..0.01f64, -0.01..0.01f64, -0.5..0.5f64, 0.0..1.0f64, 0.0..1.0f64),
        )
            .prop_map(|((da, db, ga, gb), (ka, kb, g), (na, nb, nc), (a0, b0, x, nap, nbp))| ModelParams {
                delta_a: da,
                delta_b: db,
                g_a: ga,
                g_b: gb,
                kappa_a: ka,
                kappa_b: kb,
                gamma: g,
                nbar_a: na,
                nbar_b: nb,
                nbar_c: nc,
                five_mode: Some(FiveModeParams {
                    g_a0: a0,
                    g_b0: b0,
                    x_c: x,
                    nbar_ap: nap,
                    nbar_bp: nbp,
                }),
            })
    }

    proptest! {
        #[test]
        fn diffusion_symmetric_psd(p in params_strategy()) {
            for kind in [ModelKind::FiveMode, ModelKind::ThreeMode, ModelKind::TwoModeAdiabatic] {
                let m = build(kind, &p).unwrap();
                prop_assert!((&m.diffusion - m.diffusion.transpose()).norm() == 0.0);
                prop_assert!(min_symmetric_eigenvalue(&m.diffusion) >= -1e-12);
                prop_assert!(m.drift.iter().all(|x| x.is_finite()));
                // the commutator part of W is fixed by the damping alone
                let w = m.noise_correlation();
                let n = m.n_modes();
                for k in 0..n {
                    let rate = m.channels.iter().filter(|c| c.u[k].norm() > 0.0 && c.v[k].norm() == 0.0)
                        .map(|c| c.rate).sum::<f64>();
                    prop_assert!((w[(2 * k, 2 * k + 1)].im - 2.0 * rate).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn squeezing_cauchy_schwarz(p in params_strategy()) {
            let n = squeezing_params(&p);
            prop_assert!(n.m_a >= 0.0 && n.m_b >= 0.0);
            prop_assert!(n.m_ab * n.m_ab <= n.m_a * n.m_b * (1.0 + 1e-12) + 1e-300);
        }

        #[test]
        fn conservative_part_is_hamiltonian(p in params_strategy()) {
            let m = build_five_mode(&p.without_dissipation()).unwrap();
            let omega = symplectic_form(5);
            // A_0 Omega is symmetric for a Hamiltonian flow
            let s = &m.drift * &omega;
            prop_assert!((&s - s.transpose()).norm() < 1e-14);
        }
    }
}
