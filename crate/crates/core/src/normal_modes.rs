//! Bogoliubov diagonalization of the dissipationless three-mode Hamiltonian
//! into the polaritons A, B and C.
//!
//! With `H = v^T H_q v / 2`, a normal-mode annihilator `A = f^T v / 2`
//! satisfies `H_q Omega f = (i omega / 2) f`. Writing `f = K g` with
//! `K = H_q^{1/2}` turns this into the Hermitian problem
//! `i K Omega K g = -(omega / 2) g`, which is what gets diagonalized.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{symplectic_form, to_complex};
use crate::models::build_three_mode;
use crate::params::ModelParams;

pub const POLARITON_LABELS: [&str; 3] = ["A", "B", "C"];
pub const BARE_LABELS: [&str; 3] = ["a", "b", "c"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolaritonSpectrum {
    /// Frequencies of A, B, C.
    pub omega: [f64; 3],
    /// `composition[k][j]`: weight `|u_kj|^2 - |v_kj|^2` of polariton `k` on bare mode `j`.
    pub composition: [[f64; 3]; 3],
    /// Rows `(X_A, P_A, X_B, P_B, X_C, P_C)` in terms of the bare quadratures.
    #[serde(skip)]
    pub transform: DMatrix<f64>,
}

impl PolaritonSpectrum {
    /// Ladder weights `(u, v)` with `K = sum_j u_j a_j + v_j a_j^dag`.
    pub fn ladder_weights(&self, k: usize) -> ([Complex64; 3], [Complex64; 3]) {
        let mut u = [Complex64::new(0.0, 0.0); 3];
        let mut v = u;
        for j in 0..3 {
            let lx = Complex64::new(self.transform[(2 * k, 2 * j)], self.transform[(2 * k + 1, 2 * j)]) / 2.0;
            let lp = Complex64::new(self.transform[(2 * k, 2 * j + 1)], self.transform[(2 * k + 1, 2 * j + 1)]) / 2.0;
            let i = Complex64::i();
            u[j] = lx - i * lp;
            v[j] = lx + i * lp;
        }
        (u, v)
    }

    /// `|[K_old, K_new^dag]|` between polariton `k` here and `j` in `other`;
    /// 1 for identical modes, 0 for orthogonal ones.
    fn overlap(&self, k: usize, other: &PolaritonSpectrum, j: usize) -> f64 {
        let (u1, v1) = self.ladder_weights(k);
        let (u2, v2) = other.ladder_weights(j);
        (0..3)
            .map(|m| u1[m] * u2[m].conj() - v1[m] * v2[m].conj())
            .sum::<Complex64>()
            .norm()
    }

    fn permuted(&self, order: [usize; 3]) -> PolaritonSpectrum {
        let mut transform = self.transform.clone();
        for (new, &old) in order.iter().enumerate() {
            transform.set_row(2 * new, &self.transform.row(2 * old));
            transform.set_row(2 * new + 1, &self.transform.row(2 * old + 1));
        }
        PolaritonSpectrum {
            omega: order.map(|k| self.omega[k]),
            composition: order.map(|k| self.composition[k]),
            transform,
        }
    }
}

fn dominant_direction(vec: &DVector<f64>) -> String {
    let (idx, _) = vec
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .unwrap_or((0, &0.0));
    let quad = if idx % 2 == 0 { "x" } else { "p" };
    format!("{quad}_{}", BARE_LABELS[idx / 2])
}

/// Normal modes of the three-mode model, dissipation ignored.
///
/// Labels follow frequency order: B lowest, A middle, C highest.
pub fn diagonalize(params: &ModelParams) -> Result<PolaritonSpectrum> {
    let model = build_three_mode(&params.without_dissipation());
    let h = model.hamiltonian;
    let eig = SymmetricEigen::new(h.clone());
    let (min_idx, min_val) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let scale = eig.eigenvalues.amax().max(1e-300);
    if min_val <= 1e-12 * scale {
        return Err(Error::Spectrum {
            message: format!("Hamiltonian is not positive definite (eigenvalue {min_val:e})"),
            direction: dominant_direction(&eig.eigenvectors.column(min_idx).into_owned()),
        });
    }
    let sqrt = eig.eigenvalues.map(f64::sqrt);
    let k = &eig.eigenvectors * DMatrix::from_diagonal(&sqrt) * eig.eigenvectors.transpose();

    let omega = symplectic_form(3);
    let m = to_complex(&(&k * &omega * &k)) * Complex64::i();
    let herm = SymmetricEigen::new(m);

    let kc = to_complex(&k);
    let mut modes: Vec<(f64, DVector<Complex64>)> = herm
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &lam)| lam < 0.0)
        .map(|(idx, &lam)| {
            let w = -2.0 * lam;
            let f = &kc * herm.eigenvectors.column(idx) * Complex64::new(2.0 / w.sqrt(), 0.0);
            (w, f)
        })
        .collect();
    if modes.len() != 3 {
        return Err(Error::Spectrum {
            message: format!("expected 3 positive normal frequencies, found {}", modes.len()),
            direction: dominant_direction(&eig.eigenvectors.column(min_idx).into_owned()),
        });
    }
    modes.sort_by(|a, b| a.0.total_cmp(&b.0));
    // A (middle), B (lowest), C (highest)
    let ordered = [&modes[1], &modes[0], &modes[2]];

    let mut transform = DMatrix::zeros(6, 6);
    let mut composition = [[0.0; 3]; 3];
    let mut freqs = [0.0; 3];
    for (row, (w, f)) in ordered.iter().enumerate() {
        freqs[row] = *w;
        for col in 0..6 {
            transform[(2 * row, col)] = f[col].re;
            transform[(2 * row + 1, col)] = f[col].im;
        }
    }
    let mut spectrum = PolaritonSpectrum {
        omega: freqs,
        composition,
        transform,
    };
    for (row, weights) in composition.iter_mut().enumerate() {
        let (u, v) = spectrum.ladder_weights(row);
        for j in 0..3 {
            weights[j] = u[j].norm_sqr() - v[j].norm_sqr();
        }
    }
    spectrum.composition = composition;
    Ok(spectrum)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub delta_a: f64,
    pub spectrum: Option<PolaritonSpectrum>,
    pub error: Option<String>,
}

const PERMUTATIONS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

/// Diagonalize along a sorted grid of `Delta_a`, keeping each branch's
/// identity by maximal mode overlap with the previous point. Labels are
/// fixed by frequency order at the first point of each stable stretch.
pub fn spectrum_sweep(params: &ModelParams, delta_a_grid: &[f64]) -> Result<Vec<SweepPoint>> {
    if delta_a_grid.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::Domain("detuning grid must be sorted ascending".into()));
    }
    let raw: Vec<Result<PolaritonSpectrum>> = delta_a_grid
        .par_iter()
        .map(|&d| diagonalize(&params.with_delta_a(d)))
        .collect();

    let mut out = Vec::with_capacity(raw.len());
    let mut previous: Option<PolaritonSpectrum> = None;
    for (&delta_a, result) in delta_a_grid.iter().zip(raw) {
        match result {
            Ok(s) => {
                let tracked = match &previous {
                    None => s,
                    Some(prev) => {
                        let score = |perm: &[usize; 3]| -> (f64, f64) {
                            let overlap: f64 = (0..3).map(|k| prev.overlap(k, &s, perm[k])).sum();
                            let jump: f64 = (0..3).map(|k| (prev.omega[k] - s.omega[perm[k]]).abs()).sum();
                            (overlap, jump)
                        };
                        let best = PERMUTATIONS
                            .iter()
                            .max_by(|p, q| {
                                let (op, jp) = score(p);
                                let (oq, jq) = score(q);
                                if (op - oq).abs() > 1e-9 {
                                    op.total_cmp(&oq)
                                } else {
                                    jq.total_cmp(&jp)
                                }
                            })
                            .unwrap();
                        s.permuted(*best)
                    }
                };
                previous = Some(tracked.clone());
                out.push(SweepPoint {
                    delta_a,
                    spectrum: Some(tracked),
                    error: None,
                });
            }
            Err(e) => {
                previous = None;
                out.push(SweepPoint {
                    delta_a,
                    spectrum: None,
                    error: Some(e.to_string()),
                });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Crossing {
    /// Optical branch meets the phonon near `Delta_a = -omega_m`.
    Mechanical,
    /// Optical branch meets the microwave branch near `Delta_a = Delta_b`.
    Electromagnetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossingGap {
    pub gap: f64,
    pub delta_a: f64,
}

const GAP_WINDOW: f64 = 0.25;
const GAP_SCAN_POINTS: usize = 401;

fn sorted_frequencies(params: &ModelParams, delta_a: f64) -> Result<[f64; 3]> {
    let s = diagonalize(&params.with_delta_a(delta_a))?;
    let mut w = s.omega;
    w.sort_by(f64::total_cmp);
    Ok(w)
}

/// Minimal separation of the two branches meeting at the chosen resonance,
/// found by a coarse scan and golden-section refinement.
pub fn crossing_gap(params: &ModelParams, which: Crossing) -> Result<CrossingGap> {
    let center = match which {
        Crossing::Mechanical => -1.0,
        Crossing::Electromagnetic => params.delta_b,
    };
    let (lo, hi) = (center - GAP_WINDOW, center + GAP_WINDOW);
    let grid: Vec<f64> = (0..GAP_SCAN_POINTS)
        .map(|i| lo + (hi - lo) * i as f64 / (GAP_SCAN_POINTS - 1) as f64)
        .collect();
    let freqs: Vec<Result<[f64; 3]>> = grid.par_iter().map(|&d| sorted_frequencies(params, d)).collect();

    // pick the adjacent pair with the smallest separation in the window
    let mut best: Option<(usize, usize, f64)> = None;
    for (i, w) in freqs.iter().enumerate() {
        let w = match w {
            Ok(w) => w,
            Err(_) => continue,
        };
        for pair in 0..2 {
            let d = w[pair + 1] - w[pair];
            if best.is_none_or(|(_, _, b)| d < b) {
                best = Some((i, pair, d));
            }
        }
    }
    let (idx, pair, _) = best.ok_or_else(|| Error::Spectrum {
        message: "no diagonalizable point in the crossing window".into(),
        direction: "none".into(),
    })?;
    if idx == 0 || idx == GAP_SCAN_POINTS - 1 {
        return Err(Error::Domain(format!(
            "no avoided crossing inside [{lo}, {hi}]: separation is smallest at the window edge"
        )));
    }

    let sep = |d: f64| -> f64 {
        sorted_frequencies(params, d)
            .map(|w| w[pair + 1] - w[pair])
            .unwrap_or(f64::INFINITY)
    };
    let (mut a, mut b) = (grid[idx - 1], grid[idx + 1]);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (sep(c), sep(d));
    while (b - a).abs() > 1e-11 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = sep(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = sep(d);
        }
    }
    let x = 0.5 * (a + b);
    Ok(CrossingGap {
        gap: sep(x),
        delta_a: x,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn polariton_params() -> ModelParams {
        ModelParams {
            delta_a: -0.7,
            delta_b: -0.4,
            g_a: -0.1,
            g_b: 0.1,
            ..Default::default()
        }
    }

    #[test]
    fn uncoupled_modes_are_bare() {
        let p = ModelParams {
            delta_a: -0.7,
            delta_b: -0.4,
            ..Default::default()
        };
        let s = diagonalize(&p).unwrap();
        // B lowest, A middle, C highest
        assert!((s.omega[1] - 0.4).abs() < 1e-12);
        assert!((s.omega[0] - 0.7).abs() < 1e-12);
        assert!((s.omega[2] - 1.0).abs() < 1e-12);
        let expected = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        for k in 0..3 {
            for j in 0..3 {
                assert!((s.composition[k][j] - expected[k][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn transform_is_symplectic_and_weights_sum_to_one() {
        for d in [-1.2, -1.0, -0.7, -0.4, -0.3, -0.1] {
            let s = diagonalize(&polariton_params().with_delta_a(d)).unwrap();
            let o = symplectic_form(3);
            let r = &s.transform * &o * s.transform.transpose() - &o;
            assert!(r.norm() < 1e-10, "{d}: {}", r.norm());
            for k in 0..3 {
                let row: f64 = s.composition[k].iter().sum();
                let col: f64 = (0..3).map(|j| s.composition[j][k]).sum();
                assert!((row - 1.0).abs() < 1e-10 && (col - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn transform_diagonalizes_hamiltonian() {
        let p = polariton_params();
        let s = diagonalize(&p).unwrap();
        let h = build_three_mode(&p).hamiltonian;
        // H_q = S^T diag(omega/2) S
        let mut diag = DMatrix::zeros(6, 6);
        for k in 0..3 {
            diag[(2 * k, 2 * k)] = s.omega[k] / 2.0;
            diag[(2 * k + 1, 2 * k + 1)] = s.omega[k] / 2.0;
        }
        let back = s.transform.transpose() * diag * &s.transform;
        assert!((back - h).norm() < 1e-10);
    }

    #[test]
    fn frequencies_match_undamped_drift() {
        for d in [-1.1, -0.9, -0.45, -0.2] {
            let p = polariton_params().with_delta_a(d);
            let s = diagonalize(&p).unwrap();
            let mut from_drift: Vec<f64> = build_three_mode(&p)
                .drift
                .complex_eigenvalues()
                .iter()
                .map(|z| z.im)
                .filter(|x| *x > 0.0)
                .collect();
            from_drift.sort_by(f64::total_cmp);
            let mut w = s.omega;
            w.sort_by(f64::total_cmp);
            for (x, y) in w.iter().zip(&from_drift) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn blue_detuning_is_rejected_with_direction() {
        let p = ModelParams {
            delta_a: 0.3,
            ..polariton_params()
        };
        match diagonalize(&p) {
            Err(Error::Spectrum { direction, .. }) => assert!(direction.ends_with('a'), "{direction}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_coupling_sweep_is_straight() {
        let p = ModelParams {
            delta_b: -0.4,
            ..Default::default()
        };
        let grid: Vec<f64> = (0..111).map(|i| -1.2 + 0.01 * i as f64).collect();
        let sweep = spectrum_sweep(&p, &grid).unwrap();
        // labels follow the first point (A optical at 1.2 is C there) and are tracked
        let first = sweep[0].spectrum.as_ref().unwrap();
        let optical = (0..3).find(|&k| first.composition[k][0] > 0.99).unwrap();
        let microwave = (0..3).find(|&k| first.composition[k][1] > 0.99).unwrap();
        let phonon = (0..3).find(|&k| first.composition[k][2] > 0.99).unwrap();
        for pt in &sweep {
            let s = pt.spectrum.as_ref().unwrap();
            assert!((s.omega[optical] + pt.delta_a).abs() < 1e-10);
            assert!((s.omega[microwave] - 0.4).abs() < 1e-10);
            assert!((s.omega[phonon] - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn sweep_keeps_branches_continuous() {
        let grid: Vec<f64> = (0..200).map(|i| -1.2 + 1.1 * i as f64 / 199.0).collect();
        let sweep = spectrum_sweep(&polariton_params(), &grid).unwrap();
        for w in sweep.windows(2) {
            let (s0, s1) = (w[0].spectrum.as_ref().unwrap(), w[1].spectrum.as_ref().unwrap());
            for k in 0..3 {
                assert!((s0.omega[k] - s1.omega[k]).abs() < 0.02);
            }
        }
        // avoided crossings: branches stay in frequency order throughout
        for pt in &sweep {
            let s = pt.spectrum.as_ref().unwrap();
            assert!(s.omega[1] < s.omega[0] && s.omega[0] < s.omega[2]);
        }
    }

    #[test]
    fn microwave_like_branch_far_left_of_resonance() {
        let s = diagonalize(&polariton_params().with_delta_a(-0.7)).unwrap();
        assert!(s.composition[1][1] >= 0.9, "{:?}", s.composition);
    }

    #[test]
    fn unsorted_grid_rejected() {
        assert!(spectrum_sweep(&polariton_params(), &[-0.3, -0.5]).is_err());
    }

    #[test]
    fn mechanical_gap_is_near_twice_coupling() {
        let g = crossing_gap(&polariton_params(), Crossing::Mechanical).unwrap();
        assert!((g.gap / 0.2 - 1.0).abs() < 0.2, "{g:?}");
        assert!((g.delta_a + 1.0).abs() < 0.05);
    }

    #[test]
    fn electromagnetic_gap_vanishes_without_microwave_coupling() {
        let p = ModelParams { g_b: 0.0, ..polariton_params() };
        let g = crossing_gap(&p, Crossing::Electromagnetic).unwrap();
        assert!(g.gap < 1e-8, "{g:?}");
    }

    #[test]
    fn electromagnetic_gap_scales_with_coupling_product() {
        // at weak coupling the splitting approaches the leading-order estimate
        let p = ModelParams {
            g_a: -0.01,
            g_b: 0.01,
            ..polariton_params()
        };
        let g = crossing_gap(&p, Crossing::Electromagnetic).unwrap();
        let estimate = 4.0 * 0.01 * 0.01;
        let virtual_phonon = 2.0 * 0.01 * 0.01 * 2.0 / (1.0 - 0.16);
        assert!((g.gap - virtual_phonon).abs() / virtual_phonon < 0.01, "{} vs {virtual_phonon}", g.gap);
        assert!((g.gap / estimate - 1.0).abs() < 0.25);
    }

    proptest! {
        #[test]
        fn symplectic_for_random_stable_params(
            da in -1.5..-0.05f64, db in -1.5..-0.05f64, ga in -0.1..0.1f64, gb in -0.1..0.1f64,
        ) {
            let p = ModelParams { delta_a: da, delta_b: db, g_a: ga, g_b: gb, ..Default::default() };
            if let Ok(s) = diagonalize(&p) {
                let o = symplectic_form(3);
                let r = &s.transform * &o * s.transform.transpose() - &o;
                prop_assert!(r.norm() < 1e-9);
                prop_assert!(s.omega.iter().all(|w| *w > 0.0));
            }
        }
    }
}
