//! Floquet-Bloch spectrum of the linearized traveling-wave operator.
//!
//! Perturbations `v = exp(i xi theta) w(theta)` with 1-periodic `w` lead to
//! the pencil `L_xi w = lambda H_xi w`, where
//!
//! ```text
//! L_xi = gamma + k^2 D_xi^2 (c - phi - beta k^2 D_xi^2),   H_xi = k D_xi,
//! D_xi = d/dtheta + i xi.
//! ```
//!
//! In Fourier coefficients `D_xi = diag(i (2 pi n + xi))` and `phi` acts as
//! its Toeplitz matrix, which gives Hill's method.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{PeriodicGrid, SpectralField};
use crate::wave::{ModelParams, TravelingWave, WaveJet};
use crate::whitham::{
    classify, eigenvalues2, norm_inf, Classification, Matrix2, WaveRef, WhithamMatrix,
    DEFAULT_CLASSIFY_TOL,
};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Fourier matrices of the Bloch pencil at one `xi`.
#[derive(Debug, Clone)]
pub struct BlochMatrices {
    pub xi: f64,
    pub l: DMatrix<Complex64>,
    /// Diagonal of `H_xi`: `i k (2 pi n + xi)`, `n = -N..=N`.
    pub h: DVector<Complex64>,
    pub n_modes: usize,
    pub wave_ref: WaveRef,
}

impl BlochMatrices {
    pub fn h_matrix(&self) -> DMatrix<Complex64> {
        DMatrix::from_diagonal(&self.h)
    }

    /// `L_xi f` on the coefficients of `f`.
    pub fn apply(&self, f: &SpectralField) -> DVector<Complex64> {
        &self.l
            * f.resample(PeriodicGrid::with_modes(self.n_modes))
                .to_vector()
    }

    /// `L_xi^H f`.
    pub fn apply_adjoint(&self, f: &SpectralField) -> DVector<Complex64> {
        self.l.adjoint()
            * f.resample(PeriodicGrid::with_modes(self.n_modes))
                .to_vector()
    }

    /// Round-off scale `|| |L| |f| ||_inf` for judging `L f` against zero.
    pub fn apply_scale(&self, f: &SpectralField, adjoint: bool) -> f64 {
        let v = f
            .resample(PeriodicGrid::with_modes(self.n_modes))
            .to_vector();
        let n = self.l.nrows();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let e = if adjoint {
                            self.l[(j, i)]
                        } else {
                            self.l[(i, j)]
                        };
                        e.norm() * v[j].norm()
                    })
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }
}

/// Assembles `L_xi` and `H_xi` with `n_modes` retained modes.
pub fn assemble_bloch(w: &TravelingWave, xi: f64, n_modes: usize) -> Result<BlochMatrices> {
    if !(xi.abs() <= PI) {
        return Err(Error::InvalidArgument(format!(
            "xi = {xi} outside [-pi, pi]"
        )));
    }
    if n_modes == 0 {
        return Err(Error::InvalidGrid("n_modes must be positive".into()));
    }
    let ModelParams { gamma, beta } = w.params();
    let (k, c) = (w.k(), w.speed());
    let k2 = k * k;
    let phi = w.phi().resample(PeriodicGrid::with_modes(n_modes));
    let mut l = phi.toeplitz_of();
    let len = 2 * n_modes + 1;
    let mut h = DVector::from_element(len, ZERO);
    for j in 0..len {
        let q = 2.0 * PI * (j as f64 - n_modes as f64) + xi;
        let q2 = q * q;
        for col in 0..len {
            l[(j, col)] *= k2 * q2;
        }
        l[(j, j)] += gamma - k2 * q2 * (c + beta * k2 * q2);
        h[j] = Complex64::new(0.0, k * q);
    }
    Ok(BlochMatrices {
        xi,
        l,
        h,
        n_modes,
        wave_ref: WaveRef::from(w),
    })
}

fn eigenvalues(a: DMatrix<Complex64>) -> Result<Vec<Complex64>> {
    let schur = Schur::try_new(a, f64::EPSILON, 10_000).ok_or(Error::EigenFailure)?;
    let (_, t) = schur.unpack();
    Ok(t.diagonal().iter().copied().collect())
}

/// Every eigenvalue of the pencil; at `xi = 0` the mean mode is deflated.
pub fn pencil_spectrum(m: &BlochMatrices) -> Result<Vec<Complex64>> {
    let len = m.l.nrows();
    let singular = m.h.iter().position(|h| h.norm() == 0.0);
    match singular {
        None => {
            let mut a = m.l.clone();
            for j in 0..len {
                let inv = 1.0 / m.h[j];
                a.row_mut(j).iter_mut().for_each(|e| *e *= inv);
            }
            eigenvalues(a)
        }
        Some(z) => {
            // the n = 0 row of L is gamma e_0^T, forcing w_0 = 0
            let off: f64 = (0..len)
                .filter(|&j| j != z)
                .map(|j| m.l[(z, j)].norm())
                .fold(0.0, f64::max);
            let diag = m.l[(z, z)].norm();
            if off > 1e-12 * diag.max(1.0) || diag == 0.0 {
                return Err(Error::XiZeroDeflationFailed(off));
            }
            let keep: Vec<usize> = (0..len).filter(|&j| j != z).collect();
            let a = DMatrix::from_fn(len - 1, len - 1, |i, j| {
                m.l[(keep[i], keep[j])] / m.h[keep[i]]
            });
            eigenvalues(a)
        }
    }
}

/// Eigenvalues with `|lambda| < window_radius`, sorted by modulus.
pub fn pencil_eigs(m: &BlochMatrices, window_radius: f64) -> Result<Vec<Complex64>> {
    if !(window_radius > 0.0) {
        return Err(Error::InvalidArgument(
            "window radius must be positive".into(),
        ));
    }
    let mut ev: Vec<Complex64> = pencil_spectrum(m)?
        .into_iter()
        .filter(|l| l.norm() < window_radius)
        .collect();
    ev.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    Ok(ev)
}

/// Generalized kernel of the pencil at `xi = 0` and of its adjoint.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelBasis {
    pub phi1: SpectralField,
    pub phi2: SpectralField,
    pub psi1: SpectralField,
    pub psi2: SpectralField,
    /// `<Psi_j, d/dtheta Phi_l>`.
    pub gram: [[f64; 2]; 2],
}

/// Tolerance on the Gram normalization.
pub const GRAM_TOL: f64 = 1e-8;

pub fn kernel_basis(w: &TravelingWave, jet: &WaveJet) -> Result<KernelBasis> {
    let phi = w.phi();
    let phi1 = phi.differentiate(1);
    let phi2 = jet.phi_p.clone();
    let psi1 = jet.phi_p.antiderivative(2)?;
    let psi2 = -&phi.antiderivative(1)?;
    let d = [phi1.differentiate(1), phi2.differentiate(1)];
    let mut gram = [[0.0; 2]; 2];
    for (j, psi) in [&psi1, &psi2].into_iter().enumerate() {
        for l in 0..2 {
            gram[j][l] = psi.inner_product(&d[l])?.re;
        }
    }
    let off = (gram[0][0] - 1.0)
        .abs()
        .max((gram[1][1] - 1.0).abs())
        .max(gram[0][1].abs())
        .max(gram[1][0].abs());
    if off > GRAM_TOL {
        return Err(Error::NormalizationViolated { gram });
    }
    Ok(KernelBasis {
        phi1,
        phi2,
        psi1,
        psi2,
        gram,
    })
}

/// The matrix whose eigenvalues `mu_j` give the slopes
/// `lambda_j(xi) ~ i k xi mu_j` of the two spectral curves at the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulationMatrix {
    pub entries: Matrix2,
    pub mu: [Complex64; 2],
    pub classification: Classification,
    pub wave_ref: WaveRef,
}

/// `L1 f = 2k ((c - phi) f)' - 4 beta k^3 f'''`.
fn op_l1(w: &TravelingWave, f: &SpectralField) -> SpectralField {
    let k = w.k();
    let beta = w.params().beta;
    let c_minus_phi = &SpectralField::constant(w.grid(), w.speed()) - w.phi();
    &c_minus_phi.mul(f).differentiate(1).scale(2.0 * k)
        - &f.differentiate(3).scale(4.0 * beta * k.powi(3))
}

/// `L2 f = (c - phi) f - 6 beta k^2 f''`.
fn op_l2(w: &TravelingWave, f: &SpectralField) -> SpectralField {
    let k = w.k();
    let beta = w.params().beta;
    let c_minus_phi = &SpectralField::constant(w.grid(), w.speed()) - w.phi();
    &c_minus_phi.mul(f) - &f.differentiate(2).scale(6.0 * beta * k * k)
}

pub fn modulation_matrix(
    w: &TravelingWave,
    jet: &WaveJet,
    basis: &KernelBasis,
) -> Result<ModulationMatrix> {
    let k = w.k();
    let norm2 = w.phi().dot(w.phi());
    let psi2 = &basis.psi2;
    let m21 = norm2 * jet.c_k
        + psi2
            .inner_product(&(&op_l1(w, &jet.phi_k) + &op_l2(w, &basis.phi1)))?
            .re
            / k;
    let m22 = norm2 * jet.c_p + psi2.inner_product(&op_l1(w, &basis.phi2))?.re / k;
    let entries = [[-k * jet.c_k, -k * jet.c_p], [m21, m22]];
    Ok(ModulationMatrix {
        entries,
        mu: eigenvalues2(&entries),
        classification: classify(&entries, DEFAULT_CLASSIFY_TOL),
        wave_ref: WaveRef::from(w),
    })
}

/// Residuals of `W = M0 - c I`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkResidual {
    /// `||W - (M0 - cI)||_inf / max(||W||_inf, 1)`.
    pub residual: f64,
    /// `|W21 - M21|` and `|W22 - (M22 - c)|`.
    pub row2_residuals: [f64; 2],
}

pub fn verify_whitham_link(
    wm: &WhithamMatrix,
    m0: &ModulationMatrix,
    c: f64,
) -> Result<LinkResidual> {
    if wm.wave_ref != m0.wave_ref || wm.wave_ref.c != c {
        return Err(Error::WaveMismatch);
    }
    let mut diff = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let shift = if i == j { c } else { 0.0 };
            diff[i][j] = wm.entries[i][j] - (m0.entries[i][j] - shift);
        }
    }
    Ok(LinkResidual {
        residual: norm_inf(&diff) / norm_inf(&wm.entries).max(1.0),
        row2_residuals: [diff[1][0].abs(), diff[1][1].abs()],
    })
}

/// The two near-origin eigenvalue branches over a `xi` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralCurve {
    pub xi_grid: Vec<f64>,
    pub branches: [Vec<Complex64>; 2],
    pub window_radius: f64,
    /// `lambda_j(xi) / (i k xi)` at the smallest `xi`.
    pub slopes: [Complex64; 2],
}

impl SpectralCurve {
    pub fn max_abs_re(&self) -> f64 {
        self.branches
            .iter()
            .flatten()
            .map(|l| l.re.abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.branches
            .iter()
            .flatten()
            .map(|l| l.norm())
            .fold(0.0, f64::max)
    }
}

/// Radius `2 k xi_max (1 + max |mu|)` that contains both branches up to
/// `xi_max` with room for the `o(xi)` remainder.
pub fn default_window_radius(k: f64, xi_max: f64, m0: &ModulationMatrix) -> f64 {
    let mu = m0.mu.iter().map(|m| m.norm()).fold(0.0, f64::max);
    2.0 * k * xi_max * (1.0 + mu)
}

/// The two windowed eigenvalues at `xi`, or `WindowAmbiguous`.
pub fn window_pair(w: &TravelingWave, xi: f64, window_radius: f64) -> Result<[Complex64; 2]> {
    let m = assemble_bloch(w, xi, w.grid().n_modes())?;
    let ev = pencil_eigs(&m, window_radius)?;
    if ev.len() != 2 {
        return Err(Error::WindowAmbiguous {
            xi,
            count: ev.len(),
            radius: window_radius,
        });
    }
    Ok([ev[0], ev[1]])
}

fn match_to(prev: &[Complex64; 2], next: [Complex64; 2]) -> [Complex64; 2] {
    let keep = (prev[0] - next[0]).norm() + (prev[1] - next[1]).norm();
    let swap = (prev[0] - next[1]).norm() + (prev[1] - next[0]).norm();
    if swap < keep {
        [next[1], next[0]]
    } else {
        next
    }
}

/// Orders a pair by imaginary part, then real part.
fn canonical(mut pair: [Complex64; 2]) -> [Complex64; 2] {
    let key = |z: &Complex64| (z.im, z.re);
    if key(&pair[1]) < key(&pair[0]) {
        pair.swap(0, 1);
    }
    pair
}

/// Joins per-`xi` eigenvalue pairs into branches by nearest continuation.
pub fn match_branches(pairs: &[[Complex64; 2]]) -> [Vec<Complex64>; 2] {
    let mut branches = [
        Vec::with_capacity(pairs.len()),
        Vec::with_capacity(pairs.len()),
    ];
    let mut prev: Option<[Complex64; 2]> = None;
    for &pair in pairs {
        let cur = match prev {
            None => canonical(pair),
            Some(p) => match_to(&p, pair),
        };
        branches[0].push(cur[0]);
        branches[1].push(cur[1]);
        prev = Some(cur);
    }
    branches
}

pub fn spectral_curves(
    w: &TravelingWave,
    xi_grid: &[f64],
    window_radius: f64,
) -> Result<SpectralCurve> {
    if xi_grid.is_empty() {
        return Err(Error::InvalidArgument("empty xi grid".into()));
    }
    if xi_grid.windows(2).any(|p| p[1] <= p[0])
        || xi_grid[0] <= 0.0
        || xi_grid[xi_grid.len() - 1] >= PI
    {
        return Err(Error::InvalidArgument(
            "xi grid must be increasing inside (0, pi)".into(),
        ));
    }
    let pairs = xi_grid
        .iter()
        .map(|&xi| window_pair(w, xi, window_radius))
        .collect::<Result<Vec<_>>>()?;
    curve_from_pairs(w.k(), xi_grid, &pairs, window_radius)
}

/// Builds the curve from eigenvalue pairs computed elsewhere (e.g. in
/// parallel), matching in grid order.
pub fn curve_from_pairs(
    k: f64,
    xi_grid: &[f64],
    pairs: &[[Complex64; 2]],
    window_radius: f64,
) -> Result<SpectralCurve> {
    if pairs.len() != xi_grid.len() || pairs.is_empty() {
        return Err(Error::InvalidArgument(
            "one eigenvalue pair per xi required".into(),
        ));
    }
    let branches = match_branches(pairs);
    let ikxi = Complex64::new(0.0, k * xi_grid[0]);
    let slopes = [branches[0][0] / ikxi, branches[1][0] / ikxi];
    Ok(SpectralCurve {
        xi_grid: xi_grid.to_vec(),
        branches,
        window_radius,
        slopes,
    })
}

/// Slopes `lambda_j(xi)/(i k xi)` extrapolated to `xi = 0` from `xi` in
/// `{4h, 2h, h}`, removing the linear and quadratic error terms.
pub fn richardson_slopes(w: &TravelingWave, h: f64, window_radius: f64) -> Result<[Complex64; 2]> {
    let xs = [h, 2.0 * h, 4.0 * h];
    let mut pairs = Vec::with_capacity(3);
    for &xi in xs.iter().rev() {
        pairs.push(window_pair(w, xi, window_radius)?);
    }
    let branches = match_branches(&pairs);
    let slope = |b: &Vec<Complex64>| {
        let s = |i: usize, xi: f64| b[i] / Complex64::new(0.0, w.k() * xi);
        (s(2, h) * 8.0 - s(1, 2.0 * h) * 6.0 + s(0, 4.0 * h)) / 3.0
    };
    Ok([slope(&branches[0]), slope(&branches[1])])
}

/// Largest distance from a windowed eigenvalue to the nearest reflection
/// `-conj(lambda)` of the set.
pub fn reflection_defect(ev: &[Complex64]) -> f64 {
    ev.iter()
        .map(|l| {
            let r = -l.conj();
            ev.iter()
                .map(|m| (m - r).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}
