//! The 2x2 Whitham modulation matrix in the `(k, P)` chart and the
//! small-amplitude Stokes diagnostics.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::SpectralField;
use crate::wave::{ModelParams, StokesExpansion, TravelingWave, WaveJet};

/// Relative discriminant tolerance separating the three classes.
pub const DEFAULT_CLASSIFY_TOL: f64 = 1e-8;

/// Type of a real 2x2 system by its discriminant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Classification {
    StrictlyHyperbolic,
    Elliptic,
    /// Discriminant within tolerance of zero; carries its value.
    Degenerate(f64),
}

impl Classification {
    pub fn label(&self) -> &'static str {
        match self {
            Self::StrictlyHyperbolic => "hyperbolic",
            Self::Elliptic => "elliptic",
            Self::Degenerate(_) => "degenerate",
        }
    }

    /// Same class, ignoring the stored gap of `Degenerate`.
    pub fn same_kind(&self, other: &Self) -> bool {
        std::mem::discriminant(self) == std::mem::discriminant(other)
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Identifies the wave a matrix was assembled from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveRef {
    pub gamma: f64,
    pub beta: f64,
    pub k: f64,
    #[serde(rename = "P")]
    pub p: f64,
    pub c: f64,
}

impl From<&TravelingWave> for WaveRef {
    fn from(w: &TravelingWave) -> Self {
        let params = w.params();
        Self {
            gamma: params.gamma,
            beta: params.beta,
            k: w.k(),
            p: w.momentum(),
            c: w.speed(),
        }
    }
}

pub type Matrix2 = [[f64; 2]; 2];

/// Eigenvalues of a real 2x2 matrix, larger real part (then imaginary) first.
pub fn eigenvalues2(m: &Matrix2) -> [Complex64; 2] {
    let half = 0.5 * (m[0][0] + m[1][1]);
    // (a - d)^2 + 4bc avoids cancellation in tr^2 - 4 det
    let disc = (m[0][0] - m[1][1]).powi(2) + 4.0 * m[0][1] * m[1][0];
    if disc >= 0.0 {
        let r = 0.5 * disc.sqrt();
        [Complex64::new(half + r, 0.0), Complex64::new(half - r, 0.0)]
    } else {
        let r = 0.5 * (-disc).sqrt();
        [Complex64::new(half, r), Complex64::new(half, -r)]
    }
}

/// `Delta = tr^2 - 4 det` compared against `tol * max(tr^2, |det|, 1)`.
pub fn classify(m: &Matrix2, tol: f64) -> Classification {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = (m[0][0] - m[1][1]).powi(2) + 4.0 * m[0][1] * m[1][0];
    let scale = (tr * tr).max(det.abs()).max(1.0);
    if disc > tol * scale {
        Classification::StrictlyHyperbolic
    } else if disc < -tol * scale {
        Classification::Elliptic
    } else {
        Classification::Degenerate(disc)
    }
}

/// Infinity (max row sum) norm.
pub fn norm_inf(m: &Matrix2) -> f64 {
    m.iter()
        .map(|r| r[0].abs() + r[1].abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhithamMatrix {
    pub entries: Matrix2,
    pub eigenvalues: [Complex64; 2],
    pub classification: Classification,
    pub wave_ref: WaveRef,
}

impl WhithamMatrix {
    pub fn from_entries(entries: Matrix2, wave_ref: WaveRef) -> Self {
        Self {
            entries,
            eigenvalues: eigenvalues2(&entries),
            classification: classify(&entries, DEFAULT_CLASSIFY_TOL),
            wave_ref,
        }
    }

    pub fn classify(&self, tol: f64) -> Classification {
        classify(&self.entries, tol)
    }
}

fn check_grid(w: &TravelingWave, f: &SpectralField) -> Result<()> {
    if f.n_modes() != w.grid().n_modes() {
        return Err(Error::GridMismatch {
            left: w.grid().n_modes(),
            right: f.n_modes(),
        });
    }
    Ok(())
}

/// Row one is `-(kc)_k, -(kc)_P`; row two holds the derivatives of the
/// conservative flux `G` taken through the jet.
pub fn whitham_matrix(w: &TravelingWave, jet: &WaveJet) -> Result<WhithamMatrix> {
    check_grid(w, &jet.phi_k)?;
    check_grid(w, &jet.phi_p)?;
    let ModelParams { gamma, beta } = w.params();
    let (k, c) = (w.k(), w.speed());
    let k2 = k * k;
    let phi = w.phi();
    let sq = phi.mul(phi);
    let d = phi.differentiate(1);
    let inv = phi.antiderivative_unchecked(1);

    let flux_derivative = |dphi: &SpectralField| {
        -sq.dot(dphi)
            + 3.0 * beta * k2 * d.dot(&dphi.differentiate(1))
            + gamma / k2 * inv.dot(&dphi.antiderivative_unchecked(1))
    };
    let g_k =
        flux_derivative(&jet.phi_k) + 3.0 * beta * k * d.dot(&d) - gamma / (k2 * k) * inv.dot(&inv);
    let g_p = flux_derivative(&jet.phi_p);

    let entries = [[-(c + k * jet.c_k), -k * jet.c_p], [g_k, g_p]];
    Ok(WhithamMatrix::from_entries(entries, WaveRef::from(w)))
}

/// Whitham matrix of the reduced (`beta = 0`) model.
pub fn reduced_whitham_matrix(w: &TravelingWave, jet: &WaveJet) -> Result<WhithamMatrix> {
    let beta = w.params().beta;
    if beta != 0.0 {
        return Err(Error::BetaNonZero(beta));
    }
    whitham_matrix(w, jet)
}

/// Linear frequency `omega0(k) = k c0(k)` and its first two derivatives.
pub fn linear_frequency(k: f64, params: &ModelParams) -> [f64; 3] {
    let ModelParams { gamma, beta } = *params;
    let pi2 = PI * PI;
    [
        gamma / (4.0 * pi2 * k) - 4.0 * beta * pi2 * k.powi(3),
        -gamma / (4.0 * pi2 * k * k) - 12.0 * beta * pi2 * k * k,
        gamma / (2.0 * pi2 * k.powi(3)) - 24.0 * beta * pi2 * k,
    ]
}

/// Lighthill product `omega0''(k) omega2(k)`.
pub fn stokes_lighthill(k: f64, params: &ModelParams) -> Result<f64> {
    let ModelParams { gamma, beta } = *params;
    let q = beta * PI.powi(4) * k.powi(4);
    let denom = gamma + 64.0 * q;
    if denom.abs() <= 1e-14 * (gamma.abs() + 64.0 * q.abs()) {
        return Err(Error::DegenerateStokes {
            harmonic: 2,
            gap: denom,
        });
    }
    Ok((gamma - 48.0 * q) / (3.0 * denom))
}

/// Wavenumber where the Stokes regime changes type: the sign change of the
/// Lighthill product for `beta > 0`, its pole for `beta < 0`.
pub fn critical_frequency(params: &ModelParams) -> Result<f64> {
    let ModelParams { gamma, beta } = *params;
    if beta == 0.0 {
        return Err(Error::BetaZero);
    }
    let pi4 = PI.powi(4);
    Ok(if beta > 0.0 {
        (gamma / (48.0 * beta * pi4)).powf(0.25)
    } else {
        (gamma / (64.0 * beta.abs() * pi4)).powf(0.25)
    })
}

/// Leading-order Whitham eigenvalues `-omega0'(k) +- a sqrt(omega2 omega0'')`.
pub fn stokes_whitham_eigenvalues(a: f64, k: f64, params: &ModelParams) -> Result<[Complex64; 2]> {
    let s = StokesExpansion::new(a, k, params)?;
    let [_, w1, w2] = linear_frequency(k, params);
    let root = Complex64::new(s.omega2 * w2, 0.0).sqrt() * a;
    let center = Complex64::new(-w1, 0.0);
    Ok([center + root, center - root])
}
