//! Periodic Evans function `D(lambda, xi) = det(M(lambda) - e^{i xi} I)`.
//!
//! `M(lambda)` is the period map of the first-order form of
//! `L[phi] v = lambda k v'`. With `u = (c - phi) v - beta k^2 v''` the
//! equation reads `k^2 u'' = lambda k v' - gamma v`, giving a 4x4 system in
//! `(v, v', u, u')` when `beta != 0`. The reduced model uses the 2x2 system
//! in `(u, u')` with `u = (c - phi) v`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::SpectralField;
use crate::wave::TravelingWave;

/// Relative tolerance of the adaptive integrator over one period.
pub const EVANS_RTOL: f64 = 1e-10;

mod rkf78 {
    //! Fehlberg's 13-stage 7(8) pair. `B8` advances the solution; the error
    //! estimate is `41/840 (k0 + k10 - k11 - k12) h`.

    pub const STAGES: usize = 13;

    pub const C: [f64; STAGES] = [
        0.0,
        2.0 / 27.0,
        1.0 / 9.0,
        1.0 / 6.0,
        5.0 / 12.0,
        0.5,
        5.0 / 6.0,
        1.0 / 6.0,
        2.0 / 3.0,
        1.0 / 3.0,
        1.0,
        0.0,
        1.0,
    ];

    pub const A: [[f64; 12]; STAGES] = [
        [0.0; 12],
        [
            2.0 / 27.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
        ],
        [
            1.0 / 36.0,
            1.0 / 12.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
        ],
        [
            1.0 / 24.0,
            0.0,
            1.0 / 8.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
        ],
        [
            5.0 / 12.0,
            0.0,
            -25.0 / 16.0,
            25.0 / 16.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
        ],
        [
            1.0 / 20.0,
            0.0,
            0.0,
            1.0 / 4.0,
            1.0 / 5.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
        ],
        [
            -25.0 / 108.0,
            0.0,
            0.0,
            125.0 / 108.0,
            -65.0 / 27.0,
            125.0 / 54.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
        ],
        [
            31.0 / 300.0,
            0.0,
            0.0,
            0.0,
            61.0 / 225.0,
            -2.0 / 9.0,
            13.0 / 900.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
        ],
        [
            2.0,
            0.0,
            0.0,
            -53.0 / 6.0,
            704.0 / 45.0,
            -107.0 / 9.0,
            67.0 / 90.0,
            3.0,
            0.0,
            0.0,
            0.0,
            0.0,
        ],
        [
            -91.0 / 108.0,
            0.0,
            0.0,
            23.0 / 108.0,
            -976.0 / 135.0,
            311.0 / 54.0,
            -19.0 / 60.0,
            17.0 / 6.0,
            -1.0 / 12.0,
            0.0,
            0.0,
            0.0,
        ],
        [
            2383.0 / 4100.0,
            0.0,
            0.0,
            -341.0 / 164.0,
            4496.0 / 1025.0,
            -301.0 / 82.0,
            2133.0 / 4100.0,
            45.0 / 82.0,
            45.0 / 164.0,
            18.0 / 41.0,
            0.0,
            0.0,
        ],
        [
            3.0 / 205.0,
            0.0,
            0.0,
            0.0,
            0.0,
            -6.0 / 41.0,
            -3.0 / 205.0,
            -3.0 / 41.0,
            3.0 / 41.0,
            6.0 / 41.0,
            0.0,
            0.0,
        ],
        [
            -1777.0 / 4100.0,
            0.0,
            0.0,
            -341.0 / 164.0,
            4496.0 / 1025.0,
            -289.0 / 82.0,
            2193.0 / 4100.0,
            51.0 / 82.0,
            33.0 / 164.0,
            12.0 / 41.0,
            0.0,
            1.0,
        ],
    ];

    pub const B8: [f64; STAGES] = [
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        34.0 / 105.0,
        9.0 / 35.0,
        9.0 / 35.0,
        9.0 / 280.0,
        9.0 / 280.0,
        0.0,
        41.0 / 840.0,
        41.0 / 840.0,
    ];

    pub const ERR: f64 = 41.0 / 840.0;
}

/// Profile values needed by the ODE right-hand side.
struct Profile {
    coeffs: Vec<Complex64>,
    n_modes: usize,
}

impl Profile {
    fn new(phi: &SpectralField) -> Self {
        let n = phi.n_modes();
        Self {
            coeffs: (0..=n as i64).map(|m| phi.coeff(m)).collect(),
            n_modes: n,
        }
    }

    /// `(phi(theta), phi'(theta))`.
    fn eval(&self, theta: f64) -> (f64, f64) {
        let step = Complex64::from_polar(1.0, 2.0 * PI * theta);
        let mut e = Complex64::new(1.0, 0.0);
        let mut val = self.coeffs[0].re;
        let mut der = 0.0;
        for m in 1..=self.n_modes {
            e *= step;
            let t = self.coeffs[m] * e;
            val += 2.0 * t.re;
            der -= 2.0 * 2.0 * PI * m as f64 * t.im;
        }
        (val, der)
    }
}

/// Right-hand side `Y' = A(theta) Y` of the first-order system.
struct System {
    profile: Profile,
    gamma: f64,
    beta: f64,
    k: f64,
    c: f64,
    lambda: Complex64,
}

impl System {
    fn dim(&self) -> usize {
        if self.beta == 0.0 {
            2
        } else {
            4
        }
    }

    fn matrix(&self, theta: f64) -> Result<DMatrix<Complex64>> {
        let (phi, dphi) = self.profile.eval(theta);
        let s = self.c - phi;
        let (k, lk) = (self.k, self.lambda * self.k);
        let k2 = k * k;
        let z = Complex64::new(0.0, 0.0);
        let r = |x: f64| Complex64::new(x, 0.0);
        if self.beta == 0.0 {
            if s.abs() < 1e-12 * self.c.abs().max(1.0) {
                return Err(Error::InvalidArgument(format!(
                    "c - phi vanishes at theta = {theta}; reduced system is singular"
                )));
            }
            // k^2 u'' = lambda k (u/s)' - gamma u/s
            Ok(DMatrix::from_row_slice(
                2,
                2,
                &[
                    z,
                    r(1.0),
                    (lk * dphi / (s * s) - self.gamma / s) / k2,
                    lk / (s * k2),
                ],
            ))
        } else {
            let bk2 = self.beta * k2;
            Ok(DMatrix::from_row_slice(
                4,
                4,
                &[
                    z,
                    r(1.0),
                    z,
                    z,
                    r(s / bk2),
                    z,
                    r(-1.0 / bk2),
                    z,
                    z,
                    z,
                    z,
                    r(1.0),
                    r(-self.gamma / k2),
                    lk / k2,
                    z,
                    z,
                ],
            ))
        }
    }
}

fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Period map over `[0, 1]` by adaptive RKF7(8) from the identity.
fn integrate(sys: &System, rtol: f64) -> Result<DMatrix<Complex64>> {
    use rkf78::*;
    let n = sys.dim();
    let mut y = DMatrix::<Complex64>::identity(n, n);
    let mut t = 0.0;
    let mut h: f64 = 1e-3;
    let min_step = 1e-12;
    let mut stages: Vec<DMatrix<Complex64>> = Vec::with_capacity(STAGES);
    let mut steps = 0usize;
    while t < 1.0 {
        h = h.min(1.0 - t);
        stages.clear();
        for i in 0..STAGES {
            let mut yi = y.clone();
            for (j, kj) in stages.iter().enumerate() {
                let a = A[i][j];
                if a != 0.0 {
                    yi += kj * Complex64::new(h * a, 0.0);
                }
            }
            stages.push(sys.matrix(t + C[i] * h)? * yi);
        }
        let err_m =
            (&stages[0] + &stages[10] - &stages[11] - &stages[12]) * Complex64::new(h * ERR, 0.0);
        let err = max_abs(&err_m);
        // error per unit step, so the tolerance bounds the error over the period
        let tol = rtol * h * max_abs(&y).max(1.0);
        if err <= tol || h <= min_step {
            if err > tol {
                return Err(Error::StiffIntegrationFailure { theta: t, step: h });
            }
            for (i, ki) in stages.iter().enumerate() {
                if B8[i] != 0.0 {
                    y += ki * Complex64::new(h * B8[i], 0.0);
                }
            }
            t += h;
            steps += 1;
            if steps > 1_000_000 {
                return Err(Error::StiffIntegrationFailure { theta: t, step: h });
            }
        }
        let factor = if err == 0.0 {
            4.0
        } else {
            (0.9 * (tol / err).powf(1.0 / 8.0)).clamp(0.1, 4.0)
        };
        h = (h * factor).max(min_step);
    }
    Ok(y)
}

/// Monodromy matrix `M(lambda)` over one period.
pub fn monodromy(w: &TravelingWave, lambda: Complex64) -> Result<DMatrix<Complex64>> {
    let params = w.params();
    let sys = System {
        profile: Profile::new(w.phi()),
        gamma: params.gamma,
        beta: params.beta,
        k: w.k(),
        c: w.speed(),
        lambda,
    };
    integrate(&sys, EVANS_RTOL)
}

/// `D(lambda, xi)` together with the Hadamard bound of `M - e^{i xi} I`,
/// the natural scale for deciding `D ~ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvansValue {
    pub d: Complex64,
    pub scale: f64,
    /// `det M(lambda)`.
    pub det_m: Complex64,
}

pub fn evans_from_monodromy(m: &DMatrix<Complex64>, xi: f64) -> EvansValue {
    let n = m.nrows();
    let z = Complex64::from_polar(1.0, xi);
    let shifted = m - DMatrix::<Complex64>::identity(n, n) * z;
    let scale = shifted.column_iter().map(|c| c.norm()).product();
    EvansValue {
        d: shifted.determinant(),
        scale,
        det_m: m.determinant(),
    }
}

pub fn evans(w: &TravelingWave, lambda: Complex64, xi: f64) -> Result<EvansValue> {
    Ok(evans_from_monodromy(&monodromy(w, lambda)?, xi))
}

/// `D(lambda, xi) = det(M(lambda) - e^{i xi} I)`.
pub fn monodromy_evans(w: &TravelingWave, lambda: Complex64, xi: f64) -> Result<Complex64> {
    Ok(evans(w, lambda, xi)?.d)
}
