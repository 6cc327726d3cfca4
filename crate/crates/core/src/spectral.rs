//! Fourier representation of real 1-periodic functions on `theta in [0, 1)`.
//!
//! A [`SpectralField`] stores the full Hermitian coefficient sequence
//! `c_n, n = -N..=N`, so that `f(theta) = sum_n c_n exp(2 pi i n theta)` is
//! real. Quadratic products are formed on a padded collocation grid with
//! `n_points >= 3N + 1`, which makes them alias-free on the retained modes.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Default number of retained Fourier modes.
pub const DEFAULT_MODES: usize = 64;

/// Relative tolerance used to decide whether a field has zero mean.
pub const MEAN_ZERO_TOL: f64 = 1e-12;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plans(len: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (p.plan_fft_forward(len), p.plan_fft_inverse(len))
    })
}

/// Truncation level and collocation size of a Fourier discretization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PeriodicGrid {
    n_modes: usize,
    n_points: usize,
}

impl PeriodicGrid {
    pub fn new(n_modes: usize, n_points: usize) -> Result<Self> {
        if n_modes == 0 {
            return Err(Error::InvalidGrid("n_modes must be positive".into()));
        }
        if n_points < 3 * n_modes + 1 {
            return Err(Error::InvalidGrid(format!(
                "n_points = {n_points} is below the dealiasing bound 3N+1 = {}",
                3 * n_modes + 1
            )));
        }
        Ok(Self { n_modes, n_points })
    }

    /// Grid with `4N` collocation points (256 for the default 64 modes).
    pub fn with_modes(n_modes: usize) -> Self {
        let n_modes = n_modes.max(1);
        Self {
            n_modes,
            n_points: 4 * n_modes,
        }
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    /// Number of stored coefficients, `2N + 1`.
    pub fn len(&self) -> usize {
        2 * self.n_modes + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Collocation nodes `theta_m = m / n_points`.
    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_points)
            .map(|m| m as f64 / self.n_points as f64)
            .collect()
    }

    /// Mode numbers `-N..=N` in storage order.
    pub fn modes(&self) -> impl Iterator<Item = i64> {
        let n = self.n_modes as i64;
        -n..=n
    }
}

impl Default for PeriodicGrid {
    fn default() -> Self {
        Self::with_modes(DEFAULT_MODES)
    }
}

/// A real 1-periodic function stored by its truncated Fourier coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: PeriodicGrid,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: PeriodicGrid) -> Self {
        Self {
            grid,
            coeffs: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn constant(grid: PeriodicGrid, value: f64) -> Self {
        let mut f = Self::zeros(grid);
        f.coeffs[grid.n_modes] = Complex64::new(value, 0.0);
        f
    }

    /// Builds a field from coefficients ordered `n = -N..=N`.
    ///
    /// The input is projected onto the Hermitian subspace, so the stored
    /// field is exactly real-valued.
    pub fn from_coeffs(grid: PeriodicGrid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::GridMismatch {
                left: grid.n_modes,
                right: coeffs.len().saturating_sub(1) / 2,
            });
        }
        let mut f = Self { grid, coeffs };
        f.symmetrize();
        Ok(f)
    }

    /// Even field `sum_n a_n cos(2 pi n theta)` from `(n, a_n)` pairs.
    pub fn from_cosines(grid: PeriodicGrid, terms: &[(usize, f64)]) -> Self {
        let mut f = Self::zeros(grid);
        for &(n, a) in terms {
            if n > grid.n_modes {
                continue;
            }
            if n == 0 {
                f.coeffs[grid.n_modes].re += a;
            } else {
                f.coeffs[grid.n_modes + n].re += 0.5 * a;
                f.coeffs[grid.n_modes - n].re += 0.5 * a;
            }
        }
        f
    }

    /// Odd field `sum_n b_n sin(2 pi n theta)` from `(n, b_n)` pairs.
    pub fn from_sines(grid: PeriodicGrid, terms: &[(usize, f64)]) -> Self {
        let mut f = Self::zeros(grid);
        for &(n, b) in terms {
            if n == 0 || n > grid.n_modes {
                continue;
            }
            f.coeffs[grid.n_modes + n].im -= 0.5 * b;
            f.coeffs[grid.n_modes - n].im += 0.5 * b;
        }
        f
    }

    /// Samples `f` at the collocation nodes and transforms to coefficients.
    pub fn from_fn(grid: PeriodicGrid, f: impl Fn(f64) -> f64) -> Self {
        let values: Vec<f64> = grid.nodes().into_iter().map(f).collect();
        Self::from_values(grid, &values)
    }

    /// Coefficients of the trigonometric interpolant of collocation values.
    pub fn from_values(grid: PeriodicGrid, values: &[f64]) -> Self {
        assert_eq!(
            values.len(),
            grid.n_points,
            "value count must equal n_points"
        );
        let m = grid.n_points;
        let (fwd, _) = plans(m);
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fwd.process(&mut buf);
        let scale = 1.0 / m as f64;
        let n = grid.n_modes as i64;
        let coeffs = (-n..=n)
            .map(|j| buf[j.rem_euclid(m as i64) as usize] * scale)
            .collect();
        let mut f = Self { grid, coeffs };
        f.symmetrize();
        f
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    pub fn n_modes(&self) -> usize {
        self.grid.n_modes
    }

    /// Coefficients ordered `n = -N..=N`.
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Coefficient of mode `n`; zero outside the retained band.
    pub fn coeff(&self, n: i64) -> Complex64 {
        let nm = self.grid.n_modes as i64;
        if n.abs() > nm {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[(n + nm) as usize]
        }
    }

    pub fn mean(&self) -> f64 {
        self.coeffs[self.grid.n_modes].re
    }

    /// Cosine amplitudes `a_n` for `n = 1..=N` of the even part, i.e.
    /// `2 Re c_n`.
    pub fn cosine_amplitudes(&self) -> Vec<f64> {
        (1..=self.grid.n_modes as i64)
            .map(|n| 2.0 * self.coeff(n).re)
            .collect()
    }

    pub fn is_mean_zero(&self) -> bool {
        self.mean().abs() <= MEAN_ZERO_TOL * self.l2_norm().max(1.0)
    }

    /// True when every coefficient is real to within `tol` (cosine series).
    pub fn is_even(&self, tol: f64) -> bool {
        self.coeffs.iter().all(|c| c.im.abs() <= tol)
    }

    /// Largest coefficient magnitude.
    pub fn coeff_inf_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// `L^2(0,1)` norm, from Parseval.
    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn evaluate(&self, theta: f64) -> f64 {
        let nm = self.grid.n_modes;
        let mut acc = self.coeffs[nm].re;
        for n in 1..=nm {
            let w = Complex64::from_polar(1.0, 2.0 * PI * n as f64 * theta);
            acc += 2.0 * (self.coeffs[nm + n] * w).re;
        }
        acc
    }

    /// Values at the collocation nodes.
    pub fn values(&self) -> Vec<f64> {
        let m = self.grid.n_points;
        let (_, inv) = plans(m);
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        for (j, c) in self.grid.modes().zip(&self.coeffs) {
            buf[j.rem_euclid(m as i64) as usize] = *c;
        }
        inv.process(&mut buf);
        buf.into_iter().map(|z| z.re).collect()
    }

    /// `order`-th derivative: `c_n -> (2 pi i n)^order c_n`.
    pub fn differentiate(&self, order: u32) -> Self {
        let coeffs = self
            .grid
            .modes()
            .zip(&self.coeffs)
            .map(|(n, c)| {
                if n == 0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    c * Complex64::new(0.0, 2.0 * PI * n as f64).powu(order)
                }
            })
            .collect();
        Self {
            grid: self.grid,
            coeffs,
        }
    }

    /// Mean-zero antiderivative of order `order`.
    pub fn antiderivative(&self, order: u32) -> Result<Self> {
        let tol = MEAN_ZERO_TOL * self.l2_norm().max(1.0);
        if self.mean().abs() > tol {
            return Err(Error::MeanNotZero {
                mean: self.mean(),
                tol,
            });
        }
        Ok(self.antiderivative_unchecked(order))
    }

    /// Antiderivative that silently drops the mean.
    pub fn antiderivative_unchecked(&self, order: u32) -> Self {
        let coeffs = self
            .grid
            .modes()
            .zip(&self.coeffs)
            .map(|(n, c)| {
                if n == 0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    c / Complex64::new(0.0, 2.0 * PI * n as f64).powu(order)
                }
            })
            .collect();
        Self {
            grid: self.grid,
            coeffs,
        }
    }

    /// `int_0^1 conj(f) g dtheta`, conjugate-linear in `self`.
    pub fn inner_product(&self, other: &Self) -> Result<Complex64> {
        self.check_grid(other)?;
        Ok(self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Real part of [`inner_product`](Self::inner_product); panics on grid
    /// mismatch. Internal callers always share one grid.
    pub(crate) fn dot(&self, other: &Self) -> f64 {
        assert_eq!(self.grid.n_modes, other.grid.n_modes);
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a.conj() * b).re)
            .sum()
    }

    /// Dealiased pointwise product truncated back to `N` modes.
    pub fn multiply(&self, other: &Self) -> Result<Self> {
        self.check_grid(other)?;
        let fv = self.values();
        let gv = other.values();
        let prod: Vec<f64> = fv.iter().zip(&gv).map(|(a, b)| a * b).collect();
        Ok(Self::from_values(self.grid, &prod))
    }

    pub(crate) fn mul(&self, other: &Self) -> Self {
        self.multiply(other).expect("fields share a grid")
    }

    /// Multiplication operator `w -> f w` on truncated coefficient vectors:
    /// `T[j, l] = c_{j - l}`.
    pub fn toeplitz_of(&self) -> DMatrix<Complex64> {
        let len = self.grid.len();
        let nm = self.grid.n_modes as i64;
        DMatrix::from_fn(len, len, |j, l| {
            let d = j as i64 - l as i64;
            if d.abs() > nm {
                Complex64::new(0.0, 0.0)
            } else {
                self.coeffs[(d + nm) as usize]
            }
        })
    }

    pub fn to_vector(&self) -> DVector<Complex64> {
        DVector::from_column_slice(&self.coeffs)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            grid: self.grid,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    /// Same function on a different truncation (zero-padded or cut).
    pub fn resample(&self, grid: PeriodicGrid) -> Self {
        let mut out = Self::zeros(grid);
        let nm = grid.n_modes as i64;
        for n in -nm..=nm {
            out.coeffs[(n + nm) as usize] = self.coeff(n);
        }
        out
    }

    /// Translate in theta: `f(theta - shift)`.
    pub fn translate(&self, shift: f64) -> Self {
        let coeffs = self
            .grid
            .modes()
            .zip(&self.coeffs)
            .map(|(n, c)| c * Complex64::from_polar(1.0, -2.0 * PI * n as f64 * shift))
            .collect();
        Self {
            grid: self.grid,
            coeffs,
        }
    }

    fn symmetrize(&mut self) {
        let nm = self.grid.n_modes;
        self.coeffs[nm].im = 0.0;
        for n in 1..=nm {
            let avg = 0.5 * (self.coeffs[nm + n] + self.coeffs[nm - n].conj());
            self.coeffs[nm + n] = avg;
            self.coeffs[nm - n] = avg.conj();
        }
    }

    fn check_grid(&self, other: &Self) -> Result<()> {
        if self.grid.n_modes != other.grid.n_modes {
            return Err(Error::GridMismatch {
                left: self.grid.n_modes,
                right: other.grid.n_modes,
            });
        }
        Ok(())
    }
}

impl Add for &SpectralField {
    type Output = SpectralField;

    fn add(self, rhs: &SpectralField) -> SpectralField {
        assert_eq!(self.grid.n_modes, rhs.grid.n_modes);
        SpectralField {
            grid: self.grid,
            coeffs: self
                .coeffs
                .iter()
                .zip(&rhs.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &SpectralField {
    type Output = SpectralField;

    fn sub(self, rhs: &SpectralField) -> SpectralField {
        assert_eq!(self.grid.n_modes, rhs.grid.n_modes);
        SpectralField {
            grid: self.grid,
            coeffs: self
                .coeffs
                .iter()
                .zip(&rhs.coeffs)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Mul<f64> for &SpectralField {
    type Output = SpectralField;

    fn mul(self, rhs: f64) -> SpectralField {
        self.scale(rhs)
    }
}

impl Neg for &SpectralField {
    type Output = SpectralField;

    fn neg(self) -> SpectralField {
        self.scale(-1.0)
    }
}

#[derive(Serialize, Deserialize)]
struct FieldRepr {
    n_modes: usize,
    coeffs: Vec<[f64; 2]>,
}

impl Serialize for SpectralField {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        FieldRepr {
            n_modes: self.grid.n_modes,
            // `+ 0.0` maps -0.0 to 0.0 so equal fields serialize identically.
            coeffs: self
                .coeffs
                .iter()
                .map(|c| [c.re + 0.0, c.im + 0.0])
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SpectralField {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = FieldRepr::deserialize(d)?;
        let grid = PeriodicGrid::with_modes(repr.n_modes);
        if repr.n_modes == 0 || repr.coeffs.len() != grid.len() {
            return Err(serde::de::Error::custom(format!(
                "expected {} coefficients for n_modes = {}, found {}",
                2 * repr.n_modes + 1,
                repr.n_modes,
                repr.coeffs.len()
            )));
        }
        let coeffs = repr
            .coeffs
            .into_iter()
            .map(|[re, im]| Complex64::new(re, im))
            .collect();
        SpectralField::from_coeffs(grid, coeffs).map_err(serde::de::Error::custom)
    }
}
