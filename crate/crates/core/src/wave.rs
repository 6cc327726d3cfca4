//! Periodic traveling waves of the Ostrovsky equation.
//!
//! In the scaled variable `theta = k x - omega t` a 1/k-periodic wave of
//! speed `c` solves
//!
//! ```text
//! k^2 (-c phi' + phi phi' + beta k^2 phi''')' = gamma phi
//! ```
//!
//! on `[0, 1)`. Waves are parameterized by the wavenumber `k` and the
//! momentum `P = 1/2 <phi, phi>`. Only even, mean-zero profiles are
//! computed, so the unknowns are the cosine amplitudes `a_n = coeff(n)`,
//! `n = 1..N`, together with `c`.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, DVector, FullPivLU};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::spectral::{PeriodicGrid, SpectralField};

/// Physical constants of `(u_t + u u_x + beta u_xxx)_x = gamma u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub gamma: f64,
    pub beta: f64,
}

impl ModelParams {
    pub fn new(gamma: f64, beta: f64) -> Result<Self> {
        let p = Self { gamma, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::InvalidParams(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if !self.beta.is_finite() {
            return Err(Error::InvalidParams("beta must be finite".into()));
        }
        Ok(())
    }

    /// `gamma + 16 beta pi^4 k^4 n^2`, the factor of the linear symbol that
    /// vanishes when harmonic `n` resonates with the fundamental.
    pub fn harmonic_gap(&self, k: f64, n: usize) -> f64 {
        let n2 = (n * n) as f64;
        self.gamma + 16.0 * self.beta * PI.powi(4) * k.powi(4) * n2
    }

    /// Rejects wavenumbers where some harmonic `2..=n_modes` is resonant.
    pub fn check_nondegenerate(&self, k: f64, n_modes: usize) -> Result<()> {
        if self.beta >= 0.0 {
            return Ok(());
        }
        for n in 2..=n_modes.max(2) {
            let gap = self.harmonic_gap(k, n);
            let size =
                self.gamma + 16.0 * self.beta.abs() * PI.powi(4) * k.powi(4) * (n * n) as f64;
            if gap.abs() <= 1e-8 * size {
                return Err(Error::DegenerateStokes { harmonic: n, gap });
            }
        }
        Ok(())
    }

    /// Linear phase speed `gamma/(4 pi^2 k^2) - 4 beta pi^2 k^2`.
    pub fn linear_speed(&self, k: f64) -> f64 {
        self.gamma / (4.0 * PI * PI * k * k) - 4.0 * self.beta * PI * PI * k * k
    }
}

/// Small-amplitude expansion `phi = a cos(2 pi theta) + 2 a^2 A2 cos(4 pi theta)`,
/// `omega = k c = omega0 + a^2 omega2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StokesExpansion {
    pub a: f64,
    pub k: f64,
    pub a2: f64,
    pub omega0: f64,
    pub omega2: f64,
}

impl StokesExpansion {
    pub fn new(a: f64, k: f64, params: &ModelParams) -> Result<Self> {
        params.validate()?;
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "k must be positive, got {k}"
            )));
        }
        let denom = params.harmonic_gap(k, 2);
        let size = params.gamma + 64.0 * params.beta.abs() * PI.powi(4) * k.powi(4);
        if denom.abs() <= 1e-12 * size {
            return Err(Error::DegenerateStokes {
                harmonic: 2,
                gap: denom,
            });
        }
        let a2 = 2.0 * k * k * PI * PI / (3.0 * denom);
        Ok(Self {
            a,
            k,
            a2,
            omega0: k * params.linear_speed(k),
            omega2: k * a2,
        })
    }

    pub fn speed(&self) -> f64 {
        (self.omega0 + self.a * self.a * self.omega2) / self.k
    }

    /// `1/2 <phi, phi>` of the truncated expansion.
    pub fn momentum(&self) -> f64 {
        let a = self.a;
        a * a / 4.0 + a.powi(4) * self.a2 * self.a2
    }

    pub fn profile(&self, grid: PeriodicGrid) -> SpectralField {
        SpectralField::from_cosines(grid, &[(1, self.a), (2, 2.0 * self.a * self.a * self.a2)])
    }
}

/// Newton and continuation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Bound on the coefficient infinity norm of the residual.
    pub tol: f64,
    pub max_iter: usize,
    /// Smallest continuation step as a fraction of the homotopy.
    pub min_step: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 50,
            min_step: 1.0 / 1024.0,
        }
    }
}

/// An even, mean-zero periodic profile with its speed.
#[derive(Debug, Clone, PartialEq)]
pub struct TravelingWave {
    params: ModelParams,
    k: f64,
    p: f64,
    c: f64,
    phi: SpectralField,
    residual_norm: f64,
}

impl TravelingWave {
    /// Wraps a profile and speed, computing `P` and the residual.
    pub fn from_parts(params: ModelParams, k: f64, c: f64, phi: SpectralField) -> Result<Self> {
        params.validate()?;
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "k must be positive, got {k}"
            )));
        }
        let p = 0.5 * phi.dot(&phi);
        let mut w = Self {
            params,
            k,
            p,
            c,
            phi,
            residual_norm: 0.0,
        };
        w.residual_norm = profile_residual(&w).coeff_inf_norm();
        Ok(w)
    }

    /// The zero profile with speed `c`; used as the constant-coefficient limit.
    pub fn zero(params: ModelParams, k: f64, c: f64, grid: PeriodicGrid) -> Result<Self> {
        Self::from_parts(params, k, c, SpectralField::zeros(grid))
    }

    pub fn params(&self) -> ModelParams {
        self.params
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    /// Momentum `1/2 <phi, phi>`.
    pub fn momentum(&self) -> f64 {
        self.p
    }

    pub fn speed(&self) -> f64 {
        self.c
    }

    pub fn phi(&self) -> &SpectralField {
        &self.phi
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.phi.grid()
    }

    pub fn residual_norm(&self) -> f64 {
        self.residual_norm
    }

    /// Same wave zero-padded or truncated to another grid (not re-solved).
    pub fn resample(&self, grid: PeriodicGrid) -> Self {
        Self::from_parts(self.params, self.k, self.c, self.phi.resample(grid))
            .expect("parameters already validated")
    }

    pub fn with_params(&self, params: ModelParams) -> Result<Self> {
        Self::from_parts(params, self.k, self.c, self.phi.clone())
    }
}

impl fmt::Display for TravelingWave {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "wave(gamma={}, beta={}, k={}, P={:e}, c={}, residual={:e})",
            self.params.gamma, self.params.beta, self.k, self.p, self.c, self.residual_norm
        )
    }
}

#[derive(Serialize, Deserialize)]
struct WaveRepr {
    gamma: f64,
    beta: f64,
    k: f64,
    #[serde(rename = "P")]
    p: f64,
    c: f64,
    residual_norm: f64,
    phi: SpectralField,
}

impl Serialize for TravelingWave {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        WaveRepr {
            gamma: self.params.gamma,
            beta: self.params.beta,
            k: self.k,
            p: self.p,
            c: self.c,
            residual_norm: self.residual_norm,
            phi: self.phi.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for TravelingWave {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = WaveRepr::deserialize(d)?;
        let params = ModelParams::new(r.gamma, r.beta).map_err(serde::de::Error::custom)?;
        if !(r.k > 0.0 && r.k.is_finite()) {
            return Err(serde::de::Error::custom("k must be positive"));
        }
        Ok(Self {
            params,
            k: r.k,
            p: r.p,
            c: r.c,
            phi: r.phi,
            residual_norm: r.residual_norm,
        })
    }
}

/// First-order parameter derivatives of the family at one wave.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveJet {
    pub phi_k: SpectralField,
    pub phi_p: SpectralField,
    pub c_k: f64,
    pub c_p: f64,
}

impl WaveJet {
    /// True when `|c_P|` falls below `tol`, where the (k, P) chart breaks down.
    pub fn is_degenerate(&self, tol: f64) -> bool {
        self.c_p.abs() <= tol
    }
}

/// Stokes approximation of amplitude `a`, flagged by a nonzero residual.
pub fn stokes_seed(
    a: f64,
    k: f64,
    params: &ModelParams,
    grid: PeriodicGrid,
) -> Result<TravelingWave> {
    let s = StokesExpansion::new(a, k, params)?;
    if a.abs() > 0.2 * params.linear_speed(k).abs() {
        log::warn!("Stokes seed amplitude {a} is large relative to the linear speed");
    }
    TravelingWave::from_parts(*params, k, s.speed(), s.profile(grid))
}

/// `k^2 (-c phi' + phi phi' + beta k^2 phi''')' - gamma phi`.
pub fn profile_residual(w: &TravelingWave) -> SpectralField {
    let ModelParams { gamma, beta } = w.params;
    let k = w.k;
    let phi = &w.phi;
    let half_sq = phi.mul(phi).scale(0.5);
    let flux = &(&phi.scale(-w.c) + &half_sq) + &phi.differentiate(2).scale(beta * k * k);
    &flux.differentiate(2).scale(k * k) - &phi.scale(gamma)
}

/// Discrete profile system on the even, mean-zero subspace.
struct ProfileSystem {
    params: ModelParams,
    k: f64,
    grid: PeriodicGrid,
}

impl ProfileSystem {
    fn n(&self) -> usize {
        self.grid.n_modes()
    }

    fn field(&self, x: &DVector<f64>) -> SpectralField {
        let n = self.n();
        let terms: Vec<(usize, f64)> = (1..=n).map(|m| (m, 2.0 * x[m - 1])).collect();
        SpectralField::from_cosines(self.grid, &terms)
    }

    fn wavenumber(&self, m: usize) -> f64 {
        2.0 * PI * m as f64
    }

    /// Linear symbol `k^2 q^2 c + beta k^4 q^4 - gamma`, `q = 2 pi m`.
    fn symbol(&self, m: usize, c: f64) -> f64 {
        let q2 = self.wavenumber(m).powi(2);
        let k2 = self.k * self.k;
        k2 * q2 * c + self.params.beta * k2 * k2 * q2 * q2 - self.params.gamma
    }

    /// Residual `(r_1..r_N, sum a_n^2 - P)`.
    fn residual(&self, x: &DVector<f64>, p: f64) -> DVector<f64> {
        let n = self.n();
        let c = x[n];
        let phi = self.field(x);
        let sq = phi.mul(&phi);
        let k2 = self.k * self.k;
        let mut f = DVector::zeros(n + 1);
        for m in 1..=n {
            let q2 = self.wavenumber(m).powi(2);
            f[m - 1] = self.symbol(m, c) * x[m - 1] - 0.5 * k2 * q2 * sq.coeff(m as i64).re;
        }
        f[n] = (0..n).map(|i| x[i] * x[i]).sum::<f64>() - p;
        f
    }

    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let n = self.n();
        let c = x[n];
        let k2 = self.k * self.k;
        let coeff = |j: i64| -> f64 {
            match j.unsigned_abs() as usize {
                0 => 0.0,
                a if a <= n => x[a - 1],
                _ => 0.0,
            }
        };
        let mut j = DMatrix::zeros(n + 1, n + 1);
        for row in 1..=n {
            let q2 = self.wavenumber(row).powi(2);
            for col in 1..=n {
                let conv = coeff(row as i64 - col as i64) + coeff(row as i64 + col as i64);
                j[(row - 1, col - 1)] = -k2 * q2 * conv;
            }
            j[(row - 1, row - 1)] += self.symbol(row, c);
            j[(row - 1, n)] = k2 * q2 * x[row - 1];
        }
        for col in 1..=n {
            j[(n, col - 1)] = 2.0 * x[col - 1];
        }
        j
    }

    /// Partial derivative of the residual with respect to `k`.
    fn residual_k(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = self.n();
        let c = x[n];
        let k = self.k;
        let phi = self.field(x);
        let sq = phi.mul(&phi);
        let mut f = DVector::zeros(n + 1);
        for m in 1..=n {
            let q2 = self.wavenumber(m).powi(2);
            let a = x[m - 1];
            f[m - 1] = -2.0 * k * q2 * (-c * a + 0.5 * sq.coeff(m as i64).re)
                + 4.0 * self.params.beta * k.powi(3) * q2 * q2 * a;
        }
        f
    }

    fn unknowns(&self, w: &TravelingWave) -> DVector<f64> {
        let n = self.n();
        let phi = w.phi.resample(self.grid);
        let mut x = DVector::zeros(n + 1);
        for m in 1..=n {
            x[m - 1] = phi.coeff(m as i64).re;
        }
        x[n] = w.c;
        x
    }
}

/// Row-equilibrated full-pivot LU.
struct ScaledLu {
    row_scale: DVector<f64>,
    lu: FullPivLU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

/// Pivot ratio below which the Jacobian is treated as singular.
const SINGULAR_PIVOT_RATIO: f64 = 1e-14;

impl ScaledLu {
    fn new(mut j: DMatrix<f64>) -> Result<Self> {
        let row_scale = DVector::from_iterator(
            j.nrows(),
            j.row_iter().map(|r| {
                let m = r.amax();
                if m > 0.0 {
                    1.0 / m
                } else {
                    1.0
                }
            }),
        );
        for (i, mut r) in j.row_iter_mut().enumerate() {
            r *= row_scale[i];
        }
        let lu = j.full_piv_lu();
        let diag = lu.u().diagonal();
        let max = diag.amax();
        let min = diag.iter().map(|d| d.abs()).fold(f64::INFINITY, f64::min);
        let ratio = if max > 0.0 { min / max } else { 0.0 };
        if !(ratio > SINGULAR_PIVOT_RATIO) {
            return Err(Error::SingularJacobian { pivot_ratio: ratio });
        }
        Ok(Self { row_scale, lu })
    }

    fn solve(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        let b = rhs.component_mul(&self.row_scale);
        self.lu
            .solve(&b)
            .ok_or(Error::SingularJacobian { pivot_ratio: 0.0 })
    }
}

/// Newton solve for the wave with wavenumber `k` and momentum `p`,
/// starting from `guess` (rescaled to the target momentum).
pub fn refine(guess: &TravelingWave, k: f64, p: f64) -> Result<TravelingWave> {
    refine_with(guess, k, p, &SolverOptions::default())
}

pub fn refine_with(
    guess: &TravelingWave,
    k: f64,
    p: f64,
    opts: &SolverOptions,
) -> Result<TravelingWave> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "k must be positive, got {k}"
        )));
    }
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "P must be positive, got {p}"
        )));
    }
    let params = guess.params;
    let grid = guess.grid();
    params.check_nondegenerate(k, grid.n_modes())?;
    let sys = ProfileSystem { params, k, grid };
    let mut x = sys.unknowns(guess);
    let n = grid.n_modes();
    if guess.p > 0.0 {
        let s = (p / guess.p).sqrt();
        for i in 0..n {
            x[i] *= s;
        }
    }

    let mut norm = f64::INFINITY;
    for iter in 0..=opts.max_iter {
        let f = sys.residual(&x, p);
        norm = f.amax();
        if !norm.is_finite() {
            break;
        }
        log::trace!("newton k={k} P={p:e} iter={iter} residual={norm:e}");
        if norm <= opts.tol {
            log::debug!("newton converged in {iter} iterations (residual {norm:e})");
            let phi = sys.field(&x);
            let mut w = TravelingWave::from_parts(params, k, x[n], phi)?;
            w.p = p;
            return Ok(w);
        }
        if iter == opts.max_iter {
            break;
        }
        let lu = ScaledLu::new(sys.jacobian(&x))?;
        let dx = lu.solve(&(-f))?;
        x += dx;
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        last_residual: norm,
    })
}

/// Failed continuation: the error plus every wave accepted before it.
#[derive(Debug, Clone)]
pub struct Stalled {
    pub error: Error,
    pub chain: Vec<TravelingWave>,
}

impl From<Stalled> for Error {
    fn from(s: Stalled) -> Self {
        s.error
    }
}

/// Natural-parameter continuation along the straight line from the start
/// wave's `(k, P)` to the target, in `steps` equal increments with step
/// halving on failure.
pub fn continue_family(
    start: &TravelingWave,
    target_k: f64,
    target_p: f64,
    steps: usize,
) -> std::result::Result<Vec<TravelingWave>, Stalled> {
    continue_family_with(start, target_k, target_p, steps, &SolverOptions::default())
}

pub fn continue_family_with(
    start: &TravelingWave,
    target_k: f64,
    target_p: f64,
    steps: usize,
    opts: &SolverOptions,
) -> std::result::Result<Vec<TravelingWave>, Stalled> {
    let mut chain = vec![start.clone()];
    if steps == 0 {
        return Err(Stalled {
            error: Error::InvalidArgument("steps must be positive".into()),
            chain,
        });
    }
    let (k0, p0) = (start.k, start.p);
    if target_k == k0 && target_p == p0 {
        return Ok(chain);
    }
    let point = |s: f64| (k0 + s * (target_k - k0), p0 + s * (target_p - p0));
    let nominal = 1.0 / steps as f64;
    let mut s = 0.0;
    let mut ds = nominal;
    let mut step = 0;
    while s < 1.0 {
        let next = (s + ds).min(1.0);
        let (k, p) = if next >= 1.0 {
            (target_k, target_p)
        } else {
            point(next)
        };
        match refine_with(chain.last().expect("chain is never empty"), k, p, opts) {
            Ok(w) => {
                chain.push(w);
                s = next;
                step += 1;
                ds = (2.0 * ds).min(nominal);
            }
            Err(e) => {
                ds *= 0.5;
                if ds < opts.min_step {
                    log::warn!("continuation stalled at s={s}: {e}");
                    return Err(Stalled {
                        error: Error::ContinuationStalled { step, s },
                        chain,
                    });
                }
            }
        }
    }
    Ok(chain)
}

/// Largest amplitude used for a Stokes seed when none is given.
pub const MAX_SEED_AMPLITUDE: f64 = 0.05;

/// Wave at `(k, p)`: Stokes seed of amplitude `seed_amplitude` (default
/// `min(2 sqrt(p), 0.05)`), refined, then continued in `P` to the target.
pub fn solve_wave(
    params: &ModelParams,
    k: f64,
    p: f64,
    grid: PeriodicGrid,
    seed_amplitude: Option<f64>,
    opts: &SolverOptions,
) -> Result<TravelingWave> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "P must be positive, got {p}"
        )));
    }
    let a = seed_amplitude.unwrap_or_else(|| (2.0 * p.sqrt()).min(MAX_SEED_AMPLITUDE));
    let seed = stokes_seed(a, k, params, grid)?;
    let start = refine_with(&seed, k, seed.momentum().min(p), opts)?;
    if start.momentum() == p {
        return Ok(start);
    }
    let ratio = (p / start.momentum()).max(start.momentum() / p);
    let steps = (ratio.log2().ceil() as usize).clamp(1, 64);
    let chain = continue_family_with(&start, k, p, steps, opts)?;
    Ok(chain.into_iter().last().expect("chain is never empty"))
}

fn antiderivative_of_profile(phi: &SpectralField) -> SpectralField {
    phi.antiderivative_unchecked(1)
}

/// `int_0^1 phi^3/6 + gamma/(2k^2) (d^-1 phi)^2 - beta k^2/2 phi'^2`.
pub fn hamiltonian(w: &TravelingWave) -> f64 {
    let ModelParams { gamma, beta } = w.params;
    let k2 = w.k * w.k;
    let phi = &w.phi;
    let cube = phi.mul(phi).dot(phi);
    let inv = antiderivative_of_profile(phi);
    let d = phi.differentiate(1);
    cube / 6.0 + gamma / (2.0 * k2) * inv.dot(&inv) - 0.5 * beta * k2 * d.dot(&d)
}

/// `int_0^1 -phi^3/3 + 3/2 beta k^2 phi'^2 + gamma/(2k^2) (d^-1 phi)^2`.
pub fn modulation_flux(w: &TravelingWave) -> f64 {
    let ModelParams { gamma, beta } = w.params;
    let k2 = w.k * w.k;
    let phi = &w.phi;
    let cube = phi.mul(phi).dot(phi);
    let inv = antiderivative_of_profile(phi);
    let d = phi.differentiate(1);
    -cube / 3.0 + 1.5 * beta * k2 * d.dot(&d) + gamma / (2.0 * k2) * inv.dot(&inv)
}

/// `(phi_k, c_k)` and `(phi_P, c_P)` from the converged Newton Jacobian.
pub fn parameter_jet(w: &TravelingWave) -> Result<WaveJet> {
    let grid = w.grid();
    let sys = ProfileSystem {
        params: w.params,
        k: w.k,
        grid,
    };
    let n = grid.n_modes();
    let x = sys.unknowns(w);
    let lu = ScaledLu::new(sys.jacobian(&x))?;

    let mut rhs_p = DVector::zeros(n + 1);
    rhs_p[n] = 1.0;
    let xp = lu.solve(&rhs_p)?;
    let xk = lu.solve(&(-sys.residual_k(&x)))?;
    Ok(WaveJet {
        phi_k: sys.field(&xk),
        phi_p: sys.field(&xp),
        c_k: xk[n],
        c_p: xp[n],
    })
}

/// Central differences of the family over `refine`, with steps `rel * k`
/// and `rel * P`.
pub fn finite_difference_jet(w: &TravelingWave, rel: f64) -> Result<WaveJet> {
    let (k, p) = (w.k, w.p);
    let (dk, dp) = (rel * k, rel * p);
    let kp = refine(w, k + dk, p)?;
    let km = refine(w, k - dk, p)?;
    let pp = refine(w, k, p + dp)?;
    let pm = refine(w, k, p - dp)?;
    let (hk, hp) = (0.5 / dk, 0.5 / dp);
    Ok(WaveJet {
        phi_k: (&kp.phi - &km.phi).scale(hk),
        phi_p: (&pp.phi - &pm.phi).scale(hp),
        c_k: (kp.c - km.c) * hk,
        c_p: (pp.c - pm.c) * hp,
    })
}
