//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Run with `cargo test -p ostwave --test acceptance`.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use ostwave::bloch::{
    assemble_bloch, default_window_radius, kernel_basis, modulation_matrix, pencil_eigs,
    pencil_spectrum, reflection_defect, richardson_slopes, spectral_curves, verify_whitham_link,
    window_pair, ModulationMatrix,
};
use ostwave::evans::evans;
use ostwave::wave::{parameter_jet, refine, solve_wave, stokes_seed, ModelParams, SolverOptions};
use ostwave::whitham::{
    critical_frequency, reduced_whitham_matrix, stokes_lighthill, stokes_whitham_eigenvalues,
    whitham_matrix, Classification, WhithamMatrix,
};
use ostwave::{PeriodicGrid, SpectralField, TravelingWave, WaveJet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Option<Duration>,
    run: fn(&mut Shared) -> Outcome,
}

/// Grid waves shared by criteria 4 to 6.
#[derive(Default)]
struct Shared {
    grid: Vec<GridWave>,
}

struct GridWave {
    wave: TravelingWave,
    jet: WaveJet,
    whitham: WhithamMatrix,
    m0: ModulationMatrix,
}

const GRID_K: [f64; 5] = [0.06, 0.07, 0.08, 0.09, 0.10];
const GRID_P: [f64; 5] = [2e-4, 1e-3, 3e-3, 1e-2, 2e-2];

fn unit() -> ModelParams {
    ModelParams::new(1.0, 1.0).unwrap()
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn field_inf_norm(f: &SpectralField) -> f64 {
    let fine = f.resample(PeriodicGrid::new(f.n_modes(), 16 * f.n_modes()).unwrap());
    fine.values().iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn refined_stokes(
    a: f64,
    k: f64,
    params: &ModelParams,
    n: usize,
) -> (TravelingWave, TravelingWave) {
    let seed = stokes_seed(a, k, params, PeriodicGrid::with_modes(n)).unwrap();
    let w = refine(&seed, k, seed.momentum()).unwrap();
    (seed, w)
}

fn analyze(w: TravelingWave) -> Result<GridWave, String> {
    let jet = parameter_jet(&w).map_err(|e| e.to_string())?;
    let whitham = whitham_matrix(&w, &jet).map_err(|e| e.to_string())?;
    let basis = kernel_basis(&w, &jet).map_err(|e| e.to_string())?;
    let m0 = modulation_matrix(&w, &jet, &basis).map_err(|e| e.to_string())?;
    Ok(GridWave {
        wave: w,
        jet,
        whitham,
        m0,
    })
}

fn stokes_oracle(_: &mut Shared) -> Outcome {
    let params = unit();
    let errs: Vec<f64> = [1e-2, 5e-3]
        .iter()
        .map(|&a| {
            let (seed, w) = refined_stokes(a, 1.0, &params, 64);
            field_inf_norm(&(w.phi() - seed.phi()))
        })
        .collect();
    let ratio = errs[0] / errs[1];
    let constant = errs[0] / 1e-6;
    check(
        (6.5..=9.5).contains(&ratio),
        format!(
            "err(1e-2)={:.3e} err(5e-3)={:.3e} ratio={ratio:.3} C={constant:.3e}",
            errs[0], errs[1]
        ),
    )
}

fn lighthill(_: &mut Shared) -> Outcome {
    let reduced = ModelParams::new(1.0, 0.0).unwrap();
    let exact_third = [0.01, 0.1, 1.0, 10.0]
        .iter()
        .all(|&k| stokes_lighthill(k, &reduced).unwrap() == 1.0 / 3.0);
    let value = stokes_lighthill(1.0, &unit()).unwrap();
    let pi4 = PI.powi(4);
    let closed = (1.0 - 48.0 * pi4) / (3.0 * (1.0 + 64.0 * pi4));
    let value_ok = (value - closed).abs() <= 1e-12 && (value + 0.24990).abs() < 1e-5;

    let f = |k: f64| stokes_lighthill(k, &unit()).unwrap();
    let (mut lo, mut hi) = (0.05, 0.3);
    let mut flips = 0;
    let ks: Vec<f64> = (0..=250).map(|i| 0.05 + 0.001 * i as f64).collect();
    for p in ks.windows(2) {
        if f(p[0]).signum() != f(p[1]).signum() {
            flips += 1;
        }
    }
    while hi - lo > 1e-14 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let root = 0.5 * (lo + hi);
    let kc_closed = (1.0 / (48.0 * pi4)).powf(0.25);
    let kc = critical_frequency(&unit()).unwrap();
    let root_ok = (root - kc_closed).abs() <= 1e-6 && (kc - root).abs() <= 1e-6 && flips == 1;
    check(
        exact_third && value_ok && root_ok,
        format!(
            "beta=0 -> 1/3 exact: {exact_third}; L(1)={value:.12} (closed form {closed:.12}); \
             bisected root={root:.9} critical_frequency={kc:.9} sign changes on [0.05,0.3]={flips} \
             (listed 0.120929 differs by {:.1e})",
            (root - 0.120929).abs()
        ),
    )
}

fn whitham_stokes(_: &mut Shared) -> Outcome {
    let params = unit();
    let kc = critical_frequency(&params).unwrap();
    let a = 1e-2;
    let mut worst: f64 = 0.0;
    let mut ok = true;
    let mut notes = Vec::new();
    for factor in [0.5, 0.8, 1.25, 1.5] {
        let k = factor * kc;
        let (_, w) = refined_stokes(a, k, &params, 64);
        let jet = parameter_jet(&w).unwrap();
        let wm = whitham_matrix(&w, &jet).unwrap();
        let want = stokes_whitham_eigenvalues(a, k, &params).unwrap();
        let mut got = wm.eigenvalues;
        if (got[0] - want[0]).norm() + (got[1] - want[1]).norm()
            > (got[0] - want[1]).norm() + (got[1] - want[0]).norm()
        {
            got.swap(0, 1);
        }
        for (g, t) in got.iter().zip(&want) {
            worst = worst.max((g - t).norm() / t.norm());
        }
        let real_pair = got.iter().all(|l| l.im == 0.0);
        let expected = if factor < 1.0 {
            Classification::StrictlyHyperbolic
        } else {
            Classification::Elliptic
        };
        ok &= real_pair == (factor < 1.0) && wm.classification == expected;
        notes.push(format!("{factor}kc:{}", wm.classification));
    }
    ok &= worst <= 10.0 * a * a;
    check(
        ok,
        format!(
            "max relative eigenvalue error {worst:.2e} (bound {:.0e}); {}",
            10.0 * a * a,
            notes.join(" ")
        ),
    )
}

fn solve_grid(params: &ModelParams, n: usize) -> Result<Vec<TravelingWave>, String> {
    let opts = SolverOptions::default();
    let mut out = Vec::new();
    for &k in &GRID_K {
        for &p in &GRID_P {
            let w = solve_wave(params, k, p, PeriodicGrid::with_modes(n), None, &opts)
                .map_err(|e| format!("solve k={k} P={p:e}: {e}"))?;
            out.push(w);
        }
    }
    Ok(out)
}

fn central_identity(shared: &mut Shared) -> Outcome {
    let params = unit();
    let coarse = solve_grid(&params, 32)?;
    let mut worst: f64 = 0.0;
    let mut worst_change: f64 = 0.0;
    let mut fine = Vec::new();
    for w32 in coarse {
        let g32 = analyze(w32)?;
        let r32 = relative_residual(&g32)?;
        let w64 = refine(
            &g32.wave.resample(PeriodicGrid::with_modes(64)),
            g32.wave.k(),
            g32.wave.momentum(),
        )
        .map_err(|e| e.to_string())?;
        let g64 = analyze(w64)?;
        let r64 = relative_residual(&g64)?;
        worst = worst.max(r32).max(r64);
        worst_change = worst_change.max((r64 - r32).abs());
        fine.push(g64);
    }
    shared.grid = fine;
    check(
        worst <= 1e-6 && worst_change <= 1e-9,
        format!(
            "25 waves k in [{}, {}], P in [{:e}, {:e}]: max residual {worst:.2e}, max change N=32->64 {worst_change:.2e}",
            GRID_K[0], GRID_K[4], GRID_P[0], GRID_P[4]
        ),
    )
}

/// `||W - (M0 - cI)||_inf / ||W||_inf`.
fn relative_residual(g: &GridWave) -> Result<f64, String> {
    let link = verify_whitham_link(&g.whitham, &g.m0, g.wave.speed()).map_err(|e| e.to_string())?;
    let norm = ostwave::whitham::norm_inf(&g.whitham.entries);
    Ok(link.residual * norm.max(1.0) / norm)
}

fn ensure_grid(shared: &mut Shared) -> Result<(), String> {
    if shared.grid.is_empty() {
        let waves = solve_grid(&unit(), 64)?;
        shared.grid = waves.into_iter().map(analyze).collect::<Result<_, _>>()?;
    }
    Ok(())
}

fn nearest(mu: &[Complex64; 2], s: Complex64) -> Complex64 {
    if (mu[0] - s).norm() <= (mu[1] - s).norm() {
        mu[0]
    } else {
        mu[1]
    }
}

fn slope_law(shared: &mut Shared) -> Outcome {
    ensure_grid(shared)?;
    let xi_curve: Vec<f64> = (1..=10).map(|i| 0.01 * i as f64).collect();
    let mut worst_slope: f64 = 0.0;
    let mut worst_re: f64 = 0.0;
    let mut hyperbolic = 0;
    for g in &shared.grid {
        let k = g.wave.k();
        let radius = default_window_radius(k, 0.1, &g.m0);
        let slopes = richardson_slopes(&g.wave, 1e-3, radius).map_err(|e| e.to_string())?;
        for s in slopes {
            let mu = nearest(&g.m0.mu, s);
            worst_slope = worst_slope.max((s - mu).norm() / mu.norm());
        }
        if g.whitham.classification == Classification::StrictlyHyperbolic {
            hyperbolic += 1;
            let mut xi = vec![1e-3, 2e-3, 4e-3];
            xi.extend(&xi_curve);
            let curve = spectral_curves(&g.wave, &xi, radius).map_err(|e| e.to_string())?;
            worst_re = worst_re.max(curve.max_abs_re() / curve.max_abs());
        }
    }

    let params = unit();
    let k = 1.5 * critical_frequency(&params).unwrap();
    let a = 1e-2;
    let (_, w) = refined_stokes(a, k, &params, 64);
    let g = analyze(w)?;
    let xi = 1e-3;
    let radius = default_window_radius(k, xi, &g.m0);
    let pair = window_pair(&g.wave, xi, radius).map_err(|e| e.to_string())?;
    let rate = pair[0].re.abs().max(pair[1].re.abs()) / xi;
    let predicted = a * k * (-stokes_lighthill(k, &params).unwrap()).sqrt();
    let rate_err = (rate - predicted).abs() / predicted;

    check(
        worst_slope <= 1e-4 && worst_re <= 1e-8 && hyperbolic == shared.grid.len() && rate_err <= 0.2,
        format!(
            "max slope error {worst_slope:.2e}; hyperbolic waves {hyperbolic}/{} max|Re|/scale {worst_re:.2e}; \
             elliptic rate {rate:.4e} vs {predicted:.4e} ({:.1}%)",
            shared.grid.len(),
            100.0 * rate_err
        ),
    )
}

fn pencil_invariants(shared: &mut Shared) -> Outcome {
    ensure_grid(shared)?;
    let mut kernel: f64 = 0.0;
    let mut gram: f64 = 0.0;
    let mut symmetry: f64 = 0.0;
    let mut counts_ok = true;
    let xi0 = 0.1;
    for g in &shared.grid {
        let w = &g.wave;
        let n = w.grid().n_modes();
        let m = assemble_bloch(w, 0.0, n).map_err(|e| e.to_string())?;
        let k2cp = Complex64::from(w.k().powi(2) * g.jet.c_p);

        let d1 = w.phi().differentiate(1);
        kernel = kernel.max(m.apply(&d1).camax() / m.apply_scale(&d1, false));
        let r = m.apply(&g.jet.phi_p) + w.phi().differentiate(2).to_vector() * k2cp;
        kernel = kernel.max(r.camax() / m.apply_scale(&g.jet.phi_p, false));
        let inv = w.phi().antiderivative(1).map_err(|e| e.to_string())?;
        kernel = kernel.max(m.apply_adjoint(&inv).camax() / m.apply_scale(&inv, true));
        let inv2 = g.jet.phi_p.antiderivative(2).map_err(|e| e.to_string())?;
        let mut r = m.apply_adjoint(&inv2) + w.phi().to_vector() * k2cp;
        r[n] = Complex64::new(0.0, 0.0);
        kernel = kernel.max(r.camax() / m.apply_scale(&inv2, true));

        let basis = kernel_basis(w, &g.jet).map_err(|e| e.to_string())?;
        for (j, row) in basis.gram.iter().enumerate() {
            for (l, v) in row.iter().enumerate() {
                let want = if j == l { 1.0 } else { 0.0 };
                gram = gram.max((v - want).abs());
            }
        }

        let radius = default_window_radius(w.k(), xi0, &g.m0);
        for xi in [1e-3, 1e-2, 3e-2, xi0] {
            let ev = pencil_eigs(
                &assemble_bloch(w, xi, n).map_err(|e| e.to_string())?,
                radius,
            )
            .map_err(|e| e.to_string())?;
            counts_ok &= ev.len() == 2;
            symmetry = symmetry.max(reflection_defect(&ev));
        }
    }
    check(
        kernel <= 1e-8 && gram <= 1e-8 && symmetry <= 1e-8 && counts_ok,
        format!(
            "kernel identities {kernel:.2e} (relative to |L||f|); Gram {gram:.2e}; \
             reflection defect {symmetry:.2e}; two windowed eigenvalues for xi <= {xi0}: {counts_ok}"
        ),
    )
}

fn hill_evans(_: &mut Shared) -> Outcome {
    let params = unit();
    let (_, w) = refined_stokes(0.05, 0.3, &params, 32);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let xi = rng.random_range(-PI..PI);
        let mut ev = pencil_spectrum(&assemble_bloch(&w, xi, 32).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        ev.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
        let lambda = ev[rng.random_range(0..6)];
        let e = evans(&w, lambda, xi).map_err(|e| e.to_string())?;
        worst = worst.max(e.d.norm() / e.scale);
    }

    let (k, c) = (0.3, 2.0);
    let zero = TravelingWave::zero(params, k, c, PeriodicGrid::with_modes(4)).unwrap();
    let mut oracle: f64 = 0.0;
    for (lambda, xi) in [
        (Complex64::new(0.3, -0.7), 0.4),
        (Complex64::new(0.0, 1.5), -2.0),
    ] {
        let got = evans(&zero, lambda, xi).map_err(|e| e.to_string())?;
        let want = zero_profile_evans(&params, k, c, lambda, xi);
        oracle = oracle.max((got.d - want).norm() / got.scale.max(want.norm()));
    }
    check(
        worst <= 1e-6 && oracle <= 1e-10,
        format!(
            "10 Hill eigenpairs: max |D|/scale {worst:.2e}; zero-profile oracle error {oracle:.2e}"
        ),
    )
}

/// `prod (e^{rho_i} - e^{i xi})` over the roots of
/// `-beta k^4 rho^4 + k^2 c rho^2 - lambda k rho + gamma`.
fn zero_profile_evans(
    params: &ModelParams,
    k: f64,
    c: f64,
    lambda: Complex64,
    xi: f64,
) -> Complex64 {
    use nalgebra::{DMatrix, Schur};
    let r = |x: f64| Complex64::new(x, 0.0);
    let poly = [
        r(-params.beta * k.powi(4)),
        r(0.0),
        r(k * k * c),
        -lambda * k,
        r(params.gamma),
    ];
    let mut comp = DMatrix::<Complex64>::zeros(4, 4);
    for j in 0..4 {
        comp[(0, j)] = -poly[j + 1] / poly[0];
    }
    for i in 1..4 {
        comp[(i, i - 1)] = r(1.0);
    }
    let (_, t) = Schur::new(comp).unpack();
    let z = Complex64::from_polar(1.0, xi);
    t.diagonal().iter().map(|rho| rho.exp() - z).product()
}

fn reduced_model(_: &mut Shared) -> Outcome {
    let reduced = ModelParams::new(1.0, 0.0).unwrap();
    let mut all_hyperbolic = true;
    for k in [0.15, 0.2, 0.3] {
        let (_, w) = refined_stokes(0.01, k, &reduced, 64);
        let jet = parameter_jet(&w).map_err(|e| e.to_string())?;
        let w0 = reduced_whitham_matrix(&w, &jet).map_err(|e| e.to_string())?;
        all_hyperbolic &= w0.classification == Classification::StrictlyHyperbolic;
    }

    // The linear dispersion shift is about 48 pi^4 beta k^4 relative, so the
    // 1e-3 gap at beta = 1e-4 is reachable only for k up to about 0.2.
    let mut gaps = Vec::new();
    let mut ok = all_hyperbolic;
    for k in [0.1, 0.15, 0.2] {
        let (_, w) = refined_stokes(0.01, k, &reduced, 64);
        let w0 = reduced_whitham_matrix(&w, &parameter_jet(&w).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        let gap = |beta: f64| -> Result<f64, String> {
            let small = ModelParams::new(1.0, beta).unwrap();
            let wb = refine(&w.with_params(small).unwrap(), k, w.momentum())
                .map_err(|e| e.to_string())?;
            let wm = whitham_matrix(&wb, &parameter_jet(&wb).map_err(|e| e.to_string())?)
                .map_err(|e| e.to_string())?;
            let mut worst: f64 = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    worst = worst
                        .max((wm.entries[i][j] - w0.entries[i][j]).abs() / w0.entries[i][j].abs());
                }
            }
            Ok(worst)
        };
        let (g4, g5) = (gap(1e-4)?, gap(1e-5)?);
        let order = (g4 / g5).log10();
        ok &= g4 <= 1e-3 && (0.8..=1.2).contains(&order);
        gaps.push(format!("k={k}: {g4:.2e} (order {order:.2})"));
    }
    check(
        ok,
        format!(
            "beta=0 waves at k in {{0.15,0.2,0.3}} hyperbolic: {all_hyperbolic}; entrywise relative gap at beta=1e-4 {}",
            gaps.join(", ")
        ),
    )
}

fn main() -> ExitCode {
    let criteria = [
        Criterion {
            id: 1,
            name: "Stokes oracle",
            budget: Some(Duration::from_secs(5)),
            run: stokes_oracle,
        },
        Criterion {
            id: 2,
            name: "Lighthill closed form",
            budget: Some(Duration::from_secs(1)),
            run: lighthill,
        },
        Criterion {
            id: 3,
            name: "Whitham-Stokes eigenvalue law",
            budget: Some(Duration::from_secs(30)),
            run: whitham_stokes,
        },
        Criterion {
            id: 4,
            name: "central identity W = M0 - cI",
            budget: Some(Duration::from_secs(300)),
            run: central_identity,
        },
        Criterion {
            id: 5,
            name: "spectral-slope law",
            budget: Some(Duration::from_secs(600)),
            run: slope_law,
        },
        Criterion {
            id: 6,
            name: "pencil invariants",
            budget: None,
            run: pencil_invariants,
        },
        Criterion {
            id: 7,
            name: "Hill-Evans cross-check",
            budget: Some(Duration::from_secs(120)),
            run: hill_evans,
        },
        Criterion {
            id: 8,
            name: "reduced model",
            budget: None,
            run: reduced_model,
        },
    ];
    let mut shared = Shared::default();
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.run)(&mut shared);
        let elapsed = start.elapsed();
        let over = c.budget.is_some_and(|b| elapsed > b);
        let (status, detail) = match (&outcome, over) {
            (Ok(d), false) => ("PASS", d.clone()),
            (Ok(d), true) => ("FAIL", format!("{d}; over time budget")),
            (Err(d), _) => ("FAIL", d.clone()),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!(
            "criterion {} [{}] {status}: {detail} ({:.2}s)",
            c.id,
            c.name,
            elapsed.as_secs_f64()
        );
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
