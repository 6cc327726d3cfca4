//! One function per subcommand. Each writes its files under the output
//! directory together with a `<command>.manifest.json`.

use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use ostwave::wave::{hamiltonian, modulation_flux, parameter_jet, ModelParams};
use ostwave::whitham::{stokes_lighthill, whitham_matrix};
use ostwave::TravelingWave;
use rayon::prelude::*;
use serde::Serialize;

use crate::cache::{CacheKey, WaveCache};
use crate::config::{spaced, RunConfig, Spacing, FORMAT_VERSION};
use crate::error::CliError;
use crate::report::{analyze, complex_pair, failed_record, Provenance, RecordRow, StabilityReport};
use crate::svg::{chart, Series, Style};

pub struct Context {
    pub cfg: RunConfig,
    pub params: ModelParams,
    pub out: PathBuf,
    pub cache: WaveCache,
    pub pool: rayon::ThreadPool,
}

#[derive(Serialize)]
struct Manifest<'a> {
    format_version: u32,
    command: &'a str,
    provenance: Provenance,
    outputs: &'a [&'a str],
}

impl Context {
    fn key(&self, k: f64, p: f64) -> CacheKey {
        CacheKey {
            params: self.params,
            k,
            p,
            modes: self.cfg.grid.modes,
            opts: self.cfg.solver,
        }
    }

    fn wave(&self, k: f64, p: f64) -> Result<TravelingWave, CliError> {
        self.cache.get_or_solve(&self.key(k, p), None)
    }

    pub fn provenance(&self) -> Provenance {
        Provenance {
            config_hash: self.cfg.hash(),
            code_version: env!("CARGO_PKG_VERSION").into(),
            modes: self.cfg.grid.modes,
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn prepare_out(&self) -> Result<(), CliError> {
        fs::create_dir_all(&self.out).map_err(|e| CliError::io(&self.out, e))
    }

    fn finish(&self, command: &str, outputs: &[&str]) -> Result<(), CliError> {
        let manifest = Manifest {
            format_version: FORMAT_VERSION,
            command,
            provenance: self.provenance(),
            outputs,
        };
        write_json(&self.path(&format!("{command}.manifest.json")), &manifest)?;
        for o in outputs {
            info!("wrote {}", self.path(o).display());
        }
        Ok(())
    }

    /// Runs `f` over the sweep on the worker pool, keeping sweep order.
    fn sweep<T: Send>(&self, f: impl Fn(f64, f64) -> T + Sync) -> Vec<T> {
        let pts = self.cfg.sweep_points();
        self.pool
            .install(|| pts.par_iter().map(|&(k, p)| f(k, p)).collect())
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("output serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_csv<T: Serialize>(
    path: &Path,
    rows: impl IntoIterator<Item = T>,
) -> Result<(), CliError> {
    let as_io = |e: csv::Error| CliError::io(path, e.into());
    let mut w = csv::Writer::from_path(path).map_err(as_io)?;
    for r in rows {
        w.serialize(r).map_err(as_io)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn checks(failed: usize, total: usize) -> Result<(), CliError> {
    if failed == 0 {
        Ok(())
    } else {
        Err(CliError::ChecksFailed { failed, total })
    }
}

#[derive(Serialize)]
struct StokesRow {
    k: f64,
    lighthill_product: Option<f64>,
    regime: &'static str,
    crossing: bool,
}

pub fn stokes_criterion(
    ctx: &Context,
    k_min: f64,
    k_max: f64,
    samples: usize,
) -> Result<(), CliError> {
    if !(k_min > 0.0 && k_min < k_max && samples >= 2) {
        return Err(CliError::Config(
            "need 0 < k_min < k_max and at least 2 samples".into(),
        ));
    }
    ctx.prepare_out()?;
    let mut rows: Vec<StokesRow> = spaced([k_min, k_max], samples, Spacing::Linear)
        .into_iter()
        .map(|k| {
            let l = stokes_lighthill(k, &ctx.params).ok();
            let regime = match l {
                Some(v) if v > 0.0 => "hyperbolic",
                Some(v) if v < 0.0 => "elliptic",
                Some(_) => "degenerate",
                None => "resonant",
            };
            StokesRow {
                k,
                lighthill_product: l,
                regime,
                crossing: false,
            }
        })
        .collect();
    for i in 1..rows.len() {
        if let (Some(a), Some(b)) = (rows[i - 1].lighthill_product, rows[i].lighthill_product) {
            if a.signum() != b.signum() {
                rows[i].crossing = true;
                println!(
                    "sign change between k={} and k={}",
                    rows[i - 1].k,
                    rows[i].k
                );
            }
        }
    }
    write_csv(&ctx.path("stokes-criterion.csv"), &rows)?;
    ctx.finish("stokes-criterion", &["stokes-criterion.csv"])
}

#[derive(Serialize)]
struct WaveFile<'a> {
    format_version: u32,
    wave: &'a TravelingWave,
}

pub fn solve(ctx: &Context, k: f64, p: f64, seed_amplitude: Option<f64>) -> Result<(), CliError> {
    ctx.prepare_out()?;
    let w = ctx.cache.get_or_solve(&ctx.key(k, p), seed_amplitude)?;
    let name = format!("wave-k{k}-P{p:e}.json");
    write_json(
        &ctx.path(&name),
        &WaveFile {
            format_version: FORMAT_VERSION,
            wave: &w,
        },
    )?;
    println!("{w}");
    ctx.finish("solve", &[&name])
}

#[derive(Serialize)]
struct FamilyRow {
    k: f64,
    #[serde(rename = "P")]
    p: f64,
    c: Option<f64>,
    #[serde(rename = "H")]
    h: Option<f64>,
    #[serde(rename = "G")]
    g: Option<f64>,
    residual_norm: Option<f64>,
    error: Option<String>,
}

pub fn family(ctx: &Context) -> Result<(), CliError> {
    ctx.prepare_out()?;
    let rows = ctx.sweep(|k, p| match ctx.wave(k, p) {
        Ok(w) => Ok(FamilyRow {
            k,
            p,
            c: Some(w.speed()),
            h: Some(hamiltonian(&w)),
            g: Some(modulation_flux(&w)),
            residual_norm: Some(w.residual_norm()),
            error: None,
        }),
        Err(e @ CliError::Numeric(_)) => Ok(FamilyRow {
            k,
            p,
            c: None,
            h: None,
            g: None,
            residual_norm: None,
            error: Some(e.to_string()),
        }),
        Err(e) => Err(e),
    });
    let rows: Vec<FamilyRow> = rows.into_iter().collect::<Result<_, _>>()?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    write_csv(&ctx.path("family.csv"), &rows)?;
    ctx.finish("family", &["family.csv"])?;
    println!("{} waves, {failed} failed", rows.len());
    checks(failed, rows.len())
}

#[derive(Serialize)]
struct WhithamRow {
    gamma: f64,
    beta: f64,
    k: f64,
    #[serde(rename = "P")]
    p: f64,
    c: f64,
    #[serde(rename = "W11")]
    w11: f64,
    #[serde(rename = "W12")]
    w12: f64,
    #[serde(rename = "W21")]
    w21: f64,
    #[serde(rename = "W22")]
    w22: f64,
    re_l1: f64,
    im_l1: f64,
    re_l2: f64,
    im_l2: f64,
    classification: &'static str,
}

pub fn whitham(ctx: &Context) -> Result<(), CliError> {
    ctx.prepare_out()?;
    let results = ctx.sweep(|k, p| -> Result<WhithamRow, CliError> {
        let w = ctx.wave(k, p)?;
        let wm = whitham_matrix(&w, &parameter_jet(&w)?)?;
        let e = wm.entries;
        let [l1, l2] = wm.eigenvalues;
        Ok(WhithamRow {
            gamma: ctx.params.gamma,
            beta: ctx.params.beta,
            k,
            p,
            c: w.speed(),
            w11: e[0][0],
            w12: e[0][1],
            w21: e[1][0],
            w22: e[1][1],
            re_l1: l1.re,
            im_l1: l1.im,
            re_l2: l2.re,
            im_l2: l2.im,
            classification: wm.classification.label(),
        })
    });
    let total = results.len();
    let mut rows = Vec::new();
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(CliError::Numeric(e)) => warn!("{e}"),
            Err(e) => return Err(e),
        }
    }
    write_csv(&ctx.path("whitham-map.csv"), &rows)?;
    ctx.finish("whitham", &["whitham-map.csv"])?;
    println!("{} of {total} waves classified", rows.len());
    checks(total - rows.len(), total)
}

#[derive(Serialize)]
struct BlochRow {
    xi: f64,
    re_l1: f64,
    im_l1: f64,
    re_l2: f64,
    im_l2: f64,
}

#[derive(Serialize)]
struct BlochSummary {
    format_version: u32,
    k: f64,
    #[serde(rename = "P")]
    p: f64,
    c: f64,
    mu1: [f64; 2],
    mu2: [f64; 2],
    max_re_in_window: f64,
    classification: &'static str,
    window_radius: f64,
    provenance: Provenance,
}

pub fn bloch(ctx: &Context, k: f64, p: f64, svg: bool) -> Result<(), CliError> {
    ctx.prepare_out()?;
    let a = analyze(ctx.wave(k, p)?, &ctx.cfg.xi_grid())?;
    let curve = &a.curve;
    let rows = curve.xi_grid.iter().enumerate().map(|(i, &xi)| BlochRow {
        xi,
        re_l1: curve.branches[0][i].re,
        im_l1: curve.branches[0][i].im,
        re_l2: curve.branches[1][i].re,
        im_l2: curve.branches[1][i].im,
    });
    write_csv(&ctx.path("bloch.csv"), rows)?;
    write_json(
        &ctx.path("bloch.json"),
        &BlochSummary {
            format_version: FORMAT_VERSION,
            k: a.wave.k(),
            p: a.wave.momentum(),
            c: a.wave.speed(),
            mu1: complex_pair(a.m0.mu[0]),
            mu2: complex_pair(a.m0.mu[1]),
            max_re_in_window: curve.max_abs_re(),
            classification: a.m0.classification.label(),
            window_radius: curve.window_radius,
            provenance: ctx.provenance(),
        },
    )?;
    let mut outputs = vec!["bloch.csv", "bloch.json"];
    if svg {
        let series: Vec<Series> = (0..2)
            .flat_map(|j| {
                let b = &curve.branches[j];
                let pts = |f: fn(&num_complex::Complex64) -> f64| {
                    curve
                        .xi_grid
                        .iter()
                        .zip(b)
                        .map(|(&x, l)| (x, f(l)))
                        .collect()
                };
                [
                    Series::new(format!("Re lambda_{}", j + 1), pts(|l| l.re), Style::Line),
                    Series::new(format!("Im lambda_{}", j + 1), pts(|l| l.im), Style::Line),
                ]
            })
            .collect();
        let title = format!("Spectral curves near the origin, k={k}, P={p:e}");
        write_text(
            &ctx.path("bloch.svg"),
            &chart(&title, "xi", "lambda", &series),
        )?;
        outputs.push("bloch.svg");
    }
    println!(
        "{}: mu = {:.10}, {:.10}; max |Re lambda| = {:.3e}",
        a.m0.classification,
        a.m0.mu[0],
        a.m0.mu[1],
        curve.max_abs_re()
    );
    ctx.finish("bloch", &outputs)
}

pub fn verify(ctx: &Context) -> Result<(), CliError> {
    ctx.prepare_out()?;
    let xi = ctx.cfg.xi_grid();
    let t = ctx.cfg.thresholds;
    let records = ctx.sweep(|k, p| match ctx.wave(k, p) {
        Ok(w) => Ok(match analyze(w, &xi) {
            Ok(a) => a.record(&t),
            Err(e) => failed_record(k, p, e.to_string()),
        }),
        Err(CliError::Numeric(e)) => Ok(failed_record(k, p, e.to_string())),
        Err(e) => Err(e),
    });
    let records = records.into_iter().collect::<Result<Vec<_>, _>>()?;
    let report = StabilityReport::new(ctx.provenance(), t, records);
    write_json(&ctx.path("verify.json"), &report)?;
    write_csv(
        &ctx.path("verify.csv"),
        report.records.iter().map(RecordRow::from),
    )?;
    ctx.finish("verify", &["verify.json", "verify.csv"])?;
    let s = report.summary;
    println!(
        "{} records: {} passed, {} failed ({} hyperbolic, {} elliptic, {} degenerate, {} flagged, {} errors)",
        s.total, s.passed, s.failed, s.hyperbolic, s.elliptic, s.degenerate, s.flagged, s.errors
    );
    checks(s.failed, s.total)
}

/// Renders a stored stability report; performs no computation.
pub fn report(ctx: &Context, input: Option<&Path>) -> Result<(), CliError> {
    let input = input.map_or_else(|| ctx.path("verify.json"), Path::to_path_buf);
    let text = fs::read_to_string(&input).map_err(|e| CliError::io(&input, e))?;
    let rep: StabilityReport = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", input.display())))?;
    if rep.format_version != FORMAT_VERSION {
        return Err(CliError::Config(format!(
            "{}: unsupported format_version {}",
            input.display(),
            rep.format_version
        )));
    }
    ctx.prepare_out()?;

    let by_class = |label: Option<&str>| -> Vec<(f64, f64)> {
        rep.records
            .iter()
            .filter(|r| r.whitham_classification.as_deref() == label)
            .map(|r| (r.k, r.p.log10()))
            .collect()
    };
    let map = [
        Series::new("hyperbolic", by_class(Some("hyperbolic")), Style::Markers),
        Series::new("elliptic", by_class(Some("elliptic")), Style::Markers),
        Series::new("degenerate", by_class(Some("degenerate")), Style::Markers),
        Series::new("failed", by_class(None), Style::Markers),
    ];
    write_text(
        &ctx.path("classification-map.svg"),
        &chart("Whitham classification", "k", "log10 P", &map),
    )?;
    let residuals: Vec<(f64, f64)> = rep
        .records
        .iter()
        .filter_map(|r| r.residual.map(|v| (r.k, v.max(1e-18).log10())))
        .collect();
    write_text(
        &ctx.path("residuals.svg"),
        &chart(
            "Identity residual",
            "k",
            "log10 residual",
            &[Series::new("residual", residuals, Style::Markers)],
        ),
    )?;

    let s = rep.summary;
    let mut md = format!(
        "# Stability report\n\nconfig hash `{}`, code version {}, {} modes\n\n\
         | records | passed | failed | hyperbolic | elliptic | degenerate | flagged | errors |\n\
         |---|---|---|---|---|---|---|---|\n| {} | {} | {} | {} | {} | {} | {} | {} |\n\n\
         Thresholds: identity residual <= {:e}, hyperbolic max |Re lambda| <= {:e} x scale.\n\n\
         ![classification](classification-map.svg)\n![residuals](residuals.svg)\n\n\
         | k | P | c | Whitham | M0 | residual | max Re | pass |\n|---|---|---|---|---|---|---|---|\n",
        rep.provenance.config_hash,
        rep.provenance.code_version,
        rep.provenance.modes,
        s.total,
        s.passed,
        s.failed,
        s.hyperbolic,
        s.elliptic,
        s.degenerate,
        s.flagged,
        s.errors,
        rep.thresholds.identity,
        rep.thresholds.real_part,
    );
    let opt = |v: Option<f64>| v.map_or_else(|| "-".into(), |x| format!("{x:.6e}"));
    for r in &rep.records {
        md.push_str(&format!(
            "| {} | {:e} | {} | {} | {} | {} | {} | {} |\n",
            r.k,
            r.p,
            r.c.map_or_else(|| "-".into(), |c| format!("{c:.10}")),
            r.whitham_classification.as_deref().unwrap_or("-"),
            r.m0_classification.as_deref().unwrap_or("-"),
            opt(r.residual),
            opt(r.max_re_in_window),
            if r.pass {
                "yes"
            } else {
                r.error.as_deref().unwrap_or("no")
            },
        ));
    }
    write_text(&ctx.path("report.md"), &md)?;
    ctx.finish(
        "report",
        &["report.md", "classification-map.svg", "residuals.svg"],
    )?;
    println!("rendered {} records from {}", s.total, input.display());
    Ok(())
}
