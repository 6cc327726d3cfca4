//! `ostwave`: solve, classify and check periodic Ostrovsky waves from the shell.

mod cache;
mod commands;
mod config;
mod error;
mod report;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cache::WaveCache;
use commands::Context;
use config::RunConfig;
use error::CliError;

#[derive(Parser)]
#[command(
    name = "ostwave",
    version,
    about = "Periodic Ostrovsky waves: profiles, modulation and Bloch spectra"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand; they override the config file.
#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Fourier modes N.
    #[arg(long, global = true)]
    modes: Option<usize>,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Ignore cached waves and overwrite them.
    #[arg(long, global = true)]
    force: bool,
    #[arg(long, global = true, allow_negative_numbers = true)]
    gamma: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    beta: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the sign of the small-amplitude modulation criterion over k.
    StokesCriterion {
        #[arg(long)]
        k_min: Option<f64>,
        #[arg(long)]
        k_max: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Solve one wave and write it as JSON.
    Solve {
        #[arg(long)]
        k: f64,
        /// Momentum P.
        #[arg(long = "p", visible_alias = "momentum")]
        p: f64,
        /// Stokes amplitude used to seed continuation.
        #[arg(long)]
        seed_amplitude: Option<f64>,
    },
    /// Solve every wave of the configured sweep.
    Family,
    /// Whitham matrices and classification over the sweep.
    Whitham,
    /// Spectral curves near the origin for one wave.
    Bloch {
        #[arg(long)]
        k: f64,
        #[arg(long = "p", visible_alias = "momentum")]
        p: f64,
        /// Also write an SVG chart.
        #[arg(long)]
        svg: bool,
    },
    /// Full stability check over the sweep.
    Verify,
    /// Render a stored verify.json as markdown and SVG.
    Report {
        /// Defaults to `<out>/verify.json`.
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

fn context(common: &Common) -> Result<Context, CliError> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &common.out {
        cfg.output.dir = out.clone();
    }
    if let Some(n) = common.modes {
        cfg.grid.modes = n;
    }
    if let Some(g) = common.gamma {
        cfg.params.gamma = g;
    }
    if let Some(b) = common.beta {
        cfg.params.beta = b;
    }
    cfg.validate()?;
    let params = cfg.model_params()?;
    let out = cfg.output.dir.clone();
    let cache_dir = WaveCache::resolve_dir(cfg.cache.dir.as_deref(), &out);
    let cache = WaveCache::new(cache_dir, cfg.cache.policy, common.force);
    log::debug!("cache directory {}", cache.dir().display());
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = common.jobs {
        if j == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        pool = pool.num_threads(j);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    Ok(Context {
        cfg,
        params,
        out,
        cache,
        pool,
    })
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let ctx = context(&cli.common)?;
    match &cli.command {
        Command::StokesCriterion {
            k_min,
            k_max,
            samples,
        } => {
            let s = ctx.cfg.stokes;
            commands::stokes_criterion(
                &ctx,
                k_min.unwrap_or(s.k_min),
                k_max.unwrap_or(s.k_max),
                samples.unwrap_or(s.samples),
            )
        }
        Command::Solve {
            k,
            p,
            seed_amplitude,
        } => commands::solve(&ctx, *k, *p, *seed_amplitude),
        Command::Family => commands::family(&ctx),
        Command::Whitham => commands::whitham(&ctx),
        Command::Bloch { k, p, svg } => commands::bloch(&ctx, *k, *p, *svg),
        Command::Verify => commands::verify(&ctx),
        Command::Report { input } => commands::report(&ctx, input.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
