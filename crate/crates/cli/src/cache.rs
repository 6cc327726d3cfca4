//! On-disk store of solved waves, one JSON file per key.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use ostwave::wave::{solve_wave, ModelParams, SolverOptions};
use ostwave::{PeriodicGrid, TravelingWave};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{hex, CachePolicy, FORMAT_VERSION};
use crate::error::CliError;

pub const CACHE_DIR_ENV: &str = "OSTWAVE_CACHE_DIR";

/// Everything that selects a wave. Reals are rounded to 12 significant digits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CacheKey {
    pub params: ModelParams,
    pub k: f64,
    pub p: f64,
    pub modes: usize,
    pub opts: SolverOptions,
}

impl CacheKey {
    pub fn canonical(&self) -> String {
        format!(
            "gamma={:.11e};beta={:.11e};k={:.11e};P={:.11e};N={};tol={:.11e};max_iter={};min_step={:.11e}",
            self.params.gamma,
            self.params.beta,
            self.k,
            self.p,
            self.modes,
            self.opts.tol,
            self.opts.max_iter,
            self.opts.min_step
        )
    }

    pub fn file_name(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        format!("wave-{}.json", &hex(&digest)[..32])
    }
}

#[derive(Serialize, Deserialize)]
struct Entry {
    format_version: u32,
    key: String,
    wave: TravelingWave,
}

#[derive(Debug, Clone)]
pub struct WaveCache {
    dir: PathBuf,
    policy: CachePolicy,
    force: bool,
}

impl WaveCache {
    pub fn new(dir: PathBuf, policy: CachePolicy, force: bool) -> Self {
        Self { dir, policy, force }
    }

    /// Directory from the environment, else the configured one, else `<out>/cache`.
    pub fn resolve_dir(configured: Option<&Path>, out: &Path) -> PathBuf {
        match std::env::var_os(CACHE_DIR_ENV) {
            Some(d) if !d.is_empty() => PathBuf::from(d),
            _ => configured.map_or_else(|| out.join("cache"), Path::to_path_buf),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, key: &CacheKey) -> PathBuf {
        self.dir.join(key.file_name())
    }

    /// Reads a cached wave. `Ok(None)` on a miss or when reading is disabled.
    pub fn load(&self, key: &CacheKey) -> Result<Option<TravelingWave>, CliError> {
        if !self.policy.reads() || self.force {
            return Ok(None);
        }
        let path = self.path_for(key);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(CliError::io(&path, e)),
        };
        let invalid = |reason: String| CliError::CacheInvalid {
            path: path.clone(),
            reason,
        };
        let entry: Entry = serde_json::from_str(&text).map_err(|e| invalid(e.to_string()))?;
        if entry.format_version != FORMAT_VERSION {
            return Err(invalid(format!("format_version {}", entry.format_version)));
        }
        if entry.key != key.canonical() {
            return Err(invalid("key does not match file name".into()));
        }
        if entry.wave.grid().n_modes() != key.modes {
            return Err(invalid("mode count does not match key".into()));
        }
        Ok(Some(entry.wave))
    }

    pub fn store(&self, key: &CacheKey, wave: &TravelingWave) -> Result<(), CliError> {
        if !self.policy.writes() {
            return Ok(());
        }
        fs::create_dir_all(&self.dir).map_err(|e| CliError::io(&self.dir, e))?;
        let path = self.path_for(key);
        let entry = Entry {
            format_version: FORMAT_VERSION,
            key: key.canonical(),
            wave: wave.clone(),
        };
        let text = serde_json::to_string_pretty(&entry).expect("wave serializes");
        // Write then rename so concurrent workers never see a partial file.
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        fs::write(&tmp, text).map_err(|e| CliError::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| CliError::io(&path, e))
    }

    /// Cached wave for `key`, solving and storing it on a miss.
    pub fn get_or_solve(
        &self,
        key: &CacheKey,
        seed_amplitude: Option<f64>,
    ) -> Result<TravelingWave, CliError> {
        let start = Instant::now();
        if let Some(w) = self.load(key)? {
            info!(
                "cache hit k={} P={:e}: solve skipped ({:.3} ms)",
                key.k,
                key.p,
                1e3 * start.elapsed().as_secs_f64()
            );
            return Ok(w);
        }
        let grid = PeriodicGrid::with_modes(key.modes);
        let w = solve_wave(&key.params, key.k, key.p, grid, seed_amplitude, &key.opts)?;
        info!(
            "cache miss k={} P={:e}: solved in {:.3} ms",
            key.k,
            key.p,
            1e3 * start.elapsed().as_secs_f64()
        );
        self.store(key, &w)?;
        Ok(w)
    }
}
