//! Run configuration: a TOML file whose values can be overridden by flags.

use std::path::{Path, PathBuf};

use ostwave::wave::{ModelParams, SolverOptions};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub params: ParamsConfig,
    pub grid: GridConfig,
    pub solver: SolverOptions,
    pub thresholds: Thresholds,
    /// Rectangles in the (k, P) plane; their sample points are merged.
    pub sweep: Vec<SweepRect>,
    pub xi: XiConfig,
    pub stokes: StokesRange,
    pub output: OutputConfig,
    pub cache: CacheConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub gamma: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub modes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    /// Bound on the relative residual of the Whitham link.
    pub identity: f64,
    /// Bound on `max |Re lambda| / max |lambda|` for hyperbolic waves.
    pub real_part: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepRect {
    pub k: [f64; 2],
    #[serde(rename = "P")]
    pub p: [f64; 2],
    pub k_samples: usize,
    #[serde(rename = "P_samples")]
    pub p_samples: usize,
    #[serde(rename = "P_spacing", default = "log_spacing")]
    pub p_spacing: Spacing,
}

fn log_spacing() -> Spacing {
    Spacing::Log
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XiConfig {
    pub max: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StokesRange {
    pub k_min: f64,
    pub k_max: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CachePolicy {
    ReadWrite,
    Read,
    Write,
    Off,
}

impl CachePolicy {
    pub fn reads(self) -> bool {
        matches!(self, Self::ReadWrite | Self::Read)
    }

    pub fn writes(self) -> bool {
        matches!(self, Self::ReadWrite | Self::Write)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CacheConfig {
    pub policy: CachePolicy,
    /// Defaults to `<output>/cache`; `OSTWAVE_CACHE_DIR` takes precedence.
    pub dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: ParamsConfig {
                gamma: 1.0,
                beta: 1.0,
            },
            grid: GridConfig { modes: 32 },
            solver: SolverOptions::default(),
            thresholds: Thresholds::default(),
            sweep: Vec::new(),
            xi: XiConfig {
                max: 0.1,
                samples: 10,
            },
            stokes: StokesRange {
                k_min: 0.05,
                k_max: 0.3,
                samples: 251,
            },
            output: OutputConfig { dir: "out".into() },
            cache: CacheConfig::default(),
        }
    }
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            identity: 1e-6,
            real_part: 1e-8,
        }
    }
}

impl Default for CacheConfig {
    fn default() -> Self {
        Self {
            policy: CachePolicy::ReadWrite,
            dir: None,
        }
    }
}

/// The subset of the configuration that determines numeric results.
#[derive(Serialize)]
struct HashedPart<'a> {
    format_version: u32,
    params: &'a ParamsConfig,
    grid: &'a GridConfig,
    solver: &'a SolverOptions,
    thresholds: &'a Thresholds,
    sweep: &'a [SweepRect],
    xi: &'a XiConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn model_params(&self) -> Result<ModelParams, CliError> {
        ModelParams::new(self.params.gamma, self.params.beta)
            .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        self.model_params()?;
        if self.grid.modes < 2 {
            return bad(format!(
                "grid.modes must be at least 2, got {}",
                self.grid.modes
            ));
        }
        let s = &self.solver;
        if !(s.tol > 0.0 && s.min_step > 0.0 && s.min_step <= 1.0 && s.max_iter > 0) {
            return bad("solver tolerances must be positive and min_step at most 1".into());
        }
        let t = &self.thresholds;
        if !(t.identity > 0.0 && t.real_part > 0.0) {
            return bad("thresholds must be positive".into());
        }
        for (i, r) in self.sweep.iter().enumerate() {
            let ordered = |v: [f64; 2]| v[0] > 0.0 && v[0] <= v[1] && v[1].is_finite();
            if !(ordered(r.k) && ordered(r.p) && r.k_samples > 0 && r.p_samples > 0) {
                return bad(format!(
                    "sweep[{i}] must have 0 < lo <= hi for k and P and at least one sample each"
                ));
            }
        }
        if !(self.xi.max > 0.0 && self.xi.max <= std::f64::consts::PI && self.xi.samples > 0) {
            return bad("xi.max must lie in (0, pi] with at least one sample".into());
        }
        let st = &self.stokes;
        if !(st.k_min > 0.0 && st.k_min < st.k_max && st.samples >= 2) {
            return bad("stokes range needs 0 < k_min < k_max and at least 2 samples".into());
        }
        Ok(())
    }

    /// Hex SHA-256 of the numerically relevant settings.
    pub fn hash(&self) -> String {
        let part = HashedPart {
            format_version: FORMAT_VERSION,
            params: &self.params,
            grid: &self.grid,
            solver: &self.solver,
            thresholds: &self.thresholds,
            sweep: &self.sweep,
            xi: &self.xi,
        };
        let bytes = serde_json::to_vec(&part).expect("config serializes");
        hex(&Sha256::digest(bytes))
    }

    /// Sweep points, deduplicated and sorted by `(k, P)`.
    pub fn sweep_points(&self) -> Vec<(f64, f64)> {
        let mut pts: Vec<(f64, f64)> = self
            .sweep
            .iter()
            .flat_map(|r| {
                let ks = spaced(r.k, r.k_samples, Spacing::Linear);
                let ps = spaced(r.p, r.p_samples, r.p_spacing);
                ks.into_iter()
                    .flat_map(move |k| ps.clone().into_iter().map(move |p| (k, p)))
            })
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        pts.dedup();
        pts
    }

    /// Positive `xi` samples, evenly spaced up to `xi.max`.
    pub fn xi_grid(&self) -> Vec<f64> {
        let n = self.xi.samples;
        (1..=n).map(|i| self.xi.max * i as f64 / n as f64).collect()
    }
}

pub fn spaced(range: [f64; 2], n: usize, spacing: Spacing) -> Vec<f64> {
    if n == 1 {
        return vec![range[0]];
    }
    let t = |i: usize| i as f64 / (n - 1) as f64;
    match spacing {
        Spacing::Linear => (0..n)
            .map(|i| range[0] + (range[1] - range[0]) * t(i))
            .collect(),
        Spacing::Log => {
            let (a, b) = (range[0].ln(), range[1].ln());
            let mut v: Vec<f64> = (0..n).map(|i| (a + (b - a) * t(i)).exp()).collect();
            v[0] = range[0];
            v[n - 1] = range[1];
            v
        }
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
