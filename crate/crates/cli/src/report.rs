//! Stability records for a sweep and their JSON/CSV forms.

use num_complex::Complex64;
use ostwave::bloch::{
    default_window_radius, kernel_basis, modulation_matrix, spectral_curves, verify_whitham_link,
    ModulationMatrix, SpectralCurve,
};
use ostwave::wave::parameter_jet;
use ostwave::whitham::{whitham_matrix, Classification, WhithamMatrix};
use ostwave::TravelingWave;
use serde::{Deserialize, Serialize};

use crate::config::{Thresholds, FORMAT_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub code_version: String,
    pub modes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRecord {
    pub k: f64,
    #[serde(rename = "P")]
    pub p: f64,
    pub c: Option<f64>,
    pub whitham_classification: Option<String>,
    pub m0_classification: Option<String>,
    /// `||W - (M0 - cI)||_inf / max(||W||_inf, 1)`.
    pub residual: Option<f64>,
    pub row2_residuals: Option<[f64; 2]>,
    pub max_re_in_window: Option<f64>,
    /// `max |lambda|` over the computed branches.
    pub spectrum_scale: Option<f64>,
    /// The two classifications disagree.
    pub flagged: bool,
    pub pass: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
    pub hyperbolic: usize,
    pub elliptic: usize,
    pub degenerate: usize,
    pub flagged: usize,
    pub errors: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub format_version: u32,
    pub provenance: Provenance,
    pub thresholds: Thresholds,
    pub records: Vec<StabilityRecord>,
    pub summary: Summary,
}

impl StabilityReport {
    pub fn new(
        provenance: Provenance,
        thresholds: Thresholds,
        records: Vec<StabilityRecord>,
    ) -> Self {
        let mut s = Summary {
            total: records.len(),
            ..Summary::default()
        };
        for r in &records {
            if r.pass {
                s.passed += 1;
            } else {
                s.failed += 1;
            }
            s.flagged += usize::from(r.flagged);
            s.errors += usize::from(r.error.is_some());
            match r.whitham_classification.as_deref() {
                Some("hyperbolic") => s.hyperbolic += 1,
                Some("elliptic") => s.elliptic += 1,
                Some(_) => s.degenerate += 1,
                None => {}
            }
        }
        Self {
            format_version: FORMAT_VERSION,
            provenance,
            thresholds,
            records,
            summary: s,
        }
    }
}

/// Flat CSV row of a [`StabilityRecord`].
#[derive(Serialize)]
pub struct RecordRow<'a> {
    k: f64,
    #[serde(rename = "P")]
    p: f64,
    c: Option<f64>,
    whitham_classification: Option<&'a str>,
    m0_classification: Option<&'a str>,
    residual: Option<f64>,
    row2_residual_1: Option<f64>,
    row2_residual_2: Option<f64>,
    max_re_in_window: Option<f64>,
    spectrum_scale: Option<f64>,
    flagged: bool,
    pass: bool,
    error: Option<&'a str>,
}

impl<'a> From<&'a StabilityRecord> for RecordRow<'a> {
    fn from(r: &'a StabilityRecord) -> Self {
        Self {
            k: r.k,
            p: r.p,
            c: r.c,
            whitham_classification: r.whitham_classification.as_deref(),
            m0_classification: r.m0_classification.as_deref(),
            residual: r.residual,
            row2_residual_1: r.row2_residuals.map(|v| v[0]),
            row2_residual_2: r.row2_residuals.map(|v| v[1]),
            max_re_in_window: r.max_re_in_window,
            spectrum_scale: r.spectrum_scale,
            flagged: r.flagged,
            pass: r.pass,
            error: r.error.as_deref(),
        }
    }
}

/// Everything computed for one wave.
pub struct Analysis {
    pub wave: TravelingWave,
    pub whitham: WhithamMatrix,
    pub m0: ModulationMatrix,
    pub residual: f64,
    pub row2_residuals: [f64; 2],
    pub curve: SpectralCurve,
}

pub fn analyze(wave: TravelingWave, xi_grid: &[f64]) -> ostwave::Result<Analysis> {
    let jet = parameter_jet(&wave)?;
    let whitham = whitham_matrix(&wave, &jet)?;
    let basis = kernel_basis(&wave, &jet)?;
    let m0 = modulation_matrix(&wave, &jet, &basis)?;
    let link = verify_whitham_link(&whitham, &m0, wave.speed())?;
    let xi_max = xi_grid.iter().copied().fold(0.0, f64::max);
    let radius = default_window_radius(wave.k(), xi_max, &m0);
    let curve = spectral_curves(&wave, xi_grid, radius)?;
    Ok(Analysis {
        wave,
        whitham,
        m0,
        residual: link.residual,
        row2_residuals: link.row2_residuals,
        curve,
    })
}

impl Analysis {
    pub fn record(&self, t: &Thresholds) -> StabilityRecord {
        let wc = self.whitham.classification;
        let mc = self.m0.classification;
        let flagged = !wc.same_kind(&mc);
        let max_re = self.curve.max_abs_re();
        let scale = self.curve.max_abs();
        let stable_ok = wc != Classification::StrictlyHyperbolic || max_re <= t.real_part * scale;
        StabilityRecord {
            k: self.wave.k(),
            p: self.wave.momentum(),
            c: Some(self.wave.speed()),
            whitham_classification: Some(wc.label().into()),
            m0_classification: Some(mc.label().into()),
            residual: Some(self.residual),
            row2_residuals: Some(self.row2_residuals),
            max_re_in_window: Some(max_re),
            spectrum_scale: Some(scale),
            flagged,
            pass: !flagged && self.residual <= t.identity && stable_ok,
            error: None,
        }
    }
}

pub fn failed_record(k: f64, p: f64, error: String) -> StabilityRecord {
    StabilityRecord {
        k,
        p,
        c: None,
        whitham_classification: None,
        m0_classification: None,
        residual: None,
        row2_residuals: None,
        max_re_in_window: None,
        spectrum_scale: None,
        flagged: false,
        pass: false,
        error: Some(error),
    }
}

pub fn complex_pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}
