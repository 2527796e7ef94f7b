//! Scenario documents (TOML): simulation grid, cavity, species, analysis
//! windows and Q-dip masks. Unknown keys are rejected with their location.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::cavity::CavityMode;
use crate::error::{Error, Result};
use crate::fit::{CrossingOptions, CrossingWindow, QDipSpec, Weighting};
use crate::simulate::{
    linspace, ResonanceSource, SpeciesEntry, SweepConfig, ThermalSetting, DEFAULT_NOISE_SIGMA,
};
use crate::spinphys::SpinSpecies;

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_noise")]
    pub noise_sigma: f64,
    pub grid: GridSection,
    pub cavity: CavitySection,
    #[serde(default)]
    pub species: Vec<SpeciesSection>,
    pub thermal: Option<ThermalSection>,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub estimators: EstimatorSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn default_noise() -> f64 {
    DEFAULT_NOISE_SIGMA
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub b_min: f64,
    pub b_max: f64,
    pub n_b: usize,
    /// Defaults to the cavity frequency.
    pub f_center: Option<f64>,
    #[serde(default = "default_span")]
    pub f_span: f64,
    #[serde(default = "default_nf")]
    pub n_f: usize,
}

fn default_span() -> f64 {
    30e6
}
fn default_nf() -> usize {
    2001
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CavitySection {
    pub omega_c: f64,
    pub kappa: f64,
    pub kappa_in: Option<f64>,
    pub kappa_out: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SpeciesSection {
    pub label: String,
    pub spin: f64,
    #[serde(rename = "D", default)]
    pub d: f64,
    #[serde(default = "default_gamma")]
    pub gamma_e: f64,
    #[serde(rename = "Gamma_d")]
    pub gamma_d: f64,
    pub g: f64,
    /// [m_from, m_to]; absent means γe·B − 2D.
    pub transition: Option<[f64; 2]>,
    pub coupling_scale: Option<f64>,
}

fn default_gamma() -> f64 {
    28e9
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ThermalSection {
    pub temperature: f64,
    #[serde(rename = "D", default = "default_thermal_d")]
    pub d: f64,
}

fn default_thermal_d() -> f64 {
    70e6
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    #[serde(default = "default_gamma")]
    pub gamma_e: f64,
    #[serde(default)]
    pub free_gamma: bool,
    #[serde(default = "default_weighting")]
    pub weighting: String,
    #[serde(default = "default_true")]
    pub secondary_peaks: bool,
    #[serde(default)]
    pub windows: Vec<WindowSection>,
    #[serde(default)]
    pub qdip: Vec<QDipSection>,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection {
            gamma_e: default_gamma(),
            free_gamma: false,
            weighting: default_weighting(),
            secondary_peaks: true,
            windows: Vec::new(),
            qdip: Vec::new(),
        }
    }
}

fn default_weighting() -> String {
    "linewidth-floor".into()
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct WindowSection {
    /// Suffix of the summary keys (g<label>, D<label>); defaults to the
    /// 1-based window index.
    pub label: Option<String>,
    pub b_lo: f64,
    pub b_hi: f64,
    pub g: f64,
    #[serde(rename = "D")]
    pub d: f64,
    pub omega_c: Option<f64>,
    #[serde(default = "default_true")]
    pub upper: bool,
    #[serde(default = "default_true")]
    pub lower: bool,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct QDipSection {
    pub b_lo: f64,
    pub b_hi: f64,
    /// Fixed coupling; when absent, taken from crossing window `from_window`.
    pub g: Option<f64>,
    pub from_window: Option<usize>,
    pub mask_mhz: f64,
    #[serde(default)]
    pub kappa_free: bool,
    #[serde(default = "default_gd_guess")]
    pub gamma_d_guess: f64,
}

fn default_gd_guess() -> f64 {
    1e6
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSection {
    #[serde(default = "default_volume")]
    pub volume: f64,
    #[serde(default = "default_sigma_abs")]
    pub sigma_abs: f64,
    #[serde(default = "default_ge")]
    pub ge: f64,
}

impl Default for EstimatorSection {
    fn default() -> Self {
        EstimatorSection {
            volume: default_volume(),
            sigma_abs: default_sigma_abs(),
            ge: default_ge(),
        }
    }
}

fn default_volume() -> f64 {
    2.13e-7
}
fn default_sigma_abs() -> f64 {
    1e-21
}
fn default_ge() -> f64 {
    2.002
}

#[derive(Debug, Clone, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<String>,
}

/// SHA-256 of the raw config text, hex encoded.
pub fn config_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn positive(path: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{path} must be > 0, got {v}")))
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self> {
        let cfg: ScenarioConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("{origin}: {e}")))?;
        cfg.validate().map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{origin}: {m}")),
            other => other,
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg = Self::from_toml_str(&text, &path.display().to_string())?;
        Ok((cfg, text))
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if !(g.b_min >= 0.0 && g.b_max > g.b_min) {
            return Err(Error::Config("grid: need 0 <= b_min < b_max".into()));
        }
        if g.n_b < 2 || g.n_f < 8 {
            return Err(Error::Config("grid: need n_b >= 2 and n_f >= 8".into()));
        }
        positive("grid.f_span", g.f_span)?;
        positive("cavity.omega_c", self.cavity.omega_c)?;
        positive("cavity.kappa", self.cavity.kappa)?;
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::Config("noise_sigma must be >= 0".into()));
        }
        for (i, s) in self.species.iter().enumerate() {
            self.species_entry(i, s)?;
        }
        if let Some(t) = &self.thermal {
            positive("thermal.temperature", t.temperature)?;
        }
        match self.analysis.weighting.as_str() {
            "uniform" | "sigma" | "linewidth-floor" => {}
            w => {
                return Err(Error::Config(format!(
                    "analysis.weighting: unknown value {w:?} (uniform | sigma | linewidth-floor)"
                )))
            }
        }
        for (i, w) in self.analysis.windows.iter().enumerate() {
            if !(w.b_lo < w.b_hi) {
                return Err(Error::Config(format!("analysis.windows[{i}]: need b_lo < b_hi")));
            }
            positive(&format!("analysis.windows[{i}].g"), w.g)?;
        }
        let mut labels = self.window_labels();
        labels.sort();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("analysis.windows: duplicate labels".into()));
        }
        for (i, q) in self.analysis.qdip.iter().enumerate() {
            if !(q.b_lo < q.b_hi) {
                return Err(Error::Config(format!("analysis.qdip[{i}]: need b_lo < b_hi")));
            }
            match (q.g, q.from_window) {
                (Some(g), _) => positive(&format!("analysis.qdip[{i}].g"), g)?,
                (None, Some(k)) if k < self.analysis.windows.len() => {}
                _ => {
                    return Err(Error::Config(format!(
                        "analysis.qdip[{i}]: give g or a valid from_window"
                    )))
                }
            }
            if !(q.mask_mhz >= 0.0) {
                return Err(Error::Config(format!("analysis.qdip[{i}].mask_mhz must be >= 0")));
            }
            positive(&format!("analysis.qdip[{i}].gamma_d_guess"), q.gamma_d_guess)?;
        }
        positive("estimators.volume", self.estimators.volume)?;
        positive("estimators.sigma_abs", self.estimators.sigma_abs)?;
        positive("estimators.ge", self.estimators.ge)?;
        Ok(())
    }

    fn species_entry(&self, i: usize, s: &SpeciesSection) -> Result<SpeciesEntry> {
        let spin = SpinSpecies::new(s.label.clone(), s.spin, s.d, s.gamma_e, s.gamma_d, s.g)
            .map_err(|e| Error::Config(format!("species[{i}]: {e}")))?;
        let source = match s.transition {
            None => ResonanceSource::Dispersion,
            Some([a, b]) => {
                let ok = |m: f64| (2.0 * m).fract() == 0.0 && m.abs() <= spin.s();
                if !(ok(a) && ok(b) && (a - b).abs() == 1.0) {
                    return Err(Error::Config(format!(
                        "species[{i}].transition: [{a}, {b}] is not a Δm = ±1 pair of S = {}",
                        spin.s()
                    )));
                }
                ResonanceSource::Transition { m_from: a, m_to: b }
            }
        };
        if let Some(c) = s.coupling_scale {
            if !(c >= 0.0) {
                return Err(Error::Config(format!("species[{i}].coupling_scale must be >= 0")));
            }
        }
        Ok(SpeciesEntry {
            spin,
            source,
            coupling_scale: s.coupling_scale,
        })
    }

    pub fn cavity(&self) -> Result<CavityMode> {
        let c = &self.cavity;
        let k = c.kappa;
        CavityMode::with_ports(
            c.omega_c,
            k,
            c.kappa_in.unwrap_or(k / 4.0),
            c.kappa_out.unwrap_or(k / 4.0),
        )
        .map_err(|e| Error::Config(format!("cavity: {e}")))
    }

    pub fn sweep_config(&self) -> Result<SweepConfig> {
        let cavity = self.cavity()?;
        let g = &self.grid;
        let fc = g.f_center.unwrap_or(cavity.omega_c);
        let species = self
            .species
            .iter()
            .enumerate()
            .map(|(i, s)| self.species_entry(i, s))
            .collect::<Result<Vec<_>>>()?;
        Ok(SweepConfig {
            b_grid: linspace(g.b_min, g.b_max, g.n_b),
            f_grid: linspace(fc - 0.5 * g.f_span, fc + 0.5 * g.f_span, g.n_f),
            cavity,
            species,
            thermal: self.thermal.as_ref().map(|t| ThermalSetting {
                temperature: t.temperature,
                d: t.d,
            }),
            noise_sigma: self.noise_sigma,
            seed: self.seed,
            meta: self.meta.clone(),
        })
    }

    pub fn windows(&self) -> Vec<CrossingWindow> {
        self.analysis
            .windows
            .iter()
            .map(|w| CrossingWindow {
                b_lo: w.b_lo,
                b_hi: w.b_hi,
                use_upper: w.upper,
                use_lower: w.lower,
                g_guess: w.g,
                d_guess: w.d,
                omega_c_guess: w.omega_c,
            })
            .collect()
    }

    pub fn window_labels(&self) -> Vec<String> {
        self.analysis
            .windows
            .iter()
            .enumerate()
            .map(|(i, w)| w.label.clone().unwrap_or_else(|| (i + 1).to_string()))
            .collect()
    }

    pub fn crossing_options(&self) -> CrossingOptions {
        CrossingOptions {
            gamma_e: self.analysis.gamma_e,
            free_gamma: self.analysis.free_gamma,
            weighting: match self.analysis.weighting.as_str() {
                "uniform" => Weighting::Uniform,
                "sigma" => Weighting::SigmaF0,
                _ => Weighting::LinewidthFloor,
            },
            omega_c_ref: Some(self.cavity.omega_c),
            ..CrossingOptions::default()
        }
    }

    /// Q-dip specs; `fitted_g[k]` supplies g for entries tied to window k.
    pub fn qdip_specs(&self, fitted_g: &[f64]) -> Result<Vec<QDipSpec>> {
        self.analysis
            .qdip
            .iter()
            .enumerate()
            .map(|(i, q)| {
                let g = match (q.g, q.from_window) {
                    (Some(g), _) => g,
                    (None, Some(k)) => *fitted_g.get(k).ok_or_else(|| {
                        Error::Config(format!("analysis.qdip[{i}]: window {k} has no fit"))
                    })?,
                    (None, None) => unreachable!("validated"),
                };
                Ok(QDipSpec {
                    b_lo: q.b_lo,
                    b_hi: q.b_hi,
                    g,
                    kappa: self.cavity.kappa,
                    omega_c: self.cavity.omega_c,
                    kappa_free: q.kappa_free,
                    gamma_e: self.analysis.gamma_e,
                    mask: q.mask_mhz * 1e6,
                    gamma_d_guess: q.gamma_d_guess,
                })
            })
            .collect()
    }
}
