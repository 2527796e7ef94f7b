//! Peaks → crossing fits → masked Q fits, driven by a scenario config.

use serde_json::{json, Value};

use crate::dataio::config::ScenarioConfig;
use crate::dataio::report::{Provenance, Report};
use crate::error::{Error, Result};
use crate::fit::{
    extract_peaks, fit_coupled_crossings, fit_q_dips, fit_single_crossing, CrossingFit,
    PeakOptions, PeakTrace, QDipFit, QDipSpec,
};
use crate::simulate::FieldSweep;

#[derive(Debug, Clone)]
pub struct Analysis {
    pub trace: PeakTrace,
    /// Summary suffixes, one per crossing window.
    pub labels: Vec<String>,
    /// Crossing fits in config order.
    pub crossings: Vec<CrossingFit>,
    /// Coupled iteration rounds (0 for a lone window).
    pub rounds: usize,
    pub coupled_converged: bool,
    pub qdips: Vec<(QDipSpec, std::result::Result<QDipFit, String>)>,
    pub gamma_e: f64,
}

pub fn peak_options(cfg: &ScenarioConfig) -> PeakOptions {
    PeakOptions {
        secondary: cfg.analysis.secondary_peaks,
        ..PeakOptions::default()
    }
}

/// Runs the crossing and Q-dip fits on an extracted trace.
pub fn analyze_trace(trace: PeakTrace, cfg: &ScenarioConfig) -> Result<Analysis> {
    if trace.primary().next().is_none() {
        return Err(Error::Fit("no crossings found: no usable peaks in the sweep".into()));
    }
    let windows = cfg.windows();
    if windows.is_empty() {
        return Err(Error::Fit("no crossings found: the config defines no crossing windows".into()));
    }
    let opts = cfg.crossing_options();
    let (crossings, rounds, coupled_converged) = if windows.len() == 1 {
        (vec![fit_single_crossing(&trace, &windows[0], &opts)?], 0, true)
    } else {
        let c = fit_coupled_crossings(&trace, &windows, &opts)?;
        (c.fits, c.rounds, c.converged)
    };
    let g: Vec<f64> = crossings.iter().map(|c| c.result.value("g")).collect();
    let qdips = cfg
        .qdip_specs(&g)?
        .into_iter()
        .map(|s| (s, fit_q_dips(&trace, &s).map_err(|e| e.to_string())))
        .collect();
    Ok(Analysis {
        trace,
        labels: cfg.window_labels(),
        crossings,
        rounds,
        coupled_converged,
        qdips,
        gamma_e: opts.gamma_e,
    })
}

pub fn analyze_sweep(sweep: &FieldSweep, cfg: &ScenarioConfig) -> Result<Analysis> {
    analyze_trace(extract_peaks(sweep, &peak_options(cfg))?, cfg)
}

impl Analysis {
    /// (value, σ) of g and D per label, in Hz.
    pub fn summary(&self) -> Vec<(String, f64, f64)> {
        let mut out = Vec::new();
        for (l, c) in self.labels.iter().zip(&self.crossings) {
            for name in ["g", "D"] {
                let (v, s) = c.result.get(name).expect("crossing fits carry g and D");
                out.push((format!("{name}{l}"), v, s));
            }
            if let Some((v, s)) = c.result.get("gamma_e") {
                out.push((format!("gamma_e{l}"), v, s));
            }
        }
        for (k, (_, q)) in self.qdips.iter().enumerate() {
            if let Ok(q) = q {
                let (v, s) = q.result.get("Gamma_d").expect("Q fits carry Gamma_d");
                out.push((format!("Gamma_d_qdip{}", k + 1), v, s));
            }
        }
        out
    }

    /// Names of fits that stopped without converging or failed outright.
    pub fn unconverged(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.coupled_converged {
            out.push("coupled crossing iteration".to_string());
        }
        for (l, c) in self.labels.iter().zip(&self.crossings) {
            if !c.result.converged {
                out.push(format!("crossing_{l}"));
            }
        }
        for (k, (_, q)) in self.qdips.iter().enumerate() {
            if !q.as_ref().is_ok_and(|q| q.result.converged) {
                out.push(format!("qdip_{}", k + 1));
            }
        }
        out
    }

    pub fn report(&self, prov: &Provenance) -> Report {
        let mut r = Report::new(prov);
        for (l, c) in self.labels.iter().zip(&self.crossings) {
            r.add_fit(&format!("crossing_{l}"), &c.result);
        }
        for (k, (spec, q)) in self.qdips.iter().enumerate() {
            match q {
                Ok(q) => {
                    r.add_fit(&format!("qdip_{}", k + 1), &q.result);
                    r.add_diagnostic(
                        &format!("qdip_{}", k + 1),
                        json!({
                            "b_range": [spec.b_lo, spec.b_hi],
                            "mask_hz": spec.mask,
                            "omega_mask": q.omega_mask,
                            "points_used": q.used_b.len(),
                            "min_evaluated_detuning": q.min_evaluated_detuning,
                            "g_hz": spec.g,
                        }),
                    );
                }
                Err(e) => r.add_diagnostic(&format!("qdip_{}", k + 1), json!({ "error": e })),
            }
        }
        for (key, v, s) in self.summary() {
            r.add_summary(&key, v, s);
        }
        let n_ok = self.trace.ok().count();
        let n_flagged = self.trace.records.len() - n_ok;
        r.add_diagnostic(
            "peaks",
            json!({ "records": self.trace.records.len(), "flagged": n_flagged }),
        );
        let neighbours: Vec<Value> = self
            .labels
            .iter()
            .zip(&self.crossings)
            .map(|(l, c)| json!({ "window": l, "neighbours": c.neighbours.len(), "points": c.points.len() }))
            .collect();
        r.add_diagnostic(
            "crossings",
            json!({
                "coupled_rounds": self.rounds,
                "coupled_converged": self.coupled_converged,
                "correction": "additive shifts from both neighbouring windows",
                "windows": neighbours,
            }),
        );
        r
    }
}
