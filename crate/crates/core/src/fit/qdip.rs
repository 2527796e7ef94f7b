//! Masked fit of the dispersive Q model to Q(B) near a crossing.
//!
//! Δ = ω − γe·B with ω free. Points with |Δ| below the mask are dropped
//! before fitting; the band is placed with the ω at which Q is smallest,
//! then placed again once with the fitted ω.

use std::cell::Cell;

use super::lsq::{least_squares, FitResult, LsqOptions};
use super::peaks::PeakTrace;
use crate::cavity::dispersive_q;
use crate::error::{Error, Result};

const MHZ: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QDipSpec {
    pub b_lo: f64,
    pub b_hi: f64,
    pub g: f64,
    pub kappa: f64,
    pub omega_c: f64,
    pub kappa_free: bool,
    pub gamma_e: f64,
    /// Half width of the excluded band in |Δ| (Hz).
    pub mask: f64,
    pub gamma_d_guess: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QDipFit {
    /// Gamma_d, omega and optionally kappa, in Hz.
    pub result: FitResult,
    /// ω used to place the excluded band of the final pass.
    pub omega_mask: f64,
    /// Fields of the points that entered the final fit.
    pub used_b: Vec<f64>,
    /// Smallest |ω_mask − γe·B| over every residual evaluation of the final
    /// pass.
    pub min_evaluated_detuning: f64,
}

impl QDipFit {
    pub fn q_model(&self, spec: &QDipSpec, b: f64) -> f64 {
        let kappa = self.result.get("kappa").map(|k| k.0).unwrap_or(spec.kappa);
        dispersive_q(
            self.result.value("omega") - spec.gamma_e * b,
            spec.g,
            self.result.value("Gamma_d"),
            kappa,
            spec.omega_c,
        )
    }
}

fn one_pass(
    pts: &[(f64, f64)],
    spec: &QDipSpec,
    omega_mask: f64,
    init: (f64, f64, f64),
) -> Result<QDipFit> {
    let used: Vec<(f64, f64)> = pts
        .iter()
        .cloned()
        .filter(|(b, _)| (omega_mask - spec.gamma_e * b).abs() >= spec.mask)
        .collect();
    let np = if spec.kappa_free { 3 } else { 2 };
    if used.is_empty() {
        return Err(Error::Fit("mask leaves no points to fit".into()));
    }
    if used.len() <= np {
        return Err(Error::Fit(format!(
            "mask leaves {} points for {np} parameters",
            used.len()
        )));
    }
    let base: Vec<f64> = used
        .iter()
        .map(|(b, _)| (omega_mask - spec.gamma_e * b) / MHZ)
        .collect();
    let probe = Cell::new(f64::INFINITY);
    let mut names = vec!["Gamma_d", "omega"];
    let mut x0 = vec![init.0 / MHZ, (init.1 - omega_mask) / MHZ];
    if spec.kappa_free {
        names.push("kappa");
        x0.push(init.2 / MHZ);
    }
    let (g, wc) = (spec.g / MHZ, spec.omega_c / MHZ);
    let kappa_fixed = spec.kappa / MHZ;
    let mut res = least_squares(
        &names,
        &x0,
        used.len(),
        |x, out| {
            let gd = x[0].abs();
            let kappa = if spec.kappa_free { x[2] } else { kappa_fixed };
            for (k, &(_, q)) in used.iter().enumerate() {
                probe.set(probe.get().min(base[k].abs()));
                let model = dispersive_q(base[k] + x[1], g, gd, kappa, wc);
                out[k] = (model - q) / q;
            }
        },
        &LsqOptions::default(),
    )?;
    if res.params[0] < 0.0 {
        res.params[0] = -res.params[0];
        for k in 1..res.params.len() {
            res.covariance[(0, k)] = -res.covariance[(0, k)];
            res.covariance[(k, 0)] = -res.covariance[(k, 0)];
        }
    }
    if res.params[0] < 1e-3 * init.0 / MHZ {
        res.flags.push("Gamma_d at positivity bound".to_string());
        res.converged = false;
    }
    res.rescale(0, MHZ, 0.0);
    res.rescale(1, MHZ, omega_mask);
    if spec.kappa_free {
        res.rescale(2, MHZ, 0.0);
    }
    Ok(QDipFit {
        result: res,
        omega_mask,
        used_b: used.iter().map(|p| p.0).collect(),
        min_evaluated_detuning: probe.get() * MHZ,
    })
}

/// Fits Γd and ω (and κ if freed) of the dispersive Q model.
pub fn fit_q_dips(trace: &PeakTrace, spec: &QDipSpec) -> Result<QDipFit> {
    if !(spec.b_lo < spec.b_hi) {
        return Err(Error::domain("Q-dip window needs b_lo < b_hi"));
    }
    if !(spec.mask >= 0.0 && spec.kappa > 0.0 && spec.gamma_d_guess > 0.0) {
        return Err(Error::domain("Q-dip spec needs mask >= 0, kappa > 0, Gamma_d guess > 0"));
    }
    let pts: Vec<(f64, f64)> = trace
        .primary()
        .filter(|r| r.b >= spec.b_lo && r.b <= spec.b_hi)
        .map(|r| (r.b, r.q))
        .collect();
    let b_min = pts
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| Error::Fit("no peaks in Q-dip window".into()))?
        .0;
    let omega0 = spec.gamma_e * b_min;
    let first = one_pass(&pts, spec, omega0, (spec.gamma_d_guess, omega0, spec.kappa))?;
    let omega1 = first.result.value("omega");
    let kappa1 = first.result.get("kappa").map(|k| k.0).unwrap_or(spec.kappa);
    let second = one_pass(
        &pts,
        spec,
        omega1,
        (first.result.value("Gamma_d"), omega1, kappa1),
    )?;
    Ok(second)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::peaks::PeakRecord;

    const FC: f64 = 12.593_45e9;

    fn synthetic(spec: &QDipSpec, omega: f64, gd: f64, kappa: f64) -> PeakTrace {
        let recs = (0..131)
            .map(|i| {
                let b = 0.4480 + 0.0035 * i as f64 / 130.0;
                let q = dispersive_q(omega - spec.gamma_e * b, spec.g, gd, kappa, spec.omega_c);
                PeakRecord {
                    b,
                    f0: FC,
                    delta_f: FC / q,
                    q: FC / (FC / q),
                    s_max: 0.2,
                    background: [0.0; 3],
                    sigma_f0: 100.0,
                    rank: 0,
                    flag: None,
                }
            })
            .collect();
        PeakTrace::new(recs).unwrap()
    }

    fn spec() -> QDipSpec {
        QDipSpec {
            b_lo: 0.4480,
            b_hi: 0.4515,
            g: 2.5e6,
            kappa: 0.22e6,
            omega_c: FC,
            kappa_free: false,
            gamma_e: 28e9,
            mask: 10e6,
            gamma_d_guess: 3e6,
        }
    }

    #[test]
    fn exact_round_trip() {
        let s = spec();
        let omega = FC + 4.02e6;
        let t = synthetic(&s, omega, 4.27e6, 0.22e6);
        let r = fit_q_dips(&t, &s).unwrap();
        assert!((r.result.value("Gamma_d") / 4.27e6 - 1.0).abs() < 1e-6);
        assert!((r.result.value("omega") - omega).abs() < 1e-6 * 4.27e6);
    }

    #[test]
    fn exact_round_trip_kappa_free() {
        let s = QDipSpec {
            g: 1.34e6,
            kappa_free: true,
            mask: 5e6,
            gamma_d_guess: 1e6,
            ..spec()
        };
        let omega = FC + 2.0 * 39.76e6 - 70e6;
        let t = synthetic(&s, omega, 0.57e6, 0.24e6);
        let r = fit_q_dips(&t, &s).unwrap();
        assert!((r.result.value("Gamma_d") / 0.57e6 - 1.0).abs() < 1e-6);
        assert!((r.result.value("kappa") / 0.24e6 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn mask_is_respected() {
        let s = spec();
        let t = synthetic(&s, FC + 4.02e6, 4.27e6, 0.22e6);
        let r = fit_q_dips(&t, &s).unwrap();
        assert!(r.min_evaluated_detuning >= s.mask);
        let n_inside = t
            .primary()
            .filter(|p| (r.omega_mask - s.gamma_e * p.b).abs() < s.mask)
            .count();
        assert!(n_inside > 0);
        assert_eq!(r.used_b.len() + n_inside, t.records.len());
    }

    #[test]
    fn empty_mask_is_error() {
        let s = QDipSpec { mask: 1e9, ..spec() };
        let t = synthetic(&s, FC + 4.02e6, 4.27e6, 0.22e6);
        assert!(fit_q_dips(&t, &s).is_err());
    }
}
