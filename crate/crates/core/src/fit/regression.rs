//! Closed-form straight-line fits: spin dispersion ω = γe·B − 2D and the
//! Arrhenius plot ln(ratio) vs 1/T.

use nalgebra::DMatrix;

use super::lsq::FitResult;
use crate::error::{Error, Result};
use crate::spinphys::PhysicalConstants;

/// Elementary charge (C), exact in SI.
const E_CHARGE: f64 = PhysicalConstants::E_CHARGE;

/// Ordinary least squares y = slope·x + intercept from the normal equations.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<FitResult> {
    let n = x.len();
    if n != y.len() || n < 2 {
        return Err(Error::domain("linear fit needs at least two (x, y) pairs"));
    }
    let nf = n as f64;
    let xm = x.iter().sum::<f64>() / nf;
    let ym = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - xm).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - xm) * (b - ym)).sum();
    if !(sxx > 0.0) || sxx <= 1e-24 * x.iter().map(|v| v * v).sum::<f64>() {
        return Err(Error::RankDeficient(
            "all abscissae identical: slope and intercept degenerate".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - slope * a - intercept).powi(2))
        .sum();
    let s2 = if n > 2 { rss / (nf - 2.0) } else { 0.0 };
    let cov = DMatrix::from_row_slice(
        2,
        2,
        &[
            s2 / sxx,
            -xm * s2 / sxx,
            -xm * s2 / sxx,
            s2 * (1.0 / nf + xm * xm / sxx),
        ],
    );
    Ok(FitResult {
        names: vec!["slope".into(), "intercept".into()],
        params: vec![slope, intercept],
        sigma: vec![cov[(0, 0)].sqrt(), cov[(1, 1)].sqrt()],
        covariance: cov,
        residual_norm: rss.sqrt(),
        n_points: n,
        n_iterations: 0,
        converged: true,
        flags: Vec::new(),
    })
}

/// Fits (γe, D) of ω = γe·B − 2D to (B, ω) pairs.
pub fn fit_spin_dispersion(points: &[(f64, f64)]) -> Result<FitResult> {
    let b: Vec<f64> = points.iter().map(|p| p.0).collect();
    let w: Vec<f64> = points.iter().map(|p| p.1).collect();
    let mut r = linear_fit(&b, &w)?;
    // intercept = −2D
    r.rescale(1, -0.5, 0.0);
    r.rename(0, "gamma_e");
    r.rename(1, "D");
    Ok(r)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrheniusFit {
    /// slope_K (of ln ratio vs 1/T) and intercept.
    pub fit: FitResult,
    pub activation_energy_mev: f64,
    pub activation_sigma_mev: f64,
}

/// |slope|·kB in meV.
pub fn activation_energy_mev(slope_k: f64) -> f64 {
    slope_k.abs() * PhysicalConstants::K_B / E_CHARGE * 1e3
}

/// Linear fit of ln(ratio) against 1/T.
pub fn arrhenius_fit(points: &[(f64, f64)]) -> Result<ArrheniusFit> {
    if let Some(p) = points.iter().find(|p| !(p.1 > 0.0)) {
        return Err(Error::domain(format!("intensity ratio must be > 0, got {}", p.1)));
    }
    if let Some(p) = points.iter().find(|p| !(p.0 > 0.0)) {
        return Err(Error::domain(format!("temperature must be > 0, got {}", p.0)));
    }
    let x: Vec<f64> = points.iter().map(|p| 1.0 / p.0).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mut fit = linear_fit(&x, &y)?;
    fit.rename(0, "slope_K");
    let (slope, sigma) = (fit.params[0], fit.sigma[0]);
    Ok(ArrheniusFit {
        fit,
        activation_energy_mev: activation_energy_mev(slope),
        activation_sigma_mev: activation_energy_mev(sigma),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::lsq::{least_squares, LsqOptions};

    #[test]
    fn two_exact_points() {
        let g = 26.8e9;
        let d = 37e6;
        let pts = [(0.4, g * 0.4 - 2.0 * d), (0.6, g * 0.6 - 2.0 * d)];
        let r = fit_spin_dispersion(&pts).unwrap();
        assert!((r.value("gamma_e") / g - 1.0).abs() < 1e-12);
        assert!((r.value("D") - d).abs() < 1e-3);
        assert!(r.residual_norm < 1e-3);
    }

    #[test]
    fn identical_fields_rejected() {
        let pts = [(0.45, 12.6e9), (0.45, 12.61e9), (0.45, 12.59e9)];
        assert!(matches!(fit_spin_dispersion(&pts), Err(Error::RankDeficient(_))));
    }

    #[test]
    fn agrees_with_iterative_engine() {
        let pts = [
            (0.4477, 12.00e9),
            (0.5573, 14.91e9),
            (0.5945, 15.93e9),
            (0.6245, 16.71e9),
            (0.7793, 20.86e9),
        ];
        let closed = fit_spin_dispersion(&pts).unwrap();
        let lm = least_squares(
            &["gamma_e", "D"],
            &[28.0, 0.0],
            pts.len(),
            |p, out| {
                for (k, &(b, w)) in pts.iter().enumerate() {
                    out[k] = (p[0] * 1e9 * b - 2.0 * p[1] * 1e6 - w) / 1e6;
                }
            },
            &LsqOptions::default(),
        )
        .unwrap();
        assert!((closed.value("gamma_e") / (lm.params[0] * 1e9) - 1.0).abs() < 1e-10);
        assert!((closed.value("D") - lm.params[1] * 1e6).abs() < 1e-10 * closed.value("gamma_e"));
        assert!((closed.sigma[0] / (lm.sigma[0] * 1e9) - 1.0).abs() < 1e-6);
        assert!((closed.sigma[1] / (lm.sigma[1] * 1e6) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn slope_to_activation_energy() {
        let e = activation_energy_mev(-46.77);
        assert!((e - 46.77 * 8.617e-2).abs() < 1e-3);
        assert!((e / 4.03 - 1.0).abs() < 0.005);
    }

    #[test]
    fn exponential_data_recovered() {
        let e_j = 5e-3 * E_CHARGE;
        let pts: Vec<(f64, f64)> = [20.0, 40.0, 80.0, 120.0, 200.0, 295.0]
            .iter()
            .map(|&t| (t, (-e_j / (PhysicalConstants::K_B * t)).exp()))
            .collect();
        let r = arrhenius_fit(&pts).unwrap();
        let slope = -e_j / PhysicalConstants::K_B;
        assert!((slope + 58.03).abs() < 0.01);
        assert!((r.fit.value("slope_K") / slope - 1.0).abs() < 1e-9);
        assert!((r.activation_energy_mev - 5.0).abs() < 5e-9);
    }

    #[test]
    fn constant_ratio() {
        let r = arrhenius_fit(&[(10.0, 0.4), (50.0, 0.4), (200.0, 0.4)]).unwrap();
        assert!(r.fit.value("slope_K").abs() < 1e-12);
        assert!(r.activation_energy_mev < 1e-12);
        assert!(arrhenius_fit(&[(10.0, 0.0), (20.0, 1.0)]).is_err());
    }
}
