//! Cavity–spin hybridization: polariton branches, the dispersive Q model,
//! the resonance lineshape and the complex transmission forward model.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Bare resonator. Q = ωc/κ is derived, never stored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityMode {
    pub omega_c: f64,
    /// Total linewidth, FWHM.
    pub kappa: f64,
    pub kappa_in: f64,
    pub kappa_out: f64,
}

impl CavityMode {
    /// Symmetric under-coupled ports, κ_in = κ_out = κ/4.
    pub fn new(omega_c: f64, kappa: f64) -> Result<Self> {
        Self::with_ports(omega_c, kappa, kappa / 4.0, kappa / 4.0)
    }

    pub fn with_ports(omega_c: f64, kappa: f64, kappa_in: f64, kappa_out: f64) -> Result<Self> {
        let c = CavityMode {
            omega_c,
            kappa,
            kappa_in,
            kappa_out,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_c > 0.0 && self.omega_c.is_finite()) {
            return Err(Error::domain("omega_c must be > 0"));
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::domain("kappa must be > 0"));
        }
        if !(self.kappa_in >= 0.0 && self.kappa_out >= 0.0) {
            return Err(Error::domain("port couplings must be >= 0"));
        }
        if self.kappa_in + self.kappa_out > self.kappa {
            return Err(Error::domain("kappa_in + kappa_out must not exceed kappa"));
        }
        Ok(())
    }

    pub fn q(&self) -> f64 {
        self.omega_c / self.kappa
    }
}

/// Coupled-mode branches (ω₊, ω₋) = (ωc+ωs)/2 ± √(g² + (ωc−ωs)²/4).
///
/// ω₋ is formed as (ωc+ωs) − ω₊ so the sum rule holds bit-exactly for
/// positive frequencies.
pub fn polariton_frequencies(omega_c: f64, omega_s: f64, g: f64) -> (f64, f64) {
    let sum = omega_c + omega_s;
    let r = g.hypot(0.5 * (omega_c - omega_s));
    let plus = 0.5 * sum + r;
    (plus, sum - plus)
}

/// Second crossing with the lower polariton of the first standing in for ωc.
pub fn corrected_second_crossing(omega_1_minus: f64, omega_s: f64, g: f64) -> (f64, f64) {
    polariton_frequencies(omega_1_minus, omega_s, g)
}

/// First crossing with the upper branch of the second standing in for ωc.
pub fn corrected_first_crossing(omega_2_plus: f64, omega_s: f64, g: f64) -> (f64, f64) {
    polariton_frequencies(omega_2_plus, omega_s, g)
}

/// Q = (Δ² + (Γd/2)²)·ωc / (g²Γd + κ(Δ² + (Γd/2)²)).
///
/// All arguments share one frequency convention; the ratio does not depend
/// on which.
pub fn dispersive_q(delta: f64, g: f64, gamma_d: f64, kappa: f64, omega_c: f64) -> f64 {
    debug_assert!(kappa > 0.0 && gamma_d > 0.0);
    let a = delta * delta + 0.25 * gamma_d * gamma_d;
    a * omega_c / (g * g * gamma_d + kappa * a)
}

/// Peak model with a linear background.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineshapeParams {
    pub a1: f64,
    /// Per Hz.
    pub a2: f64,
    /// Per Hz.
    pub a3: f64,
    pub s_max: f64,
    pub f0: f64,
    /// FWHM (Hz).
    pub delta_f: f64,
}

impl LineshapeParams {
    pub fn q(&self) -> f64 {
        self.f0 / self.delta_f
    }
}

/// |S21|(f) = A1 + A2·f + (S_max + A3·f)/√(1 + 4((f−f0)/Δf)²).
pub fn s21_lineshape(f: f64, p: &LineshapeParams) -> f64 {
    let x = (f - p.f0) / p.delta_f;
    p.a1 + p.a2 * f + (p.s_max + p.a3 * f) / (1.0 + 4.0 * x * x).sqrt()
}

/// One ensemble as seen by the cavity at a given field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinDrive {
    pub omega_s: f64,
    pub g: f64,
    pub gamma_d: f64,
}

/// S21(ω) = √(κ_in κ_out) / [i(ωc − ω) + κ/2 + Σ g²/(i(ωs − ω) + Γd/2)].
pub fn transmission(omega: f64, cavity: &CavityMode, species: &[SpinDrive]) -> Complex64 {
    let mut den = Complex64::new(0.5 * cavity.kappa, cavity.omega_c - omega);
    for s in species {
        den += s.g * s.g / Complex64::new(0.5 * s.gamma_d, s.omega_s - omega);
    }
    Complex64::new((cavity.kappa_in * cavity.kappa_out).sqrt(), 0.0) / den
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spinphys::spin_dispersion;

    const FC: f64 = 12.593_45e9;

    fn eig2(a: f64, b: f64, g: f64) -> (f64, f64) {
        let m = nalgebra::Matrix2::new(a, g, g, b);
        let e = m.symmetric_eigen().eigenvalues;
        (e.max(), e.min())
    }

    #[test]
    fn resonant_splitting() {
        let (p, m) = polariton_frequencies(FC, FC, 2.5e6);
        assert_eq!(p, FC + 2.5e6);
        assert_eq!(m, FC - 2.5e6);
    }

    #[test]
    fn uncoupled_limit() {
        let (p, m) = polariton_frequencies(FC, FC + 3e6, 0.0);
        assert_eq!((p, m), (FC + 3e6, FC));
        let (p, m) = polariton_frequencies(FC, FC - 3e6, 0.0);
        assert_eq!((p, m), (FC, FC - 3e6));
    }

    #[test]
    fn branches_match_two_by_two_eigenvalues() {
        let ws = spin_dispersion(0.4503, 28e9, 2.01e6);
        let (p, m) = polariton_frequencies(FC, ws, 2.5e6);
        let (ep, em) = eig2(FC, ws, 2.5e6);
        assert!((p - ep).abs() < 1e-9 * ep);
        assert!((m - em).abs() < 1e-9 * em);
        assert_eq!(p + m, FC + ws);
    }

    #[test]
    fn second_crossing_limits() {
        let ws = FC + 4e6;
        assert_eq!(corrected_second_crossing(FC, ws, 1.34e6), polariton_frequencies(FC, ws, 1.34e6));
        let w1m = FC - 0.3e6;
        let (p, m) = corrected_second_crossing(w1m, w1m, 1.34e6);
        assert!((p - m - 2.0 * 1.34e6).abs() < 1e-6);
    }

    #[test]
    fn first_crossing_limit() {
        let ws = FC - 4e6;
        assert_eq!(corrected_first_crossing(FC, ws, 2.5e6), polariton_frequencies(FC, ws, 2.5e6));
    }

    #[test]
    fn hybrid_shift_lowers_second_upper_branch() {
        let b = 0.4525;
        let w1m = polariton_frequencies(FC, spin_dispersion(b, 28e9, 2.01e6), 2.5e6).1;
        assert!(w1m < FC);
        let ws2 = spin_dispersion(b, 28e9, 39.76e6);
        let bare = polariton_frequencies(FC, ws2, 1.34e6).0;
        let corr = corrected_second_crossing(w1m, ws2, 1.34e6).0;
        assert!(corr < bare);
    }

    #[test]
    fn dispersive_q_limits() {
        let q_inf = dispersive_q(1e12, 2.5e6, 4.27e6, 0.22e6, FC);
        assert!((q_inf - FC / 0.22e6).abs() < 1e-3 * q_inf);
        assert!((q_inf - 57_243.0).abs() < 1.0);
        assert!((q_inf / 57_232.0 - 1.0).abs() < 5e-4);
        for d in [0.0, 1e6, 1e7, -3e7] {
            assert_eq!(dispersive_q(d, 0.0, 4.27e6, 0.22e6, FC), FC / 0.22e6);
        }
        // unit invariance
        let a = dispersive_q(12e6, 2.5e6, 4.27e6, 0.22e6, FC);
        let b = dispersive_q(12.0, 2.5, 4.27, 0.22, FC / 1e6);
        assert!((a - b).abs() < 1e-9 * a);
    }

    #[test]
    fn lineshape_peak_and_half_width() {
        let p = LineshapeParams {
            a1: 0.0,
            a2: 0.0,
            a3: 0.0,
            s_max: 0.7,
            f0: 12.595e9,
            delta_f: 0.167e6,
        };
        assert_eq!(s21_lineshape(p.f0, &p), 0.7);
        let h = s21_lineshape(p.f0 + p.delta_f / 2.0, &p);
        assert!((h - 0.7 / 2f64.sqrt()).abs() < 1e-12);
        let l = s21_lineshape(p.f0 - p.delta_f / 2.0, &p);
        assert!((l - h).abs() < 1e-12);
        assert!((p.q() - 7.54e4).abs() < 0.01e4);
    }

    #[test]
    fn bare_transmission_is_lorentzian() {
        let c = CavityMode::new(FC, 0.22e6).unwrap();
        let peak = transmission(FC, &c, &[]).norm();
        assert!((peak - 0.5).abs() < 1e-12); // (κ/4)/(κ/2)
        let half = transmission(FC + 0.11e6, &c, &[]).norm();
        assert!((half / peak - 1.0 / 2f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn invalid_cavity() {
        assert!(CavityMode::new(FC, 0.0).is_err());
        assert!(CavityMode::with_ports(FC, 1.0, 0.6, 0.6).is_err());
    }
}
