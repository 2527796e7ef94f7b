//! Spin Hamiltonians, thermal populations and the closed-form estimators
//! for vacuum field, single-spin coupling, spin number and optical pumping.
//!
//! Levels use H/h = D·Sz² + γe·B·Sz with the field along the quantization
//! axis. Energies are in Hz.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// CODATA-2018 constants plus the electron g-factor.
///
/// Only `ge` can be chosen by the caller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    mu0: f64,
    mu_b: f64,
    h: f64,
    k_b: f64,
    c: f64,
    ge: f64,
}

impl PhysicalConstants {
    pub const MU0: f64 = 1.256_637_062_12e-6;
    pub const MU_B: f64 = 9.274_010_078_3e-24;
    pub const H: f64 = 6.626_070_15e-34;
    pub const K_B: f64 = 1.380_649e-23;
    pub const C: f64 = 299_792_458.0;
    pub const E_CHARGE: f64 = 1.602_176_634e-19;
    pub const GE_DEFAULT: f64 = 2.002;

    pub const CODATA2018: PhysicalConstants = PhysicalConstants {
        mu0: Self::MU0,
        mu_b: Self::MU_B,
        h: Self::H,
        k_b: Self::K_B,
        c: Self::C,
        ge: Self::GE_DEFAULT,
    };

    pub fn with_ge(ge: f64) -> Result<Self> {
        if !(ge > 0.0 && ge.is_finite()) {
            return Err(Error::domain(format!("ge must be positive, got {ge}")));
        }
        Ok(PhysicalConstants {
            ge,
            ..Self::CODATA2018
        })
    }

    pub fn mu0(&self) -> f64 {
        self.mu0
    }
    pub fn mu_b(&self) -> f64 {
        self.mu_b
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn hbar(&self) -> f64 {
        self.h / (2.0 * PI)
    }
    pub fn k_b(&self) -> f64 {
        self.k_b
    }
    pub fn c(&self) -> f64 {
        self.c
    }
    pub fn ge(&self) -> f64 {
        self.ge
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::CODATA2018
    }
}

/// One paramagnetic ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinSpecies {
    pub label: String,
    /// Twice the spin quantum number.
    pub two_s: u32,
    /// Zero-field splitting D (Hz).
    pub d: f64,
    /// Gyromagnetic ratio (Hz/T).
    pub gamma_e: f64,
    /// Ensemble dephasing linewidth, full width (Hz).
    pub gamma_d: f64,
    /// Ensemble coupling to the cavity (Hz).
    pub g_ens: f64,
}

impl SpinSpecies {
    pub fn new(
        label: impl Into<String>,
        s: f64,
        d: f64,
        gamma_e: f64,
        gamma_d: f64,
        g_ens: f64,
    ) -> Result<Self> {
        let sp = SpinSpecies {
            label: label.into(),
            two_s: two_s_of(s)?,
            d,
            gamma_e,
            gamma_d,
            g_ens,
        };
        sp.validate()?;
        Ok(sp)
    }

    pub fn s(&self) -> f64 {
        self.two_s as f64 / 2.0
    }

    pub fn validate(&self) -> Result<()> {
        let who = &self.label;
        if self.two_s == 0 {
            return Err(Error::domain(format!("{who}: S must be at least 1/2")));
        }
        if !(self.gamma_e > 0.0 && self.gamma_e.is_finite()) {
            return Err(Error::domain(format!("{who}: gamma_e must be > 0")));
        }
        if !(self.gamma_d > 0.0 && self.gamma_d.is_finite()) {
            return Err(Error::domain(format!("{who}: Gamma_d must be > 0")));
        }
        if !(self.g_ens >= 0.0 && self.g_ens.is_finite()) {
            return Err(Error::domain(format!("{who}: g_ens must be >= 0")));
        }
        if !self.d.is_finite() {
            return Err(Error::domain(format!("{who}: D must be finite")));
        }
        if self.two_s == 1 && self.d != 0.0 {
            return Err(Error::domain(format!("{who}: S = 1/2 requires D = 0")));
        }
        Ok(())
    }

    /// Analytic level energy for magnetic quantum number `m` (not shifted).
    pub fn level_energy(&self, m: f64, b: f64) -> f64 {
        self.d * m * m + self.gamma_e * b * m
    }
}

fn two_s_of(s: f64) -> Result<u32> {
    let two = 2.0 * s;
    if !(two >= 1.0 && two.fract() == 0.0 && two < 1e6) {
        return Err(Error::domain(format!("S = {s} is not a positive half-integer")));
    }
    Ok(two as u32)
}

/// Ordered level energies (Hz, lowest = 0) with their m labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinLevels {
    pub energies: Vec<f64>,
    pub m_labels: Vec<f64>,
}

/// (Sx, Sy, Sz) in the |S⟩, |S−1⟩, …, |−S⟩ basis.
pub fn spin_matrices(
    s: f64,
) -> Result<(DMatrix<Complex64>, DMatrix<Complex64>, DMatrix<Complex64>)> {
    let n = two_s_of(s)? as usize + 1;
    let m = |i: usize| s - i as f64;
    let sz = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            Complex64::new(m(i), 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    // S+ |m⟩ = √(S(S+1) − m(m+1)) |m+1⟩; row i−1 holds m+1 when column i holds m.
    let splus = DMatrix::from_fn(n, n, |i, j| {
        if j == i + 1 {
            let mj = m(j);
            Complex64::new((s * (s + 1.0) - mj * (mj + 1.0)).sqrt(), 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let sminus = splus.adjoint();
    let sx = (&splus + &sminus).map(|z| z * 0.5);
    let sy = (&splus - &sminus).map(|z| z * Complex64::new(0.0, -0.5));
    Ok((sx, sy, sz))
}

/// Level energies from diagonalizing D·Sz² + γe·B·Sz.
pub fn zeeman_levels(species: &SpinSpecies, b: f64) -> Result<SpinLevels> {
    if !(b >= 0.0) {
        return Err(Error::domain(format!("B must be >= 0, got {b}")));
    }
    let s = species.s();
    let (_, _, sz) = spin_matrices(s)?;
    let n = sz.nrows();
    let szr = DMatrix::from_fn(n, n, |i, j| sz[(i, j)].re);
    let h = &szr * &szr * species.d + &szr * (species.gamma_e * b);
    let eig = SymmetricEigen::new(h);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let v = eig.eigenvectors.column(k);
            let m = v.iter().map(|x| x * x).zip(0..n).fold((0.0, 0.0), |acc, (w, i)| {
                (acc.0 + w * (s - i as f64), acc.1 + w)
            });
            (eig.eigenvalues[k], (2.0 * m.0 / m.1).round() / 2.0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let e0 = pairs[0].0;
    Ok(SpinLevels {
        energies: pairs.iter().map(|p| p.0 - e0).collect(),
        m_labels: pairs.iter().map(|p| p.1).collect(),
    })
}

/// Analytic counterpart of [`zeeman_levels`]: E(m) = D·m² + γe·B·m, shifted.
pub fn analytic_levels(species: &SpinSpecies, b: f64) -> SpinLevels {
    let s = species.s();
    let mut pairs: Vec<(f64, f64)> = (0..=species.two_s)
        .map(|i| {
            let m = s - i as f64;
            (species.level_energy(m, b), m)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let e0 = pairs[0].0;
    SpinLevels {
        energies: pairs.iter().map(|p| p.0 - e0).collect(),
        m_labels: pairs.iter().map(|p| p.1).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DipoleTransition {
    /// Lower-energy state.
    pub m_from: f64,
    /// Higher-energy state.
    pub m_to: f64,
    pub frequency: f64,
    /// |⟨m_from|Sx|m_to⟩|
    pub element: f64,
    /// Number of transitions in the list sharing this frequency.
    pub degeneracy: usize,
}

/// All Δm = ±1 transitions with positive frequency, ordered by frequency.
pub fn dipole_transitions(species: &SpinSpecies, b: f64) -> Result<Vec<DipoleTransition>> {
    let s = species.s();
    let (sx, _, _) = spin_matrices(s)?;
    let n = sx.nrows();
    let mut out = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let el = sx[(i, j)].norm();
            if el < 1e-12 {
                continue;
            }
            let (mi, mj) = (s - i as f64, s - j as f64);
            let (ei, ej) = (species.level_energy(mi, b), species.level_energy(mj, b));
            let f = (ei - ej).abs();
            if f <= 0.0 {
                continue;
            }
            let (m_from, m_to) = if ei < ej { (mi, mj) } else { (mj, mi) };
            out.push(DipoleTransition {
                m_from,
                m_to,
                frequency: f,
                element: el,
                degeneracy: 1,
            });
        }
    }
    out.sort_by(|a, b| a.frequency.total_cmp(&b.frequency).then(a.m_from.total_cmp(&b.m_from)));
    let freqs: Vec<f64> = out.iter().map(|t| t.frequency).collect();
    for t in &mut out {
        t.degeneracy = freqs
            .iter()
            .filter(|&&f| (f - t.frequency).abs() <= 1e-9 * t.frequency)
            .count();
    }
    Ok(out)
}

/// ωs = γe·B − 2D (the −3/2 ↔ −1/2 branch).
pub fn spin_dispersion(b: f64, gamma_e: f64, d: f64) -> f64 {
    gamma_e * b - 2.0 * d
}

/// Boltzmann occupation of each level of `levels` at temperature `t` (K).
pub fn boltzmann_populations(levels: &SpinLevels, t: f64) -> Result<Vec<f64>> {
    boltzmann_from_energies(&levels.energies, t)
}

/// Boltzmann occupation of an arbitrary energy ladder given in Hz.
pub fn boltzmann_from_energies(energies: &[f64], t: f64) -> Result<Vec<f64>> {
    if !(t > 0.0) {
        return Err(Error::domain(format!("temperature must be > 0, got {t}")));
    }
    let e0 = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let beta = PhysicalConstants::H / (PhysicalConstants::K_B * t);
    let w: Vec<f64> = energies.iter().map(|e| (-(e - e0) * beta).exp()).collect();
    let z: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / z).collect())
}

/// The four-level ladder {0, ωc, ωc + 2D, ωc + 4D} used by the coupling-ratio
/// thermometry.
pub fn thermometry_ladder(omega_c: f64, d: f64) -> [f64; 4] {
    [0.0, omega_c, omega_c + 2.0 * d, omega_c + 4.0 * d]
}

/// g(T)/g(T→0): square root of the population difference of the lowest two
/// levels of [`thermometry_ladder`].
pub fn thermal_coupling_ratio(t: f64, omega_c: f64, d: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::domain(format!("temperature must be > 0, got {t}")));
    }
    let beta = PhysicalConstants::H / (PhysicalConstants::K_B * t);
    let x = (-omega_c * beta).exp();
    let num = 1.0 - x;
    let den = 1.0 + x + (-(omega_c + 2.0 * d) * beta).exp() + (-(omega_c + 4.0 * d) * beta).exp();
    Ok((num / den).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinTemperature {
    pub kelvin: f64,
    /// True when the ratio is reached at or below the lower bracket bound,
    /// so `kelvin` is an upper bound.
    pub at_lower_bound: bool,
}

pub const T_BRACKET: (f64, f64) = (1e-3, 300.0);

/// Inverts [`thermal_coupling_ratio`] by bisection in log T over [1 mK, 300 K].
pub fn effective_spin_temperature(ratio: f64, omega_c: f64, d: f64) -> Result<SpinTemperature> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::domain(format!("ratio must be in (0, 1], got {ratio}")));
    }
    let (t_min, t_max) = T_BRACKET;
    let f = |t: f64| thermal_coupling_ratio(t, omega_c, d).map(|r| r - ratio);
    if f(t_min)? <= 0.0 {
        return Ok(SpinTemperature {
            kelvin: t_min,
            at_lower_bound: true,
        });
    }
    if f(t_max)? > 0.0 {
        return Err(Error::Convergence(format!(
            "ratio {ratio} not reached below {t_max} K"
        )));
    }
    let (mut lo, mut hi) = (t_min.ln(), t_max.ln());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid.exp())? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(SpinTemperature {
        kelvin: (0.5 * (lo + hi)).exp(),
        at_lower_bound: false,
    })
}

/// B₀ = √(μ0·ħ·2πωc / 2V) in tesla.
pub fn vacuum_field_amplitude(omega_c: f64, volume: f64) -> Result<f64> {
    if !(volume > 0.0) {
        return Err(Error::domain(format!("mode volume must be > 0, got {volume}")));
    }
    let k = PhysicalConstants::CODATA2018;
    Ok((k.mu0() * k.hbar() * 2.0 * PI * omega_c / (2.0 * volume)).sqrt())
}

/// g₀ = ge·μB·B₀·element / (2πħ), in Hz.
pub fn single_spin_coupling(
    omega_c: f64,
    volume: f64,
    element: f64,
    consts: &PhysicalConstants,
) -> Result<f64> {
    if !(element >= 0.0) {
        return Err(Error::domain(format!("matrix element must be >= 0, got {element}")));
    }
    let b0 = vacuum_field_amplitude(omega_c, volume)?;
    Ok(consts.ge() * consts.mu_b() * b0 * element / (consts.hbar() * 2.0 * PI))
}

/// N = (g/g₀)².
pub fn ensemble_spin_count(g_ens: f64, g0: f64) -> Result<f64> {
    if !(g0 > 0.0) {
        return Err(Error::domain(format!("g0 must be > 0, got {g0}")));
    }
    Ok((g_ens / g0).powi(2))
}

/// Λ = σ·P·λ / (h·c·A), in Hz.
pub fn optical_pump_rate(sigma_abs: f64, power: f64, wavelength: f64, area: f64) -> Result<f64> {
    for (name, v) in [
        ("sigma_abs", sigma_abs),
        ("power", power),
        ("wavelength", wavelength),
        ("area", area),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::domain(format!("{name} must be > 0, got {v}")));
        }
    }
    let k = PhysicalConstants::CODATA2018;
    Ok(sigma_abs * power * wavelength / (k.h() * k.c() * area))
}
