//! Least-squares engine and the fitting procedures built on it.

pub mod crossing;
pub mod lsq;
pub mod peaks;
pub mod qdip;
pub mod regression;

pub use crossing::{
    fit_coupled_crossings, fit_single_crossing, Branch, CoupledFit, CrossingFit, CrossingOptions,
    CrossingParams, CrossingWindow, Weighting,
};
pub use lsq::{least_squares, FitResult, LsqOptions};
pub use peaks::{extract_peaks, PeakOptions, PeakRecord, PeakTrace};
pub use qdip::{fit_q_dips, QDipFit, QDipSpec};
pub use regression::{arrhenius_fit, fit_spin_dispersion, ArrheniusFit};
