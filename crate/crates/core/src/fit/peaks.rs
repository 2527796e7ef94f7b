//! Per-slice resonance extraction: candidate maxima on a smoothed |S21|,
//! then a lineshape fit around each.

use rayon::prelude::*;

use super::lsq::{least_squares, LsqOptions};
use crate::cavity::LineshapeParams;
use crate::error::{Error, Result};
use crate::simulate::FieldSweep;

#[derive(Debug, Clone, PartialEq)]
pub struct PeakRecord {
    pub b: f64,
    pub f0: f64,
    pub delta_f: f64,
    pub q: f64,
    pub s_max: f64,
    /// (A1, A2, A3) in the absolute-frequency convention of the lineshape.
    pub background: [f64; 3],
    pub sigma_f0: f64,
    /// 0 for the tallest peak of the slice, 1.. for the others.
    pub rank: usize,
    /// Reason the record must not be used downstream.
    pub flag: Option<String>,
}

impl PeakRecord {
    pub fn is_ok(&self) -> bool {
        self.flag.is_none()
    }

    pub fn lineshape(&self) -> LineshapeParams {
        LineshapeParams {
            a1: self.background[0],
            a2: self.background[1],
            a3: self.background[2],
            s_max: self.s_max,
            f0: self.f0,
            delta_f: self.delta_f,
        }
    }

    fn flagged(b: f64, why: impl Into<String>) -> Self {
        PeakRecord {
            b,
            f0: f64::NAN,
            delta_f: f64::NAN,
            q: f64::NAN,
            s_max: f64::NAN,
            background: [f64::NAN; 3],
            sigma_f0: f64::NAN,
            rank: 0,
            flag: Some(why.into()),
        }
    }
}

/// Records sorted by (B, rank).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PeakTrace {
    pub records: Vec<PeakRecord>,
}

impl PeakTrace {
    pub fn new(mut records: Vec<PeakRecord>) -> Result<Self> {
        records.sort_by(|a, b| a.b.total_cmp(&b.b).then(a.rank.cmp(&b.rank)));
        for r in records.iter().filter(|r| r.is_ok()) {
            if !((r.q - r.f0 / r.delta_f).abs() <= 1e-9 * r.q.abs()) {
                return Err(Error::Fit(format!("record at B={} has Q != f0/delta_f", r.b)));
            }
        }
        Ok(PeakTrace { records })
    }

    pub fn ok(&self) -> impl Iterator<Item = &PeakRecord> {
        self.records.iter().filter(|r| r.is_ok())
    }

    pub fn primary(&self) -> impl Iterator<Item = &PeakRecord> {
        self.ok().filter(|r| r.rank == 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakOptions {
    /// Report every accepted peak, not only the tallest.
    pub secondary: bool,
    /// Moving-average length used to locate candidates.
    pub smooth: usize,
    /// Fit window half-width in units of the half-maximum span.
    pub window: f64,
    /// Minimum prominence relative to the candidate's own height.
    pub min_rel_prominence: f64,
    /// Minimum height relative to the tallest candidate.
    pub min_height: f64,
    /// Minimum prominence relative to the tallest candidate.
    pub min_abs_prominence: f64,
}

impl Default for PeakOptions {
    fn default() -> Self {
        PeakOptions {
            secondary: false,
            smooth: 9,
            window: 3.0,
            min_rel_prominence: 0.03,
            min_height: 0.02,
            min_abs_prominence: 0.005,
        }
    }
}

fn moving_average(a: &[f64], n: usize) -> Vec<f64> {
    let h = n / 2;
    let mut prefix = vec![0.0; a.len() + 1];
    for (i, v) in a.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v;
    }
    (0..a.len())
        .map(|i| {
            let lo = i.saturating_sub(h);
            let hi = (i + h + 1).min(a.len());
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// Topographic prominence of local maxima of `s`.
fn candidates(s: &[f64]) -> Vec<(usize, f64)> {
    let n = s.len();
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if s[i] > s[i - 1] {
            // plateau-aware: find the end of equal values
            let mut j = i;
            while j + 1 < n && s[j + 1] == s[i] {
                j += 1;
            }
            if j + 1 < n && s[j + 1] < s[i] {
                let p = (i + j) / 2;
                let mut lmin = s[p];
                let mut k = p;
                while k > 0 {
                    k -= 1;
                    if s[k] > s[p] {
                        break;
                    }
                    lmin = lmin.min(s[k]);
                }
                let mut rmin = s[p];
                let mut k = p;
                while k + 1 < n {
                    k += 1;
                    if s[k] > s[p] {
                        break;
                    }
                    rmin = rmin.min(s[k]);
                }
                out.push((p, s[p] - lmin.max(rmin)));
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

/// Fits the lineshape around index `i0` of (f, a), using only indices in
/// `bounds` (the valleys towards neighbouring peaks).
fn fit_one(
    f: &[f64],
    a: &[f64],
    i0: usize,
    window: f64,
    bounds: (usize, usize),
) -> std::result::Result<PeakRecordCore, String> {
    let amax = a[i0];
    let df_grid = f[1] - f[0];
    let mut j = i0;
    while j > bounds.0 && a[j] > amax / 2.0 {
        j -= 1;
    }
    let mut k = i0;
    while k + 1 < bounds.1 && a[k] > amax / 2.0 {
        k += 1;
    }
    let df0 = (f[k] - f[j]).max(3.0 * df_grid);
    let lo = f.partition_point(|&x| x < f[i0] - window * df0).max(bounds.0);
    let hi = f.partition_point(|&x| x < f[i0] + window * df0).min(bounds.1);
    if hi - lo < 8 {
        return Err(format!("only {} points in fit window", hi - lo));
    }
    let ff = &f[lo..hi];
    let aa = &a[lo..hi];
    const SC: f64 = 1e6;
    let fc = f[i0];
    let model = |p: &[f64], x: f64| {
        let u = x - p[4];
        p[0] + p[1] * u + (p[3] + p[2] * u) / (1.0 + 4.0 * (u / p[5]).powi(2)).sqrt()
    };
    let xs: Vec<f64> = ff.iter().map(|&v| (v - fc) / SC).collect();
    let res = least_squares(
        &["A1", "A2", "A3", "S_max", "f0", "delta_f"],
        &[0.0, 0.0, 0.0, amax, 0.0, df0 / SC],
        xs.len(),
        |p, out| {
            for i in 0..xs.len() {
                out[i] = (model(p, xs[i]) - aa[i]) / amax;
            }
        },
        &LsqOptions::default(),
    )
    .map_err(|e| e.to_string())?;
    if !res.converged {
        return Err("lineshape fit did not converge".into());
    }
    let p = &res.params;
    let width = p[5].abs() * SC;
    let f0 = fc + p[4] * SC;
    if !(p[3] > 0.0) {
        return Err("non-positive peak amplitude".into());
    }
    if !(f0 > ff[0] && f0 < ff[ff.len() - 1]) {
        return Err("centre outside fit window".into());
    }
    if !(width > 0.0 && width < ff[ff.len() - 1] - ff[0]) {
        return Err("width not resolved in fit window".into());
    }
    // back to A1 + A2·f + (S + A3·f)/√(…) in absolute f
    let a2 = p[1] / SC;
    let a3 = p[2] / SC;
    Ok(PeakRecordCore {
        f0,
        delta_f: width,
        s_max: p[3] - a3 * f0,
        background: [p[0] - a2 * f0, a2, a3],
        sigma_f0: res.sigma[4] * SC,
    })
}

struct PeakRecordCore {
    f0: f64,
    delta_f: f64,
    s_max: f64,
    background: [f64; 3],
    sigma_f0: f64,
}

/// Peaks of one amplitude slice at field `b`.
pub fn slice_peaks(b: f64, f: &[f64], a: &[f64], opts: &PeakOptions) -> Vec<PeakRecord> {
    if f.len() < 8 {
        return vec![PeakRecord::flagged(b, "fewer than 8 frequency points")];
    }
    let s = moving_average(a, opts.smooth.max(1));
    let cand = candidates(&s);
    let top = cand.iter().map(|c| s[c.0]).fold(0.0, f64::max);
    let mut kept: Vec<(usize, f64)> = cand
        .into_iter()
        .filter(|&(i, prom)| {
            prom > opts.min_rel_prominence * s[i]
                && s[i] > opts.min_height * top
                && prom > opts.min_abs_prominence * top
        })
        .collect();
    if kept.is_empty() {
        return vec![PeakRecord::flagged(b, "no discernible peak")];
    }
    // valleys between neighbouring accepted peaks bound each fit
    let mut pos: Vec<usize> = kept.iter().map(|c| c.0).collect();
    pos.sort_unstable();
    let valley = |x: usize, y: usize| (x..=y).min_by(|&p, &q| s[p].total_cmp(&s[q])).unwrap_or(x);
    let bounds_of = |i: usize| {
        let k = pos.partition_point(|&p| p < i);
        let lo = if k > 0 { valley(pos[k - 1], i) } else { 0 };
        let hi = if k + 1 < pos.len() { valley(i, pos[k + 1]) + 1 } else { a.len() };
        (lo, hi)
    };
    kept.sort_by(|x, y| s[y.0].total_cmp(&s[x.0]));
    if !opts.secondary {
        kept.truncate(1);
    }
    let mut out: Vec<PeakRecord> = Vec::new();
    for (rank, &(i, _)) in kept.iter().enumerate() {
        // refine onto the raw maximum near the smoothed one
        let h = opts.smooth / 2;
        let lo = i.saturating_sub(h);
        let hi = (i + h + 1).min(a.len());
        let i0 = (lo..hi).max_by(|&x, &y| a[x].total_cmp(&a[y])).unwrap_or(i);
        let rec = match fit_one(f, a, i0, opts.window, bounds_of(i)) {
            Ok(c) => PeakRecord {
                b,
                f0: c.f0,
                delta_f: c.delta_f,
                q: c.f0 / c.delta_f,
                s_max: c.s_max,
                background: c.background,
                sigma_f0: c.sigma_f0,
                rank,
                flag: None,
            },
            Err(why) => PeakRecord {
                rank,
                ..PeakRecord::flagged(b, why)
            },
        };
        // two candidates converging onto one resonance: keep the first
        let dup = rec.is_ok()
            && out.iter().any(|o| {
                o.is_ok() && (o.f0 - rec.f0).abs() < 0.5 * o.delta_f.max(rec.delta_f)
            });
        if !dup {
            out.push(rec);
        }
    }
    for (k, r) in out.iter_mut().enumerate() {
        r.rank = k;
    }
    out
}

/// Lineshape fits of every B slice, in parallel, assembled in B order.
pub fn extract_peaks(sweep: &FieldSweep, opts: &PeakOptions) -> Result<PeakTrace> {
    sweep.validate()?;
    let recs: Vec<Vec<PeakRecord>> = (0..sweep.n_b())
        .into_par_iter()
        .map(|i| slice_peaks(sweep.b_axis[i], &sweep.f_axis, &sweep.amplitude_row(i), opts))
        .collect();
    PeakTrace::new(recs.concat())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cavity::{s21_lineshape, transmission, CavityMode, SpinDrive};
    use crate::simulate::linspace;

    const FC: f64 = 12.593_45e9;

    #[test]
    fn recovers_lineshape_parameters() {
        let p = LineshapeParams {
            a1: 0.01,
            a2: 0.0,
            a3: 0.0,
            s_max: 0.4,
            f0: FC + 0.3e6,
            delta_f: 0.2e6,
        };
        let f = linspace(FC - 3e6, FC + 3e6, 601);
        let a: Vec<f64> = f.iter().map(|&x| s21_lineshape(x, &p)).collect();
        let r = slice_peaks(0.0, &f, &a, &PeakOptions::default());
        assert_eq!(r.len(), 1);
        let r = &r[0];
        assert!(r.is_ok(), "{:?}", r.flag);
        assert!((r.f0 - p.f0).abs() < 1e-6 * p.delta_f);
        assert!((r.delta_f / p.delta_f - 1.0).abs() < 1e-6);
        assert!((r.s_max - 0.4).abs() < 1e-6);
        assert_eq!(r.q, r.f0 / r.delta_f);
    }

    #[test]
    fn bare_slice_q() {
        let c = CavityMode::new(FC, 0.22e6).unwrap();
        let f = linspace(FC - 15e6, FC + 15e6, 2001);
        let a: Vec<f64> = f.iter().map(|&x| transmission(x, &c, &[]).norm()).collect();
        let r = &slice_peaks(0.0, &f, &a, &PeakOptions::default())[0];
        assert!((r.f0 - FC).abs() < 1.0);
        assert!((r.q / c.q() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn flat_slice_flagged() {
        let f = linspace(FC - 15e6, FC + 15e6, 2001);
        let a = vec![0.3; f.len()];
        let r = slice_peaks(0.1, &f, &a, &PeakOptions::default());
        assert_eq!(r.len(), 1);
        assert!(!r[0].is_ok());
        assert!(r[0].f0.is_nan());
    }

    #[test]
    fn two_peaks_near_crossing() {
        let c = CavityMode::new(FC, 0.22e6).unwrap();
        let drive = [SpinDrive {
            omega_s: FC + 1e6,
            g: 1.34e6,
            gamma_d: 0.57e6,
        }];
        let f = linspace(FC - 15e6, FC + 15e6, 2001);
        let a: Vec<f64> = f.iter().map(|&x| transmission(x, &c, &drive).norm()).collect();
        // Damping skews the branches, so the oracle is the dense argmax of
        // |S21| near each polariton rather than the polariton itself.
        let (p, m) = crate::cavity::polariton_frequencies(FC, FC + 1e6, 1.34e6);
        let argmax = |c0: f64| {
            let grid = linspace(c0 - 0.5e6, c0 + 0.5e6, 100_001);
            let amp = |x: f64| transmission(x, &c, &drive).norm();
            grid.into_iter().fold(c0, |best, x| if amp(x) > amp(best) { x } else { best })
        };
        let (p, m) = (argmax(p), argmax(m));
        let one = slice_peaks(0.0, &f, &a, &PeakOptions::default());
        assert_eq!(one.len(), 1);
        let both = slice_peaks(
            0.0,
            &f,
            &a,
            &PeakOptions {
                secondary: true,
                ..Default::default()
            },
        );
        assert_eq!(both.len(), 2);
        // the overlapping tail skews the weaker branch by a fraction of its width
        let mut fs: Vec<(f64, f64)> = both.iter().map(|r| (r.f0, r.delta_f)).collect();
        fs.sort_by(|x, y| x.0.total_cmp(&y.0));
        assert!((fs[0].0 - m).abs() < 0.2 * fs[0].1, "{:?} vs {}", fs[0], m);
        assert!((fs[1].0 - p).abs() < 0.2 * fs[1].1, "{:?} vs {}", fs[1], p);
        assert_eq!(one[0].f0, both[0].f0);
    }

    #[test]
    fn trace_rejects_inconsistent_q() {
        let mut r = slice_peaks(
            0.0,
            &linspace(FC - 1e6, FC + 1e6, 201),
            &linspace(FC - 1e6, FC + 1e6, 201)
                .iter()
                .map(|&x| 1.0 / (1.0 + ((x - FC) / 0.1e6).powi(2)).sqrt())
                .collect::<Vec<_>>(),
            &PeakOptions::default(),
        );
        r[0].q *= 1.01;
        assert!(PeakTrace::new(r).is_err());
    }
}
