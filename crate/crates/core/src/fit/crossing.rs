//! Avoided-crossing fits of extracted peak positions.
//!
//! A single window is fitted with the coupled-mode branches against
//! ωs(B) = γe·B − 2D. Several windows are fitted jointly by replacing the
//! bare ωc of each window with the hybrid mode left by its neighbours: the
//! lower polariton of the window to its left and the upper polariton of the
//! window to its right. Shifts from both neighbours add.
//!
//! Internally all frequencies are MHz offsets from a reference ωc0 so the
//! branch arithmetic does not lose digits to the 12 GHz carrier.

use super::lsq::{least_squares, FitResult, LsqOptions};
use super::peaks::{PeakRecord, PeakTrace};
use crate::cavity::polariton_frequencies;
use crate::error::{Error, Result};

const MHZ: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct CrossingWindow {
    pub b_lo: f64,
    pub b_hi: f64,
    pub use_upper: bool,
    pub use_lower: bool,
    pub g_guess: f64,
    pub d_guess: f64,
    pub omega_c_guess: Option<f64>,
}

impl CrossingWindow {
    pub fn new(b_lo: f64, b_hi: f64, g_guess: f64, d_guess: f64) -> Self {
        CrossingWindow {
            b_lo,
            b_hi,
            use_upper: true,
            use_lower: true,
            g_guess,
            d_guess,
            omega_c_guess: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.b_lo < self.b_hi) {
            return Err(Error::domain(format!(
                "window needs B_lo < B_hi, got [{}, {}]",
                self.b_lo, self.b_hi
            )));
        }
        if !(self.use_upper || self.use_lower) {
            return Err(Error::domain("window excludes both branches"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weighting {
    /// Every point counts equally (residuals in MHz).
    Uniform,
    /// 1/σ_f0 from the lineshape fit.
    SigmaF0,
    /// 1/σ with σ² = σ_f0² + (h²/|f0 − ωc|)², h the slice's excess half
    /// width over the bare cavity. Adds a model-error floor for broadened
    /// points near the gap.
    LinewidthFloor,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossingOptions {
    pub gamma_e: f64,
    pub free_gamma: bool,
    pub weighting: Weighting,
    /// Points closer than this many g to the branch midpoint are gap points.
    pub gap_exclusion: f64,
    pub max_rounds: usize,
    pub rel_tol: f64,
    pub omega_c_ref: Option<f64>,
    pub lsq: LsqOptions,
}

impl Default for CrossingOptions {
    fn default() -> Self {
        CrossingOptions {
            gamma_e: 28e9,
            free_gamma: false,
            weighting: Weighting::LinewidthFloor,
            gap_exclusion: 0.5,
            max_rounds: 50,
            rel_tol: 1e-4,
            omega_c_ref: None,
            lsq: LsqOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Upper,
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchPoint {
    pub b: f64,
    pub f: f64,
    pub branch: Branch,
    /// Weight denominator (Hz).
    pub sigma: f64,
}

/// Fitted crossing in Hz: g, D, ωc and γe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossingParams {
    pub g: f64,
    pub d: f64,
    pub omega_c: f64,
    pub gamma_e: f64,
}

impl CrossingParams {
    pub fn omega_s(&self, b: f64) -> f64 {
        self.gamma_e * b - 2.0 * self.d
    }

    fn from_fit(r: &FitResult, gamma_e: f64) -> Self {
        CrossingParams {
            g: r.value("g"),
            d: r.value("D"),
            omega_c: r.value("omega_c"),
            gamma_e: r.get("gamma_e").map(|x| x.0).unwrap_or(gamma_e),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Side {
    /// Neighbour at lower field; contributes its lower polariton.
    Left,
    /// Neighbour at higher field; contributes its upper polariton.
    Right,
}

/// Hybrid cavity frequency seen by a window: ωc plus the shifts imposed by
/// each neighbouring crossing evaluated against the same ωc.
pub fn hybrid_cavity(omega_c: f64, b: f64, neighbours: &[(Side, CrossingParams)]) -> f64 {
    let mut c = omega_c;
    for (side, n) in neighbours {
        let (p, m) = polariton_frequencies(omega_c, n.omega_s(b), n.g);
        c += match side {
            Side::Left => m - omega_c,
            Side::Right => p - omega_c,
        };
    }
    c
}

/// Branch frequency of a crossing under optional neighbour corrections.
pub fn branch_frequency(
    p: &CrossingParams,
    b: f64,
    branch: Branch,
    neighbours: &[(Side, CrossingParams)],
) -> f64 {
    let c = hybrid_cavity(p.omega_c, b, neighbours);
    let (up, lo) = polariton_frequencies(c, p.omega_s(b), p.g);
    match branch {
        Branch::Upper => up,
        Branch::Lower => lo,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossingFit {
    /// Parameters g, D, omega_c (and gamma_e when freed), all in Hz.
    pub result: FitResult,
    pub points: Vec<BranchPoint>,
    pub neighbours: Vec<(Side, CrossingParams)>,
}

impl CrossingFit {
    pub fn params(&self, gamma_e: f64) -> CrossingParams {
        CrossingParams::from_fit(&self.result, gamma_e)
    }
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Bare-cavity reference width: median of the ten narrowest primary peaks.
pub fn reference_width(trace: &PeakTrace) -> Option<f64> {
    let mut w: Vec<f64> = trace.primary().map(|r| r.delta_f).collect();
    w.sort_by(f64::total_cmp);
    w.truncate(10);
    median(w)
}

fn usable(r: &PeakRecord) -> bool {
    r.is_ok() && r.sigma_f0.is_finite() && r.sigma_f0 > 0.0 && r.sigma_f0 < 0.2 * r.delta_f
}

struct Prepared<'a> {
    recs: Vec<&'a PeakRecord>,
    omega_c0: f64,
    width_ref: f64,
}

fn prepare<'a>(
    trace: &'a PeakTrace,
    w: &CrossingWindow,
    opts: &CrossingOptions,
    width_ref: f64,
) -> Result<Prepared<'a>> {
    w.validate()?;
    let recs: Vec<&PeakRecord> = trace
        .records
        .iter()
        .filter(|r| usable(r) && r.b >= w.b_lo && r.b < w.b_hi)
        .collect();
    if recs.is_empty() {
        return Err(Error::Fit(format!(
            "no usable peaks in window [{}, {}] T",
            w.b_lo, w.b_hi
        )));
    }
    let omega_c0 = w
        .omega_c_guess
        .or(opts.omega_c_ref)
        .or_else(|| median(recs.iter().filter(|r| r.rank == 0).map(|r| r.f0).collect()))
        .unwrap_or(recs[0].f0);
    Ok(Prepared {
        recs,
        omega_c0,
        width_ref,
    })
}

fn point_sigma(r: &PeakRecord, opts: &CrossingOptions, omega_c0: f64, width_ref: f64) -> f64 {
    match opts.weighting {
        Weighting::Uniform => MHZ,
        Weighting::SigmaF0 => r.sigma_f0,
        Weighting::LinewidthFloor => {
            let h = 0.5 * (r.delta_f - width_ref).max(0.0);
            let shift = (r.f0 - omega_c0).abs().max(1e3);
            r.sigma_f0.hypot(h * h / shift)
        }
    }
}

/// Data-driven starting point: (g, D) in Hz.
fn initial_guess(prep: &Prepared, w: &CrossingWindow, gamma_e: f64) -> (f64, f64) {
    let prim: Vec<&PeakRecord> = prep.recs.iter().filter(|r| r.rank == 0).cloned().collect();
    let widths = median(prim.iter().map(|r| r.delta_f).collect()).unwrap_or(prep.width_ref);
    let mut best: Option<(f64, f64)> = None;
    for pair in prim.windows(2) {
        let jump = pair[1].f0 - pair[0].f0;
        if jump < -2.0 * widths && best.is_none_or(|b| jump < b.0) {
            best = Some((jump, 0.5 * (pair[0].b + pair[1].b)));
        }
    }
    let d0 = match best {
        Some((_, bx)) => 0.5 * (gamma_e * bx - prep.omega_c0),
        None => w.d_guess,
    };
    let mid = |b: f64| 0.5 * (prep.omega_c0 + gamma_e * b - 2.0 * d0);
    let mut gap = f64::INFINITY;
    let mut i = 0;
    while i < prep.recs.len() {
        let b = prep.recs[i].b;
        let mut j = i;
        while j < prep.recs.len() && prep.recs[j].b == b {
            j += 1;
        }
        let m = mid(b);
        let above = prep.recs[i..j].iter().filter(|r| r.f0 > m).map(|r| r.f0).fold(f64::INFINITY, f64::min);
        let below = prep.recs[i..j].iter().filter(|r| r.f0 < m).map(|r| r.f0).fold(f64::NEG_INFINITY, f64::max);
        if above.is_finite() && below.is_finite() {
            gap = gap.min(above - below);
        }
        i = j;
    }
    let noise = median(prep.recs.iter().map(|r| r.sigma_f0).collect()).unwrap_or(0.0);
    let g0 = if gap.is_finite() { 0.5 * gap } else { w.g_guess };
    (g0.max(2.0 * noise).max(1.0), d0)
}

fn assign(
    prep: &Prepared,
    w: &CrossingWindow,
    opts: &CrossingOptions,
    p: &CrossingParams,
    neighbours: &[(Side, CrossingParams)],
) -> Vec<BranchPoint> {
    let mut out = Vec::new();
    for r in &prep.recs {
        let c = hybrid_cavity(p.omega_c, r.b, neighbours);
        let mid = 0.5 * (c + p.omega_s(r.b));
        let d = r.f0 - mid;
        if d.abs() < opts.gap_exclusion * p.g {
            continue;
        }
        let branch = if d > 0.0 { Branch::Upper } else { Branch::Lower };
        if (branch == Branch::Upper && !w.use_upper) || (branch == Branch::Lower && !w.use_lower) {
            continue;
        }
        out.push(BranchPoint {
            b: r.b,
            f: r.f0,
            branch,
            sigma: point_sigma(r, opts, prep.omega_c0, prep.width_ref),
        });
    }
    // one point per (B, branch): keep the better determined
    out.sort_by(|a, b| {
        a.b.total_cmp(&b.b)
            .then((a.branch == Branch::Lower).cmp(&(b.branch == Branch::Lower)))
            .then(a.sigma.total_cmp(&b.sigma))
    });
    out.dedup_by(|a, b| a.b == b.b && a.branch == b.branch);
    out
}

fn fit_points(
    points: &[BranchPoint],
    init: &CrossingParams,
    omega_c0: f64,
    neighbours: &[(Side, CrossingParams)],
    opts: &CrossingOptions,
) -> Result<FitResult> {
    let has_up = points.iter().any(|p| p.branch == Branch::Upper);
    let has_lo = points.iter().any(|p| p.branch == Branch::Lower);
    if !(has_up && has_lo) {
        return Err(Error::RankDeficient(
            "single-branch window: g and omega_c are degenerate".into(),
        ));
    }
    let free_g = opts.free_gamma;
    let mut names = vec!["g", "D", "omega_c"];
    let mut x0 = vec![init.g / MHZ, init.d / MHZ, (init.omega_c - omega_c0) / MHZ];
    if free_g {
        names.push("gamma_e");
        x0.push(init.gamma_e / 1e9);
    }
    // neighbour models expressed in the offset frame
    let nb: Vec<(Side, f64, f64, f64)> = neighbours
        .iter()
        .map(|(s, n)| (*s, n.g / MHZ, n.d / MHZ, n.gamma_e))
        .collect();
    let pts: Vec<(f64, f64, Branch, f64)> = points
        .iter()
        .map(|p| (p.b, (p.f - omega_c0) / MHZ, p.branch, p.sigma / MHZ))
        .collect();
    let gamma_fixed = opts.gamma_e;
    let mut res = least_squares(
        &names,
        &x0,
        pts.len(),
        |x, out| {
            let gamma = if free_g { x[3] * 1e9 } else { gamma_fixed };
            for (k, &(b, f, br, s)) in pts.iter().enumerate() {
                let wc = x[2];
                let mut c = wc;
                for &(side, ng, nd, ngam) in &nb {
                    let ws_n = (ngam * b - omega_c0) / MHZ - 2.0 * nd;
                    let (p, m) = polariton_frequencies(wc, ws_n, ng);
                    c += match side {
                        Side::Left => m - wc,
                        Side::Right => p - wc,
                    };
                }
                let ws = (gamma * b - omega_c0) / MHZ - 2.0 * x[1];
                let (up, lo) = polariton_frequencies(c, ws, x[0]);
                let model = if br == Branch::Upper { up } else { lo };
                out[k] = (model - f) / s;
            }
        },
        &opts.lsq,
    )?;
    if res.params[0] < 0.0 {
        res.params[0] = -res.params[0];
        for k in 0..res.params.len() {
            if k != 0 {
                res.covariance[(0, k)] = -res.covariance[(0, k)];
                res.covariance[(k, 0)] = -res.covariance[(k, 0)];
            }
        }
    }
    res.rescale(0, MHZ, 0.0);
    res.rescale(1, MHZ, 0.0);
    res.rescale(2, MHZ, omega_c0);
    if free_g {
        res.rescale(3, 1e9, 0.0);
    }
    Ok(res)
}

fn fit_window_initial<'a>(
    trace: &'a PeakTrace,
    w: &CrossingWindow,
    opts: &CrossingOptions,
    width_ref: f64,
) -> Result<(CrossingFit, f64, Prepared<'a>)> {
    let prep = prepare(trace, w, opts, width_ref)?;
    let (g0, d0) = initial_guess(&prep, w, opts.gamma_e);
    let mut p = CrossingParams {
        g: g0,
        d: d0,
        omega_c: prep.omega_c0,
        gamma_e: opts.gamma_e,
    };
    let mut points = assign(&prep, w, opts, &p, &[]);
    let mut result = fit_points(&points, &p, prep.omega_c0, &[], opts)?;
    p = CrossingParams::from_fit(&result, opts.gamma_e);
    let again = assign(&prep, w, opts, &p, &[]);
    if again != points {
        points = again;
        result = fit_points(&points, &p, prep.omega_c0, &[], opts)?;
    }
    let omega_c0 = prep.omega_c0;
    Ok((
        CrossingFit {
            result,
            points,
            neighbours: Vec::new(),
        },
        omega_c0,
        prep,
    ))
}

/// Isolated fit of one crossing (no neighbour correction).
pub fn fit_single_crossing(
    trace: &PeakTrace,
    window: &CrossingWindow,
    opts: &CrossingOptions,
) -> Result<CrossingFit> {
    let wref = reference_width(trace).unwrap_or(0.0);
    fit_window_initial(trace, window, opts, wref).map(|x| x.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledFit {
    /// One fit per window, in the caller's order.
    pub fits: Vec<CrossingFit>,
    /// Independent fits before correction, in the caller's order.
    pub independent: Vec<FitResult>,
    pub rounds: usize,
    pub converged: bool,
    /// Last two iterates (g, D, ωc per window) when not converged.
    pub last_two: Option<(Vec<CrossingParams>, Vec<CrossingParams>)>,
}

impl CoupledFit {
    pub fn params(&self, gamma_e: f64) -> Vec<CrossingParams> {
        self.fits.iter().map(|f| f.params(gamma_e)).collect()
    }

    /// Model (upper, lower) branch of window `k` at field `b`.
    pub fn branches(&self, k: usize, b: f64, gamma_e: f64) -> (f64, f64) {
        let f = &self.fits[k];
        let p = f.params(gamma_e);
        (
            branch_frequency(&p, b, Branch::Upper, &f.neighbours),
            branch_frequency(&p, b, Branch::Lower, &f.neighbours),
        )
    }
}

fn neighbours_of(order: &[usize], pos: usize, params: &[CrossingParams]) -> Vec<(Side, CrossingParams)> {
    let mut n = Vec::new();
    if pos > 0 {
        n.push((Side::Left, params[order[pos - 1]]));
    }
    if pos + 1 < order.len() {
        n.push((Side::Right, params[order[pos + 1]]));
    }
    n
}

fn changed(a: &CrossingParams, b: &CrossingParams, tol: f64) -> bool {
    let close = |x: f64, y: f64, floor: f64| (x - y).abs() <= tol * x.abs().max(floor);
    !(close(a.g, b.g, 1e4)
        && close(a.d, b.d, 1e4)
        && (a.omega_c - b.omega_c).abs() <= tol * 1e4 * 10.0
        && close(a.gamma_e, b.gamma_e, 1.0))
}

/// Iterative hybrid-mode correction over several windows.
///
/// Round 0 fits every window alone. Each later round refits every window
/// against the previous round's neighbours (Jacobi sweep over windows
/// sorted by field) until no parameter moves by more than `rel_tol`.
pub fn fit_coupled_crossings(
    trace: &PeakTrace,
    windows: &[CrossingWindow],
    opts: &CrossingOptions,
) -> Result<CoupledFit> {
    if windows.len() < 2 {
        return Err(Error::domain("coupled fit needs at least two windows"));
    }
    let mut order: Vec<usize> = (0..windows.len()).collect();
    order.sort_by(|&a, &b| windows[a].b_lo.total_cmp(&windows[b].b_lo));
    let wref = reference_width(trace).unwrap_or(0.0);

    let mut fits = Vec::with_capacity(windows.len());
    let mut preps = Vec::with_capacity(windows.len());
    for w in windows {
        let (fit, _, prep) = fit_window_initial(trace, w, opts, wref)?;
        fits.push(fit);
        preps.push(prep);
    }
    let independent: Vec<FitResult> = fits.iter().map(|f| f.result.clone()).collect();
    let mut params: Vec<CrossingParams> = fits.iter().map(|f| f.params(opts.gamma_e)).collect();
    let mut prev = params.clone();
    let mut converged = false;
    let mut rounds = 0;
    while rounds < opts.max_rounds {
        rounds += 1;
        let mut next = params.clone();
        for (pos, &k) in order.iter().enumerate() {
            let nb = neighbours_of(&order, pos, &params);
            let points = assign(&preps[k], &windows[k], opts, &params[k], &nb);
            let result = fit_points(&points, &params[k], preps[k].omega_c0, &nb, opts)?;
            next[k] = CrossingParams::from_fit(&result, opts.gamma_e);
            fits[k] = CrossingFit {
                result,
                points,
                neighbours: nb,
            };
        }
        let moved = next.iter().zip(&params).any(|(a, b)| changed(a, b, opts.rel_tol));
        prev = std::mem::replace(&mut params, next);
        if !moved {
            converged = true;
            break;
        }
    }
    for f in &mut fits {
        f.result
            .flags
            .push("hybrid-corrected against neighbouring windows".to_string());
        if !converged {
            f.result.converged = false;
            f.result.flags.push(format!("coupled iteration stopped after {rounds} rounds"));
        }
    }
    Ok(CoupledFit {
        fits,
        independent,
        rounds,
        converged,
        last_two: (!converged).then_some((prev, params)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{linspace, Normal};
    use nalgebra::Matrix3;

    const FC: f64 = 12.593_45e9;
    const G: f64 = 28e9;

    fn rec(b: f64, f0: f64, sigma: f64, rank: usize) -> PeakRecord {
        let delta_f = 0.22e6;
        PeakRecord {
            b,
            f0,
            delta_f,
            q: f0 / delta_f,
            s_max: 0.5,
            background: [0.0; 3],
            sigma_f0: sigma,
            rank,
            flag: None,
        }
    }

    /// Both branches of one crossing, with optional Gaussian scatter.
    fn crossing_trace(g: f64, d: f64, b: &[f64], noise: f64, seed: u64) -> PeakTrace {
        let mut n = Normal::new(seed, 0);
        let mut out = Vec::new();
        for &bb in b {
            let (p, m) = polariton_frequencies(FC, G * bb - 2.0 * d, g);
            let (e1, e2) = n.pair();
            // the more cavity-like branch is the taller one
            let up_first = (p - FC).abs() < (m - FC).abs();
            out.push(rec(bb, p + noise * e1, noise.max(1.0), usize::from(!up_first)));
            out.push(rec(bb, m + noise * e2, noise.max(1.0), usize::from(up_first)));
        }
        PeakTrace::new(out).unwrap()
    }

    fn around(d: f64, half: f64, n: usize) -> Vec<f64> {
        let bx = (FC + 2.0 * d) / G;
        linspace(bx - half, bx + half, n)
    }

    fn opts() -> CrossingOptions {
        CrossingOptions {
            omega_c_ref: Some(FC),
            ..CrossingOptions::default()
        }
    }

    #[test]
    fn exact_single_crossing_round_trip() {
        let b = around(2.01e6, 1.5e-3, 121);
        let t = crossing_trace(2.5e6, 2.01e6, &b, 0.0, 0);
        let w = CrossingWindow::new(b[0], b[120] + 1e-9, 1e6, 0.0);
        let f = fit_single_crossing(&t, &w, &opts()).unwrap();
        assert!((f.result.value("g") / 2.5e6 - 1.0).abs() < 1e-6);
        assert!((f.result.value("D") - 2.01e6).abs() < 1.0);
        assert!((f.result.value("omega_c") - FC).abs() < 1.0);
    }

    #[test]
    fn noisy_single_crossing_within_three_sigma() {
        let b = around(2.01e6, 1.5e-3, 121);
        for seed in 1..=5 {
            let t = crossing_trace(2.5e6, 2.01e6, &b, 20e3, seed);
            let w = CrossingWindow::new(b[0], b[120] + 1e-9, 1e6, 0.0);
            let r = fit_single_crossing(&t, &w, &opts()).unwrap().result;
            for (name, truth) in [("g", 2.5e6), ("D", 2.01e6), ("omega_c", FC)] {
                let (v, s) = r.get(name).unwrap();
                assert!((v - truth).abs() < 3.0 * s, "seed {seed} {name}: {v} ± {s}");
            }
        }
    }

    #[test]
    fn zero_coupling_is_consistent_with_zero() {
        let b = around(2.01e6, 1.5e-3, 121);
        let t = crossing_trace(0.0, 2.01e6, &b, 20e3, 7);
        let w = CrossingWindow::new(b[0], b[120] + 1e-9, 1e6, 0.0);
        let (g, s) = fit_single_crossing(&t, &w, &opts()).unwrap().result.get("g").unwrap();
        assert!(g.abs() <= 2.0 * s, "g = {g} ± {s}");
    }

    #[test]
    fn single_branch_window_is_rank_deficient() {
        let b = around(2.01e6, 1.5e-3, 61);
        let t = crossing_trace(2.5e6, 2.01e6, &b, 0.0, 0);
        let w = CrossingWindow {
            use_lower: false,
            ..CrossingWindow::new(b[0], b[60] + 1e-9, 1e6, 0.0)
        };
        let e = fit_single_crossing(&t, &w, &opts()).unwrap_err();
        assert!(matches!(e, Error::RankDeficient(_)), "{e}");
    }

    /// Two eigenfrequencies nearest ωc of the cavity coupled to two spin
    /// lines, from the 3×3 Hermitian coupling matrix.
    fn two_crossing_trace(s: [(f64, f64); 2], b: &[f64], noise: f64) -> PeakTrace {
        let mut n = Normal::new(11, 0);
        let mut out = Vec::new();
        for &bb in b {
            // MHz offsets from ωc keep the eigen-solve well conditioned
            let w1 = (G * bb - 2.0 * s[0].1 - FC) / 1e6;
            let w2 = (G * bb - 2.0 * s[1].1 - FC) / 1e6;
            let (g1, g2) = (s[0].0 / 1e6, s[1].0 / 1e6);
            let h = Matrix3::new(0.0, g1, g2, g1, w1, 0.0, g2, 0.0, w2);
            let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().map(|x| FC + x * 1e6).collect();
            ev.sort_by(|x, y| (x - FC).abs().total_cmp(&(y - FC).abs()));
            let (e1, e2) = n.pair();
            out.push(rec(bb, ev[0] + noise * e1, 1e3, 0));
            out.push(rec(bb, ev[1] + noise * e2, 1e3, 1));
        }
        PeakTrace::new(out).unwrap()
    }

    #[test]
    fn distant_crossings_match_independent_fits() {
        let s = [(0.1e6, 0.0), (0.1e6, 50e6)];
        let b = linspace((FC - 4e6) / G, (FC + 104e6) / G, 1201);
        let t = two_crossing_trace(s, &b, 1e3);
        let split = (FC + 50e6) / G;
        let w = [
            CrossingWindow::new(b[0], split, 0.1e6, 0.0),
            CrossingWindow::new(split, b[1200] + 1e-9, 0.1e6, 50e6),
        ];
        let c = fit_coupled_crossings(&t, &w, &opts()).unwrap();
        assert!(c.converged);
        for (fit, ind) in c.fits.iter().zip(&c.independent) {
            for name in ["g", "D"] {
                let (a, sa) = fit.result.get(name).unwrap();
                let (b, _) = ind.get(name).unwrap();
                assert!((a - b).abs() <= sa, "{name}: {a} vs {b} (σ {sa})");
            }
        }
    }

    #[test]
    fn coupled_fit_is_permutation_stable() {
        let s = [(2.5e6, 2.01e6), (1.34e6, 39.76e6)];
        let b = linspace(0.448, 0.4545, 131);
        let t = two_crossing_trace(s, &b, 0.0);
        let w = vec![
            CrossingWindow::new(0.448, 0.4513, 2.5e6, 2e6),
            CrossingWindow::new(0.4513, 0.4546, 1.3e6, 40e6),
        ];
        let o = opts();
        let fwd = fit_coupled_crossings(&t, &w, &o).unwrap();
        let rev_w: Vec<_> = w.iter().rev().cloned().collect();
        let rev = fit_coupled_crossings(&t, &rev_w, &o).unwrap();
        assert!(fwd.converged && rev.converged);
        let (pf, mut pr) = (fwd.params(G), rev.params(G));
        pr.reverse();
        for (a, b) in pf.iter().zip(&pr) {
            assert!(!changed(a, b, o.rel_tol), "{a:?} vs {b:?}");
        }
        // the correction pulls both couplings onto the injected values
        for (p, (g, d)) in pf.iter().zip(s) {
            assert!((p.g / g - 1.0).abs() < 0.01, "{p:?}");
            assert!((p.d - d).abs() < 0.1e6, "{p:?}");
        }
    }

    #[test]
    fn hybrid_cavity_sides() {
        let n = CrossingParams {
            g: 1e6,
            d: 0.0,
            omega_c: FC,
            gamma_e: G,
        };
        let b = (FC - 10e6) / G;
        let left = hybrid_cavity(FC, b, &[(Side::Left, n)]);
        let right = hybrid_cavity(FC, b, &[(Side::Right, n)]);
        let (p, m) = polariton_frequencies(FC, FC - 10e6, 1e6);
        assert_eq!(left, m);
        assert_eq!(right, p);
        assert_eq!(hybrid_cavity(FC, b, &[]), FC);
    }
}
