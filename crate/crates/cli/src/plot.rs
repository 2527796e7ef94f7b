//! Plot data: one delimited file per curve, a legend manifest, and static
//! SVG renderings of the amplitude map and of Q(B).

use std::fmt::Write as _;

use serde_json::json;

use spinres::fit::crossing::{branch_frequency, Branch};
use spinres::pipeline::Analysis;
use spinres::simulate::{linspace, FieldSweep};

pub struct Series {
    /// Path relative to the output directory.
    pub file: String,
    pub label: String,
    /// `points` or `curve`.
    pub kind: &'static str,
    /// `amplitude` (f against B) or `q` (Q against B).
    pub figure: &'static str,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
}

impl Series {
    pub fn to_tsv(&self) -> String {
        let mut s = self.columns.join("\t");
        s.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|x| format!("{x:e}")).collect();
            s.push_str(&cells.join("\t"));
            s.push('\n');
        }
        s
    }
}

pub struct Figures {
    pub series: Vec<Series>,
    pub omega_c: f64,
}

impl Figures {
    pub fn legend(&self) -> String {
        let series: Vec<_> = self
            .series
            .iter()
            .map(|s| {
                json!({
                    "file": s.file,
                    "label": s.label,
                    "kind": s.kind,
                    "figure": s.figure,
                    "columns": s.columns,
                })
            })
            .collect();
        let v = json!({
            "series": series,
            "figures": { "amplitude": "amplitude.svg", "q": "q.svg" },
            "units": { "B_T": "tesla", "f_Hz": "Hz", "Q": "dimensionless" },
        });
        let mut s = serde_json::to_string_pretty(&v).expect("legend serializes");
        s.push('\n');
        s
    }
}

pub fn series(a: &Analysis, sweep: &FieldSweep) -> Figures {
    let mut out = Vec::new();
    for (l, c) in a.labels.iter().zip(&a.crossings) {
        for (branch, name) in [(Branch::Upper, "upper"), (Branch::Lower, "lower")] {
            out.push(Series {
                file: format!("series/branch_{l}_{name}.tsv"),
                label: format!("crossing {l}, {name} branch peaks"),
                kind: "points",
                figure: "amplitude",
                columns: vec!["B_T", "f_Hz", "sigma_Hz"],
                rows: c
                    .points
                    .iter()
                    .filter(|p| p.branch == branch)
                    .map(|p| vec![p.b, p.f, p.sigma])
                    .collect(),
            });
        }
        let (lo, hi) = c
            .points
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.b), hi.max(p.b)));
        if lo < hi {
            let p = c.params(a.gamma_e);
            out.push(Series {
                file: format!("series/fit_{l}.tsv"),
                label: format!("crossing {l}, fitted branches"),
                kind: "curve",
                figure: "amplitude",
                columns: vec!["B_T", "upper_Hz", "lower_Hz"],
                rows: linspace(lo, hi, 200)
                    .into_iter()
                    .map(|b| {
                        vec![
                            b,
                            branch_frequency(&p, b, Branch::Upper, &c.neighbours),
                            branch_frequency(&p, b, Branch::Lower, &c.neighbours),
                        ]
                    })
                    .collect(),
            });
        }
    }
    out.push(Series {
        file: "series/q_data.tsv".into(),
        label: "loaded Q of the tallest peak".into(),
        kind: "points",
        figure: "q",
        columns: vec!["B_T", "Q"],
        rows: a.trace.primary().map(|r| vec![r.b, r.q]).collect(),
    });
    for (k, (spec, q)) in a.qdips.iter().enumerate() {
        let Ok(q) = q else { continue };
        out.push(Series {
            file: format!("series/q_model_{}.tsv", k + 1),
            label: format!("Q model, region {}", k + 1),
            kind: "curve",
            figure: "q",
            columns: vec!["B_T", "Q", "masked"],
            rows: linspace(spec.b_lo, spec.b_hi, 300)
                .into_iter()
                .map(|b| {
                    let masked = (q.omega_mask - spec.gamma_e * b).abs() < spec.mask;
                    vec![b, q.q_model(spec, b), if masked { 1.0 } else { 0.0 }]
                })
                .collect(),
        });
    }
    let n = sweep.n_f();
    Figures {
        series: out,
        omega_c: 0.5 * (sweep.f_axis[0] + sweep.f_axis[n - 1]),
    }
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const ML: f64 = 70.0;
const MR: f64 = 20.0;
const MT: f64 = 20.0;
const MB: f64 = 50.0;

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        ML + (x - self.x.0) / (self.x.1 - self.x.0) * (W - ML - MR)
    }

    fn py(&self, y: f64) -> f64 {
        H - MB - (y - self.y.0) / (self.y.1 - self.y.0) * (H - MT - MB)
    }

    fn inside(&self, x: f64, y: f64) -> bool {
        x >= self.x.0 && x <= self.x.1 && y >= self.y.0 && y <= self.y.1
    }
}

fn open_svg(s: &mut String) {
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
}

fn axes(s: &mut String, fr: &Frame, xlabel: &str, ylabel: &str, yfmt: impl Fn(f64) -> String) {
    let (x0, x1, y0, y1) = (ML, W - MR, MT, H - MB);
    let _ = writeln!(
        s,
        r#"<rect x="{x0}" y="{y0}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        x1 - x0,
        y1 - y0
    );
    for k in 0..=4 {
        let t = k as f64 / 4.0;
        let xv = fr.x.0 + t * (fr.x.1 - fr.x.0);
        let yv = fr.y.0 + t * (fr.y.1 - fr.y.0);
        let (px, py) = (fr.px(xv), fr.py(yv));
        let _ = writeln!(
            s,
            r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{xv:.4}</text>"#,
            y1 + 15.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 4.0,
            py + 4.0,
            yfmt(yv)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{xlabel}</text>"#,
        0.5 * (x0 + x1),
        H - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.2}" text-anchor="middle" transform="rotate(-90 14 {:.2})">{ylabel}</text>"#,
        0.5 * (y0 + y1),
        0.5 * (y0 + y1)
    );
}

fn polyline(s: &mut String, fr: &Frame, pts: impl Iterator<Item = (f64, f64)>, colour: &str) {
    let mut d = String::new();
    for (x, y) in pts.filter(|&(x, y)| y.is_finite() && fr.inside(x, y)) {
        let _ = write!(d, "{:.2},{:.2} ", fr.px(x), fr.py(y));
    }
    if !d.is_empty() {
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="1.5"/>"#,
            d.trim_end()
        );
    }
}

fn dots(s: &mut String, fr: &Frame, pts: impl Iterator<Item = (f64, f64)>, colour: &str) {
    for (x, y) in pts.filter(|&(x, y)| y.is_finite() && fr.inside(x, y)) {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="1.8" fill="{colour}"/>"#,
            fr.px(x),
            fr.py(y)
        );
    }
}

/// Dark blue through teal to yellow.
fn colour(t: f64) -> String {
    let stops = [(0.05, 0.05, 0.30), (0.10, 0.55, 0.55), (0.98, 0.90, 0.15)];
    let t = t.clamp(0.0, 1.0) * 2.0;
    let k = (t.floor() as usize).min(1);
    let u = t - k as f64;
    let c: Vec<u8> = (0..3)
        .map(|i| {
            let a = [stops[k].0, stops[k].1, stops[k].2][i];
            let b = [stops[k + 1].0, stops[k + 1].1, stops[k + 1].2][i];
            ((a + u * (b - a)) * 255.0).round() as u8
        })
        .collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

/// |S21| in dB over (B, f − centre) with peak positions and fitted branches.
pub fn amplitude_svg(sweep: &FieldSweep, figs: &Figures) -> String {
    let (nb, nf) = (sweep.n_b(), sweep.n_f());
    let (cb, cf) = (nb.min(160), nf.min(120));
    let mut cells = vec![f64::NEG_INFINITY; cb * cf];
    for i in 0..nb {
        let row = sweep.row(i);
        let ci = i * cb / nb;
        for (j, z) in row.iter().enumerate() {
            let cj = j * cf / nf;
            let db = 20.0 * z.norm().max(1e-12).log10();
            let c = &mut cells[ci * cf + cj];
            *c = c.max(db);
        }
    }
    let hi = cells.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = hi - 40.0;
    let mhz = |f: f64| (f - figs.omega_c) / 1e6;
    let fr = Frame {
        x: (sweep.b_axis[0], sweep.b_axis[nb - 1]),
        y: (mhz(sweep.f_axis[0]), mhz(sweep.f_axis[nf - 1])),
    };
    let mut s = String::new();
    open_svg(&mut s);
    let (cw, chh) = ((W - ML - MR) / cb as f64, (H - MT - MB) / cf as f64);
    for ci in 0..cb {
        for cj in 0..cf {
            let t = (cells[ci * cf + cj] - lo) / (hi - lo);
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                ML + ci as f64 * cw,
                H - MB - (cj + 1) as f64 * chh,
                cw + 0.3,
                chh + 0.3,
                colour(t)
            );
        }
    }
    for se in figs.series.iter().filter(|s| s.figure == "amplitude") {
        match se.kind {
            "points" => dots(&mut s, &fr, se.rows.iter().map(|r| (r[0], mhz(r[1]))), "#e0303a"),
            _ => {
                for col in 1..se.columns.len() {
                    polyline(&mut s, &fr, se.rows.iter().map(|r| (r[0], mhz(r[col]))), "white");
                }
            }
        }
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="14" text-anchor="end">|S21| dB, {lo:.1} .. {hi:.1}</text>"#, W - MR);
    axes(&mut s, &fr, "B (T)", "f - centre (MHz)", |y| format!("{y:.1}"));
    s.push_str("</svg>\n");
    s
}

/// Loaded Q against field with the fitted dispersive models.
pub fn q_svg(figs: &Figures) -> String {
    let qs: Vec<&Series> = figs.series.iter().filter(|s| s.figure == "q").collect();
    let all = qs.iter().flat_map(|s| s.rows.iter().map(|r| (r[0], r[1])));
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in all.filter(|p| p.0.is_finite() && p.1.is_finite()) {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !(x1 > x0) {
        (x0, x1) = (0.0, 1.0);
    }
    if !(y1 > y0) {
        (y0, y1) = (0.0, 1.0);
    }
    let pad = 0.05 * (y1 - y0);
    let fr = Frame {
        x: (x0, x1),
        y: (y0 - pad, y1 + pad),
    };
    let mut s = String::new();
    open_svg(&mut s);
    let palette = ["#1f6fb4", "#d9742b", "#2c9c4a", "#8c4bb8"];
    let mut k = 0;
    for se in &qs {
        if se.kind == "points" {
            dots(&mut s, &fr, se.rows.iter().map(|r| (r[0], r[1])), "#333333");
        } else {
            // the masked band is left out of the drawn curve
            let mut run = Vec::new();
            for r in &se.rows {
                if r[2] == 0.0 {
                    run.push((r[0], r[1]));
                } else if !run.is_empty() {
                    polyline(&mut s, &fr, run.drain(..), palette[k % palette.len()]);
                }
            }
            polyline(&mut s, &fr, run.into_iter(), palette[k % palette.len()]);
            k += 1;
        }
    }
    axes(&mut s, &fr, "B (T)", "Q", |y| format!("{y:.0}"));
    s.push_str("</svg>\n");
    s
}
