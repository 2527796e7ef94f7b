//! Touchstone version 1 two-port import (S parameters only).
//!
//! Option line `# <unit> S <RI|MA|DB> R <ohms>`; defaults GHz, S, MA, 50 Ω.
//! Each frequency carries nine numbers, f then N11 N21 N12 N22 as pairs,
//! and may wrap across lines. `!` starts a comment.

use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::simulate::FieldSweep;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Form {
    Ri,
    Ma,
    Db,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoPort {
    pub freq: Vec<f64>,
    /// [S11, S21, S12, S22] per frequency.
    pub s: Vec<[Complex64; 4]>,
}

impl TwoPort {
    pub fn s21(&self) -> Vec<Complex64> {
        self.s.iter().map(|m| m[1]).collect()
    }
}

fn pair(form: Form, a: f64, b: f64) -> Complex64 {
    match form {
        Form::Ri => Complex64::new(a, b),
        Form::Ma => Complex64::from_polar(a, b.to_radians()),
        Form::Db => Complex64::from_polar(10f64.powf(a / 20.0), b.to_radians()),
    }
}

pub fn parse_touchstone(text: &str, origin: &str) -> Result<TwoPort> {
    let err = |line: usize, msg: String| Error::Parse {
        path: origin.to_string(),
        line,
        msg,
    };
    let mut scale = 1e9;
    let mut form = Form::Ma;
    let mut seen_option = false;
    let mut values: Vec<(usize, f64)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        let line = raw.split('!').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') {
            return Err(err(n, format!("Touchstone v2 keyword not supported: {line}")));
        }
        if let Some(opt) = line.strip_prefix('#') {
            if seen_option {
                return Err(err(n, "second option line".into()));
            }
            seen_option = true;
            let toks: Vec<String> = opt.split_whitespace().map(|t| t.to_ascii_uppercase()).collect();
            let mut k = 0;
            while k < toks.len() {
                match toks[k].as_str() {
                    "HZ" => scale = 1.0,
                    "KHZ" => scale = 1e3,
                    "MHZ" => scale = 1e6,
                    "GHZ" => scale = 1e9,
                    "S" => {}
                    "Y" | "Z" | "H" | "G" => {
                        return Err(err(n, format!("unsupported parameter type {}", toks[k])))
                    }
                    "RI" => form = Form::Ri,
                    "MA" => form = Form::Ma,
                    "DB" => form = Form::Db,
                    "R" => {
                        k += 1;
                        let r = toks.get(k).and_then(|t| t.parse::<f64>().ok());
                        if !r.is_some_and(|r| r > 0.0) {
                            return Err(err(n, "R must be followed by a positive resistance".into()));
                        }
                    }
                    other => return Err(err(n, format!("unsupported option token {other}"))),
                }
                k += 1;
            }
            continue;
        }
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| err(n, format!("not a number: {tok:?}")))?;
            if !v.is_finite() {
                return Err(err(n, format!("non-finite value {tok:?}")));
            }
            values.push((n, v));
        }
    }
    if !values.len().is_multiple_of(9) {
        let n = values.last().map(|v| v.0).unwrap_or(1);
        return Err(err(
            n,
            format!("{} numbers is not a whole number of 2-port records (9 each)", values.len()),
        ));
    }
    let mut freq = Vec::with_capacity(values.len() / 9);
    let mut s = Vec::with_capacity(values.len() / 9);
    for rec in values.chunks(9) {
        let f = rec[0].1 * scale;
        if let Some(&prev) = freq.last() {
            if !(f > prev) {
                return Err(err(rec[0].0, format!("frequency not increasing at {f} Hz")));
            }
        }
        freq.push(f);
        let v: Vec<f64> = rec[1..].iter().map(|x| x.1).collect();
        s.push([
            pair(form, v[0], v[1]),
            pair(form, v[2], v[3]),
            pair(form, v[4], v[5]),
            pair(form, v[6], v[7]),
        ]);
    }
    if freq.is_empty() {
        return Err(err(1, "no data".into()));
    }
    Ok(TwoPort { freq, s })
}

/// One file per field value, assembled into a sweep of S21.
pub fn import_touchstone(paths: &[PathBuf], b_values: &[f64]) -> Result<FieldSweep> {
    if paths.len() != b_values.len() || paths.is_empty() {
        return Err(Error::domain(format!(
            "{} files for {} field values",
            paths.len(),
            b_values.len()
        )));
    }
    let mut f_axis: Option<Vec<f64>> = None;
    let mut s21 = Vec::new();
    for p in paths {
        let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        let tp = parse_touchstone(&text, &p.display().to_string())?;
        match &f_axis {
            None => f_axis = Some(tp.freq.clone()),
            Some(f0) => {
                let same = f0.len() == tp.freq.len()
                    && f0
                        .iter()
                        .zip(&tp.freq)
                        .all(|(a, b)| (a - b).abs() <= 1e-9 * a.abs());
                if !same {
                    return Err(Error::Parse {
                        path: p.display().to_string(),
                        line: 0,
                        msg: format!(
                            "frequency grid differs from {}",
                            paths[0].display()
                        ),
                    });
                }
            }
        }
        s21.extend(tp.s21());
    }
    let mut meta = std::collections::BTreeMap::new();
    meta.insert("source".to_string(), "touchstone".to_string());
    FieldSweep::new(b_values.to_vec(), f_axis.unwrap_or_default(), s21, meta)
}

/// Convenience for tests and tools: path list from a directory listing.
pub fn sorted_paths(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case(ext)))
        .collect();
    v.sort();
    Ok(v)
}
