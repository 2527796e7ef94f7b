//! SweepFileV1: a self-describing text format for field sweeps.
//!
//! ```text
//! # spinres-sweep v1
//! # n_b 131
//! # n_f 2001
//! # meta.ifbw_hz 50
//! # columns B_T f_Hz re im
//! 4.48e-1 1.257845e10 1.2e-3 -4.5e-4
//! ...
//! ```
//!
//! Rows run over f fastest, B slowest. Values are written in shortest
//! round-trip exponent form so save → load is bit exact. The alternative
//! column set `B_T f_Hz db deg` (magnitude in dB, phase in degrees) is
//! accepted on load and converted to linear Re/Im. Metadata values are
//! single-line strings.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;

use super::atomic_write;
use crate::error::{Error, Result};
use crate::simulate::FieldSweep;

pub const MAGIC: &str = "spinres-sweep v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Columns {
    ReIm,
    DbDeg,
}

/// Serializes a sweep to the text format.
pub fn format_sweep(sweep: &FieldSweep) -> Result<String> {
    sweep.validate()?;
    let mut s = String::with_capacity(sweep.s21.len() * 64 + 256);
    let _ = writeln!(s, "# {MAGIC}");
    let _ = writeln!(s, "# n_b {}", sweep.n_b());
    let _ = writeln!(s, "# n_f {}", sweep.n_f());
    for (k, v) in &sweep.meta {
        if k.contains(char::is_whitespace) || v.contains('\n') {
            return Err(Error::domain(format!("metadata entry {k:?} not representable")));
        }
        let _ = writeln!(s, "# meta.{k} {v}");
    }
    let _ = writeln!(s, "# columns B_T f_Hz re im");
    for (i, &b) in sweep.b_axis.iter().enumerate() {
        for (z, &f) in sweep.row(i).iter().zip(&sweep.f_axis) {
            let _ = writeln!(s, "{b:e} {f:e} {:e} {:e}", z.re, z.im);
        }
    }
    Ok(s)
}

pub fn save_sweep(sweep: &FieldSweep, path: &Path) -> Result<()> {
    atomic_write(path, format_sweep(sweep)?.as_bytes())
}

pub fn load_sweep(path: &Path) -> Result<FieldSweep> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_sweep(&text, &path.display().to_string())
}

/// Linear complex value from dB magnitude and degree phase.
pub fn from_db_deg(db: f64, deg: f64) -> Complex64 {
    Complex64::from_polar(10f64.powf(db / 20.0), deg.to_radians())
}

/// (dB magnitude, degree phase) of a complex value.
pub fn to_db_deg(z: Complex64) -> (f64, f64) {
    (20.0 * z.norm().log10(), z.arg().to_degrees())
}

pub fn parse_sweep(text: &str, origin: &str) -> Result<FieldSweep> {
    let err = |line: usize, msg: String| Error::Parse {
        path: origin.to_string(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, l)) if l.trim() == format!("# {MAGIC}") => {}
        Some((n, l)) => return Err(err(n, format!("expected '# {MAGIC}', found {l:?}"))),
        None => return Err(err(1, "empty file".into())),
    }
    let mut n_b: Option<usize> = None;
    let mut n_f: Option<usize> = None;
    let mut meta = BTreeMap::new();
    let mut columns: Option<Columns> = None;
    let mut data_start = 0;
    for (n, l) in lines.by_ref() {
        let Some(rest) = l.strip_prefix('#') else {
            return Err(err(n, "data before '# columns' header".into()));
        };
        let rest = rest.trim();
        let (key, val) = rest.split_once(' ').unwrap_or((rest, ""));
        let val = val.trim();
        match key {
            "n_b" | "n_f" => {
                let v: usize = val
                    .parse()
                    .map_err(|_| err(n, format!("{key}: not a count: {val:?}")))?;
                if key == "n_b" {
                    n_b = Some(v);
                } else {
                    n_f = Some(v);
                }
            }
            "columns" => {
                let cols: Vec<&str> = val.split_whitespace().collect();
                columns = Some(match cols.as_slice() {
                    ["B_T", "f_Hz", "re", "im"] => Columns::ReIm,
                    ["B_T", "f_Hz", "db", "deg"] => Columns::DbDeg,
                    _ => return Err(err(n, format!("unsupported columns {val:?}"))),
                });
                data_start = n;
                break;
            }
            k if k.starts_with("meta.") && k.len() > 5 => {
                meta.insert(k[5..].to_string(), val.to_string());
            }
            _ => return Err(err(n, format!("unknown header key {key:?}"))),
        }
    }
    let columns = columns.ok_or_else(|| err(data_start.max(1), "missing '# columns' header".into()))?;
    let n_b = n_b.ok_or_else(|| err(1, "missing n_b header".into()))?;
    let n_f = n_f.ok_or_else(|| err(1, "missing n_f header".into()))?;
    if n_b < 1 || n_f < 1 {
        return Err(err(1, "axis lengths must be positive".into()));
    }
    let expected = n_b * n_f;
    let mut b_axis = Vec::with_capacity(n_b);
    let mut f_axis = Vec::with_capacity(n_f);
    let mut s21 = Vec::with_capacity(expected);
    let mut count = 0usize;
    let mut last_line = data_start;
    for (n, l) in lines {
        last_line = n;
        if l.trim().is_empty() {
            continue;
        }
        if count >= expected {
            return Err(err(n, format!("expected {expected} data rows, found more")));
        }
        let mut it = l.split_whitespace();
        let mut field = |name: &str| -> Result<f64> {
            let tok = it
                .next()
                .ok_or_else(|| err(n, format!("missing field {name}")))?;
            let v: f64 = tok
                .parse()
                .map_err(|_| err(n, format!("field {name}: not a number: {tok:?}")))?;
            if !v.is_finite() {
                return Err(err(n, format!("field {name}: non-finite value")));
            }
            Ok(v)
        };
        let b = field("B")?;
        let f = field("f")?;
        let u = field("c3")?;
        let v = field("c4")?;
        if it.next().is_some() {
            return Err(err(n, "more than four fields".into()));
        }
        let (ib, jf) = (count / n_f, count % n_f);
        if jf == 0 {
            if let Some(&prev) = b_axis.last() {
                if !(b > prev) {
                    return Err(err(n, format!("B axis not increasing at {b}")));
                }
            }
            b_axis.push(b);
        } else if b != b_axis[ib] {
            return Err(err(n, format!("B changed inside a slice: {b} vs {}", b_axis[ib])));
        }
        if ib == 0 {
            if let Some(&prev) = f_axis.last() {
                if !(f > prev) {
                    return Err(err(n, format!("f axis not increasing at {f}")));
                }
            }
            f_axis.push(f);
        } else if f != f_axis[jf] {
            return Err(err(n, format!("frequency grid differs from first slice: {f}")));
        }
        let z = match columns {
            Columns::ReIm => Complex64::new(u, v),
            Columns::DbDeg => from_db_deg(u, v),
        };
        s21.push(z);
        count += 1;
    }
    if count != expected {
        return Err(err(
            last_line,
            format!("expected {expected} data rows ({n_b}×{n_f}), found {count}"),
        ));
    }
    FieldSweep::new(b_axis, f_axis, s21, meta).map_err(|e| err(last_line, e.to_string()))
}
