//! Peak traces as tab-separated text, one record per line.
//!
//! Columns: B_T f0_Hz delta_f_Hz Q s_max A1 A2 A3 sigma_f0_Hz rank flag.
//! Flagged records carry `nan` numbers and the reason in the last column;
//! usable records have `-` there.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::fit::{PeakRecord, PeakTrace};

pub const HEADER: &str = "B_T\tf0_Hz\tdelta_f_Hz\tQ\ts_max\tA1\tA2\tA3\tsigma_f0_Hz\trank\tflag";

pub fn format_trace(trace: &PeakTrace) -> String {
    let mut s = String::with_capacity(trace.records.len() * 160 + 128);
    s.push_str(HEADER);
    s.push('\n');
    let num = |x: f64| if x.is_finite() { format!("{x:e}") } else { "nan".to_string() };
    for r in &trace.records {
        let flag = r.flag.as_deref().unwrap_or("-").replace(['\t', '\n'], " ");
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            num(r.b),
            num(r.f0),
            num(r.delta_f),
            num(r.q),
            num(r.s_max),
            num(r.background[0]),
            num(r.background[1]),
            num(r.background[2]),
            num(r.sigma_f0),
            r.rank,
            flag
        );
    }
    s
}

pub fn parse_trace(text: &str, origin: &str) -> Result<PeakTrace> {
    let err = |line: usize, msg: String| Error::Parse {
        path: origin.to_string(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == HEADER => {}
        _ => return Err(err(1, "missing peak-trace header".into())),
    }
    let mut out = Vec::new();
    for (i, l) in lines {
        let n = i + 1;
        if l.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = l.split('\t').collect();
        if cols.len() != 11 {
            return Err(err(n, format!("expected 11 columns, found {}", cols.len())));
        }
        let mut v = [0.0; 9];
        for (k, c) in cols[..9].iter().enumerate() {
            v[k] = c
                .parse()
                .map_err(|_| err(n, format!("column {}: not a number: {c:?}", k + 1)))?;
        }
        let rank = cols[9]
            .parse()
            .map_err(|_| err(n, format!("rank: not an integer: {:?}", cols[9])))?;
        out.push(PeakRecord {
            b: v[0],
            f0: v[1],
            delta_f: v[2],
            q: v[3],
            s_max: v[4],
            background: [v[5], v[6], v[7]],
            sigma_f0: v[8],
            rank,
            flag: (cols[10] != "-").then(|| cols[10].to_string()),
        });
    }
    PeakTrace::new(out).map_err(|e| err(0, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_keeps_flags_and_values() {
        let ok = PeakRecord {
            b: 0.45,
            f0: 12.6e9,
            delta_f: 0.3e6,
            q: 12.6e9 / 0.3e6,
            s_max: 0.4,
            background: [1e-3, -2e-12, 3e-13],
            sigma_f0: 1.5e3,
            rank: 0,
            flag: None,
        };
        let bad = PeakRecord {
            b: 0.46,
            f0: f64::NAN,
            delta_f: f64::NAN,
            q: f64::NAN,
            s_max: f64::NAN,
            background: [f64::NAN; 3],
            sigma_f0: f64::NAN,
            rank: 0,
            flag: Some("no discernible peak".into()),
        };
        let t = PeakTrace::new(vec![ok.clone(), bad]).unwrap();
        let text = format_trace(&t);
        let back = parse_trace(&text, "mem").unwrap();
        assert_eq!(back.records[0], ok);
        assert_eq!(back.records[1].flag.as_deref(), Some("no discernible peak"));
        assert!(back.records[1].f0.is_nan());
        assert_eq!(format_trace(&back), text);
    }

    #[test]
    fn wrong_column_count_names_line() {
        let text = format!("{HEADER}\n1\t2\n");
        assert!(matches!(parse_trace(&text, "m"), Err(Error::Parse { line: 2, .. })));
    }
}
