//! Deterministic fit reports: JSON with sorted keys, or a flat TSV.
//! Floats are rounded to 9 significant digits; non-finite values become
//! null.

use std::path::Path;

use serde_json::{Map, Value};

use super::atomic_write;
use crate::error::{Error, Result};
use crate::fit::FitResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Tsv,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub config_sha256: String,
    pub seed: u64,
    pub code_version: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    root: Map<String, Value>,
}

pub fn round9(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    let r: f64 = format!("{x:.8e}").parse().expect("formatted float parses");
    serde_json::Number::from_f64(r).map(Value::Number).unwrap_or(Value::Null)
}

fn normalize(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => round9(n.as_f64().unwrap_or(f64::NAN)),
        Value::Array(a) => Value::Array(a.into_iter().map(normalize).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, normalize(v))).collect()),
        other => other,
    }
}

pub fn fit_to_value(r: &FitResult) -> Value {
    let mut params = Map::new();
    for (i, n) in r.names.iter().enumerate() {
        let mut p = Map::new();
        p.insert("value".into(), round9(r.params[i]));
        p.insert("sigma".into(), round9(r.sigma[i]));
        params.insert(n.clone(), Value::Object(p));
    }
    let cov: Vec<Value> = (0..r.covariance.nrows())
        .map(|i| {
            Value::Array(
                (0..r.covariance.ncols())
                    .map(|j| round9(r.covariance[(i, j)]))
                    .collect(),
            )
        })
        .collect();
    let mut m = Map::new();
    m.insert("params".into(), Value::Object(params));
    m.insert(
        "order".into(),
        Value::Array(r.names.iter().cloned().map(Value::String).collect()),
    );
    m.insert("covariance".into(), Value::Array(cov));
    m.insert("residual_norm".into(), round9(r.residual_norm));
    m.insert("n_points".into(), Value::from(r.n_points));
    m.insert("n_iterations".into(), Value::from(r.n_iterations));
    m.insert("converged".into(), Value::Bool(r.converged));
    m.insert(
        "flags".into(),
        Value::Array(r.flags.iter().cloned().map(Value::String).collect()),
    );
    Value::Object(m)
}

impl Report {
    pub fn new(prov: &Provenance) -> Self {
        let mut p = Map::new();
        p.insert("config_sha256".into(), Value::String(prov.config_sha256.clone()));
        p.insert("seed".into(), Value::from(prov.seed));
        p.insert("code_version".into(), Value::String(prov.code_version.clone()));
        p.insert(
            "constants".into(),
            Value::String("CODATA-2018; ge = 2.002 unless overridden".into()),
        );
        let mut root = Map::new();
        root.insert("provenance".into(), Value::Object(p));
        root.insert("fits".into(), Value::Object(Map::new()));
        root.insert("summary".into(), Value::Object(Map::new()));
        root.insert("diagnostics".into(), Value::Object(Map::new()));
        Report { root }
    }

    fn section(&mut self, name: &str) -> &mut Map<String, Value> {
        self.root
            .entry(name.to_string())
            .or_insert_with(|| Value::Object(Map::new()))
            .as_object_mut()
            .expect("report sections are objects")
    }

    pub fn add_fit(&mut self, key: &str, r: &FitResult) {
        self.section("fits").insert(key.to_string(), fit_to_value(r));
    }

    /// Summary entry with value and 1σ.
    pub fn add_summary(&mut self, key: &str, value: f64, sigma: f64) {
        let mut m = Map::new();
        m.insert("value".into(), round9(value));
        m.insert("sigma".into(), round9(sigma));
        self.section("summary").insert(key.to_string(), Value::Object(m));
    }

    pub fn add_diagnostic(&mut self, key: &str, v: Value) {
        self.section("diagnostics").insert(key.to_string(), normalize(v));
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&Value> {
        self.root.get(section)?.get(key)
    }

    /// A top-level section such as `summary` or `fits`.
    pub fn entries(&self, section: &str) -> Option<&Map<String, Value>> {
        self.root.get(section)?.as_object()
    }

    pub fn n_fits(&self) -> usize {
        self.root
            .get("fits")
            .and_then(|v| v.as_object())
            .map(|m| m.len())
            .unwrap_or(0)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&Value::Object(self.root.clone()))
            .expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: "report".into(),
            line: e.line(),
            msg: e.to_string(),
        })?;
        match normalize(v) {
            Value::Object(root) => Ok(Report { root }),
            _ => Err(Error::Parse {
                path: "report".into(),
                line: 1,
                msg: "top level is not an object".into(),
            }),
        }
    }

    /// One `key<TAB>value` line per leaf, keys joined with dots.
    pub fn to_tsv(&self) -> String {
        fn walk(prefix: &str, v: &Value, out: &mut String) {
            match v {
                Value::Object(m) => {
                    for (k, x) in m {
                        let p = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                        walk(&p, x, out);
                    }
                }
                Value::Array(a) => {
                    for (i, x) in a.iter().enumerate() {
                        walk(&format!("{prefix}.{i}"), x, out);
                    }
                }
                Value::String(s) => out.push_str(&format!("{prefix}\t{s}\n")),
                other => out.push_str(&format!("{prefix}\t{other}\n")),
            }
        }
        let mut out = String::from("key\tvalue\n");
        walk("", &Value::Object(self.root.clone()), &mut out);
        out
    }

    pub fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Json => self.to_json(),
            ReportFormat::Tsv => self.to_tsv(),
        }
    }
}

pub fn write_report(report: &Report, path: &Path, format: ReportFormat) -> Result<()> {
    atomic_write(path, report.render(format).as_bytes())
}
