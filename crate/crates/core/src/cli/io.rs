use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use num_complex::Complex64;
use serde::Deserialize;
use serde_json::{json, Map, Value};

use crate::lti::{fmt_f64, LtiSystem};
use crate::nonlinear::PolynomialField;
use crate::numkernel::{Matrix, ToleranceConfig, Vector};
use crate::{ControlError, Result};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    pub name: String,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "C", default)]
    pub c: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub metadata: Option<Map<String, Value>>,
}

impl SystemFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = read(path)?;
        serde_json::from_str(&text)
            .map_err(|e| ControlError::InvalidInput(format!("{}: {e}", path.display())))
    }

    pub fn system(&self) -> Result<LtiSystem> {
        let a = matrix_from_rows(&self.a, "A", None)?;
        let b = matrix_from_rows(&self.b, "B", Some(a.nrows()))?;
        let c = match &self.c {
            Some(rows) => Some(matrix_from_rows(rows, "C", None)?),
            None => None,
        };
        LtiSystem::new(a, b, c)
    }
}

pub fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| ControlError::InvalidInput(format!("cannot read {}: {e}", path.display())))
}

/// Rectangular row-major rows; `rows_hint` fixes the row count of a matrix
/// with no columns (`[[], []]`).
pub fn matrix_from_rows(rows: &[Vec<f64>], what: &str, rows_hint: Option<usize>) -> Result<Matrix> {
    let r = rows.len();
    if let Some(expected) = rows_hint {
        if r != expected {
            return Err(ControlError::Dimension(format!("{what} has {r} rows, expected {expected}")));
        }
    }
    let c = rows.first().map_or(0, |row| row.len());
    if rows.iter().any(|row| row.len() != c) {
        return Err(ControlError::InvalidInput(format!("{what} is not rectangular")));
    }
    Ok(Matrix::from_fn(r, c, |i, j| rows[i][j]))
}

/// Tolerance overrides plus user-defined polynomial vector fields.
#[derive(Debug, Clone, Default)]
pub struct CliConfig {
    pub tolerances: ToleranceConfig,
    pub fields: BTreeMap<String, PolynomialField>,
}

impl CliConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = read(path)?;
        let bad = |e: serde_json::Error| ControlError::InvalidInput(format!("{}: {e}", path.display()));
        let mut root: Map<String, Value> = serde_json::from_str(&text).map_err(bad)?;
        let fields = match root.remove("fields") {
            Some(v) => serde_json::from_value(v).map_err(bad)?,
            None => BTreeMap::new(),
        };
        let tolerances: ToleranceConfig = serde_json::from_value(Value::Object(root)).map_err(bad)?;
        tolerances.validate()?;
        Ok(Self { tolerances, fields })
    }
}

pub fn parse_vector(text: &str, what: &str) -> Result<Vector> {
    let vals = parse_list(text, what)?;
    Ok(Vector::from_vec(vals))
}

pub fn parse_list(text: &str, what: &str) -> Result<Vec<f64>> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|s| {
            let v: f64 = s
                .trim()
                .parse()
                .map_err(|_| ControlError::InvalidInput(format!("{what}: cannot parse {s:?} as a number")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(ControlError::NonFinite(what.to_string()))
            }
        })
        .collect()
}

/// Comma-separated roots, each `re` or `re:im`.
pub fn parse_roots(text: &str) -> Result<Vec<Complex64>> {
    text.split(',')
        .map(|s| {
            let mut parts = s.trim().splitn(2, ':');
            let re = parts.next().unwrap_or("");
            let im = parts.next().unwrap_or("0");
            let num = |v: &str| {
                v.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| ControlError::InvalidInput(format!("roots: cannot parse {s:?}")))
            };
            Ok(Complex64::new(num(re)?, num(im)?))
        })
        .collect()
}

pub fn matrix_json(m: &Matrix) -> Value {
    Value::Array((0..m.nrows()).map(|i| json!(m.row(i).iter().copied().collect::<Vec<f64>>())).collect())
}

pub fn vector_json(v: &Vector) -> Value {
    json!(v.iter().copied().collect::<Vec<f64>>())
}

pub fn complex_json(values: &[Complex64]) -> Value {
    Value::Array(values.iter().map(|z| json!([z.re, z.im])).collect())
}

/// Writes every float as `{:.16e}` so that output is byte-stable.
struct FixedFloats;

impl serde_json::ser::Formatter for FixedFloats {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(fmt_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

pub fn to_json_string(value: &Value) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedFloats);
    serde::Serialize::serialize(value, &mut ser).expect("serializing a JSON value into memory");
    let mut s = String::from_utf8(buf).expect("JSON is UTF-8");
    s.push('\n');
    s
}
