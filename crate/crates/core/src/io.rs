//! JSON formats for moment vectors and explicit observables.
//!
//! Moment files are arrays whose entries are rationals as strings (`"1/3"`,
//! `"-2"`, `"0.25"`) or plain JSON numbers. Observable files hold a dense
//! complex matrix as rows of `[re, im]` pairs.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::freeprob::MomentSequence;
use crate::observable::ObservableSpec;
use crate::scalar::{format_rational, parse_rational, Rational};

/// Parse one moment entry; JSON numbers are read through their decimal text so
/// that `0.25` becomes exactly `1/4`.
fn entry_to_rational(v: &Value) -> Result<Rational> {
    let text = match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        other => return Err(Error::Parse(format!("moment entry must be a string or number, got {other}"))),
    };
    parse_rational(&text).ok_or_else(|| Error::Parse(format!("cannot read {text:?} as a rational")))
}

pub fn parse_moments(json: &str) -> Result<MomentSequence<Rational>> {
    let v: Value = serde_json::from_str(json)?;
    let arr = match &v {
        Value::Array(a) => a,
        Value::Object(o) => o
            .get("moments")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Parse("expected an array or an object with a \"moments\" array".into()))?,
        _ => return Err(Error::Parse("expected an array of moments".into())),
    };
    if arr.is_empty() {
        return Err(Error::Parse("moment array is empty".into()));
    }
    Ok(MomentSequence::new(arr.iter().map(entry_to_rational).collect::<Result<_>>()?))
}

pub fn read_moments(path: &std::path::Path) -> Result<MomentSequence<Rational>> {
    parse_moments(&std::fs::read_to_string(path)?)
}

pub fn moments_to_json(m: &MomentSequence<Rational>) -> String {
    let v: Vec<Value> = m.moments.iter().map(|r| Value::String(format_rational(r))).collect();
    Value::Array(v).to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableFile {
    #[serde(default = "default_site_dim")]
    pub site_dim: usize,
    #[serde(default)]
    pub first_site: usize,
    pub num_sites: usize,
    pub matrix: Vec<Vec<[f64; 2]>>,
}

fn default_site_dim() -> usize {
    2
}

impl ObservableFile {
    pub fn to_spec(&self) -> Result<ObservableSpec> {
        let n = self.matrix.len();
        if self.matrix.iter().any(|row| row.len() != n) {
            return Err(Error::Parse("observable matrix must be square".into()));
        }
        let m = DMatrix::from_fn(n, n, |i, j| {
            let [re, im] = self.matrix[i][j];
            Complex64::new(re, im)
        });
        ObservableSpec::new(m, self.site_dim, self.first_site, self.num_sites)
    }

    pub fn from_spec(spec: &ObservableSpec) -> Self {
        let n = spec.matrix.nrows();
        ObservableFile {
            site_dim: spec.site_dim,
            first_site: spec.first_site,
            num_sites: spec.num_sites,
            matrix: (0..n)
                .map(|i| (0..n).map(|j| [spec.matrix[(i, j)].re, spec.matrix[(i, j)].im]).collect())
                .collect(),
        }
    }
}

pub fn parse_observable(json: &str) -> Result<ObservableSpec> {
    let file: ObservableFile = serde_json::from_str(json)?;
    file.to_spec()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat;

    #[test]
    fn mixed_entries() {
        let m = parse_moments(r#"["1/3", 0.25, -2, "0.5"]"#).unwrap();
        assert_eq!(m.moments, vec![rat(1, 3), rat(1, 4), rat(-2, 1), rat(1, 2)]);
        assert_eq!(parse_moments(&moments_to_json(&m)).unwrap(), m);
    }

    #[test]
    fn rejects_bad_entries() {
        assert!(parse_moments("[true]").is_err());
        assert!(parse_moments("[\"1/0\"]").is_err());
        assert!(parse_moments("[]").is_err());
    }

    #[test]
    fn observable_round_trip() {
        let json = r#"{"num_sites":1,"matrix":[[[1,0],[0,0]],[[0,0],[-1,0]]]}"#;
        let spec = parse_observable(json).unwrap();
        assert!(spec.traceless);
        assert_eq!(ObservableFile::from_spec(&spec).to_spec().unwrap(), spec);
    }
}
