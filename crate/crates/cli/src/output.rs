//! CSV and JSON rendering.

use serde_json::{json, Value};
use wiretap_core::{RatePair, RegionPointSet, SymMatrix};

/// 12 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.11e}")
}

pub fn matrix_row_major(m: &SymMatrix) -> String {
    m.row_major().iter().map(|&x| num(x)).collect::<Vec<_>>().join(";")
}

/// JSON number, with non-finite values written as strings.
pub fn jnum(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x.is_nan() {
        json!("nan")
    } else if x > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

pub fn jmatrix(m: &SymMatrix) -> Value {
    let t = m.dim();
    Value::Array(
        (0..t)
            .map(|i| Value::Array((0..t).map(|j| jnum(m.matrix()[(i, j)])).collect()))
            .collect(),
    )
}

pub fn jvector(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|&x| jnum(x)).collect())
}

pub fn jrates(r: RatePair) -> Value {
    json!({ "R1_bits": jnum(r.r1), "R2_bits": jnum(r.r2) })
}

pub fn jpoints(set: &RegionPointSet) -> Value {
    Value::Array(set.points.iter().map(|p| jrates(p.rates)).collect())
}

pub struct Csv {
    out: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut out = header.join(",");
        out.push('\n');
        Csv { out }
    }

    pub fn row(&mut self, fields: &[String]) {
        self.out.push_str(&fields.join(","));
        self.out.push('\n');
    }

    pub fn finish(self) -> String {
        self.out
    }
}

pub fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json value serializes");
    s.push('\n');
    s
}
