//! Deterministic CSV and JSON emission. Floats are written with Rust's
//! shortest round-trip formatting, so identical inputs always produce
//! identical bytes; no timestamps appear anywhere.

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};

/// Schema version stamped into every JSON document.
pub const SCHEMA_VERSION: u32 = 1;

/// Canonical float formatting shared by all writers.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        // CSV-friendly placeholders; JSON paths must avoid non-finite values
        if v.is_nan() { "nan".into() } else if v > 0.0 { "inf".into() } else { "-inf".into() }
    }
}

/// A CSV table under construction.
pub struct Csv {
    buf: String,
    columns: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut buf = String::new();
        buf.push_str(&header.join(","));
        buf.push('\n');
        Self { buf, columns: header.len() }
    }

    pub fn row(&mut self, fields: &[String]) {
        debug_assert_eq!(fields.len(), self.columns);
        let _ = writeln!(self.buf, "{}", fields.join(","));
    }

    pub fn row_f64(&mut self, fields: &[f64]) {
        let rendered: Vec<String> = fields.iter().map(|&v| fmt_f64(v)).collect();
        self.row(&rendered);
    }

    pub fn into_string(self) -> String {
        self.buf
    }
}

/// Long-format region table: one row per cell.
pub fn region_csv(map: &crate::stability::RegionMap) -> String {
    let mut csv = Csv::new(&["mu", "q", "sigma", "verdict"]);
    for column in &map.cells {
        for cell in column {
            match &cell.outcome {
                Ok(v) => csv.row(&[
                    fmt_f64(cell.mu),
                    fmt_f64(cell.q),
                    fmt_f64(v.sigma),
                    match v.verdict {
                        crate::stability::Verdict::Stable => "stable".into(),
                        crate::stability::Verdict::Unstable => "unstable".into(),
                        crate::stability::Verdict::Marginal => "marginal".into(),
                    },
                ]),
                Err(_) => csv.row(&[fmt_f64(cell.mu), fmt_f64(cell.q), "nan".into(), "failed".into()]),
            }
        }
    }
    csv.into_string()
}

/// Region summary document: thresholds context is the caller's business, this
/// carries the sweep parameters, washout curve and transition boundary.
pub fn region_json(map: &crate::stability::RegionMap) -> Result<Value> {
    #[derive(Serialize)]
    struct Summary<'a> {
        nu: f64,
        b: f64,
        gamma: f64,
        mu_samples: &'a [f64],
        q_fractions: &'a [f64],
        qstar_curve: &'a [f64],
        boundary: &'a [Option<f64>],
        failures: usize,
    }
    json_document(
        "region",
        &Summary {
            nu: map.nu,
            b: map.b,
            gamma: map.gamma,
            mu_samples: &map.mu_samples,
            q_fractions: &map.q_fractions,
            qstar_curve: &map.qstar_curve,
            boundary: &map.boundary,
            failures: map.failures,
        },
    )
}

/// Wrap a payload into a versioned JSON document: {"schema": 1, "kind": ...,
/// "payload": ...}.
pub fn json_document<T: Serialize>(kind: &str, payload: &T) -> Result<Value> {
    let payload = serde_json::to_value(payload).map_err(|e| Error::InvalidParameter {
        module: "report",
        message: format!("serialization failed: {e}"),
    })?;
    Ok(json!({
        "schema": SCHEMA_VERSION,
        "kind": kind,
        "payload": payload,
    }))
}

/// Pretty-printed JSON bytes with a trailing newline.
pub fn json_bytes(value: &Value) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("JSON value is always serializable");
    out.push(b'\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_via_shortest_form() {
        for v in [0.1, 1.0 / 3.0, 1.875, 1e-10, 123456.789] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert_eq!(fmt_f64(f64::NAN), "nan");
    }

    #[test]
    fn csv_shape() {
        let mut csv = Csv::new(&["x", "value"]);
        csv.row_f64(&[0.5, 1.25]);
        assert_eq!(csv.into_string(), "x,value\n0.5,1.25\n");
    }

    #[test]
    fn json_documents_are_versioned_and_stable() {
        #[derive(Serialize)]
        struct Payload {
            a: f64,
            b: Vec<u32>,
        }
        let doc = json_document("test", &Payload { a: 1.5, b: vec![1, 2] }).unwrap();
        let once = json_bytes(&doc);
        let twice = json_bytes(&doc);
        assert_eq!(once, twice);
        assert_eq!(doc["schema"], 1);
        assert_eq!(doc["kind"], "test");
    }
}
