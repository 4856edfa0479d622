//! Report assembly and JSON emission.
//!
//! JSON reports are versioned and byte-deterministic for a fixed problem
//! file and seed: numeric values are rounded to 12 significant digits before
//! serialization, non-finite values become tagged strings, map keys are
//! ordered, and wall-clock timings stay out of the JSON (the human-readable
//! rendering shows them instead).

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::{json, Value};

use crate::geometry::PolyhedralSet;
use crate::oracle::EmpiricalEstimate;
use crate::wellposedness::{Certificate, Verdict};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Round to 12 significant digits for stable cross-platform printing.
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let magnitude = x.abs().log10().floor();
    let factor = 10f64.powf(11.0 - magnitude);
    (x * factor).round() / factor
}

/// Encode a float as JSON: rounded number, or a tagged string for
/// non-finite values.
pub fn num(x: f64) -> Value {
    if x.is_nan() {
        json!("nan")
    } else if x.is_infinite() {
        json!(if x > 0.0 { "inf" } else { "-inf" })
    } else {
        json!(round_sig(x))
    }
}

pub fn vec_num(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|&x| num(x)).collect())
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    pub kind: String,
    pub effective_options: BTreeMap<String, Value>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub certificates: Vec<Value>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub estimates: Vec<Value>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub empirical: Vec<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mpec: Option<Value>,
    pub assumptions_log: Vec<String>,
    pub verdict_summary: String,
}

impl Report {
    pub fn new(command: &str, kind: &str) -> Self {
        Report {
            schema_version: REPORT_SCHEMA_VERSION,
            command: command.to_string(),
            kind: kind.to_string(),
            effective_options: BTreeMap::new(),
            certificates: Vec::new(),
            estimates: Vec::new(),
            empirical: Vec::new(),
            mpec: None,
            assumptions_log: Vec::new(),
            verdict_summary: String::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization is infallible")
    }

    /// Human-readable rendering (may include timings; not the golden form).
    pub fn to_text(&self, elapsed_ms: Option<u128>) -> String {
        let mut s = String::new();
        s.push_str(&format!("command: {} ({})\n", self.command, self.kind));
        for (k, v) in &self.effective_options {
            s.push_str(&format!("  option {k} = {v}\n"));
        }
        for c in &self.certificates {
            s.push_str(&format!(
                "certificate: property={} verdict={} bound={}\n",
                c.get("property").and_then(Value::as_str).unwrap_or("?"),
                c.get("verdict").and_then(Value::as_str).unwrap_or("?"),
                c.get("bound").map(|b| b.to_string()).unwrap_or_else(|| "-".into()),
            ));
        }
        if let Some(m) = &self.mpec {
            s.push_str(&format!(
                "stationarity residual: {} (satisfied: {})\n",
                m.get("residual").map(|v| v.to_string()).unwrap_or_default(),
                m.get("satisfied").map(|v| v.to_string()).unwrap_or_default(),
            ));
        }
        for e in &self.empirical {
            s.push_str(&format!(
                "empirical {}: value={} diverging={}\n",
                e.get("name").and_then(Value::as_str).unwrap_or("?"),
                e.get("value").map(|v| v.to_string()).unwrap_or_default(),
                e.get("diverging").map(|v| v.to_string()).unwrap_or_default(),
            ));
        }
        if !self.estimates.is_empty() {
            s.push_str(&format!("estimate slices: {}\n", self.estimates.len()));
        }
        s.push_str(&format!("verdict: {}\n", self.verdict_summary));
        for line in &self.assumptions_log {
            s.push_str(&format!("  log: {line}\n"));
        }
        if let Some(ms) = elapsed_ms {
            s.push_str(&format!("elapsed: {ms} ms\n"));
        }
        s
    }
}

pub fn certificate_json(c: &Certificate) -> Value {
    json!({
        "property": match c.property {
            crate::wellposedness::Property::LipschitzLike => "lipschitz_like",
            crate::wellposedness::Property::MetricRegularity => "metric_regularity",
        },
        "verdict": verdict_str(c.verdict),
        "bound": c.bound.map(num),
        "bound_interval": c.bound_interval.map(|(a, b)| json!([num(a), num(b)])),
        "bound_relation": c.bound_relation,
        "witness": c.witness.as_ref().map(|w| vec_num(w)),
        "assumptions_log": c.assumptions_log,
        "references": c.references,
    })
}

pub fn verdict_str(v: Verdict) -> &'static str {
    match v {
        Verdict::Certified => "certified",
        Verdict::Refuted => "refuted",
        Verdict::Inconclusive => "inconclusive",
    }
}

pub fn verdict_exit_code(v: Verdict) -> i32 {
    match v {
        Verdict::Certified => 0,
        Verdict::Refuted => 2,
        Verdict::Inconclusive => 3,
    }
}

/// Vertex/ray listing of a polyhedron for the report.
pub fn set_json(p: &PolyhedralSet) -> Value {
    let vr = p.vrep();
    json!({
        "vertices": vr.vertices.iter().map(|v| vec_num(v.as_slice())).collect::<Vec<_>>(),
        "rays": vr.rays.iter().map(|v| vec_num(v.as_slice())).collect::<Vec<_>>(),
        "lineality": vr.lineality.iter().map(|v| vec_num(v.as_slice())).collect::<Vec<_>>(),
    })
}

pub fn empirical_json(name: &str, e: &EmpiricalEstimate) -> Value {
    json!({
        "name": name,
        "value": num(e.value),
        "trend": e.trend.iter().map(|&(r, v)| json!([num(r), num(v)])).collect::<Vec<_>>(),
        "diverging": e.diverging,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_is_stable() {
        assert_eq!(round_sig(1.0 / 3.0), 0.333333333333);
        assert_eq!(round_sig(0.0), 0.0);
        assert_eq!(num(f64::INFINITY), json!("inf"));
    }

    #[test]
    fn twelve_significant_digits() {
        let x = 123456.789012345678;
        let r = round_sig(x);
        assert!((r - 123456.789012).abs() < 1e-6);
    }
}
