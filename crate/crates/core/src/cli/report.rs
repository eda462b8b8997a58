//! JSON and text rendering of analysis results.

use std::collections::BTreeMap;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde_json::{json, Map, Number, Value};

use crate::engine::{Event, Fault, FaultKind};
use crate::model::fmt_rational;

/// Significant digits in the derived decimal rendering.
pub const DECIMAL_DIGITS: usize = 12;

fn number(v: &BigInt) -> Value {
    Value::Number(v.to_string().parse::<Number>().expect("integer literal"))
}

/// `r` rounded half away from zero to `digits` significant digits, in
/// positional notation with trailing zeros removed.
///
/// ```
/// use covprob::cli::report::decimal;
/// use num_rational::BigRational;
///
/// assert_eq!(decimal(&BigRational::new(4.into(), 5.into()), 12), "0.8");
/// assert_eq!(decimal(&BigRational::new(2.into(), 3.into()), 12), "0.666666666667");
/// ```
pub fn decimal(r: &BigRational, digits: usize) -> String {
    if r.is_zero() {
        return "0".into();
    }
    let digits = digits.max(1);
    let (a, b) = (r.numer().abs(), r.denom().clone());
    let ten = BigInt::from(10);
    let scaled = |k: i64| -> BigInt {
        let (n, d) = if k >= 0 {
            (&a * ten.pow(k as u32), b.clone())
        } else {
            (a.clone(), &b * ten.pow((-k) as u32))
        };
        let n: BigInt = n * 2 + &d;
        n.div_floor(&(d * 2))
    };
    let len = |x: &BigInt| x.to_string().len() as i64;
    // Choose k so that round(|r| * 10^k) has exactly `digits` digits.
    let mut k = digits as i64 - 1 - (len(&a) - len(&b));
    let mut s = scaled(k);
    while len(&s) < digits as i64 {
        k += 1;
        s = scaled(k);
    }
    while len(&s) > digits as i64 {
        k -= 1;
        s = scaled(k);
    }
    let mut text = s.to_string();
    let out = if k <= 0 {
        text.extend(std::iter::repeat_n('0', (-k) as usize));
        text
    } else {
        let k = k as usize;
        if text.len() <= k {
            text = format!("{}{}", "0".repeat(k - text.len() + 1), text);
        }
        let (int, frac) = text.split_at(text.len() - k);
        let frac = frac.trim_end_matches('0');
        if frac.is_empty() { int.to_string() } else { format!("{int}.{frac}") }
    };
    if r.numer().sign() == Sign::Minus { format!("-{out}") } else { out }
}

pub fn rational(r: &BigRational) -> Value {
    json!({
        "num": number(r.numer()),
        "den": number(r.denom()),
        "decimal": decimal(r, DECIMAL_DIGITS),
    })
}

/// `4/5 (0.8)`
pub fn rational_text(r: &BigRational) -> String {
    format!("{} ({})", fmt_rational(r), decimal(r, DECIMAL_DIGITS))
}

pub fn fault(f: &Fault) -> Value {
    let kind = match &f.kind {
        FaultKind::Evaluation(_) => "evaluation",
        FaultKind::ProfileContractViolation { .. } => "profile_contract_violation",
    };
    json!({
        "kind": kind,
        "site": f.site.to_string(),
        "message": f.to_string(),
        "trace": serde_json::to_value(&f.trace).unwrap_or(Value::Null),
    })
}

pub fn fault_text(f: &Fault) -> String {
    let mut out = format!("fault: {f}\n");
    if !f.trace.is_empty() {
        out.push_str("trace:\n");
        for e in &f.trace {
            out.push_str(&format!("  {}\n", event_text(e)));
        }
    }
    out
}

fn event_text(e: &Event) -> String {
    serde_json::to_string(e).unwrap_or_default()
}

/// A report with the fixed top-level key set.
pub struct Report {
    pub mode: &'static str,
    pub model: Option<String>,
    pub profile: Option<String>,
    pub result_key: &'static str,
    pub result: Value,
    pub per_service: Map<String, Value>,
    pub faults: Vec<Value>,
    pub assumptions: Vec<String>,
}

impl Report {
    pub fn new(mode: &'static str, result_key: &'static str) -> Self {
        Self {
            mode,
            model: None,
            profile: None,
            result_key,
            result: Value::Null,
            per_service: Map::new(),
            faults: Vec::new(),
            assumptions: Vec::new(),
        }
    }

    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("mode".into(), json!(self.mode));
        m.insert("model".into(), json!(self.model));
        m.insert("profile".into(), json!(self.profile));
        m.insert(self.result_key.into(), self.result.clone());
        m.insert("per_service".into(), Value::Object(self.per_service.clone()));
        m.insert("faults".into(), Value::Array(self.faults.clone()));
        m.insert("assumptions".into(), json!(self.assumptions));
        Value::Object(m)
    }
}

pub fn rational_map(masses: &BTreeMap<String, BigRational>) -> Map<String, Value> {
    masses.iter().map(|(k, v)| (k.clone(), rational(v))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn decimals() {
        assert_eq!(decimal(&q(0, 1), 12), "0");
        assert_eq!(decimal(&q(1, 1), 12), "1");
        assert_eq!(decimal(&q(-7, 2), 12), "-3.5");
        assert_eq!(decimal(&q(1, 3), 12), "0.333333333333");
        assert_eq!(decimal(&q(1, 3000), 3), "0.000333");
        assert_eq!(decimal(&q(123456, 1), 3), "123000");
        assert_eq!(decimal(&q(9999, 10000), 3), "1");
        assert_eq!(decimal(&q(589831, 1000000), 12), "0.589831");
        assert_eq!(decimal(&q(1, 7), 2), "0.14");
    }

    #[test]
    fn decimal_matches_float_formatting() {
        for (n, d) in [(1i64, 7i64), (22, 7), (-5, 9), (123457, 1000), (3, 40000)] {
            let s = decimal(&q(n, d), 6);
            let f = n as f64 / d as f64;
            assert!((s.parse::<f64>().unwrap() - f).abs() <= f.abs() * 1e-5, "{s} vs {f}");
        }
    }

    #[test]
    fn rational_object() {
        let v = rational(&q(4, 5));
        assert_eq!(v.to_string(), r#"{"num":4,"den":5,"decimal":"0.8"}"#);
    }
}
