//! Number formatting shared by the CSV and JSON emitters.
//!
//! CSV cells use 12 significant digits, JSON numbers use 17 (enough to
//! round-trip any `f64`). Both follow C's `%g` layout: fixed notation for
//! moderate exponents, scientific otherwise, trailing zeros trimmed.

use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

/// Significant digits used in CSV output.
pub const CSV_DIGITS: usize = 12;
/// Significant digits used in JSON output.
pub const JSON_DIGITS: usize = 17;

/// Formats `x` like C's `%.{digits}g`.
pub fn fmt_sig(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "NaN".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("exponent digits");
    if exp < -4 || exp >= digits as i32 {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// CSV cell with 12 significant digits.
pub fn csv_f64(x: f64) -> String {
    fmt_sig(x, CSV_DIGITS)
}

/// JSON number wrapper that serializes with 17 significant digits.
/// Non-finite values become `null`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F17(pub f64);

impl Serialize for F17 {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return serializer.serialize_none();
        }
        let raw = RawValue::from_string(fmt_sig(self.0, JSON_DIGITS)).map_err(serde::ser::Error::custom)?;
        raw.serialize(serializer)
    }
}
