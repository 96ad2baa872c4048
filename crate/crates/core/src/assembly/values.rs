//! Reported numbers as exact decimal text.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::latex::strip_latex_markup;

static NUMBER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"([-+−]?)(\d{1,3}(?:,\d{3})+|\d+)?(?:\.(\d+))?\s*(%?)").expect("valid number regex"));
static SPREAD: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*%?\s*(?:±|\+/-|\+-)\s*(\d+(?:\.\d+)?)").expect("valid spread regex"));

/// A metric value. `text` is a plain decimal such as `0.9383` or `91.2`;
/// unit changes move its decimal point, so no rounding ever happens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub text: String,
    /// The `±σ` part, kept but not rendered.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spread: Option<String>,
    /// True when the value is in percent.
    pub percent: bool,
}

impl MetricValue {
    pub fn new(text: impl Into<String>, percent: bool) -> Self {
        Self {
            text: text.into(),
            spread: None,
            percent,
        }
    }

    pub fn value(&self) -> f64 {
        self.text.parse().expect("MetricValue text is a decimal")
    }

    /// The same quantity expressed as a ratio or as a percent.
    pub fn in_unit(&self, percent: bool) -> MetricValue {
        if percent == self.percent {
            return self.clone();
        }
        let places = if percent { 2 } else { -2 };
        MetricValue {
            text: shift_decimal(&self.text, places),
            spread: self.spread.as_deref().map(|s| shift_decimal(s, places)),
            percent,
        }
    }
}

/// Canonical decimal text: optional `-`, no redundant leading zeros, the
/// fractional digits as given.
pub fn canonical_decimal(negative: bool, int: &str, frac: &str) -> String {
    let int = int.trim_start_matches('0');
    let int = if int.is_empty() { "0" } else { int };
    let body = if frac.is_empty() {
        int.to_string()
    } else {
        format!("{int}.{frac}")
    };
    let is_zero = body.bytes().all(|b| b == b'0' || b == b'.');
    if negative && !is_zero {
        format!("-{body}")
    } else {
        body
    }
}

/// Multiplies a decimal string by 10^places, exactly.
pub fn shift_decimal(text: &str, places: i32) -> String {
    let (negative, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    let digits = format!("{int}{frac}");
    let point = int.len() as i64 + places as i64;
    let (new_int, new_frac) = if point <= 0 {
        (String::new(), format!("{}{digits}", "0".repeat((-point) as usize)))
    } else if point as usize >= digits.len() {
        (
            format!("{digits}{}", "0".repeat(point as usize - digits.len())),
            String::new(),
        )
    } else {
        (
            digits[..point as usize].to_string(),
            digits[point as usize..].to_string(),
        )
    };
    canonical_decimal(negative, &new_int, &new_frac)
}

/// Reads a digest value: a JSON number, or a string with decorations such as
/// bold markup, arrows, `%` and `±σ`. Returns `None` for placeholders.
pub fn parse_metric_value(v: &Value) -> Option<MetricValue> {
    match v {
        Value::Number(n) => {
            let f = n.as_f64()?;
            if !f.is_finite() {
                return None;
            }
            let text = n.to_string();
            let text = if text.contains(['e', 'E']) {
                format!("{f}")
            } else {
                text
            };
            parse_number_text(&text)
        }
        Value::String(s) => parse_number_text(&strip_latex_markup(s)),
        _ => None,
    }
}

/// Parses the first number in `text`, with its `%` and `±` decorations.
pub fn parse_number_text(text: &str) -> Option<MetricValue> {
    let caps = NUMBER
        .captures_iter(text)
        .find(|c| c.get(2).is_some() || c.get(3).is_some())?;
    let negative = matches!(caps.get(1).map(|m| m.as_str()), Some("-") | Some("−"));
    let int = caps.get(2).map_or("", |m| m.as_str()).replace(',', "");
    let frac = caps.get(3).map_or("", |m| m.as_str());
    let mut percent = !caps[4].is_empty();
    let rest = &text[caps.get(0).expect("whole match").end()..];
    let spread = SPREAD.captures(rest).map(|c| c[1].to_string());
    if !percent && rest.trim_start().starts_with('%') {
        percent = true;
    }
    Some(MetricValue {
        text: canonical_decimal(negative, &int, frac),
        spread,
        percent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use serde_json::json;

    #[test]
    fn decorated_strings() {
        let v = parse_metric_value(&json!("\\textbf{91.23}\\%")).unwrap();
        assert_eq!((v.text.as_str(), v.percent), ("91.23", true));
        let v = parse_metric_value(&json!("$76.57_{\\pm 11.65}$")).unwrap();
        assert_eq!((v.text.as_str(), v.spread.as_deref()), ("76.57", Some("11.65")));
        let v = parse_metric_value(&json!("12.3±0.4")).unwrap();
        assert_eq!((v.text.as_str(), v.spread.as_deref()), ("12.3", Some("0.4")));
        assert_eq!(parse_metric_value(&json!("0.9376↑")).unwrap().text, "0.9376");
        assert_eq!(parse_metric_value(&json!("−1.5")).unwrap().text, "-1.5");
        assert_eq!(parse_metric_value(&json!("1,024")).unwrap().text, "1024");
        assert!(parse_metric_value(&json!("N/A")).is_none());
        assert!(parse_metric_value(&json!("-")).is_none());
        assert!(parse_metric_value(&json!(null)).is_none());
    }

    #[test]
    fn numbers() {
        assert_eq!(parse_metric_value(&json!(0.95)).unwrap().text, "0.95");
        assert_eq!(parse_metric_value(&json!(90)).unwrap().text, "90");
        assert_eq!(parse_metric_value(&json!(1e-7)).unwrap().text, "0.0000001");
    }

    #[test]
    fn fifty_percent_is_one_half() {
        let a = parse_metric_value(&json!("50%")).unwrap().in_unit(false);
        let b = parse_metric_value(&json!(0.5)).unwrap();
        assert_eq!(a.text, "0.50");
        assert_eq!(a.value(), b.value());
    }

    #[test]
    fn shifting() {
        assert_eq!(shift_decimal("91.23", -2), "0.9123");
        assert_eq!(shift_decimal("0.9123", 2), "91.23");
        assert_eq!(shift_decimal("0.95", 2), "95");
        assert_eq!(shift_decimal("5", -2), "0.05");
        assert_eq!(shift_decimal("-7.1", -2), "-0.071");
        assert_eq!(shift_decimal("0.5", 2), "50");
    }

    proptest! {
        #[test]
        fn shift_round_trips(int in 0u32..100_000, frac in "[0-9]{0,5}", places in -4i32..4) {
            let text = canonical_decimal(false, &int.to_string(), &frac);
            let there = shift_decimal(&text, places);
            let back = shift_decimal(&there, -places);
            prop_assert_eq!(back.parse::<f64>().unwrap(), text.parse::<f64>().unwrap());
        }
    }
}
