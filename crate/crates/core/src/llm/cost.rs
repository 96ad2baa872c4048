use std::fmt;

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{ProviderProfile, UsageEntry};

/// A price per million tokens, held as an exact decimal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Price(Ratio<u128>);

impl Price {
    pub const ZERO: Price = Price(Ratio::new_raw(0, 1));

    /// Parses a plain non-negative decimal such as `2.5` or `10`.
    pub fn parse(text: &str) -> Option<Price> {
        let text = text.trim();
        let (int, frac) = text.split_once('.').unwrap_or((text, ""));
        if int.is_empty() && frac.is_empty() {
            return None;
        }
        if !int.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit()) || frac.len() > 18 {
            return None;
        }
        let digits = format!("{int}{frac}");
        let numer: u128 = if digits.is_empty() { 0 } else { digits.parse().ok()? };
        Some(Price(Ratio::new(numer, 10u128.pow(frac.len() as u32))))
    }

    pub fn as_ratio(&self) -> Ratio<u128> {
        self.0
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }
}

impl fmt::Display for Price {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_f64())
    }
}

impl Serialize for Price {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.to_f64())
    }
}

impl<'de> Deserialize<'de> for Price {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u64),
            Float(f64),
            Text(String),
        }
        // f64 Display is the shortest round-trip form, so 2.5 parses as 5/2
        let text = match Raw::deserialize(d)? {
            Raw::Int(n) => n.to_string(),
            Raw::Float(x) if x.is_finite() && x >= 0.0 => format!("{x}"),
            Raw::Float(x) => return Err(serde::de::Error::custom(format!("invalid price {x}"))),
            Raw::Text(s) => s,
        };
        Price::parse(&text).ok_or_else(|| serde::de::Error::custom(format!("invalid price {text:?}")))
    }
}

/// An exact amount of currency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Cost(Ratio<u128>);

impl Cost {
    pub fn zero() -> Cost {
        Cost(Ratio::zero())
    }

    pub fn as_ratio(&self) -> Ratio<u128> {
        self.0
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// Rounded half-up to three decimals, e.g. `2.176`.
    pub fn display_3dp(&self) -> String {
        let thousandths = (self.0 * Ratio::from_integer(1000u128) + Ratio::new(1, 2))
            .floor()
            .to_integer();
        format!("{}.{:03}", thousandths / 1000, thousandths % 1000)
    }
}

impl std::ops::Add for Cost {
    type Output = Cost;

    fn add(self, other: Cost) -> Cost {
        Cost(self.0 + other.0)
    }
}

impl fmt::Display for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display_3dp())
    }
}

/// Sum over entries of `input × price_in / 10⁶ + output × price_out / 10⁶`,
/// computed exactly.
pub fn estimate_cost(entries: &[UsageEntry], profile: &ProviderProfile) -> Cost {
    let per_token_in = profile.price_per_million_input.as_ratio() / 1_000_000u128;
    let per_token_out = profile.price_per_million_output.as_ratio() / 1_000_000u128;
    let (inp, out) = entries.iter().fold((0u128, 0u128), |(i, o), e| {
        (i + u128::from(e.input_tokens), o + u128::from(e.output_tokens))
    });
    Cost(per_token_in * inp + per_token_out * out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn entry(i: u64, o: u64) -> UsageEntry {
        UsageEntry {
            fingerprint: String::new(),
            model_name: "m".into(),
            input_tokens: i,
            output_tokens: o,
            wall_time: 0.0,
        }
    }

    fn profile(pin: &str, pout: &str) -> ProviderProfile {
        let mut p = ProviderProfile::mock("x");
        p.price_per_million_input = Price::parse(pin).unwrap();
        p.price_per_million_output = Price::parse(pout).unwrap();
        p
    }

    #[test]
    fn reference_ledger() {
        let cost = estimate_cost(&[entry(834_700, 8_900)], &profile("2.5", "10.0"));
        // 2.08675 + 0.089
        assert_eq!(cost.as_ratio(), Ratio::new(217_575, 100_000));
        assert_eq!(cost.display_3dp(), "2.176");
    }

    #[test]
    fn zero_tokens_cost_nothing() {
        assert_eq!(estimate_cost(&[], &profile("2.5", "10")), Cost::zero());
        assert_eq!(
            estimate_cost(&[entry(0, 0)], &profile("2.5", "10")).display_3dp(),
            "0.000"
        );
    }

    #[test]
    fn price_parsing() {
        assert_eq!(Price::parse("2.5").unwrap().as_ratio(), Ratio::new(5, 2));
        assert_eq!(Price::parse("10").unwrap().as_ratio(), Ratio::from_integer(10));
        assert_eq!(Price::parse(".25").unwrap().as_ratio(), Ratio::new(1, 4));
        assert!(Price::parse("-1").is_none());
        assert!(Price::parse("1e3").is_none());
        let p: Price = serde_json::from_str("0.15").unwrap();
        assert_eq!(p.as_ratio(), Ratio::new(3, 20));
        let p: Price = serde_json::from_str("\"0.6\"").unwrap();
        assert_eq!(p.as_ratio(), Ratio::new(3, 5));
    }

    #[test]
    fn half_up_display() {
        assert_eq!(Cost(Ratio::new(2_0005, 10_000)).display_3dp(), "2.001");
        assert_eq!(Cost(Ratio::new(2_0004, 10_000)).display_3dp(), "2.000");
    }

    proptest! {
        #[test]
        fn matches_cents_spreadsheet(
            rows in proptest::collection::vec((0u64..5_000_000, 0u64..500_000), 0..20),
            pin_cents in 0u64..10_000,
            pout_cents in 0u64..10_000,
        ) {
            // prices in cents per million: cost in 1e-8 currency units is an integer sum
            let pin = format!("{}.{:02}", pin_cents / 100, pin_cents % 100);
            let pout = format!("{}.{:02}", pout_cents / 100, pout_cents % 100);
            let entries: Vec<_> = rows.iter().map(|&(i, o)| entry(i, o)).collect();
            let mut units: u128 = 0;
            for (i, o) in &rows {
                units += *i as u128 * pin_cents as u128 + *o as u128 * pout_cents as u128;
            }
            let cost = estimate_cost(&entries, &profile(&pin, &pout));
            prop_assert_eq!(cost.as_ratio(), Ratio::new(units, 100_000_000));
        }
    }
}
