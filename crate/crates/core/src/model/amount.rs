use std::fmt;

use serde::{Deserialize, Serialize};

use super::fixed::Fixed;
use super::ModelError;

/// Denomination of a size or open-interest figure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Unit {
    Usd,
    BaseCoin,
}

impl Unit {
    pub fn as_str(self) -> &'static str {
        match self {
            Unit::Usd => "USD",
            Unit::BaseCoin => "BASE_COIN",
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Unit {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "USD" => Ok(Unit::Usd),
            "BASE_COIN" => Ok(Unit::BaseCoin),
            other => Err(ModelError::Parse(format!("unknown unit {other:?}"))),
        }
    }
}

/// A non-negative monetary quantity tagged with its unit.
///
/// Signed differences are computed with [`Amount::abs_diff`] or
/// [`Amount::floor_sub`]; a negative value can never be stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "AmountRepr", into = "AmountRepr")]
pub struct Amount {
    value: Fixed,
    unit: Unit,
}

#[derive(Serialize, Deserialize)]
struct AmountRepr {
    value: Fixed,
    unit: Unit,
}

impl TryFrom<AmountRepr> for Amount {
    type Error = ModelError;
    fn try_from(r: AmountRepr) -> Result<Self, Self::Error> {
        Amount::new(r.value, r.unit)
    }
}

impl From<Amount> for AmountRepr {
    fn from(a: Amount) -> Self {
        AmountRepr { value: a.value, unit: a.unit }
    }
}

impl Amount {
    pub fn new(value: Fixed, unit: Unit) -> Result<Self, ModelError> {
        if value.is_negative() {
            return Err(ModelError::NegativeAmount(value));
        }
        Ok(Amount { value, unit })
    }

    pub const fn zero(unit: Unit) -> Self {
        Amount { value: Fixed::ZERO, unit }
    }

    pub fn usd(value: Fixed) -> Result<Self, ModelError> {
        Amount::new(value, Unit::Usd)
    }

    pub fn coin(value: Fixed) -> Result<Self, ModelError> {
        Amount::new(value, Unit::BaseCoin)
    }

    /// Parses a decimal literal strictly (at most eight fractional digits).
    pub fn parse(s: &str, unit: Unit) -> Result<Self, ModelError> {
        let v: Fixed = s.parse().map_err(|e| ModelError::Parse(format!("{e}")))?;
        Amount::new(v, unit)
    }

    pub const fn value(self) -> Fixed {
        self.value
    }

    pub const fn unit(self) -> Unit {
        self.unit
    }

    pub fn is_zero(self) -> bool {
        self.value.is_zero()
    }

    fn same_unit(self, other: Amount) -> Result<(), ModelError> {
        if self.unit != other.unit {
            return Err(ModelError::UnitMismatch { left: self.unit, right: other.unit });
        }
        Ok(())
    }

    pub fn checked_add(self, other: Amount) -> Result<Amount, ModelError> {
        self.same_unit(other)?;
        let value = self.value.checked_add(other.value).ok_or(ModelError::Overflow)?;
        Ok(Amount { value, unit: self.unit })
    }

    /// `self - other`; errors when the result would be negative.
    pub fn checked_sub(self, other: Amount) -> Result<Amount, ModelError> {
        self.same_unit(other)?;
        let value = self.value.checked_sub(other.value).ok_or(ModelError::Overflow)?;
        Amount::new(value, self.unit)
    }

    /// `max(self - other, 0)`.
    pub fn floor_sub(self, other: Amount) -> Result<Amount, ModelError> {
        self.same_unit(other)?;
        Ok(Amount { value: self.value.floor_sub(other.value), unit: self.unit })
    }

    /// `|self - other|`.
    pub fn abs_diff(self, other: Amount) -> Result<Amount, ModelError> {
        self.same_unit(other)?;
        let d = self.value.checked_sub(other.value).ok_or(ModelError::Overflow)?;
        Ok(Amount { value: d.abs(), unit: self.unit })
    }

    pub fn max(self, other: Amount) -> Result<Amount, ModelError> {
        self.same_unit(other)?;
        Ok(if other.value > self.value { other } else { self })
    }

    /// Exact sum of same-unit amounts; an empty iterator yields zero.
    pub fn sum<I: IntoIterator<Item = Amount>>(unit: Unit, items: I) -> Result<Amount, ModelError> {
        items.into_iter().try_fold(Amount::zero(unit), |acc, a| acc.checked_add(a))
    }
}

impl PartialOrd for Amount {
    /// Amounts of different units are incomparable.
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        if self.unit != other.unit {
            return None;
        }
        Some(self.value.cmp(&other.value))
    }
}

impl fmt::Display for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.value, self.unit)
    }
}

/// Strictly positive price in quote units per base unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "Fixed", into = "Fixed")]
pub struct Price(Fixed);

impl Price {
    pub fn new(value: Fixed) -> Result<Self, ModelError> {
        if !value.is_positive() {
            return Err(ModelError::NonPositivePrice(value));
        }
        Ok(Price(value))
    }

    pub fn parse(s: &str) -> Result<Self, ModelError> {
        let v: Fixed = s.parse().map_err(|e| ModelError::Parse(format!("{e}")))?;
        Price::new(v)
    }

    pub const fn value(self) -> Fixed {
        self.0
    }
}

impl TryFrom<Fixed> for Price {
    type Error = ModelError;
    fn try_from(v: Fixed) -> Result<Self, Self::Error> {
        Price::new(v)
    }
}

impl From<Price> for Fixed {
    fn from(p: Price) -> Fixed {
        p.0
    }
}

impl fmt::Display for Price {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Converts between base-coin and USD denominations at `avg_price`.
///
/// Base coin to USD multiplies, USD to base coin divides; the result is
/// rounded half-to-even to eight fractional digits.
pub fn convert(amount: Amount, avg_price: Price, target: Unit) -> Result<Amount, ModelError> {
    if amount.unit == target {
        return Err(ModelError::SameUnitConversion(target));
    }
    let value = match target {
        Unit::Usd => amount.value.checked_mul(avg_price.value()),
        Unit::BaseCoin => amount.value.checked_div(avg_price.value()),
    }
    .ok_or(ModelError::Overflow)?;
    Amount::new(value, target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn coin(s: &str) -> Amount {
        Amount::parse(s, Unit::BaseCoin).unwrap()
    }

    fn usd(s: &str) -> Amount {
        Amount::parse(s, Unit::Usd).unwrap()
    }

    #[test]
    fn table_row_conversions() {
        let p = Price::parse("20625").unwrap();
        assert_eq!(convert(coin("2213583"), p, Unit::Usd).unwrap(), usd("45655149375"));
        assert_eq!(convert(coin("25895"), p, Unit::Usd).unwrap(), usd("534084375"));
        let p2 = Price::parse("28250").unwrap();
        assert_eq!(convert(coin("0"), p2, Unit::Usd).unwrap(), usd("0"));
    }

    #[test]
    fn usd_to_coin_divides_and_rounds() {
        let p = Price::parse("3").unwrap();
        assert_eq!(convert(usd("1"), p, Unit::BaseCoin).unwrap(), coin("0.33333333"));
    }

    #[test]
    fn same_unit_conversion_is_rejected() {
        let p = Price::parse("20625").unwrap();
        assert!(matches!(
            convert(usd("1"), p, Unit::Usd),
            Err(ModelError::SameUnitConversion(Unit::Usd))
        ));
    }

    #[test]
    fn mixed_unit_arithmetic_is_rejected() {
        assert!(matches!(usd("1").checked_add(coin("1")), Err(ModelError::UnitMismatch { .. })));
        assert!(usd("1").abs_diff(coin("1")).is_err());
        assert!(usd("1").partial_cmp(&coin("1")).is_none());
    }

    #[test]
    fn negative_values_are_rejected() {
        assert!(Amount::new(Fixed::from_int(-1), Unit::Usd).is_err());
        assert!(usd("1").checked_sub(usd("2")).is_err());
        assert_eq!(usd("1").floor_sub(usd("2")).unwrap(), usd("0"));
        assert_eq!(usd("100").abs_diff(usd("140")).unwrap(), usd("40"));
        assert!(Price::parse("0").is_err());
        assert!(Price::parse("-5").is_err());
    }

    #[test]
    fn serde_rejects_negative() {
        let bad = r#"{"value":"-1","unit":"USD"}"#;
        assert!(serde_json::from_str::<Amount>(bad).is_err());
        let ok: Amount = serde_json::from_str(r#"{"value":"1.5","unit":"BASE_COIN"}"#).unwrap();
        assert_eq!(ok, coin("1.5"));
    }

    proptest! {
        #[test]
        fn conversion_round_trip_within_one_unit(raw in 0i128..10_000_000_000_000_000_000i128, price_raw in 100_000_000i128..10_000_000_000_000i128) {
            let a = Amount::new(Fixed::from_raw(raw), Unit::BaseCoin).unwrap();
            let p = Price::new(Fixed::from_raw(price_raw)).unwrap();
            let back = convert(convert(a, p, Unit::Usd).unwrap(), p, Unit::BaseCoin).unwrap();
            prop_assert!((back.value().raw() - raw).abs() <= 1);
        }
    }
}
