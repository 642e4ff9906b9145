//! Signed fixed-point decimal with eight fractional digits.
//!
//! Values are stored as an `i128` count of 1e-8 units, so addition and
//! subtraction are exact and order-independent. Multiplication and division
//! round half-to-even back onto the 1e-8 grid.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, Neg, Sub};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Number of fractional digits carried by every [`Fixed`].
pub const FRAC_DIGITS: u32 = 8;
/// 10^FRAC_DIGITS.
pub const SCALE: i128 = 100_000_000;

#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fixed(i128);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseFixedError {
    #[error("empty decimal string")]
    Empty,
    #[error("invalid decimal literal {0:?}")]
    Invalid(String),
    #[error("decimal {0:?} has more than 8 significant fractional digits")]
    Precision(String),
    #[error("decimal {0:?} out of range")]
    Overflow(String),
}

impl Fixed {
    pub const ZERO: Fixed = Fixed(0);
    pub const ONE: Fixed = Fixed(SCALE);

    /// Builds a value from its raw count of 1e-8 units.
    pub const fn from_raw(raw: i128) -> Self {
        Fixed(raw)
    }

    pub const fn raw(self) -> i128 {
        self.0
    }

    pub const fn from_int(v: i64) -> Self {
        Fixed(v as i128 * SCALE)
    }

    pub const fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub const fn is_positive(self) -> bool {
        self.0 > 0
    }

    pub const fn is_negative(self) -> bool {
        self.0 < 0
    }

    pub const fn abs(self) -> Self {
        Fixed(self.0.abs())
    }

    pub fn checked_add(self, rhs: Fixed) -> Option<Fixed> {
        self.0.checked_add(rhs.0).map(Fixed)
    }

    pub fn checked_sub(self, rhs: Fixed) -> Option<Fixed> {
        self.0.checked_sub(rhs.0).map(Fixed)
    }

    /// `max(self - rhs, 0)`.
    pub fn floor_sub(self, rhs: Fixed) -> Fixed {
        if self > rhs {
            self - rhs
        } else {
            Fixed::ZERO
        }
    }

    /// Product rounded half-to-even to eight fractional digits.
    pub fn checked_mul(self, rhs: Fixed) -> Option<Fixed> {
        let prod = self.0.checked_mul(rhs.0)?;
        Some(Fixed(div_round_half_even(prod, SCALE)))
    }

    /// Quotient rounded half-to-even to eight fractional digits.
    pub fn checked_div(self, rhs: Fixed) -> Option<Fixed> {
        if rhs.0 == 0 {
            return None;
        }
        let num = self.0.checked_mul(SCALE)?;
        Some(Fixed(div_round_half_even(num, rhs.0)))
    }

    /// Divides by an integer count, rounding half-to-even.
    pub fn checked_div_int(self, n: u64) -> Option<Fixed> {
        if n == 0 {
            return None;
        }
        Some(Fixed(div_round_half_even(self.0, n as i128)))
    }

    pub fn checked_mul_int(self, n: u64) -> Option<Fixed> {
        self.0.checked_mul(n as i128).map(Fixed)
    }

    /// Rounds half-to-even to `dp` fractional digits (`dp <= 8`).
    pub fn round_dp(self, dp: u32) -> Fixed {
        if dp >= FRAC_DIGITS {
            return self;
        }
        let step = 10i128.pow(FRAC_DIGITS - dp);
        Fixed(div_round_half_even(self.0, step) * step)
    }

    /// Integer part after half-even rounding.
    pub fn round_to_int(self) -> i128 {
        div_round_half_even(self.0, SCALE)
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / SCALE as f64
    }

    /// Parses a decimal literal, rounding half-to-even when it carries more
    /// than eight fractional digits. Accepts an optional exponent (`1.5e-3`).
    pub fn parse_rounded(s: &str) -> Result<Fixed, ParseFixedError> {
        parse(s, true)
    }
}

/// Integer division rounding half-to-even. `den` must be non-zero.
fn div_round_half_even(num: i128, den: i128) -> i128 {
    let (num, den) = if den < 0 { (-num, -den) } else { (num, den) };
    let q = num.div_euclid(den);
    let r = num.rem_euclid(den);
    match (2 * r).cmp(&den) {
        Ordering::Less => q,
        Ordering::Greater => q + 1,
        Ordering::Equal => {
            if q % 2 == 0 {
                q
            } else {
                q + 1
            }
        }
    }
}

fn parse(input: &str, allow_rounding: bool) -> Result<Fixed, ParseFixedError> {
    let s = input.trim();
    if s.is_empty() {
        return Err(ParseFixedError::Empty);
    }
    let invalid = || ParseFixedError::Invalid(input.to_string());
    let overflow = || ParseFixedError::Overflow(input.to_string());

    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => {
            let exp: i32 = s[i + 1..].parse().map_err(|_| invalid())?;
            if !(-64..=64).contains(&exp) {
                return Err(overflow());
            }
            (&s[..i], exp)
        }
        None => (s, 0),
    };
    let (negative, body) = match mantissa.as_bytes().first() {
        Some(b'-') => (true, &mantissa[1..]),
        Some(b'+') => (false, &mantissa[1..]),
        _ => (false, mantissa),
    };
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(invalid());
    }
    if !int_part.bytes().all(|b| b.is_ascii_digit()) || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
        return Err(invalid());
    }

    // All digits as one integer with an implied decimal exponent.
    let digits: String = int_part.chars().chain(frac_part.chars()).collect();
    let digits = digits.trim_start_matches('0');
    let mut scale_exp = exp - frac_part.len() as i32 + FRAC_DIGITS as i32;
    let mut coeff: i128 = 0;
    let mut dropped: Vec<u8> = Vec::new();
    let total = digits.len() as i32;
    // Digits beyond the 1e-8 grid are collected for rounding.
    let keep = if scale_exp < 0 { (total + scale_exp).max(0) } else { total };
    for (i, b) in digits.bytes().enumerate() {
        let d = (b - b'0') as i128;
        if (i as i32) < keep {
            coeff = coeff.checked_mul(10).and_then(|c| c.checked_add(d)).ok_or_else(overflow)?;
        } else {
            dropped.push(b - b'0');
        }
    }
    if scale_exp < 0 {
        // Digits to the right of the retained ones, plus implicit zeros.
        let missing = (-scale_exp) - dropped.len() as i32;
        if missing > 0 {
            let mut padded = vec![0u8; missing as usize];
            padded.extend_from_slice(&dropped);
            dropped = padded;
        }
        scale_exp = 0;
    }
    if dropped.iter().any(|&d| d != 0) {
        if !allow_rounding {
            return Err(ParseFixedError::Precision(input.to_string()));
        }
        let first = dropped[0];
        let rest_nonzero = dropped[1..].iter().any(|&d| d != 0);
        let round_up = first > 5 || (first == 5 && (rest_nonzero || coeff % 2 == 1));
        if round_up {
            coeff = coeff.checked_add(1).ok_or_else(overflow)?;
        }
    }
    for _ in 0..scale_exp {
        coeff = coeff.checked_mul(10).ok_or_else(overflow)?;
    }
    Ok(Fixed(if negative { -coeff } else { coeff }))
}

impl FromStr for Fixed {
    type Err = ParseFixedError;

    /// Strict parse: more than eight non-zero fractional digits is an error.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s, false)
    }
}

impl fmt::Display for Fixed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let neg = self.0 < 0;
        let abs = self.0.unsigned_abs();
        let int = abs / SCALE as u128;
        let frac = abs % SCALE as u128;
        if neg {
            f.write_str("-")?;
        }
        if frac == 0 {
            write!(f, "{int}")
        } else {
            let frac = format!("{frac:08}");
            write!(f, "{int}.{}", frac.trim_end_matches('0'))
        }
    }
}

impl fmt::Debug for Fixed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Add for Fixed {
    type Output = Fixed;
    fn add(self, rhs: Fixed) -> Fixed {
        self.checked_add(rhs).expect("fixed-point overflow")
    }
}

impl Sub for Fixed {
    type Output = Fixed;
    fn sub(self, rhs: Fixed) -> Fixed {
        self.checked_sub(rhs).expect("fixed-point overflow")
    }
}

impl Neg for Fixed {
    type Output = Fixed;
    fn neg(self) -> Fixed {
        Fixed(-self.0)
    }
}

impl Sum for Fixed {
    fn sum<I: Iterator<Item = Fixed>>(iter: I) -> Fixed {
        iter.fold(Fixed::ZERO, |a, b| a + b)
    }
}

impl From<i64> for Fixed {
    fn from(v: i64) -> Self {
        Fixed::from_int(v)
    }
}

impl Serialize for Fixed {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Fixed {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Str(String),
            Int(i64),
            Num(serde_json::Number),
        }
        match Repr::deserialize(d)? {
            Repr::Str(s) => s.parse().map_err(serde::de::Error::custom),
            Repr::Int(i) => Ok(Fixed::from_int(i)),
            Repr::Num(n) => n.to_string().parse().map_err(serde::de::Error::custom),
        }
    }
}
