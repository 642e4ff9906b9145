//! Display formatting. Computation stays exact; rounding happens here only.

use crate::model::{convert, Amount, Fixed, Price, Unit};

/// Groups an integer's digits in threes: `2213583` becomes `2,213,583`.
pub fn group_digits(v: i128) -> String {
    let digits = v.unsigned_abs().to_string();
    let mut out = String::with_capacity(digits.len() + digits.len() / 3 + 1);
    if v < 0 {
        out.push('-');
    }
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(c);
    }
    out
}

/// Fixed-point value with exactly `dp` fractional digits, half-even.
pub fn fixed_dp(v: Fixed, dp: u32) -> String {
    let r = v.round_dp(dp);
    let step = 10i128.pow(crate::model::FRAC_DIGITS - dp.min(crate::model::FRAC_DIGITS));
    let scaled = r.raw() / step;
    let unit = 10i128.pow(dp);
    let sign = if scaled < 0 { "-" } else { "" };
    let (int, frac) = (scaled.abs() / unit, scaled.abs() % unit);
    if dp == 0 {
        format!("{sign}{int}")
    } else {
        format!("{sign}{int}.{frac:0width$}", width = dp as usize)
    }
}

pub fn unit_symbol(unit: Unit) -> &'static str {
    match unit {
        Unit::Usd => "$",
        Unit::BaseCoin => "₿",
    }
}

/// Whole units with grouping, as in `₿2,213,583` or `$12,088,654,910`.
pub fn native(amount: Amount) -> String {
    format!("{}{}", unit_symbol(amount.unit()), group_digits(amount.value().round_to_int()))
}

/// Compact dollars with two decimals and trailing zeros trimmed: `$45.66B`,
/// `$2.2B`, `$534.08M`, `$35.8K`, `$0`.
pub fn compact_usd(v: Fixed) -> String {
    const STEPS: [(i128, &str); 3] = [(1_000_000_000, "B"), (1_000_000, "M"), (1_000, "K")];
    let whole = v.abs().round_to_int();
    for (scale, suffix) in STEPS {
        if whole >= scale {
            let scaled = v.checked_div_int(scale as u64).expect("scale is positive");
            let s = fixed_dp(scaled, 2);
            let s = s.trim_end_matches('0').trim_end_matches('.');
            return format!("${s}{suffix}");
        }
    }
    format!("${}", group_digits(v.round_to_int()))
}

/// The USD value of `amount`: itself for dollar amounts, converted at
/// `price` for base-coin amounts, absent without a price.
pub fn usd_value(amount: Amount, price: Option<Price>) -> Option<Fixed> {
    match amount.unit() {
        Unit::Usd => Some(amount.value()),
        Unit::BaseCoin => price.and_then(|p| convert(amount, p, Unit::Usd).ok()).map(|a| a.value()),
    }
}

/// Table-cell rendering: dollar amounts in full, coin amounts followed by
/// their compact dollar value when a price is known.
pub fn with_usd(amount: Amount, price: Option<Price>) -> String {
    match (amount.unit(), usd_value(amount, price)) {
        (Unit::BaseCoin, Some(usd)) => format!("{} ({})", native(amount), compact_usd(usd)),
        _ => native(amount),
    }
}
