//! Independent oracles shared by the integration tests. Nothing here calls
//! into the reconciliation code it is used to check.

#![allow(dead_code)]

use oi_audit::model::{EventKind, Fixed, MarketEvent};
use oi_audit::simulate::TruthLedger;

/// Exhaustive search over whole-trade attributions.
///
/// A trade stamped `p` may count towards the interval `(t_k, t_k+1]` that
/// contains it, or towards any earlier interval whose closing window
/// `(t_k+1, t_k+1 + tau]` contains it. Returns `Some(true)` when some
/// assignment covers every interval's OI movement, `None` when the search
/// space exceeds `max_combinations`.
pub fn attribution_exists(
    samples: &[(i64, i128)],
    trades: &[(i64, i128)],
    tau: i64,
    max_combinations: u64,
) -> Option<bool> {
    let n = samples.len().saturating_sub(1);
    if n == 0 {
        return Some(true);
    }
    let need: Vec<i128> = samples.windows(2).map(|w| (w[1].1 - w[0].1).abs()).collect();
    let legal = |p: i64| -> Vec<usize> {
        (0..n)
            .filter(|&k| {
                let (lo, hi) = (samples[k].0, samples[k + 1].0);
                (lo < p && p <= hi) || (hi < p && p <= hi + tau)
            })
            .collect()
    };

    let mut fixed = vec![0i128; n];
    let mut open: Vec<(i128, Vec<usize>)> = Vec::new();
    let mut combos = 1u64;
    for &(ts, size) in trades {
        let options = legal(ts);
        match options.len() {
            0 => {}
            1 => fixed[options[0]] += size,
            k => {
                combos = combos.saturating_mul(k as u64);
                open.push((size, options));
            }
        }
    }
    if combos > max_combinations {
        return None;
    }

    let mut choice = vec![0usize; open.len()];
    loop {
        let mut vol = fixed.clone();
        for (c, (size, options)) in choice.iter().zip(&open) {
            vol[options[*c]] += size;
        }
        if vol.iter().zip(&need).all(|(v, m)| v >= m) {
            return Some(true);
        }
        // mixed-radix increment
        let mut i = 0;
        loop {
            if i == open.len() {
                return Some(false);
            }
            choice[i] += 1;
            if choice[i] < open[i].1.len() {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}

/// `(ts, raw size)` of every trade-like event and `(ts, raw value)` of every
/// OI sample.
pub fn split_stream(events: &[MarketEvent]) -> (Vec<(i64, i128)>, Vec<(i64, i128)>) {
    let mut samples = Vec::new();
    let mut trades = Vec::new();
    for e in events {
        match e.kind {
            EventKind::OiSample => samples.push((e.ts, e.size_or_value.value().raw())),
            k if k.is_trade_like() => trades.push((e.ts, e.size_or_value.value().raw())),
            _ => {}
        }
    }
    (samples, trades)
}

/// Total open-interest movement carried by trades the venue never published.
pub fn hidden_oi_movement(truth: &TruthLedger) -> Fixed {
    truth.steps.iter().filter(|s| s.hidden).map(|s| s.delta_oi.abs()).sum()
}

/// Published OI total variation minus the published volume stamped inside
/// the reported span, floored at zero.
pub fn published_excess(truth: &TruthLedger) -> Fixed {
    let reports = &truth.reports;
    let (Some(first), Some(last)) = (reports.first(), reports.last()) else {
        return Fixed::ZERO;
    };
    let tv: i128 = reports.windows(2).map(|w| (w[1].reported_oi.raw() - w[0].reported_oi.raw()).abs()).sum();
    let vol: i128 = truth
        .steps
        .iter()
        .filter(|s| !s.hidden)
        .map(|s| (s.published_ts.unwrap_or(s.ts), s.size.raw()))
        .filter(|&(ts, _)| first.ts < ts && ts <= last.ts)
        .map(|(_, size)| size)
        .sum();
    Fixed::from_raw((tv - vol).max(0))
}

/// Parses the published compact dollar strings: `$45.66B`, `$534.08M`,
/// `$35.8K`, `$0`, `$12,088,654,910`.
pub fn parse_compact_usd(s: &str) -> f64 {
    let s = s.trim().trim_start_matches('$').replace(',', "");
    let (num, mult) = match s.chars().last() {
        Some('B') => (&s[..s.len() - 1], 1e9),
        Some('M') => (&s[..s.len() - 1], 1e6),
        Some('K') => (&s[..s.len() - 1], 1e3),
        _ => (s.as_str(), 1.0),
    };
    num.parse::<f64>().expect("numeric dollar string") * mult
}

/// Half-width of the rounding interval implied by a compact dollar string.
pub fn compact_half_unit(s: &str) -> f64 {
    let body = s.trim().trim_start_matches('$').replace(',', "");
    let mult = match body.chars().last() {
        Some('B') => 1e9,
        Some('M') => 1e6,
        Some('K') => 1e3,
        _ => return 0.5,
    };
    // two decimals with trailing zeros trimmed
    0.005 * mult
}
