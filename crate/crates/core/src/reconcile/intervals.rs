use std::sync::Arc;

use crate::model::{Amount, EpochMs, EventKind, Fixed, MarketEvent, MarketId, ModelError, Price};

use super::{AuditConfig, IntervalLedger, IntervalMode, ReconcileError};

/// `|oi_next - oi_prev|`.
pub fn mtv(oi_prev: Amount, oi_next: Amount) -> Result<Amount, ReconcileError> {
    Ok(oi_next.abs_diff(oi_prev)?)
}

/// Intervals for one market plus the context needed to judge coverage.
#[derive(Debug, Clone)]
pub struct Reconciliation {
    pub market: Arc<MarketId>,
    pub intervals: Vec<IntervalLedger>,
    /// Feed outages `(from, until]`: gap markers and stale OI spans.
    pub outages: Vec<(EpochMs, EpochMs)>,
    /// Total size of trades stamped in `(first boundary, last boundary + tau]`.
    pub span_volume: Amount,
    /// Total size of trades outside that span (never attributed).
    pub unattributed_volume: Amount,
}

impl Reconciliation {
    pub fn span(&self) -> Option<(EpochMs, EpochMs)> {
        Some((self.intervals.first()?.t_start, self.intervals.last()?.t_end))
    }

    /// Share of intervals that are valid.
    pub fn coverage(&self) -> f64 {
        if self.intervals.is_empty() {
            return 0.0;
        }
        self.intervals.iter().filter(|i| i.valid).count() as f64 / self.intervals.len() as f64
    }
}

/// Splits an ordered single-market stream into reconciliation intervals.
pub fn build_intervals(events: &[MarketEvent], cfg: &AuditConfig) -> Result<Vec<IntervalLedger>, ReconcileError> {
    reconcile(events, cfg).map(|r| r.intervals)
}

struct TradeTick {
    ts: EpochMs,
    size: Fixed,
    price: Option<Price>,
}

/// Owner of a trade before any carrying.
#[derive(Clone, Copy)]
enum Owner {
    Interval(usize),
    /// Stamped in `(last boundary, last boundary + tau]`.
    Trailing,
    Outside,
}

/// Full reconciliation of an ordered single-market stream.
pub fn reconcile(events: &[MarketEvent], cfg: &AuditConfig) -> Result<Reconciliation, ReconcileError> {
    cfg.validate()?;
    let first = events.first().ok_or(ReconcileError::NoOpenInterest)?;
    let market = first.market.clone();
    let unit = market.native_unit();

    let mut samples: Vec<(EpochMs, Fixed)> = Vec::new();
    let mut trades: Vec<TradeTick> = Vec::new();
    let mut outages: Vec<(EpochMs, EpochMs)> = Vec::new();
    let mut prev_key = (EpochMs::MIN, 0u64);
    for (index, ev) in events.iter().enumerate() {
        let key = ev.order_key();
        if key < prev_key {
            return Err(ReconcileError::NotOrdered { index });
        }
        prev_key = key;
        if !Arc::ptr_eq(&ev.market, &market) && *ev.market != *market {
            return Err(ModelError::MixedMarkets { expected: market.to_string(), found: ev.market.to_string() }.into());
        }
        if ev.size_or_value.unit() != unit {
            return Err(ModelError::UnitMismatch { left: unit, right: ev.size_or_value.unit() }.into());
        }
        match ev.kind {
            EventKind::OiSample => samples.push((ev.ts, ev.size_or_value.value())),
            EventKind::Gap { until } => outages.push((ev.ts, until)),
            k if k.is_trade_like() => trades.push(TradeTick { ts: ev.ts, size: ev.size_or_value.value(), price: ev.price }),
            _ => {}
        }
    }
    if samples.is_empty() {
        return Err(ReconcileError::NoOpenInterest);
    }
    if samples.len() < 2 {
        return Err(ReconcileError::TooFewSamples(samples.len()));
    }

    if let Some(factor) = cfg.stale_factor {
        if let Some(median) = median_spacing(&samples) {
            let limit = median.saturating_mul(factor as i64);
            outages.extend(
                samples.windows(2).filter(|w| w[1].0 - w[0].0 > limit).map(|w| (w[0].0, w[1].0)),
            );
        }
    }
    outages.sort_unstable();

    let boundaries = match cfg.interval_mode {
        IntervalMode::PerOiUpdate => samples,
        IntervalMode::Fixed(sp) => fixed_boundaries(&samples, sp),
    };
    let n = boundaries.len() - 1;
    let tau = cfg.tau_ms as EpochMs;
    let last_ts = boundaries[n].0;

    // Native ownership by a single forward sweep.
    let mut owners = Vec::with_capacity(trades.len());
    let mut native = vec![Fixed::ZERO; n + 1]; // index n = trailing bucket
    let mut j = 0usize;
    let mut span_volume = Fixed::ZERO;
    let mut outside_volume = Fixed::ZERO;
    for t in &trades {
        let owner = if t.ts <= boundaries[0].0 {
            Owner::Outside
        } else if t.ts > last_ts {
            if t.ts <= last_ts + tau {
                Owner::Trailing
            } else {
                Owner::Outside
            }
        } else {
            while boundaries[j + 1].0 < t.ts {
                j += 1;
            }
            Owner::Interval(j)
        };
        match owner {
            Owner::Interval(i) => native[i] = native[i] + t.size,
            Owner::Trailing => native[n] = native[n] + t.size,
            Owner::Outside => outside_volume = outside_volume + t.size,
        }
        if !matches!(owner, Owner::Outside) {
            span_volume = span_volume + t.size;
        }
        owners.push(owner);
    }

    // Greedy earliest-first carrying across the tau window.
    let mut remaining: Vec<Fixed> = trades.iter().map(|t| t.size).collect();
    let mut carried = vec![Fixed::ZERO; n];
    let mut mtvs = Vec::with_capacity(n);
    let mut window_start = 0usize;
    for i in 0..n {
        let end = boundaries[i + 1].0;
        let need = (boundaries[i + 1].1 - boundaries[i].1).abs();
        mtvs.push(need);
        while window_start < trades.len() && trades[window_start].ts <= end {
            window_start += 1;
        }
        let have = native[i];
        if have >= need || tau == 0 {
            continue;
        }
        let deficit = need - have;
        let mut available = Fixed::ZERO;
        let mut k = window_start;
        while k < trades.len() && trades[k].ts <= end + tau && available < deficit {
            if !matches!(owners[k], Owner::Outside) {
                available = available + remaining[k];
            }
            k += 1;
        }
        if available < deficit {
            continue;
        }
        let mut left = deficit;
        let mut k = window_start;
        while left.is_positive() {
            let owner = owners[k];
            let take = remaining[k].min(left);
            if take.is_positive() && !matches!(owner, Owner::Outside) {
                remaining[k] = remaining[k] - take;
                let bucket = match owner {
                    Owner::Interval(m) => m,
                    _ => n,
                };
                native[bucket] = native[bucket] - take;
                left = left - take;
                carried[i] = carried[i] + take;
            }
            k += 1;
        }
    }
    // Whatever trails the last observation belongs to the last interval.
    carried[n - 1] = carried[n - 1] + native[n];
    native[n] = Fixed::ZERO;

    let mut valid = vec![true; n];
    for &(from, until) in &outages {
        let first = boundaries[1..].partition_point(|b| b.0 <= from);
        for (i, v) in valid.iter_mut().enumerate().skip(first) {
            if boundaries[i].0 >= until {
                break;
            }
            *v = false;
        }
    }

    let mut last_prices = Vec::with_capacity(n);
    let mut price: Option<Price> = None;
    let mut k = 0usize;
    for b in &boundaries[1..] {
        while k < trades.len() && trades[k].ts <= b.0 {
            if trades[k].price.is_some() {
                price = trades[k].price;
            }
            k += 1;
        }
        last_prices.push(price);
    }

    let amt = |v: Fixed| Amount::new(v, unit);
    let mut intervals = Vec::with_capacity(n);
    for i in 0..n {
        let volume = native[i] + carried[i];
        intervals.push(IntervalLedger {
            t_start: boundaries[i].0,
            t_end: boundaries[i + 1].0,
            oi_start: amt(boundaries[i].1)?,
            oi_end: amt(boundaries[i + 1].1)?,
            volume: amt(volume)?,
            mtv: amt(mtvs[i])?,
            excess: amt(mtvs[i].floor_sub(volume))?,
            carried_from_next: amt(carried[i])?,
            valid: valid[i],
            last_price: last_prices[i],
        });
    }

    Ok(Reconciliation {
        market,
        intervals,
        outages,
        span_volume: amt(span_volume)?,
        unattributed_volume: amt(outside_volume)?,
    })
}

fn median_spacing(samples: &[(EpochMs, Fixed)]) -> Option<EpochMs> {
    let mut gaps: Vec<EpochMs> = samples.windows(2).map(|w| w[1].0 - w[0].0).filter(|&d| d > 0).collect();
    if gaps.is_empty() {
        return None;
    }
    let mid = gaps.len() / 2;
    Some(*gaps.select_nth_unstable(mid).1)
}

/// First sample, every aligned boundary strictly inside the sampled span,
/// last sample. OI at a boundary is the last sample at or before it.
fn fixed_boundaries(samples: &[(EpochMs, Fixed)], sp: crate::model::SubPeriod) -> Vec<(EpochMs, Fixed)> {
    let first = samples[0];
    let last = *samples.last().expect("at least two samples");
    let Some(len) = sp.length_ms() else {
        return vec![first, last];
    };
    let mut out = vec![first];
    let mut b = first.0.div_euclid(len) * len + len;
    let mut idx = 0usize;
    while b < last.0 {
        while idx + 1 < samples.len() && samples[idx + 1].0 <= b {
            idx += 1;
        }
        out.push((b, samples[idx].1));
        b += len;
    }
    if last.0 > first.0 || out.len() == 1 {
        out.push(last);
    }
    out
}
