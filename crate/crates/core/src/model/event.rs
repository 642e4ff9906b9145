use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::amount::{Amount, Price};
use super::market::MarketId;
use super::{EpochMs, ModelError};

/// What a [`MarketEvent`] reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EventKind {
    Trade,
    BlockTrade,
    Liquidation,
    /// Open-interest level at `ts`.
    OiSample,
    /// Feed outage covering `[ts, until]`; carries no size.
    Gap { until: EpochMs },
}

impl EventKind {
    /// Trades, block trades and liquidations all count toward volume.
    pub const fn is_trade_like(self) -> bool {
        matches!(self, EventKind::Trade | EventKind::BlockTrade | EventKind::Liquidation)
    }

    pub fn tag(self) -> &'static str {
        match self {
            EventKind::Trade => "TRADE",
            EventKind::BlockTrade => "BLOCK_TRADE",
            EventKind::Liquidation => "LIQUIDATION",
            EventKind::OiSample => "OI_SAMPLE",
            EventKind::Gap { .. } => "GAP",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EventKind::Gap { until } => write!(f, "GAP(until={until})"),
            k => f.write_str(k.tag()),
        }
    }
}

/// Tag for the three trade-like kinds and `OI_SAMPLE`; gaps are not parseable
/// from a bare tag.
impl FromStr for EventKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "TRADE" => EventKind::Trade,
            "BLOCK_TRADE" => EventKind::BlockTrade,
            "LIQUIDATION" => EventKind::Liquidation,
            "OI_SAMPLE" => EventKind::OiSample,
            other => return Err(ModelError::Parse(format!("unknown event kind {other:?}"))),
        })
    }
}

/// One normalized observation from a market feed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarketEvent {
    pub market: Arc<MarketId>,
    pub ts: EpochMs,
    pub seq: u64,
    pub kind: EventKind,
    /// Trade size for trade-like kinds, open-interest level for samples,
    /// zero for gaps.
    pub size_or_value: Amount,
    pub price: Option<Price>,
}

impl MarketEvent {
    pub fn new(
        market: Arc<MarketId>,
        ts: EpochMs,
        seq: u64,
        kind: EventKind,
        size_or_value: Amount,
        price: Option<Price>,
    ) -> Result<Self, ModelError> {
        let ev = MarketEvent { market, ts, seq, kind, size_or_value, price };
        ev.validate()?;
        Ok(ev)
    }

    pub fn trade(
        market: Arc<MarketId>,
        ts: EpochMs,
        seq: u64,
        kind: EventKind,
        size: Amount,
        price: Price,
    ) -> Result<Self, ModelError> {
        if !kind.is_trade_like() {
            return Err(ModelError::InvalidEvent(format!("{kind} is not a trade kind")));
        }
        MarketEvent::new(market, ts, seq, kind, size, Some(price))
    }

    pub fn oi_sample(market: Arc<MarketId>, ts: EpochMs, seq: u64, value: Amount) -> Result<Self, ModelError> {
        MarketEvent::new(market, ts, seq, EventKind::OiSample, value, None)
    }

    pub fn gap(market: Arc<MarketId>, from: EpochMs, until: EpochMs, seq: u64) -> Result<Self, ModelError> {
        let unit = market.native_unit();
        MarketEvent::new(market, from, seq, EventKind::Gap { until }, Amount::zero(unit), None)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |why: String| Err(ModelError::InvalidEvent(format!("seq {}: {why}", self.seq)));
        if self.ts <= 0 {
            return bad(format!("timestamp {} must be positive", self.ts));
        }
        if self.size_or_value.unit() != self.market.native_unit() {
            return bad(format!(
                "{} is not in {}'s native unit {}",
                self.size_or_value,
                self.market,
                self.market.native_unit()
            ));
        }
        match self.kind {
            k if k.is_trade_like() => {
                if self.size_or_value.is_zero() {
                    return bad("trade size must be strictly positive".into());
                }
            }
            EventKind::Gap { until } => {
                if until < self.ts {
                    return bad(format!("gap ends ({until}) before it starts ({})", self.ts));
                }
                if !self.size_or_value.is_zero() {
                    return bad("gap markers carry no size".into());
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn is_trade_like(&self) -> bool {
        self.kind.is_trade_like()
    }

    /// Total-order key within one market.
    pub fn order_key(&self) -> (EpochMs, u64) {
        (self.ts, self.seq)
    }
}

/// Sorts one market's events by `(ts, seq)`.
///
/// The sort is stable, so events sharing both keys keep their input order.
pub fn order_events(mut events: Vec<MarketEvent>) -> Result<Vec<MarketEvent>, ModelError> {
    if let Some(first) = events.first() {
        let market = first.market.clone();
        if let Some(other) = events.iter().find(|e| !Arc::ptr_eq(&e.market, &market) && *e.market != *market) {
            return Err(ModelError::MixedMarkets { expected: market.to_string(), found: other.market.to_string() });
        }
    }
    events.sort_by_key(MarketEvent::order_key);
    Ok(events)
}
