//! Unit-safe domain types shared by every stage of the audit.

mod amount;
mod event;
mod fixed;
mod market;
mod period;

pub use amount::{convert, Amount, Price, Unit};
pub use event::{order_events, EventKind, MarketEvent};
pub use fixed::{Fixed, ParseFixedError, FRAC_DIGITS, SCALE};
pub use market::{ensure_unique, ContractKind, MarketId};
pub use period::{format_ts, PeriodSpec, SubPeriod, MS_PER_DAY, MS_PER_HOUR, MS_PER_MINUTE};

/// Milliseconds since the Unix epoch, UTC.
pub type EpochMs = i64;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("unit mismatch: {left} vs {right}")]
    UnitMismatch { left: Unit, right: Unit },
    #[error("amount cannot be negative: {0}")]
    NegativeAmount(Fixed),
    #[error("price must be positive: {0}")]
    NonPositivePrice(Fixed),
    #[error("conversion to the amount's own unit ({0}) is a caller bug")]
    SameUnitConversion(Unit),
    #[error("events from more than one market: expected {expected}, found {found}")]
    MixedMarkets { expected: String, found: String },
    #[error("invalid market: {0}")]
    InvalidMarket(String),
    #[error("invalid event: {0}")]
    InvalidEvent(String),
    #[error("invalid period: {0}")]
    InvalidPeriod(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("arithmetic overflow")]
    Overflow,
}
