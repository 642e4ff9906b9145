//! Reconciliation of open-interest changes against reported volume.
//!
//! Every pair of consecutive open-interest observations bounds an interval
//! `(t_start, t_end]`. The interval's minimal trading volume is the absolute
//! OI change; the volume that explains it is every trade, block trade and
//! liquidation stamped inside the interval, plus trades stamped up to `tau`
//! milliseconds after `t_end` when they are needed to cover the change.
//! Carried trades are removed from the interval they would otherwise belong
//! to, so no volume is counted twice.

mod aggregate;
mod intervals;
mod series;

use serde::{Deserialize, Serialize};

use crate::model::{Amount, EpochMs, ModelError, SubPeriod};

pub use aggregate::{aggregate, audit_windows, PeriodAudit};
pub use intervals::{build_intervals, mtv, reconcile, Reconciliation};
pub use series::{tick_excess_series, TickPoint};

/// Upper bound on the latency allowance.
pub const MAX_TAU_MS: u32 = 1_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalMode {
    /// One interval per open-interest observation.
    PerOiUpdate,
    /// Calendar-aligned boundaries, OI sampled-and-held at each boundary.
    Fixed(SubPeriod),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AuditConfig {
    pub tau_ms: u32,
    pub interval_mode: IntervalMode,
    /// Consecutive OI samples further apart than this multiple of the median
    /// sample spacing mark the spanned intervals invalid. `None` disables it.
    pub stale_factor: Option<u32>,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig { tau_ms: 1, interval_mode: IntervalMode::PerOiUpdate, stale_factor: Some(2) }
    }
}

impl AuditConfig {
    pub fn with_tau(tau_ms: u32) -> Self {
        AuditConfig { tau_ms, ..AuditConfig::default() }
    }

    pub fn validate(&self) -> Result<(), ReconcileError> {
        if self.tau_ms > MAX_TAU_MS {
            return Err(ReconcileError::TauTooLarge(self.tau_ms));
        }
        if self.stale_factor == Some(0) {
            return Err(ReconcileError::Config("stale_factor must be positive".into()));
        }
        Ok(())
    }
}

/// Bookkeeping for one reconciliation interval `(t_start, t_end]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalLedger {
    pub t_start: EpochMs,
    pub t_end: EpochMs,
    pub oi_start: Amount,
    pub oi_end: Amount,
    /// Volume attributed to this interval, carried volume included.
    pub volume: Amount,
    pub mtv: Amount,
    pub excess: Amount,
    /// Volume stamped in `(t_end, t_end + tau]` attributed here.
    pub carried_from_next: Amount,
    pub valid: bool,
    /// Last trade price stamped at or before `t_end`.
    pub last_price: Option<crate::model::Price>,
}

impl IntervalLedger {
    /// Whether the interval satisfies `volume >= |ΔOI|`.
    pub fn reconciled(&self) -> bool {
        self.excess.is_zero()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReconcileError {
    #[error("no open interest feed")]
    NoOpenInterest,
    #[error("need at least two open interest samples, found {0}")]
    TooFewSamples(usize),
    #[error("events are not ordered by (ts, seq) at index {index}; order them first")]
    NotOrdered { index: usize },
    #[error("tau {0} ms exceeds the {MAX_TAU_MS} ms bound")]
    TauTooLarge(u32),
    #[error("interval ending at {t_end} lies outside period [{start}, {end}]")]
    IntervalOutsidePeriod { t_end: EpochMs, start: EpochMs, end: EpochMs },
    #[error("invalid audit config: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}
