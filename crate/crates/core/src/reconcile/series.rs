use serde::Serialize;

use crate::model::{Amount, EpochMs, Price};

use super::IntervalLedger;

/// One point of the tick-level excess series.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TickPoint {
    pub ts: EpochMs,
    pub excess: Amount,
    /// Last traded price at or before `ts`; absent before the first trade.
    pub last_price: Option<Price>,
    pub valid: bool,
}

/// Excess at every open-interest update, zero points included.
pub fn tick_excess_series(intervals: &[IntervalLedger]) -> Vec<TickPoint> {
    intervals
        .iter()
        .map(|iv| TickPoint { ts: iv.t_end, excess: iv.excess, last_price: iv.last_price, valid: iv.valid })
        .collect()
}
