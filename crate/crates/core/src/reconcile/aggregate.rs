use serde::{Deserialize, Serialize};

use crate::model::{Amount, EpochMs, MarketId, PeriodSpec};

use super::{IntervalLedger, ReconcileError};

/// Totals over a period: open-interest total variation, total volume and
/// their excess.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodAudit {
    pub market: MarketId,
    pub period: PeriodSpec,
    pub o_tv: Amount,
    pub v_t: Amount,
    /// `max(o_tv - v_t, 0)`.
    pub x_tv: Amount,
    /// Sum of per-interval excess, i.e. flooring each interval before summing.
    pub interval_excess: Amount,
    pub intervals: usize,
    pub invalid_intervals: usize,
    /// Set when a feed outage or invalid interval overlaps the period, or no
    /// audited interval covers it. Excluded periods do not enter sub-period
    /// statistics.
    pub excluded: bool,
}

impl PeriodAudit {
    pub fn has_excess(&self) -> bool {
        !self.x_tv.is_zero()
    }
}

/// Sums valid intervals whose `t_end` falls in `period`.
///
/// Invalid intervals are counted but contribute nothing. An empty slice
/// yields a zero audit with `intervals == 0`.
pub fn aggregate(
    market: &MarketId,
    intervals: &[IntervalLedger],
    period: PeriodSpec,
) -> Result<PeriodAudit, ReconcileError> {
    let unit = market.native_unit();
    let mut o_tv = Amount::zero(unit);
    let mut v_t = Amount::zero(unit);
    let mut interval_excess = Amount::zero(unit);
    let mut invalid = 0usize;
    for iv in intervals {
        if !period.contains(iv.t_end) {
            return Err(ReconcileError::IntervalOutsidePeriod { t_end: iv.t_end, start: period.start, end: period.end });
        }
        if !iv.valid {
            invalid += 1;
            continue;
        }
        o_tv = o_tv.checked_add(iv.mtv)?;
        v_t = v_t.checked_add(iv.volume)?;
        interval_excess = interval_excess.checked_add(iv.excess)?;
    }
    Ok(PeriodAudit {
        market: market.clone(),
        period,
        x_tv: o_tv.floor_sub(v_t)?,
        o_tv,
        v_t,
        interval_excess,
        intervals: intervals.len(),
        invalid_intervals: invalid,
        excluded: false,
    })
}

/// One audit per calendar window of `period.subperiod`, intervals assigned
/// to the window holding their `t_end`.
///
/// Intervals must be sorted by `t_end` (as produced by reconciliation).
/// Those ending outside `period` are ignored. `outages` are `(from, until]`
/// spans.
pub fn audit_windows(
    market: &MarketId,
    intervals: &[IntervalLedger],
    outages: &[(EpochMs, EpochMs)],
    period: PeriodSpec,
) -> Result<Vec<PeriodAudit>, ReconcileError> {
    let windows = period.windows();
    let lo = intervals.partition_point(|iv| iv.t_end < period.start);
    let hi = intervals.partition_point(|iv| iv.t_end <= period.end);
    let inside = &intervals[lo..hi];
    let covered = intervals.first().zip(intervals.last()).map(|(a, b)| (a.t_start, b.t_end));

    let mut out = Vec::with_capacity(windows.len());
    let mut cursor = 0usize;
    for w in windows {
        let start = cursor;
        while cursor < inside.len() && inside[cursor].t_end <= w.end {
            cursor += 1;
        }
        let mut audit = aggregate(market, &inside[start..cursor], w)?;
        audit.excluded = audit.invalid_intervals > 0
            || !covered.is_some_and(|(s, e)| s < w.end && e >= w.start)
            || outages.iter().any(|&(from, until)| from < w.end && until >= w.start)
            || overlaps_invalid(intervals, w);
        out.push(audit);
    }
    Ok(out)
}

/// An invalid interval `(s, e]` that reaches into the window from outside it.
fn overlaps_invalid(intervals: &[IntervalLedger], w: PeriodSpec) -> bool {
    let first = intervals.partition_point(|iv| iv.t_end < w.start);
    intervals[first..].iter().take_while(|iv| iv.t_start < w.end).any(|iv| !iv.valid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ContractKind, Fixed, SubPeriod, Unit};

    fn usd(v: i64) -> Amount {
        Amount::new(Fixed::from_int(v), Unit::Usd).unwrap()
    }

    fn market() -> MarketId {
        MarketId::new("bybit", "BTC_USD_IP", ContractKind::InversePerp).unwrap()
    }

    fn iv(t_start: i64, t_end: i64, mtv: i64, volume: i64) -> IntervalLedger {
        IntervalLedger {
            t_start,
            t_end,
            oi_start: usd(0),
            oi_end: usd(mtv),
            volume: usd(volume),
            mtv: usd(mtv),
            excess: usd(mtv).floor_sub(usd(volume)).unwrap(),
            carried_from_next: usd(0),
            valid: true,
            last_price: None,
        }
    }

    #[test]
    fn equality_case_has_no_excess() {
        let p = PeriodSpec::new(1, 100, SubPeriod::Full).unwrap();
        let a = aggregate(&market(), &[iv(1, 10, 5, 5), iv(10, 20, 5, 5)], p).unwrap();
        assert_eq!((a.o_tv, a.v_t, a.x_tv), (usd(10), usd(10), usd(0)));
    }

    #[test]
    fn bybit_inverse_period_one_row() {
        let p = PeriodSpec::new(1, 100, SubPeriod::Full).unwrap();
        let a = aggregate(&market(), &[iv(1, 10, 12_088_654_910, 6_570_819_230)], p).unwrap();
        assert_eq!(a.x_tv, usd(5_517_835_680));
    }

    #[test]
    fn empty_input_is_no_data() {
        let p = PeriodSpec::new(1, 100, SubPeriod::Full).unwrap();
        let a = aggregate(&market(), &[], p).unwrap();
        assert_eq!((a.intervals, a.x_tv), (0, usd(0)));
    }

    #[test]
    fn invalid_intervals_are_counted_and_skipped() {
        let p = PeriodSpec::new(1, 100, SubPeriod::Full).unwrap();
        let mut bad = iv(10, 20, 50, 0);
        bad.valid = false;
        let a = aggregate(&market(), &[iv(1, 10, 5, 5), bad], p).unwrap();
        assert_eq!((a.intervals, a.invalid_intervals, a.x_tv), (2, 1, usd(0)));
    }

    #[test]
    fn rejects_interval_outside_period() {
        let p = PeriodSpec::new(1, 100, SubPeriod::Full).unwrap();
        assert!(aggregate(&market(), &[iv(100, 101, 1, 1)], p).is_err());
    }

    #[test]
    fn windows_split_by_interval_end() {
        let m = 60_000;
        let p = PeriodSpec::new(0, 3 * m - 1, SubPeriod::Min1).unwrap();
        let ivs = vec![iv(1, m - 1, 10, 0), iv(m - 1, m + 5, 10, 20), iv(m + 5, 2 * m + 1, 3, 3)];
        let w = audit_windows(&market(), &ivs, &[], p).unwrap();
        assert_eq!(w.len(), 3);
        assert_eq!(w[0].x_tv, usd(10));
        assert_eq!(w[1].x_tv, usd(0));
        assert_eq!(w[2].o_tv, usd(3));
        assert!(w.iter().all(|a| !a.excluded));
        // coarse x_tv never exceeds the sum of the finer ones
        let full = aggregate(&market(), &ivs, p.with_subperiod(SubPeriod::Full)).unwrap();
        let fine: Fixed = w.iter().map(|a| a.x_tv.value()).sum();
        assert!(full.x_tv.value() <= fine);
    }

    #[test]
    fn outages_and_uncovered_windows_are_excluded() {
        let m = 60_000;
        let p = PeriodSpec::new(0, 4 * m - 1, SubPeriod::Min1).unwrap();
        let ivs = vec![iv(10, m + 10, 0, 0), iv(m + 10, 2 * m + 10, 0, 0)];
        let w = audit_windows(&market(), &ivs, &[(2 * m + 20, 2 * m + 30)], p).unwrap();
        assert_eq!(w.iter().map(|a| a.excluded).collect::<Vec<_>>(), vec![false, false, true, true]);
    }
}
