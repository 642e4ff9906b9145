//! Sub-period statistics: how often a window shows excess total variation,
//! and how large that excess is on average when it does.

use serde::{Deserialize, Serialize};

use crate::model::{Amount, Fixed, MarketEvent, MarketId, PeriodSpec, Price, SubPeriod};
use crate::reconcile::PeriodAudit;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StatsError {
    #[error("no coverage: no valid sub-period to summarize")]
    NoCoverage,
    #[error("audits mix markets or sub-period granularities")]
    Mixed,
    #[error("no price basis: no trades in period")]
    NoPriceBasis,
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubPeriodStats {
    pub market: MarketId,
    pub subperiod: SubPeriod,
    /// Valid windows (outage-free, covered).
    pub n_total: u64,
    /// Valid windows with `x_tv > 0`.
    pub n_excess: u64,
    /// Exact sum of `x_tv` over the excess windows.
    pub excess_sum: Amount,
    /// `excess_sum / n_excess`, rounded half-even; zero when `n_excess == 0`.
    pub cond_mean_excess: Amount,
    pub avg_price: Option<Price>,
}

impl SubPeriodStats {
    /// `n_excess / n_total`.
    pub fn p_excess(&self) -> f64 {
        self.n_excess as f64 / self.n_total as f64
    }

    /// The probability as a percentage rounded half-even to `dp` digits,
    /// computed exactly.
    pub fn p_excess_percent(&self, dp: u32) -> Fixed {
        Fixed::from_int(self.n_excess as i64 * 100)
            .checked_div_int(self.n_total)
            .expect("n_total is positive")
            .round_dp(dp)
    }

    pub fn with_avg_price(mut self, price: Price) -> Self {
        self.avg_price = Some(price);
        self
    }
}

/// Probability of excess and conditional mean excess over one market's
/// windows of one granularity. Excluded windows are skipped.
pub fn subperiod_stats(audits: &[PeriodAudit]) -> Result<SubPeriodStats, StatsError> {
    let first = audits.first().ok_or(StatsError::NoCoverage)?;
    let market = &first.market;
    let subperiod = first.period.subperiod;
    let unit = market.native_unit();
    let mut n_total = 0u64;
    let mut n_excess = 0u64;
    let mut sum = Amount::zero(unit);
    for a in audits {
        if a.market != *market || a.period.subperiod != subperiod {
            return Err(StatsError::Mixed);
        }
        if a.excluded {
            continue;
        }
        n_total += 1;
        if a.has_excess() {
            n_excess += 1;
            sum = sum.checked_add(a.x_tv)?;
        }
    }
    if n_total == 0 {
        return Err(StatsError::NoCoverage);
    }
    let mean = if n_excess == 0 {
        Amount::zero(unit)
    } else {
        Amount::new(sum.value().checked_div_int(n_excess).expect("n_excess is positive"), unit)?
    };
    Ok(SubPeriodStats {
        market: market.clone(),
        subperiod,
        n_total,
        n_excess,
        excess_sum: sum,
        cond_mean_excess: mean,
        avg_price: None,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriceWeighting {
    /// Arithmetic mean of trade prices.
    #[default]
    Unweighted,
    /// Mean weighted by trade size.
    Volume,
}

/// Average trade price over `period`, rounded half-even to eight digits.
pub fn avg_price(trades: &[MarketEvent], period: &PeriodSpec, weighting: PriceWeighting) -> Result<Price, StatsError> {
    let mut num = Fixed::ZERO;
    let mut den = Fixed::ZERO;
    let mut count = 0u64;
    for ev in trades.iter().filter(|e| e.is_trade_like() && period.contains(e.ts)) {
        let Some(p) = ev.price else { continue };
        match weighting {
            PriceWeighting::Unweighted => num = num + p.value(),
            PriceWeighting::Volume => {
                // keep the numerator at 1e-16 resolution: price*size rounding
                // would otherwise bias small trades
                let w = ev.size_or_value.value();
                num = Fixed::from_raw(num.raw() + p.value().raw() * w.raw());
                den = den + w;
            }
        }
        count += 1;
    }
    if count == 0 {
        return Err(StatsError::NoPriceBasis);
    }
    let mean = match weighting {
        PriceWeighting::Unweighted => num.checked_div_int(count),
        PriceWeighting::Volume => Fixed::from_raw(num.raw() / crate::model::SCALE).checked_div(den),
    }
    .ok_or(StatsError::NoPriceBasis)?;
    Ok(Price::new(mean)?)
}
