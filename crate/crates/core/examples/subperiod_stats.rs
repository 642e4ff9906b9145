// Probability of excess and conditional mean excess over one-minute windows.

use std::error::Error;

use oi_audit::model::{Amount, ContractKind, Fixed, MarketId, PeriodSpec, SubPeriod, Unit};
use oi_audit::reconcile::{aggregate, IntervalLedger};
use oi_audit::stats::subperiod_stats;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let market = MarketId::new("bitmex", "BTC_USD_IP", ContractKind::InversePerp)?;
    let hour = PeriodSpec::parse_range("2023-01-01..2023-01-01", SubPeriod::Min1)?;
    let usd = |x: i64| Amount::new(Fixed::from_int(x), Unit::Usd);

    // per-minute excess of 0, 10, 0, 30
    let mut audits = Vec::new();
    for (w, x) in hour.windows().into_iter().zip([0i64, 10, 0, 30]) {
        let (mtv, volume) = (usd(100 + x)?, usd(100)?);
        let iv = IntervalLedger {
            t_start: w.start,
            t_end: w.end,
            oi_start: usd(0)?,
            oi_end: mtv,
            volume,
            mtv,
            excess: mtv.floor_sub(volume)?,
            carried_from_next: usd(0)?,
            valid: true,
            last_price: None,
        };
        audits.push(aggregate(&market, &[iv], w)?);
    }
    let s = subperiod_stats(&audits)?;
    println!(
        "{}: P(X_TV > 0) = {}% over {} windows, E[X_TV | X_TV > 0] = {}",
        s.subperiod,
        s.p_excess_percent(1),
        s.n_total,
        s.cond_mean_excess
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
