// Aggregates interval ledgers into period totals and prints the period
// table, converting coin-denominated rows to dollars.

use std::error::Error;

use oi_audit::model::{Amount, ContractKind, Fixed, MarketId, PeriodSpec, Price, SubPeriod};
use oi_audit::reconcile::{aggregate, IntervalLedger};
use oi_audit::report::format::with_usd;

fn ledger(t_start: i64, t_end: i64, mtv: Amount, volume: Amount) -> Result<IntervalLedger, Box<dyn Error>> {
    Ok(IntervalLedger {
        t_start,
        t_end,
        oi_start: Amount::zero(mtv.unit()),
        oi_end: mtv,
        volume,
        mtv,
        excess: mtv.floor_sub(volume)?,
        carried_from_next: Amount::zero(mtv.unit()),
        valid: true,
        last_price: None,
    })
}

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let period = PeriodSpec::parse_range("2023-01-01..2023-01-31", SubPeriod::Full)?;
    let price = Price::new(Fixed::from_int(20_625))?;
    let rows = [
        ("bybit", "BTC_USD_IP", ContractKind::InversePerp, 12_088_654_910i64, 6_570_819_230i64),
        ("binance", "BTC_USDT_P", ContractKind::LinearPerp, 2_084_275, 4_050_268),
    ];
    for (exchange, symbol, kind, o, v) in rows {
        let market = MarketId::new(exchange, symbol, kind)?;
        let unit = market.native_unit();
        let amt = |x: i64| Amount::new(Fixed::from_int(x), unit);
        let mid = (period.start + period.end) / 2;
        let intervals = [
            ledger(period.start, mid, amt(o / 3)?, amt(v / 2)?)?,
            ledger(mid, period.end, amt(o - o / 3)?, amt(v - v / 2)?)?,
        ];
        let audit = aggregate(&market, &intervals, period)?;
        let p = (unit != oi_audit::model::Unit::Usd).then_some(price);
        println!(
            "{:<20} O_TV {:<28} V_T {:<28} X_TV {}",
            market.to_string(),
            with_usd(audit.o_tv, p),
            with_usd(audit.v_t, p),
            with_usd(audit.x_tv, p)
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
