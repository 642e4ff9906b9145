// Reconciles a handful of open-interest samples against trades, including a
// trade published a millisecond after the sample it belongs to.

use std::error::Error;
use std::sync::Arc;

use oi_audit::model::{Amount, ContractKind, EventKind, Fixed, MarketEvent, MarketId, Price};
use oi_audit::reconcile::{reconcile, AuditConfig};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let market = Arc::new(MarketId::new("demo", "BTC_USDT_P", ContractKind::LinearPerp)?);
    let t0 = 1_672_531_200_000;
    let coin = |s: &str| Amount::parse(s, market.native_unit());
    let price = Price::new(Fixed::from_int(20_625))?;

    let events = vec![
        MarketEvent::oi_sample(market.clone(), t0, 1, coin("100")?)?,
        MarketEvent::trade(market.clone(), t0 + 200, 2, EventKind::Trade, coin("1.5")?, price)?,
        MarketEvent::oi_sample(market.clone(), t0 + 500, 3, coin("102")?)?,
        // stamped just after the boundary, still inside the tau window
        MarketEvent::trade(market.clone(), t0 + 501, 4, EventKind::Liquidation, coin("0.5")?, price)?,
        MarketEvent::oi_sample(market.clone(), t0 + 1_000, 5, coin("101")?)?,
        MarketEvent::trade(market.clone(), t0 + 1_200, 6, EventKind::Trade, coin("0.2")?, price)?,
        MarketEvent::oi_sample(market.clone(), t0 + 1_500, 7, coin("104")?)?,
    ];

    for tau in [0, 1] {
        let rec = reconcile(&events, &AuditConfig::with_tau(tau))?;
        println!("tau = {tau} ms");
        for iv in &rec.intervals {
            println!(
                "  ({:>4}, {:>4}]  mtv {:>5}  volume {:>5}  carried {:>4}  excess {}",
                iv.t_start - t0,
                iv.t_end - t0,
                iv.mtv.value(),
                iv.volume.value(),
                iv.carried_from_next.value(),
                iv.excess.value()
            );
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
