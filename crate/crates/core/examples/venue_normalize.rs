// Normalizes raw venue payloads with the bundled venue catalog.

use std::error::Error;

use oi_audit::ingest::{Feed, Outcome, VenueCatalog};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let catalog = VenueCatalog::builtin();
    let payloads = [
        (
            "bybit",
            "BTC_USD_IP",
            Feed::Ws,
            r#"{"topic":"publicTrade.BTCUSD","type":"snapshot","ts":1672304486868,"data":[{"T":1672304486865,"s":"BTCUSD","S":"Buy","v":"1000","p":"16578.50","L":"PlusTick","i":"a1","BT":false}]}"#,
        ),
        (
            "okx",
            "BTC_USD_IP",
            Feed::Rest,
            r#"{"code":"0","msg":"","data":[{"instType":"SWAP","instId":"BTC-USD-SWAP","oi":"4500000","oiCcy":"27272.7","ts":"1672531200000"}]}"#,
        ),
        ("bybit", "BTC_USD_IP", Feed::Ws, r#"{"success":true,"ret_msg":"pong","conn_id":"c","op":"ping"}"#),
        ("bybit", "BTC_USD_IP", Feed::Ws, r#"{"surprise":true}"#),
    ];
    for (exchange, symbol, feed, text) in payloads {
        let cfg = catalog.market(exchange, symbol).ok_or("market missing from catalog")?;
        let adapter = catalog.adapter(cfg)?;
        match adapter.normalize(feed, text).outcome {
            Outcome::Events(obs) => {
                for o in obs {
                    println!("{exchange}/{symbol}: {} ts {:?} value {} price {:?}", o.kind, o.ts, o.value, o.price);
                }
            }
            Outcome::Ignored { rule } => println!("{exchange}/{symbol}: ignored by rule {rule}"),
            Outcome::Quarantined { reason } => println!("{exchange}/{symbol}: dead-lettered ({reason})"),
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
