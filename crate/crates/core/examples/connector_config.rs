// Reads a run configuration: markets resolved against the bundled venue
// catalog, a private venue declared inline, and audit settings.

use std::error::Error;

use oi_audit::report::RunConfig;

const CONFIG: &str = r#"
[capture]
markets = ["bybit/BTC_USD_IP", "okx/BTC_USDT_P", "lab/BTC_USDT_P"]
duration_s = 3600

[audit]
tau_ms = 1
subperiods = ["full", "1d", "1h", "1min"]
period = "2023-01-01..2023-01-31"

[[market]]
market = { exchange = "lab", symbol = "BTC_USDT_P", contract_kind = "LINEAR_PERP" }
family = "okx_v5"
ws_endpoint = "wss://lab.example/ws"
rest_oi_endpoint = "https://lab.example/oi?inst={symbol}"
symbol_map = "BTC-USDT-SWAP"
oi_poll_ms = 250
"#;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let cfg = RunConfig::parse(CONFIG)?;
    for m in cfg.selected_markets(&[])? {
        m.validate()?;
        println!(
            "{:<20} family {:<10} oi {:?} every {} ms  {}",
            m.market.to_string(),
            m.family,
            m.oi_channel,
            m.oi_poll_ms,
            m.rest_url().unwrap_or_default()
        );
    }
    let params = cfg.audit_params()?;
    println!("tau {} ms, sub-periods {:?}", params.audit.tau_ms, params.subperiods);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
