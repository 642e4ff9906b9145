// Prints the tick-level excess series of a venue that hides liquidations.

use std::error::Error;

use oi_audit::reconcile::{reconcile, tick_excess_series, AuditConfig};
use oi_audit::simulate::{generate, EffectWeights, ReportingPolicy, ScenarioSpec};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let mut spec = ScenarioSpec::new(30, 3_000, 21, ReportingPolicy::Hide { fraction: 0.5 });
    spec.effect_weights = EffectWeights { increase: 1.0, transfer: 0.0, decrease: 1.0 };
    spec.oi_report_cadence_ms = 1;
    spec.min_step_ms = 3;
    spec.liquidation_share = 0.2;
    let sim = generate(&spec)?;
    let rec = reconcile(&sim.reported_stream, &AuditConfig::with_tau(1))?;
    let ticks = tick_excess_series(&rec.intervals);
    let spikes: Vec<_> = ticks.iter().filter(|t| !t.excess.is_zero()).collect();
    println!("{} ticks, {} with excess", ticks.len(), spikes.len());
    for t in spikes.iter().take(8) {
        let price = t.last_price.map(|p| p.to_string()).unwrap_or_else(|| "-".into());
        println!("  ts {}  excess {}  last price {price}", t.ts, t.excess.value());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
