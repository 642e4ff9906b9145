// Writes a capture, replays it, then replays a copy whose last record was
// cut short by a crash.

use std::error::Error;

use oi_audit::ingest::{capture, replay, replay_bytes};
use oi_audit::model::MarketEvent;
use oi_audit::simulate::{generate, ReportingPolicy, ScenarioSpec};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let sim = generate(&ScenarioSpec::new(10, 2_000, 1, ReportingPolicy::Honest))?;
    let mut events = sim.reported_stream;
    let from = events[events.len() / 2].ts;
    events.insert(events.len() / 2, MarketEvent::gap(sim.market.clone(), from, from + 2_000, 0)?);
    for (i, e) in events.iter_mut().enumerate() {
        e.seq = i as u64 + 1;
    }

    let dir = tempfile::tempdir()?;
    let path = dir.path().join(format!("{}.cap", sim.market.file_stem()));
    let written = capture(&events, sim.market.clone(), &path)?;
    let back = replay(&path)?;
    println!("wrote {written} records, replayed {} (identical: {})", back.records.len(), back.events() == events);

    let bytes = std::fs::read(&path)?;
    let cut = replay_bytes(&bytes[..bytes.len() - 10])?;
    if let Some(tail) = cut.truncated {
        println!(
            "cut copy: kept {} records, ignored {} bytes from offset {}",
            cut.records.len(),
            tail.discarded,
            tail.offset
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
