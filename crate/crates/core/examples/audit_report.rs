// Audits two captured markets and writes the report directory.

use std::error::Error;

use oi_audit::ingest::capture;
use oi_audit::model::{ContractKind, Fixed};
use oi_audit::report::{audit_captures, write_reports, AuditParams};
use oi_audit::simulate::{generate, EffectWeights, ReportingPolicy, ScenarioSpec, SizeDist};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let dir = tempfile::tempdir()?;
    let mut inputs = Vec::new();

    let mut linear = ScenarioSpec::new(30, 20_000, 5, ReportingPolicy::Hide { fraction: 0.4 });
    linear.effect_weights = EffectWeights { increase: 1.0, transfer: 0.0, decrease: 1.0 };
    linear.oi_report_cadence_ms = 1;
    linear.min_step_ms = 3;
    let mut inverse = ScenarioSpec::new(30, 20_000, 6, ReportingPolicy::Honest);
    inverse.exchange = "other".into();
    inverse.symbol = "BTC_USD_IP".into();
    inverse.contract_kind = ContractKind::InversePerp;
    inverse.lot_size = Fixed::ONE;
    inverse.trade_size_dist = SizeDist::Uniform { min: Fixed::ONE, max: Fixed::from_int(10_000) };

    for spec in [linear, inverse] {
        let sim = generate(&spec)?;
        let path = dir.path().join(format!("{}.cap", sim.market.file_stem()));
        capture(&sim.reported_stream, sim.market.clone(), &path)?;
        inputs.push(path);
    }

    let params = AuditParams::default();
    let results = audit_captures(&inputs, &params)?;
    let out = dir.path().join("report");
    let manifest = write_reports(&out, &results, &params)?;
    print!("{}", std::fs::read_to_string(out.join("period.txt"))?);
    print!("{}", std::fs::read_to_string(out.join("subperiods.txt"))?);
    for o in &manifest.outputs {
        println!("{:<32} {}", o.path, &o.sha256[..16]);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
