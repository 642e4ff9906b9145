// Checks the auditor against a simulation's ground truth.

use std::error::Error;

use oi_audit::report::{verify_dir, write_simulation};
use oi_audit::simulate::{generate, EffectWeights, ReportingPolicy, ScenarioSpec};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let dir = tempfile::tempdir()?;
    for (name, policy) in [("delay", ReportingPolicy::Delay { ms: 750 }), ("hide", ReportingPolicy::Hide { fraction: 0.3 })] {
        let mut spec = ScenarioSpec::new(50, 20_000, 7, policy);
        spec.effect_weights = EffectWeights { increase: 1.0, transfer: 0.0, decrease: 1.0 };
        spec.oi_report_cadence_ms = 1;
        spec.min_step_ms = 3;
        spec.mean_step_ms = 20;
        let sim = generate(&spec)?;
        let out = dir.path().join(name);
        write_simulation(&sim, &spec, &out)?;
        let report = verify_dir(&out, 1)?;
        print!("{}", report.render());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
